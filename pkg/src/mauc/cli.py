"""Command-line front end: ``mauc clear | validate | derive-interchange``.

Outputs are plain CSV/JSON.  Every output except ``timing.json`` is a pure
function of (case, config, seed), so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .baselines import (DEFAULT_PEAK_HOURS, InterchangeSchedule, InterfaceDef, default_interfaces,
                        derive_interchange, run_single_area, run_uncoordinated)
from .coordination import COORDINATED, SINGLE, UNCOORDINATED, ClearingResult, run_multi_area_uc
from .model import CaseError, NetworkCase, load_case_file, partition_areas, shared_buses, tie_lines
from .uc import AlgoParams

log = logging.getLogger("mauc")

OUT_ENV = "MAUC_OUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 2, 3
METHODS = (SINGLE, UNCOORDINATED, COORDINATED)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def resolve_case(name: str) -> Path:
    """A filesystem path, or the name of a bundled case (``micro2`` / ``micro2.json``)."""
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    bundled = resources.files("mauc") / "cases" / f"{stem}.json"
    if p.parent == Path(".") and bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"case not found: {name}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            cfg = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: parse error at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - {"case", "method", "params", "interchange", "out", "seed"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    return cfg


def _params(cfg: dict, seed: int | None, threads: int | None) -> AlgoParams:
    try:
        params = AlgoParams.from_dict(cfg.get("params"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None
    if "seed" in cfg:
        params = replace(params, seed=int(cfg["seed"]))
    if seed is not None:
        params = replace(params, seed=seed)
    if threads is not None:
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        params = replace(params, threads=threads)
    return params


def _interchange_block(cfg: dict, case: NetworkCase):
    """Returns (fixed schedule or None, interfaces, mode, peak hours)."""
    block = cfg.get("interchange") or {}
    try:
        interfaces = ([InterfaceDef.from_dict(d) for d in block["interfaces"]] if "interfaces" in block
                      else default_interfaces(case))
        for itf in interfaces:
            itf.validate(case)
        if "interchange" in block:
            return InterchangeSchedule.from_dict({"interfaces": [i.to_dict() for i in interfaces],
                                                  "interchange": block["interchange"]}), interfaces, None, None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"interchange: {exc}") from None
    mode = block.get("mode", "peak_offpeak")
    if mode not in ("constant", "peak_offpeak"):
        raise ConfigError(f"interchange: unknown mode {mode!r}")
    peak = tuple(int(h) for h in block.get("peak_hours", DEFAULT_PEAK_HOURS))
    return None, interfaces, mode, peak


# ---------------------------------------------------------------------------
# writers


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def costs_doc(res: ClearingResult) -> dict:
    doc = {
        "method": res.method,
        "feasible": bool(res.feasible),
        "converged": bool(res.converged),
        "cost_total": _num(res.cost_total),
        "breakdown": {k: _num(v) for k, v in res.cost.as_dict().items()} if res.cost else None,
        "message": res.message,
    }
    if res.method == COORDINATED:
        doc["best_restart"] = res.best_restart
        doc["best_iteration"] = res.best_iteration
        doc["lmp_source"] = res.info.get("lmp_source")
    if "infeasible_area" in res.info:
        doc["infeasible_area"] = res.info["infeasible_area"]
    if res.method == SINGLE:
        doc["miqp_status"] = res.info.get("miqp_status")
        doc["proven_gap"] = _num(res.info.get("proven_gap", math.nan))
    return doc


def result_files(case: NetworkCase, res: ClearingResult) -> dict[str, str]:
    files = {"costs.json": _json(costs_doc(res))}
    trace_rows = [[r.get("phase", ""), r.get("restart", ""), r.get("iteration", ""),
                   repr(float(r["cost"])) if "cost" in r and math.isfinite(r["cost"]) else "",
                   int(bool(r.get("feasible", False))),
                   repr(float(r["r_inf"])) if "r_inf" in r and math.isfinite(r["r_inf"]) else "",
                   repr(float(r["s_inf"])) if "s_inf" in r and math.isfinite(r["s_inf"]) else ""]
                  for r in res.trace]
    files["trace.csv"] = _csv(trace_rows, ["phase", "restart", "iter", "cost", "feasible", "r_inf", "s_inf"])
    if res.schedule is None:
        return files
    s = res.schedule
    T = case.horizon
    files["commitment.csv"] = _csv(
        [[g, t + 1, int(s.u[k, t]), int(round(s.v[k, t])), int(round(s.vH[k, t])), int(round(s.w[k, t]))]
         for k, g in enumerate(s.gen_ids) for t in range(T)], ["g", "t", "u", "v", "vH", "w"])
    P = res.output(case)
    files["dispatch.csv"] = _csv([[g, t + 1, repr(float(P[k, t]))] for k, g in enumerate(s.gen_ids)
                                  for t in range(T)], ["g", "t", "MW"])
    if res.lmps is not None:
        rows = []
        for b in case.buses:
            i = case.bus_index[b.id]
            for t in range(T):
                rows.append([b.id, "*", t + 1, repr(float(res.lmps[i, t]))])
                for a in sorted(res.lmp_by_area):
                    if b.id in res.lmp_by_area[a]:
                        rows.append([b.id, a, t + 1, repr(float(res.lmp_by_area[a][b.id][t]))])
        files["lmps.csv"] = _csv(rows, ["bus", "area", "t", "lmp"])
    return files


def _commit_outputs(out: Path, files: dict[str, str]):
    """Write everything to a scratch directory first so failures leave nothing behind."""
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".mauc-", dir=out.parent))
    try:
        for rel, text in files.items():
            p = tmp / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8", newline="\n")
        out.mkdir(parents=True, exist_ok=True)
        for p in sorted(tmp.rglob("*")):
            if p.is_file():
                dest = out / p.relative_to(tmp)
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(p, dest)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# commands


def savings_fraction(c_single: float, c_unc: float, c_coord: float) -> float | None:
    denom = c_unc - c_single
    if not all(math.isfinite(c) for c in (c_single, c_unc, c_coord)) or denom <= 0:
        return None
    return (c_unc - c_coord) / denom


def run_methods(case: NetworkCase, method: str, params: AlgoParams, cfg: dict) -> tuple[dict, dict, dict]:
    """Run the requested method(s); returns (results, extra files, wall times)."""
    results: dict[str, ClearingResult] = {}
    extra: dict[str, str] = {}
    fixed, interfaces, mode, peak = _interchange_block(cfg, case)
    if method in (SINGLE, "all") or (method == UNCOORDINATED and fixed is None):
        results[SINGLE] = run_single_area(case, params)
    if method in (UNCOORDINATED, "all"):
        sched = fixed
        if sched is None:
            if not results[SINGLE].feasible:
                raise RuntimeError("cannot derive interchange: single-area clearing is infeasible")
            sched = derive_interchange(results[SINGLE], case, interfaces, mode, peak)
        extra["interchange.json"] = _json(sched.to_dict())
        results[UNCOORDINATED] = run_uncoordinated(case, sched, params)
        if method == UNCOORDINATED:
            results.pop(SINGLE, None)
    if method in (COORDINATED, "all"):
        results[COORDINATED] = run_multi_area_uc(case, params)
    if method == "all":
        c = {m: results[m].cost_total for m in METHODS}
        extra["comparison.json"] = _json({
            "cost_single": _num(c[SINGLE]),
            "cost_uncoordinated": _num(c[UNCOORDINATED]),
            "cost_coordinated": _num(c[COORDINATED]),
            "savings_fraction": savings_fraction(c[SINGLE], c[UNCOORDINATED], c[COORDINATED]),
        })
    timing = {m: r.wall_time for m, r in results.items()}
    return results, extra, timing


def cmd_clear(args) -> int:
    cfg = load_config(args.config)
    case_name = args.case or cfg.get("case")
    if not case_name:
        raise ConfigError("no case given (--case or config 'case')")
    method = args.method or cfg.get("method", "all")
    if method not in METHODS + ("all",):
        raise ConfigError(f"unknown method {method!r}")
    out = args.out or os.environ.get(OUT_ENV) or cfg.get("out")
    if not out:
        raise ConfigError(f"no output directory (--out, ${OUT_ENV} or config 'out')")
    case = load_case_file(resolve_case(case_name))
    params = _params(cfg, args.seed, args.threads)

    results, extra, timing = run_methods(case, method, params, cfg)
    files = dict(extra)
    for m, res in results.items():
        for name, text in result_files(case, res).items():
            files[f"{m}/{name}"] = text
    files["timing.json"] = _json({m: round(t, 3) for m, t in timing.items()})
    _commit_outputs(Path(out), files)

    for m, res in results.items():
        status = "ok" if res.feasible else f"INFEASIBLE ({res.message})"
        print(f"{m:14s} cost {res.cost_total:14.2f}  {status}")
    if "comparison.json" in extra:
        frac = json.loads(extra["comparison.json"])["savings_fraction"]
        print(f"savings fraction: {'n/a' if frac is None else f'{frac:.4f}'}")
    return EXIT_OK if all(r.feasible for r in results.values()) else EXIT_INFEASIBLE


def cmd_validate(args) -> int:
    case = load_case_file(resolve_case(args.case))
    n_ties = len(tie_lines(case))
    n_shared = len(shared_buses(case))
    partition_areas(case)

    def count(n, one, many):
        return f"{n} {one if n == 1 else many}"

    print(f"{count(case.n_buses, 'bus', 'buses')}, {count(len(case.areas), 'area', 'areas')}, "
          f"{count(n_ties, 'tie-line', 'tie-lines')}, {count(n_shared, 'shared bus', 'shared buses')}")
    print(f"{count(case.n_gens, 'generator', 'generators')}, {count(len(case.branches), 'branch', 'branches')}, "
          f"horizon {case.horizon} h: valid")
    return EXIT_OK


def cmd_derive(args) -> int:
    cfg = load_config(args.config)
    case = load_case_file(resolve_case(args.case or cfg.get("case", "")))
    params = _params(cfg, None, args.threads)
    _, interfaces, mode, peak = _interchange_block(cfg, case)
    if args.mode:
        mode = args.mode
    if args.peak_hours:
        peak = tuple(int(h) for h in args.peak_hours.split(","))
    single = run_single_area(case, params)
    if not single.feasible:
        print(f"error: single-area clearing infeasible: {single.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    sched = derive_interchange(single, case, interfaces, mode or "peak_offpeak", peak or DEFAULT_PEAK_HOURS)
    text = _json({"interchange": sched.to_dict()})
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mauc", description="Multi-area day-ahead market clearing.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("clear", help="clear a case with one or all methods")
    c.add_argument("--case")
    c.add_argument("--method", choices=METHODS + ("all",))
    c.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    c.add_argument("--seed", type=int)
    c.add_argument("--config", help="RunConfig JSON")
    c.add_argument("--threads", type=int, help="worker cap for area subproblems (results do not change)")
    c.set_defaults(func=cmd_clear)

    v = sub.add_parser("validate", help="check a case file and print its statistics")
    v.add_argument("--case", required=True)
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("derive-interchange", help="interchange schedule from a single-area run")
    d.add_argument("--case")
    d.add_argument("--config")
    d.add_argument("--mode", choices=("constant", "peak_offpeak"))
    d.add_argument("--peak-hours", help="comma-separated 1-based hours")
    d.add_argument("--out", help="write the schedule here instead of stdout")
    d.add_argument("--threads", type=int)
    d.set_defaults(func=cmd_derive)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CaseError as exc:
        print(f"error: invalid case: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
