"""Regenerate the bundled synthetic cases under src/mauc/cases/.

The costs and unit data are synthetic; topologies for demo14 follow the
IEEE 14-bus network split into two areas.
"""

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "mauc" / "cases"

# 24-hour load shape, peak at hour 18
PROFILE = [0.62, 0.58, 0.56, 0.55, 0.57, 0.63, 0.72, 0.82, 0.88, 0.91, 0.93, 0.94,
           0.93, 0.92, 0.92, 0.93, 0.96, 1.00, 0.99, 0.95, 0.89, 0.81, 0.73, 0.66]


def gen(id, bus, pmin, pmax, cq, cl, nl, su, hs, sd, mu, md, tc, ramp, on, dur, su_cap=None, sd_cap=None,
        p0=None):
    d = {
        "id": id, "bus_id": bus, "p_min": pmin, "p_max": pmax,
        "p_su_max": su_cap if su_cap is not None else pmax,
        "p_sd_max": sd_cap if sd_cap is not None else pmax,
        "ramp_up": ramp, "ramp_down": ramp,
        "min_up": mu, "min_down": md, "cold_start_time": tc,
        "cost_q": cq, "cost_l": cl, "cost_noload": nl, "cost_startup": su,
        "cost_hot_startup": hs, "cost_shutdown": sd,
        "initial_status_on": on, "initial_status_duration": dur,
    }
    if p0 is not None:
        d["initial_output"] = p0
    return d


def line(id, f, t, x, lim):
    return {"id": id, "from_bus": f, "to_bus": t, "reactance": x, "flow_limit": lim}


def micro2():
    return {
        "name": "micro2", "horizon": 4, "base_mva": 100.0,
        "areas": [{"id": "A"}, {"id": "B"}],
        "buses": [
            {"id": "b1", "area_id": "A", "demand": [40.0, 60.0, 90.0, 50.0]},
            {"id": "b2", "area_id": "B", "demand": [90.0, 100.0, 150.0, 110.0]},
        ],
        "branches": [line("t1", "b1", "b2", 0.1, 100.0)],
        "generators": [
            gen("g1", "b1", 20.0, 200.0, 0.05, 15.0, 120.0, 400.0, 200.0, 30.0, 2, 1, 2, 100.0, True, 4),
            gen("g2", "b2", 10.0, 150.0, 0.05, 25.0, 60.0, 150.0, 80.0, 10.0, 1, 1, 2, 120.0, True, 2),
        ],
    }


def demo4():
    return {
        "name": "demo4", "horizon": 3, "base_mva": 100.0,
        "areas": [{"id": "A"}, {"id": "B"}],
        "buses": [
            {"id": "b1", "area_id": "A", "demand": [20.0, 30.0, 25.0]},
            {"id": "b2", "area_id": "A", "demand": [30.0, 40.0, 35.0]},
            {"id": "b3", "area_id": "B", "demand": [25.0, 35.0, 30.0]},
            {"id": "b4", "area_id": "B", "demand": [20.0, 25.0, 20.0]},
        ],
        "branches": [
            line("l12", "b1", "b2", 0.1, 100.0),
            line("l34", "b3", "b4", 0.1, 100.0),
            line("t13", "b1", "b3", 0.2, 60.0),
            line("t24", "b2", "b4", 0.2, 60.0),
        ],
        "generators": [
            gen("g1", "b1", 10.0, 120.0, 0.01, 18.0, 50.0, 200.0, 100.0, 10.0, 1, 1, 2, 120.0, True, 3),
            gen("g3", "b3", 10.0, 100.0, 0.02, 30.0, 40.0, 100.0, 50.0, 10.0, 1, 1, 2, 100.0, True, 3),
        ],
    }


IEEE14_LINES = [
    (1, 2, 0.05917), (1, 5, 0.22304), (2, 3, 0.19797), (2, 4, 0.17632), (2, 5, 0.17388),
    (3, 4, 0.17103), (4, 5, 0.04211), (4, 7, 0.20912), (4, 9, 0.55618), (5, 6, 0.25202),
    (6, 11, 0.19890), (6, 12, 0.25581), (6, 13, 0.13027), (7, 8, 0.17615), (7, 9, 0.11001),
    (9, 10, 0.08450), (9, 14, 0.27038), (10, 11, 0.19207), (12, 13, 0.19988), (13, 14, 0.34802),
]
IEEE14_LOAD = {2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 9: 29.5, 10: 9.0, 11: 3.5,
               12: 6.1, 13: 13.5, 14: 14.9}


def demo14():
    area = {b: ("A1" if b <= 5 else "A2") for b in range(1, 15)}
    # area-2 load shifted later in the day so the best transfer varies by hour
    prof2 = PROFILE[-2:] + PROFILE[:-2]
    buses = []
    for b in range(1, 15):
        base = IEEE14_LOAD.get(b, 0.0)
        prof = PROFILE if area[b] == "A1" else prof2
        buses.append({"id": f"b{b:02d}", "area_id": area[b],
                      "demand": [round(base * s * 1.15, 3) for s in prof]})
    limits = {(4, 7): 45.0, (4, 9): 25.0, (5, 6): 45.0, (1, 2): 160.0, (1, 5): 90.0}
    branches = [line(f"l{f:02d}_{t:02d}", f"b{f:02d}", f"b{t:02d}", x, limits.get((f, t), 100.0))
                for f, t, x in IEEE14_LINES]
    gens = [
        gen("g1", "b01", 40.0, 200.0, 0.006, 24.0, 320.0, 1800.0, 900.0, 100.0, 4, 3, 6, 70.0, True, 8),
        gen("g2", "b02", 20.0, 100.0, 0.012, 33.0, 160.0, 500.0, 250.0, 40.0, 3, 2, 4, 50.0, True, 6),
        gen("g3", "b03", 10.0, 60.0, 0.025, 48.0, 70.0, 180.0, 90.0, 20.0, 1, 1, 2, 60.0, False, 3),
        gen("g6", "b06", 25.0, 160.0, 0.005, 16.0, 260.0, 1200.0, 600.0, 80.0, 4, 3, 5, 60.0, True, 10),
        gen("g8", "b08", 10.0, 70.0, 0.018, 40.0, 90.0, 260.0, 130.0, 25.0, 2, 2, 3, 45.0, False, 5),
    ]
    for g in gens:
        if g["initial_status_on"]:
            g["initial_output"] = round(0.6 * g["p_max"], 1)
    return {"name": "demo14", "horizon": 24, "base_mva": 100.0,
            "areas": [{"id": "A1", "name": "west"}, {"id": "A2", "name": "east"}],
            "buses": buses, "branches": branches, "generators": gens}


def demo3area(shifts=(0, 6, 12), expo=(1, 1, 1), scales=(0.8, 1.6, 1.5), tie_limits=(110.0, 80.0),
              base_q=(0.04, 0.12, 0.12), base_max=(120.0, 110.0), peak_l=(32.0, 33.0), peak_nl=(40.0, 50.0)):
    """Three areas in a chain: cheap R1 exports into R2, which passes power on to R3.

    The keyword arguments are the design knobs that were swept when building
    the case; the defaults are the bundled configuration.
    """
    rng = np.random.default_rng(2024)
    areas = ["R1", "R2", "R3"]
    buses, branches = [], []
    n_per = 7
    # each area: a ring of 7 buses with one chord; load peaks staggered by area
    # so the economic tie flows swing through the day
    for a_idx, a in enumerate(areas):
        ids = [f"b{a_idx * n_per + k + 1:02d}" for k in range(n_per)]
        shift = shifts[a_idx]
        prof = PROFILE[-shift:] + PROFILE[:-shift] if shift else PROFILE
        scale = scales[a_idx]
        lim = [250.0, 150.0, 150.0][a_idx]  # the exporting area's ring carries the transfer
        for k, bid in enumerate(ids):
            load = 0.0 if k == 0 else float(rng.uniform(8, 22)) * scale
            buses.append({"id": bid, "area_id": a, "demand": [round(load * s ** expo[a_idx], 3) for s in prof]})
        for k in range(n_per):
            f, t = ids[k], ids[(k + 1) % n_per]
            branches.append(line(f"l{f}_{t}", f, t, round(float(rng.uniform(0.05, 0.15)), 4), lim))
        branches.append(line(f"l{ids[1]}_{ids[4]}", ids[1], ids[4], 0.12, lim))
    # areas in a chain, one tie-line per neighbouring pair
    ties = [("b03", "b10", 0.1, tie_limits[0]), ("b13", "b19", 0.14, tie_limits[1])]
    for f, t, x, lim in ties:
        branches.append(line(f"t{f}_{t}", f, t, x, lim))
    gens = [
        # one base unit per area, able to cover its own area alone but steeply
        # priced at the top; long minimum up time keeps them online all day
        gen("g01", "b01", 30.0, 300.0, base_q[0], 14.0, 250.0, 1500.0, 750.0, 80.0, 30, 4, 6, 100.0, True, 4),
        gen("g08", "b08", 10.0, base_max[0], base_q[1], 20.0, 200.0, 900.0, 450.0, 60.0, 30, 3, 5, 90.0, True, 4),
        gen("g15", "b15", 10.0, base_max[1], base_q[2], 21.0, 180.0, 700.0, 350.0, 50.0, 30, 3, 4, 90.0, True, 4),
        # peakers: free to cycle
        gen("g02", "b04", 10.0, 60.0, 0.02, 30.0, 40.0, 120.0, 60.0, 10.0, 1, 1, 2, 60.0, False, 4),
        gen("g09", "b09", 10.0, 60.0, 0.02, peak_l[0], peak_nl[0], 120.0, 60.0, 10.0, 2, 1, 2, 60.0, False, 2),
        gen("g18", "b18", 10.0, 60.0, 0.025, peak_l[1], peak_nl[1], 150.0, 75.0, 15.0, 1, 1, 3, 60.0, False, 3),
        gen("g20", "b20", 5.0, 30.0, 0.03, 45.0, 30.0, 90.0, 45.0, 10.0, 1, 1, 2, 30.0, False, 6),
    ]
    for g in gens:
        if g["initial_status_on"]:
            g["initial_output"] = round(0.5 * g["p_max"], 1)
    return {"name": "demo3area", "horizon": 24, "base_mva": 100.0,
            "areas": [{"id": a} for a in areas], "buses": buses, "branches": branches, "generators": gens}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fn in (micro2, demo4, demo14, demo3area):
        data = fn()
        (OUT / f"{data['name']}.json").write_text(json.dumps(data, indent=1) + "\n")
        print("wrote", data["name"])


if __name__ == "__main__":
    main()
