"""Multi-area day-ahead unit commitment and market clearing.

Three clearing methods are provided: a centralized single-area MIQP, an
uncoordinated baseline with fixed inter-area interchange, and a consensus-ADMM
heuristic that coordinates the areas through shared boundary angles and
tie-line flows.
"""

from .model import CaseError, NetworkCase, load_case, load_case_file
from .uc import AlgoParams, CommitmentSchedule, cost_eval
from .baselines import derive_interchange, run_single_area, run_uncoordinated
from .coordination import ClearingResult, compute_lmps, run_multi_area_uc

__version__ = "0.1.0"

__all__ = [
    "AlgoParams", "CaseError", "ClearingResult", "CommitmentSchedule", "NetworkCase",
    "compute_lmps", "cost_eval", "derive_interchange", "load_case", "load_case_file",
    "run_multi_area_uc", "run_single_area", "run_uncoordinated",
]
