from .bnb import BranchRule, Search, SolveConfig, SolveResult, Status, relative_gap, solve_milp
from .model import (
    BigM,
    MilpHyper,
    MilpModel,
    Sense,
    build_milp,
    check_solution,
    compute_big_m,
    decode,
    objective_extras,
    point_from_solution,
)
from .mps import MpsError, export_mps, import_mps, read_mps_string, write_mps_string
from .simplex import BoundedSimplex, LPResult, LPStatus, solve_lp

__all__ = [
    "BigM",
    "BoundedSimplex",
    "BranchRule",
    "LPResult",
    "LPStatus",
    "MilpHyper",
    "MilpModel",
    "MpsError",
    "Search",
    "Sense",
    "SolveConfig",
    "SolveResult",
    "Status",
    "build_milp",
    "check_solution",
    "compute_big_m",
    "decode",
    "export_mps",
    "import_mps",
    "objective_extras",
    "relative_gap",
    "point_from_solution",
    "read_mps_string",
    "solve_lp",
    "solve_milp",
    "write_mps_string",
]
