from .common import (
    CONVERGED,
    HORIZON_COMPLETE,
    ITERATION_BUDGET,
    LINESEARCH_FAILURE,
    ORACLE_BUDGET,
    SUCCESS_STATUSES,
    TIME_BUDGET,
    DivergenceError,
    LineSearcher,
    OptimizeResult,
    OptimizerTrace,
    StopCriteria,
    TraceRecord,
    make_linesearch,
)
from .gradient import (
    gradient_descent_fixed,
    heavy_ball,
    nesterov_momentum,
    nesterov_strongly_convex,
    steepest_descent,
)
from .fgm import FgmState, OfgmState, fgm, ofgm, ofgm_schedule
from .cg import CgVariant, VARIANTS as CG_VARIANTS, cg, cg_beta
from .lbfgs import LbfgsMemory, lbfgs, lbfgs_direction
from .wiggle import WiggleConfig, WiggleResult, atom_wiggle

__all__ = [
    "CONVERGED",
    "HORIZON_COMPLETE",
    "ITERATION_BUDGET",
    "LINESEARCH_FAILURE",
    "ORACLE_BUDGET",
    "SUCCESS_STATUSES",
    "TIME_BUDGET",
    "DivergenceError",
    "LineSearcher",
    "OptimizeResult",
    "OptimizerTrace",
    "StopCriteria",
    "TraceRecord",
    "make_linesearch",
    "gradient_descent_fixed",
    "heavy_ball",
    "nesterov_momentum",
    "nesterov_strongly_convex",
    "steepest_descent",
    "FgmState",
    "OfgmState",
    "fgm",
    "ofgm",
    "ofgm_schedule",
    "CgVariant",
    "CG_VARIANTS",
    "cg",
    "cg_beta",
    "LbfgsMemory",
    "lbfgs",
    "lbfgs_direction",
    "WiggleConfig",
    "WiggleResult",
    "atom_wiggle",
]
