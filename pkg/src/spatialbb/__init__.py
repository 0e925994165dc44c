"""Spatial branch-and-bound for box-constrained QCQPs.

The solver bounds each node with a McCormick LP relaxation and branches with
one of three rules: extreme strong branching (binary search over branching
points with bound tightening as a byproduct), basic spatial strong branching,
or the balance rule for bilinear problems.
"""

from .bench import compare_to_csv, gen_bbp, gen_pooling_toy, run_comparison
from .branching import BranchDecision, BranchParams, branch_score
from .engine import SolveReport, SolverConfig, remaining_gap, solve
from .instance import (
    InstanceError,
    QcqpInstance,
    QuadConstraint,
    QuadExpr,
    VarBox,
    load_instance,
    parse_instance,
    save_instance,
    serialize_instance,
)
from .lp import LpProblem, LpSolution, solve_lp
from .primal import Incumbent, local_improve, root_incumbent
from .relaxation import BoxEmptyError, RelaxationMap, build_relaxation, child_relaxation

__all__ = [
    "BoxEmptyError",
    "BranchDecision",
    "BranchParams",
    "Incumbent",
    "InstanceError",
    "LpProblem",
    "LpSolution",
    "QcqpInstance",
    "QuadConstraint",
    "QuadExpr",
    "RelaxationMap",
    "SolveReport",
    "SolverConfig",
    "VarBox",
    "branch_score",
    "build_relaxation",
    "child_relaxation",
    "compare_to_csv",
    "gen_bbp",
    "gen_pooling_toy",
    "load_instance",
    "local_improve",
    "parse_instance",
    "remaining_gap",
    "root_incumbent",
    "run_comparison",
    "save_instance",
    "serialize_instance",
    "solve",
    "solve_lp",
]

__version__ = "0.1.0"
