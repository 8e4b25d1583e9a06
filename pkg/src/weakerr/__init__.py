"""Weak-error toolkit for explicit and drift-implicit Euler schemes on scalar SDEs.

Simulates both Euler variants of dX = b(X) dt + sigma(X) dW, evaluates the
leading-order weak-error densities of each scheme as exact jet algebra,
computes scheme expectations without sampling noise through affine moment
recursions, and cross-checks everything with seeded, reproducible Monte
Carlo.  The headline experiment: the drift-implicit scheme has weak order
one, and subtracting the predicted first-order term h * C1 leaves an O(h^2)
remainder.
"""

__version__ = "0.1.0"

from .jets import InsufficientJetOrder, Jet4, jet_add, jet_derive, jet_mul
from .problems import (
    AffineModel,
    MarginalLaw,
    Problem,
    builtin_problems,
    gbm_family_problem,
    get_problem,
    kolmogorov_residual,
    marginal_law,
    ou_family_problem,
    tanh_problem,
)
from .schemes import (
    InvalidSolver,
    NoConvergence,
    PathState,
    SchemeConfig,
    SingularSh,
    StepSizeError,
    explicit_step,
    implicit_step,
    iterate_path,
    pathwise_derivative_check,
    run_path,
    run_paths,
    s_h,
)
from .moments_oracle import MomentVector, propagate_moments, weak_error_exact
from .expansion import (
    PSI_E,
    PSI_I,
    LeadingConstant,
    PsiKind,
    eval_psi,
    eval_psi_i_expanded,
    leading_constant,
    psi_identity_residual,
    psi_ih_gap,
    psi_ih_kind,
    riemann_psi_sum,
)
from .montecarlo import (
    LevelEstimate,
    McConfig,
    RichardsonPoint,
    WeakErrorReport,
    estimate_weak_error,
    oracle_report,
    richardson,
    sample_increments,
)
from .rates import ExpansionTable, RateFit, TooFewPoints, expansion_check, fit_rate
from .reports import emit_report

__all__ = [
    "AffineModel",
    "ExpansionTable",
    "InsufficientJetOrder",
    "InvalidSolver",
    "Jet4",
    "LeadingConstant",
    "LevelEstimate",
    "MarginalLaw",
    "McConfig",
    "MomentVector",
    "NoConvergence",
    "PSI_E",
    "PathState",
    "PSI_I",
    "Problem",
    "PsiKind",
    "RateFit",
    "RichardsonPoint",
    "SchemeConfig",
    "SingularSh",
    "StepSizeError",
    "TooFewPoints",
    "WeakErrorReport",
    "builtin_problems",
    "emit_report",
    "estimate_weak_error",
    "eval_psi",
    "eval_psi_i_expanded",
    "expansion_check",
    "explicit_step",
    "fit_rate",
    "gbm_family_problem",
    "get_problem",
    "implicit_step",
    "iterate_path",
    "jet_add",
    "jet_derive",
    "jet_mul",
    "kolmogorov_residual",
    "leading_constant",
    "marginal_law",
    "oracle_report",
    "ou_family_problem",
    "pathwise_derivative_check",
    "propagate_moments",
    "psi_identity_residual",
    "psi_ih_gap",
    "psi_ih_kind",
    "richardson",
    "riemann_psi_sum",
    "run_path",
    "run_paths",
    "s_h",
    "sample_increments",
    "tanh_problem",
    "weak_error_exact",
]
