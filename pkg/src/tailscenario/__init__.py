"""Scenario generation for heavy-tailed chance-constrained programs."""

from .events import (
    CoordTailUnion,
    HalfSpaceTail,
    HalfspaceIntersection,
    LowerBox,
    NormTail,
    ScaledLevelSet,
    UnionOf,
    build_sets_linear_method,
    build_sets_portfolio,
    build_sets_quadratic,
    build_sets_salvage,
    build_underestimator,
    membership,
)
from .lp import LinearProgram, LpSolution, solve_lp
from .problems import ClearingNetwork, PortfolioParams, clearing_deficit, settlement_lp
from .sampler import (
    ProbabilityEstimate,
    TrialCapExceeded,
    event_probability,
    sample_conditional_ar,
    sample_conditional_union_exact,
)
from .scenario import ScenarioProblem, SolveReport, assemble_csp, required_samples, solve_cc_sc, solve_eff_sc
from .tailmodel import ParetoMarginal, ProductParetoModel, empirical_upper_quantile_ci, sample_model

__version__ = "0.1.0"
