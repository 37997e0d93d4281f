"""Sample-size bounds, sampled-LP assembly and the Eff-Sc / CC-Sc drivers."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import problems as pb
from .events import LowerBox, OuterSet, build_sets_portfolio, build_sets_salvage
from .lp import LinearProgram, drop_dominated_rows, solve_lp
from .problems import ClearingNetwork, PortfolioParams
from .sampler import ProbabilityEstimate, event_probability, sample_conditional_ar, sample_conditional_union_exact
from .tailmodel import ProductParetoModel, empirical_upper_quantile_ci

EFF_SC = "EffSc"
CC_SC = "CcSc"

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MEMORY_BUDGET = "MemoryBudget"

DEFAULT_ROW_CAP = 300_000
MAX_DENSE_ROWS = 500_000

_STATUS = {"optimal": OPTIMAL, "infeasible": INFEASIBLE, "unbounded": UNBOUNDED}


def required_samples(delta_eff: float, beta: float, d: int) -> int:
    """ceil((2/de) ln(1/beta) + 2d + (2d/de) ln(2/de)), natural logarithm."""
    if not 0.0 < delta_eff <= 1.0:
        raise ValueError("delta_eff must lie in (0, 1]")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    de = float(delta_eff)
    val = (2.0 / de) * math.log(1.0 / beta) + 2 * d + (2.0 * d / de) * math.log(2.0 / de)
    # guard against ceil of a value like 6.000000000000001 coming from rounding
    return int(math.ceil(val - 1e-9 * max(1.0, val)))


@dataclass(frozen=True, eq=False)
class ScenarioProblem:
    """A benchmark instance.

    For the salvage fund the decision is the fund allocation x and
    phi(x, L) is the clearing deficit. For the portfolio the decision is the
    investment vector y (the reciprocal of the x in the VaR formulation), so
    phi(y, L) = L^T y - eta, which also covers zero positions.
    """

    kind: str
    params: object
    model: ProductParetoModel
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("salvage", "portfolio"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.params.d != self.model.dim:
            raise ValueError("decision and loss dimensions must agree")

    @classmethod
    def salvage(cls, net: ClearingNetwork, model: ProductParetoModel, name: str = "") -> "ScenarioProblem":
        return cls("salvage", net, model, name)

    @classmethod
    def portfolio(cls, params: PortfolioParams, model: ProductParetoModel, name: str = "") -> "ScenarioProblem":
        return cls("portfolio", params, model, name)

    @classmethod
    def from_preset(cls, name: str) -> "ScenarioProblem":
        p = pb.preset(name)
        return cls(p.kind, p.params, p.model, name)

    @property
    def d(self) -> int:
        return self.model.dim

    @property
    def sense(self) -> str:
        return "min" if self.kind == "salvage" else "max"

    @property
    def objective(self) -> np.ndarray:
        if self.kind == "salvage":
            return np.ones(self.d)
        return np.asarray(self.params.mu, dtype=float)

    def constraint(self, decision, L):
        if self.kind == "salvage":
            return pb.clearing_deficit(self.params, decision, L)
        out = np.asarray(L, dtype=float) @ np.asarray(decision, dtype=float) - self.params.eta
        return out if np.ndim(out) else float(out)

    def violation_probability(self, decision, mc_n: int = 10**6, seed: int = 0) -> ProbabilityEstimate:
        """Exact for the salvage fund, Monte Carlo otherwise."""
        if self.kind == "salvage":
            return ProbabilityEstimate.exact(pb.violation_probability_salvage_exact(self.params, self.model, decision))
        return pb.violation_probability_mc(self, decision, mc_n, seed)


def assemble_csp(problem: ScenarioProblem, scenarios, outer: OuterSet | None = None,
                 reduce_rows: bool = False) -> LinearProgram:
    """Sampled LP: one block of scenario rows per draw plus the rows of ``outer``.

    Salvage fund: (I-Q^T)^{-1} x >= L^(j) - m, minimize 1^T x.
    Portfolio: L^(j)^T y <= eta, 0 <= y <= eta/UB from the box O, maximize mu^T y.
    ``reduce_rows`` drops rows implied by another row with the same
    coefficients, which leaves the feasible set unchanged.
    """
    d = problem.d
    scen = np.asarray(scenarios, dtype=float).reshape(-1, d) if np.size(scenarios) else np.empty((0, d))
    if scen.shape[1] != d:
        raise ValueError("scenario dimension mismatch")
    c = problem.objective

    if problem.kind == "salvage":
        net = problem.params
        B = np.asarray(net.inverse)
        if reduce_rows and scen.shape[0]:
            scen = scen.max(axis=0, keepdims=True)
        n = scen.shape[0]
        A = np.tile(B, (n, 1))
        b = (scen - net.m).ravel()
        rel = np.full(A.shape[0], ">=")
        if outer is not None:
            G, h = outer.to_rows()
            A = np.vstack([A, G])
            b = np.concatenate([b, h])
            rel = np.concatenate([rel, np.full(h.size, "<=")])
        if reduce_rows:
            A, rel, b = drop_dominated_rows(A, rel, b)
        return LinearProgram(c, A, rel, b, "min")

    eta = problem.params.eta
    upper = None
    if outer is not None:
        if not isinstance(outer, LowerBox):
            raise ValueError("portfolio outer set must be a LowerBox in reciprocal variables")
        upper = 1.0 / outer.bounds
    A, b = scen, np.full(scen.shape[0], eta)
    rel = np.full(scen.shape[0], "<=")
    if reduce_rows:
        A, rel, b = drop_dominated_rows(A, rel, b)
    return LinearProgram(c, A, rel, b, "max", None, upper)


@dataclass
class SolveReport:
    method: str
    delta: float
    beta: float
    n_scenarios: int
    status: str
    x_opt: np.ndarray | None
    value: float
    p_event: ProbabilityEstimate | None
    wall_time: float
    seed: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self, diagnostics: bool = False) -> dict:
        out = {
            "method": self.method,
            "delta": self.delta,
            "beta": self.beta,
            "n_scenarios": self.n_scenarios,
            "status": self.status,
            "x_opt": None if self.x_opt is None else [float(v) for v in self.x_opt],
            "value": None if not np.isfinite(self.value) else float(self.value),
            "p_event": None if self.p_event is None else self.p_event.to_json(),
            "wall_time": self.wall_time,
            "seed": self.seed,
        }
        if diagnostics:
            out["diagnostics"] = self.diagnostics
        return out

    def to_json(self, diagnostics: bool = False) -> str:
        return json.dumps(self.to_dict(diagnostics), sort_keys=False)


def _solve(problem, scenarios, outer, diag: dict, max_dense_rows: int):
    reduce = scenarios.shape[0] * (problem.d if problem.kind == "salvage" else 1) > max_dense_rows
    lp = assemble_csp(problem, scenarios, outer, reduce_rows=reduce)
    diag["rows_reduced"] = bool(reduce)
    diag["n_rows"] = int(lp.n_rows)
    t0 = time.perf_counter()
    sol = solve_lp(lp)
    diag["solve_time"] = time.perf_counter() - t0
    diag["lp_iterations"] = int(sol.iterations)
    status = _STATUS[sol.status]
    if status == OPTIMAL:
        return status, sol.x, float(sol.value)
    return status, None, float("nan")


def _seeds(seed: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(3)


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def eff_sc_sets(problem: ScenarioProblem, delta: float, beta: float, seed: int = 0,
                quantile_n: int | None = None, p_event_n: int = 10**6):
    """(O, C, P(L in C), diagnostics) as used by :func:`solve_eff_sc`."""
    s_quant, s_prob, _ = _seeds(seed)
    diag = {}
    if problem.kind == "salvage":
        outer, event = build_sets_salvage(problem.params, problem.model, delta)
        p = event_probability(problem.model, event)
    else:
        n = quantile_n or max(10**5, int(math.ceil(2000 / delta)))
        totals = problem.model.sample(n, _int_seed(s_quant)).sum(axis=1)
        q_est = empirical_upper_quantile_ci(totals, delta, confidence=1.0 - beta / 10.0)
        diag.update(q_point=q_est.point, q_lower=q_est.lower, q_upper=q_est.upper, quantile_n=n)
        outer, event = build_sets_portfolio(problem.params, delta, q_est)
        p = event_probability(problem.model, event, p_event_n, _int_seed(s_prob))
    return outer, event, p, diag


def solve_eff_sc(problem: ScenarioProblem, delta: float, beta: float, seed: int = 0, *,
                 delta_prime_rule: str = "exact", quantile_n: int | None = None, p_event_n: int = 10**6,
                 max_dense_rows: int = MAX_DENSE_ROWS) -> SolveReport:
    """Build (O, C), set delta' = delta / P(L in C), draw N' conditional scenarios, solve.

    ``delta_prime_rule='exact'`` uses delta/P. For the salvage fund
    ``'floor'`` uses 1/d instead, a lower bound of delta/P(L in C) for
    coordinate-tail unions, which makes N' independent of delta at the cost
    of more scenarios. For Monte Carlo estimates of P the upper Wilson limit
    is used, which can only increase N'.
    """
    if not 0.0 < delta < 1.0 or not 0.0 < beta < 1.0:
        raise ValueError("delta and beta must lie in (0, 1)")
    if delta_prime_rule not in ("floor", "exact"):
        raise ValueError("delta_prime_rule must be 'floor' or 'exact'")
    t_start = time.perf_counter()
    outer, event, p, diag = eff_sc_sets(problem, delta, beta, seed, quantile_n, p_event_n)
    p_used = p.value if p.is_exact else p.ci_high
    if problem.kind == "salvage" and delta_prime_rule == "floor":
        delta_prime = 1.0 / problem.d
    else:
        delta_prime = min(1.0, delta / p_used) if p_used > 0 else 1.0
    n_prime = required_samples(delta_prime, beta, problem.d)
    diag.update(delta_prime=delta_prime, p_used=p_used)
    diag["lower_bound_regime"] = bool(n_prime <= beta * p.value / delta)

    _, _, s_scen = _seeds(seed)
    t0 = time.perf_counter()
    if problem.kind == "salvage":
        batch = sample_conditional_union_exact(problem.model, event.thresholds, n_prime, _int_seed(s_scen))
    else:
        batch = sample_conditional_ar(problem.model, event, n_prime, seed=_int_seed(s_scen))
        diag["ar_trials"] = batch.trials_used
    diag["sample_time"] = time.perf_counter() - t0

    status, x, value = _solve(problem, batch.samples, outer, diag, max_dense_rows)
    wall = time.perf_counter() - t_start
    return SolveReport(EFF_SC, delta, beta, n_prime, status, x, value, p, wall, seed, diag)


def solve_cc_sc(problem: ScenarioProblem, delta: float, beta: float, seed: int = 0, *,
                row_cap: int = DEFAULT_ROW_CAP, max_dense_rows: int = MAX_DENSE_ROWS) -> SolveReport:
    """Classical scenario approach with N unconditional scenarios and no outer-set rows.

    When N exceeds ``row_cap`` nothing is sampled and the report carries status
    MemoryBudget together with the N that would have been needed.
    """
    if not 0.0 < delta < 1.0 or not 0.0 < beta < 1.0:
        raise ValueError("delta and beta must lie in (0, 1)")
    t_start = time.perf_counter()
    n = required_samples(delta, beta, problem.d)
    diag = {}
    if n > row_cap:
        return SolveReport(CC_SC, delta, beta, n, MEMORY_BUDGET, None, float("nan"), None,
                           time.perf_counter() - t_start, seed, {"row_cap": row_cap})
    _, _, s_scen = _seeds(seed)
    t0 = time.perf_counter()
    scen = problem.model.sample(n, _int_seed(s_scen))
    diag["sample_time"] = time.perf_counter() - t0
    status, x, value = _solve(problem, scen, None, diag, max_dense_rows)
    wall = time.perf_counter() - t_start
    return SolveReport(CC_SC, delta, beta, n, status, x, value, None, wall, seed, diag)
