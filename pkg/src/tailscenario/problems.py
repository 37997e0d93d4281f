"""Benchmark problems: salvage fund on a clearing network, VaR portfolio, quadratic model."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .lp import LinearProgram, LpError, solve_lp
from .sampler import ProbabilityEstimate, wilson_interval
from .tailmodel import ProductParetoModel, make_rng

PORTFOLIO_MU = (1.0, 1.5, 2.0, 2.5, 3.0, 1.6, 1.2, 1.1, 1.8, 2.2)
PORTFOLIO_SCALES = (2.1, 1.3, 1.6, 2.5, 2.7, 1.3, 1.9, 1.5, 2.2, 2.3)
PORTFOLIO_ETA = 1000.0


class ClosedFormInapplicable(ValueError):
    """The closed-form CSP optimum has a non-positive coordinate; solve the LP instead."""


@dataclass(frozen=True, eq=False)
class ClearingNetwork:
    """Liability network: Q[i, j] is what j receives when i pays one unit."""

    Q: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        m = np.array(self.m, dtype=float).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != m.size:
            raise ValueError("Q must be d x d and m of length d")
        if np.any(Q < 0):
            raise ValueError("Q must be non-negative")
        if np.any(Q.sum(axis=1) >= 1.0):
            raise ValueError("every row sum of Q must be < 1")
        Q.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "m", m)

    @classmethod
    def uniform(cls, d: int, buffer: float = 10.0) -> "ClearingNetwork":
        """Q[i, j] = 1/d off the diagonal, m_i = buffer."""
        Q = np.full((d, d), 1.0 / d)
        np.fill_diagonal(Q, 0.0)
        return cls(Q, np.full(d, buffer))

    @property
    def d(self) -> int:
        return self.m.size

    @cached_property
    def settlement_matrix(self) -> np.ndarray:
        """I - Q^T."""
        return np.eye(self.d) - self.Q.T

    @cached_property
    def _lu(self):
        lu, piv = lu_factor(self.settlement_matrix)
        if np.any(np.abs(np.diag(lu)) < 1e-14):
            raise ValueError("I - Q^T is singular")
        return lu, piv

    @cached_property
    def inverse(self) -> np.ndarray:
        """(I - Q^T)^{-1}; non-negative for a valid network."""
        inv = lu_solve(self._lu, np.eye(self.d))
        inv.setflags(write=False)
        return inv

    def payments(self, x) -> np.ndarray:
        """y = (I - Q^T)^{-1} x, broadcasting over rows of x."""
        return np.asarray(x, dtype=float) @ self.inverse.T


@dataclass(frozen=True)
class PortfolioParams:
    mu: tuple
    eta: float

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        if any(v <= 0 for v in mu):
            raise ValueError("mean returns must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        object.__setattr__(self, "mu", mu)

    @property
    def d(self) -> int:
        return len(self.mu)


def clearing_deficit(net: ClearingNetwork, x, L):
    """max_i L_i - e_i^T (I - Q^T)^{-1} x - m_i, vectorized over rows of L."""
    L = np.asarray(L, dtype=float)
    y = net.payments(x)
    out = np.max(L - y - net.m, axis=-1)
    return out if np.ndim(out) else float(out)


def settlement_lp(net: ClearingNetwork, x, L) -> tuple[np.ndarray, float]:
    """Settlement vector and deficit, both through LPs.

    ``y_star`` maximizes total payments subject to 0 <= y <= L and
    (I - Q^T) y <= x. The deficit is the optimum of
    min b s.t. L - y - m <= b*1, (I - Q^T) y <= x, y >= 0,
    which is the constraint function itself and an independent check on
    :func:`clearing_deficit`.
    """
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    d = net.d
    S = net.settlement_matrix

    pay = LinearProgram(np.ones(d), S, ["<="] * d, x, sense="max", upper=L)
    sol = solve_lp(pay)
    if not sol.optimal:
        raise LpError(f"settlement LP ended {sol.status}")
    y_star = sol.x

    # variables (y_1..y_d, b); b is free
    A = np.zeros((2 * d, d + 1))
    A[:d, :d] = -np.eye(d)
    A[:d, d] = -1.0
    A[d:, :d] = S
    rhs = np.concatenate([net.m - L, x])
    c = np.zeros(d + 1)
    c[d] = 1.0
    lower = np.concatenate([np.zeros(d), [-np.inf]])
    phi_lp = LinearProgram(c, A, ["<="] * (2 * d), rhs, "min", lower)
    sol = solve_lp(phi_lp)
    if not sol.optimal:
        raise LpError(f"deficit LP ended {sol.status}")
    return y_star, float(sol.value)


def portfolio_phi(params: PortfolioParams, x, L):
    """sum_i L_i / x_i - eta in the reciprocal variables x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    out = np.asarray(L, dtype=float) @ (1.0 / x) - params.eta
    return out if np.ndim(out) else float(out)


def quadratic_phi(Qm, A, x, L):
    """x^T Q x + x^T A L."""
    Qm = np.asarray(Qm, dtype=float)
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if Qm.shape != (x.size, x.size) or A.shape[0] != x.size or A.shape[1] != L.shape[-1]:
        raise ValueError("dimension mismatch")
    out = x @ Qm @ x + L @ (A.T @ x)
    return out if np.ndim(out) else float(out)


def violation_probability_salvage_exact(net: ClearingNetwork, model: ProductParetoModel, x) -> float:
    """P(phi(x, L) > 0) = 1 - prod_i P(L_i <= tau_i) with tau = (I-Q^T)^{-1} x + m."""
    tau = net.payments(x) + net.m
    return float(1.0 - np.prod(1.0 - model.survival(tau)))


def violation_probability_mc(problem, x, n: int = 10**6, seed: int = 0, chunk: int = 2**18) -> ProbabilityEstimate:
    """Fraction of fresh unconditional draws with phi(x, L) > 0 (Wilson 99% CI)."""
    if n < 10**4:
        raise ValueError("use at least 1e4 draws")
    rng = make_rng(seed)
    hits, left = 0, n
    while left:
        k = min(chunk, left)
        hits += int(np.count_nonzero(problem.constraint(x, problem.model.sample_with(k, rng)) > 0))
        left -= k
    lo, hi = wilson_interval(hits, n, 0.99)
    return ProbabilityEstimate(hits / n, lo, hi, f"MonteCarlo({n})")


def csp_closed_form_salvage(net: ClearingNetwork, scenarios, delta: float, model: ProductParetoModel):
    """Optimum of the conditional sampled salvage problem without an LP.

    With y = (I-Q^T)^{-1} x the constraints read y >= t where
    t_i = max(q_i - m_i, max_j L_i^(j) - m_i), and the objective has positive
    coefficients in y, so y = t at the optimum whenever x = (I-Q^T) t > 0.
    """
    q = model.tail_quantiles(delta)
    t = q - net.m
    scen = np.asarray(scenarios, dtype=float).reshape(-1, net.d)
    if scen.shape[0]:
        t = np.maximum(t, scen.max(axis=0) - net.m)
    x = net.settlement_matrix @ t
    if np.any(x <= 0) or np.any(t <= 0):
        raise ClosedFormInapplicable(f"closed form gives x = {x}")
    return x, float(x.sum())


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str
    params: object
    model: ProductParetoModel
    notes: dict = field(default_factory=dict)


def preset(name: str) -> Preset:
    """Experiment instances by name: 'portfolio-d10', 'salvage-d5/10/15/20'."""
    if name == "portfolio-d10":
        return Preset(name, "portfolio", PortfolioParams(PORTFOLIO_MU, PORTFOLIO_ETA),
                      ProductParetoModel.from_scales(PORTFOLIO_SCALES))
    if name.startswith("salvage-d"):
        d = int(name.removeprefix("salvage-d"))
        if d not in (5, 10, 15, 20):
            raise KeyError(name)
        return Preset(name, "salvage", ClearingNetwork.uniform(d, 10.0), ProductParetoModel.iid(d))
    raise KeyError(f"unknown preset {name!r}")


PRESET_NAMES = ("portfolio-d10", "salvage-d5", "salvage-d10", "salvage-d15", "salvage-d20")
