"""Pareto marginals, product models and empirical upper-quantile estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """PCG64 generator; SeedSequence-based so seeds can be split with ``spawn``."""
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent integer seeds from ``seed``."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n)]


@dataclass(frozen=True)
class ParetoMarginal:
    scale: float
    index: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not self.index > 0:
            raise ValueError(f"index must be > 0, got {self.index}")

    def survival(self, l):
        """P(L > l)."""
        l = np.asarray(l, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(l < self.scale, 1.0, (self.scale / np.maximum(l, self.scale)) ** self.index)
        return out if out.ndim else float(out)

    def tail_quantile(self, delta: float) -> float:
        return pareto_tail_quantile(self, delta)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = 1.0 - rng.random(n)  # (0, 1]
        return self.scale * u ** (-1.0 / self.index)


def pareto_survival(l: float, m: ParetoMarginal) -> float:
    return m.survival(l)


def pareto_tail_quantile(m: ParetoMarginal, delta: float) -> float:
    """Smallest q with P(L > q) <= delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return m.scale * delta ** (-1.0 / m.index)


@dataclass(frozen=True)
class ProductParetoModel:
    """Independent Pareto components."""

    marginals: tuple[ParetoMarginal, ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if len(self.marginals) < 1:
            raise ValueError("model needs at least one marginal")

    @classmethod
    def iid(cls, d: int, scale: float = 1.0, index: float = 1.0) -> "ProductParetoModel":
        return cls(tuple(ParetoMarginal(scale, index) for _ in range(d)))

    @classmethod
    def from_scales(cls, scales: Sequence[float], index: float = 1.0) -> "ProductParetoModel":
        return cls(tuple(ParetoMarginal(float(s), index) for s in scales))

    @property
    def dim(self) -> int:
        return len(self.marginals)

    @property
    def scales(self) -> np.ndarray:
        return np.array([m.scale for m in self.marginals])

    @property
    def indices(self) -> np.ndarray:
        return np.array([m.index for m in self.marginals])

    def survival(self, l) -> np.ndarray:
        """Per-coordinate survival probabilities, broadcasting over rows."""
        l = np.asarray(l, dtype=float)
        s, a = self.scales, self.indices
        return np.where(l < s, 1.0, (s / np.maximum(l, s)) ** a)

    def tail_quantiles(self, delta: float) -> np.ndarray:
        return np.array([pareto_tail_quantile(m, delta) for m in self.marginals])

    def sample_with(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = 1.0 - rng.random((n, self.dim))
        return self.scales * u ** (-1.0 / self.indices)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return sample_model(self, n, seed)


def sample_model(model: ProductParetoModel, n: int, seed: int) -> np.ndarray:
    """``n`` independent rows of L by inverse-CDF sampling."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.sample_with(n, make_rng(seed))


@dataclass(frozen=True)
class QuantileEstimate:
    point: float
    lower: float
    upper: float
    confidence: float
    sample_count: int
    target_tail: float
    unstable: bool = False

    def __post_init__(self):
        if not (self.lower <= self.point <= self.upper):
            raise ValueError("need lower <= point <= upper")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")

    @classmethod
    def exact(cls, q: float, delta: float) -> "QuantileEstimate":
        """Degenerate interval around a known quantile."""
        return cls(q, q, q, 0.5, 1, delta)


def empirical_upper_quantile_ci(values, delta: float, confidence: float = 0.95) -> QuantileEstimate:
    """Upper-``delta`` sample quantile with a distribution-free order-statistic CI.

    The point estimate is the smallest sample value ``v`` with
    ``#{x > v} / n <= delta``. The interval endpoints are order statistics
    chosen from Binomial(n, 1 - delta) quantiles, so that the true quantile is
    covered with probability at least ``confidence`` for continuous laws.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("values must be non-empty")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    unstable = n * delta < 10
    if unstable:
        warnings.warn(f"n*delta = {n * delta:.3g} < 10: upper quantile estimate is unstable", stacklevel=2)

    exceed_allowed = int(np.floor(n * delta + 1e-9))
    k = max(n - exceed_allowed, 1)  # 1-based order statistic
    point = x[k - 1]

    p = 1.0 - delta
    tail = (1.0 - confidence) / 2.0
    r = int(binom.ppf(tail, n, p))
    s = int(binom.ppf(1.0 - tail, n, p)) + 1
    r = min(max(r, 1), k)
    s = max(min(s, n), k)
    return QuantileEstimate(
        point=float(point),
        lower=float(x[r - 1]),
        upper=float(x[s - 1]),
        confidence=confidence,
        sample_count=n,
        target_tail=delta,
        unstable=bool(unstable),
    )


@dataclass(frozen=True)
class SignSymmetricModel:
    """Base model with an independent fair random sign on every coordinate.

    Not used by the benchmark problems; it gives the quadratic-model checks a
    law with mass in every orthant.
    """

    base: ProductParetoModel

    @property
    def dim(self) -> int:
        return self.base.dim

    def sample_with(self, n: int, rng: np.random.Generator) -> np.ndarray:
        L = self.base.sample_with(n, rng)
        return L * rng.choice((-1.0, 1.0), size=L.shape)

    def sample(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.sample_with(n, make_rng(seed))
