"""Conditional samplers for L given L in C and event-probability estimates."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .events import ConditionalEvent, CoordTailUnion, HalfSpaceTail, NormTail
from .tailmodel import ProductParetoModel, make_rng

PILOT_DRAWS = 10**4
MC_CHUNK = 2**18


class TrialCapExceeded(RuntimeError):
    """Acceptance-rejection ran out of trials; the event is too rare for AR."""

    def __init__(self, accepted: int, wanted: int, trials: int):
        super().__init__(f"accepted {accepted}/{wanted} draws in {trials} trials")
        self.accepted = accepted
        self.wanted = wanted
        self.trials = trials


def wilson_interval(k: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    p = k / n
    return float(min(ci.low, p)), float(max(ci.high, p))


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    ci_low: float
    ci_high: float
    method: str = "Exact"

    def __post_init__(self):
        if not (self.ci_low <= self.value <= self.ci_high):
            raise ValueError("need ci_low <= value <= ci_high")
        if self.method == "Exact" and not (self.ci_low == self.value == self.ci_high):
            raise ValueError("an exact estimate has a degenerate interval")

    @classmethod
    def exact(cls, p: float) -> "ProbabilityEstimate":
        p = float(p)
        return cls(p, p, p, "Exact")

    @property
    def is_exact(self) -> bool:
        return self.method == "Exact"

    def to_json(self) -> dict:
        return {"value": self.value, "ci_low": self.ci_low, "ci_high": self.ci_high, "method": self.method}


@dataclass(frozen=True, eq=False)
class ConditionalSampleBatch:
    samples: np.ndarray
    trials_used: int | None
    event: ConditionalEvent
    seed: int

    def __len__(self) -> int:
        return self.samples.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"l{i + 1}" for i in range(self.samples.shape[1])])
            for row in self.samples:
                w.writerow([repr(float(v)) for v in row])


def sample_conditional_ar(model, event: ConditionalEvent, n: int, trial_cap: int | None = None,
                          seed: int = 0) -> ConditionalSampleBatch:
    """First ``n`` accepted unconditional draws.

    Without ``trial_cap`` the cap is 100 n / p_hat with p_hat from a pilot
    run of 10^4 draws on an independent stream. Draws come in row blocks from
    a single stream, so the result does not depend on the block size.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if event.dim != model.dim:
        raise ValueError("event and model disagree on dimension")
    ss = np.random.SeedSequence(seed)
    pilot_ss, main_ss = ss.spawn(2)
    if trial_cap is None:
        pilot = model.sample_with(PILOT_DRAWS, make_rng(pilot_ss))
        p_hat = max(float(np.mean(event.contains(pilot))), 0.5 / PILOT_DRAWS)
        trial_cap = int(np.ceil(100 * max(n, 1) / p_hat))
    rng = make_rng(main_ss)

    out, got, trials = [], 0, 0
    block = max(1024, min(2 * n + 1024, MC_CHUNK))
    while got < n:
        if trials >= trial_cap:
            raise TrialCapExceeded(got, n, trials)
        k = min(block, trial_cap - trials)
        L = model.sample_with(k, rng)
        idx = np.flatnonzero(event.contains(L))
        need = n - got
        if idx.size >= need:
            out.append(L[idx[:need]])
            trials += int(idx[need - 1]) + 1
            got = n
        else:
            out.append(L[idx])
            got += idx.size
            trials += k
        if got < n and trials >= trial_cap:
            raise TrialCapExceeded(got, n, trials)
    samples = np.concatenate(out) if out else np.empty((0, model.dim))
    return ConditionalSampleBatch(samples, trials, event, seed)


def union_weights(model: ProductParetoModel, thresholds) -> tuple[np.ndarray, float]:
    """P(A_i) for the first-exceedance partition and P(union)."""
    q = np.asarray(thresholds, dtype=float)
    p = np.asarray(model.survival(q), dtype=float)
    below = np.concatenate([[1.0], np.cumprod(1.0 - p)[:-1]])
    w = p * below
    return w, float(1.0 - np.prod(1.0 - p))


def sample_conditional_union_exact(model: ProductParetoModel, thresholds, n: int, seed: int = 0) -> ConditionalSampleBatch:
    """Exact draws of L given union_i {L_i > q_i} for independent Pareto coordinates.

    Pick the first exceeding coordinate i with probability P(A_i)/P(union);
    then L_i is Pareto above q_i, every earlier coordinate is truncated to
    [scale_j, q_j] and later ones are unconditional. All by inverse CDF.
    """
    q = np.asarray(thresholds, dtype=float)
    d = model.dim
    if q.shape != (d,):
        raise ValueError("need one threshold per coordinate")
    s, a = model.scales, model.indices
    if np.any(q < s):
        raise ValueError("thresholds must be at least the Pareto scales")
    w, total = union_weights(model, q)
    if total <= 0:
        raise ValueError("the union has probability zero")
    rng = make_rng(seed)
    cum = np.cumsum(w / total)
    cum[-1] = 1.0
    first = np.minimum(np.searchsorted(cum, rng.random(n), side="right"), d - 1)
    u = 1.0 - rng.random((n, d))  # (0, 1]
    p = np.asarray(model.survival(q), dtype=float)

    free = s * u ** (-1.0 / a)
    tail = q * u ** (-1.0 / a)
    trunc = s * (1.0 - u * (1.0 - p)) ** (-1.0 / a)
    trunc = np.minimum(trunc, q)

    col = np.arange(d)[None, :]
    k = first[:, None]
    L = np.where(col < k, trunc, np.where(col == k, tail, free))
    event = CoordTailUnion(q)
    return ConditionalSampleBatch(L, None, event, seed)


def _single_coordinate(event: HalfSpaceTail):
    nz = np.flatnonzero(event.direction)
    return int(nz[0]) if nz.size == 1 else None


def event_probability(model, event: ConditionalEvent, mc_n: int = 10**6, seed: int = 0) -> ProbabilityEstimate:
    """Exact where the shape allows, otherwise Monte Carlo with a Wilson 99% interval."""
    if event.dim != model.dim:
        raise ValueError("event and model disagree on dimension")
    if isinstance(model, ProductParetoModel):
        if isinstance(event, CoordTailUnion):
            return ProbabilityEstimate.exact(1.0 - np.prod(1.0 - model.survival(event.thresholds)))
        if isinstance(event, HalfSpaceTail):
            i = _single_coordinate(event)
            if i is not None:
                c = event.direction[i]
                surv = model.marginals[i].survival(event.threshold / c)
                # continuous marginal: P(L_i >= t) = P(L_i > t)
                return ProbabilityEstimate.exact(surv if c > 0 else 1.0 - surv)
    if isinstance(event, NormTail) and event.radius == 0:
        return ProbabilityEstimate.exact(1.0)
    if mc_n < 1:
        raise ValueError("mc_n must be >= 1")
    rng = make_rng(seed)
    hits, left = 0, mc_n
    while left:
        k = min(MC_CHUNK, left)
        hits += int(np.count_nonzero(event.contains(model.sample_with(k, rng))))
        left -= k
    lo, hi = wilson_interval(hits, mc_n, 0.99)
    return ProbabilityEstimate(hits / mc_n, lo, hi, f"MonteCarlo({mc_n})")
