"""Outer approximation sets O_delta and uniform conditional events C_delta.

Two constructions are provided: the scaling method (level set Pi, scaling
rate h, outer bound Psi_+) and the linear-approximation method (a convex
piecewise linear underestimator of phi). Every set can be tested point-wise,
serialized to JSON and, when polyhedral, turned into LP rows ``G x <= h``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tailmodel import ProductParetoModel, QuantileEstimate, make_rng

LEVEL_TOL = 1e-12


def _vec(v, name="vector") -> np.ndarray:
    a = np.array(v, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    a.setflags(write=False)
    return a


def _points(pts, dim: int) -> tuple[np.ndarray, bool]:
    """Return (2-d block, was_single) after checking the trailing dimension."""
    p = np.asarray(pts, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.shape[-1]}")
    return p, single


def _out(mask: np.ndarray, single: bool):
    return bool(mask[0]) if single else mask


# ---------------------------------------------------------------- events


class ConditionalEvent:
    """Base class for the event shapes. ``contains`` is vectorized over rows."""

    dim: int

    def contains(self, l):
        raise NotImplementedError

    def scaled(self, s: float) -> "ConditionalEvent":
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class HalfSpaceTail(ConditionalEvent):
    """{l : a^T l >= t}."""

    direction: np.ndarray
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "direction", _vec(self.direction, "direction"))
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def dim(self) -> int:
        return self.direction.size

    def contains(self, l):
        p, single = _points(l, self.dim)
        return _out(p @ self.direction >= self.threshold, single)

    def scaled(self, s: float) -> "HalfSpaceTail":
        return HalfSpaceTail(self.direction, s * self.threshold)

    def to_json(self) -> dict:
        return {"shape": "HalfSpaceTail", "direction": self.direction.tolist(), "threshold": self.threshold}


@dataclass(frozen=True, eq=False)
class CoordTailUnion(ConditionalEvent):
    """union_i {l_i > q_i}."""

    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _vec(self.thresholds, "thresholds"))

    @property
    def dim(self) -> int:
        return self.thresholds.size

    def contains(self, l):
        p, single = _points(l, self.dim)
        return _out(np.any(p > self.thresholds, axis=1), single)

    def scaled(self, s: float) -> "CoordTailUnion":
        return CoordTailUnion(s * self.thresholds)

    def to_json(self) -> dict:
        return {"shape": "CoordTailUnion", "thresholds": self.thresholds.tolist()}


@dataclass(frozen=True, eq=False)
class NormTail(ConditionalEvent):
    """{l : ||T l||_2 >= r}; T defaults to the identity (then ``dim`` must be given)."""

    radius: float
    dim: int
    transform: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius >= 0):
            raise ValueError("radius must be finite and >= 0")
        object.__setattr__(self, "radius", float(self.radius))
        if self.transform is not None:
            T = np.array(self.transform, dtype=float)
            if T.ndim != 2 or T.shape[1] != self.dim:
                raise ValueError("transform must have dim columns")
            T.setflags(write=False)
            object.__setattr__(self, "transform", T)

    def norms(self, l) -> np.ndarray:
        p, _ = _points(l, self.dim)
        if self.transform is not None:
            p = p @ self.transform.T
        return np.linalg.norm(p, axis=1)

    def contains(self, l):
        _, single = _points(l, self.dim)
        return _out(self.norms(l) >= self.radius, single)

    def scaled(self, s: float) -> "NormTail":
        return NormTail(s * self.radius, self.dim, self.transform)

    def to_json(self) -> dict:
        out = {"shape": "NormTail", "radius": self.radius, "dim": self.dim}
        if self.transform is not None:
            out["transform"] = self.transform.tolist()
        return out


@dataclass(frozen=True, eq=False)
class UnionOf(ConditionalEvent):
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("UnionOf needs at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise ValueError("members disagree on dimension")
        object.__setattr__(self, "members", members)

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def contains(self, l):
        p, single = _points(l, self.dim)
        mask = np.zeros(p.shape[0], dtype=bool)
        for m in self.members:
            mask |= m.contains(p)
        return _out(mask, single)

    def scaled(self, s: float) -> "UnionOf":
        return UnionOf(tuple(m.scaled(s) for m in self.members))

    def to_json(self) -> dict:
        return {"shape": "UnionOf", "members": [m.to_json() for m in self.members]}


def event_from_json(obj: dict) -> ConditionalEvent:
    shape = obj["shape"]
    if shape == "HalfSpaceTail":
        return HalfSpaceTail(obj["direction"], obj["threshold"])
    if shape == "CoordTailUnion":
        return CoordTailUnion(obj["thresholds"])
    if shape == "NormTail":
        return NormTail(obj["radius"], int(obj["dim"]), obj.get("transform"))
    if shape == "UnionOf":
        return UnionOf(tuple(event_from_json(m) for m in obj["members"]))
    raise ValueError(f"unknown event shape {shape!r}")


# ---------------------------------------------------------------- level sets


class LevelSetKind:
    """Level set Pi = {pi = 1} of a positively homogeneous level function pi."""

    polyhedral = False

    def level(self, x):
        """pi(x), or nan where x lies in no scaled copy of Pi."""
        raise NotImplementedError

    def contains(self, x):
        p = np.atleast_2d(np.asarray(x, dtype=float))
        val = self.level(p)
        mask = np.abs(val - 1.0) <= LEVEL_TOL
        return bool(mask[0]) if np.ndim(x) == 1 else mask

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class MinCoordOne(LevelSetKind):
    """Pi = {x > 0 : min_i x_i = 1}."""

    polyhedral = True

    def level(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = x.min(axis=1)
        return np.where(m > 0, m, np.nan)

    def to_json(self) -> dict:
        return {"kind": "MinCoordOne"}


@dataclass(frozen=True)
class UnitSphere(LevelSetKind):
    def level(self, x):
        return np.linalg.norm(np.atleast_2d(np.asarray(x, dtype=float)), axis=1)

    def to_json(self) -> dict:
        return {"kind": "UnitSphere"}


@dataclass(frozen=True, eq=False)
class QuadraticShell(LevelSetKind):
    """Pi = {x : x^T Q x = -||x||_2}; pi(x) = -x^T Q x / ||x|| on {x^T Q x < 0}."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
            raise ValueError("Q must be square and symmetric")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    def level(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        quad = np.einsum("ij,jk,ik->i", x, self.Q, x)
        nrm = np.linalg.norm(x, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(quad < 0, -quad / nrm, np.nan)

    def to_json(self) -> dict:
        return {"kind": "QuadraticShell", "Q": self.Q.tolist()}


def level_set_from_json(obj: dict) -> LevelSetKind:
    kind = obj["kind"]
    if kind == "MinCoordOne":
        return MinCoordOne()
    if kind == "UnitSphere":
        return UnitSphere()
    if kind == "QuadraticShell":
        return QuadraticShell(obj["Q"])
    raise ValueError(f"unknown level set {kind!r}")


# ---------------------------------------------------------------- outer sets


class OuterSet:
    dim: int | None

    def contains(self, x, tol: float = 0.0):
        raise NotImplementedError

    def to_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """(G, h) with the set equal to {x : G x <= h} (up to strict positivity)."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LowerBox(OuterSet):
    """{x : x >= b, x > 0}."""

    bounds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bounds", _vec(self.bounds, "bounds"))

    @property
    def dim(self) -> int:
        return self.bounds.size

    def contains(self, x, tol: float = 0.0):
        p, single = _points(x, self.dim)
        mask = np.all(p >= self.bounds - tol * (1 + np.abs(self.bounds)), axis=1) & np.all(p > 0, axis=1)
        return _out(mask, single)

    def to_rows(self):
        return -np.eye(self.dim), -self.bounds.copy()

    def to_json(self) -> dict:
        return {"shape": "LowerBox", "bounds": self.bounds.tolist()}


@dataclass(frozen=True, eq=False)
class HalfspaceIntersection(OuterSet):
    """intersection_i {g_i^T x <= h_i}."""

    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.array(self.G, dtype=float))
        h = _vec(self.h, "h")
        if G.shape[0] != h.size:
            raise ValueError("G and h disagree on the number of rows")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    def contains(self, x, tol: float = 0.0):
        p, single = _points(x, self.dim)
        mask = np.all(p @ self.G.T <= self.h + tol * (1 + np.abs(self.h)), axis=1)
        return _out(mask, single)

    def to_rows(self):
        return self.G.copy(), self.h.copy()

    def to_json(self) -> dict:
        return {"shape": "HalfspaceIntersection", "G": self.G.tolist(), "h": self.h.tolist()}


@dataclass(frozen=True, eq=False)
class ScaledLevelSet(OuterSet):
    """union_{alpha >= alpha_min} alpha * Pi, i.e. {x : pi(x) >= alpha_min}."""

    level_set: LevelSetKind
    alpha_min: float
    dim: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.alpha_min) and self.alpha_min >= 0):
            raise ValueError("alpha_min must be finite and >= 0")
        object.__setattr__(self, "alpha_min", float(self.alpha_min))

    def contains(self, x, tol: float = 0.0):
        p = np.atleast_2d(np.asarray(x, dtype=float))
        if self.dim is not None and p.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {p.shape[-1]}")
        lev = self.level_set.level(p)
        with np.errstate(invalid="ignore"):
            mask = lev >= self.alpha_min * (1 - tol)
        mask &= ~np.isnan(lev)
        return bool(mask[0]) if np.ndim(x) == 1 else mask

    def to_rows(self):
        if not isinstance(self.level_set, MinCoordOne) or self.dim is None:
            raise ValueError("only MinCoordOne with a known dimension converts to linear rows")
        return -np.eye(self.dim), np.full(self.dim, -self.alpha_min)

    def to_json(self) -> dict:
        return {"shape": "ScaledLevelSet", "level_set": self.level_set.to_json(),
                "alpha_min": self.alpha_min, "dim": self.dim}


def outer_from_json(obj: dict) -> OuterSet:
    shape = obj["shape"]
    if shape == "LowerBox":
        return LowerBox(obj["bounds"])
    if shape == "HalfspaceIntersection":
        return HalfspaceIntersection(obj["G"], obj["h"])
    if shape == "ScaledLevelSet":
        return ScaledLevelSet(level_set_from_json(obj["level_set"]), obj["alpha_min"], obj.get("dim"))
    raise ValueError(f"unknown outer set {shape!r}")


def membership(target, point) -> bool:
    """Exact membership of a single point in an event, outer set or level set."""
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise ValueError("membership takes a single point")
    if isinstance(target, LevelSetKind):
        if isinstance(target, QuadraticShell) and target.Q.shape[0] != point.size:
            raise ValueError("dimension mismatch")
        return target.contains(point)
    if isinstance(target, (ConditionalEvent, OuterSet)):
        return bool(target.contains(point))
    raise TypeError(f"cannot test membership in {type(target).__name__}")


# ---------------------------------------------------------------- bounds


@dataclass(frozen=True)
class AsymptoticBoundPair:
    """Psi_+ / Psi_- with the scaling rates r(alpha), h(alpha) and the epsilon of C_{eps,+}."""

    psi_plus: Callable
    psi_minus: Callable | None
    epsilon: float
    scaling_r: Callable
    scaling_h: Callable

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def outer_event_contains(self, l) -> np.ndarray:
        """Membership in C_{eps,+} = {Psi_+(l) >= -eps}."""
        return np.asarray(self.psi_plus(l)) >= -self.epsilon

    def inner_event_contains(self, l) -> np.ndarray:
        if self.psi_minus is None:
            raise ValueError("no lower bound available")
        return np.asarray(self.psi_minus(l)) >= self.epsilon


def portfolio_bounds(eta: float) -> AsymptoticBoundPair:
    """Psi_+(l) = 1^T l - eta, Psi_-(l) = min_i l_i - eta; r = 1, h(alpha) = alpha."""
    def plus(l):
        return np.atleast_2d(l).sum(axis=1) - eta

    def minus(l):
        return np.atleast_2d(l).min(axis=1) - eta

    return AsymptoticBoundPair(plus, minus, eta / 2.0, lambda a: 1.0, lambda a: a)


# ---------------------------------------------------------------- constructions


def build_sets_salvage(net, model: ProductParetoModel, delta: float) -> tuple[HalfspaceIntersection, CoordTailUnion]:
    """O: q_i <= e_i^T (I-Q^T)^{-1} x + m_i for all i;  C: union_i {l_i > q_i}."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if model.dim != net.d:
        raise ValueError("model and network disagree on dimension")
    q = model.tail_quantiles(delta)
    B = net.inverse  # raises on a singular network
    return HalfspaceIntersection(-B, net.m - q), CoordTailUnion(q)


def build_sets_portfolio(params, delta: float, q_est: QuantileEstimate) -> tuple[LowerBox, HalfSpaceTail]:
    """Box x_i >= UB/eta in reciprocal variables and the event 1^T l >= LB/2.

    The upper confidence limit shrinks O and the lower one enlarges C, so both
    substitutions err on the safe side.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not params.eta > 0:
        raise ValueError("eta must be positive")
    if not q_est.lower > 0:
        raise ValueError("quantile lower bound must be positive")
    d = params.d
    return LowerBox(np.full(d, q_est.upper / params.eta)), HalfSpaceTail(np.ones(d), q_est.lower / 2.0)


@dataclass(frozen=True, eq=False)
class PiecewiseLinearLowerBound:
    """max_i (a_i^T l + b_i^T x + c_i) <= phi(x, l), with slack constant C."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    slack_C: float = 0.0

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.a, dtype=float))
        b = np.atleast_2d(np.array(self.b, dtype=float))
        c = np.array(self.c, dtype=float).ravel()
        if not (a.shape[0] == b.shape[0] == c.size):
            raise ValueError("a, b and c must have one row per piece")
        if self.slack_C < 0:
            raise ValueError("slack_C must be >= 0")
        for arr in (a, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "slack_C", float(self.slack_C))

    @property
    def n_pieces(self) -> int:
        return self.c.size

    @property
    def dx(self) -> int:
        return self.b.shape[1]

    @property
    def dl(self) -> int:
        return self.a.shape[1]

    def pieces(self):
        for i in range(self.n_pieces):
            yield self.a[i], self.b[i], float(self.c[i])

    def piece_values(self, x, l) -> np.ndarray:
        """(n_points, n_pieces) block of a_i^T l + b_i^T x + c_i."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        l = np.atleast_2d(np.asarray(l, dtype=float))
        return l @ self.a.T + x @ self.b.T + self.c

    def value(self, x, l):
        v = self.piece_values(x, l).max(axis=1)
        return float(v[0]) if v.size == 1 else v


def salvage_pieces(net) -> PiecewiseLinearLowerBound:
    """Exact linear pieces of the clearing deficit: a_i = e_i, b_i = -row_i((I-Q^T)^{-1}), c_i = -m_i."""
    d = net.d
    return PiecewiseLinearLowerBound(np.eye(d), -np.asarray(net.inverse), -np.asarray(net.m), 0.0)


def coordinate_quantile_oracle(model: ProductParetoModel) -> Callable:
    """Exact upper-delta quantile of a^T L for a a positive multiple of a unit vector."""
    def oracle(a, delta):
        a = np.asarray(a, dtype=float)
        nz = np.flatnonzero(a)
        if nz.size != 1 or a[nz[0]] <= 0:
            raise ValueError("exact oracle needs a positive multiple of a unit vector")
        i = int(nz[0])
        return float(a[i] * model.marginals[i].tail_quantile(delta))
    return oracle


def mc_quantile_oracle(model, n: int = 10**6, seed: int = 0) -> Callable:
    """Empirical upper quantile of a^T L, every direction sharing one sample block."""
    from .tailmodel import empirical_upper_quantile_ci

    block = model.sample(n, seed)

    def oracle(a, delta):
        return empirical_upper_quantile_ci(block @ np.asarray(a, dtype=float), delta).point
    return oracle


def build_sets_linear_method(lb: PiecewiseLinearLowerBound, delta: float, quantile_oracle: Callable):
    """O = intersection_i {b_i^T x + c_i + q_i <= 0};  C = union_i {a_i^T l >= q_i - C}.

    Duplicate pieces are merged, so repeated pieces do not change either set.
    """
    seen = {}
    for a, b, c in lb.pieces():
        key = (tuple(a), tuple(b), c)
        seen.setdefault(key, (a, b, c))
    G, h, members = [], [], []
    for a, b, c in seen.values():
        q = float(quantile_oracle(a, delta))
        G.append(b)
        h.append(-c - q)
        members.append(HalfSpaceTail(a, q - lb.slack_C))
    return HalfspaceIntersection(np.array(G), np.array(h)), UnionOf(tuple(members))


# ---------------------------------------------------------------- underestimator

MAX_LATTICE_DIM = 4


def _lipschitz_estimate(grad, D: int, R: float, rng, pairs: int) -> float:
    """Largest ||grad(z) - grad(w)|| / ||z - w|| over random nearby and far pairs in the box."""
    z = rng.uniform(-R, R, size=(pairs, D))
    step = rng.normal(size=(pairs, D))
    step *= np.where(np.arange(pairs) % 2 == 0, 0.05, 1.0)[:, None] * R
    w = np.clip(z + step, -R, R)
    best = 0.0
    for zi, wi in zip(z, w):
        dist = np.linalg.norm(zi - wi)
        if dist < 1e-12:
            continue
        best = max(best, np.linalg.norm(grad(zi) - grad(wi)) / dist)
    return float(best)


def build_underestimator(phi: Callable, grad: Callable, R: int, dx: int, dl: int,
                         box_planes: bool = True, n_probe: int = 10**4, seed: int = 0) -> PiecewiseLinearLowerBound:
    """Tangent planes on the integer lattice of [-R, R]^D plus 2D box planes, D = dx + dl.

    ``phi(x, l)`` and ``grad(x, l)`` take the split vectors; the gradient is
    with respect to (x, l) stacked in that order. The box-plane constant C1 is
    chosen from probes so that -C1*R +- C1*z_i stays below phi; the slack is
    the larger of (1/4) M^2 sqrt(D) and the tangent-plane gap M D / 8, with M an
    estimated gradient Lipschitz constant. Probing in [-3R, 3R]^D afterwards
    rejects any piece that exceeds phi, which flags a non-convex input.
    """
    D = dx + dl
    if D > MAX_LATTICE_DIM:
        raise ValueError(f"dx + dl = {D} exceeds the lattice budget of {MAX_LATTICE_DIM}")
    if R < 1:
        raise ValueError("R must be a positive integer")
    rng = make_rng(seed)

    def f(z):
        return float(phi(z[:dx], z[dx:]))

    def g(z):
        return np.asarray(grad(z[:dx], z[dx:]), dtype=float).ravel()

    lattice = np.array(list(itertools.product(range(-R, R + 1), repeat=D)), dtype=float)
    rows, consts = [], []
    for p in lattice:
        gp = g(p)
        rows.append(gp)
        consts.append(f(p) - gp @ p)

    probes = rng.uniform(-3 * R, 3 * R, size=(n_probe, D))
    phis = np.array([f(z) for z in probes])

    if box_planes:
        inf_norm = np.abs(probes).max(axis=1)
        inside = (inf_norm < R) & (phis < 0)
        outside = inf_norm > R
        lo = np.max(-phis[inside] / (R - inf_norm[inside]), initial=0.0)
        if np.any(outside & (phis <= 0)):
            raise ValueError("zero sublevel set is not contained in the box [-R, R]^D")
        hi = np.min(phis[outside] / (inf_norm[outside] - R), initial=np.inf)
        if lo > hi:
            raise ValueError("no admissible box-plane constant; phi looks non-convex")
        if lo == 0.0:
            C1 = min(1.0, hi)
        elif np.isinf(hi):
            C1 = 2 * lo
        else:
            C1 = math.sqrt(lo * hi)
        for i in range(D):
            for s in (1.0, -1.0):
                e = np.zeros(D)
                e[i] = s * C1
                rows.append(e)
                consts.append(-C1 * R)

    rows = np.array(rows)
    consts = np.array(consts)
    vals = probes @ rows.T + consts
    excess = vals.max(axis=1) - phis
    if np.any(excess > 1e-9 * (1 + np.abs(phis))):
        raise ValueError("a piece exceeds phi at a probe point; phi looks non-convex")

    M = _lipschitz_estimate(g, D, R, rng, pairs=n_probe)
    slack = max(0.25 * M * M * math.sqrt(D), M * D / 8.0) if M > 0 else 0.0
    return PiecewiseLinearLowerBound(rows[:, dx:], rows[:, :dx], consts, slack)


# ---------------------------------------------------------------- quadratic model


@dataclass(frozen=True)
class QuadraticSets:
    classification: str  # "eventually-infeasible", "case1" or "case2"
    lambda_min: float
    lambda_max: float
    fro_norm: float
    sigma: float
    level_set: LevelSetKind | None = None
    epsilon: float | None = None
    alpha_delta: float | None = None
    outer: ScaledLevelSet | None = None
    event: ConditionalEvent | None = None
    bounds: AsymptoticBoundPair | None = None
    containment_certified: bool = False
    norm_tail_ratio: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def has_sets(self) -> bool:
        return self.outer is not None


def cone_set_probabilities(L: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Empirical P(L in c * S_{+-i}) for each c, shape (len(c), 2 d).

    S_{+-i} = {+-l_i > 2 sqrt(d), l_i^2 >= 4 (d-1) sum_{j != i} l_j^2}. Each
    such set lies inside {z^T l > 1} for every unit z whose i-th coordinate has
    the matching sign and magnitude at least 1/sqrt(d).
    """
    n, d = L.shape
    sq = L * L
    rest = sq.sum(axis=1, keepdims=True) - sq
    cone = sq >= 4.0 * (d - 1) * rest
    lead = 2.0 * math.sqrt(d)
    out = np.empty((thresholds.size, 2 * d))
    for k, c in enumerate(thresholds):
        out[k, :d] = np.mean(cone & (L > lead * c), axis=0)
        out[k, d:] = np.mean(cone & (-L > lead * c), axis=0)
    return out


def build_sets_quadratic(Qm, A, model, delta: float, epsilon: float | None = None,
                         n_mc: int = 10**5, seed: int = 0, k_factor: float = 4.0) -> QuadraticSets:
    """Classify phi(x, L) = x^T Q x + x^T A L and build (O, C) when Q has a negative eigenvalue.

    h(alpha) = alpha and r(alpha) = alpha^2. alpha_delta is the largest grid
    value 2^k for which every cone set S_{+-i}, scaled by the violation
    threshold c(alpha), still carries empirical mass above delta. Sets with no
    mass under ``model`` (for example the negative orthant for positive
    Pareto losses) are left out of that minimum and the result is flagged as
    not certified.
    """
    Qm = np.asarray(Qm, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if Qm.ndim != 2 or Qm.shape[0] != Qm.shape[1] or not np.allclose(Qm, Qm.T):
        raise ValueError("Q must be square and symmetric")
    dx, dl = A.shape
    if Qm.shape[0] != dx:
        raise ValueError("Q and A disagree on the decision dimension")
    if model.dim != dl:
        raise ValueError("A and the model disagree on the loss dimension")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")

    eig = np.linalg.eigvalsh(Qm)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    sv = np.linalg.svd(A, compute_uv=False)
    sigma = float(sv[min(dx, dl) - 1]) if dx <= dl else 0.0
    if sigma <= 1e-12 * max(1.0, float(sv[0])):
        raise ValueError("A must have full row rank")
    fro = float(np.linalg.norm(A))
    base = dict(lambda_min=lam_min, lambda_max=lam_max, fro_norm=fro, sigma=sigma)

    if lam_min >= 0:
        return QuadraticSets("eventually-infeasible", **base)

    if lam_max < 0:
        kind, level_set = "case1", UnitSphere()
        eps = abs(lam_max) / 2.0 if epsilon is None else float(epsilon)
        if not 0 < eps < abs(lam_max):
            raise ValueError("epsilon must lie in (0, |lambda_max|) to keep C away from the origin")
        unit_radius = (-eps - lam_max) / fro
        threshold_rate = abs(lam_min) / sigma
        bounds = AsymptoticBoundPair(
            lambda l: lam_max + fro * np.linalg.norm(np.atleast_2d(l), axis=1),
            None, eps, lambda a: a * a, lambda a: a)
        unit_event = NormTail(unit_radius, dl)
        k_radius = k_factor * unit_radius
    else:
        kind, level_set = "case2", QuadraticShell(Qm)
        eps = 0.5 / abs(lam_min) if epsilon is None else float(epsilon)
        unit_radius = 1.0
        # on alpha*Pi the quadratic term equals -alpha ||x||, so phi > 0 needs x_hat^T A L > alpha
        threshold_rate = 1.0 / sigma

        def psi_plus(l, _lm=abs(lam_min)):
            n = np.linalg.norm(np.atleast_2d(l) @ A.T, axis=1)
            return np.where(n > 1.0, np.inf, -0.5 / _lm)

        bounds = AsymptoticBoundPair(psi_plus, None, eps, lambda a: a * a, lambda a: a)
        unit_event = NormTail(1.0, dl, A)
        k_radius = k_factor / float(sv[0])

    L = model.sample(n_mc, seed)
    grid = 2.0 ** np.arange(-40, 61)
    probs = cone_set_probabilities(L, grid * threshold_rate)
    has_mass = probs[0] > 0
    certified = bool(np.all(has_mass))
    mins = probs[:, has_mass].min(axis=1) if np.any(has_mass) else np.zeros(grid.size)
    ok = np.flatnonzero(mins > delta)
    alpha_delta = float(grid[ok[-1]]) if ok.size else 0.0

    event = UnionOf((unit_event.scaled(alpha_delta), NormTail(alpha_delta * k_radius, dl)))
    tail_ratio = float(np.mean(np.linalg.norm(L, axis=1) > alpha_delta) / delta) if alpha_delta > 0 else None
    return QuadraticSets(
        kind, level_set=level_set, epsilon=eps, alpha_delta=alpha_delta,
        outer=ScaledLevelSet(level_set, alpha_delta, dx), event=event, bounds=bounds,
        containment_certified=certified, norm_tail_ratio=tail_ratio,
        diagnostics={"grid_hits": int(ok.size), "k_radius": k_radius, "unit_radius": unit_radius},
        **base,
    )
