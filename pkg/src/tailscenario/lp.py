"""Dense two-phase simplex for the sampled linear programs.

Scenario LPs have few variables and many rows. The tableau is always built on
the short side: small problems are solved directly, tall ones through their
dual, so a pivot costs O(short * long) and memory stays O(rows * cols).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
ITERATION_LIMIT = 10**6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = ("<=", ">=", "=")


class LpError(RuntimeError):
    pass


class IterationLimit(LpError):
    pass


@dataclass
class LinearProgram:
    """min/max c.x subject to A x (rel) b and lower <= x <= upper."""

    c: np.ndarray
    A: np.ndarray
    relations: np.ndarray
    b: np.ndarray
    sense: str = "min"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.relations = np.asarray(self.relations, dtype="<U2").ravel()
        if self.A.shape[0] != self.b.size or self.b.size != self.relations.size:
            raise ValueError("A, b and relations disagree on the number of rows")
        bad = set(self.relations.tolist()) - set(_RELATIONS)
        if bad:
            raise ValueError(f"unknown relations {sorted(bad)}")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("right-hand sides must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must match the number of variables")

    @classmethod
    def from_rows(cls, c, rows: Iterable[tuple[Sequence[float], str, float]], sense="min", lower=None, upper=None):
        rows = list(rows)
        n = len(c)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
        return cls(c, A, [r[1] for r in rows], [r[2] for r in rows], sense, lower, upper)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    @property
    def rows(self) -> Iterator[tuple[np.ndarray, str, float]]:
        for a, r, rhs in zip(self.A, self.relations, self.b):
            yield a, str(r), float(rhs)

    def residuals(self, x) -> np.ndarray:
        """Signed violation per row (positive means violated)."""
        ax = self.A @ np.asarray(x, dtype=float)
        out = np.where(self.relations == "<=", ax - self.b, self.b - ax)
        eq = self.relations == "="
        out[eq] = np.abs(ax[eq] - self.b[eq])
        return out

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        scale = tol * (1.0 + np.abs(self.b))
        if np.any(self.residuals(x) > scale):
            return False
        return bool(np.all(x >= self.lower - tol * (1 + np.abs(self.lower)))
                    and np.all(x <= self.upper + tol * (1 + np.abs(self.upper))))

    def dump(self, fh=None) -> str:
        """Plain-text row format: sense, objective, one row per line, bounds."""
        def fmt(v):
            return repr(float(v))
        lines = [self.sense, " ".join(fmt(v) for v in self.c)]
        for a, r, rhs in self.rows:
            lines.append(f"{' '.join(fmt(v) for v in a)} {r} {fmt(rhs)}")
        lines.append("bounds")
        for lo, up in zip(self.lower, self.upper):
            lines.append(f"{fmt(lo)} {fmt(up)}")
        lines.append("end")
        text = "\n".join(lines) + "\n"
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def parse(cls, text: str) -> "LinearProgram":
        lines = [ln.strip() for ln in io.StringIO(text) if ln.strip() and not ln.strip().startswith("#")]
        sense = lines[0].lower()
        c = [float(v) for v in lines[1].split()]
        rows, lower, upper = [], [], []
        i = 2
        while lines[i] not in ("bounds", "end"):
            toks = lines[i].split()
            rows.append(([float(v) for v in toks[:-2]], toks[-2], float(toks[-1])))
            i += 1
        if lines[i] == "bounds":
            i += 1
            while lines[i] != "end":
                lo, up = lines[i].split()
                lower.append(float(lo))
                upper.append(float(up))
                i += 1
        return cls.from_rows(c, rows, sense, lower or None, upper or None)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    value: float = float("nan")
    iterations: int = 0
    duals: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _CoreResult:
    status: str
    z: np.ndarray | None
    duals: np.ndarray | None
    iterations: int


def _simplex_core(A, rel, b, c, iteration_limit=ITERATION_LIMIT) -> _CoreResult:
    """Two-phase tableau simplex for min c.z, A z (rel) b, z >= 0."""
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    rel = rel.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    was_le, was_ge = flip & (rel == "<="), flip & (rel == ">=")
    rel[was_le], rel[was_ge] = ">=", "<="

    is_le, is_ge = rel == "<=", rel == ">="
    n_slack = int(is_le.sum() + is_ge.sum())
    needs_art = ~is_le
    n_art = int(needs_art.sum())
    n_total = n + n_slack + n_art
    aug = np.zeros((m, n_total))
    aug[:, :n] = A
    basis = np.empty(m, dtype=int)
    s = n
    a = n + n_slack
    for i in range(m):
        if is_le[i]:
            aug[i, s] = 1.0
            basis[i] = s
            s += 1
        elif is_ge[i]:
            aug[i, s] = -1.0
            s += 1
        if needs_art[i]:
            aug[i, a] = 1.0
            basis[i] = a
            a += 1
    art_start = n + n_slack

    T = np.empty((m + 1, n_total + 1))
    T[:m, :n_total] = aug
    T[:m, -1] = b
    iters = 0
    bland_after = 5 * (m + n_total)
    active_rows = np.arange(m)

    def run(cost, allowed_cols):
        nonlocal iters
        T[m, :] = 0.0
        T[m, :n_total] = cost
        cb = cost[basis]
        T[m, :] -= cb @ T[:m, :]
        while True:
            if iters >= iteration_limit:
                raise IterationLimit(f"no convergence within {iteration_limit} pivots")
            red = T[m, :allowed_cols]
            tol = FEAS_TOL * (1.0 + np.abs(cost[:allowed_cols]))
            if iters < bland_after:
                j = int(np.argmin(red))
                if red[j] >= -tol[j]:
                    return OPTIMAL
            else:
                cand = np.flatnonzero(red < -tol)
                if cand.size == 0:
                    return OPTIMAL
                j = int(cand[0])
            col = T[:m, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                return UNBOUNDED
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:m, -1][pos] / col[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))
            if iters < bland_after:
                r = int(ties[np.argmax(col[ties])])
            else:
                r = int(ties[np.argmin(basis[ties])])
            _pivot(T, r, j)
            basis[r] = j
            iters += 1

    if n_art:
        cost1 = np.zeros(n_total)
        cost1[art_start:] = 1.0
        run(cost1, n_total)
        if -T[m, -1] > FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)):
            return _CoreResult(INFEASIBLE, None, None, iters)
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= art_start:
                row = T[i, :art_start]
                k = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if k.size:
                    _pivot(T, i, int(k[0]))
                    basis[i] = int(k[0])
                else:
                    keep[i] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            basis = basis[keep]
            active_rows = active_rows[keep]
            m = int(keep.sum())
        T = np.hstack([T[:, :art_start], T[:, -1:]])
        n_total = art_start

    cost2 = np.zeros(n_total)
    cost2[:n] = c
    status = run(cost2, n_total)
    if status == UNBOUNDED:
        return _CoreResult(UNBOUNDED, None, None, iters)

    # polish basic values and duals against the original data
    B = aug[np.ix_(active_rows, basis)]
    zb = np.linalg.solve(B, b[active_rows])
    z_full = np.zeros(n_total)
    z_full[basis] = np.maximum(zb, 0.0)
    y_active = np.linalg.solve(B.T, cost2[basis])
    y = np.zeros(A.shape[0])
    y[active_rows] = y_active
    y[flip] *= -1
    return _CoreResult(OPTIMAL, z_full[:n], y, iters)


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


@dataclass
class _Standard:
    """min ct.z s.t. G z (rel) h, z >= 0 with x = x0 + M z."""

    G: np.ndarray
    rel: np.ndarray
    h: np.ndarray
    ct: np.ndarray
    M: np.ndarray
    x0: np.ndarray
    n_user_rows: int


def _standardize(p: LinearProgram) -> _Standard | None:
    n = p.n_vars
    lo, up = p.lower, p.upper
    if np.any(lo > up):
        return None
    cols, x0 = [], np.zeros(n)
    bound_rows = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo[j]):
            x0[j] = lo[j]
            cols.append(e)
            if np.isfinite(up[j]):
                bound_rows.append((len(cols) - 1, up[j] - lo[j]))
        elif np.isfinite(up[j]):
            x0[j] = up[j]
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    M = np.array(cols).T.reshape(n, len(cols))
    G = p.A @ M
    h = p.b - p.A @ x0
    rel = p.relations.copy()
    if bound_rows:
        extra = np.zeros((len(bound_rows), M.shape[1]))
        for k, (col, cap) in enumerate(bound_rows):
            extra[k, col] = 1.0
        G = np.vstack([G, extra])
        h = np.concatenate([h, [cap for _, cap in bound_rows]])
        rel = np.concatenate([rel, np.full(len(bound_rows), "<=")])
    sign = 1.0 if p.sense == "min" else -1.0
    return _Standard(G, rel, h, sign * (M.T @ p.c), M, x0, p.n_rows)


def _solve_dual(st: _Standard, iteration_limit: int) -> _CoreResult:
    """Solve the standardized primal through its dual (tall problems)."""
    G, rel, h = st.G, st.rel, st.h
    blocks_G, blocks_h, back = [], [], []
    for kind, sgn in ((">=", 1.0), ("<=", -1.0), ("=", 1.0)):
        idx = np.flatnonzero(rel == kind)
        if idx.size:
            blocks_G.append(sgn * G[idx])
            blocks_h.append(sgn * h[idx])
            back.append((idx, sgn))
    eq = np.flatnonzero(rel == "=")
    if eq.size:
        blocks_G.append(-G[eq])
        blocks_h.append(-h[eq])
        back.append((eq, -1.0))
    Gge = np.vstack(blocks_G) if blocks_G else np.zeros((0, G.shape[1]))
    hge = np.concatenate(blocks_h) if blocks_h else np.zeros(0)

    nz = Gge.shape[1]
    dual_rel = np.full(nz, "<=")
    res = _simplex_core(Gge.T.copy(), dual_rel, st.ct.copy(), -hge, iteration_limit)
    if res.status == OPTIMAL:
        z = -res.duals
        u = res.z
        y = np.zeros(G.shape[0])
        pos = 0
        for idx, sgn in back:
            y[idx] += sgn * u[pos:pos + idx.size]
            pos += idx.size
        return _CoreResult(OPTIMAL, np.maximum(z, 0.0), y, res.iterations)
    if res.status == UNBOUNDED:
        return _CoreResult(INFEASIBLE, None, None, res.iterations)
    # dual infeasible: primal is unbounded iff it is feasible
    probe = _simplex_core(Gge.T.copy(), dual_rel, np.zeros(nz), -hge, iteration_limit)
    status = INFEASIBLE if probe.status == UNBOUNDED else UNBOUNDED
    return _CoreResult(status, None, None, res.iterations + probe.iterations)


def solve_lp(p: LinearProgram, method: str = "auto", iteration_limit: int = ITERATION_LIMIT) -> LpSolution:
    """Solve ``p``; ``method`` is 'auto', 'primal' or 'dual' (tableau orientation)."""
    st = _standardize(p)
    if st is None:
        return LpSolution(INFEASIBLE)
    m, nz = st.G.shape
    if method == "auto":
        method = "dual" if m > 3 * nz + 10 else "primal"
    if method == "primal":
        res = _simplex_core(st.G, st.rel, st.h, st.ct, iteration_limit)
    elif method == "dual":
        res = _solve_dual(st, iteration_limit)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res.status != OPTIMAL:
        return LpSolution(res.status, iterations=res.iterations)
    x = st.x0 + st.M @ res.z
    y = res.duals[: st.n_user_rows]
    if p.sense == "max":
        y = -y
    return LpSolution(OPTIMAL, x, float(p.c @ x), res.iterations, y)


def drop_dominated_rows(A: np.ndarray, relations, b: np.ndarray):
    """Exact presolve: among rows with identical coefficients and relation keep the tightest."""
    A = np.asarray(A, dtype=float)
    relations = np.asarray(relations)
    b = np.asarray(b, dtype=float)
    keep_A, keep_rel, keep_b = [], [], []
    for kind in _RELATIONS:
        idx = np.flatnonzero(relations == kind)
        if not idx.size:
            continue
        uniq, inv = np.unique(A[idx], axis=0, return_inverse=True)
        inv = inv.ravel()
        if kind == ">=":
            rhs = np.full(len(uniq), -np.inf)
            np.maximum.at(rhs, inv, b[idx])
        elif kind == "<=":
            rhs = np.full(len(uniq), np.inf)
            np.minimum.at(rhs, inv, b[idx])
        else:
            lo = np.full(len(uniq), np.inf)
            hi = np.full(len(uniq), -np.inf)
            np.minimum.at(lo, inv, b[idx])
            np.maximum.at(hi, inv, b[idx])
            if np.any(hi - lo > FEAS_TOL * (1 + np.abs(hi))):
                # conflicting equalities: keep them all so infeasibility is detected
                keep_A.append(A[idx]); keep_rel.append(relations[idx]); keep_b.append(b[idx])
                continue
            rhs = lo
        keep_A.append(uniq)
        keep_rel.append(np.full(len(uniq), kind))
        keep_b.append(rhs)
    if not keep_A:
        return A[:0], relations[:0], b[:0]
    return np.vstack(keep_A), np.concatenate(keep_rel), np.concatenate(keep_b)
