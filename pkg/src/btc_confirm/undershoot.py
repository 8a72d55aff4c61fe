"""Expected undershoot below zero of the unit-jump Cramer-Lundberg process.

Write ``g(x) = E S_x`` for the depth below 0 at first passage when starting
from level ``x``.  Conditioning on the first block arrival gives, on (0, 1],

    g(x) = 1 - c + exp(-(1 - x)/c) * (c + g(1)) - x

and on (n - 1, n] for n >= 2

    g(x) = int_0^{(n - x)/c} g(x + c y - 1) e^{-y} dy + exp(-(n - x)/c) g(n).

The integral only reads ``g`` on the previous unit interval, so each interval
representation ``f_n`` is an affine function of the unknown knot values
``a_k = g(k)``.  Right-continuity at every knot (``a_n = f_{n+1}(n)``) plus
the closure ``a_{N-1} = a_N`` gives a square linear system for a_1..a_N.

Each ``f_n`` is stored by its values on Chebyshev-Lobatto points of a few
panels per unit interval.  Panels are graded towards the right end of the
interval, where ``exp(-(n - x)/c)`` forms a boundary layer of width ``c``.
Because the geometry is the same on every interval, a single
quadrature/interpolation matrix maps ``f_n`` to ``f_{n+1}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .model import DomainError

__all__ = [
    "UndershootSolution",
    "SingularSystemError",
    "NonConvergenceError",
    "TruncationWarning",
    "solve",
    "evaluate",
    "expected_undershoot",
    "interval_bounds",
    "elimination_coefficients",
    "limiting_tail_c1",
    "limiting_mean_c1",
    "DEFAULT_TOL",
    "DEFAULT_CLOSURE_TOL",
    "MAX_AUTO_DEPTH",
]

DEFAULT_TOL = 1e-9
DEFAULT_CLOSURE_TOL = 1e-7
DEFAULT_ORDER = 16
MAX_AUTO_DEPTH = 64

# exp(-40) is below double precision relative to O(1) values
_WEIGHT_CUTOFF = 40.0


class SingularSystemError(ArithmeticError):
    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class NonConvergenceError(ArithmeticError):
    def __init__(self, message: str, defect: float):
        self.defect = defect
        super().__init__(message)


class TruncationWarning(UserWarning):
    """Evaluation beyond the solved range; the last knot value is returned."""


def _check_rate(c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or not (0.0 < c <= 1.0):
        raise DomainError("c", f"must lie in (0, 1], got {c!r}")
    return c


# ---------------------------------------------------------------------------
# piecewise Chebyshev representation on the unit interval


def _lobatto(m: int) -> np.ndarray:
    return -np.cos(np.pi * np.arange(m + 1) / m)


def _bary_weights(m: int) -> np.ndarray:
    w = (-1.0) ** np.arange(m + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _interp_matrix(t_nodes: np.ndarray, w: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Barycentric interpolation rows mapping nodal values to values at ``t``."""
    d = t[:, None] - t_nodes[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    r = w[None, :] / d
    r /= r.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    r[rows] = hit[rows].astype(float)
    return r


@dataclass(frozen=True)
class _Grid:
    breaks: np.ndarray  # panel breakpoints in local coordinate u in [0, 1]
    order: int
    nodes: np.ndarray  # all nodal u values, panel by panel

    @property
    def n_panels(self) -> int:
        return len(self.breaks) - 1

    @property
    def per_panel(self) -> int:
        return self.order + 1

    def interp(self, u: np.ndarray) -> np.ndarray:
        """Matrix of shape (len(u), n_nodes) evaluating the representation at u."""
        u = np.asarray(u, dtype=float)
        out = np.zeros((u.size, self.nodes.size))
        panel = np.clip(np.searchsorted(self.breaks, u, side="right") - 1, 0, self.n_panels - 1)
        t_nodes = _lobatto(self.order)
        w = _bary_weights(self.order)
        k = self.per_panel
        for p in np.unique(panel):
            sel = panel == p
            lo, hi = self.breaks[p], self.breaks[p + 1]
            t = 2.0 * (u[sel] - lo) / (hi - lo) - 1.0
            out[np.ix_(sel, np.arange(p * k, (p + 1) * k))] = _interp_matrix(t_nodes, w, t)
        return out


def _make_grid(c: float, order: int) -> _Grid:
    # distances c, 2c, 4c, ... from the right end, while they stay well inside
    s = [0.0, 1.0]
    k = 0
    while c * 2.0**k <= 0.5:
        s.append(c * 2.0**k)
        k += 1
    breaks = np.unique(1.0 - np.array(s))
    t = _lobatto(order)
    nodes = np.concatenate(
        [lo + (hi - lo) * (t + 1.0) / 2.0 for lo, hi in zip(breaks[:-1], breaks[1:])]
    )
    return _Grid(breaks=breaks, order=order, nodes=nodes)


@dataclass(frozen=True)
class _Operator:
    c: float
    grid: _Grid
    step: np.ndarray  # maps nodal values of f_n to the integral part of f_{n+1}
    layer: np.ndarray  # exp(-(1 - u)/c) at the nodes
    left: int  # index of the node at u = 0

    def first_interval(self, width: int) -> np.ndarray:
        """Affine coefficients (const, a_1, ..., a_{width-1}) of f_1 at the nodes."""
        u = self.grid.nodes
        f = np.zeros((u.size, width))
        f[:, 0] = 1.0 - self.c - u + self.layer * self.c
        f[:, 1] = self.layer
        return f

    def representations(self, depth: int) -> list[np.ndarray]:
        """Affine nodal coefficients of f_1..f_depth, each (n_nodes, depth + 1)."""
        reps = [self.first_interval(depth + 1)]
        for n in range(1, depth):
            nxt = self.step @ reps[-1]
            nxt[:, n + 1] += self.layer
            reps.append(nxt)
        return reps


@lru_cache(maxsize=64)
def _operator(c: float, order: int) -> _Operator:
    grid = _make_grid(c, order)
    gx, gw = leggauss(order)
    u_nodes = grid.nodes
    interior = grid.breaks[1:-1]
    step = np.zeros((u_nodes.size, u_nodes.size))
    for i, u in enumerate(u_nodes):
        # integral over v in [u, 1] of f(v) exp(-(v - u)/c) / c, where v is the
        # integrand argument x + c y - 1 shifted to the previous interval
        v_max = min(1.0, u + _WEIGHT_CUTOFF * c)
        cuts = [u, v_max]
        cuts.extend(b for b in interior if u < b < v_max)
        k = 0
        while u + c * 2.0**k < v_max:
            cuts.append(u + c * 2.0**k)
            k += 1
        cuts = np.unique(cuts)
        lo, hi = cuts[:-1, None], cuts[1:, None]
        v = (lo + (hi - lo) * (gx[None, :] + 1.0) / 2.0).ravel()
        wt = ((hi - lo) / 2.0 * gw[None, :]).ravel() * np.exp(-(v - u) / c) / c
        step[i] = wt @ grid.interp(v)
    layer = np.exp(-(1.0 - u_nodes) / c)
    left = int(np.argmin(u_nodes))
    step.setflags(write=False)
    layer.setflags(write=False)
    return _Operator(c=c, grid=grid, step=step, layer=layer, left=left)


# ---------------------------------------------------------------------------
# solution object


@dataclass(frozen=True, eq=False)
class UndershootSolution:
    """Solved representation of ``x -> E S_x`` for one traffic rate."""

    c: float
    n_max: int
    knot_values: np.ndarray  # a_1..a_{n_max}
    interval_values: np.ndarray  # (n_max, n_nodes): numeric f_n at the nodes
    interval_coeffs: np.ndarray  # (n_max, n_nodes, n_max + 1): affine in (1, a_1..)
    nodes: np.ndarray
    breaks: np.ndarray
    quadrature_order: int
    residual: float
    closure_defect: float
    condition: float

    @property
    def start_value(self) -> float:
        """E S_0."""
        return evaluate(self, 0.0)

    def knot(self, n: int) -> float:
        return float(self.knot_values[n - 1])

    def covers(self, x: float) -> bool:
        return 0.0 <= x <= self.n_max - 1

    def __call__(self, x):
        return evaluate(self, x)


def _system(reps: list[np.ndarray], left: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Continuity rows a_k = f_{k+1}(k), k = 1..n-1, plus the closure row."""
    A = np.zeros((n, n))
    r = np.zeros(n)
    for k in range(1, n):
        row = reps[k][left, : n + 1].copy()
        row[k] -= 1.0
        A[k - 1] = row[1:]
        r[k - 1] = -row[0]
    A[n - 1, n - 2] = 1.0
    A[n - 1, n - 1] = -1.0
    return A, r


def _solve_depth(op: _Operator, reps: list[np.ndarray], n: int) -> tuple[np.ndarray, float, float]:
    A, r = _system(reps, op.left, n)
    try:
        a = np.linalg.solve(A, r)
    except np.linalg.LinAlgError:
        raise SingularSystemError("knot system is singular", float("inf")) from None
    cond = float(np.linalg.cond(A))
    if not np.all(np.isfinite(a)):
        raise SingularSystemError("knot system produced non-finite values", cond)
    residual = float(np.max(np.abs(A @ a - r)))
    return a, residual, cond


def _defect(a: np.ndarray) -> float:
    # a_{N-1} = a_N is imposed; the last free difference measures convergence
    return abs(a[-2] - a[-3]) if a.size >= 3 else float("inf")


def solve(
    c: float,
    n_max: int | None = None,
    quadrature_order: int = DEFAULT_ORDER,
    tol: float = DEFAULT_TOL,
    closure_tol: float = DEFAULT_CLOSURE_TOL,
    x_max: float | None = None,
) -> UndershootSolution:
    """Solve for the expected undershoot at traffic rate ``c`` in (0, 1].

    With ``n_max=None`` the depth is the smallest ``N <= 64`` whose last two
    free knot differences are both below ``closure_tol``; ``x_max`` raises the
    depth so that ``evaluate`` covers ``[0, x_max]``.
    """
    c = _check_rate(c)
    if quadrature_order < 4:
        raise DomainError("quadrature_order", "must be >= 4")
    if not tol > 0:
        raise DomainError("tol", "must be positive")
    op = _operator(c, int(quadrature_order))
    need = 3 if x_max is None else max(3, math.ceil(x_max) + 1)

    if n_max is None:
        depth = max(MAX_AUTO_DEPTH, need)
        reps = op.representations(depth)
        chosen = None
        for n in range(4, depth + 1):
            a, _, _ = _solve_depth(op, reps, n)
            if _defect(a) <= closure_tol and abs(a[-3] - a[-4]) <= closure_tol:
                chosen = n
                break
        if chosen is None:
            raise NonConvergenceError(
                f"knot values for c={c} did not settle within depth {depth} "
                f"(last difference {_defect(a):.2e} > {closure_tol:.1e}); pass a larger n_max "
                "or relax closure_tol",
                _defect(a),
            )
        n_max = max(chosen, need)
        reps = reps[:n_max]
    else:
        if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 2:
            raise DomainError("n_max", f"must be an integer >= 2, got {n_max!r}")
        n_max = max(n_max, need if x_max is not None else n_max)
        reps = op.representations(n_max)

    a, residual, cond = _solve_depth(op, reps, n_max)
    defect = _defect(a) if n_max >= 3 else 0.0
    if defect > closure_tol:
        raise NonConvergenceError(
            f"|a_{n_max - 1} - a_{n_max - 2}| = {defect:.2e} exceeds {closure_tol:.1e} "
            f"at c={c}; raise n_max",
            defect,
        )
    if residual > tol:
        raise SingularSystemError(f"knot residual {residual:.2e} exceeds tol {tol:.1e}", cond)

    coeffs = np.stack([rep[:, : n_max + 1] for rep in reps[:n_max]])
    values = coeffs[:, :, 0] + coeffs[:, :, 1:] @ a
    for arr in (a, values, coeffs):
        arr.setflags(write=False)
    return UndershootSolution(
        c=c,
        n_max=n_max,
        knot_values=a,
        interval_values=values,
        interval_coeffs=coeffs,
        nodes=op.grid.nodes,
        breaks=op.grid.breaks,
        quadrature_order=int(quadrature_order),
        residual=residual,
        closure_defect=defect,
        condition=cond,
    )


def evaluate(sol: UndershootSolution, x):
    """E S_x from a solved representation; scalar in, float out."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0):
        raise DomainError("x", "must be finite and >= 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    c, a1 = sol.c, sol.knot_values[0]

    first = flat <= 1.0
    xf = flat[first]
    out[first] = 1.0 - c + np.exp(-(1.0 - xf) / c) * (c + a1) - xf

    beyond = flat > sol.n_max - 1
    if np.any(beyond):
        warnings.warn(
            f"x > {sol.n_max - 1} lies past the solved range; returning a_{sol.n_max}",
            TruncationWarning,
            stacklevel=2,
        )
        out[beyond] = sol.knot_values[-1]

    mid = ~first & ~beyond
    if np.any(mid):
        xm = flat[mid]
        n = np.ceil(xm).astype(int)
        u = xm - (n - 1)
        grid = _Grid(breaks=sol.breaks, order=sol.quadrature_order, nodes=sol.nodes)
        rows = grid.interp(u)
        out[mid] = np.einsum("ij,ij->i", rows, sol.interval_values[n - 1])

    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


def expected_undershoot(c: float, x: float, **solve_kwargs) -> float:
    """E S_x for any ``0 <= c <= 1``; ``c == 0`` is answered in closed form.

    With no inflow the walk drops by exactly one per block: from an integer
    level ``x >= 1`` it lands on 0 (undershoot 0); from 0 itself the first
    jump lands at -1; otherwise it lands at ``frac(x) - 1``.

    In light traffic the knot sequence keeps oscillating far beyond depth
    64, yet the closure hardly reaches back to small ``x`` (each level damps
    it by about ``exp(-1/c)``).  If the adaptive solve does not settle, the
    depth is instead raised until the value at ``x`` itself is stable.
    """
    if float(c) == 0.0:
        x = float(x)
        if not math.isfinite(x) or x < 0:
            raise DomainError("x", "must be finite and >= 0")
        if x == 0.0:
            return 1.0
        frac = x - math.floor(x)
        return 0.0 if frac == 0.0 else 1.0 - frac
    solve_kwargs.setdefault("x_max", float(x))
    try:
        return evaluate(solve(c, **solve_kwargs), x)
    except NonConvergenceError:
        if solve_kwargs.get("n_max") is not None:
            raise
    return _depth_stable_value(c, x, **solve_kwargs)


def _depth_stable_value(c, x, x_max, closure_tol=DEFAULT_CLOSURE_TOL, **solve_kwargs) -> float:
    first = max(3, math.ceil(max(x, x_max)) + 1) + 1
    prev, steady = None, 0
    for n in range(first, max(MAX_AUTO_DEPTH, first + 8) + 1):
        v = evaluate(solve(c, n_max=n, closure_tol=math.inf, x_max=x_max, **solve_kwargs), x)
        if prev is not None and abs(v - prev) <= closure_tol:
            steady += 1
            if steady == 2:
                return v
        else:
            steady = 0
        prev = v
    raise NonConvergenceError(f"E S_x at x={x}, c={c} does not settle as the depth grows", abs(v - prev))


# ---------------------------------------------------------------------------
# guaranteed brackets for E S_0


def elimination_coefficients(
    c: float, depth: int, quadrature_order: int = DEFAULT_ORDER
) -> tuple[float, float]:
    """(alpha, beta) with E S_0 = alpha + beta * E S_depth.

    The first ``depth - 1`` continuity relations are used to eliminate
    a_1..a_{depth-1}; no closure assumption enters.
    """
    c = _check_rate(c)
    if isinstance(depth, bool) or not isinstance(depth, int) or depth < 1:
        raise DomainError("depth", f"must be a positive integer, got {depth!r}")
    e = math.exp(-1.0 / c)
    base = 1.0 - c + c * e  # E S_0 = base + e * a_1
    if depth == 1:
        return base, e
    op = _operator(c, int(quadrature_order))
    reps = op.representations(depth)
    d = depth
    A = np.zeros((d - 1, d - 1))
    r0 = np.zeros(d - 1)
    r1 = np.zeros(d - 1)
    for k in range(1, d):
        row = reps[k][op.left].copy()
        row[k] -= 1.0
        A[k - 1] = row[1:d]
        r0[k - 1] = -row[0]
        r1[k - 1] = -row[d]
    sol = np.linalg.solve(A, np.column_stack([r0, r1]))
    return base + e * float(sol[0, 0]), e * float(sol[0, 1])


def interval_bounds(
    c: float, depth: int, quadrature_order: int = DEFAULT_ORDER
) -> tuple[float, float]:
    """Interval guaranteed to contain E S_0, using only 0 <= E S_depth <= 1."""
    alpha, beta = elimination_coefficients(c, depth, quadrature_order)
    return alpha, alpha + beta


# ---------------------------------------------------------------------------
# zero-drift limit


def limiting_tail_c1(y: float) -> float:
    """P(S_inf > y) = (1 - y)^2 for c = 1 and unit jumps."""
    y = float(y)
    if not (0.0 <= y <= 1.0):
        raise DomainError("y", f"must lie in [0, 1], got {y!r}")
    return (1.0 - y) ** 2


def limiting_mean_c1() -> float:
    return 1.0 / 3.0
