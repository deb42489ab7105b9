"""Picard solver for the partial-resetting integral equation

    g(x) = h(x) + gamma * int_{u1}^{u2} r(x, y) g(p y) dy,   x in B.

The unknown lives on a uniform grid over B.  Values g(p y) between nodes
come from the grid interpolant; the y-integral uses a composite rule over
panels whose breakpoints include every node (so the kink of r(x, .) at
y = x is always a panel edge) and every node divided by p (so g(p .) is a
single interpolation piece inside each panel).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConvergenceError, DomainError
from .kernels import KernelHandle


class Interp(str, enum.Enum):
    LINEAR = "linear"
    CUBIC_MONOTONE = "cubic_monotone"


class Quadrature(str, enum.Enum):
    TRAPEZOID = "trapezoid"
    SIMPSON = "simpson"


_EDGE = 1e-13


@dataclass(frozen=True)
class GridFunction:
    """Node values on an increasing grid plus an interpolation rule."""

    nodes: np.ndarray
    values: np.ndarray
    interp: Interp = Interp.CUBIC_MONOTONE
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or values.shape != nodes.shape:
            raise DomainError("GridFunction needs matching 1-D nodes and values (>= 2)")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("GridFunction nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "interp", Interp(self.interp))
        if self.interp is Interp.CUBIC_MONOTONE and nodes.size >= 3:
            # far-field values near the underflow limit make the harmonic-mean
            # slopes overflow; the resulting zero derivatives are harmless
            with np.errstate(over="ignore", divide="ignore"):
                spline = PchipInterpolator(nodes, values, extrapolate=False)
            object.__setattr__(self, "_spline", spline)

    @classmethod
    def sample(cls, fn: Callable, nodes, interp=Interp.CUBIC_MONOTONE) -> "GridFunction":
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, np.asarray(fn(nodes), dtype=float) * np.ones_like(nodes), interp)

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.lo), abs(self.hi))
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            raise DomainError(f"evaluation outside [{self.lo}, {self.hi}]")
        return self._eval(np.clip(x, self.lo, self.hi))

    def _eval(self, x):
        if self._spline is None:
            out = np.interp(x, self.nodes, self.values)
        else:
            out = self._spline(x)
        return out if np.ndim(out) else float(out)

    def sup_distance(self, other: "GridFunction") -> float:
        return float(np.max(np.abs(self.values - other(self.nodes))))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nodes, values, self.interp)


@dataclass(frozen=True)
class SolveConfig:
    grid_points: int = 257
    quadrature: Quadrature = Quadrature.SIMPSON
    picard_tol: float = 1e-10
    max_iter: int = 200
    truncation_eps: float = 1e-10
    interp: Interp = Interp.CUBIC_MONOTONE

    def __post_init__(self):
        object.__setattr__(self, "quadrature", Quadrature(self.quadrature))
        object.__setattr__(self, "interp", Interp(self.interp))
        if self.grid_points < 33:
            raise DomainError("grid_points must be >= 33")
        if self.quadrature is Quadrature.SIMPSON and self.grid_points % 2 == 0:
            raise DomainError("grid_points must be odd for Simpson")
        if not self.picard_tol > 0:
            raise DomainError("picard_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")

    def refined(self) -> "SolveConfig":
        """Same config with the grid spacing halved."""
        return SolveConfig(2 * self.grid_points - 1, self.quadrature, self.picard_tol,
                           self.max_iter, self.truncation_eps, self.interp)

    def nodes(self, lo: float, hi: float) -> np.ndarray:
        return np.linspace(lo, hi, self.grid_points)


@dataclass
class SolveResult:
    g: GridFunction
    iterations: int
    residual: float
    history: list
    rho: float
    literal_condition: bool
    operator: "IntegralOperator" = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.g, self.iterations, self.residual))

    def at(self, x):
        """Nyström evaluation g(x) = h(x) + gamma int r(x,y) g(py) dy at arbitrary x."""
        return self.operator.apply_at(x, self.g)


def _panel_rule(quadrature: Quadrature, breaks: np.ndarray):
    lo, hi = breaks[:-1], breaks[1:]
    width = hi - lo
    keep = width > 0
    lo, hi, width = lo[keep], hi[keep], width[keep]
    eps = _EDGE * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    eps = np.minimum(eps, 0.25 * width)
    left, right = lo + eps, hi - eps
    if quadrature is Quadrature.TRAPEZOID:
        pts = np.stack([left, right], axis=1)
        wts = np.stack([0.5 * width, 0.5 * width], axis=1)
    else:
        pts = np.stack([left, 0.5 * (lo + hi), right], axis=1)
        wts = np.stack([width / 6.0, 4.0 * width / 6.0, width / 6.0], axis=1)
    return pts.ravel(), wts.ravel()


def _breakpoints(u1, u2, p, nodes, extra=()):
    cand = [np.array([u1, u2]), nodes]
    if p > 0:
        cand.append(nodes / p)
    cand.append(np.asarray(list(extra), dtype=float))
    pts = np.concatenate(cand)
    pts = pts[(pts >= u1) & (pts <= u2)]
    pts = np.unique(pts)
    # merge near-duplicates that would create degenerate panels
    tol = 1e-12 * max(1.0, abs(u1), abs(u2))
    keep = np.concatenate([[True], np.diff(pts) > tol])
    pts = pts[keep]
    pts[0], pts[-1] = u1, u2
    return pts


class IntegralOperator:
    """Discretised A f(x) = h(x) + gamma int_{u1}^{u2} r(x,y) f(py) dy on a node set.

    ``outside`` optionally gives constant values used for f(py) when py falls
    below / above the grid (the renewal form with indicator data).  Without
    it, [p u1, p u2] must lie inside the grid.
    """

    def __init__(self, kernel: KernelHandle, nodes, gamma: float, p: float, u1: float, u2: float,
                 quadrature: Quadrature = Quadrature.SIMPSON, h: Callable | GridFunction | None = None,
                 outside: tuple | None = None, extra_breaks: Sequence[float] = ()):
        self.kernel = kernel
        self.nodes = np.asarray(nodes, dtype=float)
        self.gamma = float(gamma)
        self.p = float(p)
        self.u1, self.u2 = float(u1), float(u2)
        self.quadrature = Quadrature(quadrature)
        self.outside = outside
        self.h = h
        self.extra_breaks = tuple(extra_breaks)
        lo, hi = self.nodes[0], self.nodes[-1]
        if not 0 < self.p <= 1:
            raise DomainError(f"p must lie in (0, 1], got {p}")
        if self.u1 > self.u2:
            raise DomainError(f"inverted integration interval [{u1}, {u2}]")
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if self.u1 < lo - tol or self.u2 > hi + tol:
            raise DomainError(f"[u1, u2] = [{u1}, {u2}] not inside B = [{lo}, {hi}]")
        if outside is None and (self.p * self.u1 < lo - tol or self.p * self.u2 > hi + tol):
            raise DomainError(f"[p u1, p u2] = [{p * u1}, {p * u2}] escapes B = [{lo}, {hi}]")
        self.empty = self.u2 - self.u1 <= tol
        self._h_nodes = self._h_values(self.nodes)
        self._matrix, self._scaled = self._assemble(self.nodes)

    def _h_values(self, x):
        if self.h is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        if isinstance(self.h, GridFunction) and np.array_equal(self.h.nodes, x):
            return self.h.values.copy()
        return np.asarray(self.h(x), dtype=float) * np.ones_like(np.asarray(x, dtype=float))

    def _rule(self, extra=()):
        brk = _breakpoints(self.u1, self.u2, self.p, self.nodes,
                           tuple(self.extra_breaks) + tuple(extra) + self._kink_breaks())
        return _panel_rule(self.quadrature, brk)

    def _kink_breaks(self):
        lo, hi = self.nodes[0], self.nodes[-1]
        out = []
        for edge in (lo, hi, 0.0):
            out.append(edge / self.p)
        return tuple(out)

    def _assemble(self, rows):
        if self.empty:
            return np.zeros((rows.size, 0)), np.zeros(0)
        y, w = self._rule()
        mat = self.kernel._eval(rows[:, None], y[None, :]) * w[None, :]
        return mat, self.p * y

    def _f_at(self, f: GridFunction, s):
        lo, hi = self.nodes[0], self.nodes[-1]
        if self.outside is None:
            return f._eval(np.clip(s, lo, hi))
        below, above = self.outside
        inside = np.clip(s, lo, hi)
        vals = np.asarray(f._eval(inside), dtype=float)
        vals = np.where(s < lo, below, vals)
        return np.where(s > hi, above, vals)

    def integral(self, f: GridFunction) -> np.ndarray:
        """int r(x_i, y) f(py) dy on the nodes."""
        if self.empty:
            return np.zeros(self.nodes.size)
        return self._matrix @ self._f_at(f, self._scaled)

    def apply(self, f: GridFunction) -> np.ndarray:
        return self._h_nodes + self.gamma * self.integral(f)

    def apply_at(self, x, f: GridFunction):
        """A f at arbitrary points, with each point's kink added as a breakpoint."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            if self.empty:
                integral = 0.0
            else:
                y, w = self._rule(extra=(xi,))
                vals = self._f_at(f, self.p * y)
                integral = float(np.dot(self.kernel._eval(np.full_like(y, xi), y) * w, vals))
            out[i] = float(self._h_values(np.array([xi]))[0]) + self.gamma * integral
        return out

    def row_masses(self) -> np.ndarray:
        """Closed-form int_{u1}^{u2} r(x_i, y) dy per node."""
        if self.empty:
            return np.zeros(self.nodes.size)
        return np.asarray(self.kernel.mass(self.nodes, self.u1, self.u2), dtype=float)

    def contraction_ratio(self) -> float:
        masses = self.row_masses()
        return abs(self.gamma) * float(np.max(np.abs(masses))) if masses.size else 0.0


def _as_grid(h, nodes, interp) -> GridFunction:
    if isinstance(h, GridFunction):
        return h
    return GridFunction.sample(h, nodes, interp)


def apply_operator(k: KernelHandle, h: GridFunction, f: GridFunction, gamma: float, p: float,
                   u1: float, u2: float, cfg: SolveConfig | None = None) -> GridFunction:
    """A f sampled on the nodes of ``h``."""
    cfg = cfg or SolveConfig()
    op = IntegralOperator(k, h.nodes, gamma, p, u1, u2, cfg.quadrature, h=h)
    return h.with_values(op.apply(f))


def solve_fixed_point(k: KernelHandle, h, gamma: float, p: float, u1: float, u2: float,
                      cfg: SolveConfig | None = None, nodes=None, f0: GridFunction | None = None,
                      outside: tuple | None = None, extra_breaks: Sequence[float] = ()) -> SolveResult:
    """Picard iteration for the fixed point of A.

    ``h`` is a GridFunction or a callable (sampled on ``nodes``, which default
    to a uniform grid over the kernel's finite domain).  The returned residual
    is sup |A g_prev - g_prev| for the last step, an upper bound on
    sup |A g - g| for the returned iterate.
    """
    cfg = cfg or SolveConfig()
    if nodes is None:
        nodes = h.nodes if isinstance(h, GridFunction) else cfg.nodes(k.lo, k.hi)
    nodes = np.asarray(nodes, dtype=float)
    op = IntegralOperator(k, nodes, gamma, p, u1, u2, cfg.quadrature, h=h,
                          outside=outside, extra_breaks=extra_breaks)
    rho = op.contraction_ratio()
    literal = abs(gamma) < k.q
    if rho >= 1.0:
        raise DomainError(f"operator is not a contraction: |gamma| * sup mass = {rho:.6g} >= 1")
    g = f0 if f0 is not None else GridFunction(nodes, op._h_nodes, cfg.interp)
    if not np.array_equal(g.nodes, nodes):
        g = GridFunction(nodes, g(nodes), cfg.interp)
    history = []
    # the tolerance is absolute for forcings of order one and relative beyond
    tol = cfg.picard_tol * max(1.0, float(np.max(np.abs(op._h_nodes))))
    for it in range(1, cfg.max_iter + 1):
        new = GridFunction(nodes, op.apply(g), cfg.interp)
        diff = float(np.max(np.abs(new.values - g.values)))
        history.append(diff)
        g = new
        if diff <= tol:
            return SolveResult(g, it, diff, history, rho, literal, op)
    raise ConvergenceError(
        f"Picard iteration did not converge in {cfg.max_iter} iterations "
        f"(residual {history[-1]:.3e} > {tol:.1e})", history)


def measured_contraction(history: Sequence[float]) -> float:
    """Largest ratio between successive Picard differences (ignoring round-off floor)."""
    h = [d for d in history if d > 1e-13]
    if len(h) < 2:
        return 0.0
    return max(b / a for a, b in zip(h[:-1], h[1:]))


# ---------------------------------------------------------------------------
# truncated resolvent series by nested Gauss-Legendre quadrature (test oracle)

_GL_ORDER = 24


def _gl(order=_GL_ORDER):
    return np.polynomial.legendre.leggauss(order)


def series_sum(k: KernelHandle, h: Callable, gamma: float, p: float, u1: float, u2: float,
               K: int, nodes=None, order: int = _GL_ORDER, extra_breaks: Sequence[float] = ()) -> GridFunction:
    """h + sum_{j=1}^{K} gamma^j V^j h evaluated by nested quadrature.

    Each level integrates r(x, y) phi_{j-1}(p y) over [u1, u2] with
    Gauss-Legendre panels split at y = x, at u1/p, u2/p and ``extra_breaks``.
    Neglected tail: (|gamma| sup_x mass)^{K+1} sup|h| / (1 - |gamma| sup_x mass).
    """
    if K < 0:
        raise DomainError("K must be >= 0")
    if K > 4:
        raise DomainError("series_sum is limited to K <= 4 (cost grows as order^K)")
    if nodes is None:
        nodes = h.nodes if isinstance(h, GridFunction) else np.linspace(k.lo, k.hi, 33)
    nodes = np.asarray(nodes, dtype=float)
    xg, wg = _gl(order)
    base = [u1 / p, u2 / p] + list(extra_breaks)
    if k.kind.value == "two_sided":
        base += [k.b / p, k.a / p]

    def level(xs, j):
        # returns phi_j at points xs, phi_0 = h, phi_j = int r(x,y) phi_{j-1}(py) dy
        if j == 0:
            return np.asarray(h(xs), dtype=float) * np.ones_like(xs)
        total = np.zeros_like(xs)
        if u2 <= u1:
            return total
        for idx, x in enumerate(xs):
            brk = np.unique(np.clip(np.array([u1, u2, x] + base), u1, u2))
            lo, hi = brk[:-1], brk[1:]
            half = 0.5 * (hi - lo)
            ys = (0.5 * (hi + lo))[:, None] + half[:, None] * xg[None, :]
            ws = half[:, None] * wg[None, :]
            ys, ws = ys.ravel(), ws.ravel()
            inner = level(p * ys, j - 1)
            total[idx] = np.dot(k._eval(np.full_like(ys, x), ys) * ws, inner)
        return total

    values = level(nodes, 0).copy()
    for j in range(1, K + 1):
        values = values + gamma ** j * level(nodes, j)
    return GridFunction(nodes, values)


def series_tail_bound(k: KernelHandle, gamma: float, u1: float, u2: float, K: int, h_sup: float,
                      nodes=None) -> float:
    if nodes is None:
        nodes = np.linspace(k.lo, k.hi, 201)
    rho = abs(gamma) * float(np.max(np.abs(k.mass(np.asarray(nodes), u1, u2)))) if u2 > u1 else 0.0
    return rho ** (K + 1) * h_sup / (1.0 - rho)
