"""Scaled scale functions and their iterated convolutions (barriers >= 0).

For rate q and shrink factor p the scaled functions are
``w_n(x) = p^n W(p^n x)``; level n of the table is the convolution
``L_n = w_0 * w_1 * ... * w_n`` (L_{-1} is the unit mass at 0).  The series
operator

    G_gamma h(x; u, z) = sum_k gamma^k int_0^{x - u p^-k} h(p^k (x - y) - z) L_{k-1}(y) dy

is the fixed point of ``f -> h(. - z) + (gamma/p) int_u^{xp} W(x - y/p) f(y) dy``,
which gives a second analytic route to the two-sided identities when
both barriers are nonnegative.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError
from .levy_model import ProcessSpec
from .scale import ScaleContext

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_PANEL = 0.25


def w_n(spec: ProcessSpec, q: float, p: float, n: int, x):
    """p^n W^{(q)}(p^n x); zero for x < 0."""
    if n < 0:
        raise DomainError(f"level must be >= 0, got {n}")
    if not 0 < p <= 1:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    ctx = ScaleContext(spec, q)
    scale = p ** n
    out = scale * ctx.W(scale * np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def _convolution_weights(i: int, h: float) -> np.ndarray:
    """Composite rule on nodes 0..i (Simpson, closing with 3/8 for odd i)."""
    w = np.zeros(i + 1)
    if i == 0:
        return w
    if i == 1:
        w[:] = h / 2.0
        return w
    m = i if i % 2 == 0 else i - 3
    if m > 0:
        w[0:m + 1:2] += 2.0 * h / 3.0
        w[1:m:2] += 4.0 * h / 3.0
        w[0] -= h / 3.0
        w[m] -= h / 3.0
    if i % 2:
        w[m:m + 4] += 3.0 * h / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


class ConvTable:
    """Lazily built grids of the convolution levels on [0, x_max]."""

    def __init__(self, spec: ProcessSpec, q: float, p: float, x_max: float,
                 n_max: int = 25, grid_points: int = 2049):
        if not q > 0:
            raise DomainError(f"q must be > 0, got {q}")
        if not 0 < p < 1:
            raise DomainError(f"p must lie in (0, 1), got {p}")
        if not x_max > 0:
            raise DomainError(f"x_max must be > 0, got {x_max}")
        if grid_points < 33:
            raise DomainError("grid_points must be >= 33")
        self.spec, self.q, self.p = spec, float(q), float(p)
        self.x_max, self.n_max = float(x_max), int(n_max)
        self.ctx = ScaleContext(spec, q)
        self.nodes = np.linspace(0.0, self.x_max, grid_points)
        self.h = self.nodes[1] - self.nodes[0]
        self._values: list[np.ndarray] = [np.asarray(self.ctx.W(self.nodes), dtype=float)]
        self._interp: dict[int, PchipInterpolator] = {}
        self._cumulative: dict[int, np.ndarray] = {}

    def values(self, n: int) -> np.ndarray:
        """Grid values of level n (computed from level n-1 by one convolution)."""
        if not 0 <= n <= self.n_max:
            raise DomainError(f"level {n} outside [0, {self.n_max}]")
        while len(self._values) <= n:
            k = len(self._values)
            prev = self._values[-1]
            kern = w_n(self.spec, self.q, self.p, k, self.nodes)
            out = np.empty_like(prev)
            for i in range(len(self.nodes)):
                wts = _convolution_weights(i, self.h)
                out[i] = np.dot(wts * kern[i::-1], prev[: i + 1])
            self._values.append(out)
        return self._values[n]

    def __call__(self, n: int, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < -1e-12) or np.any(x > self.x_max * (1 + 1e-12)):
            raise DomainError(f"x outside the cached range [0, {self.x_max}]")
        if n == 0:
            out = np.asarray(self.ctx.W(np.maximum(x, 0.0)))
        else:
            if n not in self._interp:
                self._interp[n] = PchipInterpolator(self.nodes, self.values(n))
            out = self._interp[n](np.clip(x, 0.0, self.x_max))
        return out if out.ndim else float(out)

    def integral(self, n: int, x: float) -> float:
        """int_0^x L_n(y) dy (used for the series tail bound)."""
        if n not in self._cumulative:
            v = self.values(n)
            self._cumulative[n] = np.concatenate(([0.0], np.cumsum((v[1:] + v[:-1]) * self.h / 2.0)))
        return float(np.interp(x, self.nodes, self._cumulative[n]))


@functools.lru_cache(maxsize=32)
def conv_table(spec: ProcessSpec, q: float, p: float, x_max: float, n_max: int = 25,
               grid_points: int = 2049) -> ConvTable:
    return ConvTable(spec, q, p, x_max, n_max, grid_points)


def conv_level(table: ConvTable, n: int, x):
    """Level n of the iterated convolution at x in [0, x_max]."""
    return table(n, x)


def _integrate(f, lo: float, hi: float, breaks=()) -> float:
    if hi <= lo:
        return 0.0
    pts = sorted({lo, hi, *(b for b in breaks if lo < b < hi)})
    total = 0.0
    for left, right in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((right - left) / _PANEL)))
        edges = np.linspace(left, right, n + 1)
        half = (edges[1:] - edges[:-1])[:, None] / 2.0
        mid = (edges[1:] + edges[:-1])[:, None] / 2.0
        y = (mid + half * _GL_NODES[None, :]).ravel()
        total += float(np.sum((half * _GL_WEIGHTS[None, :]).ravel() * f(y)))
    return total


def G_operator(table: ConvTable, h, gamma: float, x: float, u: float, z: float,
               kinks=(0.0,), tol: float = 1e-12, h_sup: float | None = None) -> float:
    """Series operator G_gamma h(x; u, z).

    ``kinks`` are arguments t at which h(t) is not smooth; they become
    quadrature breakpoints.  For u > 0 the sum is finite; for u = 0 it is
    cut once gamma^k sup|h| int_0^x L_{k-1} drops below ``tol``.
    """
    if u < 0:
        raise DomainError(f"u must be >= 0, got {u}")
    if x > table.x_max * (1 + 1e-12):
        raise DomainError(f"x={x} beyond the table range {table.x_max}")
    total = float(h(np.asarray([x - z]))[0])
    if gamma == 0.0:
        return total
    p = table.p
    if h_sup is None:
        t_grid = np.linspace(-z, max(x - z, -z), 257)
        h_sup = float(np.max(np.abs(h(t_grid))))
    for k in range(1, table.n_max + 2):
        upper = x - u * p ** (-k)
        if upper <= 0:
            break
        scale = p ** k
        breaks = [x - (t + z) / scale for t in kinks]
        level = k - 1

        def integrand(y, scale=scale, level=level):
            return h(scale * (x - y) - z) * table(level, y)

        total += gamma ** k * _integrate(integrand, 0.0, upper, breaks)
        bound = abs(gamma) ** (k + 1) * h_sup * table.integral(min(k, table.n_max), x) if k < table.n_max + 1 else 0.0
        if u == 0.0 and bound < tol:
            break
    else:
        if u * p ** (-(table.n_max + 2)) < x:
            raise DomainError("level cap reached before the series terminated")
    return total


def finite_sum_levels(x: float, u: float, p: float) -> int:
    """Number of nonzero k >= 1 terms when u > 0."""
    if u <= 0 or x <= u:
        return 0
    return int(math.ceil(math.log(x / u) / math.log(1.0 / p)))


def _check(q, lam, p, b, a, x):
    if not q > 0:
        raise DomainError(f"q must be > 0, got {q}")
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if not (a > b >= 0):
        raise DomainError(f"need a > b >= 0, got a={a}, b={b}")
    if not b <= x <= a:
        raise DomainError(f"x={x} outside [b, a]")


def _table_for(spec, q, lam, p, a, grid_points):
    return conv_table(spec, float(q + lam), float(p), float(a), 25, grid_points)


def conv_scale_W(spec, q, lam, p, b, a, x, grid_points: int = 2049, gamma: float | None = None) -> float:
    """G_{gamma} W^{(q+lam)}(x; b), gamma = -lam by default."""
    table = _table_for(spec, q, lam, p, a, grid_points)
    g = -lam if gamma is None else gamma
    return G_operator(table, table.ctx.W, g, x, b, b)


def conv_scale_Z(spec, q, lam, p, b, a, x, grid_points: int = 2049, gamma: float | None = None) -> float:
    """G_{gamma} Z^{(q+lam)}(x; b), gamma = -lam by default."""
    table = _table_for(spec, q, lam, p, a, grid_points)
    g = -lam if gamma is None else gamma
    return G_operator(table, table.ctx.Z, g, x, b, b)


def conv_scale_W_u(spec, q, lam, p, b, a, x, u, grid_points: int = 2049) -> float:
    """Three-argument form G_{-lam} W^{(q+lam)}(x; b, u)."""
    table = _table_for(spec, q, lam, p, a, grid_points)
    return G_operator(table, table.ctx.W, -lam, x, b, u)


def conv_exit_up(spec, q, lam, p, b, a, x, grid_points: int = 2049) -> float:
    """E_x[exp(-q tau_a^+); tau_a^+ < tau_b^-] for a > b >= 0."""
    _check(q, lam, p, b, a, x)
    return conv_scale_W(spec, q, lam, p, b, a, x, grid_points) / conv_scale_W(spec, q, lam, p, b, a, a, grid_points)


def _down_numerator(spec, q, lam, p, b, a, x, grid_points, u_quadrature):
    table = _table_for(spec, q, lam, p, a, grid_points)
    ctx = table.ctx
    Z_part = G_operator(table, ctx.Z, -lam, x, b, b)
    if lam == 0.0 or b == 0.0:
        return Z_part
    top = b / p
    if u_quadrature:
        def inner(us):
            return np.array([G_operator(table, ctx.W, -lam, x, b, float(u)) for u in us])
        # term k of the series switches on at u = x p^k: a kink in u
        kinks = [x * p ** k for k in range(0, table.n_max + 2) if b < x * p ** k < top]
        extra = lam * _integrate(inner, b, top, breaks=kinks)
    else:
        # the u-integral of W(t + b - u) over [b, b/p] in closed form
        shift = top - b

        def h(t):
            t = np.asarray(t, dtype=float)
            return (ctx.Z(t) - ctx.Z(t - shift)) / ctx.q

        extra = lam * G_operator(table, h, -lam, x, b, b, kinks=(0.0, shift))
    return Z_part - extra


def conv_exit_down(spec, q, lam, p, b, a, x, grid_points: int = 2049, u_quadrature: bool = False) -> float:
    """E_x[exp(-q tau_b^-); tau_b^- < tau_a^+] for a > b >= 0.

    ``u_quadrature`` integrates the three-argument scale function over u
    numerically instead of using the closed-form u-integral.
    """
    _check(q, lam, p, b, a, x)
    F_x = _down_numerator(spec, q, lam, p, b, a, x, grid_points, u_quadrature)
    F_a = _down_numerator(spec, q, lam, p, b, a, a, grid_points, u_quadrature)
    W_x = conv_scale_W(spec, q, lam, p, b, a, x, grid_points)
    W_a = conv_scale_W(spec, q, lam, p, b, a, a, grid_points)
    return F_x - W_x / W_a * F_a
