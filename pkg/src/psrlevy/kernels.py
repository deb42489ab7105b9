"""Potential densities of the process killed on leaving an interval.

=========  =====================================================  ==========
kind       r(x, y)                                                domain
=========  =====================================================  ==========
TwoSided   W(x-b) W(a-y) / W(a-b) - W(x-y)                         [b, a]
OneSidedUp exp(-Phi (a-x)) W(a-y) - W(x-y)                         (-inf, a]
OneSidedDn exp(-Phi (y-b)) W(x-b) - W(x-y)                         [b, inf)
=========  =====================================================  ==========

All W values are at the kernel's own rate ``ctx.q``.  Masses are computed
from closed-form antiderivatives; the exp(Phi .) growth that cancels between
the two terms of the one-sided kernels is removed analytically.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scale import ScaleContext


class KernelKind(str, enum.Enum):
    TWO_SIDED = "two_sided"
    ONE_SIDED_UP = "one_sided_up"
    ONE_SIDED_DOWN = "one_sided_down"


@dataclass(frozen=True)
class KernelHandle:
    kind: KernelKind
    ctx: ScaleContext
    a: float = math.inf
    b: float = -math.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.TWO_SIDED:
            if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a > self.b):
                raise DomainError("two-sided kernel requires finite a > b")
        elif self.kind is KernelKind.ONE_SIDED_UP:
            if not math.isfinite(self.a):
                raise DomainError("one-sided-up kernel requires finite a")
            object.__setattr__(self, "b", -math.inf)
        else:
            if not math.isfinite(self.b):
                raise DomainError("one-sided-down kernel requires finite b")
            object.__setattr__(self, "a", math.inf)

    @classmethod
    def two_sided(cls, ctx, a, b):
        return cls(KernelKind.TWO_SIDED, ctx, float(a), float(b))

    @classmethod
    def one_sided_up(cls, ctx, a):
        return cls(KernelKind.ONE_SIDED_UP, ctx, a=float(a))

    @classmethod
    def one_sided_down(cls, ctx, b):
        return cls(KernelKind.ONE_SIDED_DOWN, ctx, b=float(b))

    @property
    def q(self) -> float:
        return self.ctx.q

    @property
    def lo(self) -> float:
        return self.b

    @property
    def hi(self) -> float:
        return self.a

    def with_ctx(self, ctx: ScaleContext) -> "KernelHandle":
        return KernelHandle(self.kind, ctx, self.a, self.b)

    def check_domain(self, *values, what="argument"):
        scale = max(1.0, abs(self.a) if math.isfinite(self.a) else 0.0,
                    abs(self.b) if math.isfinite(self.b) else 0.0)
        tol = 1e-12 * scale
        for v in values:
            arr = np.asarray(v, dtype=float)
            if np.any(arr < self.b - tol) or np.any(arr > self.a + tol):
                raise DomainError(f"{what} outside kernel domain [{self.b}, {self.a}]")

    # ------------------------------------------------------------------
    def eval(self, x, y):
        self.check_domain(x, y)
        return self._eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def _eval(self, x, y):
        with np.errstate(over="ignore", invalid="ignore"):
            return self._eval_raw(x, y)

    def _eval_raw(self, x, y):
        ctx = self.ctx
        if self.kind is KernelKind.TWO_SIDED:
            return _two_sided_kernel(ctx, self.a, self.b, x, y)
        if self.kind is KernelKind.ONE_SIDED_UP:
            return _up_kernel(ctx, self.a, x, y)
        return _down_kernel(ctx, self.b, x, y)

    def mass(self, x, u1, u2):
        """int_{u1}^{u2} r(x, y) dy; u1 may be -inf (up) or u2 +inf (down)."""
        if u1 > u2:
            raise DomainError(f"inverted interval [{u1}, {u2}]")
        self.check_domain(x, what="x")
        self.check_domain(*(u for u in (u1, u2) if math.isfinite(u)), what="interval")
        if self.kind is not KernelKind.ONE_SIDED_UP and not math.isfinite(u1):
            raise DomainError("lower limit must be finite for this kernel")
        if self.kind is not KernelKind.ONE_SIDED_DOWN and not math.isfinite(u2):
            raise DomainError("upper limit must be finite for this kernel")
        x = np.asarray(x, dtype=float)
        if u1 == u2:
            return np.zeros_like(x) if x.ndim else 0.0
        if self.kind is KernelKind.TWO_SIDED:
            out = _two_sided_mass(self.ctx, self.a, self.b, x, u1, u2)
            return out if out.ndim else float(out)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.asarray(self._tail(x, u1) - self._tail(x, u2), dtype=float)
        return out if out.ndim else float(out)

    def _tail(self, x, u):
        """Antiderivative G(x, u) with mass(u1, u2) = G(u1) - G(u2)."""
        ctx = self.ctx
        if self.kind is KernelKind.TWO_SIDED:
            return _two_sided_mass(ctx, self.a, self.b, x, u, self.a)
        if self.kind is KernelKind.ONE_SIDED_UP:
            return _up_tail(ctx, self.a, x, u)
        return _down_tail(ctx, self.b, x, u)

    def total_mass(self, x):
        """Mass of r(x, .) over the whole kernel domain."""
        return self.mass(x, self.b, self.a)


def _two_sided_terms(ctx, a, b, x, below: bool):
    """Terms (coef, slope, intercept) with r(x, y) = sum coef exp(intercept + slope y).

    Numerator and denominator of W(x-b) W(a-y) / W(a-b) are divided by
    exp(Phi (a-b)); on the branch y <= x the leading part of W(x-y) is
    cancelled analytically.  Every exponent is then <= 0 on the domain.
    """
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    span = a - b
    den = a_big + a_small * math.exp((small - big) * span)
    terms = [
        (a_big * a_small / den, -small, big * (x - a) + small * a),
        (a_small * a_big / den, -big, small * (x - b) + big * b),
        (a_small * a_small / den, -small, small * (x - b) + small * a - big * span),
    ]
    if below:
        terms.append((-a_big * a_small / den, -big, big * x + (small - big) * span))
        terms.append((-a_small, -small, small * x))
    else:
        terms.append((a_big * a_big / den, -big, big * x))
    return terms


def _two_sided_kernel(ctx, a, b, x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.zeros(x.shape)
    for below in (True, False):
        part = np.zeros(x.shape)
        for coef, slope, icpt in _two_sided_terms(ctx, a, b, x, below):
            part = part + coef * np.exp(np.minimum(icpt + slope * y, 700.0))
        # W is right-continuous at 0, so y = x belongs to the y <= x branch
        out = np.where((y <= x) == below, part, out)
    return out if out.ndim else float(out)


def _int_term(coef, slope, icpt, lo, hi):
    """int_lo^hi coef exp(icpt + slope y) dy for lo <= hi, slope != 0."""
    width = np.maximum(hi - lo, 0.0)
    if slope > 0:
        return coef * np.exp(icpt + slope * hi) * -np.expm1(-slope * width) / slope
    return coef * np.exp(icpt + slope * lo) * -np.expm1(slope * width) / -slope


def _two_sided_mass(ctx, a, b, x, u1, u2):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    mid = np.clip(x, u1, u2)
    for coef, slope, icpt in _two_sided_terms(ctx, a, b, x, True):
        out = out + _int_term(coef, slope, icpt, u1, mid)
    for coef, slope, icpt in _two_sided_terms(ctx, a, b, x, False):
        out = out + _int_term(coef, slope, icpt, mid, u2)
    return out


def _up_kernel(ctx, a, x, y):
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    x, y = np.broadcast_arrays(x, y)
    below = y <= x  # W is right-continuous: W(0) belongs to this branch
    # for y < x the exp(Phi .) parts of both terms are identical
    rest = (a_small * np.exp(-big * (a - x) + small * np.maximum(a - y, 0.0))
            - a_small * np.exp(small * np.maximum(x - y, 0.0)))
    # y >= x: exp(-Phi (a-x)) W(a-y) with the exponents combined
    general = (a_big * np.exp(np.minimum(big * (x - y), 0.0))
               + a_small * np.exp(-big * (a - x) + small * np.maximum(a - y, 0.0)))
    general = np.where(y > a, 0.0, general)
    out = np.where(below, rest, general)
    return out if out.ndim else float(out)



def _down_kernel(ctx, b, x, y):
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    x, y = np.broadcast_arrays(x, y)
    below = y <= x  # W is right-continuous: W(0) belongs to this branch
    # W(x-b) e^{-Phi(y-b)} - W(x-y): exp(Phi .) parts cancel when y < x
    rest = (a_small * np.exp(small * np.maximum(x - b, 0.0) - big * (y - b))
            - a_small * np.exp(small * np.maximum(x - y, 0.0)))
    # y >= x: exp(-Phi (y-b)) W(x-b) with the exponents combined
    general = (a_big * np.exp(np.minimum(big * (x - y), 0.0))
               + a_small * np.exp(small * np.maximum(x - b, 0.0) - big * (y - b)))
    general = np.where(x < b, 0.0, general)
    out = np.where(below, rest, general)
    return out if out.ndim else float(out)


def _up_tail(ctx, a, x, u):
    """int_u^a rbar_a(x, y) dy (u may be -inf)."""
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    x = np.asarray(x, dtype=float)
    decay = np.exp(-big * (a - x))
    if not math.isfinite(u):
        return (1.0 - decay) / ctx.q
    # u >= x: e^{-Phi(a-x)} IW(a-u), IW(s) = sum A_j expm1(alpha_j s)/alpha_j
    general = (a_big / big * (np.exp(np.minimum(big * (x - u), 0.0)) - decay)
               + a_small / small * (decay * np.expm1(small * (a - u))))
    s = x - u
    cancelled = (a_big / big * (1.0 - decay)
                 + a_small / small * (decay * np.expm1(small * (a - u)) - np.expm1(small * np.maximum(s, 0.0))))
    return np.where(s > 0, cancelled, general)


def _down_tail(ctx, b, x, u):
    """int_u^inf rlow_b(x, y) dy (u may be +inf)."""
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    x = np.asarray(x, dtype=float)
    if not math.isfinite(u):
        return np.zeros_like(x)
    # u >= x: W(x-b) e^{-Phi(u-b)} / Phi with the exponents combined
    general = (a_big * np.exp(np.minimum(big * (x - u), 0.0))
               + a_small * np.exp(small * np.maximum(x - b, 0.0) - big * (u - b))) / big
    s = np.maximum(x - u, 0.0)
    cancelled = (a_big / big
                 + a_small * np.exp(small * np.maximum(x - b, 0.0) - big * (u - b)) / big
                 - a_small * np.expm1(small * s) / small)
    return np.where(x - u > 0, cancelled, general)
