"""Total resetting: every reset sends the process to 0 (the p -> 0 limit).

With resets at rate lam to the single point 0, a first-step decomposition
at the reset epochs closes the renewal equation with one unknown constant,
the value at 0.  The resulting closed forms use the kernel r at rate q+lam:

* J(x) = lam * mass of r(x, .) over the domain (reset lands beyond a barrier);
* R(x) = lam m(x) / (1 - lam m(0)) when 0 lies strictly inside the domain.

Exit is strict below b and weak above a, so a reset to 0 counts as an upward
exit when a <= 0 and as a downward exit only when b > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .exits import ExitValue, Region, region_of, _clip
from .kernels import KernelHandle
from .levy_model import ProcessSpec
from .scale import ScaleContext, _one_sided_down_stable


@dataclass(frozen=True)
class TotalResetContext:
    spec: ProcessSpec
    q: float
    lam: float
    b: float
    a: float

    def __post_init__(self):
        if not self.q > 0:
            raise DomainError(f"q must be > 0, got {self.q}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if not self.a > self.b:
            raise DomainError(f"need a > b, got a={self.a}, b={self.b}")

    @property
    def scale(self) -> ScaleContext:
        return ScaleContext(self.spec, self.q + self.lam)

    @property
    def kernel(self) -> KernelHandle:
        return KernelHandle.two_sided(self.scale, self.a, self.b)

    @property
    def region(self) -> Region:
        return region_of(self.b, self.a)

    def check(self, x: float) -> float:
        if not self.b <= x <= self.a:
            raise DomainError(f"x={x} outside [b, a] = [{self.b}, {self.a}]")
        return float(x)

    def J(self, x: float) -> float:
        """lam * int_b^a r(x, y) dy."""
        return self.lam * float(self.kernel.total_mass(self.check(x)))

    def mass_at_zero(self) -> float:
        """lam * int_b^a r(0, y) dy, zero unless a reset to 0 keeps the path alive (b <= 0 < a)."""
        if not self.b <= 0.0 < self.a:
            return 0.0
        return self.lam * float(self.kernel.total_mass(0.0))


def ratio_R(ctx: TotalResetContext, x: float) -> float:
    """lam m(x) / (1 - lam m(0)); the denominator is at least q/(q+lam)."""
    return ctx.J(x) / (1.0 - ctx.mass_at_zero())


def _classical_up(ctx: TotalResetContext, x):
    s = ctx.scale
    return float(s.W(x - ctx.b) / s.W(ctx.a - ctx.b))


def _classical_down(ctx: TotalResetContext, x):
    s = ctx.scale
    return float(s.Z(x - ctx.b) - s.W(x - ctx.b) / s.W(ctx.a - ctx.b) * s.Z(ctx.a - ctx.b))


def total_exit_up(ctx: TotalResetContext, x: float) -> ExitValue:
    """E_x[exp(-q tau_a^+); tau_a^+ < tau_b^-] under total resetting."""
    x = ctx.check(x)
    base = _classical_up(ctx, x)
    if ctx.a <= 0:
        corr = ctx.J(x)
    elif ctx.b <= 0:
        corr = ratio_R(ctx, x) * _classical_up(ctx, 0.0)
    else:
        corr = 0.0  # a reset to 0 < b ends the path below
    return ExitValue(_clip(base + corr), corr, 0.0, ctx.region, 0, "total")


def total_exit_down(ctx: TotalResetContext, x: float) -> ExitValue:
    """E_x[exp(-q tau_b^-); tau_b^- < tau_a^+] under total resetting."""
    x = ctx.check(x)
    base = _classical_down(ctx, x)
    if ctx.b > 0:
        corr = ctx.J(x)
    elif ctx.a > 0:
        corr = ratio_R(ctx, x) * _classical_down(ctx, 0.0)
    else:
        corr = 0.0  # a reset to 0 >= a ends the path above
    return ExitValue(_clip(base + corr), corr, 0.0, ctx.region, 0, "total")


def _check_rates(q, lam):
    if not q > 0:
        raise DomainError(f"q must be > 0, got {q}")
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")


def total_exit_one_sided_up(spec: ProcessSpec, q: float, lam: float, a: float, x: float) -> ExitValue:
    """E_x[exp(-q tau_a^+); tau_a^+ < inf] under total resetting."""
    _check_rates(q, lam)
    if x > a:
        raise DomainError(f"x={x} above a={a}")
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.one_sided_up(ctx, a)
    base = math.exp(-ctx.phi_q * (a - x))
    m_x = lam * float(kernel.mass(x, -math.inf, a))
    if a <= 0:
        corr = m_x
    else:
        m_0 = lam * float(kernel.mass(0.0, -math.inf, a))
        corr = m_x * math.exp(-ctx.phi_q * a) / (1.0 - m_0)
    region = Region.POS_POS if a >= 0 else Region.NEG_NEG
    return ExitValue(_clip(base + corr), corr, 0.0, region, 0, "total")


def total_exit_one_sided_down(spec: ProcessSpec, q: float, lam: float, b: float, x: float) -> ExitValue:
    """E_x[exp(-q tau_b^-); tau_b^- < inf] under total resetting."""
    _check_rates(q, lam)
    if x < b:
        raise DomainError(f"x={x} below b={b}")
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.one_sided_down(ctx, b)
    base = float(_one_sided_down_stable(ctx, x - b))
    m_x = lam * float(kernel.mass(x, b, math.inf))
    if b > 0:
        corr = m_x
    else:
        m_0 = lam * float(kernel.mass(0.0, b, math.inf))
        corr = m_x * float(_one_sided_down_stable(ctx, -b)) / (1.0 - m_0)
    region = Region.POS_POS if b >= 0 else Region.NEG_NEG
    return ExitValue(_clip(base + corr), corr, 0.0, region, 0, "total")
