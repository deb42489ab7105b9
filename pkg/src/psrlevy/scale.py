"""Closed-form scale functions W^(q), Z^(q) and Z^(q)(x, theta).

For both supported families 1/psi_q is a rational function with two simple
poles, so for x >= 0

    W^(q)(x) = sum_j A_j exp(alpha_j x),    A_j = 1 / psi'(alpha_j),

with alpha_0 = Phi_q > 0 and alpha_1 < 0.  Every integral of W that the
library needs is therefore an explicit sum of exponentials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .levy_model import ProcessSpec, _psi, laplace_exponent_derivative, phi


@dataclass(frozen=True)
class ScaleContext:
    """Scale functions of ``spec`` at killing rate ``q`` (> 0)."""

    spec: ProcessSpec
    q: float
    phi_q: float = field(init=False)
    roots: tuple = field(init=False)
    coeffs: tuple = field(init=False)
    w0: float = field(init=False)

    def __post_init__(self):
        q = float(self.q)
        if not q > 0:
            raise DomainError(f"ScaleContext requires q > 0, got {q}")
        object.__setattr__(self, "q", q)
        spec = self.spec
        big = phi(spec, q)
        if spec.is_brownian:
            s2 = spec.sigma ** 2
            small = -(big + 2.0 * spec.mu / s2)
            amp = 1.0 / (s2 * big + spec.mu)
            coeffs = (amp, -amp)
            w0 = 0.0
        else:
            beta = spec.jump_mean_inv
            # roots of c t^2 + (c beta - eta - q) t - q beta; product = -q beta / c
            small = -q * beta / (spec.c * big)
            gap = big - small
            coeffs = ((beta + big) / (spec.c * gap), -(beta + small) / (spec.c * gap))
            w0 = 1.0 / spec.c
        object.__setattr__(self, "phi_q", big)
        object.__setattr__(self, "roots", (big, small))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "w0", w0)

    # ------------------------------------------------------------------
    def psi_q(self, theta):
        return _psi(self.spec, theta) - self.q

    def W(self, x):
        """W^(q)(x); zero for x < 0, right-continuous at 0."""
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        out = np.full_like(xp, self.w0)
        for amp, alpha in zip(self.coeffs, self.roots):
            out = out + amp * np.expm1(alpha * xp)
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else float(out)

    def W_ratio(self, x, t: float):
        """W(x) / W(t) for t > 0, without overflow when Phi t is large."""
        if not t > 0:
            raise DomainError(f"W_ratio needs t > 0, got {t}")
        big, small = self.roots
        if big * t < 500.0:
            out = np.asarray(self.W(x), dtype=float) / self.W(t)
            return out if out.ndim else float(out)
        a_big, a_small = self.coeffs
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        num = a_big * np.exp(big * (xp - t)) + a_small * np.exp(small * xp - big * t)
        den = a_big + a_small * math.exp((small - big) * t)
        out = np.where(x < 0, 0.0, num / den)
        return out if out.ndim else float(out)

    def IW(self, x):
        """Integral of W^(q) over [0, x]; zero for x <= 0."""
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        out = np.zeros_like(xp)
        for amp, alpha in zip(self.coeffs, self.roots):
            out = out + amp * np.expm1(alpha * xp) / alpha
        return out if out.ndim else float(out)

    def Z(self, x):
        """Z^(q)(x) = 1 + q int_0^x W^(q); equal to 1 for x <= 0."""
        return 1.0 + self.q * self.IW(x)

    def Z_biv(self, x, theta):
        """Bivariate Z^(q)(x, theta) for theta >= 0."""
        if theta < 0:
            raise DomainError(f"Z_biv requires theta >= 0, got {theta}")
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        integral = np.zeros_like(xp)
        for amp, alpha in zip(self.coeffs, self.roots):
            integral = integral + amp * _int_exp(alpha - theta, xp)
        out = np.exp(theta * x) * (1.0 - self.psi_q(theta) * integral)
        return out if out.ndim else float(out)

    def W_derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for amp, alpha in zip(self.coeffs, self.roots):
            out = out + amp * alpha * np.exp(alpha * np.maximum(x, 0.0))
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else float(out)

    def psi_prime_at_phi(self) -> float:
        return laplace_exponent_derivative(self.spec, self.phi_q)

    # classical two-sided exit identities, shifted to the interval [b, a]
    def exit_up(self, b: float, a: float, x):
        return classical_exit_up(self, b, a, x)

    def exit_down(self, b: float, a: float, x):
        return classical_exit_down(self, b, a, x)


def _int_exp(d, x):
    """int_0^x exp(d y) dy, stable for d x near 0."""
    dx = d * x
    if abs(d) < 1e-300:
        return x
    small = np.abs(dx) < 1e-8
    safe = np.where(small, 1.0, dx)
    return np.where(small, x * (1.0 + 0.5 * dx), np.expm1(safe) / d)


def _check_two_sided(b, a, x):
    if not a > b:
        raise DomainError(f"two-sided exit requires a > b, got a={a}, b={b}")
    xa = np.asarray(x, dtype=float)
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    if np.any(xa < b - tol) or np.any(xa > a + tol):
        raise DomainError(f"start point outside [b, a] = [{b}, {a}]")
    return np.clip(xa, b, a)


def classical_exit_up(ctx: ScaleContext, b: float, a: float, x):
    """E_x[exp(-q tau_a^+); tau_a^+ < tau_b^-] for the unperturbed process."""
    xa = _check_two_sided(b, a, x)
    out = ctx.W_ratio(xa - b, a - b)
    return out if np.ndim(out) else float(out)


def classical_exit_down(ctx: ScaleContext, b: float, a: float, x):
    """E_x[exp(-q tau_b^-); tau_b^- < tau_a^+] for the unperturbed process."""
    xa = _check_two_sided(b, a, x)
    # Z - (q/Phi) W is bounded and the W parts cancel between the two terms
    out = (_one_sided_down_stable(ctx, xa - b)
           - ctx.W_ratio(xa - b, a - b) * _one_sided_down_stable(ctx, a - b))
    return out if np.ndim(out) else float(out)


def one_sided_up_classical(ctx: ScaleContext, a: float, x):
    """E_x[exp(-q tau_a^+)] = exp(-Phi_q (a - x)) for x <= a."""
    return np.exp(-ctx.phi_q * (a - np.asarray(x, dtype=float)))


def one_sided_down_classical(ctx: ScaleContext, b: float, x):
    """E_x[exp(-q tau_b^-)] = Z(x-b) - (q/Phi_q) W(x-b) for x >= b."""
    s = np.asarray(x, dtype=float) - b
    return _one_sided_down_stable(ctx, s)


def _one_sided_down_stable(ctx: ScaleContext, s):
    # Z(s) - (q/Phi) W(s); the exp(Phi s) parts cancel exactly, so drop them
    s = np.maximum(np.asarray(s, dtype=float), 0.0)
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    q = ctx.q
    # Z(s) = 1 + q sum A_j (e^{alpha_j s} - 1)/alpha_j ; W(s) = sum A_j e^{alpha_j s}
    out = 1.0 - q * a_big / big - q * a_small / small
    out = out + a_small * np.exp(small * s) * (q / small - q / big)
    return out if np.ndim(out) else float(out)
