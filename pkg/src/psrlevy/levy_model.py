"""Spectrally negative Lévy process families with closed-form scale functions.

Two families are supported:

* ``BrownianDrift``: X_t = mu t + sigma B_t
* ``CramerLundbergExp``: X_t = c t - (compound Poisson with rate eta and
  exponential jumps of mean 1/jump_mean_inv)
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Any

from .errors import DomainError


class Family(str, enum.Enum):
    BROWNIAN = "bm"
    CRAMER_LUNDBERG = "cl"


@dataclass(frozen=True)
class ProcessSpec:
    family: Family
    mu: float = 0.0
    sigma: float = 1.0
    c: float = 1.0
    eta: float = 0.0
    jump_mean_inv: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.BROWNIAN:
            if not self.sigma > 0:
                raise DomainError("BrownianDrift requires sigma > 0")
        else:
            if not self.c > 0:
                raise DomainError("CramerLundbergExp requires c > 0")
            if not self.eta >= 0:
                raise DomainError("CramerLundbergExp requires eta >= 0")
            if not self.jump_mean_inv > 0:
                raise DomainError("CramerLundbergExp requires jump_mean_inv > 0")

    @classmethod
    def brownian(cls, mu: float = 0.0, sigma: float = 1.0) -> "ProcessSpec":
        return cls(Family.BROWNIAN, mu=float(mu), sigma=float(sigma))

    @classmethod
    def cramer_lundberg(cls, c: float, eta: float, jump_mean_inv: float) -> "ProcessSpec":
        return cls(Family.CRAMER_LUNDBERG, c=float(c), eta=float(eta),
                   jump_mean_inv=float(jump_mean_inv))

    @property
    def is_brownian(self) -> bool:
        return self.family is Family.BROWNIAN

    @property
    def bounded_variation(self) -> bool:
        return self.family is Family.CRAMER_LUNDBERG

    @property
    def is_pure_drift(self) -> bool:
        """Degenerate Cramér-Lundberg spec with no jumps (simulator tests only)."""
        return self.family is Family.CRAMER_LUNDBERG and self.eta == 0.0

    # -- serialization ---------------------------------------------------

    _BM_FIELDS = ("family", "mu", "sigma")
    _CL_FIELDS = ("family", "c", "eta", "jump_rate")

    def to_dict(self) -> dict[str, Any]:
        if self.is_brownian:
            return {"family": "bm", "mu": self.mu, "sigma": self.sigma}
        return {"family": "cl", "c": self.c, "eta": self.eta, "jump_rate": self.jump_mean_inv}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProcessSpec":
        if not isinstance(data, dict):
            raise DomainError("model must be a JSON object")
        allowed = {"family", "mu", "sigma", "c", "eta", "jump_rate"}
        unknown = set(data) - allowed
        if unknown:
            raise DomainError(f"unknown model fields: {sorted(unknown)}")
        fam = data.get("family")
        try:
            if fam == "bm":
                extra = set(data) - set(cls._BM_FIELDS)
                if extra:
                    raise DomainError(f"fields {sorted(extra)} not valid for family 'bm'")
                return cls.brownian(mu=_num(data.get("mu", 0.0)), sigma=_num(data.get("sigma", 1.0)))
            if fam == "cl":
                extra = set(data) - set(cls._CL_FIELDS)
                if extra:
                    raise DomainError(f"fields {sorted(extra)} not valid for family 'cl'")
                for key in ("c", "eta", "jump_rate"):
                    if key not in data:
                        raise DomainError(f"family 'cl' requires field '{key}'")
                return cls.cramer_lundberg(c=_num(data["c"]), eta=_num(data["eta"]),
                                           jump_mean_inv=_num(data["jump_rate"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(str(exc)) from exc
        raise DomainError(f"unknown family {fam!r}; expected 'bm' or 'cl'")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProcessSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"invalid model JSON: {exc}") from exc
        return cls.from_dict(data)


def _num(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise DomainError("model parameters must be finite")
    return value


def laplace_exponent(spec: ProcessSpec, theta: float) -> float:
    """psi(theta) = log E[exp(theta X_1)] for theta >= 0."""
    if theta < 0:
        raise DomainError(f"laplace_exponent requires theta >= 0, got {theta}")
    return _psi(spec, theta)


def _psi(spec: ProcessSpec, theta: float) -> float:
    # unchecked version; also valid for theta > -jump_mean_inv (CL) and all reals (BM)
    if spec.is_brownian:
        return spec.mu * theta + 0.5 * spec.sigma ** 2 * theta ** 2
    return spec.c * theta - spec.eta * theta / (spec.jump_mean_inv + theta)


def laplace_exponent_derivative(spec: ProcessSpec, theta: float) -> float:
    if spec.is_brownian:
        return spec.mu + spec.sigma ** 2 * theta
    return spec.c - spec.eta * spec.jump_mean_inv / (spec.jump_mean_inv + theta) ** 2


def phi(spec: ProcessSpec, q: float) -> float:
    """Right inverse Phi_q = sup{theta >= 0 : psi(theta) = q}."""
    if q < 0:
        raise DomainError(f"phi requires q >= 0, got {q}")
    if spec.is_brownian:
        # larger root of sigma^2/2 t^2 + mu t - q, cancellation-free form
        s2 = spec.sigma ** 2
        disc = math.sqrt(spec.mu ** 2 + 2.0 * s2 * q)
        if spec.mu >= 0:
            return 2.0 * q / (spec.mu + disc) if q > 0 else 0.0
        return (disc - spec.mu) / s2
    return _phi_bracketed(spec, q)


def _phi_bracketed(spec: ProcessSpec, q: float) -> float:
    # psi is convex with psi(0)=0, so the largest root lies right of
    # argmin psi; search there with a doubling bracket and safeguarded Newton.
    d0 = laplace_exponent_derivative(spec, 0.0)
    if q == 0.0 and d0 >= 0.0:
        return 0.0
    lo = 0.0
    if d0 < 0.0:
        # psi'(theta) = 0 at theta* = sqrt(eta beta / c) - beta
        beta = spec.jump_mean_inv
        lo = math.sqrt(spec.eta * beta / spec.c) - beta
    hi = max(1.0, 2.0 * lo)
    while _psi(spec, hi) <= q:
        hi *= 2.0
    x = hi
    tol = 1e-12 * max(1.0, q)
    for _ in range(200):
        f = _psi(spec, x) - q
        if abs(f) <= tol * 1e-2:
            break
        if f > 0:
            hi = x
        else:
            lo = x
        d = laplace_exponent_derivative(spec, x)
        step = x - f / d if d > 0 else 0.5 * (lo + hi)
        x = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
    return x


def phi_residual(spec: ProcessSpec, q: float) -> float:
    return abs(_psi(spec, phi(spec, q)) - q)
