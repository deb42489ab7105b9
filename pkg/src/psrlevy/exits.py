"""Exit identities for the process with partial resetting.

Two evaluation routes are provided for every identity:

``resolvent``
    The packaged form: scale functions W_p, Z_p built from fixed points on the
    region-dependent interval, plus the crossing-by-reset corrections H (both
    barriers negative, upward exit) and K (both barriers nonnegative, downward
    exit).
``direct``
    A single renewal equation on the whole domain in which g(p y) takes the
    known boundary value (0 or 1) whenever p y has left the domain.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, TruncationError
from .kernels import KernelHandle
from .levy_model import ProcessSpec
from .resolvent import GridFunction, SolveConfig, SolveResult, solve_fixed_point
from .scale import ScaleContext, _one_sided_down_stable, classical_exit_down, classical_exit_up


class Side(str, enum.Enum):
    UP_TWO_SIDED = "up"
    DOWN_TWO_SIDED = "down"
    UP_ONE_SIDED = "up1"
    DOWN_ONE_SIDED = "down1"

    @property
    def two_sided(self) -> bool:
        return self in (Side.UP_TWO_SIDED, Side.DOWN_TWO_SIDED)


class Region(str, enum.Enum):
    POS_POS = "PosPos"
    POS_NEG = "PosNeg"
    NEG_NEG = "NegNeg"


def region_of(b: float, a: float) -> Region:
    """Barrier layout; zero counts as nonnegative."""
    if b >= 0:
        return Region.POS_POS
    if a <= 0:
        return Region.NEG_NEG
    return Region.POS_NEG


def resolvent_interval(b: float, a: float, p: float) -> tuple[float, float]:
    """[b v (a ^ b/p), a ^ (a/p v b)]: where p y stays inside (b, a)."""
    return max(b, min(a, b / p)), min(a, max(a / p, b))


@dataclass(frozen=True)
class ExitQuery:
    spec: ProcessSpec
    q: float
    lam: float
    p: float
    x: float
    side: Side
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not self.q > 0:
            raise DomainError(f"q must be > 0, got {self.q}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        side = self.side
        if side.two_sided:
            if self.a is None or self.b is None:
                raise DomainError("two-sided query needs both a and b")
            if not self.a > self.b:
                raise DomainError(f"need a > b, got a={self.a}, b={self.b}")
            if not self.b <= self.x <= self.a:
                raise DomainError(f"x={self.x} outside [b, a] = [{self.b}, {self.a}]")
        elif side is Side.UP_ONE_SIDED:
            if self.a is None:
                raise DomainError("upward one-sided query needs a")
            if self.x > self.a:
                raise DomainError(f"x={self.x} above a={self.a}")
        else:
            if self.b is None:
                raise DomainError("downward one-sided query needs b")
            if self.x < self.b:
                raise DomainError(f"x={self.x} below b={self.b}")

    @property
    def region(self) -> Region:
        if self.side.two_sided:
            return region_of(self.b, self.a)
        level = self.a if self.side is Side.UP_ONE_SIDED else self.b
        return Region.POS_POS if level >= 0 else Region.NEG_NEG


@dataclass
class ExitValue:
    value: float
    correction: float = 0.0
    solver_residual: float = 0.0
    region: Region = Region.POS_POS
    iterations: int = 0
    method: str = "resolvent"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        if not -1e-9 <= self.value <= 1 + 1e-9:
            raise DomainError(f"exit value {self.value} outside [0, 1]")


# ---------------------------------------------------------------------------
# two-sided, packaged route


@dataclass
class _TwoSidedSolution:
    """Fixed points behind the packaged two-sided identities.

    ``Wn`` solves with forcing W(x-b)/W(a-b) (so it is W_p / W(a-b)) and
    ``V`` with forcing V(x-b) = Z(x-b) - (k/Phi) W(x-b), k = q+lam.  By
    linearity Z_p = (k/Phi) W_p + V_p, and in the downward identity the W_p
    parts cancel exactly, leaving V_p(x) - W_p(x)/W_p(a) V_p(a), in which
    every quantity is bounded.
    """
    ctx: ScaleContext
    kernel: KernelHandle
    interval: tuple
    Wn: SolveResult | None
    V: SolveResult | None
    corr: SolveResult | None
    corr_inner_ctx: ScaleContext
    corr_interval: tuple

    def w_forcing(self, s):
        return self.ctx.W_ratio(np.asarray(s, dtype=float) - self.kernel.b, self.kernel.a - self.kernel.b)

    def v_forcing(self, s):
        return _one_sided_down_stable(self.ctx, np.asarray(s, dtype=float) - self.kernel.b)

    def eval_Wn(self, x):
        return self._eval(self.Wn, self.w_forcing, x)

    def eval_V(self, x):
        return self._eval(self.V, self.v_forcing, x)

    @staticmethod
    def _eval(res, fallback, x):
        if res is None:
            return float(fallback(x))
        return float(res.at([x])[0])


def _corr_mass(kernel: KernelHandle, lo, hi):
    def mass(s):
        if hi <= lo:
            return np.zeros_like(np.asarray(s, dtype=float))
        return kernel.mass(np.asarray(s, dtype=float), lo, hi)
    return mass


def _correction_interval(side: Side, b: float, a: float, p: float) -> tuple:
    region = region_of(b, a)
    if side is Side.UP_TWO_SIDED and region is Region.NEG_NEG:
        return (max(a / p, b), a)
    if side is Side.DOWN_TWO_SIDED and region is Region.POS_POS:
        return (b, min(a, b / p))
    return (0.0, 0.0)


@functools.lru_cache(maxsize=64)
def _two_sided_solution(spec: ProcessSpec, q: float, lam: float, p: float, b: float, a: float,
                        cfg: SolveConfig, side: Side, inner_rate: str) -> _TwoSidedSolution:
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.two_sided(ctx, a, b)
    u1, u2 = resolvent_interval(b, a, p)
    inner_ctx = ctx if inner_rate == "q+lambda" else ScaleContext(spec, q)
    inner_kernel = kernel.with_ctx(inner_ctx)
    corr_interval = _correction_interval(side, b, a, p)
    sol = _TwoSidedSolution(ctx, kernel, (u1, u2), None, None, None, inner_ctx, corr_interval)
    if lam == 0.0 or u2 <= u1:
        return sol
    nodes = cfg.nodes(b, a)
    brk = (b / p, a / p)

    def solve(h):
        return solve_fixed_point(kernel, h, lam, p, u1, u2, cfg, nodes=nodes, extra_breaks=brk)

    sol.Wn = solve(sol.w_forcing)
    if side is Side.DOWN_TWO_SIDED:
        sol.V = solve(sol.v_forcing)
    if corr_interval[1] > corr_interval[0]:
        sol.corr = solve(_corr_mass(inner_kernel, *corr_interval))
    return sol


def _correction(sol: _TwoSidedSolution, lam: float, x: float) -> float:
    """lam [m_first(x) + int Vbar(x,y) m_inner(py) dy]."""
    lo, hi = sol.corr_interval
    if lam == 0.0 or hi <= lo:
        return 0.0
    first = float(sol.kernel.mass(x, lo, hi))
    if sol.corr is None:
        return lam * first
    inner_here = float(_corr_mass(sol.kernel.with_ctx(sol.corr_inner_ctx), lo, hi)(x))
    resolvent_part = float(sol.corr.at([x])[0]) - inner_here
    return lam * (first + resolvent_part)


def _resid(*results):
    vals = [r.residual for r in results if r is not None]
    return max(vals) if vals else 0.0


def _iters(*results):
    return sum(r.iterations for r in results if r is not None)


def _scale_solve(spec, q, lam, p, b, a, x, cfg, forcing_name):
    ExitQuery(spec, q, lam, p, x, Side.UP_TWO_SIDED, a=a, b=b)
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.two_sided(ctx, a, b)
    forcing = getattr(ctx, forcing_name)
    u1, u2 = resolvent_interval(b, a, p)
    if lam == 0.0 or u2 <= u1:
        return float(forcing(x - b))
    res = solve_fixed_point(kernel, lambda s: forcing(np.asarray(s) - b), lam, p, u1, u2, cfg,
                            nodes=cfg.nodes(b, a), extra_breaks=(b / p, a / p))
    return float(res.at([x])[0])


def scale_W_p(spec, q, lam, p, b, a, x, cfg: SolveConfig | None = None) -> float:
    """Partial-resetting scale function W_p^{(q+lam)}(x; b, a)."""
    return _scale_solve(spec, q, lam, p, b, a, x, cfg or SolveConfig(), "W")


def scale_Z_p(spec, q, lam, p, b, a, x, cfg: SolveConfig | None = None) -> float:
    """Partial-resetting scale function Z_p^{(q+lam)}(x; b, a)."""
    return _scale_solve(spec, q, lam, p, b, a, x, cfg or SolveConfig(), "Z")


def exit_up_two_sided(query: ExitQuery, cfg: SolveConfig | None = None,
                      inner_rate: str = "q+lambda") -> ExitValue:
    """E_x[exp(-q tau_a^+); tau_a^+ < tau_b^-].

    ``inner_rate="q"`` evaluates the reset-crossing term with the inner kernel
    at rate q instead of q+lam (kept for comparison only).
    """
    cfg = cfg or SolveConfig()
    _require(query, Side.UP_TWO_SIDED)
    sol = _two_sided_solution(query.spec, query.q, query.lam, query.p, query.b, query.a, cfg,
                              Side.UP_TWO_SIDED, inner_rate)
    x = query.x
    ratio = sol.eval_Wn(x) / sol.eval_Wn(query.a)
    corr = _correction(sol, query.lam, x)
    return ExitValue(_clip(ratio + corr), corr, _resid(sol.Wn, sol.corr), query.region,
                     _iters(sol.Wn, sol.corr), "resolvent")


def exit_down_two_sided(query: ExitQuery, cfg: SolveConfig | None = None,
                        inner_rate: str = "q+lambda") -> ExitValue:
    """E_x[exp(-q tau_b^-); tau_b^- < tau_a^+]."""
    cfg = cfg or SolveConfig()
    _require(query, Side.DOWN_TWO_SIDED)
    sol = _two_sided_solution(query.spec, query.q, query.lam, query.p, query.b, query.a, cfg,
                              Side.DOWN_TWO_SIDED, inner_rate)
    x, a = query.x, query.a
    value = sol.eval_V(x) - sol.eval_Wn(x) / sol.eval_Wn(a) * sol.eval_V(a)
    corr = _correction(sol, query.lam, x)
    return ExitValue(_clip(value + corr), corr, _resid(sol.Wn, sol.V, sol.corr), query.region,
                     _iters(sol.Wn, sol.V, sol.corr), "resolvent")


def _require(query, side):
    if query.side is not side:
        raise DomainError(f"expected a {side.value!r} query, got {query.side.value!r}")


def _clip(v: float) -> float:
    # rounding can push exact 0 / 1 values marginally outside [0, 1]
    if -1e-9 <= v < 0.0:
        return 0.0
    if 1.0 < v <= 1.0 + 1e-9:
        return 1.0
    return v


# ---------------------------------------------------------------------------
# one-sided: truncation of the unbounded domain


def _down_tail_beyond(ctx: ScaleContext, b: float, s: float, L: float) -> float:
    """int_L^inf rlow_b(s, y) dy for s <= L."""
    big, small = ctx.roots
    a_big, a_small = ctx.coeffs
    return (a_big * math.exp(big * (s - L)) + a_small * math.exp(small * (s - b) - big * (L - b))) / big


def _up_tail_below(ctx: ScaleContext, a: float, s: float, lower: float) -> float:
    """int_{-inf}^{lower} rbar_a(s, y) dy for lower <= s; only the decaying root survives."""
    big, small = ctx.roots
    a_small = ctx.coeffs[1]
    val = a_small / (-small) * (math.exp(-big * (a - s) + small * (a - lower)) - math.exp(small * (s - lower)))
    return abs(val)


@dataclass(frozen=True)
class Truncation:
    lo: float
    hi: float
    base_span: float
    tail: float


def truncate_down(ctx: ScaleContext, lam: float, p: float, b: float, x: float, eps: float,
                  factor: float = 1.0, max_doublings: int = 60) -> Truncation:
    """Upper truncation point L for B = [b, inf).

    Chosen so that lam * (mass of rlow beyond L) at the worst row actually used,
    max(x, p L), is below eps (1 - lam/(q+lam)).
    """
    rho = lam / ctx.q
    target = eps * (1.0 - rho)
    span = max(x - b, -b, b / p - b, 0.0) + max(1.0, 5.0 / ctx.phi_q)
    for _ in range(max_doublings):
        L = b + span
        tail = lam * _down_tail_beyond(ctx, b, max(x, p * L), L)
        if lam == 0.0 or tail <= target:
            break
        span *= 2.0
    else:
        raise TruncationError(f"tail bound {eps} not met for down one-sided truncation")
    L_eff = b + span * factor
    tail = lam * _down_tail_beyond(ctx, b, max(x, p * L_eff), L_eff)
    return Truncation(b, L_eff, span, tail)


def truncate_up(ctx: ScaleContext, lam: float, p: float, a: float, x: float, eps: float,
                factor: float = 1.0, max_doublings: int = 60) -> Truncation:
    """Lower truncation point for B = (-inf, a]."""
    rho = lam / ctx.q
    target = eps * (1.0 - rho)
    decay = -ctx.roots[1]
    span = max(a - x, a, a - a / p, 0.0) + max(1.0, 5.0 / decay)
    for _ in range(max_doublings):
        lower = a - span
        tail = lam * _up_tail_below(ctx, a, min(x, p * lower), lower)
        if lam == 0.0 or tail <= target:
            break
        span *= 2.0
    else:
        raise TruncationError(f"tail bound {eps} not met for up one-sided truncation")
    lower_eff = a - span * factor
    tail = lam * _up_tail_below(ctx, a, min(x, p * lower_eff), lower_eff)
    return Truncation(lower_eff, a, span, tail)


def _one_sided_nodes(cfg: SolveConfig, trunc: Truncation, ctx: ScaleContext, barrier_at_lo: bool) -> np.ndarray:
    """Mesh graded away from the barrier: d_k = ell (r^k - 1).

    ell is the shortest decay length of the kernel and r is set so that the
    base span holds ``cfg.grid_points`` nodes.  Doubling grid_points nests the
    meshes, and widening the truncation only appends nodes.
    """
    ell = 1.0 / max(ctx.roots[0], -ctx.roots[1])
    span = trunc.hi - trunc.lo
    n = cfg.grid_points - 1
    ratio = (1.0 + trunc.base_span / ell) ** (1.0 / n)
    k_max = int(math.ceil(math.log1p(span / ell) / math.log(ratio) - 1e-9))
    d = ell * np.expm1(np.arange(k_max + 1) * math.log(ratio))
    d[-1] = span
    d = np.unique(np.minimum(d, span))
    return trunc.lo + d if barrier_at_lo else trunc.hi - d[::-1]


def _down_forcing(ctx: ScaleContext, kernel: KernelHandle, lam: float, b: float, u1: float):
    def h(s):
        s = np.asarray(s, dtype=float)
        base = _one_sided_down_stable(ctx, s - b)
        if u1 > b and lam > 0:
            base = base + lam * kernel.mass(s, b, u1)
        return base
    return h


def _up_forcing(ctx: ScaleContext, kernel: KernelHandle, lam: float, a: float, u2: float):
    def h(s):
        s = np.asarray(s, dtype=float)
        base = np.exp(-ctx.phi_q * (a - s))
        if u2 < a and lam > 0:
            base = base + lam * kernel.mass(s, u2, a)
        return base
    return h


def exit_down_one_sided(spec, q, lam, p, b, x, cfg: SolveConfig | None = None,
                        literal_lambda_factor: bool = False, truncation_factor: float = 1.0) -> ExitValue:
    """E_x[exp(-q tau_b^-); tau_b^- < inf].

    ``literal_lambda_factor`` multiplies the resolvent integral by an extra
    lam (a variant kept only so it can be compared against simulation).
    """
    cfg = cfg or SolveConfig()
    query = ExitQuery(spec, q, lam, p, x, Side.DOWN_ONE_SIDED, b=b)
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.one_sided_down(ctx, b)
    u1 = max(b, b / p)
    h = _down_forcing(ctx, kernel, lam, b, u1)
    if lam == 0.0:
        return ExitValue(_clip(float(h(x))), 0.0, 0.0, query.region, 0, "resolvent")
    trunc = truncate_down(ctx, lam, p, b, x, cfg.truncation_eps, truncation_factor)
    nodes = _one_sided_nodes(cfg, trunc, ctx, True)
    res = solve_fixed_point(kernel, h, lam, p, u1, trunc.hi, cfg, nodes=nodes, extra_breaks=(b / p,))
    g_x = float(res.at([x])[0])
    base = float(h(x))
    value = base + lam * (g_x - base) if literal_lambda_factor else g_x
    return ExitValue(_clip(value), 0.0, res.residual, query.region, res.iterations, "resolvent",
                     {"truncation": trunc.hi, "tail": trunc.tail})


def exit_up_one_sided(spec, q, lam, p, a, x, cfg: SolveConfig | None = None,
                      truncation_factor: float = 1.0) -> ExitValue:
    """E_x[exp(-q tau_a^+); tau_a^+ < inf]."""
    cfg = cfg or SolveConfig()
    query = ExitQuery(spec, q, lam, p, x, Side.UP_ONE_SIDED, a=a)
    ctx = ScaleContext(spec, q + lam)
    kernel = KernelHandle.one_sided_up(ctx, a)
    u2 = min(a, a / p)
    h = _up_forcing(ctx, kernel, lam, a, u2)
    if lam == 0.0:
        return ExitValue(_clip(float(h(x))), 0.0, 0.0, query.region, 0, "resolvent")
    trunc = truncate_up(ctx, lam, p, a, x, cfg.truncation_eps, truncation_factor)
    nodes = _one_sided_nodes(cfg, trunc, ctx, False)
    res = solve_fixed_point(kernel, h, lam, p, trunc.lo, u2, cfg, nodes=nodes, extra_breaks=(a / p,))
    return ExitValue(_clip(float(res.at([x])[0])), 0.0, res.residual, query.region, res.iterations,
                     "resolvent", {"truncation": trunc.lo, "tail": trunc.tail})


# ---------------------------------------------------------------------------
# direct renewal route


def direct_exit(query: ExitQuery, cfg: SolveConfig | None = None, truncation_factor: float = 1.0) -> ExitValue:
    """Solve the renewal equation on the full domain with indicator boundary data."""
    cfg = cfg or SolveConfig()
    spec, q, lam, p, x = query.spec, query.q, query.lam, query.p, query.x
    ctx = ScaleContext(spec, q + lam)
    side = query.side
    if side.two_sided:
        a, b = query.a, query.b
        kernel = KernelHandle.two_sided(ctx, a, b)
        if side is Side.UP_TWO_SIDED:
            h = lambda s: classical_exit_up(ctx, b, a, np.clip(s, b, a))
            outside = (0.0, 1.0)
        else:
            h = lambda s: classical_exit_down(ctx, b, a, np.clip(s, b, a))
            outside = (1.0, 0.0)
        nodes = cfg.nodes(b, a)
        u1, u2 = b, a
        brk = (b / p, a / p)
    elif side is Side.DOWN_ONE_SIDED:
        b = query.b
        kernel = KernelHandle.one_sided_down(ctx, b)
        h = lambda s: _one_sided_down_stable(ctx, np.asarray(s, dtype=float) - b)
        outside = (1.0, 0.0)
        if lam > 0:
            trunc = truncate_down(ctx, lam, p, b, x, cfg.truncation_eps, truncation_factor)
            nodes = _one_sided_nodes(cfg, trunc, ctx, True)
            u1, u2 = b, trunc.hi
        brk = (b / p,)
    else:
        a = query.a
        kernel = KernelHandle.one_sided_up(ctx, a)
        h = lambda s: np.exp(-ctx.phi_q * (a - np.asarray(s, dtype=float)))
        outside = (0.0, 1.0)
        if lam > 0:
            trunc = truncate_up(ctx, lam, p, a, x, cfg.truncation_eps, truncation_factor)
            nodes = _one_sided_nodes(cfg, trunc, ctx, False)
            u1, u2 = trunc.lo, a
        brk = (a / p,)
    if lam == 0.0:
        return ExitValue(_clip(float(h(x))), 0.0, 0.0, query.region, 0, "direct")
    res = solve_fixed_point(kernel, h, lam, p, u1, u2, cfg, nodes=nodes, outside=outside, extra_breaks=brk)
    return ExitValue(_clip(float(res.at([x])[0])), 0.0, res.residual, query.region, res.iterations, "direct")


def evaluate(query: ExitQuery, cfg: SolveConfig | None = None, method: str = "resolvent") -> ExitValue:
    """Dispatch a query to the packaged (``resolvent``) or ``direct`` route."""
    if method == "direct":
        return direct_exit(query, cfg)
    if method != "resolvent":
        raise DomainError(f"unknown method {method!r}")
    side = query.side
    if side is Side.UP_TWO_SIDED:
        return exit_up_two_sided(query, cfg)
    if side is Side.DOWN_TWO_SIDED:
        return exit_down_two_sided(query, cfg)
    if side is Side.UP_ONE_SIDED:
        return exit_up_one_sided(query.spec, query.q, query.lam, query.p, query.a, query.x, cfg)
    return exit_down_one_sided(query.spec, query.q, query.lam, query.p, query.b, query.x, cfg)
