"""Monte Carlo estimates of the exit functionals by direct path simulation.

Random numbers come from a counter-based generator: draw k of path i is a
splitmix64 hash of (seed, i, k), so results do not depend on how paths are
split between threads.  Each path writes its own weight and the reduction
runs in a fixed order, which makes estimates bitwise reproducible.

Cramer-Lundberg paths are simulated exactly between events (linear drift,
exponential claims, Poisson resets) with the discount exp(-q tau) applied
directly.  Brownian paths are advanced between reset epochs, with the
discount realised as an independent Exp(q) killing time.  Barrier crossings
inside each Gaussian step use the Brownian-bridge probability
exp(-2 d0 d1 / (sigma^2 dt)) separately for each barrier.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .errors import DomainError
from .exits import ExitQuery, Side
from .levy_model import Family, ProcessSpec

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old for numba; avoid the probe and its warning
    numba.config.THREADING_LAYER = "workqueue"

EXACT = "Exact"
BRIDGE_CORRECTED = "BridgeCorrected"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

EV_STEP, EV_JUMP, EV_RESET, EV_EXIT = 0, 1, 2, 3
EVENT_NAMES = ("step", "jump", "reset", "exit")


@njit(cache=True)
def _mix(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def path_key(seed, path):
    return _mix(_mix(np.uint64(seed) + _GOLDEN) ^ (np.uint64(path) * _GOLDEN + _GOLDEN))


@njit(cache=True)
def _uniform(key, counter):
    """Uniform on (0, 1) from draw number ``counter`` of the stream ``key``."""
    z = _mix(np.uint64(key) + np.uint64(counter + 1) * _GOLDEN)
    return (float(z >> _S11) + 0.5) * _INV53


@njit(cache=True)
def _exponential(key, counter, rate):
    if rate <= 0.0:
        return np.inf
    return -math.log(_uniform(key, counter)) / rate


@njit(cache=True)
def _normal(key, counter):
    u1 = _uniform(key, counter)
    u2 = _uniform(key, counter + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


# ---------------------------------------------------------------------------
# Brownian motion with drift


@njit(cache=True)
def _bm_path(seed, i, x, mu, sigma, q, lam, p, a, b, want_up, dmax, horizon):
    key = path_key(seed, i)
    ctr = 0
    u = x
    if u >= a:
        return 1.0 if want_up else 0.0
    if u <= b:
        return 0.0 if want_up else 1.0
    kill = min(_exponential(key, ctr, q), horizon)
    ctr += 1
    t = 0.0
    next_reset = _exponential(key, ctr, lam)
    ctr += 1
    var = sigma * sigma
    while True:
        t_end = min(next_reset, kill, t + dmax)
        dt = t_end - t
        y = u + mu * dt + sigma * math.sqrt(dt) * _normal(key, ctr)
        ctr += 2
        if y >= a:
            return 1.0 if want_up else 0.0
        if y <= b:
            return 0.0 if want_up else 1.0
        if a < np.inf:
            pu = math.exp(-2.0 * (a - u) * (a - y) / (var * dt))
            if pu > 1e-300:
                hit = _uniform(key, ctr) < pu
                ctr += 1
                if hit:
                    return 1.0 if want_up else 0.0
        if b > -np.inf:
            pd = math.exp(-2.0 * (u - b) * (y - b) / (var * dt))
            if pd > 1e-300:
                hit = _uniform(key, ctr) < pd
                ctr += 1
                if hit:
                    return 0.0 if want_up else 1.0
        u = y
        t = t_end
        if t >= kill:
            return 0.0
        if t >= next_reset:
            u = p * u
            if u >= a:
                return 1.0 if want_up else 0.0
            if u < b:
                return 0.0 if want_up else 1.0
            next_reset = t + _exponential(key, ctr, lam)
            ctr += 1


@njit(parallel=True, cache=True)
def _bm_kernel(seed, n, chunks, x, mu, sigma, q, lam, p, a, b, want_up, dmax, horizon):
    out = np.empty(n)
    size = (n + chunks - 1) // chunks
    for c in prange(chunks):
        for i in range(c * size, min(n, (c + 1) * size)):
            out[i] = _bm_path(seed, i, x, mu, sigma, q, lam, p, a, b, want_up, dmax, horizon)
    return out


# ---------------------------------------------------------------------------
# Cramer-Lundberg with exponential claims


@njit(cache=True)
def _cl_path(seed, i, x, c, eta, beta, q, lam, p, a, b, want_up, horizon):
    key = path_key(seed, i)
    ctr = 0
    u = x
    t = 0.0
    if u >= a:
        return 1.0 if want_up else 0.0
    total = eta + lam
    while True:
        s = _exponential(key, ctr, total)
        ctr += 1
        if a < np.inf and c > 0.0:
            t_hit = (a - u) / c
            if t_hit <= s:
                tau = t + t_hit
                if tau > horizon:
                    return 0.0
                return math.exp(-q * tau) if want_up else 0.0
        if t + s > horizon:
            return 0.0
        t += s
        u += c * s
        if _uniform(key, ctr) * total < eta:
            ctr += 1
            u -= _exponential(key, ctr, beta)
            ctr += 1
        else:
            ctr += 1
            u = p * u
            if u >= a:
                return math.exp(-q * t) if want_up else 0.0
        if u < b:
            return 0.0 if want_up else math.exp(-q * t)


@njit(parallel=True, cache=True)
def _cl_kernel(seed, n, chunks, x, c, eta, beta, q, lam, p, a, b, want_up, horizon):
    out = np.empty(n)
    size = (n + chunks - 1) // chunks
    for k in prange(chunks):
        for i in range(k * size, min(n, (k + 1) * size)):
            out[i] = _cl_path(seed, i, x, c, eta, beta, q, lam, p, a, b, want_up, horizon)
    return out


# ---------------------------------------------------------------------------
# public interface


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 0
    dt: float | None = None
    horizon: float | None = None
    stream_count: int = 64

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError(f"n_paths must be >= 1, got {self.n_paths}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.horizon is not None and not self.horizon > 0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")
        if self.stream_count < 1:
            raise DomainError("stream_count must be >= 1")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    bias_note: str

    def z_score(self, value: float) -> float:
        diff = value - self.mean
        if self.stderr == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.stderr


def configure_threads() -> int:
    """Apply the PSR_THREADS cap to numba's thread pool."""
    limit = numba.config.NUMBA_NUM_THREADS
    env = os.environ.get("PSR_THREADS")
    if env:
        try:
            limit = max(1, min(limit, int(env)))
        except ValueError:
            raise DomainError(f"PSR_THREADS must be an integer, got {env!r}") from None
    numba.set_num_threads(limit)
    return limit


def default_dt(query: ExitQuery) -> float:
    if query.side.two_sided:
        return 1e-3 * min(1.0, (query.a - query.b) ** 2)
    return 1e-3


def default_horizon(query: ExitQuery) -> float:
    # one-sided: the discount beyond the horizon is below 1e-6; two-sided paths
    # exit almost surely, the horizon only guards against pathological drifts
    level = 1e6 if not query.side.two_sided else 1e12
    return 1.001 * math.log(level) / query.q


def _limits(query: ExitQuery):
    a = query.a if query.side in (Side.UP_TWO_SIDED, Side.DOWN_TWO_SIDED, Side.UP_ONE_SIDED) else math.inf
    b = query.b if query.side in (Side.UP_TWO_SIDED, Side.DOWN_TWO_SIDED, Side.DOWN_ONE_SIDED) else -math.inf
    want_up = query.side in (Side.UP_TWO_SIDED, Side.UP_ONE_SIDED)
    return float(a), float(b), want_up


_MAX_AGGREGATE = 64


def bm_step_cap(query: ExitQuery, dt: float) -> float:
    """Largest Gaussian step: a whole number (<= 64) of dt steps, at most (a-b)^2/(64 sigma^2).

    With a single barrier the bridge correction is exact for any step, so
    steps only end at reset or killing epochs.
    """
    if not query.side.two_sided:
        return math.inf
    span = (query.a - query.b) ** 2 / (64.0 * query.spec.sigma ** 2)
    return dt * max(1, min(_MAX_AGGREGATE, int(span / dt)))


def simulate_exit(query: ExitQuery, cfg: SimConfig | None = None) -> MCEstimate:
    """Estimate E_x[exp(-q tau); exit on the queried side]."""
    cfg = cfg or SimConfig()
    spec = query.spec
    horizon = cfg.horizon if cfg.horizon is not None else default_horizon(query)
    if not query.side.two_sided and math.exp(-query.q * horizon) > 1e-6:
        raise DomainError(f"horizon {horizon} too short: exp(-q horizon) must be <= 1e-6")
    a, b, want_up = _limits(query)
    configure_threads()
    chunks = min(cfg.stream_count, cfg.n_paths)
    if spec.family is Family.BROWNIAN:
        dt = cfg.dt if cfg.dt is not None else default_dt(query)
        if dt > default_dt(query) * (1 + 1e-12):
            raise DomainError(f"dt={dt} exceeds 1e-3 min(1, (a-b)^2) = {default_dt(query)}")
        w = _bm_kernel(np.uint64(cfg.seed), cfg.n_paths, chunks, float(query.x), float(spec.mu),
                       float(spec.sigma), float(query.q), float(query.lam), float(query.p), a, b,
                       want_up, bm_step_cap(query, dt), float(horizon))
        note = BRIDGE_CORRECTED
    else:
        w = _cl_kernel(np.uint64(cfg.seed), cfg.n_paths, chunks, float(query.x), float(spec.c),
                       float(spec.eta), float(spec.jump_mean_inv), float(query.q), float(query.lam),
                       float(query.p), a, b, want_up, float(horizon))
        note = EXACT
    return _summarise(w, note)


def _summarise(w: np.ndarray, note: str) -> MCEstimate:
    n = len(w)
    if np.all(w == w[0]):
        return MCEstimate(float(w[0]), 0.0, n, note)
    mean = float(np.mean(w))
    std = float(np.std(w, ddof=1)) if n > 1 else 0.0
    return MCEstimate(mean, std / math.sqrt(n), n, note)


# ---------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class PathSample:
    t: np.ndarray
    u: np.ndarray
    event: np.ndarray

    def rows(self):
        for t, u, e in zip(self.t, self.u, self.event):
            yield float(t), float(u), EVENT_NAMES[int(e)]

    def __len__(self):
        return len(self.t)


def simulate_path(spec: ProcessSpec, lam: float, p: float, x: float, horizon: float,
                  cfg: SimConfig | None = None, a: float = math.inf, b: float = -math.inf) -> PathSample:
    """One path on [0, horizon], stopped at the first exit if barriers are given.

    Every reset or claim is recorded twice: a ``step`` row with the value just
    before the event and an event row with the value after it.  Brownian paths
    are also sampled every ``cfg.dt`` (default 1e-3).
    """
    cfg = cfg or SimConfig()
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if not 0 < p <= 1:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    if not horizon > 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    if not b < x < a:
        raise DomainError(f"x={x} must lie strictly between the barriers")
    key = np.uint64(path_key(np.uint64(cfg.seed), 0))
    rows = [(0.0, float(x), EV_STEP)]
    if spec.family is Family.BROWNIAN:
        _bm_trace(rows, key, spec, lam, p, x, horizon, cfg.dt or 1e-3, a, b)
    else:
        _cl_trace(rows, key, spec, lam, p, x, horizon, a, b)
    t, u, ev = zip(*rows)
    return PathSample(np.array(t), np.array(u), np.array(ev, dtype=np.int8))


def _bm_trace(rows, key, spec, lam, p, x, horizon, dt, a, b):
    ctr = 0
    t, u = 0.0, float(x)
    next_reset = _exponential(key, ctr, lam)
    ctr += 1
    while t < horizon:
        t_end = min(t + dt, next_reset, horizon)
        h = t_end - t
        u = u + spec.mu * h + spec.sigma * math.sqrt(h) * _normal(key, ctr)
        ctr += 2
        t = t_end
        if u >= a or u <= b:
            rows.append((t, u, EV_EXIT))
            return
        rows.append((t, u, EV_STEP))
        if t >= next_reset:
            u = p * u
            rows.append((t, u, EV_RESET))
            if u >= a or u < b:
                rows.append((t, u, EV_EXIT))
                return
            next_reset = t + _exponential(key, ctr, lam)
            ctr += 1


def _cl_trace(rows, key, spec, lam, p, x, horizon, a, b):
    ctr = 0
    t, u = 0.0, float(x)
    total = spec.eta + lam
    while True:
        s = _exponential(key, ctr, total)
        ctr += 1
        if a < math.inf and t + (a - u) / spec.c <= min(t + s, horizon):
            rows.append((t + (a - u) / spec.c, a, EV_EXIT))
            return
        if t + s >= horizon:
            rows.append((horizon, u + spec.c * (horizon - t), EV_STEP))
            return
        t += s
        u += spec.c * s
        rows.append((t, u, EV_STEP))
        if _uniform(key, ctr) * total < spec.eta:
            ctr += 1
            u -= _exponential(key, ctr, spec.jump_mean_inv)
            ctr += 1
            rows.append((t, u, EV_JUMP))
        else:
            ctr += 1
            u = p * u
            rows.append((t, u, EV_RESET))
        if u >= a or u < b:
            rows.append((t, u, EV_EXIT))
            return
