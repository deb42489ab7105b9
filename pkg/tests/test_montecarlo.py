import math

import numpy as np
import pytest

from psrlevy import DomainError, ExitQuery, ProcessSpec, ScaleContext, classical_exit_down, classical_exit_up
from psrlevy.montecarlo import (BRIDGE_CORRECTED, EXACT, MCEstimate, SimConfig, _uniform, bm_step_cap,
                                configure_threads, default_dt, default_horizon, path_key, simulate_exit,
                                simulate_path)

from conftest import BM, CL

Z_CRIT = 3.29
DRIFT = ProcessSpec.cramer_lundberg(c=1.0, eta=0.0, jump_mean_inv=1.0)


# --- deterministic and trivial cases ---------------------------------------

def test_pure_drift_is_deterministic():
    est = simulate_exit(ExitQuery(DRIFT, 0.5, 0.0, 0.5, 0.0, "up", a=1.0, b=-10.0), SimConfig(n_paths=1000))
    assert est.stderr == 0.0
    assert est.mean == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert est.bias_note == EXACT


@pytest.mark.parametrize("spec", [BM, CL])
def test_start_on_upper_barrier(spec):
    est = simulate_exit(ExitQuery(spec, 0.5, 0.2, 0.5, 2.0, "up", a=2.0, b=0.0), SimConfig(n_paths=1000))
    assert est.mean == 1.0 and est.stderr == 0.0


def test_brownian_classical_up():
    query = ExitQuery(BM, 0.5, 0.0, 0.5, 1.0, "up", a=2.0, b=0.0)
    est = simulate_exit(query, SimConfig(n_paths=1_000_000, seed=5))
    assert est.bias_note == BRIDGE_CORRECTED
    assert abs(est.z_score(0.324028)) <= Z_CRIT
    assert abs(est.z_score(classical_exit_up(ScaleContext(BM, 0.5), 0.0, 2.0, 1.0))) <= Z_CRIT


@pytest.mark.parametrize("q,x", [(0.2, 0.3), (0.2, 1.5), (0.5, 0.8), (0.5, 2.2), (1.0, 0.5), (1.0, 1.9)])
def test_cramer_lundberg_exact_without_resetting(q, x):
    ctx = ScaleContext(CL, q)
    for side, ref in (("up", classical_exit_up), ("down", classical_exit_down)):
        est = simulate_exit(ExitQuery(CL, q, 0.0, 0.5, x, side, a=2.5, b=0.0), SimConfig(n_paths=100_000, seed=2))
        assert abs(est.z_score(ref(ctx, 0.0, 2.5, x))) <= Z_CRIT


# --- configuration ---------------------------------------------------------

def test_one_sided_horizon_enforced():
    query = ExitQuery(BM, 0.5, 0.2, 0.5, 0.0, "up1", a=1.0)
    with pytest.raises(DomainError):
        simulate_exit(query, SimConfig(n_paths=10, horizon=10.0))
    assert math.exp(-0.5 * default_horizon(query)) <= 1e-6


def test_coarse_dt_rejected():
    query = ExitQuery(BM, 0.5, 0.2, 0.5, 0.5, "up", a=1.0, b=0.0)
    with pytest.raises(DomainError):
        simulate_exit(query, SimConfig(n_paths=10, dt=2e-3))
    assert default_dt(query) == pytest.approx(1e-3)
    assert default_dt(ExitQuery(BM, 0.5, 0.2, 0.5, 0.1, "up", a=0.2, b=0.0)) == pytest.approx(4e-5)


def test_step_cap():
    two = ExitQuery(BM, 0.5, 0.2, 0.5, 1.0, "up", a=4.0, b=0.0)
    assert bm_step_cap(two, 1e-3) == pytest.approx(0.064)
    assert bm_step_cap(two, 5e-4) == pytest.approx(0.032)
    narrow = ExitQuery(BM, 0.5, 0.2, 0.5, 0.5, "up", a=1.0, b=0.0)
    assert bm_step_cap(narrow, 1e-3) == pytest.approx(0.015)
    assert math.isinf(bm_step_cap(ExitQuery(BM, 0.5, 0.2, 0.5, 0.0, "up1", a=1.0), 1e-3))


@pytest.mark.parametrize("kwargs", [dict(n_paths=0), dict(seed=-1), dict(dt=0.0), dict(horizon=-1.0),
                                    dict(stream_count=0)])
def test_bad_sim_config(kwargs):
    with pytest.raises(DomainError):
        SimConfig(**kwargs)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PSR_THREADS", "1")
    assert configure_threads() == 1
    monkeypatch.setenv("PSR_THREADS", "many")
    with pytest.raises(DomainError):
        configure_threads()


def test_z_score_conventions():
    assert MCEstimate(0.5, 0.0, 10, EXACT).z_score(0.5) == 0.0
    assert MCEstimate(0.5, 0.0, 10, EXACT).z_score(0.6) == math.inf
    assert MCEstimate(0.5, 0.1, 10, EXACT).z_score(0.6) == pytest.approx(1.0)


# --- random numbers and determinism ----------------------------------------

def test_uniforms_are_uniform():
    key = np.uint64(path_key(np.uint64(3), 17))
    u = np.array([_uniform(key, i) for i in range(20000)])
    assert np.all((u > 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(u.var() - 1 / 12) < 0.003


@pytest.mark.parametrize("spec", [BM, CL])
def test_bitwise_determinism(spec, monkeypatch):
    query = ExitQuery(spec, 0.5, 0.3, 0.5, 0.4, "down", a=1.5, b=-0.5)
    first = simulate_exit(query, SimConfig(n_paths=20000, seed=9, stream_count=64))
    monkeypatch.setenv("PSR_THREADS", "1")
    again = simulate_exit(query, SimConfig(n_paths=20000, seed=9, stream_count=64))
    regrouped = simulate_exit(query, SimConfig(n_paths=20000, seed=9, stream_count=7))
    assert first == again == regrouped
    other = simulate_exit(query, SimConfig(n_paths=20000, seed=10))
    assert other.mean != first.mean


# --- discretisation --------------------------------------------------------

@pytest.mark.parametrize("query", [
    ExitQuery(BM, 0.5, 0.2, 0.5, 1.0, "up", a=2.0, b=0.0),
    ExitQuery(BM, 0.3, 0.5, 0.3, 1.0, "down", a=2.0, b=0.4),
    ExitQuery(BM, 0.3, 0.5, 0.3, -1.0, "up", a=-0.3, b=-2.0),
])
def test_dt_halving(query):
    # same seed for both step sizes, so the difference isolates the discretisation
    dt = default_dt(query)
    coarse = simulate_exit(query, SimConfig(n_paths=200_000, seed=1, dt=dt))
    fine = simulate_exit(query, SimConfig(n_paths=200_000, seed=1, dt=dt / 2))
    assert abs(coarse.mean - fine.mean) <= Z_CRIT * math.hypot(coarse.stderr, fine.stderr)


# --- sample paths ----------------------------------------------------------

def test_path_without_resetting_has_no_resets():
    for spec in (BM, CL):
        path = simulate_path(spec, 0.0, 0.6, 1.0, 5.0, SimConfig(seed=4))
        assert all(e != "reset" for _, _, e in path.rows())


@pytest.mark.parametrize("spec", [BM, CL])
@pytest.mark.parametrize("p", [0.6, 0.999])
def test_resets_contract_toward_zero(spec, p):
    path = simulate_path(spec, 2.0, p, 3.0, 20.0, SimConfig(seed=8))
    rows = list(path.rows())
    resets = [i for i, r in enumerate(rows) if r[2] == "reset"]
    assert resets
    for i in resets:
        before, after = rows[i - 1][1], rows[i][1]
        assert rows[i - 1][0] == rows[i][0]
        assert abs(after) == pytest.approx(p * abs(before), rel=1e-15)
        assert abs(after - before) == pytest.approx((1 - p) * abs(before), rel=1e-12)


def test_cramer_lundberg_path_rises_with_premium_slope():
    path = simulate_path(CL, 1.0, 0.6, 1.0, 20.0, SimConfig(seed=6))
    rows = list(path.rows())
    for (t0, u0, e0), (t1, u1, e1) in zip(rows, rows[1:]):
        if t1 > t0:
            assert e1 in ("step", "exit")
            assert (u1 - u0) / (t1 - t0) == pytest.approx(CL.c, rel=1e-9)
    assert any(e == "jump" for _, _, e in rows)


def test_path_stops_at_exit():
    path = simulate_path(BM, 0.5, 0.5, 0.5, 100.0, SimConfig(seed=1), a=1.0, b=0.0)
    rows = list(path.rows())
    assert rows[-1][2] == "exit"
    assert sum(e == "exit" for _, _, e in rows) == 1


def test_path_argument_checks():
    with pytest.raises(DomainError):
        simulate_path(BM, -1.0, 0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        simulate_path(BM, 1.0, 0.5, 2.0, 1.0, a=1.0)
