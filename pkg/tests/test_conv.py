import math

import numpy as np
import pytest
from scipy import integrate

from psrlevy import (ConvTable, DomainError, ExitQuery, G_operator, ScaleContext, classical_exit_down,
                     classical_exit_up, conv_exit_down, conv_exit_up, conv_level, evaluate, w_n)
from psrlevy.conv import conv_scale_W, conv_scale_Z, finite_sum_levels
from psrlevy.levy_model import _psi

from conftest import BM, CL


# --- w_n -------------------------------------------------------------------

def test_w0_is_W(spec):
    ctx = ScaleContext(spec, 0.5)
    xs = np.linspace(0, 3, 7)
    assert np.allclose(w_n(spec, 0.5, 0.5, 0, xs), ctx.W(xs), rtol=0, atol=0)


def test_w_n_vanishes_below_zero(spec):
    assert w_n(spec, 0.5, 0.5, 3, -0.2) == 0.0


def test_w_n_brownian_example():
    # 0.25 W(1) with W(1) = e - 1/e
    assert w_n(BM, 0.5, 0.5, 2, 4.0) == pytest.approx(0.25 * (math.e - 1 / math.e), rel=1e-14)
    assert w_n(BM, 0.5, 0.5, 2, 4.0) == pytest.approx(0.5876005968, abs=1e-10)


def test_w_n_rejects_negative_level():
    with pytest.raises(DomainError):
        w_n(BM, 0.5, 0.5, -1, 1.0)


# --- convolution levels ----------------------------------------------------

@pytest.fixture(scope="module")
def tables():
    return {name: ConvTable(spec, 0.5, 0.5, 30.0, n_max=6, grid_points=2049)
            for name, spec in (("bm", BM), ("cl", CL))}


def test_levels_vanish_at_zero_for_brownian(tables):
    for n in range(5):
        assert conv_level(tables["bm"], n, 0.0) == 0.0


def test_level_zero_is_W(tables, spec):
    t = tables[spec.family.value]
    assert conv_level(t, 0, 1.7) == pytest.approx(ScaleContext(spec, 0.5).W(1.7), rel=1e-14)


def test_levels_nonnegative(tables, spec):
    t = tables[spec.family.value]
    for n in range(5):
        assert np.min(t.values(n)) >= 0


def test_level_one_is_a_convolution(tables, spec):
    t = tables[spec.family.value]
    ctx = ScaleContext(spec, 0.5)
    x = 2.3
    direct = integrate.quad(lambda y: ctx.W(x - y) * 0.5 * ctx.W(0.5 * y), 0, x, epsabs=1e-13)[0]
    assert conv_level(t, 1, x) == pytest.approx(direct, rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("shift", [1.0, 2.0])
def test_level_transform(tables, spec, n, shift):
    t = tables[spec.family.value]
    theta = t.ctx.phi_q + shift
    got = integrate.simpson(np.exp(-theta * t.nodes) * t.values(n), x=t.nodes)
    expected = np.prod([1.0 / (_psi(spec, theta / 0.5 ** k) - 0.5) for k in range(n + 1)])
    assert got == pytest.approx(expected, abs=1e-6)


def test_out_of_range_rejected(tables):
    with pytest.raises(DomainError):
        conv_level(tables["bm"], 1, 31.0)
    with pytest.raises(DomainError):
        tables["bm"].values(7)


# --- G operator ------------------------------------------------------------

def test_G_zero_gamma(tables):
    t = tables["bm"]
    assert G_operator(t, t.ctx.W, 0.0, 2.0, 0.3, 0.3) == pytest.approx(t.ctx.W(1.7), rel=1e-15)


def test_G_below_u_is_h(tables, spec):
    t = tables[spec.family.value]
    assert G_operator(t, t.ctx.Z, -0.2, 0.8, 1.0, 0.5) == pytest.approx(t.ctx.Z(0.3), rel=1e-15)


def test_G_rejects_negative_u(tables):
    with pytest.raises(DomainError):
        G_operator(tables["bm"], tables["bm"].ctx.W, -0.2, 1.0, -0.1, 0.0)


def test_finite_sum_property(spec):
    x, u, p = 3.0, 0.4, 0.5
    k = finite_sum_levels(x, u, p)
    assert k == math.ceil(math.log(x / u) / math.log(1 / p))
    small = ConvTable(spec, 0.7, p, 3.0, n_max=k, grid_points=1025)
    large = ConvTable(spec, 0.7, p, 3.0, n_max=k + 6, grid_points=1025)
    a = G_operator(small, small.ctx.W, -0.2, x, u, u)
    b = G_operator(large, large.ctx.W, -0.2, x, u, u)
    assert a == b


def test_b_zero_remark(spec):
    # Z_{-lam}(x; 0) = 1 + q int_0^x W_{-lam p}(y; 0) dy
    q, lam, p, a, x = 0.5, 0.2, 0.5, 2.0, 1.3
    lhs = conv_scale_Z(spec, q, lam, p, 0.0, a, x)
    integral = integrate.quad(lambda y: conv_scale_W(spec, q, lam, p, 0.0, a, y, gamma=-lam * p),
                              0, x, epsabs=1e-13, limit=200)[0]
    assert lhs == pytest.approx(1 + q * integral, abs=1e-8)


# --- exit identities ---------------------------------------------------------

def test_conv_exit_at_upper_barrier(spec):
    assert conv_exit_up(spec, 0.5, 0.2, 0.5, 0.4, 2.0, 2.0) == pytest.approx(1.0, abs=1e-14)
    assert conv_exit_down(spec, 0.5, 0.2, 0.5, 0.4, 2.0, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_conv_without_resetting_is_classical(spec):
    ctx = ScaleContext(spec, 0.5)
    for x in (0.4, 1.0, 1.7):
        assert conv_exit_up(spec, 0.5, 0.0, 0.5, 0.4, 2.0, x) == pytest.approx(
            classical_exit_up(ctx, 0.4, 2.0, x), abs=1e-10)
        assert conv_exit_down(spec, 0.5, 0.0, 0.5, 0.4, 2.0, x) == pytest.approx(
            classical_exit_down(ctx, 0.4, 2.0, x), abs=1e-10)


def test_conv_up_brownian_example_matches_resolvent():
    conv = conv_exit_up(BM, 0.5, 0.2, 0.5, 0.4, 2.0, 1.0)
    psr = evaluate(ExitQuery(BM, 0.5, 0.2, 0.5, 1.0, "up", a=2.0, b=0.4)).value
    assert conv == pytest.approx(psr, abs=1e-6)


@pytest.mark.parametrize("x", [0.6, 1.0, 1.8])
def test_conv_down_matches_resolvent(spec, x):
    conv = conv_exit_down(spec, 0.3, 0.5, 0.5, 0.4, 2.0, x)
    psr = evaluate(ExitQuery(spec, 0.3, 0.5, 0.5, x, "down", a=2.0, b=0.4)).value
    assert conv == pytest.approx(psr, abs=1e-6)


def test_closed_form_u_integral_matches_quadrature():
    closed = conv_exit_down(CL, 0.3, 0.5, 0.5, 0.4, 2.0, 1.0, grid_points=1025)
    quad = conv_exit_down(CL, 0.3, 0.5, 0.5, 0.4, 2.0, 1.0, grid_points=1025, u_quadrature=True)
    assert closed == pytest.approx(quad, abs=1e-8)


def test_conv_domain_checks():
    with pytest.raises(DomainError):
        conv_exit_up(BM, 0.5, 0.2, 0.5, -0.1, 2.0, 1.0)
    with pytest.raises(DomainError):
        conv_exit_down(BM, 0.5, 0.2, 0.5, 0.4, 2.0, 2.5)
