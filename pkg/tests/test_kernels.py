import math

import numpy as np
import pytest
from scipy import integrate

from psrlevy import DomainError, KernelHandle, ScaleContext

from conftest import BM, CL

LAYOUTS = [(2.0, 0.0), (3.0, 0.5), (-0.5, -3.0), (1.0, -1.0)]  # (a, b): boundary, positive, negative, mixed


def contexts():
    return [ScaleContext(BM, 0.6), ScaleContext(CL, 0.5), ScaleContext(BM.brownian(0.8, 0.7), 1.3)]


def two_sided_reference(ctx, a, b, x, y):
    return ctx.W(x - b) / ctx.W(a - b) * ctx.W(a - y) - ctx.W(x - y)


# --- eval ------------------------------------------------------------------

@pytest.mark.parametrize("ctx", contexts())
def test_two_sided_vanishes_at_upper_barrier(ctx):
    k = KernelHandle.two_sided(ctx, 2.0, -1.0)
    ys = np.linspace(-1, 2, 31)
    assert np.max(np.abs(k.eval(np.full_like(ys, 2.0), ys))) <= 1e-13


def test_two_sided_brownian_vanishes_at_lower_barrier():
    k = KernelHandle.two_sided(ScaleContext(BM, 0.6), 2.0, 0.0)
    ys = np.linspace(1e-3, 2, 31)
    assert np.max(np.abs(k.eval(np.zeros_like(ys), ys))) <= 1e-15


def test_two_sided_brownian_green_function():
    # killed Brownian Green density 2 sinh(t (x^y)) sinh(t (a - x v y)) / (t sinh(t a)), t = sqrt(2q)
    t = math.sqrt(1.2)
    expected = 2 * math.sinh(t) ** 2 / (t * math.sinh(2 * t))
    k = KernelHandle.two_sided(ScaleContext(BM, 0.6), 2.0, 0.0)
    assert k.eval(1.0, 1.0) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.7292532634501073, rel=1e-15)


@pytest.mark.parametrize("ctx", contexts())
@pytest.mark.parametrize("layout", LAYOUTS)
def test_two_sided_matches_W_formula(ctx, layout):
    a, b = layout
    k = KernelHandle.two_sided(ctx, a, b)
    xs, ys = np.meshgrid(np.linspace(b, a, 13), np.linspace(b, a, 17))
    ref = two_sided_reference(ctx, a, b, xs, ys)
    assert np.max(np.abs(k.eval(xs, ys) - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("ctx", contexts())
def test_one_sided_match_W_formulas(ctx):
    a = 1.5
    up = KernelHandle.one_sided_up(ctx, a)
    down = KernelHandle.one_sided_down(ctx, -a)
    for x in (-2.0, 0.0, 1.0):
        for y in (-3.0, -0.5, 0.7, 1.2):
            ref_up = math.exp(-ctx.phi_q * (a - x)) * ctx.W(a - y) - ctx.W(x - y)
            assert up.eval(x, y) == pytest.approx(ref_up, abs=1e-12)
            xd, yd = -x, -y
            ref_down = math.exp(-ctx.phi_q * (yd + a)) * ctx.W(xd + a) - ctx.W(xd - yd)
            assert down.eval(xd, yd) == pytest.approx(ref_down, abs=1e-12)


def test_out_of_domain_rejected():
    ctx = ScaleContext(BM, 0.6)
    with pytest.raises(DomainError):
        KernelHandle.two_sided(ctx, 2.0, 0.0).eval(2.5, 1.0)
    with pytest.raises(DomainError):
        KernelHandle.one_sided_up(ctx, 1.0).eval(0.0, 1.5)
    with pytest.raises(DomainError):
        KernelHandle.one_sided_down(ctx, 1.0).eval(0.5, 2.0)
    with pytest.raises(DomainError):
        KernelHandle.two_sided(ctx, 0.0, 2.0)


@pytest.mark.parametrize("ctx", contexts())
@pytest.mark.parametrize("layout", LAYOUTS)
def test_nonnegative_on_grid(ctx, layout):
    a, b = layout
    g = np.linspace(b, a, 50)
    xs, ys = np.meshgrid(g, g)
    assert np.min(KernelHandle.two_sided(ctx, a, b).eval(xs, ys)) >= -1e-12
    g_up = np.linspace(a - 20, a, 50)
    xs, ys = np.meshgrid(g_up, g_up)
    assert np.min(KernelHandle.one_sided_up(ctx, a).eval(xs, ys)) >= -1e-12
    g_dn = np.linspace(b, b + 20, 50)
    xs, ys = np.meshgrid(g_dn, g_dn)
    assert np.min(KernelHandle.one_sided_down(ctx, b).eval(xs, ys)) >= -1e-12


# --- mass ------------------------------------------------------------------

def test_empty_interval_has_zero_mass():
    k = KernelHandle.two_sided(ScaleContext(BM, 0.6), 2.0, 0.0)
    assert k.mass(1.0, 0.7, 0.7) == 0.0


def test_mass_at_upper_barrier_is_zero():
    k = KernelHandle.two_sided(ScaleContext(CL, 0.6), 2.0, 0.0)
    assert abs(k.mass(2.0, 0.0, 2.0)) <= 1e-14


def test_brownian_mass_against_quadrature():
    k = KernelHandle.two_sided(ScaleContext(BM, 0.6), 2.0, 0.0)
    quad = integrate.quad(lambda y: k.eval(1.0, y), 0, 2, points=[1.0], epsabs=1e-14)[0]
    m = k.mass(1.0, 0.0, 2.0)
    assert m == pytest.approx(quad, abs=1e-10)
    assert m <= 1 / 0.6


@pytest.mark.parametrize("ctx", contexts())
@pytest.mark.parametrize("layout", LAYOUTS)
def test_mass_against_quadrature_all_kinds(ctx, layout):
    a, b = layout
    k = KernelHandle.two_sided(ctx, a, b)
    up = KernelHandle.one_sided_up(ctx, a)
    down = KernelHandle.one_sided_down(ctx, b)
    for x in np.linspace(b, a, 5):
        u1, u2 = b + 0.2 * (a - b), b + 0.9 * (a - b)
        for kern in (k, up, down):
            quad = integrate.quad(lambda y: kern.eval(x, y), u1, u2, points=[x], epsabs=1e-14)[0]
            assert kern.mass(x, u1, u2) == pytest.approx(quad, abs=1e-10)


@pytest.mark.parametrize("ctx", contexts())
def test_one_sided_infinite_mass_against_quadrature(ctx):
    up = KernelHandle.one_sided_up(ctx, 1.0)
    down = KernelHandle.one_sided_down(ctx, -1.0)
    quad_up = integrate.quad(lambda y: up.eval(0.0, y), -np.inf, 0.0)[0] + \
        integrate.quad(lambda y: up.eval(0.0, y), 0.0, 1.0)[0]
    quad_down = integrate.quad(lambda y: down.eval(0.0, y), -1.0, 0.0)[0] + \
        integrate.quad(lambda y: down.eval(0.0, y), 0.0, np.inf)[0]
    assert up.mass(0.0, -np.inf, 1.0) == pytest.approx(quad_up, abs=1e-9)
    assert down.mass(0.0, -1.0, np.inf) == pytest.approx(quad_down, abs=1e-9)


@pytest.mark.parametrize("ctx", contexts())
@pytest.mark.parametrize("layout", LAYOUTS)
def test_mass_bounded_by_inverse_rate(ctx, layout):
    a, b = layout
    xs = np.linspace(b, a, 101)
    bound = 1 / ctx.q + 1e-10
    assert np.max(KernelHandle.two_sided(ctx, a, b).total_mass(xs)) <= bound
    assert np.max(KernelHandle.one_sided_up(ctx, a).mass(np.linspace(a - 50, a, 101), -np.inf, a)) <= bound
    assert np.max(KernelHandle.one_sided_down(ctx, b).mass(np.linspace(b, b + 50, 101), b, np.inf)) <= bound


def test_mass_stays_bounded_far_from_barriers():
    ctx = ScaleContext(BM, 0.3)
    k = KernelHandle.two_sided(ctx, 1500.0, 0.0)
    xs = np.linspace(0, 1500, 301)
    m = k.total_mass(xs)
    assert np.all(np.isfinite(m)) and np.max(m) <= 1 / 0.3 + 1e-10
    down = KernelHandle.one_sided_down(ctx, 0.0)
    assert down.mass(1200.0, 0.0, np.inf) <= 1 / 0.3 + 1e-10


@pytest.mark.parametrize("ctx", contexts())
def test_mass_additive(ctx):
    k = KernelHandle.two_sided(ctx, 2.0, -1.0)
    for x in np.linspace(-1, 2, 7):
        for u2 in (-0.5, x, 1.3):
            lhs = k.mass(x, -1.0, 2.0)
            rhs = k.mass(x, -1.0, u2) + k.mass(x, u2, 2.0)
            assert lhs == pytest.approx(rhs, abs=1e-12)


def test_inverted_interval_rejected():
    k = KernelHandle.two_sided(ScaleContext(BM, 0.6), 2.0, 0.0)
    with pytest.raises(DomainError):
        k.mass(1.0, 1.5, 0.5)


@pytest.mark.parametrize("ctx", contexts())
def test_one_sided_up_is_limit_of_two_sided(ctx):
    a, x = 1.0, 0.2
    b = x - 40 / ctx.phi_q
    k2 = KernelHandle.two_sided(ctx, a, b)
    k1 = KernelHandle.one_sided_up(ctx, a)
    ys = np.linspace(x - 3, a, 41)
    assert np.max(np.abs(k2.eval(np.full_like(ys, x), ys) - k1.eval(np.full_like(ys, x), ys))) <= 1e-6


@pytest.mark.parametrize("ctx", contexts())
def test_one_sided_down_is_limit_of_two_sided(ctx):
    b, x = -1.0, 0.2
    a = x + 40 / ctx.phi_q
    k2 = KernelHandle.two_sided(ctx, a, b)
    k1 = KernelHandle.one_sided_down(ctx, b)
    ys = np.linspace(b, x + 3, 41)
    assert np.max(np.abs(k2.eval(np.full_like(ys, x), ys) - k1.eval(np.full_like(ys, x), ys))) <= 1e-6
