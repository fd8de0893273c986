import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cases import DIRICHLET, NEUMANN
from layerdiff.spectral import (
    Branch,
    LayerGeometry,
    RobinVector,
    SpectralError,
    delta,
    find_roots,
    kernel_C,
    kernel_L,
    phi_kernel,
    phi_kernel_integral,
    phi_kernel_time_derivative,
    psi,
    theta_kernel,
)

PI = math.pi
UNIT = LayerGeometry(0.0, 1.0, 1.0, 1.0)


def sinh_like(s, geom, z):
    w = math.sqrt(abs(s) / geom.scale)
    return math.sinh(w * z) if s > 0 else math.sin(w * z)


# --- kernels --------------------------------------------------------------------------


def test_kernel_examples():
    np.testing.assert_allclose(kernel_L(0.0, 3.0, UNIT), [1.0, 0.0])
    np.testing.assert_allclose(kernel_L(1.0, 1.0, UNIT), [math.cosh(1.0), math.sinh(1.0)], rtol=1e-15)
    np.testing.assert_allclose(kernel_L(1.0, -PI**2, UNIT), [-1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(kernel_C(0.0, 1.0, UNIT), [0.0, 1.0])
    np.testing.assert_allclose(kernel_C(1.0, -PI**2, UNIT), [0.0, -PI], atol=1e-14)
    np.testing.assert_allclose(kernel_C(1.0, -(PI / 2) ** 2, UNIT), [1.0, 0.0], atol=1e-15)


def test_characteristic_examples():
    assert delta(-PI**2, DIRICHLET, DIRICHLET, UNIT) == pytest.approx(0.0, abs=1e-14)
    assert delta(-(PI / 2) ** 2, DIRICHLET, DIRICHLET, UNIT) == pytest.approx(1.0, rel=1e-14)
    for s in (-1e-8, 1e-8):
        assert abs(delta(s, NEUMANN, NEUMANN, UNIT)) < 1e-7


def test_psi_examples():
    L = RobinVector(0.7, -1.2)
    for s in (-3.0, 2.0):
        assert psi(0.0, 0.4, s, UNIT, L) == pytest.approx(L.dot(kernel_C(0.4, s, UNIT)), rel=1e-15)
        assert psi(0.3, 0.3, s, UNIT, RobinVector(1.0, 0.0)) == pytest.approx(0.0, abs=1e-15)


def test_zero_functional_is_rejected():
    with pytest.raises(ValueError, match=r"\|c0\|\+\|c1\|>0"):
        RobinVector(0.0, 0.0)
    with pytest.raises(ValueError, match=r"\|ı\|\+\|ι\|>0"):
        RobinVector(0.0, 0.0, "|ı|+|ι|>0")


robin = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).filter(lambda p: abs(p[0]) + abs(p[1]) > 0.1)
geometry = st.builds(
    lambda a, w, d, tau: LayerGeometry(a, a + w, d, tau),
    st.floats(-1, 1),
    st.floats(0.3, 2.0),
    st.floats(0.2, 3.0),
    st.floats(0.5, 2.0),
)
svals = st.floats(-50, 50).filter(lambda s: abs(s) > 1e-3)
points = st.floats(-2, 2)


@given(geometry, robin, svals, points, points)
def test_psi_is_shifted_kernel(geom, L, s, x, y):
    L = RobinVector(*L)
    w = math.sqrt(abs(s) / geom.scale)
    lhs = psi(x, y, s, geom, L)
    rhs = L.dot(kernel_C(y - x, s, geom))
    # size of the terms that cancel in psi
    scale = (abs(L.c0) + abs(L.c1) * w) * (1 + w) * math.cosh(w * abs(x)) * math.cosh(w * abs(y))
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(geometry, robin, robin, svals, points, points)
def test_characteristic_identity(geom, a, b, s, x, y):
    a, b = RobinVector(*a), RobinVector(*b)
    al, be = geom.left, geom.right
    lhs = delta(s, a, b, geom) * sinh_like(s, geom, x - y)
    t1 = psi(x, al, s, geom, a) * b.dot(kernel_C(be - y, s, geom))
    t2 = a.dot(kernel_C(al - y, s, geom)) * psi(x, be, s, geom, b)
    w = math.sqrt(abs(s) / geom.scale)

    def mag(L, z):
        # size of the intermediate terms of psi and of <L, C(z)>
        return (abs(L.c0) + abs(L.c1) * w) * (1 + w) * math.cosh(w * abs(z))

    scale = mag(a, x) * mag(a, al) * mag(b, be - y) + mag(a, al - y) * mag(b, x) * mag(b, be)
    assert abs(lhs - (-t1 + t2)) <= 1e-10 * scale


@given(geometry, robin, robin, points, points)
def test_identity_at_roots(geom, a, b, x, y):
    a, b = RobinVector(*a), RobinVector(*b)
    try:
        bs = find_roots(a, b, geom, 6)
    except SpectralError:
        assume(False)
    al, be = geom.left, geom.right
    for s in bs.s:
        t1 = psi(x, al, s, geom, a) * b.dot(kernel_C(be - y, s, geom))
        t2 = a.dot(kernel_C(al - y, s, geom)) * psi(x, be, s, geom, b)
        w = math.sqrt(abs(s) / geom.scale)
        scale = (abs(a.c0) + abs(a.c1) * w) * (abs(b.c0) + abs(b.c1) * w)
        assert abs(t1 - t2) <= 1e-8 * scale


# --- roots ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "a, b, mu",
    [
        (DIRICHLET, DIRICHLET, lambda k: k * PI),
        (NEUMANN, NEUMANN, lambda k: k * PI),
        (DIRICHLET, NEUMANN, lambda k: (2 * k - 1) * PI / 2),
        (NEUMANN, DIRICHLET, lambda k: (2 * k - 1) * PI / 2),
    ],
)
def test_closed_form_roots(a, b, mu):
    bs = find_roots(a, b, UNIT, 20)
    exact = np.array([-mu(k) ** 2 for k in range(1, 21)])
    np.testing.assert_allclose(bs.s, exact, rtol=1e-10)
    assert bs.s_next == pytest.approx(-mu(21) ** 2, rel=1e-10)


def test_roots_scale_with_geometry():
    geom = LayerGeometry(0.5, 2.5, 0.3, 2.0)
    bs = find_roots(DIRICHLET, DIRICHLET, geom, 20)
    exact = -geom.scale * (np.arange(1, 21) * PI / geom.width) ** 2
    np.testing.assert_allclose(bs.s, exact, rtol=1e-10)


@given(geometry, robin, robin)
def test_roots_are_simple_negative_and_ordered(geom, a, b):
    a, b = RobinVector(*a), RobinVector(*b)
    try:
        bs = find_roots(a, b, geom, 12)
    except SpectralError:
        assume(False)
    assert np.all(bs.s < 0.0)
    assert np.all(np.diff(bs.s) < 0.0)
    assert bs.s_next < bs.s[-1]
    assert np.all(bs.dprime != 0.0)
    assert np.all(np.isfinite(bs.dprime))
    for s in bs.s:
        w = math.sqrt(-s / geom.scale)
        scale = (abs(a.c0) + abs(a.c1) * w) * (abs(b.c0) + abs(b.c1) * w)
        assert abs(delta(s, a, b, geom)) <= 1e-11 * scale


def test_growing_mode_is_rejected():
    with pytest.raises(SpectralError):
        find_roots(RobinVector(1.0, 0.5), RobinVector(2.0, 1.0), UNIT, 5)
    with pytest.raises(SpectralError):
        find_roots(RobinVector(0.3, 1.0), RobinVector(0.0, 2.0), LayerGeometry(0.3, 0.7, 0.4, 1.0), 5)


def test_vanishing_coefficient_counts_as_neumann():
    bs = find_roots(RobinVector(-1e-53, 1.0), NEUMANN, UNIT, 5)
    assert bs.degenerate
    np.testing.assert_allclose(bs.s, -((np.arange(1, 6) * PI) ** 2), rtol=1e-10)


def test_zero_count_still_reports_next_root():
    bs = find_roots(DIRICHLET, DIRICHLET, UNIT, 0)
    assert bs.K == 0
    assert bs.s_next == pytest.approx(-(PI**2), rel=1e-12)


# --- limits at s = 0 ------------------------------------------------------------------


def theta_hat_times_s(bs, x, y, s):
    """``s * <a, C(x)> <b, C(y)> / (w Delta)``; real in the reduced convention."""
    g = bs.geometry
    w = math.sqrt(abs(s) / g.scale)
    return s * bs.a.dot(kernel_C(x, s, g)) * bs.b.dot(kernel_C(y, s, g)) / (w * delta(s, bs.a, bs.b, g))


def phi_hat(bs, y, L, s):
    """``<L, C(y)> / (s Delta)``."""
    g = bs.geometry
    return L.dot(kernel_C(y, s, g)) / (s * delta(s, bs.a, bs.b, g))


def richardson(f, steps=(-1e-4, -1e-6, -1e-8)):
    """Linear extrapolation to 0 from the two smallest usable steps."""
    vals = [f(s) for s in steps]
    s1, s2 = steps[-2], steps[-1]
    return vals[-1] - s2 * (vals[-2] - vals[-1]) / (s1 - s2)


CASES = [
    (DIRICHLET, DIRICHLET),
    (NEUMANN, NEUMANN),
    (DIRICHLET, NEUMANN),
    (RobinVector(1.0, -0.5), RobinVector(2.0, 1.0)),
    (RobinVector(0.0, 1.0), RobinVector(0.5, 1.0)),
]
GEOMS = [UNIT, LayerGeometry(-0.3, 1.0, 0.5, 2.0)]


@pytest.mark.parametrize("a, b", CASES)
@pytest.mark.parametrize("geom", GEOMS)
def test_theta_limit(a, b, geom):
    bs = find_roots(a, b, geom, 4)
    for x, y in [(-0.3, 0.8), (0.1, -0.6), (0.0, 0.0)]:
        lim = richardson(lambda s: theta_hat_times_s(bs, x, y, s))
        assert float(bs.theta0(x, y)) == pytest.approx(lim, abs=1e-7 * (1 + abs(lim)))


@pytest.mark.parametrize("a, b", CASES)
@pytest.mark.parametrize("geom", GEOMS)
def test_phi_limit(a, b, geom):
    bs = find_roots(a, b, geom, 4)
    for L in (a, b):
        for y in (-1.3, 0.4, 0.9):
            if not bs.degenerate:
                lim = richardson(lambda s: s * phi_hat(bs, y, L, s))
                assert float(bs.phi0(y, L)) == pytest.approx(lim, abs=1e-7 * (1 + abs(lim)))
                assert float(bs.phi_slope(y, L)) == 0.0
            else:
                # s^2 Phi_hat = c_2 + c_1 s + c_0 s^2; the kernel is c_1 + c_2 t / tau
                steps = np.array([-1e-2, -1e-3, -1e-4])
                vals = [s * s * phi_hat(bs, y, L, s) for s in steps]
                c0, c1, c2 = np.polyfit(steps, vals, 2)
                assert float(bs.phi_slope(y, L)) == pytest.approx(c2 / geom.tau, abs=1e-9 * (1 + abs(c2)))
                assert float(bs.phi0(y, L)) == pytest.approx(c1, abs=1e-6 * (1 + abs(c1)))


def test_branch_classification():
    assert find_roots(DIRICHLET, DIRICHLET, UNIT, 2).theta_branch is Branch.REMOVABLE
    nn = find_roots(NEUMANN, NEUMANN, UNIT, 2)
    assert nn.degenerate
    assert nn.theta_branch is Branch.SIMPLE_POLE
    assert nn.phi_branch is Branch.DOUBLE_POLE
    assert float(nn.theta0(0.2, 0.7)) == pytest.approx(-1.0, rel=1e-14)
    dd = find_roots(DIRICHLET, DIRICHLET, UNIT, 2)
    assert float(dd.phi0(0.37, DIRICHLET)) == pytest.approx(0.37, rel=1e-14)


# --- time kernels -----------------------------------------------------------------------


def test_phi_kernel_derivative_and_integral():
    bs = find_roots(RobinVector(1.0, -0.5), RobinVector(2.0, 1.0), UNIT, 40)
    L = bs.b
    h = 1e-5
    for y in (0.2, 0.9):
        for t in (0.01, 0.1, 0.7):
            fd = (phi_kernel(y, t + h, bs, L) - phi_kernel(y, t - h, bs, L)) / (2 * h)
            assert float(phi_kernel_time_derivative(y, t, bs, L)) == pytest.approx(float(fd), rel=1e-6, abs=1e-8)
        ts = np.linspace(0.0, 0.5, 20001)
        vals = phi_kernel(y, ts, bs, L)
        quad = np.sum(0.5 * (vals[1:] + vals[:-1])) * (ts[1] - ts[0])
        assert float(phi_kernel_integral(y, 0.5, bs, L)) == pytest.approx(quad, rel=1e-7)
    assert float(phi_kernel_time_derivative(0.3, 40.0, bs, L)) == pytest.approx(0.0, abs=1e-12)
    assert float(phi_kernel_time_derivative(0.3, 0.2, bs.truncated(0), L)) == 0.0


def test_theta_kernel_is_the_green_function():
    bs = find_roots(DIRICHLET, DIRICHLET, UNIT, 200)
    x, y, t = 0.3, 0.6, 0.05
    green = 2 * sum(math.exp(-(k * PI) ** 2 * t) * math.sin(k * PI * x) * math.sin(k * PI * y) for k in range(1, 200))
    assert float(theta_kernel(-x, 1.0 - y, t, bs)) == pytest.approx(-green, rel=1e-12)


def test_theta_kernel_late_time_is_one_mode():
    bs = find_roots(RobinVector(1.0, -0.5), RobinVector(2.0, 1.0), UNIT, 30)
    t = 10.0 / abs(bs.s[0])
    x, y = -0.2, 0.7
    full = float(theta_kernel(x, y, t, bs))
    first = float(bs.theta0(x, y)) + float(bs.theta_coefficients(x, y)[0]) * math.exp(bs.s[0] * t)
    coef = np.max(np.abs(bs.theta_coefficients(x, y)))
    assert abs(full - first) <= math.exp(bs.s[1] * t) * coef * 2


def test_series_terms_are_real():
    bs = find_roots(RobinVector(0.5, 1.0), RobinVector(2.0, 1.0), LayerGeometry(0.7, 1.0, 2.0, 1.0), 64)
    y = np.linspace(-0.4, 0.4, 9)
    for arr in (bs.theta_coefficients(y, y[::-1]), bs.phi_coefficients(y, bs.a)):
        assert arr.dtype == np.float64
        assert np.all(np.isfinite(arr))
    assert bs.tail_bound(0.01) == pytest.approx(math.exp(bs.s_next * 0.01))
