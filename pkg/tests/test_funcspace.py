import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerdiff.funcspace import (
    DomainError,
    FunctionSpec,
    SpaceTimeFunctionSpec,
    TimeGrid,
    TimeSeries,
    WeightParams,
    eval_fn,
    eval_weight,
    sample,
)

finite = st.floats(-10, 10, allow_nan=False)
positive = st.floats(0.1, 5.0)


@st.composite
def specs(draw, depth=1):
    kind = draw(st.sampled_from(["constant", "polynomial", "exponential", "sinusoid", "gaussian", "tabulated", "sum"]))
    if kind == "constant":
        return FunctionSpec.constant(draw(finite))
    if kind == "polynomial":
        return FunctionSpec.polynomial(draw(st.lists(finite, min_size=1, max_size=9)))
    if kind == "exponential":
        return FunctionSpec.exponential(draw(finite), draw(st.floats(-3, 1)))
    if kind == "sinusoid":
        return FunctionSpec.sinusoid(draw(finite), draw(positive), draw(finite))
    if kind == "gaussian":
        return FunctionSpec.gaussian(draw(finite), draw(finite), draw(positive))
    if kind == "tabulated":
        xs = sorted(set(draw(st.lists(st.floats(-5, 5), min_size=2, max_size=8))))
        if len(xs) < 2:
            xs = [0.0, 1.0]
        ys = draw(st.lists(finite, min_size=len(xs), max_size=len(xs)))
        return FunctionSpec.tabulated(xs, ys)
    if depth == 0:
        return FunctionSpec.constant(1.0)
    return FunctionSpec.sum_of(*draw(st.lists(specs(depth=0), min_size=1, max_size=3)))


def test_catalog_values():
    assert eval_fn(FunctionSpec.constant(3.0), 7.0) == 3.0
    assert eval_fn(FunctionSpec.polynomial([0.0, 1.0]), 0.5) == 0.5
    assert eval_fn(FunctionSpec.sinusoid(1.0, math.pi), 0.5) == pytest.approx(1.0, abs=1e-15)
    assert eval_fn(FunctionSpec.gaussian(2.0, 1.0, 0.5), 1.0) == 2.0
    assert eval_fn(FunctionSpec.exponential(1.0, -1.0), 1.0) == pytest.approx(math.exp(-1.0))


def test_tabulated_is_linear_with_constant_extrapolation():
    f = FunctionSpec.tabulated([0.0, 1.0, 2.0], [0.0, 2.0, 1.0])
    np.testing.assert_allclose(f([-1.0, 0.5, 1.5, 3.0]), [0.0, 1.0, 1.5, 1.0])
    np.testing.assert_allclose(f.derivative_at([0.5, 1.5, 5.0]), [2.0, -1.0, 0.0])


def test_weight_examples():
    assert eval_weight(WeightParams(0.0, 3.0, 2.0), 5.0) == 1.0
    assert eval_weight(WeightParams(1.0, 1.0, 1.0), 0.0) == 1.0
    assert eval_weight(WeightParams(1.0, 2.0, 2.0), 2.0) == pytest.approx(0.2)


def test_sample_examples():
    g = TimeGrid(1.0, 2)
    np.testing.assert_array_equal(sample(FunctionSpec.constant(1.0), g).values, [1, 1, 1])
    np.testing.assert_array_equal(sample(FunctionSpec.polynomial([0, 1]), g).values, [0, 0.5, 1])
    w = sample(FunctionSpec.constant(1.0), g, WeightParams(1.0, 1.0, 1.0)).values
    np.testing.assert_allclose(w, [1.0, 2.0 / 3.0, 0.5], rtol=1e-15)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: FunctionSpec.polynomial([1.0] * 10),
        lambda: FunctionSpec.tabulated([0.0, 0.0], [1.0, 2.0]),
        lambda: FunctionSpec("spline", (1.0,)),
        lambda: FunctionSpec.gaussian(1.0, 0.0, 0.0),
        lambda: WeightParams(rho=-1.0),
        lambda: WeightParams(m=0.5),
        lambda: WeightParams(tau=0.0),
        lambda: TimeGrid(0.0, 10),
        lambda: TimeGrid(1.0, 0),
    ],
)
def test_invalid_specs_are_rejected(bad):
    with pytest.raises(ValueError):
        bad()


def test_domain_is_enforced():
    f = FunctionSpec("constant", (1.0,), domain=(0.0, 1.0))
    assert f(0.5) == 1.0
    with pytest.raises(DomainError):
        f(1.5)


def test_time_series_checks_length():
    with pytest.raises(ValueError):
        TimeSeries(TimeGrid(1.0, 4), np.zeros(3))


@given(specs())
def test_dict_round_trip(f):
    g = FunctionSpec.from_dict(f.to_dict())
    assert g == f


def test_bare_number_is_constant():
    assert FunctionSpec.from_dict(2.5) == FunctionSpec.constant(2.5)
    with pytest.raises(ValueError):
        FunctionSpec.from_dict({"kind": "constant", "coefficients": [1.0], "colour": "red"})


@given(specs(), st.floats(-2, 2))
def test_derivative_matches_central_difference(f, x):
    if f.kind == "tabulated" or any(t.kind == "tabulated" for t in f.terms):
        return
    h = 1e-5
    fd = (eval_fn(f, x + h) - eval_fn(f, x - h)) / (2 * h)
    scale = 1.0 + max(abs(eval_fn(f, x + s)) for s in (-0.1, 0.0, 0.1))
    assert abs(f.derivative_at(x) - fd) <= 1e-4 * scale


@given(st.floats(0.0, 3.0), st.integers(1, 4), st.floats(0.2, 3.0))
def test_weight_at_zero(rho, m, tau):
    assert eval_weight(WeightParams(rho, m, tau), 0.0) == pytest.approx(tau ** (-m * rho), rel=1e-12)


@given(st.integers(1, 4), st.floats(0.2, 3.0), st.floats(0.0, 100.0))
def test_zero_exponent_gives_unit_weight(m, tau, t):
    assert eval_weight(WeightParams(0.0, m, tau), t) == 1.0


@given(st.lists(finite, min_size=1, max_size=9), st.integers(1, 40))
def test_polynomial_sampling_is_exact(coef, n):
    g = TimeGrid(2.0, n)
    f = FunctionSpec.polynomial(coef)
    np.testing.assert_array_equal(sample(f, g).values, eval_fn(f, g.nodes))


def test_space_time_product_and_round_trip():
    r = SpaceTimeFunctionSpec(
        ((FunctionSpec.sinusoid(1.0, math.pi), FunctionSpec.constant(2.0)), (FunctionSpec.constant(1.0), FunctionSpec.polynomial([0, 1])))
    )
    val = r(np.array([0.5]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(val, [[2.0, 3.0]])
    assert SpaceTimeFunctionSpec.from_dict(r.to_dict()) == r
