import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annulus_energy.numerics import (
    MonotoneTable,
    QuadratureError,
    QuadratureSpec,
    RootBracketError,
    central_diff,
    find_root,
    integrate,
    invert_monotone,
)


def test_inverse_sqrt_endpoint():
    assert integrate(lambda y: y ** -0.5, 0.0, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_critical_euclidean_integral():
    # y^2 - 1/4 = (y - 1/2)(y + 1/2), with y - 1/2 supplied exactly
    v = integrate(lambda y, da, db: 1.0 / np.sqrt(da * (y + 0.5)), 0.5, 1.0, distances=True)
    assert v == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)


def test_sine():
    assert integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_distance_form_avoids_cancellation():
    # 1/sqrt((y-a)(b-y)) has both endpoints singular; exact distances are passed
    v = integrate(lambda x, da, db: 1.0 / np.sqrt(da * db), 0.3, 0.3 + 1e-6, distances=True)
    assert v == pytest.approx(math.pi, rel=1e-10)


def test_integrate_rejects_reversed_interval():
    with pytest.raises(ValueError):
        integrate(np.sin, 1.0, 0.0)


def test_nonintegrable_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda y: 1.0 / y, 0.0, 1.0, QuadratureSpec(1e-12, 1e-12))


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(-1.0, 1e-10)
    with pytest.raises(ValueError):
        QuadratureSpec(max_levels=3)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(alpha, beta):
    f = lambda y: np.exp(y)
    g = lambda y: 1.0 / np.sqrt(y)
    lhs = integrate(lambda y: alpha * f(y) + beta * g(y), 0.0, 1.0)
    rhs = alpha * integrate(f, 0.0, 1.0) + beta * integrate(g, 0.0, 1.0)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(alpha) + abs(beta))


@pytest.mark.parametrize("f,lo,hi,root", [
    (lambda y: y * y - 2, 1.0, 2.0, math.sqrt(2)),
    (math.cos, 1.0, 2.0, math.pi / 2),
    # the a,b oracle: arcsinh(1/sqrt g) - arcsinh(0.5/sqrt g) = log(1/0.6)
    (lambda g: math.asinh(0.5 / math.sqrt(g)) - math.asinh(1 / math.sqrt(g)) + math.log(1 / 0.6),
     0.1, 2.0, 0.41015625),
])
def test_find_root_examples(f, lo, hi, root):
    assert find_root(f, lo, hi) == pytest.approx(root, abs=1e-11)


def test_find_root_requires_bracket():
    with pytest.raises(RootBracketError):
        find_root(lambda y: y * y + 1, -1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5))
def test_find_root_stays_in_bracket(c, width):
    lo, hi = c - width, c + 2 * width
    r = find_root(lambda y: math.atan(y - c), lo, hi)
    assert lo <= r <= hi
    assert r == pytest.approx(c, abs=1e-10)


def test_invert_examples():
    x = np.linspace(0, 1, 11)
    assert invert_monotone(MonotoneTable(x, 2 * x))(1.0) == pytest.approx(0.5, abs=1e-12)
    x = np.linspace(0, 2, 201)
    assert invert_monotone(MonotoneTable(x, x**3), lambda s: s**3, lambda s: 3 * s**2)(1.0) == pytest.approx(1.0, abs=1e-12)
    x = np.linspace(0, 1, 33)
    inv = invert_monotone(MonotoneTable(x, np.exp(x)), np.exp, np.exp)
    assert inv(2.0) == pytest.approx(math.log(2), abs=1e-12)


def test_invert_round_trip_1000():
    x = np.linspace(0.1, 3.0, 257)
    fwd = lambda s: np.log(s) + s
    table = MonotoneTable(x, fwd(x))
    inv = invert_monotone(table, fwd, lambda s: 1 / s + 1)
    q = np.linspace(fwd(0.1), fwd(3.0), 1000)
    assert np.max(np.abs(fwd(inv(q)) - q)) <= 1e-9 * (q[-1] - q[0])


def test_invert_decreasing_and_out_of_range():
    x = np.linspace(0, 1, 20)
    inv = invert_monotone(MonotoneTable(x, 1 - x))
    assert inv(0.25) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(ValueError):
        inv(1.5)


@pytest.mark.parametrize("vals", [[0, 1, 1, 2], [0, 1, 0.5, 2], [0, 1, 2]])
def test_table_rejects_ties_and_short_tables(vals):
    with pytest.raises(ValueError):
        MonotoneTable(np.arange(len(vals), dtype=float), np.array(vals, dtype=float))


def test_central_diff():
    assert central_diff(math.sin, 0.3, 1e-5) == pytest.approx(math.cos(0.3), rel=1e-9)
