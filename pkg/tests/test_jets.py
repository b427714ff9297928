import itertools
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rblab import jets as jm

X, Y = sp.symbols("x y")

# (jet expression, sympy expression) pairs in two variables
CASES = [
    (lambda x, y: x * y * y + 3.0 * x, X * Y**2 + 3 * X),
    (lambda x, y: jm.exp(x * 0.5 - y), sp.exp(X / 2 - Y)),
    (lambda x, y: jm.log(1.0 + x * x + y * y), sp.log(1 + X**2 + Y**2)),
    (lambda x, y: jm.sin(x) * jm.cos(y * 2.0), sp.sin(X) * sp.cos(2 * Y)),
    (lambda x, y: jm.sqrt(2.0 + x * y), sp.sqrt(2 + X * Y)),
    (lambda x, y: 1.0 / (1.5 + x * x) - jm.sinh(y) * jm.cosh(x), 1 / (sp.Rational(3, 2) + X**2) - sp.sinh(Y) * sp.cosh(X)),
    (lambda x, y: jm.power(1.0 + x * x, -1.5) * y, (1 + X**2) ** sp.Rational(-3, 2) * Y),
    (lambda x, y: (x + 2.0) ** 2.5, (X + 2) ** sp.Rational(5, 2)),
]

POINTS = np.array([[0.3, -0.7], [1.1, 0.4], [-0.5, 0.9]])
ORDER = 4


@pytest.mark.parametrize("k", range(len(CASES)))
def test_partials_match_symbolic_derivatives(k):
    fj, fs = CASES[k]
    x, y = jm.variables(POINTS, ORDER)
    J = fj(x, y)
    for deg in range(ORDER + 1):
        for i in range(deg + 1):
            alpha = (i, deg - i)
            expr = sp.diff(fs, X, alpha[0], Y, alpha[1]) if deg else fs
            f = sp.lambdify((X, Y), expr, "numpy")
            want = np.broadcast_to(np.asarray(f(POINTS[:, 0], POINTS[:, 1]), dtype=float), (len(POINTS),))
            np.testing.assert_allclose(J.partial(alpha), want, rtol=1e-12, atol=1e-12)


def test_order_zero_part_is_plain_evaluation():
    for fj, _ in CASES:
        x, y = jm.variables(POINTS, 3)
        np.testing.assert_allclose(fj(x, y).value, fj(POINTS[:, 0], POINTS[:, 1]), rtol=1e-14)


def test_derivative_lowers_valid_order():
    x, = jm.variables([[0.2]], 2)
    f = jm.exp(x)
    assert f.valid == 2 and f.d(0).valid == 1 and f.d(0).d(0).valid == 0
    with pytest.raises(ValueError):
        f.d(0).d(0).d(0)
    with pytest.raises(ValueError):
        f.d(0).partial((2,))


def test_jinv_inverts_matrix_jets():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (5, 2))
    x, y = jm.variables(pts, 3)
    M = jm.stack([jm.stack([2.0 + x * x, x * y * 0.3], axis=-1), jm.stack([x * y * 0.3, 1.5 + jm.sin(y)], axis=-1)], axis=-2)
    I = jm.jeinsum("ab,bc->ac", M, jm.jinv(M))
    np.testing.assert_allclose(I.value, np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-14)
    for a in itertools.product(range(4), repeat=2):
        if 0 < sum(a) <= 3:
            np.testing.assert_allclose(I.partial(a), 0.0, atol=1e-12)


def test_jeinsum_matches_numpy_on_values():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, (4, 2))
    x, y = jm.variables(pts, 2)
    A = jm.stack([x, y, x * y], axis=-1)
    B = jm.stack([y, x + 1.0, 2.0 * y], axis=-1)
    C = jm.jeinsum("a,a->", A, B)
    np.testing.assert_allclose(C.value, np.einsum("na,na->n", A.value, B.value))
    # product rule on the contraction
    np.testing.assert_allclose(C.partial((1, 0)), np.einsum("na,na->n", A.d(0).value, B.value)
                               + np.einsum("na,na->n", A.value, B.d(0).value), atol=1e-14)


def test_compose_needs_enough_derivatives():
    x, = jm.variables([[0.1]], 3)
    with pytest.raises(ValueError):
        jm.compose(x, [1.0, 1.0])


def test_jets_in_different_spaces_do_not_mix():
    a, = jm.variables([[0.1]], 2)
    b, = jm.variables([[0.1]], 3)
    with pytest.raises(ValueError):
        a + b


finite = st.floats(-2.0, 2.0, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(finite, finite, st.floats(0.1, 3.0), st.floats(-1.0, 1.0))
def test_leibniz_and_chain_rules(px, py, a, b):
    x, y = jm.variables([[px, py]], 3)
    f = jm.sin(x * a) + y * b
    g = jm.exp(y * 0.5) + x * x
    fg = f * g
    # first and second order Leibniz in x
    fx, gx = f.partial((1, 0)), g.partial((1, 0))
    assert fg.partial((1, 0)) == pytest.approx(fx * g.value + f.value * gx, rel=1e-12, abs=1e-12)
    fxx, gxx = f.partial((2, 0)), g.partial((2, 0))
    want = fxx * g.value + 2 * fx * gx + f.value * gxx
    assert fg.partial((2, 0)) == pytest.approx(want, rel=1e-11, abs=1e-11)
    # chain rule: d/dy exp(f) = exp(f) f_y
    e = jm.exp(f)
    assert e.partial((0, 1)) == pytest.approx(math.exp(f.value[0]) * f.partial((0, 1))[0], rel=1e-12, abs=1e-14)
