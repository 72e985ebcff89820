import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyreduce import ad
from polyreduce.fields import AnalyticField, ChartBox, ConstantField, fd_jacobian, halton_points
from polyreduce.forms import (VectorFieldRep, VForm, barwedge, exterior_derivative, interior_product,
                              lie_bracket, lie_derivative, multi_indices, pullback, wedge)

CH = ChartBox(("x", "y", "z"), ((-1.0, 1.0),) * 3)
coef = st.lists(st.floats(-2, 2, allow_nan=False), min_size=9, max_size=9)


def _poly1(c):
    """A 1-form on CH with mildly nonlinear coefficients built from nine numbers."""
    return VForm(CH, 1, 1, AnalyticField(lambda v: [c[0] * v[1] * v[2] + c[1] * ad.sin(v[0]),
                                                    c[2] * v[0] ** 2 + c[3] * v[2],
                                                    c[4] * ad.exp(c[5] * v[1]) + c[6] * v[0] * v[1] + c[7]
                                                    + c[8] * v[2] ** 3], 3, 3))


def _field(c):
    return VectorFieldRep(CH, AnalyticField(lambda v: [c[0] + c[1] * v[1], c[2] * v[0] * v[2],
                                                      c[3] * ad.cos(v[0]) + c[4] * v[1] ** 2], 3, 3))


def test_multi_index_order():
    assert multi_indices(4, 2) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def test_from_terms_sign_and_coefficient():
    w = VForm.from_terms(CH, 2, [{("y", "x"): 2.0}])
    assert w.coefficient(CH.center, 0, ("x", "y")) == -2.0


def test_interior_of_area_form():
    w = VForm.from_terms(CH, 2, [{("x", "y"): 1.0}])
    got = interior_product(VectorFieldRep.coordinate(CH, "x"), w).at(CH.center)
    np.testing.assert_allclose(got, [[0.0, 1.0, 0.0]])


@settings(max_examples=25, deadline=None)
@given(coef, coef)
def test_wedge_of_one_forms(c1, c2):
    a, b = _poly1(c1), _poly1(c2)
    w = wedge(a, b)
    for x in halton_points(CH, 5, 1):
        A, B = a.at(x)[0], b.at(x)[0]
        want = [A[i] * B[j] - A[j] * B[i] for i, j in multi_indices(3, 2)]
        np.testing.assert_allclose(w.at(x)[0], want, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(coef)
def test_d_squared_vanishes(c):
    dd = exterior_derivative(exterior_derivative(_poly1(c)))
    for x in halton_points(CH, 5, 2):
        assert np.max(np.abs(dd.at(x))) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(coef)
def test_d_of_one_form_against_differences(c):
    w = _poly1(c)
    dw = exterior_derivative(w)
    for x in halton_points(CH, 4, 3):
        J = fd_jacobian(lambda y: w.at(y)[0], x, 3)    # J[i, l] = d_l w_i
        want = [J[j, i] - J[i, j] for i, j in multi_indices(3, 2)]
        np.testing.assert_allclose(dw.at(x)[0], want, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(coef, coef)
def test_lie_derivative_of_one_form(cw, cx):
    # (L_X w)_i = X^j d_j w_i + w_j d_i X^j, evaluated with finite differences
    w, X = _poly1(cw), _field(cx)
    L = lie_derivative(X, w)
    for x in halton_points(CH, 4, 4):
        Jw = fd_jacobian(lambda y: w.at(y)[0], x, 3)
        JX = fd_jacobian(lambda y: X.at(y), x, 3)
        want = Jw @ X.at(x) + JX.T @ w.at(x)[0]
        np.testing.assert_allclose(L.at(x)[0], want, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(coef)
def test_lie_derivative_commutes_with_d(c):
    w, X = _poly1(c), _field(c[::-1])
    lhs, rhs = exterior_derivative(lie_derivative(X, w)), lie_derivative(X, exterior_derivative(w))
    for x in halton_points(CH, 4, 5):
        np.testing.assert_allclose(lhs.at(x), rhs.at(x), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(coef)
def test_pullback_naturality(c):
    src = ChartBox(("u", "v"), ((-1.0, 1.0),) * 2)
    phi = AnalyticField(lambda v: [v[0] * v[1], ad.sin(v[0]) + c[0] * v[1], v[1] ** 2 + c[1]], 2, 3)
    w = _poly1(c)
    lhs, rhs = exterior_derivative(pullback(phi, w, src)), pullback(phi, exterior_derivative(w), src)
    for u in halton_points(src, 5, 6):
        np.testing.assert_allclose(lhs.at(u), rhs.at(u), atol=1e-8)
        # direct oracle: (phi* w)_i = w_j(phi(u)) d_i phi^j
        Jp = fd_jacobian(phi, u, 3)
        np.testing.assert_allclose(pullback(phi, w, src).at(u)[0], w.at(phi(u))[0] @ Jp, atol=1e-6)


def test_bracket_of_coordinate_fields():
    X = VectorFieldRep(CH, AnalyticField(lambda v: [v[1], 0 * v[0], 0 * v[0]], 3, 3))
    Y = VectorFieldRep.coordinate(CH, "y")
    # [y dx, dy] = -dx
    np.testing.assert_allclose(lie_bracket(X, Y).at(CH.center), [-1.0, 0.0, 0.0])


def test_vector_valued_wedge_and_errors():
    a = VForm.from_terms(CH, 1, [{("x",): 1.0}, {("y",): 1.0}])
    b = VForm.from_terms(CH, 1, [{("y",): 1.0}, {("z",): 1.0}])
    np.testing.assert_allclose(barwedge(a, b).at(CH.center), [[1, 0, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        wedge(a, b)
    with pytest.raises(ValueError):
        VForm(CH, 2, 1, ConstantField([0.0, 1.0], 3))
    top = VForm.from_terms(CH, 3, [{("x", "y", "z"): 1.0}])
    with pytest.raises(ValueError):
        exterior_derivative(top)
