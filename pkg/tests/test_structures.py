import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyreduce import ad
from polyreduce.fields import AnalyticField, ChartBox, halton_points
from polyreduce.forms import VForm
from polyreduce.instances import CATALOG, counterexample_r4, get_instance
from polyreduce.structures import (CosymplecticStructure, KPolycosymplecticStructure, KPolysymplecticStructure,
                                   evolution_field, extend_to_fibred, fibred_reeb_residual, gradient_field,
                                   hamiltonian_field, poisson_bracket, reeb_certificate, reeb_family,
                                   verify_structure)

DARBOUX = get_instance("cosymplectic-darboux").structure


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_structures_verify(name):
    rep = verify_structure(get_instance(name).structure, samples=50)
    assert rep.passed, rep.to_text()


def test_r4_counterexample_reports_rank():
    rep = verify_structure(counterexample_r4(), samples=20)
    bad = rep.first_failure()
    assert bad.name == "ker_omega_rank"
    assert bad.value == 2.0
    # the forms themselves are closed, only the rank condition fails
    assert rep["d_tau_closed"].passed and rep["d_omega_closed"].passed


def test_non_closed_form_detected():
    ch = ChartBox(("t", "q", "p"), ((-1, 1),) * 3)
    omega = VForm.from_terms(ch, 2, [{("q", "p"): AnalyticField(lambda v: [1 + v[0] ** 2], 3, 1)}])
    tau = VForm.from_terms(ch, 1, [{("t",): 1.0}])
    rep = verify_structure(CosymplecticStructure(ch, tau, omega), samples=10)
    assert not rep["d_omega_closed"].passed
    assert rep["d_tau_closed"].passed


def test_even_dimension_cosymplectic_rejected():
    ch = ChartBox(("a", "b"), ((-1, 1),) * 2)
    s = CosymplecticStructure(ch, VForm.from_terms(ch, 1, [{("a",): 1.0}]), VForm.zero(ch, 2))
    rep = verify_structure(s, samples=5)
    assert not rep.passed and not rep["odd_dimension"].passed


def test_polysymplectic_kernel():
    ch = ChartBox(("q", "p1", "p2"), ((-1, 1),) * 3)
    om = VForm.from_terms(ch, 2, [{("q", "p1"): 1.0}, {("q", "p2"): 1.0}])
    assert verify_structure(KPolysymplecticStructure(ch, 2, om), samples=5).passed
    deg = VForm.from_terms(ch, 2, [{("q", "p1"): 1.0}, {("q", "p1"): 2.0}])
    assert not verify_structure(KPolysymplecticStructure(ch, 2, deg), samples=5).passed


def test_reeb_fields():
    np.testing.assert_allclose(reeb_family(DARBOUX, DARBOUX.chart.center), [[1, 0, 0]], atol=1e-14)
    s = get_instance("coupled-strings").structure
    for x in halton_points(s.chart, 10, 1):
        R = reeb_family(s, x)
        np.testing.assert_allclose(R[:, :2], np.eye(2), atol=1e-12)
        np.testing.assert_allclose(R[:, 2:], 0, atol=1e-12)
        res, ok = reeb_certificate(s, x)
        assert ok and res <= 1e-12


scal = st.floats(-1.5, 1.5, allow_nan=False)


def _fn(a, b, c):
    return AnalyticField(lambda v: [a * v[1] ** 2 * v[2] + b * ad.sin(v[0] + v[2]) + c * v[1] * v[2] ** 2], 3, 1)


def test_hamiltonian_field_is_hamilton():
    f = AnalyticField(lambda v: [v[1] ** 2 * v[2] + v[0] * v[1]], 3, 1)
    x = np.array([0.3, 0.5, -0.2])
    # f_t = q, f_q = 2qp + t, f_p = q^2; flat(X) = i_X omega + tau(X) tau
    np.testing.assert_allclose(hamiltonian_field(DARBOUX, f).at(x), [0, 0.25, -0.1], atol=1e-12)
    np.testing.assert_allclose(evolution_field(DARBOUX, f).at(x), [1, 0.25, -0.1], atol=1e-12)
    np.testing.assert_allclose(gradient_field(DARBOUX, f).at(x), [0.5, 0.25, -0.1], atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(scal, scal, scal, scal, scal, scal)
def test_poisson_bracket_darboux(a, b, c, d, e, g):
    f, h = _fn(a, b, c), _fn(d, e, g)
    pb = poisson_bracket(DARBOUX, f, h)
    for x in halton_points(DARBOUX.chart, 5, 3):
        df, dh = f.jacobian(x)[0], h.jacobian(x)[0]
        want = df[1] * dh[2] - df[2] * dh[1]
        assert abs(pb(x)[0] - want) <= 1e-9 * max(1.0, abs(want))


@settings(max_examples=10, deadline=None)
@given(scal, scal, scal, scal, scal, scal)
def test_poisson_antisymmetry_and_leibniz(a, b, c, d, e, g):
    f, h = _fn(a, b, c), _fn(d, e, g)
    prod = AnalyticField(lambda v: [f.fn(v)[0] * h.fn(v)[0]], 3, 1)
    x = np.array([0.4, -1.2, 0.7])
    assert poisson_bracket(DARBOUX, f, h)(x)[0] == pytest.approx(-poisson_bracket(DARBOUX, h, f)(x)[0], abs=1e-10)
    k = _fn(1.0, 0.0, 0.5)
    lhs = poisson_bracket(DARBOUX, prod, k)(x)[0]
    rhs = f(x)[0] * poisson_bracket(DARBOUX, h, k)(x)[0] + h(x)[0] * poisson_bracket(DARBOUX, f, k)(x)[0]
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_bracket_requires_cosymplectic():
    s = get_instance("coupled-strings").structure
    f = AnalyticField(lambda v: [v[2]], 8, 1)
    with pytest.raises((TypeError, ValueError)):
        poisson_bracket(s, f, f)


@pytest.mark.parametrize("name", ["coupled-strings", "membrane-polar", "cosymplectic-darboux"])
def test_fibred_extension(name):
    s = get_instance(name).structure
    F = extend_to_fibred(s)
    assert F.extended_chart.dim == s.chart.dim + s.k
    assert verify_structure(F.structure, samples=30).passed
    assert fibred_reeb_residual(F, samples=30) <= 1e-14


def test_structure_constructor_validates():
    ch = ChartBox(("t", "q", "p"), ((-1, 1),) * 3)
    with pytest.raises(ValueError):
        KPolycosymplecticStructure(ch, 2, VForm.from_terms(ch, 1, [{("t",): 1.0}]),
                                   VForm.from_terms(ch, 2, [{("q", "p"): 1.0}]))
