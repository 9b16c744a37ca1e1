"""First integrals: trace/charpoly families, closed forms, Poisson bracket.

The Vandermonde fit of det(Lambda I + EE) at integer arguments is the
independent oracle for the recursive characteristic-polynomial route; the
Newton identities tie the two families to each other.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerkit import fdcheck, integrals, metrics, tensors
from finslerkit.errors import DimensionError, DomainError, FamilyError, UnknownFieldError
from finslerkit.tensors import PhasePoint


def _sample(spec, seed=0):
    rng = np.random.default_rng(seed)
    x, y = metrics.sample_phase_point(spec, rng)
    return PhasePoint(x, y)


# -- frozen values at the ball center -----------------------------------------

def test_first_integral_set_at_center(funk, origin_point):
    pkt = tensors.compute_packet(funk, origin_point)
    fis = integrals.first_integral_set(pkt)
    np.testing.assert_allclose(fis.EE, np.diag([0.0, 4.0, 4.0]), atol=1e-12)
    np.testing.assert_allclose(fis.f, [8.0, 32.0], atol=1e-11)
    np.testing.assert_allclose(fis.c, [8.0, 16.0], atol=1e-11)
    assert fis.newton_residual < 1e-12
    assert fis.bordered_value == pytest.approx(16.0, rel=1e-11)


def test_paper_closed_forms_at_center(origin_point):
    g1, g2 = integrals.paper_closed_forms(origin_point)
    assert g1 == pytest.approx(-0.25, rel=1e-13)
    assert g2 == pytest.approx(1.0, rel=1e-13)


# -- the two families against the fit oracle ----------------------------------

def test_charpoly_recursion_matches_vandermonde_fit(funk):
    for seed in (1, 2, 3):
        pkt = tensors.compute_packet(funk, _sample(funk, seed))
        EE = integrals.build_EE(pkt)
        f, c = integrals.traces_and_charpoly(EE)
        fitted = integrals.charpoly_fit(EE)
        scale = max(1.0, float(np.abs(c).max()))
        np.testing.assert_allclose(c, fitted[: len(c)], atol=1e-9 * scale)
        # EE annihilates y, so the free coefficient (det) vanishes
        assert abs(fitted[-1]) < 1e-9 * scale


def test_newton_identities_connect_the_families():
    rng = np.random.default_rng(43)
    for _ in range(10):
        # symmetric endomorphism with a known kernel direction, like EE
        m = rng.standard_normal((3, 3))
        m = m + m.T
        y = rng.standard_normal(3)
        m -= np.outer(m @ y, y) / (y @ y)
        f, c = integrals.traces_and_charpoly(m)
        e = integrals.newton_from_traces(f)
        np.testing.assert_allclose(e, c, atol=1e-10 * max(1.0, np.abs(c).max()))
        # closed form for the second elementary symmetric function
        assert e[1] == pytest.approx((f[0] ** 2 - f[1]) / 2.0, rel=1e-10, abs=1e-12)


def test_bordered_determinant_equals_last_charpoly_coeff(funk, sphere):
    for spec, seed in ((funk, 5), (sphere, 6)):
        pkt = tensors.compute_packet(spec, _sample(spec, seed))
        fis = integrals.first_integral_set(pkt)
        want = fis.c[-1] if len(fis.c) else 0.0
        assert fis.bordered_value == pytest.approx(want, abs=1e-8 * max(1.0, abs(want)))


def test_EE_annihilates_y_and_is_zero_homogeneous(funk):
    p = _sample(funk, 7)
    pkt = tensors.compute_packet(funk, p)
    EE = integrals.build_EE(pkt)
    np.testing.assert_allclose(EE @ np.array(p.y), np.zeros(3), atol=1e-10)
    scaled = tensors.compute_packet(funk, PhasePoint(p.x, 3.0 * np.array(p.y)))
    np.testing.assert_allclose(integrals.build_EE(scaled), EE, rtol=1e-9, atol=1e-11)


def test_riemannian_families_are_identically_zero(sphere, skew):
    for spec, seed in ((sphere, 8), (skew, 9)):
        fis = integrals.first_integral_set(tensors.compute_packet(spec, _sample(spec, seed)))
        np.testing.assert_allclose(fis.f, np.zeros(2), atol=1e-10)
        np.testing.assert_allclose(fis.c, np.zeros(2), atol=1e-10)


# -- field registry -------------------------------------------------------------

def test_field_registry_contents(funk, euclid):
    assert integrals.field_ids(funk) == [
        "F", "F2", "c1", "c2", "f1", "f2", "g1_paper", "g2_paper", "one", "s_cl",
    ]
    assert integrals.field_ids(euclid) == ["F", "F2", "c1", "c2", "f1", "f2", "one", "s_cl"]
    four = metrics.catalog(4)["euclidean"]
    assert integrals.field_ids(four) == ["F", "F2", "c1", "c2", "c3", "f1", "f2", "f3", "one", "s_cl"]


def test_evaluate_fields_consistency(funk):
    p = _sample(funk, 10)
    vals = integrals.evaluate_fields(funk, ["one", "F", "F2", "s_cl", "f1", "f2", "c1", "c2"], p)
    assert vals["one"] == 1.0
    assert vals["F2"] == pytest.approx(vals["F"] ** 2, rel=1e-13)
    # the contracted trace s_cl carries the same content as f1 = tr(EE)
    assert vals["f1"] == pytest.approx(2.0 * vals["F"] * vals["s_cl"], rel=1e-11)
    pkt = tensors.compute_packet(funk, p)
    fis = integrals.first_integral_set(pkt)
    assert vals["f1"] == pytest.approx(fis.f[0], rel=1e-12)
    assert vals["c2"] == pytest.approx(fis.c[1], rel=1e-12)


def test_unknown_and_out_of_family_fields(euclid, funk):
    p = PhasePoint((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    with pytest.raises(UnknownFieldError) as err:
        integrals.evaluate_fields(euclid, ["nope"], p)
    assert "f1" in str(err.value)  # the message lists what is registered
    with pytest.raises(FamilyError):
        integrals.evaluate_fields(euclid, ["g1_paper"], p)
    with pytest.raises(UnknownFieldError):
        integrals.field_order(funk, ["f9"])


def test_closed_form_guards():
    with pytest.raises(DimensionError):
        integrals.paper_closed_forms(PhasePoint((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(DomainError):
        integrals.paper_closed_forms(PhasePoint((1.2, 0.0, 0.0), (1.0, 0.0, 0.0)))
    with pytest.raises(DomainError):
        integrals.paper_closed_forms(PhasePoint((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)))


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.3, max_value=3.0))
def test_closed_forms_are_zero_homogeneous(lam):
    x = (0.3, -0.2, 0.1)
    y = np.array([0.8, 0.1, -0.5])
    a = integrals.paper_closed_forms(PhasePoint(x, y))
    b = integrals.paper_closed_forms(PhasePoint(x, lam * y))
    assert b[0] == pytest.approx(a[0], rel=1e-11)
    assert b[1] == pytest.approx(a[1], rel=1e-11)


# -- gradients, spray derivative, bracket ----------------------------------------

def test_field_gradient_against_finite_differences(funk):
    p = PhasePoint((0.2, -0.1, 0.3), (0.9, 0.2, -0.4))
    value, grad_x, grad_y = integrals.field_gradient(funk, "f1", p)

    def f1_at(coords):
        q = PhasePoint(coords[:3], coords[3:])
        return integrals.evaluate_fields(funk, ["f1"], q)["f1"]

    coords = np.array(p.x + p.y)
    assert value == pytest.approx(f1_at(coords), rel=1e-12)
    for k in range(6):
        orders = [0] * 6
        orders[k] = 1
        want = fdcheck.fd_partial(f1_at, coords, orders)
        got = grad_x[k] if k < 3 else grad_y[k - 3]
        assert got == pytest.approx(want, rel=2e-7, abs=1e-8), k


def test_invariants_have_zero_spray_derivative(funk):
    for seed in (11, 12):
        p = _sample(funk, seed)
        for name in ("F2", "f1", "f2", "c1", "c2", "g2_paper"):
            rate = integrals.spray_derivative_of_field(funk, name, p)
            assert abs(rate) < 1e-7 * max(1.0, abs(integrals.evaluate_fields(funk, [name], p)[name]))


def test_bracket_antisymmetry_and_self(funk):
    p = _sample(funk, 13)
    ab = integrals.poisson_bracket(funk, "f1", "g2_paper", p)
    ba = integrals.poisson_bracket(funk, "g2_paper", "f1", p)
    assert ab == pytest.approx(-ba, rel=1e-10, abs=1e-12)
    assert integrals.poisson_bracket(funk, "f1", "f1", p) == pytest.approx(0.0, abs=1e-10)
    assert integrals.poisson_bracket(funk, "one", "f2", p) == pytest.approx(0.0, abs=1e-10)


def test_trace_family_is_in_involution(funk):
    for seed in (14, 15, 16):
        p = _sample(funk, seed)
        value, scale = integrals.poisson_bracket_scaled(funk, "f1", "f2", p)
        assert abs(value) / scale < 1e-8
        value, scale = integrals.poisson_bracket_scaled(funk, "c1", "c2", p)
        assert abs(value) / scale < 1e-8


def test_bracket_with_energy_vanishes_for_invariants(funk):
    # the geodesic flow is the Hamiltonian flow of the energy, so
    # {F2, u} = 0 exactly when the spray derivative of u is 0
    p = _sample(funk, 17)
    for name in ("f1", "c2"):
        value, scale = integrals.poisson_bracket_scaled(funk, "F2", name, p)
        assert abs(value) / scale < 1e-8
