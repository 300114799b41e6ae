import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings, strategies as st

from sepgeom import husimi, metrics, states
from sepgeom.errors import DomainError


def _ball_integral(fn):
    """∫_0^1 fn(r) dr with r = 1 − v², which tames the log singularity at r = 1."""
    return quad(lambda v: 2 * v * float(fn(1 - v * v)), 0, 1, epsabs=0, epsrel=1e-12, limit=200)[0]


def test_husimi_density_examples():
    rho = states.get_chart("bloch_qubit").build([0.6, 0.0, 0.0])  # Bloch vector along +x
    assert husimi.husimi(rho, [1, 0, 0]) == pytest.approx(1.6)
    assert husimi.husimi(rho, [-1, 0, 0]) == pytest.approx(0.4)
    assert husimi.husimi(np.eye(2) / 2, [0, 0, 1]) == pytest.approx(1.0)


@pytest.mark.parametrize("r,q", [(0.3, 1.0), (0.8, 0.5), (0.95, 7.0), (1e-4, 3.0)])
def test_escort_husimi_normalised(r, q):
    dirs, w = husimi.sphere_rule(96, 64)
    vals = husimi.escort_husimi(q, r, 0.7, 1.3, dirs)
    assert np.sum(w * vals) == pytest.approx(1.0, abs=1e-10)


def test_escort_husimi_q1_is_husimi():
    rho = states.get_chart("bloch_qubit").build([0.4, 0.7, 1.3])
    omega = np.array([0.3, -0.2, 0.9])
    assert husimi.escort_husimi(1.0, 0.4, 0.7, 1.3, omega) == pytest.approx(husimi.husimi(rho, omega))
    with pytest.raises(DomainError):
        husimi.escort_husimi(0.1, 0.4, 0.7, 1.3, omega)


def test_fisher_matches_closed_form():
    for r in (0.05, 0.5, 0.9, 0.999):
        p = [r, 1.1, 0.3]
        np.testing.assert_allclose(husimi.fisher_tensor_numeric(p).g,
                                   metrics.closed_form_tensor("husimi_fisher", p).g, rtol=1e-7, atol=1e-12)


def test_fisher_extended_q1_matches_closed_form():
    p = [0.6, 1.1, 0.3, 1.0]
    np.testing.assert_allclose(husimi.fisher_tensor_numeric(p).g, husimi.extended_fisher_q1_tensor(p).g,
                               rtol=1e-7, atol=1e-12)


def test_fisher_product_rule_cross_check():
    p = [0.5, 1.0, 2.0, 1.7]
    np.testing.assert_allclose(husimi.fisher_tensor_product_rule(p).g, husimi.fisher_tensor_numeric(p).g,
                               rtol=1e-5, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.5, 40.0))
def test_escort_fisher_tensor_psd_and_tangential_closed_form(r, q):
    fb = husimi.fisher_blocks(r, q)
    assert fb.rr > 0 and fb.qq > 0 and fb.rr * fb.qq - fb.rq**2 > -1e-12
    # the dθ1² entry is r² times the dn² coefficient ((1+r) f_F_q(W))⁻¹
    assert fb.tan / r**2 == pytest.approx(float(metrics.husimi_tangential(r, q)), rel=1e-6)


def test_escort_fisher_continuous_in_q():
    a = husimi.fisher_blocks(0.5, 1.0)
    b = husimi.fisher_blocks(0.5, 1.0 + 1e-6)
    for k in ("rr", "rq", "qq", "tan"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-5, abs=1e-10)


def test_fisher_domain_errors():
    with pytest.raises(DomainError):
        husimi.fisher_blocks(1.0, 1.0)
    with pytest.raises(DomainError):
        husimi.extended_fisher_q1_tensor([0.5, 1.0, 1.0, 2.0])


def test_unextended_normalisation_constant():
    # ∫ √det g over the ball: 4π ∫ √g_rr g_tan r² dr
    val = _ball_integral(lambda r: 4 * np.pi * np.sqrt(metrics.husimi_radial(r)) * metrics.husimi_tangential(r) * r**2)
    assert val == pytest.approx(1.39350989, abs=5e-8)


def test_bures_marginals():
    assert husimi.bures_marginal_r(0.5) == pytest.approx(np.pi * 0.25 / (2 * np.sqrt(0.75)))
    for q in (0.5, 1.0, 3.0):
        m = husimi.bures_marginal_q_numeric(q)
        assert m.value == pytest.approx(float(metrics.bures_q_marginal(q)), rel=1e-8)


def test_marginal_q_decays_and_peaks():
    lo, mid, hi = (husimi.marginal_q(q).value for q in (0.5, 3.6, 50.0))
    assert mid > lo and mid > hi


def test_curve_csv_format():
    text = husimi.curve_csv("q", [1.0, 2.0], [0.1, 0.2], [1e-9, 2e-9])
    assert text.splitlines() == ["q,value,error_estimate", "1.0,0.1,1e-09", "2.0,0.2,2e-09"]


@pytest.mark.parametrize("q", [0.5, 2.0, 50.0, 500.0])
def test_fisher_blocks_near_pure_states(q):
    # the radial marginal rule puts nodes within 1e-8 of r = 1
    fb = husimi.fisher_blocks(np.array([1 - 2.4e-8, 1 - 1e-12]), q, tol=1e-9)
    assert np.all(np.isfinite(fb.rr)) and np.all(fb.tan > 0)
    assert husimi.marginal_q(q).value > 0
