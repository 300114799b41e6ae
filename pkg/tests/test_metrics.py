import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepgeom import metrics, states
from sepgeom.errors import BoundaryPoint, DegenerateState, DomainError
from sepgeom.metrics import FFunction, f_eval


# ------------------------------------------------------------- f-functions


def test_f_examples():
    assert f_eval("bures", 0.25) == pytest.approx(0.625)
    assert f_eval("wigner_yanase", 0.25) == pytest.approx(0.5625)
    assert f_eval("fisher_husimi", 1.0) == pytest.approx(3.0)
    assert f_eval("fisher_husimi_q", 1.0, q=2.0) == pytest.approx(0.75)
    assert f_eval("fisher_husimi", 1 - 1e-6) == pytest.approx(3.0, abs=1e-4)
    # f_F(1/2) from the closed form: (1-t)^2 (1-t^2) / ((1+t) (1 - t^2 + 2 t log t))
    t = 0.5
    expected = (1 - t) ** 2 * (1 - t * t) / ((1 + t) * (1 - t * t + 2 * t * np.log(t)))
    assert f_eval("fisher_husimi", t) == pytest.approx(expected, rel=1e-12)


def test_f_domain_errors():
    with pytest.raises(DomainError):
        f_eval("bures", 0.0)
    with pytest.raises(DomainError):
        f_eval("bures", 1.5)
    with pytest.raises(DomainError):
        f_eval("bures_q", 1.0, q=2.0)
    with pytest.raises(DomainError):
        FFunction("bures_q")
    with pytest.raises(DomainError):
        FFunction("nope")


@pytest.mark.parametrize("q", [0.5, 1.5, 3.0])
def test_bures_q_increasing(q):
    t = np.linspace(0.01, 0.99, 400)
    assert np.all(np.diff(f_eval("bures_q", t, q=q)) > 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(0.5, 50.0))
def test_husimi_q_f_positive_and_q1_consistent(t, q):
    v = f_eval("fisher_husimi_q", t, q=q)
    assert np.isfinite(v) and v > 0
    assert f_eval("fisher_husimi_q", t, q=1.0) == pytest.approx(f_eval("fisher_husimi", t), rel=1e-10)


def test_husimi_q_f_continuous_at_one():
    for q in (0.5, 2.0, 7.0):
        assert f_eval("fisher_husimi_q", 1 - 1e-7, q=q) == pytest.approx(3 / q**2, rel=1e-5)


# ------------------------------------------------------------ tensors


def test_bloch_bures_matches_closed_form():
    chart = states.get_chart("bloch_qubit")
    for p in ([0.5, 1.0, 2.0], [0.1, 0.3, 5.0], [0.9, 2.5, 0.1]):
        g = metrics.bures_tensor(chart, p).g
        np.testing.assert_allclose(g, metrics.closed_form_tensor("bloch_bures", p).g, atol=1e-8)


def test_qutrit_bures_matches_closed_form():
    chart = states.get_chart("qutrit_v")
    p = [0.6, 0.3, 1.0, 2.0]
    np.testing.assert_allclose(metrics.bures_tensor(chart, p).g,
                               metrics.closed_form_tensor("qutrit_bures", p).g, atol=1e-8)


def test_ar_bures_matches_closed_form_and_element():
    chart = states.get_chart("ar_bell", q=1.0)
    p = [0.4, 3.0]
    g = metrics.bures_tensor(chart, p)
    np.testing.assert_allclose(g.g, metrics.closed_form_tensor("ar_bures_q1", p).g, atol=1e-9)
    assert metrics.volume_element(g).value == pytest.approx(float(metrics.ar_element_q1(*p)), rel=1e-7)
    g_half = metrics.bures_tensor(states.get_chart("ar_bell", q=0.5), p)
    assert metrics.volume_element(g_half).value == pytest.approx(float(metrics.ar_element(*p, 0.5)), rel=1e-7)


def test_jaynes_hs_element_constant():
    chart = states.get_chart("jaynes_alpha", alpha=0.5)
    pts = metrics.sample_interior(chart, 20, seed=1)
    vals = metrics.element_batch(chart, pts, "hs")
    np.testing.assert_allclose(vals, metrics.trivariate_hs_element(0.5), rtol=1e-9)


def test_jaynes_bures_element_closed_form():
    chart = states.get_chart("jaynes_alpha", alpha=2.0)
    pts = metrics.sample_interior(chart, 10, seed=2, min_margin=1e-2)
    vals = metrics.element_batch(chart, pts, "bures")
    np.testing.assert_allclose(vals, metrics.trivariate_bures_element(pts[:, 0], pts[:, 1], 2.0), rtol=1e-7)


BELL_CHARTS = [("ar_bell", {"q": 1.0}), ("ar_bell", {"q": 2.0}), ("tlb", {}), ("jaynes_alpha", {"alpha": 3.0})]


@pytest.mark.parametrize("family,params", BELL_CHARTS, ids=lambda v: str(v))
def test_commuting_families_reduce_to_classical_fisher(family, params):
    chart = states.get_chart(family, **params)
    pts = metrics.sample_interior(chart, 25, seed=4, min_margin=1e-2)
    fisher = metrics.classical_fisher_batch(chart, pts)
    for m in ("bures", "wigner_yanase"):
        np.testing.assert_allclose(metrics.tensor_batch(chart, pts, m), fisher / 4, rtol=1e-6, atol=1e-10)


CHARTS = [("bloch_qubit", {}), ("escort_qubit", {}), ("qutrit_v", {}), ("qutrit_v", {"extended": True}),
          ("ar_bell", {"extended": True}), ("tlb_escort", {})]


@pytest.mark.parametrize("family,params", CHARTS, ids=lambda v: str(v))
def test_hubner_equals_monotone_bures(family, params):
    chart = states.get_chart(family, **params)
    pts = metrics.sample_interior(chart, 30, seed=5, min_margin=1e-2)
    a = metrics.tensor_batch(chart, pts, "bures")
    b = metrics.tensor_batch(chart, pts, FFunction("bures"))
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(0.01, 6.2), st.floats(0.55, 5.0))
def test_escort_tensor_positive_semidefinite(r, t1, t2, q):
    chart = states.get_chart("escort_qubit")
    g = metrics.bures_tensor(chart, [r, t1, t2, q]).g
    assert np.min(np.linalg.eigvalsh(g)) > -1e-9 * np.max(np.abs(g))
    np.testing.assert_allclose(g, g.T)


def test_extended_bures_closed_form_and_nullity():
    chart = states.get_chart("escort_qubit")
    p = [0.5, 1.0, 2.0, 1.7]
    t = metrics.bures_tensor(chart, p)
    np.testing.assert_allclose(t.g, metrics.closed_form_tensor("extended_bures", p).g, atol=1e-8)
    assert metrics.volume_element(t).null_flag
    assert metrics.nullity_check(chart, "bures")
    assert not metrics.nullity_check(states.get_chart("bloch_qubit"), "bures")
    with pytest.raises(DomainError):
        metrics.nullity_check(chart, "bures", n_samples=5)


def test_hs_tensor_kappa_scaling():
    chart = states.get_chart("bloch_qubit")
    p = [0.3, 1.0, 1.0]
    g1 = metrics.hs_tensor(chart, p, kappa=1.0).g
    np.testing.assert_allclose(metrics.hs_tensor(chart, p).g, metrics.KAPPA_HS * g1)
    # tr(dρ dρ) = |dr|²/2 for a qubit
    np.testing.assert_allclose(np.diag(g1), [0.5, 0.5 * 0.09, 0.5 * 0.09 * np.sin(1.0) ** 2], atol=1e-9)


def test_volume_element_examples():
    v = metrics.volume_element(np.diag([1.0, 4.0]))
    assert v.value == pytest.approx(2.0) and not v.null_flag
    v = metrics.volume_element(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert v.value == pytest.approx(0.0, abs=1e-7) and v.null_flag


def test_numeric_differential_matches_analytic():
    chart = states.get_chart("bloch_qubit")
    p = np.array([0.4, 0.9, 2.0])
    exact = chart.tangents(p[None])[0]
    for i in range(3):
        np.testing.assert_allclose(metrics.numeric_differential(chart, p, i), exact[i], atol=1e-9)


def test_numeric_differential_boundary_handling():
    chart = states.get_chart("bloch_qubit")
    p = [1.0 - 1e-9, 1.0, 1.0]
    with pytest.raises(BoundaryPoint):
        metrics.numeric_differential(chart, p, 0, on_boundary="raise")
    with pytest.warns(metrics.BoundaryStencilWarning):
        d = metrics.numeric_differential(chart, p, 0)
    exact = chart.tangents(np.array([p]))[0, 0]
    np.testing.assert_allclose(d, exact, atol=1e-7)


def test_step_size_robustness():
    chart = states.get_chart("escort_qubit")
    p = np.array([[0.5, 1.0, 2.0, 1.5]])
    ref = metrics.tensor_batch(chart, p, "bures")
    for h in (1e-3, 1e-4, 1e-5):
        np.testing.assert_allclose(metrics.tensor_batch(chart, p, "bures", h=h), ref, rtol=1e-5, atol=1e-9)


def test_degenerate_state_detected():
    chart = states.get_chart("bloch_qubit")
    with pytest.raises(DegenerateState):
        metrics.tensor_batch(chart, [1.0, 1.0, 1.0], "bures")


def test_closed_form_errors():
    with pytest.raises(DomainError):
        metrics.closed_form_tensor("nope", [0.5])
    with pytest.raises(DomainError):
        metrics.closed_form_tensor("bloch_bures", [1.5, 0.0, 0.0])
    with pytest.raises(DomainError):
        metrics.closed_form_tensor("ar_bures_q1", [0.0, 3.0])


def test_tlb_sphere_metric_matches_numeric():
    angles = (0.9, 1.2, 0.7)
    x, y, z = metrics.tlb_from_sphere(*angles)
    chart = states.get_chart("tlb")
    # pull back the TLB Bures tensor through the angle map by finite differences
    h = 1e-6
    J = np.empty((3, 3))
    for k in range(3):
        a = list(angles)
        a[k] += h
        b = list(angles)
        b[k] -= h
        J[:, k] = (np.array(metrics.tlb_from_sphere(*a)) - np.array(metrics.tlb_from_sphere(*b))) / (2 * h)
    g = J.T @ metrics.bures_tensor(chart, [x, y, z]).g @ J
    np.testing.assert_allclose(g, metrics.closed_form_tensor("tlb_sphere", angles).g, atol=1e-6)
