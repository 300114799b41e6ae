import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepgeom import states
from sepgeom.errors import DimensionError, DomainError, InfeasiblePoint, NonHermitianInput
from sepgeom.metrics import sample_interior

ALL_CHARTS = [
    ("bloch_qubit", {}),
    ("escort_qubit", {}),
    ("qutrit_v", {}),
    ("qutrit_v", {"extended": True}),
    ("ar_bell", {"q": 1.0}),
    ("ar_bell", {"q": 0.5}),
    ("ar_bell", {"extended": True}),
    ("jaynes_alpha", {"alpha": 0.5}),
    ("jaynes_alpha", {"alpha": -2.0}),
    ("jaynes_alpha_bivariate", {"alpha": 2.0}),
    ("tlb", {}),
    ("tlb_escort", {}),
]


@pytest.mark.parametrize("family,params", ALL_CHARTS, ids=lambda v: str(v))
def test_chart_states_are_density_matrices(family, params):
    chart = states.get_chart(family, **params)
    pts = sample_interior(chart, 1000, seed=3, min_margin=0.0)
    m = chart.matrices(pts)
    assert np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) < 1e-12
    assert np.max(np.abs(np.trace(m, axis1=1, axis2=2) - 1.0)) < 1e-12
    assert np.min(np.linalg.eigvalsh(m)[:, 0]) > -1e-10


def test_density_matrix_validation():
    with pytest.raises(NonHermitianInput):
        states.DensityMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(InfeasiblePoint):
        states.DensityMatrix(np.eye(2))
    with pytest.raises(InfeasiblePoint):
        states.DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(DimensionError):
        states.DensityMatrix(np.eye(5) / 5)


def test_build_rejects_bad_points():
    chart = states.get_chart("ar_bell", q=1.0)
    with pytest.raises(DomainError):
        chart.build([5.0, 1.0])  # outside the box
    with pytest.raises(InfeasiblePoint):
        chart.build([2.0, 1.0])  # s - 2√2 b < 0
    with pytest.raises(DomainError):
        states.get_chart("no_such_family")
    with pytest.raises(DomainError):
        states.get_chart("jaynes_alpha", alpha=0.0)
    with pytest.raises(DomainError):
        states.get_chart("jaynes_alpha", alpha=-1.0)


def test_ar_bell_weights_at_q1():
    chart = states.get_chart("ar_bell", q=1.0)
    b, s = 0.5, 3.0
    w = states.bell_weights(chart.build([b, s]))
    r8 = 2 * np.sqrt(2)
    np.testing.assert_allclose(w, [(s + r8 * b) / 16, (8 - s) / 16, (8 - s) / 16, (s - r8 * b) / 16], atol=1e-14)


def test_tlb_origin_is_maximally_mixed():
    rho = states.build_state(states.get_chart("tlb"), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(rho.matrix, np.eye(4) / 4, atol=1e-15)
    assert states.is_separable(rho)


def test_escort_at_q1_is_identity_map():
    e = states.get_chart("escort_qubit")
    b = states.get_chart("bloch_qubit")
    p = [0.7, 1.1, 4.0]
    np.testing.assert_allclose(e.build(p + [1.0]).matrix, b.build(p).matrix, atol=1e-14)
    assert np.isclose(states.escort_radius(0.5, 2.0), 0.8)  # (1.5² − 0.5²)/(1.5² + 0.5²)


def test_escort_continuous_in_q():
    e = states.get_chart("escort_qubit")
    p = [0.6, 0.4, 2.0]
    m1 = e.build(p + [1.0]).matrix
    for dq in (1e-3, 1e-5):
        assert np.max(np.abs(e.build(p + [1.0 + dq]).matrix - m1)) < 1.0 * dq


def test_bell_state_partial_transpose():
    phi = states.BELL_PROJECTORS[0]
    pt = states.partial_transpose(phi)
    assert np.isclose(np.linalg.eigvalsh(pt)[0], -0.5)
    assert not states.is_separable(phi)
    assert states.is_separable(np.eye(4) / 4)
    assert states.is_separable(np.eye(2) / 2)
    with pytest.raises(DimensionError):
        states.partial_transpose(np.eye(3) / 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=32, max_size=32), st.sampled_from(["A", "B"]))
def test_partial_transpose_involution(vals, sub):
    a = np.array(vals[:16]).reshape(4, 4) + 1j * np.array(vals[16:]).reshape(4, 4)
    np.testing.assert_allclose(states.partial_transpose(states.partial_transpose(a, sub), sub), a)
    # partial transposes on A and B compose to the full transpose
    np.testing.assert_allclose(states.partial_transpose(states.partial_transpose(a, "A"), "B"), a.T)


def test_reparameterize_ar_examples():
    assert states.reparameterize_ar(0.0, 4.0) == pytest.approx((0.0, 4.0))
    b1, s1 = states.reparameterize_ar(0.5, 3.0)
    assert (b1, s1) == pytest.approx((2 / 3, 22 / 9))  # den = 1 + 9 - 24 + 32 = 18
    with pytest.raises(InfeasiblePoint):
        states.reparameterize_ar(2.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_reparameterize_ar_preserves_state(u, v):
    # sample the q=1/2 feasible triangle |b| ≤ s/(2√2), s ≤ 8
    s = 8.0 * v
    b = (2 * u - 1) * s / (2 * np.sqrt(2))
    b1, s1 = states.reparameterize_ar(b, s)
    w_half = states.get_chart("ar_bell", q=0.5).weights(np.array([[b, s]]))
    w_one = states.get_chart("ar_bell", q=1.0).weights(np.array([[b1, s1]]))
    np.testing.assert_allclose(w_half, w_one, atol=1e-12)


def test_eigensystem_orders_ascending():
    lam, vec = states.eigensystem(np.diag([0.7, 0.3]))
    np.testing.assert_allclose(lam, [0.3, 0.7])
    assert np.allclose(np.abs(vec), [[0, 1], [1, 0]])
