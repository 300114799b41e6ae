import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepgeom import priors
from sepgeom.errors import DivergenceError, DomainError, NormalizationFailure
from sepgeom.priors import MeasurementRecord, get_prior, get_record, kl

ALL = ("p_B", "p_Bq1trunc", "p_F", "p_Fq1", "uniform_ball")


@pytest.fixture(scope="module")
def rule():
    return priors.ball_rule()


@pytest.mark.parametrize("pid", ALL)
def test_priors_normalised(pid, rule):
    assert get_prior(pid).total_mass(rule) == pytest.approx(1.0, abs=1e-6)


def test_prior_eval_examples():
    r = 0.5
    assert priors.prior_eval("p_B", [r, np.pi / 2, 0.0]) == pytest.approx(r * r / (np.pi**2 * np.sqrt(1 - r * r)))
    assert priors.prior_eval("uniform_ball", [r, np.pi / 2, 1.0]) == pytest.approx(3 * r * r / (4 * np.pi))
    W = (1 - r) / (1 + r)
    expected = 0.75 * r * r * np.log(1 / W) / (np.pi * (1 + np.log(4)))
    assert priors.prior_eval("p_Bq1trunc", [r, np.pi / 2, 0.0]) == pytest.approx(expected)
    with pytest.raises(DomainError):
        priors.prior_eval("p_B", [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        get_prior("p_X")


def test_radial_marginal_of_bures_prior():
    r = np.array([0.2, 0.9, 0.999])
    np.testing.assert_allclose(get_prior("p_B").radial_marginal(r), 4 * r * r / (np.pi * np.sqrt(1 - r * r)))


def test_normalisation_constants():
    assert priors.normalization_constant("fisher") == pytest.approx(1.39350989, abs=1e-7)
    assert priors.normalization_constant("fisher_q1") == pytest.approx(0.24559293, abs=1e-7)
    with pytest.raises(DomainError):
        priors.normalization_constant("bures")


def test_likelihood_examples():
    rec = get_record("z-pair")
    r = 0.5
    assert priors.likelihood(rec, [r, 0.0, 0.0]) == pytest.approx((1 - r * r) / 4)
    assert priors.likelihood(get_record("z-up"), [r, 0.0, 0.0]) == pytest.approx(0.75)
    assert priors.likelihood(get_record("z-up"), [r, np.pi, 0.0]) == pytest.approx(0.25)
    assert priors.likelihood(get_record("empty"), [r, 1.0, 1.0]) == 1.0
    # xyz pairs at the centre: (1/4)^3
    assert priors.likelihood(get_record("xyz-pairs"), [0.0, 0.3, 0.3]) == pytest.approx(1 / 64)


def test_q_extended_likelihood():
    rec = get_record("z-pair", q_extended=True)
    r, q, t1 = 0.6, 2.0, 0.4
    Wq = ((1 - r) / (1 + r)) ** q
    z = r * np.cos(t1)
    expected = (r * r * (1 + Wq) ** 2 - (1 - Wq) ** 2 * z * z) / (4 * r * r * (1 + Wq) ** 2)
    assert priors.likelihood(rec, [r, t1, 0.0, q]) == pytest.approx(expected)
    # q = 1 reduces to the ordinary likelihood
    assert priors.likelihood(rec, [r, t1, 0.0, 1.0]) == pytest.approx(priors.likelihood(get_record("z-pair"), [r, t1, 0.0]))
    with pytest.raises(DomainError):
        priors.likelihood(rec, [r, t1, 0.0])


def test_record_validation():
    with pytest.raises(DomainError):
        MeasurementRecord((1, -1, 0), (0, 0, 0))
    with pytest.raises(DomainError):
        get_record("nope")
    assert MeasurementRecord().empty


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.0, 1.0), st.integers(1, 6))
def test_outcome_probabilities_sum_to_one(c, n):
    p = priors.outcome_probabilities(c, n)
    assert np.all(p >= 0) and np.sum(p) == pytest.approx(1.0)


def test_posterior_empty_record_is_prior():
    p = get_prior("p_B")
    assert priors.posterior(p, get_record("empty")) is p
    with pytest.raises(DomainError):
        priors.posterior(p, get_record("z-pair"), power=2.0)


def test_posterior_normalised(rule):
    post = priors.posterior(get_prior("p_F"), get_record("xyz-pairs"), 0.5, rule)
    assert post.total_mass(rule) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("a,b", [("p_B", "p_F"), ("p_Fq1", "p_Bq1trunc"), ("uniform_ball", "p_B")])
def test_kl_nonnegative_and_zero_on_diagonal(a, b, rule):
    pa, pb = get_prior(a), get_prior(b)
    assert kl(pa, pa, rule) == pytest.approx(0.0, abs=1e-12)
    assert kl(pa, pb, rule) > 0 and kl(pb, pa, rule) > 0


def test_decide_rule():
    assert priors.decide("a", "b", 1.0, 1.0, 0.9, 1.1) == "a"
    assert priors.decide("a", "b", 1.0, 1.0, 1.1, 0.9) == "b"
    assert priors.decide("a", "b", 1.0, 1.0, 1.1, 1.1) == "Undecided"
    assert priors.decide("a", "b", 1.0, 1.0, 1.0 + 1e-6, 0.9) == "Undecided"


def test_clarke_same_prior_undecided(rule):
    v = priors.clarke_compare("p_B", "p_B", get_record("xyz-pairs"), rule=rule)
    assert v.more_noninformative == "Undecided" and v.kl_ab == pytest.approx(0.0, abs=1e-12)


def test_information_gain(rule):
    assert priors.information_gain("p_B", get_record("empty"), rule=rule) == pytest.approx(0.0, abs=1e-12)
    g1 = priors.information_gain("p_B", get_record("z-up"), rule=rule)
    g2 = priors.information_gain("p_B", get_record("z-up-up"), rule=rule)
    assert 0 < g1 < g2
    with pytest.raises(DomainError):
        priors.information_gain("p_B", get_record("z-up", q_extended=True))


def test_q_truncated_prior():
    with pytest.raises(DivergenceError):
        priors.q_truncated_prior(0.5, np.inf)
    with pytest.raises(DomainError):
        priors.q_truncated_prior(2.0, 1.0)
    qt = priors.q_truncated_prior(0.5, 500.0)
    expected = np.pi * (1 + np.log(4)) * np.log(1000) / 24
    assert qt.normalization == pytest.approx(expected)
    assert priors.q_marginal_integral(0.5, 500.0) == pytest.approx(expected, rel=1e-10)
    assert qt.density(0.5, 1.0, 0.0, 1000.0) == 0.0
    assert isinstance(DivergenceError("x"), NormalizationFailure)


def test_biasedness_curve_shape_and_csv():
    c = priors.biasedness_curve(r_lo=0.5, r_hi=0.9, n=5)
    assert c.r.shape == (5,) and set(c.values) == set(priors.RANKED_PRIORS)
    assert len(c.ordering()) == 5
    assert c.to_csv().splitlines()[0] == "r,p_B,p_Bq1trunc,p_F,p_Fq1"
    edge = priors.biasedness_curve("p_B", r_lo=0.9, r_hi=1.0, n=3)
    assert np.all(np.isfinite(edge.values["p_B"]))
    with pytest.raises(DomainError):
        priors.biasedness_curve(r_lo=0.9, r_hi=0.5)
