import json

import numpy as np
import pytest

from sepgeom import integration, metrics, states
from sepgeom.errors import DegenerateTotal, DomainError, NonConvergence, UndefinedBranch
from sepgeom.integration import Region, closed_form_sepprob, integrate

SQRT2 = np.sqrt(2.0)


def _ar_region(q=1.0, predicate="feasible"):
    return integration.region_for("ar_bell", "bures", {"q": q}, predicate)


def test_area_of_reference_half_triangle():
    res = integrate(_ar_region(), lambda p: np.ones(len(p)), tol=1e-10)
    assert res.value == pytest.approx(8 * SQRT2, rel=1e-9)  # ∫_0^8 s/(2√2) ds


def test_ar_bures_volumes_q1():
    tot = integration.total_volume("ar_bell", "bures", {"q": 1.0}, tol=1e-7)
    sep = integration.separable_volume("ar_bell", "bures", {"q": 1.0}, tol=1e-7)
    assert tot.value == pytest.approx(np.pi / 4, rel=1e-6)
    assert sep.value == pytest.approx(np.pi * (SQRT2 - 1) / 4, rel=1e-6)
    assert tot.meta["family"] == "ar_bell" and tot.meta["predicate"] == "feasible"


def test_ar_hs_probability():
    p = integration.sep_probability("ar_bell", "hs", {"q": 1.0}, tol=1e-8)
    assert p.value == pytest.approx(0.5, abs=1e-7)
    assert p.total.meta["kappa"] == metrics.KAPPA_HS


def test_tlb_hs_probability():
    assert integration.sep_probability("tlb", "hs", tol=1e-8).value == pytest.approx(0.5, abs=1e-7)


def test_change_of_variables_q_half():
    """The q = 1/2 element is the q = 1 element pulled back through reparameterize_ar."""
    chart = states.get_chart("ar_bell", q=0.5)
    pts = metrics.sample_interior(chart, 20, seed=7, min_margin=0.02)
    h = 1e-6
    for b, s in pts:
        J = np.empty((2, 2))
        for k, e in enumerate(np.eye(2) * h):
            J[:, k] = (np.array(states.reparameterize_ar(b + e[0], s + e[1]))
                       - np.array(states.reparameterize_ar(b - e[0], s - e[1]))) / (2 * h)
        b1, s1 = states.reparameterize_ar(b, s)
        pulled = float(metrics.ar_element_q1(b1, s1)) * abs(np.linalg.det(J))
        assert float(metrics.ar_element(b, s, 0.5)) == pytest.approx(pulled, rel=1e-4)


def test_monte_carlo_deterministic_and_worker_independent():
    region = _ar_region()
    f = integration.element_function(region.chart, "bures")
    a = integrate(region, f, tol=2e-2, method="monte_carlo", seed=11)
    b = integrate(region, f, tol=2e-2, method="monte_carlo", seed=11)
    c = integrate(region, f, tol=2e-2, method="monte_carlo", seed=11, workers=3)
    assert a.value == b.value == c.value and a.n_evals == c.n_evals
    d = integrate(region, f, tol=2e-2, method="monte_carlo", seed=12)
    assert d.value != a.value
    assert a.value == pytest.approx(np.pi / 4, rel=3e-2)


def test_budget_exhaustion_raises():
    region = _ar_region()
    f = integration.element_function(region.chart, "bures")
    with pytest.raises(NonConvergence):
        integrate(region, f, tol=1e-14, method="monte_carlo", n_max=20000)


def test_auto_method_records_fallback():
    res = integration.total_volume("ar_bell", "bures", {"q": 1.0}, tol=1e-6, method="auto")
    assert res.method == "cubature"
    with pytest.raises(DomainError):
        integration.total_volume("ar_bell", "bures", {"q": 1.0}, method="simpson")


def test_region_validation():
    chart = states.get_chart("bloch_qubit")
    with pytest.raises(DomainError):
        Region(chart, predicate="maybe")
    with pytest.raises(DomainError):
        Region(chart, domain="reference")
    with pytest.raises(DomainError):
        integrate(Region(chart), lambda p: np.ones(len(p)), tol=0.0)


def test_degenerate_total():
    z = integration.QuadratureResult(0.0, 1e-9, 10, "cubature")
    with pytest.raises(DegenerateTotal):
        integration.ratio_with_error(z, z)


def test_closed_form_trivariate_examples():
    cf = lambda a: closed_form_sepprob("trivariate_alpha", a)
    assert cf(1.0) == pytest.approx(0.5)
    assert cf(0.5) == pytest.approx(9 / 32)
    assert cf(-0.5) == pytest.approx(1 / 16)
    assert cf(-1.0) == 0.0 and cf(0.0) == 0.0
    assert cf(np.inf) == 0.75 and cf(-np.inf) == 0.75
    assert cf(-SQRT2) == pytest.approx(5 / 8 * (2 - SQRT2))
    phi = (np.sqrt(5) - 1) / 2
    assert cf(phi) == pytest.approx(-(np.sqrt(5) - 5) / 8 * phi * (phi + 1))
    # large |α| approaches 3/4
    assert cf(1e6) == pytest.approx(0.75, abs=1e-6)
    assert cf(-1e6) == pytest.approx(0.75, abs=1e-6)
    with pytest.raises(UndefinedBranch):
        cf(float("nan"))


def test_closed_form_bivariate_examples():
    cf = lambda a: closed_form_sepprob("bivariate_alpha", a)
    assert cf(0.0) == 0.0 and cf(1 / 3) == 0.0 and cf(-1.0) == 0.0
    assert cf(1.0) == pytest.approx(SQRT2 - 1)
    assert cf(-1.2) == pytest.approx(0.2)
    assert cf(np.inf) == 0.5
    assert cf(1e6) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(DomainError):
        closed_form_sepprob("other", 1.0)


@pytest.mark.parametrize("alpha", [2.0, -0.5, -3.0])
def test_trivariate_hs_numeric_matches_closed_form(alpha):
    p = integration.sep_probability("jaynes_alpha", "hs", {"alpha": alpha}, tol=1e-7)
    assert p.value == pytest.approx(closed_form_sepprob("trivariate_alpha", alpha), abs=1e-5)


def test_parse_grid():
    assert integration.parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert integration.parse_grid("-3:3:0.1")[-1] == 3.0
    assert len(integration.parse_grid("-3:3:0.1")) == 61
    assert integration.parse_grid("0.5, 1,2") == [0.5, 1.0, 2.0]
    with pytest.raises(DomainError):
        integration.parse_grid("0:1:0")


def test_scan_records_singular_points():
    rows = integration.scan("trivariate_alpha", "hs", [-1.0, 2.0], tol=1e-7, compare_closed_form=True)
    assert rows[0].error.startswith("DomainError") and rows[0].closed_form == 0.0
    assert rows[1].error is None and rows[1].prob == pytest.approx(rows[1].closed_form, abs=1e-5)
    csv_text = integration.scan_csv(rows)
    assert csv_text.splitlines()[0].split(",")[-2:] == ["closed_form", "error"]
    payload = json.loads(integration.scan_json(rows, {"seed": 0}))
    assert payload["rows"][0]["prob"] is None and payload["kappa"] == metrics.KAPPA_HS


@pytest.mark.parametrize("alpha", [-1.001, -0.999, -0.001, 0.001])
def test_trivariate_hs_near_singular_alpha(alpha):
    # the feasible triangle degenerates to a sliver here; the polytope path must still be used
    p = integration.sep_probability("jaynes_alpha", "hs", {"alpha": alpha}, tol=1e-8)
    assert p.value == pytest.approx(closed_form_sepprob("trivariate_alpha", alpha), abs=1e-9)
    assert p.value < 1e-3
