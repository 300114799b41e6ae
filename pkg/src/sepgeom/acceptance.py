"""Acceptance suite: fifteen numbered criteria with frozen reference values.

Each ``criterion_N`` function returns a :class:`CriterionResult` made of
individual :class:`Check` objects.  The suite is shared by the pytest
acceptance module and the ``selftest`` CLI subcommand, so both report the
same PASS/FAIL verdicts.

Reference values below are literal published numbers or exact expressions;
they are never recomputed from the code under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import husimi, integration, metrics, priors, states
from .errors import DomainError, SepGeomError

SQRT2 = math.sqrt(2.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ----------------------------------------------------------------- results


@dataclass
class Check:
    name: str
    value: object
    expected: object
    tol: Optional[float]
    passed: bool
    info: dict = field(default_factory=dict)


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list
    seconds: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    @property
    def failed_checks(self) -> list:
        return [c for c in self.checks if not c.passed]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        txt = f"{status} criterion {self.number:2d}: {self.title}"
        if not self.passed:
            txt += " -- failed: " + "; ".join(
                f"{c.name} got {_fmt(c.value)} expected {_fmt(c.expected)}" for c in self.failed_checks[:3])
        return txt

    def as_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        if not timing:  # keeps reports byte-identical between runs
            d.pop("seconds")
        return d


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.8g}"
    return str(v)


def _close(name: str, value: float, expected: float, tol: float, rel: bool = False, **info) -> Check:
    value, expected = float(value), float(expected)
    bound = tol * abs(expected) if rel else tol
    ok = bool(np.isfinite(value) and abs(value - expected) <= bound)
    return Check(name, value, expected, tol, ok, dict(info, relative=rel, deviation=abs(value - expected)))


def _true(name: str, cond: bool, value=None, expected=True, **info) -> Check:
    return Check(name, value if value is not None else bool(cond), expected, None, bool(cond), info)


# ------------------------------------------------------------- criteria 1-3


def criterion_1(seed: int = 0, workers: int = 1) -> list:
    """AR Bures total volume π/4 for q ∈ {0.5, 1, 2}."""
    out = []
    res = integration.total_volume("ar_bell", "bures", {"q": 1.0}, tol=1e-7)
    out.append(_close("total q=1 (cubature)", res.value, math.pi / 4, 1e-6, rel=True, abs_error=res.abs_error))
    for q in (0.5, 2.0):
        res = integration.total_volume("ar_bell", "bures", {"q": q}, tol=1e-3, seed=seed,
                                       method="monte_carlo", workers=workers)
        out.append(_close(f"total q={q} (Monte Carlo)", res.value, math.pi / 4, 1e-3, rel=True,
                          abs_error=res.abs_error, seed=seed))
    return out


def criterion_2(seed: int = 0, workers: int = 1) -> list:
    """AR Bures separable volume π(√2 − 1)/4 for q ∈ {0.5, 1}."""
    out = []
    for q, tol in ((0.5, 1e-4), (1.0, 1e-7)):
        res = integration.separable_volume("ar_bell", "bures", {"q": q}, tol=tol)
        out.append(_close(f"separable q={q}", res.value, math.pi * (SQRT2 - 1) / 4, 2e-3, abs_error=res.abs_error))
    return out


def criterion_3(seed: int = 0, workers: int = 1) -> list:
    """AR separability probabilities (Bures, HS, Wigner–Yanase) at q = 1."""
    bures = integration.sep_probability("ar_bell", "bures", {"q": 1.0}, tol=1e-7)
    hs = integration.sep_probability("ar_bell", "hs", {"q": 1.0}, tol=1e-9)
    wy = integration.sep_probability("ar_bell", "wigner_yanase", {"q": 1.0}, tol=1e-7)
    return [
        _close("Bures probability", bures.value, SQRT2 - 1, 1e-6),
        _close("HS total", hs.total.value, 1 / (4 * SQRT2), 1e-9),
        _close("HS separable", hs.separable.value, 1 / (8 * SQRT2), 1e-9),
        _close("HS probability", hs.value, 0.5, 1e-9),
        _close("WY total equals Bures", wy.total.value, bures.total.value, 1e-3),
        _close("WY separable equals Bures", wy.separable.value, bures.separable.value, 1e-3),
        _close("WY probability equals Bures", wy.value, bures.value, 1e-3),
    ]


# -------------------------------------------------------------- criterion 4

#: Branch points of the trivariate piecewise formula (scan points within 0.02 are skipped).
TRIVARIATE_BRANCHES = (-math.sqrt(3.0), -SQRT2, -1.0, 0.0, GOLDEN, 1.0)


def _near(a: float, points: Iterable[float], dist: float = 0.02) -> bool:
    return any(abs(a - p) < dist for p in points)


def _numeric_prob(model: str, alpha: float, metric: str = "hs", tol: float = 1e-8):
    return integration.sep_probability(model, metric, {"alpha": alpha}, tol=tol)


def criterion_4(seed: int = 0, workers: int = 1) -> list:
    """Trivariate α-model HS probabilities against the piecewise closed form."""
    out = []
    grid = [a for a in integration.parse_grid("-3:3:0.1") if not _near(a, TRIVARIATE_BRANCHES)]
    rows = integration.scan("trivariate", "hs", grid, tol=1e-8, compare_closed_form=True)
    worst, n_bad, failures = 0.0, 0, []
    for row in rows:
        if row.error:
            failures.append(f"{row.param}: {row.error}")
            continue
        dev = abs(row.prob - row.closed_form)
        worst = max(worst, dev)
        if dev > max(3 * row.prob_err, 1e-6):
            n_bad += 1
    out.append(_true("grid scan matches closed form", n_bad == 0 and not failures,
                     value=f"{len(rows)} points, {n_bad} mismatches, max deviation {worst:.2e}",
                     expected="no mismatch", failures=failures))
    out.append(_close("alpha=2 probability", _numeric_prob("trivariate", 2.0).value, 5 / 8, 1e-6))
    for a in (1.0, 1.5, 4.0):
        out.append(_close(f"alpha={a} probability", _numeric_prob("trivariate", a).value,
                          0.75 - 0.25 / a, 1e-6))
    out.append(_close("alpha=golden ratio probability", _numeric_prob("trivariate", GOLDEN).value,
                      (5 - math.sqrt(5.0)) / 8 * GOLDEN * (1 + GOLDEN), 1e-6))
    for a in (-1.0, 0.0):
        out.append(_close(f"alpha={a} closed form", integration.closed_form_sepprob("trivariate", a), 0.0, 0.0))
        for eps in (-1e-3, 1e-3):
            out.append(_close(f"alpha={a}{eps:+g} (limit)", _numeric_prob("trivariate", a + eps).value, 0.0, 1e-3))
    # The value printed for α = 1/2; the piecewise formula itself gives 9/32 there.
    out.append(_close("alpha=1/2 probability (printed 37/64)", _numeric_prob("trivariate", 0.5).value,
                      37 / 64, 1e-3))
    return out


# -------------------------------------------------------------- criteria 5-8


def criterion_5(seed: int = 0, workers: int = 1) -> list:
    """Trivariate Bures volumes and probability at α = 2."""
    res = _numeric_prob("trivariate", 2.0, metric="bures", tol=1e-6)
    return [
        _close("total", res.total.value, 0.35368, 2e-3),
        _close("separable (printed 0.2000322)", res.separable.value, 0.2000322, 2e-3),
        _close("probability", res.value, 0.566392, 2e-3),
    ]


BIVARIATE_BRANCHES = ((1 - 2 * math.sqrt(7.0)) / 3, -1.0, 0.0, 1 / 3, GOLDEN)


def criterion_6(seed: int = 0, workers: int = 1) -> list:
    """Bivariate α-model: branches, zero interval, large-α limit and HS totals."""
    out = []
    grid = [a for a in integration.parse_grid("-3:3:0.1") if not _near(a, BIVARIATE_BRANCHES)]
    rows = integration.scan("bivariate", "hs", grid, tol=1e-8, compare_closed_form=True)
    worst = max(abs(r.prob - r.closed_form) for r in rows if not r.error)
    errors = [r.error for r in rows if r.error]
    out.append(_true("grid scan matches closed form", worst <= 1e-6 and not errors,
                     value=f"{len(rows)} points, max deviation {worst:.2e}", expected="≤ 1e-6", errors=errors))
    out.append(_close("alpha=1 probability", _numeric_prob("bivariate", 1.0).value, SQRT2 - 1, 1e-6))
    for a in (-0.9, -0.5, 0.2, 1 / 3):
        out.append(_close(f"alpha={a:.4g} probability (zero interval)", _numeric_prob("bivariate", a).value,
                          0.0, 1e-9))
    p50 = _numeric_prob("bivariate", 50.0).value
    out.append(_close("alpha=50 probability vs closed form", p50, integration.closed_form_sepprob("bivariate", 50.0),
                      1e-6))
    # √(α(α+1)) − α = 1/2 − 1/(8α) + O(α⁻²): at α = 50 the gap to 1/2 is 1/400.
    out.append(_close("alpha=50 approaches 1/2", p50, 0.5, 1 / 400 + 1e-5))
    for a in (0.5, 1.0, 2.0):
        tot = integration.total_volume("bivariate", "hs", {"alpha": a}, tol=1e-9).value
        out.append(_close(f"HS total alpha={a}", tot, 2 * math.sqrt(3 * a**4 - 2 * a**2 + 3) / (4 * a**2 + 4 * a),
                          1e-3))
    return out


def criterion_7(seed: int = 0, workers: int = 1) -> list:
    """One-parameter Jaynes state: Bures, Wigner–Yanase and HS probabilities."""
    b = integration.sep_probability("jaynes_one_param", "bures", tol=1e-8)
    wy = integration.sep_probability("jaynes_one_param", "wigner_yanase", tol=1e-8)
    hs = integration.sep_probability("jaynes_one_param", "hs", tol=1e-8)
    target = 2 * math.asin(SQRT2 - 1) / math.pi
    return [
        _close("Bures probability", b.value, target, 1e-3),
        _close("Bures probability (printed 0.271887)", b.value, 0.271887, 1e-3),
        _close("WY probability", wy.value, target, 1e-3),
        _close("HS probability (printed 0.343602)", hs.value, 0.343602, 1e-3),
    ]


def criterion_8(seed: int = 0, workers: int = 1) -> list:
    """Two-qubit TLB family: Bures and HS volumes and probabilities."""
    b = integration.sep_probability("tlb", "bures", tol=1e-7)
    hs = integration.sep_probability("tlb", "hs", tol=1e-9)
    return [
        _close("Bures total", b.total.value, math.pi**2 / 8, 1e-3),
        _close("Bures separable", b.separable.value, math.pi * (4 - math.pi) / 8, 1e-3),
        _close("Bures probability", b.value, (4 - math.pi) / math.pi, 1e-3),
        _close("HS total", hs.total.value, 1 / (6 * SQRT2), 1e-3),
        _close("HS separable", hs.separable.value, 1 / (12 * SQRT2), 1e-3),
        _close("HS probability", hs.value, 0.5, 1e-3),
    ]


# ------------------------------------------------------------- criterion 9


def _null_flags(chart, pts, metric="bures") -> np.ndarray:
    G = metrics.tensor_batch(chart, pts, metric, strict=False)
    return metrics.volume_elements(G)[1]


def criterion_9(seed: int = 0, workers: int = 1) -> list:
    """Nullity of the volume element for the four extended families."""
    out = []
    for label, chart in (("escort qubit (4D)", states.escort_qubit()),
                         ("qutrit extension (5D)", states.qutrit_v(extended=True)),
                         ("TLB escort (4D)", states.get_chart("tlb_escort"))):
        out.append(_true(f"{label} null at 30 points", metrics.nullity_check(chart, "bures", 30, seed=seed)))
    ext = states.ar_bell(extended=True)
    for q in (0.5, 1.0, 2.0):
        base = metrics.sample_interior(states.ar_bell(q), 30, seed=seed)
        pts = np.column_stack([base, np.full(len(base), q)])
        out.append(_true(f"AR (b, sigma2, q) null at 30 points, q={q}", bool(np.all(_null_flags(ext, pts)))))
    # negative controls: nondegenerate elements must not be flagged
    out.append(_true("control: Bloch ball Bures not null",
                     not metrics.nullity_check(states.bloch_qubit(), "bures", 30, seed=seed)))
    out.append(_true("control: AR q=2 Bures not null",
                     not metrics.nullity_check(states.ar_bell(2.0), "bures", 30, seed=seed)))
    return out


# ------------------------------------------------------------ criterion 10

#: (prior a, prior b, power) → (kl_ab, kl_ba, kl_post_ab, kl_post_ba) as published.
KL_TABLE = (
    ("p_B", "p_Bq1trunc", 0.5, (0.101846, 0.0661775, 0.093849, 0.114669)),
    ("p_B", "p_Bq1trunc", 1.0, (0.101846, 0.0661775, 0.169782, 0.197657)),
    ("p_F", "p_Fq1", 1.0, (0.229666, 0.170145, 0.70766, 0.0641738)),
    ("p_B", "p_Fq1", 0.5, (0.148269, 0.0989669, 0.283218, 0.0842879)),
    ("p_Bq1trunc", "p_Fq1", 0.5, (0.105463, 0.0914175, 0.245602, 0.0408236)),
    ("p_Bq1trunc", "p_F", 0.5, (0.0191948, 0.0234599, 0.0143147, 0.1047772)),
)

EXPECTED_ORDER = ["p_Fq1", "p_B", "p_Bq1trunc", "p_F"]


def criterion_10(seed: int = 0, workers: int = 1) -> list:
    """Relative-entropy statistics and the comparative-noninformativity order."""
    out = []
    record = priors.get_record("xyz-pairs")
    names = ("kl_ab", "kl_ba", "kl_post_ab", "kl_post_ba")
    for a, b, power, expected in KL_TABLE:
        v = priors.clarke_compare(a, b, record, power=power)
        got = (v.kl_ab, v.kl_ba, v.kl_post_ab, v.kl_post_ba)
        for nm, g, e in zip(names, got, expected):
            out.append(_close(f"{nm}({a}, {b}; power {power})", g, e, 1e-4))
    order, verdicts = priors.rank(priors.RANKED_PRIORS, record)
    out.append(Check("Clarke ordering", order, EXPECTED_ORDER, None, order == EXPECTED_ORDER,
                     {"verdicts": [v.as_dict() for v in verdicts]}))
    return out


def criterion_11(seed: int = 0, workers: int = 1) -> list:
    """Normalisation constants of the two Husimi priors."""
    return [
        _close("Husimi Fisher constant", priors.normalization_constant("fisher"), 1.39350989, 1e-4),
        _close("extended Husimi Fisher constant (q=1 slice)", priors.normalization_constant("fisher_q1"),
               0.24559293, 1e-4),
    ]


def criterion_12(seed: int = 0, workers: int = 1) -> list:
    """Closed-form Bures q-marginal and the Husimi q-marginal peak."""
    out = []
    for q in (0.5, 1.0, 5.0):
        num = husimi.bures_marginal_q_numeric(q)
        out.append(_close(f"Bures q-marginal q={q}", num.value, math.pi * (1 + math.log(4)) / (24 * q), 1e-6,
                          rel=True, error_estimate=num.error_estimate))
    loc, height = husimi.marginal_q_peak()
    out.append(_close("Husimi q-marginal peak location", loc, 3.59782, 0.05))
    out.append(_close("Husimi q-marginal peak height", height, 0.448488, 0.01))
    return out


def criterion_13(seed: int = 0, workers: int = 1) -> list:
    """Information gains, unextended and q-extended."""
    pb = priors.get_prior("p_B")
    g_pair = priors.information_gain(pb, priors.get_record("z-pair"))
    g_single = priors.information_gain(pb, priors.get_record("z-up"))
    g_same = priors.information_gain(pb, priors.get_record("z-up-up"))
    ext = priors.q_truncated_prior(0.5, 500.0)
    e_pair = ext.information_gain(priors.get_record("z-pair", q_extended=True))
    e_single = ext.information_gain(priors.get_record("z-up", q_extended=True))
    e_same = ext.information_gain(priors.get_record("z-up-up", q_extended=True))
    note = {"record_mapping": priors.EXTENDED_RECORD_ASSUMPTION}
    return [
        _close("pair gain = 7/6 - log 3", g_pair, 7 / 6 - math.log(3), 1e-6),
        _close("two-same gain = 59/30 - log 5", g_same, 59 / 30 - math.log(5), 1e-6),
        _close("single gain", g_single, 0.140186, 1e-4),
        _close("extended pair gain", e_pair, 0.0597923, 1e-3, **note),
        _close("extended single gain", e_single, 0.134651, 1e-3, **note),
        _close("extended two-same gain", e_same, 0.349601, 1e-3, **note),
    ]


def criterion_14(seed: int = 0, workers: int = 1) -> list:
    """Pointwise biasedness ordering near the pure states."""
    curve = priors.biasedness_curve(priors.RANKED_PRIORS, 0.995, 0.9999, 50)
    orders = curve.ordering()
    ok = [o == EXPECTED_ORDER for o in orders]
    first_bad = next((i for i, g in enumerate(ok) if not g), None)
    info = {}
    if first_bad is not None:
        info = {"first_violation_r": float(curve.r[first_bad]), "order_there": orders[first_bad],
                "order_at_r_hi": orders[-1]}
    return [Check("ordering p_Fq1 > p_B > p_Bq1trunc > p_F at 50 points", f"{sum(ok)}/50 points",
                  "50/50 points", None, all(ok), info)]


# ------------------------------------------------------------ criterion 15


def _all_charts():
    for fid in states.FAMILY_IDS:
        yield states.get_chart(fid, **({"alpha": 2.0} if fid.startswith("jaynes") else {}))


def criterion_15(seed: int = 0, workers: int = 1) -> list:
    """Property suites: Hübner vs monotone, commuting reduction, tangential forms,
    AR reparameterisation, Monte Carlo determinism."""
    out = []
    worst = 0.0
    for chart in _all_charts():
        pts = metrics.sample_interior(chart, 100, seed=seed)
        A = metrics.tensor_batch(chart, pts, "bures", strict=False)
        B = metrics.tensor_batch(chart, pts, metrics.FFunction("bures"), strict=False)
        scale = np.abs(A).max(axis=(1, 2))[:, None, None]
        worst = max(worst, float(np.max(np.abs(A - B) / scale)))
    out.append(_close("Hübner vs monotone(f=bures), all charts", worst, 0.0, 1e-8))

    worst = 0.0
    for fid in ("ar_bell", "jaynes_alpha", "jaynes_alpha_bivariate", "tlb"):
        chart = states.get_chart(fid, **({"alpha": 2.0} if fid.startswith("jaynes") else {}))
        pts = metrics.sample_interior(chart, 50, seed=seed)
        F = metrics.classical_fisher_batch(chart, pts) / 4
        for f in ("bures", "wigner_yanase"):
            G = metrics.tensor_batch(chart, pts, metrics.FFunction(f))
            worst = max(worst, float(np.max(np.abs(G - F) / np.abs(F).max(axis=(1, 2))[:, None, None])))
    out.append(_close("commuting families: monotone = classical Fisher / 4", worst, 0.0, 1e-8))

    worst = 0.0
    chart = states.bloch_qubit()
    for r in (0.1, 0.3, 0.5, 0.7, 0.9):
        W = (1 - r) / (1 + r)
        g = metrics.bures_tensor(chart, [r, 1.1, 0.4]).g
        worst = max(worst, abs(g[1, 1] / (r * r / (4 * (1 + r) * metrics.f_eval("bures", W))) - 1))
    out.append(_close("Bloch Bures tangential = ((1+r) f_B(W))^-1 / 4", worst, 0.0, 1e-8))

    worst = 0.0
    for q in (0.6, 1.0, 2.0, 5.0):
        for r in np.round(np.arange(0.1, 0.95, 0.1), 10):
            num = husimi.fisher_blocks(r, q).tan / (r * r)  # the block carries the r² of dn²
            closed = 1.0 / ((1 + r) * metrics.f_eval("fisher_husimi_q", (1 - r) / (1 + r), q))
            worst = max(worst, abs(num / closed - 1))
    out.append(_close("Husimi tangential = ((1+r) f_F_q(W))^-1, q in {0.6,1,2,5}", worst, 0.0, 1e-5))
    t = np.linspace(0.05, 0.95, 19)
    out.append(_close("f_F = f_F_q at q=1", float(np.max(np.abs(metrics.f_eval("fisher_husimi", t)
                                                            - metrics.f_eval("fisher_husimi_q", t, 1.0)))), 0.0, 1e-12))

    half, one = states.ar_bell(0.5), states.ar_bell(1.0)
    worst = 0.0
    for p in metrics.sample_interior(half, 25, seed=seed):
        b1, s1 = states.reparameterize_ar(*p)
        worst = max(worst, float(np.max(np.abs(half.build(p).matrix - one.build([b1, s1]).matrix))))
    out.append(_close("reparameterize_ar state equality", worst, 0.0, 1e-10))

    region = integration.region_for("ar_bell", "bures", {"q": 2.0})
    elem = integration.element_function(region.chart, "bures")
    runs = [integration.integrate(region, elem, tol=1e-2, seed=seed + 11, method="monte_carlo", workers=w)
            for w in (1, 1, max(2, workers))]
    same = all(r.value == runs[0].value and r.abs_error == runs[0].abs_error for r in runs)
    out.append(_true("Monte Carlo bitwise reproducible under fixed seed", same,
                     value=[r.value for r in runs]))
    return out


# ------------------------------------------------------------------ runner

CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("AR Bures total volume pi/4", criterion_1),
    2: ("AR Bures separable volume pi(sqrt2-1)/4", criterion_2),
    3: ("AR separability probabilities (Bures, HS, WY)", criterion_3),
    4: ("trivariate alpha-model HS probabilities", criterion_4),
    5: ("trivariate Bures at alpha=2", criterion_5),
    6: ("bivariate alpha-model", criterion_6),
    7: ("one-parameter Jaynes state", criterion_7),
    8: ("TLB volumes and probabilities", criterion_8),
    9: ("nullity suite", criterion_9),
    10: ("relative-entropy matrix and Clarke ordering", criterion_10),
    11: ("Husimi prior normalisation constants", criterion_11),
    12: ("closed-form marginals and q-marginal peak", criterion_12),
    13: ("information gains", criterion_13),
    14: ("biasedness ordering near pure states", criterion_14),
    15: ("property suites", criterion_15),
}

#: Criteria whose published targets are not attained by a faithful implementation.
KNOWN_UNATTAINABLE = {
    4: "the value quoted at alpha = 1/2 (37/64) disagrees with the piecewise formula, which gives 9/32",
    14: "p_B overtakes p_Fq1 at r ≈ 0.99535, so the ordering cannot hold on all of [0.995, 0.9999]",
}


def run_criterion(number: int, seed: int = 0, workers: int = 1) -> CriterionResult:
    if number not in CRITERIA:
        raise DomainError(f"no acceptance criterion {number}; valid: 1-{len(CRITERIA)}")
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        checks = fn(seed=seed, workers=workers)
    except SepGeomError as exc:
        checks = [Check("raised", f"{type(exc).__name__}: {exc}", "no error", None, False)]
    return CriterionResult(number, title, checks, time.perf_counter() - t0,
                           KNOWN_UNATTAINABLE.get(number, ""))


def run_all(numbers: Optional[Iterable[int]] = None, seed: int = 0, workers: int = 1,
            echo: Optional[Callable[[str], None]] = None) -> list:
    results = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n, seed, workers)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
