"""Priors over the Bloch ball, Bayesian updating and comparative noninformativity.

Densities are handled through their *radial profile* ``m(r)`` (the density of
r after integrating out the direction) and an optional direction-dependent
factor ``w(r, n)`` (a likelihood power for posteriors):

    density(r, n) dr dΩ/4π  =  m(r) w(r, n) / Z  dr dΩ/4π,

with Z the normalisation.  With respect to ``dr dθ1 dθ2`` the density is
``m(r) w / Z · sin θ1 / 4π``.

All integrals over the ball use one product rule: Gauss–Legendre panels in
r graded geometrically towards both r = 0 and r = 1 (on the upper half the
variable is u with r = 1 − u², which removes the 1/√(1 − r²) growth of the
Bures prior), Gauss–Legendre in cos θ1 and the trapezoid rule in θ2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DivergenceError, DomainError, NormalizationFailure, SupportMismatch
from .metrics import _W, bures_q_marginal, bures_rq_marginal, husimi_q1_extension_det, husimi_radial, husimi_tangential

#: Printed normalisation constants of the Husimi-based priors.
NORM_FISHER = 1.39350989
NORM_FISHER_Q1 = 0.24559293

PRIOR_IDS = ("p_B", "p_Bq1trunc", "p_F", "p_Fq1", "uniform_ball", "custom")
RANKED_PRIORS = ("p_B", "p_Bq1trunc", "p_F", "p_Fq1")
TIE_TOL = 1e-5

#: Likelihood power used by default in the comparative test.
CLARKE_POWER = 0.5
#: Powers reproducing the published statistics for each pair (the (p_F, p_Fq1)
#: posterior statistics correspond to the full likelihood).
PUBLISHED_POWERS = {frozenset(("p_F", "p_Fq1")): 1.0}

#: Record ↔ published-gain mapping used for the q-extended information gains.
EXTENDED_RECORD_ASSUMPTION = (
    "the three q-extended gains are matched, in order, to: one up + one down along z; "
    "a single z measurement; two equal outcomes along z"
)


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class BallRule:
    """Product rule on the unit ball: radial nodes/weights and unit directions/weights."""

    r: np.ndarray
    wr: np.ndarray
    dirs: np.ndarray  # (M, 3)
    wd: np.ndarray  # sums to 1 (measure dΩ/4π)


def _gl_panels(edges: np.ndarray, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (a + b) + 0.5 * (b - a) * x).ravel(), (0.5 * (b - a) * w).ravel()


def radial_rule(n: int = 12, levels_lo: int = 20, levels_hi: int = 12):
    """Nodes and weights on (0, 1) graded towards both ends.

    The grading towards r = 1 stops where 1 − r would lose relative accuracy
    in double precision (the innermost panel is still integrated by
    Gauss–Legendre, so no mass is dropped).
    """
    lower = np.concatenate([[0.0], 0.5 * 2.0 ** -np.arange(levels_lo, -1, -1)])
    r1, w1 = _gl_panels(lower, n)
    upper = np.concatenate([[0.0], np.sqrt(0.5) * 2.0 ** -np.arange(levels_hi, -1, -1)])
    u, wu = _gl_panels(upper, n)
    r2, w2 = 1.0 - u * u, 2.0 * u * wu
    return np.concatenate([r1, r2[::-1]]), np.concatenate([w1, w2[::-1]])


def direction_rule(n_theta: int = 24, n_phi: int = 24):
    """Unit vectors and weights (summing to 1): Gauss–Legendre in cos θ1 × trapezoid in θ2."""
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    C, P = np.meshgrid(c, phi, indexing="ij")
    S = np.sqrt(1.0 - C * C)
    dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    wd = (np.repeat(wc, n_phi) / 2.0) / n_phi
    return dirs, wd


@lru_cache(maxsize=8)
def ball_rule(n_r: int = 12, n_theta: int = 48, n_phi: int = 96) -> BallRule:
    r, wr = radial_rule(n_r)
    dirs, wd = direction_rule(n_theta, n_phi)
    return BallRule(r, wr, dirs, wd)


# ------------------------------------------------------------- radial profiles


def _bures_profile(r):
    r = np.asarray(r, dtype=float)
    return 4.0 * r * r / (np.pi * np.sqrt(1.0 - r * r))


def _bures_trunc_profile(r):
    r = np.asarray(r, dtype=float)
    return 3.0 * r * r * (-np.log(_W(r))) / (1.0 + np.log(4.0))


def fisher_volume_profile(r):
    """Angle-integrated Husimi Fisher volume element 4π r² √g_rr g_tan (unnormalised)."""
    r = np.asarray(r, dtype=float)
    return 4.0 * np.pi * r * r * np.sqrt(husimi_radial(r)) * husimi_tangential(r)


def fisher_q1_volume_profile(r):
    """Angle-integrated q-extended Husimi Fisher volume element at q = 1 (unnormalised)."""
    r = np.asarray(r, dtype=float)
    det2 = husimi_q1_extension_det(r)
    return 4.0 * np.pi * r * r * np.sqrt(np.maximum(det2, 0.0)) * husimi_tangential(r)


def _fisher_profile(r):
    return fisher_volume_profile(r) / NORM_FISHER


def _fisher_q1_profile(r):
    return fisher_q1_volume_profile(r) / NORM_FISHER_Q1


def _uniform_profile(r):
    return 3.0 * np.asarray(r, dtype=float) ** 2


PROFILES: dict[str, Callable] = {
    "p_B": _bures_profile,
    "p_Bq1trunc": _bures_trunc_profile,
    "p_F": _fisher_profile,
    "p_Fq1": _fisher_q1_profile,
    "uniform_ball": _uniform_profile,
}

EQUATION_TAGS = {
    "p_B": "normalised Bures volume element",
    "p_Bq1trunc": "truncated extended Bures element at q = 1",
    "p_F": "Husimi Fisher volume element / 1.39350989",
    "p_Fq1": "q-extended Husimi Fisher volume element at q = 1 / 0.24559293",
    "uniform_ball": "uniform distribution on the ball",
}


def normalization_constant(which: str, rule: Optional[BallRule] = None) -> float:
    """Recompute the normalisation of an unnormalised Husimi volume profile ('fisher' or 'fisher_q1')."""
    rule = rule or ball_rule()
    prof = {"fisher": fisher_volume_profile, "fisher_q1": fisher_q1_volume_profile}.get(which)
    if prof is None:
        raise DomainError("which must be 'fisher' or 'fisher_q1'")
    return float(np.sum(rule.wr * prof(rule.r)))


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class MeasurementRecord:
    """Counts of spin-up / spin-down outcomes along x, y and z."""

    up: tuple[int, int, int] = (0, 0, 0)
    down: tuple[int, int, int] = (0, 0, 0)
    q_extended: bool = False
    label: str = "custom"

    def __post_init__(self):
        for c in tuple(self.up) + tuple(self.down):
            if int(c) != c or c < 0:
                raise DomainError("outcome counts must be nonnegative integers")
        object.__setattr__(self, "up", tuple(int(c) for c in self.up))
        object.__setattr__(self, "down", tuple(int(c) for c in self.down))

    @property
    def n_measurements(self) -> int:
        return sum(self.up) + sum(self.down)

    @property
    def empty(self) -> bool:
        return self.n_measurements == 0


RECORDS = {
    "xyz-pairs": MeasurementRecord((1, 1, 1), (1, 1, 1), label="xyz-pairs"),
    "z-pair": MeasurementRecord((0, 0, 1), (0, 0, 1), label="z-pair"),
    "z-up": MeasurementRecord((0, 0, 1), (0, 0, 0), label="z-up"),
    "z-up-up": MeasurementRecord((0, 0, 2), (0, 0, 0), label="z-up-up"),
    "empty": MeasurementRecord(label="empty"),
}


def get_record(name: str, q_extended: bool = False) -> MeasurementRecord:
    if name not in RECORDS:
        raise DomainError(f"unknown record {name!r}; known: {', '.join(RECORDS)}")
    rec = RECORDS[name]
    return MeasurementRecord(rec.up, rec.down, q_extended, rec.label)


@dataclass(frozen=True)
class PriorDensity:
    """Density over the Bloch ball (see module docstring for the representation)."""

    prior_id: str
    profile: Callable[[np.ndarray], np.ndarray]
    factor: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    normalization: float = 1.0
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prior_id not in PRIOR_IDS:
            raise DomainError(f"unknown prior {self.prior_id!r}; known: {', '.join(PRIOR_IDS)}")
        if not np.isfinite(self.normalization) or self.normalization <= 0:
            raise NormalizationFailure("normalisation must be positive and finite")

    def grid_values(self, r: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Density w.r.t. dr dΩ/4π on the product grid, shape (len(r), len(dirs))."""
        base = np.asarray(self.profile(r), dtype=float)[:, None]
        if self.factor is not None:
            base = base * self.factor(r, dirs)
        else:
            base = np.broadcast_to(base, (len(r), len(dirs)))
        return base / self.normalization

    def density(self, r, theta1, theta2):
        """Density with respect to dr dθ1 dθ2."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        t1 = np.broadcast_to(np.asarray(theta1, dtype=float), r.shape)
        t2 = np.broadcast_to(np.asarray(theta2, dtype=float), r.shape)
        dirs = np.stack([np.sin(t1) * np.cos(t2), np.sin(t1) * np.sin(t2), np.cos(t1)], axis=-1)
        vals = np.asarray(self.profile(r), dtype=float)
        if self.factor is not None:
            vals = vals * np.array([self.factor(r[i:i + 1], dirs[i:i + 1])[0, 0] for i in range(len(r))])
        out = vals / self.normalization * np.sin(t1) / (4.0 * np.pi)
        return float(out[0]) if out.size == 1 else out

    def radial_marginal(self, r, rule: Optional[BallRule] = None):
        """Density of r alone (direction integrated out)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.factor is None:
            return np.asarray(self.profile(r), dtype=float) / self.normalization
        rule = rule or ball_rule()
        return self.grid_values(r, rule.dirs) @ rule.wd

    def total_mass(self, rule: Optional[BallRule] = None) -> float:
        rule = rule or ball_rule()
        return float(rule.wr @ (self.grid_values(rule.r, rule.dirs) @ rule.wd))


# ---------------------------------------------------------------- operations


def _check_ball_point(point):
    p = np.asarray(point, dtype=float).ravel()
    if len(p) != 3:
        raise DomainError("prior points are (r, theta1, theta2)")
    if not 0.0 < p[0] < 1.0:
        raise DomainError("r must lie in the open interval (0, 1)")
    return p


def get_prior(prior_id: str) -> PriorDensity:
    """One of the named priors."""
    if prior_id not in PROFILES:
        raise DomainError(f"unknown prior {prior_id!r}; known: {', '.join(PROFILES)}")
    return PriorDensity(prior_id, PROFILES[prior_id], label=EQUATION_TAGS[prior_id])


def prior_eval(prior_id: str, point) -> float:
    """Prior density at (r, θ1, θ2) with respect to dr dθ1 dθ2.

    * p_B = r² sin θ1 / (π² √(1 − r²))
    * p_Bq1trunc = (3/4) r² sin θ1 log(1/W) / (π (1 + log 4)),  W = (1 − r)/(1 + r)
    * p_F, p_Fq1 = Husimi Fisher volume elements divided by 1.39350989 / 0.24559293
    * uniform_ball = 3 r² sin θ1 / (4π)
    """
    p = _check_ball_point(point)
    return float(get_prior(prior_id).density(p[0], p[1], p[2]))


# --------------------------------------------------------------- likelihoods


def _z_factor(comp: np.ndarray, up: int, down: int) -> np.ndarray:
    return ((1.0 + comp) / 2.0) ** up * ((1.0 - comp) / 2.0) ** down


def escort_bloch_radius(r, q):
    """Bloch radius tanh(q·atanh r) = (1 − W^q)/(1 + W^q) of the escort state."""
    return np.tanh(np.asarray(q, dtype=float) * np.arctanh(np.asarray(r, dtype=float)))


def likelihood_grid(record: MeasurementRecord, r: np.ndarray, dirs: np.ndarray,
                    q: Optional[np.ndarray] = None) -> np.ndarray:
    """Likelihood on the grid r ⊗ dirs (⊗ q when given), shape (len r, len dirs[, len q])."""
    r = np.asarray(r, dtype=float)
    if q is None:
        vec = r[:, None, None] * dirs[None, :, :]
    else:
        R = escort_bloch_radius(r[:, None], np.asarray(q, dtype=float)[None, :])
        vec = R[:, None, :, None] * dirs[None, :, None, :]
    out = np.ones(vec.shape[:-1])
    for k in range(3):
        if record.up[k] or record.down[k]:
            out = out * _z_factor(vec[..., k], record.up[k], record.down[k])
    return out


def likelihood(record: MeasurementRecord, point) -> float:
    """Probability of the record at (r, θ1, θ2) or, for q-extended records, (r, θ1, θ2, q).

    Each axis contributes ((1 + c)/2)^up ((1 − c)/2)^down with c the Bloch
    component along the axis; in the q-extended setting c is the component of
    the escort Bloch vector, radius (1 − W^q)/(1 + W^q), so one up and one down
    along z give (r²(1+W^q)² − (1−W^q)² z²)/(4 r² (1+W^q)²).
    """
    p = np.asarray(point, dtype=float).ravel()
    if record.q_extended and len(p) != 4:
        raise DomainError("q-extended records need (r, theta1, theta2, q)")
    if len(p) not in (3, 4):
        raise DomainError("points are (r, theta1, theta2[, q])")
    r, t1, t2 = p[:3]
    if not 0.0 <= r <= 1.0:
        raise DomainError("r must lie in [0, 1]")
    n = np.array([[np.sin(t1) * np.cos(t2), np.sin(t1) * np.sin(t2), np.cos(t1)]])
    if record.q_extended:
        return float(likelihood_grid(record, np.array([r]), n, np.array([p[3]]))[0, 0, 0])
    return float(likelihood_grid(record, np.array([r]), n)[0, 0])


def outcome_probabilities(c, n_trials: int = 2) -> np.ndarray:
    """Probabilities of k = n..0 up outcomes in n measurements along an axis with component c."""
    from math import comb

    c = np.asarray(c, dtype=float)
    return np.stack([comb(n_trials, k) * ((1 + c) / 2) ** k * ((1 - c) / 2) ** (n_trials - k)
                     for k in range(n_trials, -1, -1)])


# ----------------------------------------------------------------- posterior


def posterior(prior: PriorDensity, record: MeasurementRecord, power: float = 1.0,
              rule: Optional[BallRule] = None) -> PriorDensity:
    """Density ∝ prior × likelihood^power, renormalised."""
    if power not in (0.5, 1.0):
        raise DomainError("power must be 1 or 1/2")
    if record.q_extended:
        raise DomainError("use information_gain with a q-truncated prior for q-extended records")
    if record.empty:
        return prior
    rule = rule or ball_rule()
    old = prior.factor

    def factor(r, dirs, _old=old):
        f = likelihood_grid(record, r, dirs) ** power
        return f if _old is None else f * _old(r, dirs)

    post = PriorDensity("custom", prior.profile, factor, 1.0, label=f"posterior({prior.prior_id})")
    Z = post.total_mass(rule)
    if not np.isfinite(Z) or Z <= 0:
        raise NormalizationFailure("posterior is not normalisable")
    return PriorDensity("custom", prior.profile, factor, Z,
                        label=f"posterior({prior.prior_id}, {record.label}, power={power})",
                        meta={"base": prior.prior_id, "record": record.label, "power": power})


def kl(p: PriorDensity, q: PriorDensity, rule: Optional[BallRule] = None) -> float:
    """Relative entropy ∫ p log(p/q) in nats."""
    rule = rule or ball_rule()
    P = p.grid_values(rule.r, rule.dirs)
    Q = q.grid_values(rule.r, rule.dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P / Q), 0.0)
    if not np.all(np.isfinite(terms)):
        raise SupportMismatch("the first density is not absolutely continuous w.r.t. the second")
    return float(rule.wr @ (terms @ rule.wd))


# ------------------------------------------------------------ Clarke test


@dataclass(frozen=True)
class Verdict:
    """Outcome of the comparative-noninformativity test between two priors."""

    prior_a: str
    prior_b: str
    more_noninformative: str  # a prior id or "Undecided"
    kl_ab: float
    kl_ba: float
    kl_post_ab: float
    kl_post_ba: float
    power: float

    def as_dict(self) -> dict:
        return {
            "pair": [self.prior_a, self.prior_b],
            "kl_ab": self.kl_ab,
            "kl_ba": self.kl_ba,
            "kl_post_ab": self.kl_post_ab,
            "kl_post_ba": self.kl_post_ba,
            "verdict": self.more_noninformative,
            "power": self.power,
        }


def decide(prior_a: str, prior_b: str, kl_ab: float, kl_ba: float, kl_post_ab: float,
           kl_post_ba: float, tie_tol: float = TIE_TOL) -> str:
    """Decision rule: a is more noninformative when updating a moves it towards b
    (first statistic decreases) while updating b moves it away from a (second increases)."""
    d_a = kl_post_ab - kl_ab
    d_b = kl_post_ba - kl_ba
    if abs(d_a) <= tie_tol or abs(d_b) <= tie_tol:
        return "Undecided"
    if d_a < 0 < d_b:
        return prior_a
    if d_b < 0 < d_a:
        return prior_b
    return "Undecided"


def _as_prior(p) -> PriorDensity:
    return p if isinstance(p, PriorDensity) else get_prior(p)


def clarke_compare(prior_a, prior_b, record: MeasurementRecord, power: float = CLARKE_POWER,
                   rule: Optional[BallRule] = None) -> Verdict:
    """Compare two priors: KL in both directions before and after updating each with the record."""
    a, b = _as_prior(prior_a), _as_prior(prior_b)
    rule = rule or ball_rule()
    kl_ab = kl(a, b, rule)
    kl_ba = kl(b, a, rule)
    kl_post_ab = kl(posterior(a, record, power, rule), b, rule)
    kl_post_ba = kl(posterior(b, record, power, rule), a, rule)
    verdict = decide(a.prior_id, b.prior_id, kl_ab, kl_ba, kl_post_ab, kl_post_ba)
    return Verdict(a.prior_id, b.prior_id, verdict, kl_ab, kl_ba, kl_post_ab, kl_post_ba, power)


def rank(prior_ids: Sequence[str] = RANKED_PRIORS, record: Optional[MeasurementRecord] = None,
         power: float = CLARKE_POWER, rule: Optional[BallRule] = None):
    """Pairwise verdicts over all pairs and the induced order (most noninformative first).

    Returns ``(order, verdicts)``; ``order`` is None when the verdicts are not
    a strict total order (a cycle or an undecided pair).
    """
    record = record or RECORDS["xyz-pairs"]
    ids = list(prior_ids)
    verdicts = []
    wins = {p: 0 for p in ids}
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            v = clarke_compare(ids[i], ids[j], record, power, rule)
            verdicts.append(v)
            if v.more_noninformative in wins:
                wins[v.more_noninformative] += 1
    order = sorted(ids, key=lambda p: -wins[p])
    counts = sorted(wins.values(), reverse=True)
    total = counts == list(range(len(ids) - 1, -1, -1))
    return (order if total else None), verdicts


def report_json(verdicts: Iterable[Verdict], config: Optional[dict] = None) -> str:
    return json.dumps({"config": config or {}, "comparisons": [v.as_dict() for v in verdicts]}, indent=2)


# ------------------------------------------------------------- biasedness


@dataclass(frozen=True)
class Curve:
    r: np.ndarray
    values: dict  # prior id → marginal density values

    def ordering(self) -> list[list[str]]:
        """Prior ids sorted by decreasing density at each r."""
        ids = list(self.values)
        stack = np.stack([self.values[i] for i in ids])
        return [[ids[k] for k in np.argsort(-stack[:, j])] for j in range(len(self.r))]

    def to_csv(self) -> str:
        ids = list(self.values)
        lines = [",".join(["r"] + ids)]
        for j, r in enumerate(self.r):
            lines.append(",".join([repr(float(r))] + [repr(float(self.values[i][j])) for i in ids]))
        return "\n".join(lines) + "\n"


def biasedness_curve(prior_ids: Sequence[str] | str = RANKED_PRIORS, r_lo: float = 0.995,
                     r_hi: float = 0.9999, n: int = 50) -> Curve:
    """Radial marginal densities of the priors on n points of [r_lo, r_hi]."""
    if isinstance(prior_ids, str):
        prior_ids = (prior_ids,)
    if not 0.0 < r_lo < r_hi <= 1.0:
        raise DomainError("need 0 < r_lo < r_hi ≤ 1")
    if n < 1:
        raise DomainError("n must be positive")
    rs = np.linspace(r_lo, r_hi, n)
    if r_hi == 1.0:
        rs[-1] = np.nextafter(1.0, 0.0)
    return Curve(rs, {p: get_prior(p).radial_marginal(rs) for p in prior_ids})


# -------------------------------------------------------- information gain


def information_gain(prior, record: MeasurementRecord, q_extension: Optional["QTruncatedPrior"] = None,
                     rule: Optional[BallRule] = None) -> float:
    """KL(posterior ‖ prior) with the full likelihood.

    With ``q_extension`` (a :class:`QTruncatedPrior`) the prior lives on
    ball × [q_lo, q_hi] and the q-extended likelihood is used.
    """
    if q_extension is not None:
        return q_extension.information_gain(record, rule)
    if record.q_extended:
        raise DomainError("q-extended records need a q-truncated prior")
    p = _as_prior(prior)
    return kl(posterior(p, record, 1.0, rule), p, rule)


@dataclass(frozen=True)
class QTruncatedPrior:
    """Truncated extended Bures element normalised over ball × [q_lo, q_hi]."""

    q_lo: float
    q_hi: float
    normalization: float
    n_q: int = 64

    def q_rule(self):
        """Gauss–Legendre nodes in log q; weights include the Jacobian dq = q d(log q)."""
        x, w = np.polynomial.legendre.leggauss(self.n_q)
        a, b = np.log(self.q_lo), np.log(self.q_hi)
        lq = 0.5 * (a + b) + 0.5 * (b - a) * x
        q = np.exp(lq)
        return q, 0.5 * (b - a) * w * q

    def rq_density(self, r, q):
        """Density of (r, q) with the direction integrated out."""
        return bures_rq_marginal(r, q) / self.normalization

    def density(self, r, theta1, theta2, q):
        """Density with respect to dr dθ1 dθ2 dq."""
        if not self.q_lo <= q <= self.q_hi:
            return 0.0
        return float(self.rq_density(r, q) * np.sin(theta1) / (4 * np.pi))

    def total_mass(self, rule: Optional[BallRule] = None) -> float:
        rule = rule or ball_rule()
        q, wq = self.q_rule()
        return float(rule.wr @ self.rq_density(rule.r[:, None], q[None, :]) @ wq)

    def information_gain(self, record: MeasurementRecord, rule: Optional[BallRule] = None) -> float:
        rule = rule or ball_rule()
        q, wq = self.q_rule()
        Z = I = 0.0
        for qk, wk in zip(q, wq):  # one q-slice at a time keeps memory bounded
            m = self.rq_density(rule.r, qk) * rule.wr  # (R,)
            L = likelihood_grid(record, rule.r, rule.dirs, np.array([qk]))[..., 0]  # (R, D)
            with np.errstate(divide="ignore", invalid="ignore"):
                LlogL = np.where(L > 0, L * np.log(L), 0.0)
            Z += wk * (m @ (L @ rule.wd))
            I += wk * (m @ (LlogL @ rule.wd))
        return float(I / Z - np.log(Z))


def q_truncated_prior(q_lo: float = 0.5, q_hi: float = 500.0, n_q: int = 64) -> QTruncatedPrior:
    """Extended (truncated) Bures prior on ball × [q_lo, q_hi].

    At fixed q the element integrates over the ball to π(1 + log 4)/(24 q), so
    the normalisation is π(1 + log 4) log(q_hi/q_lo)/24; the q-integral
    diverges logarithmically without an upper cut-off.
    """
    if not np.isfinite(q_hi):
        raise DivergenceError("the extended Bures prior is not normalisable on q ∈ [q_lo, ∞)")
    if not 0 < q_lo < q_hi:
        raise DomainError("need 0 < q_lo < q_hi")
    norm = np.pi * (1.0 + np.log(4.0)) * np.log(q_hi / q_lo) / 24.0
    return QTruncatedPrior(float(q_lo), float(q_hi), float(norm), n_q)


def q_marginal_integral(q_lo: float, q_hi: float, n: int = 64) -> float:
    """∫ π(1 + log 4)/(24 q) dq by quadrature (cross-check of the normalisation)."""
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = np.log(q_lo), np.log(q_hi)
    q = np.exp(0.5 * (a + b) + 0.5 * (b - a) * x)
    return float(np.sum(0.5 * (b - a) * w * q * bures_q_marginal(q)))
