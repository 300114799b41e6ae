"""Metric tensors, monotone-metric f-functions and volume elements.

Numeric tensors are evaluated in batches.  For a batch of parameter points we
obtain tangent matrices ``T[n, i] = ∂ρ/∂θ_i`` (analytic where the chart
provides them, Richardson-extrapolated central differences otherwise),
diagonalise ``ρ``, rotate the tangents into the eigenbasis and contract with
the Morozova–Chentsov weights of the chosen monotone metric::

    g_ij = 1/4 Σ_ab c(λ_a, λ_b) Re(A_i[a, b] conj(A_j[a, b])),
    c(x, y) = 1 / (max(x, y) f(min(x, y) / max(x, y))).

With ``f(t) = (1 + t)/2`` this is Hübner's formula for the Bures metric.

Closed-form tensors reproduce formulas stated in the literature for specific
families.  Where a printed line element writes a cross term ``c dx dy`` the
tensor entry is ``c/2``; the one exception (the qutrit family) is noted in
:func:`closed_form_tensor`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BoundaryPoint, DegenerateState, DomainError
from .states import SQRT2, TWO_SQRT2, FamilyChart, _as_points, get_chart

#: Hilbert–Schmidt convention factor: g = KAPPA_HS · Re tr(dρ dρ).
KAPPA_HS = 0.5
KAPPA_CONVENTION = "g_hs = 1/2 Re tr(d_i rho d_j rho)"
EIG_CUT = 1e-9
NUMERATOR_CUT = 1e-6
NULL_TOL = 1e-8
REL_STEP = 1e-4

METRIC_IDS = ("bures", "wigner_yanase", "hs")


class BoundaryStencilWarning(UserWarning):
    """A one-sided difference was used because the central stencil left the feasible set."""


# ----------------------------------------------------------------- data types


@dataclass(frozen=True)
class MetricTensor:
    """Real symmetric metric tensor at one parameter point."""

    g: np.ndarray
    coords: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] != len(self.coords):
            raise DomainError(f"tensor shape {g.shape} does not match coords {self.coords}")
        object.__setattr__(self, "g", 0.5 * (g + g.T))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __getitem__(self, key):
        i, j = key
        if isinstance(i, str):
            i = self.coords.index(i)
        if isinstance(j, str):
            j = self.coords.index(j)
        return self.g[i, j]


@dataclass(frozen=True)
class VolumeElement:
    value: float
    null_flag: bool


# ----------------------------------------------------------------- f-functions


def _series_s(x, q, nterms=40):
    """Σ_{n≥3} d_n xⁿ/n! with d_n = (1+q) Σ_{k<n} q^k − (1+q)^n."""
    out = np.zeros_like(x)
    geo = 1.0 + q + q * q  # Σ_{k<3} q^k
    qpow = q**3
    onep = (1.0 + q) ** 3
    term = x**3 / 6.0
    for n in range(3, nterms):
        out = out + ((1.0 + q) * geo - onep) * term
        geo = geo + qpow
        qpow = qpow * q
        onep = onep * (1.0 + q)
        term = term * x / (n + 1)
    return out


def _expm1_over(a, x):
    """expm1(a·x)/a with the a → 0 limit x."""
    ax = a * x
    small = np.abs(ax) < 1e-8
    safe_a = np.where(small, 1.0, a)
    return np.where(small, x * (1.0 + 0.5 * ax), np.expm1(ax) / safe_a)


def _f_husimi_q(t, q):
    """Tangential f-function of the escort-Husimi Fisher metric, numerically stable.

    Writing x = log t, the closed form equals
    ``-expm1(x)² expm1((1+q)x) / (q (1+t) S)`` with
    ``S = 1 - t^{1+q} + (1+q) t expm1((q-1)x)/(q-1)``; S vanishes to third
    order at t = 1, so a series is used there.  The value at t = 1 is 3/q².
    """
    t = np.asarray(t, dtype=float)
    q = np.broadcast_to(np.asarray(q, dtype=float), t.shape)
    x = np.log(t)
    near = np.abs(x) * (1.0 + q) < 0.5
    s_dir = -np.expm1((1.0 + q) * x) + (1.0 + q) * t * _expm1_over(q - 1.0, x)
    s_ser = _series_s(np.where(near, x, 0.0), q)
    s = np.where(near, s_ser, s_dir)
    num = -np.expm1(x) ** 2 * np.expm1((1.0 + q) * x)
    at_one = x == 0.0
    safe_s = np.where(at_one, 1.0, s)
    return np.where(at_one, 3.0 / q**2, num / (q * (1.0 + t) * safe_s))


@dataclass(frozen=True)
class FFunction:
    """Operator-monotone-type function f(t) on (0, 1] defining a metric."""

    f_id: str
    q: Optional[float] = None

    def __post_init__(self):
        if self.f_id not in F_IDS:
            raise DomainError(f"unknown f-function {self.f_id!r}; known: {', '.join(F_IDS)}")
        if self.f_id in ("bures_q", "fisher_husimi_q"):
            if self.q is None or not self.q > 0:
                raise DomainError(f"{self.f_id} needs a positive q")

    def __call__(self, t):
        return f_eval(self, t)


F_IDS = ("bures", "wigner_yanase", "bures_q", "fisher_husimi", "fisher_husimi_q")


def f_eval(f: FFunction | str, t, q: Optional[float] = None):
    """Evaluate an f-function at t ∈ (0, 1] (scalars or arrays).

    Removable singularities at t = 1 are replaced by their limits
    (``fisher_husimi(1) = 3``, ``fisher_husimi_q(1) = 3/q²``).  The q-extended
    Bures function has a genuine pole at t = 1, reported as DomainError.
    """
    if isinstance(f, str):
        f = FFunction(f, q)
    elif q is not None and f.q is None:
        f = FFunction(f.f_id, q)
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)) or np.any(t_arr > 1.0 + 1e-15):
        raise DomainError("f-functions are defined for t in (0, 1]")
    t_arr = np.minimum(t_arr, 1.0)
    if f.f_id == "bures":
        out = 0.5 * (1.0 + t_arr)
    elif f.f_id == "wigner_yanase":
        out = 0.25 * (1.0 + np.sqrt(t_arr)) ** 2
    elif f.f_id == "bures_q":
        tq = t_arr**f.q
        if np.any(tq == 1.0):
            raise DomainError("f_bures_q has a pole at t = 1")
        out = 2.0 * (1.0 + t_arr) * (1.0 + tq) ** 2 / np.expm1(f.q * np.log(t_arr)) ** 2
    elif f.f_id == "fisher_husimi":
        out = _f_husimi_q(t_arr, 1.0)
    else:
        out = _f_husimi_q(t_arr, f.q)
    return float(out) if np.ndim(out) == 0 else out


def _resolve_f(metric) -> Optional[FFunction]:
    """Map a metric id (or FFunction) to its f-function; None means Hilbert–Schmidt."""
    if isinstance(metric, FFunction):
        return metric
    if metric == "hs":
        return None
    if metric in ("bures", "wigner_yanase"):
        return FFunction(metric)
    raise DomainError(f"unknown metric {metric!r}; known: {', '.join(METRIC_IDS)}")


# ---------------------------------------------------------------- derivatives


def _steps(chart: FamilyChart, pts: np.ndarray, h) -> np.ndarray:
    if h is not None:
        return np.broadcast_to(np.asarray(h, dtype=float), pts.shape).copy()
    return REL_STEP * np.maximum(np.abs(pts), 1.0)


def _feasible_mask(chart: FamilyChart, pts: np.ndarray) -> np.ndarray:
    lo, hi = chart.bounding_box.T
    with np.errstate(invalid="ignore", divide="ignore"):
        m = chart.margin(pts)
    return (m >= 0) & np.all(pts >= lo, axis=1) & np.all(pts <= hi, axis=1)


def _richardson_tangents(chart: FamilyChart, pts: np.ndarray, h=None, on_boundary="fallback"):
    n, d = pts.shape
    steps = _steps(chart, pts, h)
    D = chart.matrix_dim
    out = np.empty((n, d, D, D), dtype=complex)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        hi_ = steps[:, i][:, None]
        plus1, minus1 = pts + hi_ * e, pts - hi_ * e
        central = _feasible_mask(chart, plus1) & _feasible_mask(chart, minus1)
        if np.any(central):
            p = pts[central]
            hh = hi_[central]
            f = lambda k: chart.matrices(p + k * hh * e)
            d1 = (f(1.0) - f(-1.0)) / (2 * hh[:, :, None])
            d2 = (f(0.5) - f(-0.5)) / hh[:, :, None]
            out[central, i] = (4.0 * d2 - d1) / 3.0
        rest = ~central
        if np.any(rest):
            if on_boundary == "raise":
                raise BoundaryPoint(f"difference stencil along {chart.param_names[i]} leaves the feasible set")
            idx = np.flatnonzero(rest)
            fwd = _feasible_mask(chart, pts[idx] + 2 * hi_[idx] * e)
            bwd = _feasible_mask(chart, pts[idx] - 2 * hi_[idx] * e)
            sign = np.where(fwd, 1.0, np.where(bwd, -1.0, 0.0))
            if np.any(sign == 0):
                raise BoundaryPoint(f"no feasible one-sided stencil along {chart.param_names[i]}")
            warnings.warn(
                f"{chart.family_id}: one-sided difference along {chart.param_names[i]} at {len(idx)} point(s)",
                BoundaryStencilWarning,
                stacklevel=3,
            )
            p = pts[idx]
            hh = (sign[:, None] * hi_[idx])
            f = lambda k: chart.matrices(p + k * hh * e)
            f0 = f(0.0)

            def one_sided(k):
                return (-3.0 * f0 + 4.0 * f(k) - f(2 * k)) / (2 * k * hh[:, :, None])

            out[idx, i] = (4.0 * one_sided(0.5) - one_sided(1.0)) / 3.0
    return out


def tangent_matrices(chart: FamilyChart, points, h=None, on_boundary="fallback") -> np.ndarray:
    """∂ρ/∂θ_i for a batch of points, shape (N, d, D, D)."""
    pts = _as_points(points, chart.dim)
    if chart.tangents is not None and h is None:
        t = chart.tangents(pts)
    else:
        t = _richardson_tangents(chart, pts, h, on_boundary)
    return 0.5 * (t + np.conj(np.swapaxes(t, -1, -2)))


def numeric_differential(chart: FamilyChart, p, direction_index: int, h: Optional[float] = None,
                         on_boundary: str = "fallback") -> np.ndarray:
    """Richardson-extrapolated central difference ∂ρ/∂θ_i at one point.

    Always uses finite differences (never the chart's analytic tangents), so
    it can be compared against them.  Near the boundary a one-sided stencil is
    used with a :class:`BoundaryStencilWarning`; ``on_boundary="raise"``
    raises :class:`BoundaryPoint` instead.
    """
    pts = _as_points(p, chart.dim)
    if not 0 <= direction_index < chart.dim:
        raise DomainError(f"direction index {direction_index} out of range for {chart.family_id}")
    if not _feasible_mask(chart, pts)[0]:
        raise DomainError(f"{chart.family_id}: point {pts[0]} is not feasible")
    t = _richardson_tangents(chart, pts, h, on_boundary)[0, direction_index]
    return 0.5 * (t + t.conj().T)


# -------------------------------------------------------------- numeric tensors


def _mc_weights(f: FFunction, lam: np.ndarray, eig_cut: float):
    """Morozova–Chentsov weights c(λ_a, λ_b) and the mask of retained pairs."""
    la = lam[..., :, None]
    lb = lam[..., None, :]
    big = np.maximum(np.maximum(la, lb), 0.0)
    small = np.clip(np.minimum(la, lb), 0.0, None)
    keep = (big + small) > eig_cut  # same pair rule as the Hübner sum
    safe_big = np.where(keep, big, 1.0)
    ratio = np.clip(np.where(keep, small / safe_big, 1.0), 1e-300, 1.0)
    c = 1.0 / (safe_big * np.asarray(f_eval(f, ratio)))
    return np.where(keep, c, 0.0), keep


def _hubner_weights(lam: np.ndarray, eig_cut: float):
    """Hübner's 2/(λ_a + λ_b) over pairs with λ_a + λ_b > eig_cut."""
    s = np.clip(lam[..., :, None], 0.0, None) + np.clip(lam[..., None, :], 0.0, None)
    keep = s > eig_cut
    return np.where(keep, 2.0 / np.where(keep, s, 1.0), 0.0), keep


def tensor_batch(chart: FamilyChart, points, metric="bures", *, kappa: float = KAPPA_HS,
                 eig_cut: float = EIG_CUT, strict: bool = True, h=None,
                 tangents: Optional[np.ndarray] = None) -> np.ndarray:
    """Metric tensors at a batch of points, shape (N, d, d).

    ``metric`` is ``"bures"``, ``"wigner_yanase"``, ``"hs"`` or an
    :class:`FFunction`.  With ``strict`` a dropped eigenvalue pair carrying a
    non-negligible numerator raises :class:`DegenerateState`.
    """
    pts = _as_points(points, chart.dim)
    T = tangent_matrices(chart, pts, h) if tangents is None else tangents
    f = _resolve_f(metric)
    if f is None:
        return kappa * np.real(np.einsum("niab,njba->nij", T, T))
    rho = chart.matrices(pts)
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    lam, V = np.linalg.eigh(rho)
    A = np.einsum("nak,niab,nbl->nikl", V.conj(), T, V)
    if isinstance(metric, str) and metric == "bures":
        c, keep = _hubner_weights(lam, eig_cut)
    else:
        c, keep = _mc_weights(f, lam, eig_cut)
    if strict and not np.all(keep):
        dropped = np.abs(A) ** 2 * (~keep)[:, None, :, :]
        if np.max(dropped, initial=0.0) > NUMERATOR_CUT:
            raise DegenerateState(
                f"{chart.family_id}: metric diverges (eigenvalue pair below {eig_cut} with nonzero tangent)"
            )
    g = 0.25 * np.real(np.einsum("nkl,nikl,njkl->nij", c, A, A.conj()))
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def _single(chart, p, metric, **kw) -> MetricTensor:
    g = tensor_batch(chart, p, metric, **kw)[0]
    name = metric.f_id if isinstance(metric, FFunction) else metric
    meta = {"family": chart.family_id, "metric": name}
    if name == "hs":
        meta["kappa"] = kw.get("kappa", KAPPA_HS)
    return MetricTensor(g, chart.param_names, meta)


def _check_point(chart: FamilyChart, p):
    pts = _as_points(p, chart.dim)
    if not chart.in_box(pts[0]):
        raise DomainError(f"{chart.family_id}: point {pts[0]} outside bounding box")
    if not chart.feasible(pts[0]):
        raise DomainError(f"{chart.family_id}: point {pts[0]} is not feasible")
    return pts


def bures_tensor(chart: FamilyChart, p, **kw) -> MetricTensor:
    """Bures metric tensor via Hübner's eigenbasis formula."""
    return _single(chart, _check_point(chart, p), "bures", **kw)


def monotone_tensor(chart: FamilyChart, p, f: FFunction | str, **kw) -> MetricTensor:
    """Monotone metric with Morozova–Chentsov function built from ``f``."""
    if isinstance(f, str):
        f = FFunction(f)
    return _single(chart, _check_point(chart, p), f, **kw)


def hs_tensor(chart: FamilyChart, p, kappa: float = KAPPA_HS, **kw) -> MetricTensor:
    """Hilbert–Schmidt tensor κ Re tr(∂_iρ ∂_jρ)."""
    return _single(chart, _check_point(chart, p), "hs", kappa=kappa, **kw)


def classical_fisher_batch(chart: FamilyChart, points) -> np.ndarray:
    """Σ_k ∂_i p_k ∂_j p_k / p_k for Bell-diagonal charts (Bell weights p_k)."""
    if not chart.bell_diagonal:
        raise DomainError(f"{chart.family_id} is not Bell-diagonal")
    pts = _as_points(points, chart.dim)
    w = chart.weights(pts)
    T = tangent_matrices(chart, pts)
    from .states import BELL_BASIS

    dw = np.real(np.einsum("ak,niab,bk->nik", BELL_BASIS.conj(), T, BELL_BASIS))
    return np.einsum("nik,njk,nk->nij", dw, dw, 1.0 / w)


# ------------------------------------------------------------- volume elements


def volume_elements(G: np.ndarray, null_tol: float = NULL_TOL):
    """Batched √max(det g, 0) and null flags for tensors of shape (N, d, d)."""
    G = np.asarray(G, dtype=float)
    det = np.linalg.det(G)
    scale = np.prod(np.abs(np.diagonal(G, axis1=-2, axis2=-1)), axis=-1)
    return np.sqrt(np.maximum(det, 0.0)), det <= null_tol * scale


def volume_element(g: MetricTensor | np.ndarray, null_tol: float = NULL_TOL) -> VolumeElement:
    """Volume element of a single tensor; null when det g ≤ null_tol · Π g_ii."""
    arr = g.g if isinstance(g, MetricTensor) else np.asarray(g, dtype=float)
    val, flag = volume_elements(arr[None], null_tol)
    return VolumeElement(float(val[0]), bool(flag[0]))


def element_batch(chart: FamilyChart, points, metric="bures", **kw) -> np.ndarray:
    """Volume element √det g at a batch of points."""
    return volume_elements(tensor_batch(chart, points, metric, **kw))[0]


def sample_interior(chart: FamilyChart, n: int, seed: int = 0, q_max: float = 4.0,
                    min_margin: float = 1e-3) -> np.ndarray:
    """Uniform random feasible points, away from the boundary by ``min_margin``.

    Coordinates named ``q`` are sampled in [box_lo, q_max] so that escort
    states stay well-conditioned.
    """
    rng = np.random.default_rng(seed)
    box = chart.bounding_box.copy()
    for k, name in enumerate(chart.param_names):
        if name == "q":
            box[k, 1] = min(box[k, 1], q_max)
    out = []
    total = 0
    while total < n:
        cand = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((max(4 * n, 64), chart.dim))
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = chart.margin(cand) > min_margin
        ok &= np.all((cand - box[:, 0]) > 1e-3 * (box[:, 1] - box[:, 0]), axis=1)
        ok &= np.all((box[:, 1] - cand) > 1e-3 * (box[:, 1] - box[:, 0]), axis=1)
        out.append(cand[ok])
        total += int(ok.sum())
    return np.concatenate(out)[:n]


def nullity_check(chart: FamilyChart, metric_id="bures", n_samples: int = 30, seed: int = 0,
                  null_tol: float = NULL_TOL) -> bool:
    """True iff the volume element is numerically null at every sampled interior point."""
    if n_samples < 30:
        raise DomainError("nullity_check needs at least 30 samples")
    pts = sample_interior(chart, n_samples, seed)
    G = tensor_batch(chart, pts, metric_id, strict=False)
    return bool(np.all(volume_elements(G, null_tol)[1]))


# ----------------------------------------------------------- closed-form models


def _W(r):
    return (1.0 - r) / (1.0 + r)


def _require(cond, msg):
    if not cond:
        raise DomainError(msg)


def _spherical(r, t1, g_rr, g_tan):
    """Tensor in (r, θ1, θ2) with tangential coefficient g_tan multiplying dn²."""
    return np.diag([g_rr, g_tan * r * r, g_tan * r * r * np.sin(t1) ** 2])


def husimi_radial(r):
    """Radial Fisher coefficient (atanh r − r)/r³ of the Husimi family (limit 1/3 at 0)."""
    r = np.asarray(r, dtype=float)
    small = r < 1e-3
    rs = np.where(small, 0.5, r)
    direct = (np.arctanh(rs) - rs) / rs**3
    series = 1.0 / 3.0 + r**2 / 5.0 + r**4 / 7.0
    return np.where(small, series, direct)


def husimi_tangential(r, q: float = 1.0):
    """Coefficient of dn² in the (escort-)Husimi Fisher metric: ((1+r) f_F_q(W))⁻¹."""
    r = np.asarray(r, dtype=float)
    return 1.0 / ((1.0 + r) * _f_husimi_q(_W(r), q))


def husimi_q1_extension(r):
    """(g_qq, g_rq) of the q-extended Husimi Fisher metric at q = 1.

    The printed line element carries ``(2r − (r²−1) log W)/(2r²) dq dr``; the
    tensor entry is half of that coefficient.
    """
    r = np.asarray(r, dtype=float)
    L = np.log(_W(r))
    g_qq = 0.25 - (r * r - 1) ** 2 * L * L / (16 * r * r)
    g_rq = 0.5 * (2 * r - (r * r - 1) * L) / (2 * r * r)
    return g_qq, g_rq


def husimi_q1_extension_det(r):
    """g_qq·g_rr − g_rq² of the q-extended Husimi metric at q = 1 (series for small r)."""
    r = np.asarray(r, dtype=float)
    small = r < 0.05
    rs = np.where(small, 0.5, r)
    g_qq, g_rq = husimi_q1_extension(rs)
    direct = g_qq * husimi_radial(rs) - g_rq**2
    r2 = r * r
    series = r2 * r2 * (1 / 135 + r2 * (47 / 4725 + r2 * (2 / 189 + r2 * 19058 / 1819125)))
    return np.where(small, series, direct)


def qutrit_extended_tangential(v, r, q):
    """Coefficient of dn² of the Bures metric on the escort qutrit family."""
    a, b, c = (v - r) ** q, (v + r) ** q, (2 - 2 * v) ** q
    return (a - b) ** 2 / (4 * r * r * (a + b) * (a + b + c))


def _ar_c(b, s):
    lp = np.log(s + TWO_SQRT2 * b)
    lm = np.log(s - TWO_SQRT2 * b)
    l8 = np.log(8.0 - s)
    return (
        -4 * l8**2 * s * (s - 8)
        + 2 * lm * lp * (8 * b * b - s**2)
        - lm**2 * (8 * b * b + s * (s - 16) - 4 * SQRT2 * b * (s - 8))
        - lp**2 * (8 * b * b + s * (s - 16) + 4 * SQRT2 * b * (s - 8))
        + 4 * l8 * (s - 8) * (lm * (s - TWO_SQRT2 * b) + lp * (s + TWO_SQRT2 * b))
    )


CLOSED_FORM_MODELS = {
    "bloch_bures": ("r", "theta1", "theta2"),
    "extended_bures": ("r", "theta1", "theta2", "q"),
    "extended_bures_trunc": ("r", "theta1", "theta2", "q"),
    "extended_bures_q1": ("r", "theta1", "theta2", "q"),
    "husimi_fisher": ("r", "theta1", "theta2"),
    "husimi_fisher_extended_q1": ("r", "theta1", "theta2", "q"),
    "qutrit_bures": ("v", "r", "theta1", "theta2"),
    "ar_extended_q1": ("b", "sigma2", "q"),
    "ar_bures_q1": ("b", "sigma2"),
    "tlb_sphere": ("theta1", "theta2", "theta3"),
}


def closed_form_tensor(model_id: str, p) -> MetricTensor:
    """Evaluate a printed closed-form metric tensor at ``p``.

    Models (coordinates in :data:`CLOSED_FORM_MODELS`):

    * ``bloch_bures`` – (1/4)(dr²/(1−r²) + dn²).
    * ``extended_bures`` – Bures metric of the escort qubit, including the dq·dr
      term (null volume element); ``extended_bures_trunc`` drops that term;
      ``extended_bures_q1`` is the q = 1 specialisation.
    * ``husimi_fisher`` / ``husimi_fisher_extended_q1`` – Fisher metric of the
      Husimi family, unextended and q-extended at q = 1.
    * ``qutrit_bures`` – Bures metric of the (v, r) qutrit family.  Here the
      printed dv·dr coefficient is the tensor entry itself; only that reading
      agrees with the numeric tensor and with the printed normalised prior.
    * ``ar_extended_q1`` – 3×3 Bures tensor of the AR family in (b, σ², q) at
      q = 1; ``ar_bures_q1`` its (b, σ²) block.
    * ``tlb_sphere`` – the round 3-sphere metric in the angles with
      x = 1 − 4cos²θ1, y = 1 − 4sin²θ1cos²θ2, z = 1 − 4sin²θ1sin²θ2cos²θ3.
    """
    if model_id not in CLOSED_FORM_MODELS:
        raise DomainError(f"unknown closed-form model {model_id!r}")
    coords = CLOSED_FORM_MODELS[model_id]
    p = np.asarray(p, dtype=float).ravel()
    _require(len(p) == len(coords), f"{model_id} expects coordinates {coords}")
    meta = {"model": model_id}

    if model_id in ("bloch_bures", "husimi_fisher") or model_id.startswith(("extended_bures", "husimi_fisher_")):
        r, t1 = p[0], p[1]
        _require(0.0 < r < 1.0, f"{model_id}: r must lie in (0, 1)")
        W = _W(r)
        L = np.log(W)
        if model_id == "bloch_bures":
            g = _spherical(r, t1, 0.25 / (1 - r * r), 0.25)
        elif model_id == "husimi_fisher":
            g = _spherical(r, t1, float(husimi_radial(r)), float(husimi_tangential(r)))
        elif model_id == "husimi_fisher_extended_q1":
            g = np.zeros((4, 4))
            g[:3, :3] = _spherical(r, t1, float(husimi_radial(r)), float(husimi_tangential(r)))
            g_qq, g_rq = husimi_q1_extension(r)
            g[3, 3] = float(g_qq)
            g[0, 3] = g[3, 0] = float(g_rq)
        elif model_id == "extended_bures_q1":
            g = np.zeros((4, 4))
            g[:3, :3] = _spherical(r, t1, 0.25 / (1 - r * r), 0.25)
            g[3, 3] = (1 - r * r) * L * L / 16
            g[0, 3] = g[3, 0] = -0.5 * L / 4
        else:
            q = p[3]
            _require(q > 0, f"{model_id}: q must be positive")
            Wq = W**q
            pre = 1.0 / (4 * (1 + Wq) ** 2)
            g = np.zeros((4, 4))
            g[:3, :3] = _spherical(r, t1, pre * 4 * q * q * Wq / (r * r - 1) ** 2,
                                   pre * (1 - Wq) ** 2 / (r * r))
            g[3, 3] = pre * Wq * L * L
            if model_id == "extended_bures":
                g[0, 3] = g[3, 0] = 0.5 * pre * 4 * q * Wq * L / (r * r - 1)
    elif model_id == "qutrit_bures":
        v, r, t1 = p[0], p[1], p[2]
        _require(0 < r < v < 1, "qutrit_bures needs 0 < r < v < 1")
        g = np.zeros((4, 4))
        g[0, 0] = (r * r - v) / ((1 - v) * (r * r - v * v))
        g[0, 1] = g[1, 0] = r / (r * r - v * v)
        g[1, 1] = v / (v * v - r * r)
        g[2, 2] = r * r / v
        g[3, 3] = r * r * np.sin(t1) ** 2 / v
        g = 0.25 * g
    elif model_id in ("ar_extended_q1", "ar_bures_q1"):
        b, s = p[0], p[1]
        _require(s - TWO_SQRT2 * abs(b) > 0 and s < 8 and b != 0,
                 f"{model_id}: needs |2√2 b| < σ² < 8 and b ≠ 0 (log singularities)")
        g2 = np.array(
            [
                [s / (-32 * b * b + 4 * s * s), 0.5 * b / (16 * b * b - 2 * s * s)],
                [0.5 * b / (16 * b * b - 2 * s * s), (b * b - s) / (4 * (s - 8) * (s * s - 8 * b * b))],
            ]
        )
        if model_id == "ar_bures_q1":
            g = g2
        else:
            _require(abs(p[2] - 1.0) < 1e-12, "ar_extended_q1 is the q = 1 tensor")
            lp, lm, l8 = np.log(s + TWO_SQRT2 * b), np.log(s - TWO_SQRT2 * b), np.log(8 - s)
            g = np.zeros((3, 3))
            g[:2, :2] = g2
            g[2, 2] = _ar_c(b, s) / 1024
            g[0, 2] = g[2, 0] = 0.5 * (lm - lp) / (8 * SQRT2)
            g[1, 2] = g[2, 1] = 0.5 * (2 * l8 - lm - lp) / 32
    else:  # tlb_sphere
        t1, t2 = p[0], p[1]
        g = np.diag([1.0, np.sin(t1) ** 2, (np.sin(t1) * np.sin(t2)) ** 2])
    return MetricTensor(g, coords, meta)


def tlb_from_sphere(theta1, theta2, theta3):
    """TLB coordinates (x, y, z) of the 3-sphere angles."""
    c1, s1 = np.cos(theta1), np.sin(theta1)
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3 = np.cos(theta3)
    return 1 - 4 * c1**2, 1 - 4 * (s1 * c2) ** 2, 1 - 4 * (s1 * s2 * c3) ** 2


# Closed-form volume elements -----------------------------------------------------


def ar_element_q1(b, s):
    """Bures volume element of the AR family at q = 1 in (b, σ²)."""
    b, s = np.asarray(b, dtype=float), np.asarray(s, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(-1.0 / ((s - 8.0) * (s * s - 8.0 * b * b))) / 4.0


def ar_element(b, s, q):
    """Bures volume element of the AR family at escort order q in (b, σ²)."""
    b, s = np.asarray(b, dtype=float), np.asarray(s, dtype=float)
    e = 1.0 / q
    with np.errstate(invalid="ignore", divide="ignore"):
        up, um, u8 = s + TWO_SQRT2 * b, s - TWO_SQRT2 * b, 8.0 - s
        num = u8 ** (e - 2) * um**e * up**e
        den = q**4 * (s * s - 8 * b * b) ** 2 * (2 * u8**e + um**e + up**e) ** 3
        return 16.0 * np.sqrt(num / den)


def trivariate_bures_element(b, s, alpha):
    """Bures volume element (1/4)/√(C + D) of the α-model in (b, σ²)."""
    b, s, a = np.asarray(b, dtype=float), np.asarray(s, dtype=float), float(alpha)
    C = (8 * a - s) * s * s - 4 * SQRT2 * (a - 1) * b * (s - 4 * a) * s
    D = 16 * SQRT2 * (a - 1) * a * b**3 - 8 * b * b * ((s + 8) * a * a - 3 * s * a + s)
    with np.errstate(invalid="ignore", divide="ignore"):
        return 0.25 * np.sqrt(1.0 / (C + D))


def trivariate_hs_element(alpha):
    """Hilbert–Schmidt volume element 1/(32|α(1+α)|) of the α-model (constant)."""
    return 1.0 / (32.0 * abs(alpha * (1.0 + alpha)))


def bloch_bures_element(r, theta1):
    """Bures volume element r² sinθ1 / (8√(1−r²)) of the Bloch ball."""
    return r * r * np.sin(theta1) / (8.0 * np.sqrt(1.0 - r * r))


def truncated_extended_bures_element(r, theta1, q):
    """Volume element of the escort-qubit Bures metric with the dq·dr term dropped."""
    r = np.asarray(r, dtype=float)
    W = _W(r)
    Wq = W**q
    R = np.tanh(q * np.arctanh(r))
    return q * np.abs(np.log(W)) * Wq * R * R * np.sin(theta1) / (8 * (1 + Wq) ** 2 * (1 - r * r))


def bures_q_marginal(q):
    """Integral of the truncated extended Bures element over the Bloch ball at fixed q."""
    return np.pi * (1.0 + np.log(4.0)) / (24.0 * np.asarray(q, dtype=float))


def bures_q_antiderivative(r, q):
    """Indefinite q-integral of the (r, q) marginal of the truncated extended Bures element."""
    r = np.asarray(r, dtype=float)
    W = _W(r)
    L = np.log(W)
    Wq = W**q
    num = q * Wq * (3 + Wq**2) * L - (1 + Wq) * (2 * Wq + (1 + Wq) ** 2 * np.log1p(Wq))
    return np.pi * num / (6 * (r * r - 1) * (1 + Wq) ** 3 * L)


def bures_rq_marginal(r, q):
    """(r, q) marginal of the truncated extended Bures element (angles integrated)."""
    return 4 * np.pi * truncated_extended_bures_element(r, np.pi / 2, q)


def get_family_chart(family_id: str, **params) -> FamilyChart:
    """Convenience alias for :func:`sepgeom.states.get_chart`."""
    return get_chart(family_id, **params)
