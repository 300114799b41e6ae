"""Husimi and escort-Husimi distributions of a qubit and their Fisher metrics.

Convention: Husimi densities are taken relative to the *uniform probability
measure* dΩ/4π on the sphere, so the maximally mixed state has ``H ≡ 1`` and
``H(Ω) = 2⟨Ω|ρ|Ω⟩ = 1 + r n·m`` for a state with Bloch vector ``r m``.
With this convention the escort map
``H_q = 2(r + qr) / ((1+r)^{1+q} − (1−r)^{1+q}) · H^q`` is normalised, and the
volume elements integrate to the constants 1.39350989 (q = 1, three
parameters) and 0.24559293 (four parameters, q-slice at 1).

Fisher metric integrals are computed in the frame whose pole is the Bloch
direction ``m``: every entry then depends on ``u = n·m`` only (the azimuthal
integral is exact), and the substitution ``s = (1 + r u)^{1+q}`` makes the
escort density uniform in ``s``.  The remaining one-dimensional integral is
evaluated by Gauss–Legendre panels graded geometrically towards ``s = 0``
and refined until stable.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import minimize_scalar

from .errors import DomainError, QuadratureFailure
from .metrics import (MetricTensor, closed_form_tensor, husimi_q1_extension, husimi_radial, husimi_tangential,
                      truncated_extended_bures_element)
from .states import Q_RANGE, DensityMatrix, _unit_vectors

FISHER_TOL = 1e-7
#: Panel grading depth: at least _MIN_PANELS halvings towards s = 0, extended to
#: a few halvings past the scale where the escort density turns on near r = 1.
_MIN_PANELS = 60
_MAX_PANELS = 400
_CHUNK = 2_000_000  # max (points × nodes) evaluated at once


def _check_q(q):
    q_arr = np.asarray(q, dtype=float)
    lo, hi = Q_RANGE
    if np.any(q_arr < lo - 1e-12) or np.any(q_arr > hi + 1e-12):
        raise DomainError(f"escort order q must lie in [{lo}, {hi}]")


def _omega(omega) -> np.ndarray:
    n = np.asarray(omega, dtype=float)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("direction must be nonzero")
    return n / norm


def bloch_vector(rho) -> np.ndarray:
    """Bloch vector (x, y, z) of a qubit density matrix."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (2, 2):
        raise DomainError("Husimi functions are implemented for qubits only")
    return np.array([2 * m[0, 1].real, 2 * m[1, 0].imag, (m[0, 0] - m[1, 1]).real])


def husimi(rho, omega) -> np.ndarray | float:
    """Husimi density 2⟨Ω|ρ|Ω⟩ relative to dΩ/4π (``omega`` is a unit vector or a stack)."""
    vec = bloch_vector(rho)
    val = 1.0 + _omega(omega) @ vec
    return float(val) if np.ndim(val) == 0 else val


def _log_norm_terms(r, q):
    """log N(r, q) and its r- and q-derivatives for N = 2r(1+q)/((1+r)^{1+q} − (1−r)^{1+q})."""
    r = np.asarray(r, dtype=float)
    a = 1.0 + np.asarray(q, dtype=float)
    small = a * r < 1e-2
    rs = np.where(small, 0.5, r)
    lp, lm = np.log1p(rs), np.log1p(-rs)
    log_w = lm - lp
    log_d = a * lp + np.log1p(-np.exp(a * log_w))
    A = np.exp(a * lp - log_d)  # (1+r)^a / D
    B = np.exp(a * lm - log_d)  # (1-r)^a / D
    log_n = np.log(2 * rs * a) - log_d
    d_r = 1.0 / rs - a * (A / (1 + rs) + B / (1 - rs))
    d_q = 1.0 / a - (A * lp - B * lm)
    c2 = (a - 1) * (a - 2) / 6.0
    c4 = (a - 1) * (a - 2) * (a - 3) * (a - 4) / 120.0
    x = c2 * r**2 + c4 * r**4
    s_log_n = -np.log1p(x)
    s_dr = -(2 * c2 * r + 4 * c4 * r**3) / (1 + x)
    dc2 = (2 * a - 3) / 6.0
    s_dq = -(dc2 * r**2) / (1 + x)
    return (
        np.where(small, s_log_n, log_n),
        np.where(small, s_dr, d_r),
        np.where(small, s_dq, d_q),
        np.where(small, np.log(2 * a * np.maximum(r, 1e-300)) + np.log1p(x), log_d),
    )


def escort_norm(r, q):
    """Normalising factor 2(r + qr)/((1+r)^{1+q} − (1−r)^{1+q}) (limit 1 at r = 0)."""
    return np.exp(_log_norm_terms(r, q)[0])


def escort_husimi(q, r, theta1, theta2, omega):
    """Escort Husimi density N(r,q)·H^q relative to dΩ/4π."""
    _check_q(q)
    if not 0 <= r <= 1:
        raise DomainError("r must lie in [0, 1]")
    m = _unit_vectors(np.asarray(theta1, float), np.asarray(theta2, float))
    h = 1.0 + r * (_omega(omega) @ m)
    val = escort_norm(r, q) * h**q
    return float(val) if np.ndim(val) == 0 else val


def sphere_rule(n_theta: int = 64, n_phi: int = 64):
    """Product rule on S²: Gauss–Legendre in cos θ × trapezoid in φ.

    Returns unit vectors (M, 3) and weights summing to 1 (uniform measure).
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ct, ph = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1 - ct**2)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    weights = (np.repeat(w, n_phi) / 2.0) / n_phi
    return dirs, weights


# ----------------------------------------------------------- Fisher integrals


@lru_cache(maxsize=64)
def _panel_nodes(n: int, n_panels: int = _MIN_PANELS):
    """Nodes/weights on [0, 1] from GL panels graded by powers of two toward 0."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(n_panels, -1, -1)])
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def _blocks_at(r, q, n):
    """Fisher blocks (rr, rq, qq, tan) for arrays r, q using n nodes per panel.

    ``tan`` is the coefficient of dΩ² (so the coefficient of dn² is tan/r²).
    The scores grow like s^{-1/(1+q)} down to s_min = (1 − r)^{1+q}, so the
    panels are graded a few halvings below s_min / s_max.
    """
    r, q = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(q, dtype=float))
    a = 1.0 + q
    log_b = a * np.log1p(-np.minimum(r, 1 - 1e-16))
    log_d = _log_norm_terms(r, q)[3]
    depth = np.max(-(log_b - log_d), initial=0.0) / np.log(2.0) + 12
    n_panels = int(np.clip(np.ceil(depth), _MIN_PANELS, _MAX_PANELS))
    tau, wt = _panel_nodes(n, n_panels)
    flat_r, flat_q = r.ravel(), q.ravel()
    step = max(1, _CHUNK // len(tau))
    parts = [_blocks_chunk(flat_r[i:i + step], flat_q[i:i + step], tau, wt) for i in range(0, max(len(flat_r), 1), step)]
    return tuple(np.concatenate([p[k] for p in parts]).reshape(r.shape) for k in range(4))


def _blocks_chunk(r, q, tau, wt):
    r = r[:, None]
    q = q[:, None]
    a = 1.0 + q
    _, d_r, d_q, log_d = _log_norm_terms(r, q)
    log_b = a * np.log1p(-np.minimum(r, 1 - 1e-16))
    log_s = np.logaddexp(log_b, log_d + np.log(tau))
    log_h = log_s / a  # log(1 + r u)
    u = np.expm1(log_h) / np.maximum(r, 1e-300)
    u = np.clip(u, -1.0, 1.0)
    inv_h = np.exp(-log_h)
    s_r = d_r + q * u * inv_h
    s_q = d_q + log_h
    tan = (q * r * inv_h) ** 2 * (1 - u * u) / 2.0
    return (
        np.sum(wt * s_r * s_r, axis=-1),
        np.sum(wt * s_r * s_q, axis=-1),
        np.sum(wt * s_q * s_q, axis=-1),
        np.sum(wt * tan, axis=-1),
    )


@dataclass(frozen=True)
class FisherBlocks:
    rr: np.ndarray
    rq: np.ndarray
    qq: np.ndarray
    tan: np.ndarray
    error: float
    nodes_per_panel: int


def fisher_blocks(r, q, tol: float = FISHER_TOL, n_start: int = 8, n_max: int = 128) -> FisherBlocks:
    """Escort-Husimi Fisher blocks with panel refinement until relative change < tol."""
    _check_q(q)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise DomainError("Fisher tensor needs 0 < r < 1")
    n = n_start
    prev = np.array(_blocks_at(r, q, n))
    while n < n_max:
        n *= 2
        cur = np.array(_blocks_at(r, q, n))
        scale = np.maximum(np.abs(cur), np.abs(cur[[0, 0, 2, 3]]).max(axis=0) * 1e-12 + 1e-300)
        err = float(np.max(np.abs(cur - prev) / scale))
        if err < tol:
            return FisherBlocks(*cur, error=err, nodes_per_panel=n)
        prev = cur
    raise QuadratureFailure(f"sphere quadrature did not stabilise (relative change {err:.2e})")


def fisher_tensor_numeric(p, tol: float = FISHER_TOL) -> MetricTensor:
    """Fisher metric of the Husimi family at (r, θ1, θ2) or of the escort family at (r, θ1, θ2, q)."""
    p = np.asarray(p, dtype=float).ravel()
    if len(p) not in (3, 4):
        raise DomainError("expected (r, theta1, theta2) or (r, theta1, theta2, q)")
    r, t1 = p[0], p[1]
    q = p[3] if len(p) == 4 else 1.0
    fb = fisher_blocks(r, q, tol)
    s2 = np.sin(t1) ** 2
    g = np.zeros((len(p), len(p)))
    g[0, 0] = fb.rr
    g[1, 1] = fb.tan
    g[2, 2] = fb.tan * s2
    coords = ("r", "theta1", "theta2")
    if len(p) == 4:
        g[3, 3] = fb.qq
        g[0, 3] = g[3, 0] = fb.rq
        coords += ("q",)
    return MetricTensor(g, coords, {"family": "escort_husimi" if len(p) == 4 else "husimi",
                                    "metric": "fisher", "quadrature_error": fb.error})


def fisher_tensor_product_rule(p, n_theta: int = 96, n_phi: int = 48, h: float = 1e-5) -> MetricTensor:
    """Brute-force cross-check: fixed-frame product rule with finite-difference scores."""
    p = np.asarray(p, dtype=float).ravel()
    dirs, w = sphere_rule(n_theta, n_phi)

    def log_h(pt):
        r, t1, t2 = pt[:3]
        q = pt[3] if len(pt) == 4 else 1.0
        m = _unit_vectors(t1, t2)
        return np.log(escort_norm(r, q)) + q * np.log1p(r * dirs @ m)

    scores = []
    for i in range(len(p)):
        e = np.zeros(len(p))
        e[i] = h
        scores.append((log_h(p + e) - log_h(p - e)) / (2 * h))
    scores = np.array(scores)
    dens = np.exp(log_h(p))
    g = np.einsum("m,im,jm->ij", w * dens, scores, scores)
    coords = ("r", "theta1", "theta2", "q")[: len(p)]
    return MetricTensor(g, coords, {"metric": "fisher", "method": "product_rule"})


def extended_fisher_q1_tensor(p) -> MetricTensor:
    """Closed-form q-extended Husimi Fisher tensor at q = 1, coordinates (r, θ1, θ2, q)."""
    p = np.asarray(p, dtype=float).ravel()
    if len(p) == 3:
        p = np.append(p, 1.0)
    if len(p) != 4 or abs(p[3] - 1.0) > 1e-12:
        raise DomainError("extended_fisher_q1_tensor is defined on the q = 1 slice")
    return closed_form_tensor("husimi_fisher_extended_q1", p)


def husimi_q1_blocks(r):
    """Closed-form (rr, rq, qq, tan/r²) entries of the q-extended Husimi metric at q = 1."""
    r = np.asarray(r, dtype=float)
    qq, rq = husimi_q1_extension(r)
    return husimi_radial(r), rq, qq, husimi_tangential(r)


# ------------------------------------------------------------------ marginals


def _radial_nodes(n: int):
    """Gauss–Legendre nodes for ∫_0^1 dr with r = 1 − v², clustering at r = 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (x + 1)
    return 1 - v * v, w * v  # dr = 2v dv, dv = w/2


def _element_rq(r, q, tol):
    fb = fisher_blocks(r, q, tol)
    det = np.maximum(fb.rr * fb.qq - fb.rq**2, 0.0)
    return 4 * np.pi * np.sqrt(det) * fb.tan


@dataclass(frozen=True)
class MarginalValue:
    value: float
    error_estimate: float


def marginal_q(q, n: int = 48, tol: float = 1e-6) -> MarginalValue:
    """One-dimensional q-marginal of the extended Husimi volume element (ball integrated)."""
    _check_q(q)
    prev = None
    while n <= 1024:
        r, w = _radial_nodes(n)
        val = float(np.sum(w * _element_rq(r, np.full_like(r, q), 1e-9)))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return MarginalValue(val, abs(val - prev))
        prev, n = val, 2 * n
    raise QuadratureFailure("q-marginal did not converge under radial refinement")


def marginal_r(r, q_range=Q_RANGE, n: int = 48, tol: float = 1e-6) -> MarginalValue:
    """One-dimensional r-marginal of the extended Husimi volume element over q ∈ q_range."""
    if not 0 < r < 1:
        raise DomainError("r must lie in (0, 1)")
    lo, hi = np.log(q_range[0]), np.log(q_range[1])
    prev = None
    while n <= 2048:
        x, w = np.polynomial.legendre.leggauss(n)
        qs = np.exp(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        vals = _element_rq(np.full_like(qs, r), qs, 1e-9) * qs
        val = float(0.5 * (hi - lo) * np.sum(w * vals))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return MarginalValue(val, abs(val - prev))
        prev, n = val, 2 * n
    raise QuadratureFailure("r-marginal did not converge under q refinement")


def bures_marginal_r(r):
    """r-marginal of the unextended Bures volume element: π r² / (2√(1 − r²))."""
    r = np.asarray(r, dtype=float)
    return np.pi * r * r / (2 * np.sqrt(1 - r * r))


def bures_marginal_q_numeric(q, n_theta: int = 24, n_phi: int = 8, tol: float = 1e-12) -> MarginalValue:
    """Ball integral of the truncated extended Bures element at fixed q, by quadrature.

    Radial: adaptive quadrature in v with r = 1 − v² (the element behaves like
    (1 − r)^{q−1} log(1 − r) at the pure states).  Angular: Gauss–Legendre in
    θ1 and the trapezoid rule in θ2.
    """
    _check_q(q)

    def radial(v):
        r = 1.0 - v * v
        if r <= 0.0 or r >= 1.0:
            return 0.0
        return float(truncated_extended_bures_element(r, np.pi / 2, q)) * 2.0 * v

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        rad, rad_err = quad(radial, 0.0, 1.0, epsabs=0.0, epsrel=tol, limit=400)
    x, w = np.polynomial.legendre.leggauss(n_theta)
    t1 = 0.5 * np.pi * (x + 1.0)
    phi_weights = np.full(n_phi, 2 * np.pi / n_phi)  # periodic trapezoid; integrand is θ2-free
    ang = 0.5 * np.pi * np.sum(w * np.sin(t1)) * phi_weights.sum()
    return MarginalValue(float(rad * ang), float(rad_err * ang))


def marginal_q_peak(bracket=(2.0, 6.0)) -> tuple[float, float]:
    """Location and height of the maximum of :func:`marginal_q`."""
    res = minimize_scalar(lambda q: -marginal_q(q).value, bounds=bracket, method="bounded",
                          options={"xatol": 1e-5})
    return float(res.x), float(-res.fun)


def curve_csv(coordinate: str, xs: Iterable[float], values: Iterable[float],
              errors: Iterable[float], out: Optional[io.TextIOBase] = None) -> str:
    """CSV with columns (coordinate, value, error_estimate); returns the text."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([coordinate, "value", "error_estimate"])
    for x, v, e in zip(xs, values, errors):
        wr.writerow([repr(float(x)), repr(float(v)), repr(float(e))])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
