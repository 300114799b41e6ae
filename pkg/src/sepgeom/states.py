"""Parameterised density-matrix families, eigensystems and the Peres test.

Every family is described by a :class:`FamilyChart`.  Charts evaluate on
batches of parameter points (arrays of shape ``(N, d)``) so that metric and
integration code can stay vectorised; the single-point helpers
(:func:`build_state`, :meth:`FamilyChart.feasible`) wrap the batch versions.

Two-qubit families are diagonal in the Bell basis and are stored in the
computational basis after expansion.  The Bell basis order is
``(Phi+, Phi-, Psi+, Psi-)`` with ``Phi± = (|00> ± |11>)/√2`` and
``Psi± = (|01> ± |10>)/√2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    InfeasiblePoint,
    NonHermitianInput,
)

SQRT2 = np.sqrt(2.0)
TWO_SQRT2 = 2.0 * SQRT2

#: Eigenvalue tolerance for feasibility and Peres decisions.
TOL_PSD = 1e-10
TOL_HERMITIAN = 1e-12
TOL_TRACE = 1e-12

#: Default escort-parameter range (lower Wehrl bound 1/2, numerical cutoff 500).
Q_RANGE = (0.5, 500.0)

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

BELL_BASIS = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=complex,
).T / SQRT2
"""Columns are the Bell vectors in the computational basis."""

BELL_PROJECTORS = np.einsum("ik,jk->kij", BELL_BASIS, BELL_BASIS.conj())
BELL_LABELS = ("Phi+", "Phi-", "Psi+", "Psi-")


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix (Hermitian, unit trace, PSD)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3, 4):
            raise DimensionError(f"density matrix must be 2x2, 3x3 or 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > TOL_HERMITIAN:
            raise NonHermitianInput("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > TOL_TRACE:
            raise InfeasiblePoint(f"trace {np.trace(m).real:.3e} != 1")
        if np.linalg.eigvalsh(m)[0] < -TOL_PSD:
            raise InfeasiblePoint("matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _as_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != d:
        raise DomainError(f"expected {d} coordinates, got {pts.shape[-1]}")
    return pts


@dataclass(eq=False)
class FamilyChart:
    """A named parameterisation of a density-matrix family.

    ``matrices`` maps ``(N, d)`` points to ``(N, D, D)`` unit-trace Hermitian
    matrices without checking positivity.  ``margin`` is a continuous function
    that is nonnegative exactly on the feasible set; region integration uses
    its zero set to locate boundaries.  ``tangents`` (optional) returns the
    analytic partial derivatives ``(N, d, D, D)``.
    """

    family_id: str
    param_names: tuple[str, ...]
    bounding_box: np.ndarray
    matrix_dim: int
    matrices: Callable[[np.ndarray], np.ndarray]
    margin: Callable[[np.ndarray], np.ndarray]
    tangents: Optional[Callable[[np.ndarray], np.ndarray]] = None
    weights: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reference_margin: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fixed: dict = field(default_factory=dict)
    scales: Optional[np.ndarray] = None

    def __post_init__(self):
        self.bounding_box = np.asarray(self.bounding_box, dtype=float)
        if self.scales is None:
            self.scales = self.bounding_box[:, 1] - self.bounding_box[:, 0]

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def bell_diagonal(self) -> bool:
        return self.weights is not None

    def in_box(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        lo, hi = self.bounding_box.T
        return bool(np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12))

    def feasible(self, p) -> bool:
        pts = _as_points(p, self.dim)
        with np.errstate(invalid="ignore", divide="ignore"):
            return bool(self.margin(pts)[0] >= -TOL_PSD)

    def build(self, p) -> DensityMatrix:
        pts = _as_points(p, self.dim)
        if not self.in_box(pts[0]):
            raise DomainError(f"{self.family_id}: point {pts[0]} outside bounding box")
        if not self.feasible(pts[0]):
            raise InfeasiblePoint(f"{self.family_id}: point {pts[0]} is not a valid state")
        m = self.matrices(pts)[0]
        return DensityMatrix(0.5 * (m + m.conj().T))


def build_state(chart: FamilyChart, p: Sequence[float]) -> DensityMatrix:
    """Density matrix of ``chart`` at parameter point ``p``."""
    return chart.build(p)


def eigensystem(rho) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("expected a square matrix")
    if np.max(np.abs(m - m.conj().T)) > TOL_HERMITIAN:
        raise NonHermitianInput("matrix is not Hermitian")
    return np.linalg.eigh(m)


# ---------------------------------------------------------------- Peres test


def partial_transpose(rho, subsystem: str = "B") -> np.ndarray:
    """Partial transpose of a 2⊗2 matrix (or a stack of them)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape[-2:] != (4, 4):
        raise DimensionError("partial transpose needs a 4x4 (2⊗2) matrix")
    t = m.reshape(m.shape[:-2] + (2, 2, 2, 2))
    if subsystem == "B":
        t = np.swapaxes(t, -3, -1)
    elif subsystem == "A":
        t = np.swapaxes(t, -4, -2)
    else:
        raise DomainError(f"subsystem must be 'A' or 'B', not {subsystem!r}")
    return t.reshape(m.shape)


def peres_margin(matrices: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the partial transpose, batched."""
    pt = partial_transpose(matrices)
    pt = 0.5 * (pt + np.conj(np.swapaxes(pt, -1, -2)))
    return np.linalg.eigvalsh(pt)[..., 0]


def is_separable(rho, tol: float = TOL_PSD) -> bool:
    """Peres–Horodecki verdict; exact for 2⊗2, trivially true for a qubit."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape == (2, 2):
        return True
    if m.shape != (4, 4):
        raise DimensionError(f"separability defined here for 2 and 2⊗2 only, got {m.shape}")
    return bool(peres_margin(m) >= -tol)


# ------------------------------------------------------------ qubit families


def _unit_vectors(theta1, theta2):
    s1 = np.sin(theta1)
    return np.stack([np.cos(theta1), s1 * np.cos(theta2), s1 * np.sin(theta2)], axis=-1)


def _unit_vector_derivs(theta1, theta2):
    """d n / d theta1 and d n / d theta2."""
    c1, s1 = np.cos(theta1), np.sin(theta1)
    c2, s2 = np.cos(theta2), np.sin(theta2)
    d1 = np.stack([-s1, c1 * c2, c1 * s2], axis=-1)
    d2 = np.stack([np.zeros_like(s1), -s1 * s2, s1 * c2], axis=-1)
    return d1, d2


def _bloch_matrices(vecs: np.ndarray) -> np.ndarray:
    return 0.5 * (np.eye(2) + np.einsum("nk,kij->nij", vecs, PAULI))


def escort_radius(r, q):
    """Bloch radius of the escort state: ((1+r)^q - (1-r)^q) / ((1+r)^q + (1-r)^q)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.tanh(q * np.arctanh(np.clip(r, -1.0, 1.0)))


def _qubit_box(with_q: bool) -> np.ndarray:
    box = [[0.0, 1.0], [0.0, np.pi], [0.0, 2 * np.pi]]
    if with_q:
        box.append(list(Q_RANGE))
    return np.array(box)


def bloch_qubit() -> FamilyChart:
    """Standard Bloch-ball qubit in spherical coordinates (r, θ1, θ2)."""

    def matrices(pts):
        r, t1, t2 = pts.T
        return _bloch_matrices(r[:, None] * _unit_vectors(t1, t2))

    def tangents(pts):
        r, t1, t2 = pts.T
        n = _unit_vectors(t1, t2)
        d1, d2 = _unit_vector_derivs(t1, t2)
        vecs = np.stack([n, r[:, None] * d1, r[:, None] * d2], axis=1)
        return 0.5 * np.einsum("ndk,kij->ndij", vecs, PAULI)

    def margin(pts):
        return 0.5 * (1.0 - pts[:, 0])

    return FamilyChart(
        "bloch_qubit", ("r", "theta1", "theta2"), _qubit_box(False), 2,
        matrices, margin, tangents=tangents,
    )


def escort_qubit() -> FamilyChart:
    """Escort qubit family ρ_q = M^q / tr M^q, coordinates (r, θ1, θ2, q)."""

    def matrices(pts):
        r, t1, t2, q = pts.T
        return _bloch_matrices(escort_radius(r, q)[:, None] * _unit_vectors(t1, t2))

    def margin(pts):
        r, q = pts[:, 0], pts[:, 3]
        return np.where(q > 0, 0.5 * (1.0 - r), -1.0)

    return FamilyChart(
        "escort_qubit", ("r", "theta1", "theta2", "q"), _qubit_box(True), 2,
        matrices, margin,
    )


def qutrit_v(extended: bool = False) -> FamilyChart:
    """Three-level family with an extra parameter v (coordinates v, r, θ1, θ2[, q]).

    The 1-3 block is ``v·I + r n·σ`` and the middle entry ``2 - 2v`` (all
    halved); the extended chart raises the matrix to the power q and
    renormalises.
    """
    names = ("v", "r", "theta1", "theta2") + (("q",) if extended else ())
    box = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, np.pi], [0.0, 2 * np.pi]] + ([list(Q_RANGE)] if extended else []))

    def matrices(pts):
        v, r, t1, t2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
        q = pts[:, 4] if extended else np.ones_like(v)
        n = _unit_vectors(t1, t2)
        with np.errstate(invalid="ignore", divide="ignore"):
            up, dn, mid = (v + r) ** q, (v - r) ** q, (2 - 2 * v) ** q
        tot = up + dn + mid
        a = (up + dn) / tot
        bvec = ((up - dn) / tot)[:, None] * n
        out = np.zeros((len(v), 3, 3), dtype=complex)
        blk = 0.5 * (a[:, None, None] * np.eye(2) + np.einsum("nk,kij->nij", bvec, PAULI))
        out[:, 0, 0] = blk[:, 0, 0]
        out[:, 0, 2] = blk[:, 0, 1]
        out[:, 2, 0] = blk[:, 1, 0]
        out[:, 2, 2] = blk[:, 1, 1]
        out[:, 1, 1] = mid / tot
        return out

    def margin(pts):
        v, r = pts[:, 0], pts[:, 1]
        m = np.minimum(v - r, 1.0 - v) / 2.0
        if extended:
            m = np.where(pts[:, 4] > 0, m, -1.0)
        return np.minimum(m, r)

    return FamilyChart(
        "qutrit_v", names, box, 3, matrices, margin,
        fixed={"extended": extended},
    )


# -------------------------------------------------------- Bell-diagonal charts


def _bell_chart(family_id, names, box, weights, jacobian, margin, **kw) -> FamilyChart:
    def matrices(pts):
        return np.einsum("nk,kij->nij", weights(pts).astype(complex), BELL_PROJECTORS)

    def tangents(pts):
        return np.einsum("ndk,kij->ndij", jacobian(pts).astype(complex), BELL_PROJECTORS)

    return FamilyChart(
        family_id, names, np.asarray(box, dtype=float), 4, matrices, margin,
        tangents=tangents, weights=weights, **kw,
    )


def _ar_levels(b, s):
    """Unnormalised Bell levels (Phi+, Psi-, other pair) of the AR family."""
    return s + TWO_SQRT2 * b, s - TWO_SQRT2 * b, 8.0 - s


def _ar_reference_margin(pts):
    b, s = pts[:, 0], pts[:, 1]
    return np.minimum.reduce([TWO_SQRT2 * b, s - TWO_SQRT2 * b, 8.0 - s]) / 16.0


def ar_bell(q: float = 1.0, extended: bool = False) -> FamilyChart:
    """Abe–Rajagopal two-qubit family.

    Bell weights are proportional to ``(s + 2√2 b)^{1/q}`` (Phi+),
    ``(s - 2√2 b)^{1/q}`` (Psi-) and ``(8 - s)^{1/q}`` on each of Phi-, Psi+,
    where ``b`` is the mean and ``s`` the second moment of the Bell-CHSH
    observable.  With ``extended=True`` the escort order q is the third
    coordinate; otherwise it is held at ``q``.
    """
    if not extended and q <= 0:
        raise DomainError("escort order q must be positive")
    names = ("b", "sigma2") + (("q",) if extended else ())
    box = [[-TWO_SQRT2, TWO_SQRT2], [0.0, 8.0]] + ([[0.05, 500.0]] if extended else [])

    def _q(pts):
        return pts[:, 2] if extended else np.full(len(pts), float(q))

    def _powers(pts):
        qq = _q(pts)
        u = np.stack(_ar_levels(pts[:, 0], pts[:, 1]), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(u > 0, np.abs(u) ** (1.0 / qq[:, None]), 0.0)
        return u, a, qq

    def weights(pts):
        _, a, _ = _powers(pts)
        tot = a[:, 0] + a[:, 1] + 2 * a[:, 2]
        return np.stack([a[:, 0], a[:, 2], a[:, 2], a[:, 1]], axis=1) / tot[:, None]

    def jacobian(pts):
        u, a, qq = _powers(pts)
        e = 1.0 / qq[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            da_du = np.where(u > 0, e * a / u, 0.0)
            da_dq = np.where(u > 0, -a * np.log(np.where(u > 0, u, 1.0)) * e * e, 0.0)
        du = np.array([[TWO_SQRT2, -TWO_SQRT2, 0.0], [1.0, 1.0, -1.0]])
        dA = [da_du * du[0], da_du * du[1]]
        if extended:
            dA.append(da_dq)
        dA = np.stack(dA, axis=1)  # (N, d, 3)
        tot = a[:, 0] + a[:, 1] + 2 * a[:, 2]
        dtot = dA[..., 0] + dA[..., 1] + 2 * dA[..., 2]
        w = np.stack([a[:, 0], a[:, 1], a[:, 2]], axis=1) / tot[:, None]
        dw = (dA - w[:, None, :] * dtot[..., None]) / tot[:, None, None]
        return np.stack([dw[..., 0], dw[..., 2], dw[..., 2], dw[..., 1]], axis=-1)

    def margin(pts):
        m = np.minimum.reduce(_ar_levels(pts[:, 0], pts[:, 1])) / 16.0
        if extended:
            m = np.where(pts[:, 2] > 0, m, -1.0)
        return m

    return _bell_chart(
        "ar_bell", names, box, weights, jacobian, margin,
        reference_margin=_ar_reference_margin,
        fixed={} if extended else {"q": float(q)},
    )


def _alpha_weights(b, s, alpha):
    p2 = (s / 8.0 - b / TWO_SQRT2) / (alpha * (1.0 + alpha))
    p1 = b / TWO_SQRT2 + alpha * p2
    p3 = 0.5 * (1.0 - p1 - p2)
    return p1, p2, p3


def _check_alpha(alpha):
    if abs(alpha) < 1e-12 or abs(alpha + 1.0) < 1e-12:
        raise DomainError("alpha = 0 and alpha = -1 make the moment constraints singular")


def jaynes_alpha(alpha: float) -> FamilyChart:
    """Trivariate Jaynes model with generalised observable B_α, α held fixed.

    Coordinates ``(b, sigma2)`` are the first and second moments of
    ``B_α = 2√2(|Φ+><Φ+| - α|Ψ-><Ψ-|)``; the Bell weights solve the two linear
    moment equations with equal weight on Φ- and Ψ+.
    """
    _check_alpha(alpha)
    alpha = float(alpha)
    verts = np.array([[0.0, 0.0], [TWO_SQRT2, 8.0], [-TWO_SQRT2 * alpha, 8.0 * alpha**2]])
    lo = np.minimum(verts.min(axis=0), [0.0, 0.0])
    hi = np.maximum(verts.max(axis=0), [TWO_SQRT2, 8.0])

    def weights(pts):
        p1, p2, p3 = _alpha_weights(pts[:, 0], pts[:, 1], alpha)
        return np.stack([p1, p3, p3, p2], axis=1)

    jac_b = np.array(_alpha_weights(1.0, 0.0, alpha)) - np.array(_alpha_weights(0.0, 0.0, alpha))
    jac_s = np.array(_alpha_weights(0.0, 1.0, alpha)) - np.array(_alpha_weights(0.0, 0.0, alpha))
    jac = np.array([[j[0], j[2], j[2], j[1]] for j in (jac_b, jac_s)])

    def jacobian(pts):
        return np.broadcast_to(jac, (len(pts),) + jac.shape).copy()

    def margin(pts):
        return weights(pts).min(axis=1)

    return _bell_chart(
        "jaynes_alpha", ("b", "sigma2"), np.stack([lo, hi], axis=1),
        weights, jacobian, margin,
        reference_margin=_ar_reference_margin,
        fixed={"alpha": alpha},
    )


def horodecki_dispersion(b):
    """Second moment along the one-constraint (Horodecki) curve: 4(1 + b²/8)."""
    return 4.0 + 0.5 * np.asarray(b) ** 2


def jaynes_alpha_bivariate(alpha: float, tangent: str = "frozen") -> FamilyChart:
    """Bivariate model: the α-chart restricted to σ² = 4(1 + b²/8), coordinate b.

    ``tangent="induced"`` differentiates along the curve (the induced metric);
    ``tangent="frozen"`` keeps σ² fixed in the derivative, i.e. uses the
    b-direction of the trivariate chart.  The latter reproduces the published
    bivariate Hilbert–Schmidt volumes.
    """
    _check_alpha(alpha)
    if tangent not in ("frozen", "induced"):
        raise DomainError("tangent must be 'frozen' or 'induced'")
    alpha = float(alpha)

    def weights(pts):
        b = pts[:, 0]
        p1, p2, p3 = _alpha_weights(b, horodecki_dispersion(b), alpha)
        return np.stack([p1, p3, p3, p2], axis=1)

    def jacobian(pts):
        b = pts[:, 0]
        ds = b if tangent == "induced" else np.zeros_like(b)
        d1 = np.array(_alpha_weights(1.0, 0.0, alpha)) - np.array(_alpha_weights(0.0, 0.0, alpha))
        d2 = np.array(_alpha_weights(0.0, 1.0, alpha)) - np.array(_alpha_weights(0.0, 0.0, alpha))
        dp = d1[None, :] + ds[:, None] * d2[None, :]
        return np.stack([dp[:, 0], dp[:, 2], dp[:, 2], dp[:, 1]], axis=1)[:, None, :]

    def margin(pts):
        return weights(pts).min(axis=1)

    def reference_margin(pts):
        b = pts[:, 0]
        return np.minimum(b, TWO_SQRT2 - b) / 16.0

    # feasible set is bounded; locate it on a coarse scan
    scan = np.linspace(-50.0, 50.0, 20001)[:, None]
    ok = scan[margin(scan) >= 0, 0]
    lo = min(ok.min() if ok.size else 0.0, 0.0) - 1e-9
    hi = max(ok.max() if ok.size else TWO_SQRT2, TWO_SQRT2) + 1e-9
    return _bell_chart(
        "jaynes_alpha_bivariate", ("b",), [[lo, hi]], weights, jacobian, margin,
        reference_margin=reference_margin,
        fixed={"alpha": alpha, "tangent": tangent},
    )


def _tlb_linear(pts):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    return np.stack([1 - x, 1 - y, 1 - z, 1 + x + y + z], axis=1) / 4.0


_TLB_JAC = np.array([[-1, 0, 0, 1], [0, -1, 0, 1], [0, 0, -1, 1]], dtype=float) / 4.0


def tlb() -> FamilyChart:
    """Tsallis–Lloyd–Baranger Bell-diagonal states, coordinates (x, y, z)."""

    def jacobian(pts):
        return np.broadcast_to(_TLB_JAC, (len(pts), 3, 4)).copy()

    def margin(pts):
        return _tlb_linear(pts).min(axis=1)

    return _bell_chart(
        "tlb", ("x", "y", "z"), [[-3.0, 1.0]] * 3, _tlb_linear, jacobian, margin,
    )


def tlb_escort() -> FamilyChart:
    """Escort of the TLB weights (componentwise q-th power, renormalised)."""

    def _parts(pts):
        w = _tlb_linear(pts[:, :3])
        q = pts[:, 3][:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(w > 0, np.abs(w) ** q, 0.0)
        return w, a, q

    def weights(pts):
        _, a, _ = _parts(pts)
        return a / a.sum(axis=1, keepdims=True)

    def jacobian(pts):
        w, a, q = _parts(pts)
        with np.errstate(invalid="ignore", divide="ignore"):
            da_dw = np.where(w > 0, q * a / np.where(w > 0, w, 1.0), 0.0)
            da_dq = np.where(w > 0, a * np.log(np.where(w > 0, w, 1.0)), 0.0)
        dA = np.concatenate([da_dw[:, None, :] * _TLB_JAC[None], da_dq[:, None, :]], axis=1)
        tot = a.sum(axis=1)
        dtot = dA.sum(axis=2)
        return (dA - (a / tot[:, None])[:, None, :] * dtot[..., None]) / tot[:, None, None]

    def margin(pts):
        return np.where(pts[:, 3] > 0, _tlb_linear(pts[:, :3]).min(axis=1), -1.0)

    return _bell_chart(
        "tlb_escort", ("x", "y", "z", "q"), [[-3.0, 1.0]] * 3 + [list(Q_RANGE)],
        weights, jacobian, margin,
    )


_FACTORIES = {
    "bloch_qubit": bloch_qubit,
    "escort_qubit": escort_qubit,
    "qutrit_v": qutrit_v,
    "ar_bell": ar_bell,
    "jaynes_alpha": jaynes_alpha,
    "jaynes_alpha_bivariate": jaynes_alpha_bivariate,
    "tlb": tlb,
    "tlb_escort": tlb_escort,
}

FAMILY_IDS = tuple(_FACTORIES)


def get_chart(family_id: str, **params) -> FamilyChart:
    """Look up a chart factory by id and call it with ``params``."""
    try:
        factory = _FACTORIES[family_id]
    except KeyError:
        raise DomainError(f"unknown family {family_id!r}; known: {', '.join(FAMILY_IDS)}") from None
    return factory(**params)


def bell_weights(rho) -> np.ndarray:
    """Diagonal of ``rho`` in the Bell basis (Phi+, Phi-, Psi+, Psi-)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise DimensionError("Bell weights need a 4x4 matrix")
    return np.real(np.einsum("ik,ij,jk->k", BELL_BASIS.conj(), m, BELL_BASIS))


def reparameterize_ar(b_half: float, sigma2_half: float) -> tuple[float, float]:
    """Map AR coordinates at q = 1/2 to the q = 1 coordinates of the same state."""
    if not ar_bell(0.5).feasible([b_half, sigma2_half]):
        raise InfeasiblePoint(f"({b_half}, {sigma2_half}) is not a q=1/2 AR state")
    b, s = float(b_half), float(sigma2_half)
    den = 4 * b * b + s * s - 8 * s + 32
    return 8 * b * s / den, 4 * (8 * b * b + s * s) / den
