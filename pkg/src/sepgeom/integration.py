"""Volumes, separable volumes and separability probabilities over state families.

Regions are described by continuous *margins* (nonnegative exactly on the
region).  Both integrators use the same nested mapping of the unit cube onto
the region:

* at level k the admissible values of coordinate k (given the outer
  coordinates) form a union of segments; for outer levels the margin is
  first maximised over the remaining inner coordinates (the regions used
  here are convex, or at least have connected slices, so a coarse scan plus
  golden-section search finds the maximum);
* segment ends are located by a coarse scan followed by vectorised
  bisection;
* inside a segment the coordinate is mapped through a sin^m endpoint
  substitution, which removes the integrable inverse-power singularities of
  monotone-metric volume elements at the boundary of the state space.

When the Bell weights of a chart are affine in its coordinates and the
predicate is convex (feasible or separable), the region is a convex
polytope.  Nested slicing would then put kinks inside the outer integrals,
so cubature instead triangulates the polytope (fan from its Chebyshev centre
over the triangulated hull) and integrates every simplex in collapsed
coordinates with the same endpoint substitution, which keeps all kinks and
all boundary singularities on cube faces.

``cubature`` applies tensor Gauss–Legendre rules through the mapping and
estimates the error by doubling the rule; ``monte_carlo`` draws stratified,
antithetic samples in the unit cube and reports three standard errors over
independent seeded batches.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.special import betainc, beta as beta_fn

from .errors import DegenerateTotal, DomainError, NonConvergence, SepGeomError, UndefinedBranch
from .metrics import KAPPA_CONVENTION, KAPPA_HS, METRIC_IDS, _resolve_f, tangent_matrices, tensor_batch, volume_elements
from .states import BELL_BASIS, SQRT2, TWO_SQRT2, FamilyChart, get_chart, peres_margin

N_MAX_DEFAULT = int(1e8)
#: Largest single cubature pass (nodes held in memory at once).
MAX_PASS_POINTS = 2**23
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

PREDICATES = ("feasible", "separable", "entangled")
DOMAINS = ("feasible", "reference", "feasible+reference")


# ------------------------------------------------------------------ data types


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error: float
    n_evals: int
    method: str
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Region:
    """Integration region: a chart, a domain convention and a predicate.

    ``domain`` selects which constraints define the ambient set:
    ``"feasible"`` (positive semidefinite states), ``"reference"`` (the
    chart's fixed reference region, PSD not imposed) or both.
    ``predicate`` further restricts to Peres-separable or entangled points.
    """

    chart: FamilyChart
    predicate: str = "feasible"
    domain: str = "feasible"
    box: Optional[np.ndarray] = None
    order: Optional[tuple] = None  # slicing order of the coordinates, outermost first

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise DomainError(f"predicate must be one of {PREDICATES}")
        if self.domain not in DOMAINS:
            raise DomainError(f"domain must be one of {DOMAINS}")
        if "reference" in self.domain and self.chart.reference_margin is None:
            raise DomainError(f"{self.chart.family_id} has no reference region")
        if self.box is None:
            box = self.chart.bounding_box.copy()
            if "reference" in self.domain:
                ref = reference_box(self.chart)
                box[:, 0] = np.maximum(box[:, 0], ref[:, 0])
                box[:, 1] = np.minimum(box[:, 1], ref[:, 1])
            self.box = box
        self.box = np.asarray(self.box, dtype=float)
        if self.order is None:
            self.order = tuple(range(self.chart.dim))
        if sorted(self.order) != list(range(self.chart.dim)):
            raise DomainError("order must be a permutation of the coordinate indices")

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def bounding_box(self) -> np.ndarray:
        return self.box

    def peres(self, pts: np.ndarray) -> np.ndarray:
        """Peres margin: 1/2 − max Bell weight for Bell-diagonal charts, else λ_min(ρ^{T_B})."""
        if self.chart.bell_diagonal:
            return 0.5 - self.chart.weights(pts).max(axis=1)
        return peres_margin(self.chart.matrices(pts))

    def margin(self, pts: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            parts = []
            if self.domain in ("feasible", "feasible+reference"):
                parts.append(self.chart.margin(pts))
            if "reference" in self.domain:
                parts.append(self.chart.reference_margin(pts))
            if self.predicate == "separable":
                parts.append(self.peres(pts))
            elif self.predicate == "entangled":
                parts.append(-self.peres(pts))
            m = np.minimum.reduce(parts) if len(parts) > 1 else parts[0]
        return np.where(np.isnan(m), -np.inf, m)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo, hi = self.box.T
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        return inside & (self.margin(pts) >= 0)


def reference_box(chart: FamilyChart) -> np.ndarray:
    """Bounding box of the reference region 0 ≤ 2√2 b ≤ σ² ≤ 8 (or 0 ≤ b ≤ 2√2)."""
    if chart.dim == 1:
        return np.array([[0.0, TWO_SQRT2]])
    return np.array([[0.0, TWO_SQRT2], [0.0, 8.0]])


# ------------------------------------------------------------ nested mapping


def _psi(t, m: int):
    """Endpoint substitution ψ(t) on [0, 1] with ψ'(t) ∝ sin^m(πt); returns ψ, ψ'."""
    if m == 0:
        return t, np.ones_like(t)
    a = 0.5 * (m + 1)
    s = np.sin(0.5 * np.pi * t) ** 2
    psi = betainc(a, a, s)
    dpsi = (0.5 * np.pi) * np.sin(np.pi * t) ** m * 2.0 ** (1 - m) / beta_fn(a, a)
    return psi, dpsi


class _Mapper:
    """Segment search for the nested mapping of a region."""

    def __init__(self, region: Region, scan: int = 33, golden_iters: int = 40, bisect_iters: int = 52):
        self.region = region
        self.scan = scan
        self.golden_iters = golden_iters
        self.bisect_iters = bisect_iters
        self.perm = np.asarray(region.order)
        self.inv = np.argsort(self.perm)
        self.lo, self.hi = region.box[self.perm, 0], region.box[self.perm, 1]
        self.d = region.dim
        self.n_margin = 0

    # projected margin -------------------------------------------------------
    def pm(self, prefix: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
        """Max over coordinates > k of the margin, at prefix (M, k) and x (M, S)."""
        M, S = x.shape
        full = np.concatenate([np.repeat(prefix, S, axis=0), x.reshape(-1, 1)], axis=1)
        if k == self.d - 1:
            self.n_margin += len(full)
            return self.region.margin(full[:, self.inv]).reshape(M, S)
        return self.maximise(full, k + 1)[0].reshape(M, S)

    def maximise(self, prefix: np.ndarray, k: int):
        """Max and argmax over coordinate k of pm (coarse scan, then golden section)."""
        lo, hi = self.lo[k], self.hi[k]
        M = len(prefix)
        ns = 9
        grid = np.linspace(lo, hi, ns)
        vals = self.pm(prefix, np.broadcast_to(grid, (M, ns)).copy(), k)
        best = np.argmax(vals, axis=1)
        a = grid[np.maximum(best - 1, 0)]
        b = grid[np.minimum(best + 1, ns - 1)]
        c = b - GOLDEN * (b - a)
        dd = a + GOLDEN * (b - a)
        fc = self.pm(prefix, c[:, None], k)[:, 0]
        fd = self.pm(prefix, dd[:, None], k)[:, 0]
        for _ in range(self.golden_iters):
            left = fc >= fd
            b = np.where(left, dd, b)
            a = np.where(left, a, c)
            new_c = b - GOLDEN * (b - a)
            new_d = a + GOLDEN * (b - a)
            # reuse one evaluation
            fd_new = np.where(left, fc, np.nan)
            fc_new = np.where(left, np.nan, fd)
            c_eval = np.where(left, new_c, new_d)
            fe = self.pm(prefix, c_eval[:, None], k)[:, 0]
            fc = np.where(left, fe, fc_new)
            fd = np.where(left, fd_new, fe)
            c, dd = new_c, new_d
        xm = np.where(fc >= fd, c, dd)
        fm = np.maximum(fc, fd)
        gbest = vals[np.arange(M), best]
        use_grid = gbest > fm
        return np.where(use_grid, gbest, fm), np.where(use_grid, grid[best], xm)

    def _bisect(self, prefix, a, b, k, a_inside: bool):
        """Boundary between a and b (one inside, one outside)."""
        inside, outside = (a, b) if a_inside else (b, a)
        for _ in range(self.bisect_iters):
            mid = 0.5 * (inside + outside)
            ok = self.pm(prefix, mid[:, None], k)[:, 0] >= 0
            inside = np.where(ok, mid, inside)
            outside = np.where(ok, outside, mid)
        return inside

    def segments(self, prefix: np.ndarray, k: int, max_segments: int = 4):
        """Admissible segments of coordinate k: arrays a, b (M, K) and a validity mask."""
        M = len(prefix)
        lo, hi = self.lo[k], self.hi[k]
        S = self.scan
        grid = np.linspace(lo, hi, S)
        vals = self.pm(prefix, np.broadcast_to(grid, (M, S)).copy(), k)
        ok = vals >= 0
        A = np.full((M, max_segments), np.nan)
        B = np.full((M, max_segments), np.nan)
        valid = np.zeros((M, max_segments), dtype=bool)
        # run starts / ends
        padded = np.concatenate([np.zeros((M, 1), bool), ok, np.zeros((M, 1), bool)], axis=1)
        diff = np.diff(padded.astype(np.int8), axis=1)
        starts = [np.flatnonzero(row == 1) for row in diff]
        ends = [np.flatnonzero(row == -1) - 1 for row in diff]
        rows, slots, s_idx, e_idx = [], [], [], []
        for i in range(M):
            for j, (s, e) in enumerate(zip(starts[i][:max_segments], ends[i][:max_segments])):
                rows.append(i)
                slots.append(j)
                s_idx.append(s)
                e_idx.append(e)
        if rows:
            rows = np.array(rows)
            slots = np.array(slots)
            s_idx = np.array(s_idx)
            e_idx = np.array(e_idx)
            left = grid[s_idx].copy()
            need = s_idx > 0
            if np.any(need):
                left[need] = self._bisect(prefix[rows[need]], grid[s_idx[need]], grid[s_idx[need] - 1], k, True)
            right = grid[e_idx].copy()
            need = e_idx < S - 1
            if np.any(need):
                right[need] = self._bisect(prefix[rows[need]], grid[e_idx[need]], grid[e_idx[need] + 1], k, True)
            A[rows, slots] = left
            B[rows, slots] = right
            valid[rows, slots] = right > left
        # slices narrower than the scan spacing: seed from the maximiser
        empty = ~ok.any(axis=1)
        if np.any(empty):
            idx = np.flatnonzero(empty)
            fmax, xmax = self.maximise(prefix[idx], k)
            hit = fmax >= 0
            if np.any(hit):
                idx, xs = idx[hit], xmax[hit]
                lo_arr = np.full(len(idx), lo)
                hi_arr = np.full(len(idx), hi)
                left = self._bisect(prefix[idx], xs, lo_arr, k, True)
                right = self._bisect(prefix[idx], xs, hi_arr, k, True)
                A[idx, 0], B[idx, 0] = left, right
                valid[idx, 0] = right > left
        return A, B, valid


def _expand(prefix, weights, A, B, valid, x_unit, w_unit):
    rows, slots = np.nonzero(valid)
    a, b = A[rows, slots], B[rows, slots]
    n = len(x_unit)
    x = a[:, None] + (b - a)[:, None] * x_unit[None, :]
    w = weights[rows][:, None] * (b - a)[:, None] * w_unit[None, :]
    new_prefix = np.concatenate([np.repeat(prefix[rows], n, axis=0), x.reshape(-1, 1)], axis=1)
    return new_prefix, w.ravel()


def _cubature_once(mapper: _Mapper, integrand, n: int, m: int):
    t, wt = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    psi, dpsi = _psi(t, m)
    prefix = np.zeros((1, 0))
    weights = np.ones(1)
    for k in range(mapper.d):
        A, B, valid = mapper.segments(prefix, k)
        prefix, weights = _expand(prefix, weights, A, B, valid, psi, dpsi * wt)
    if len(prefix) == 0:
        return 0.0, 0
    vals = np.asarray(integrand(prefix[:, mapper.inv]), dtype=float)
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return float(np.sum(weights * vals)), len(prefix)


def _integrand_chunks(integrand, pts, chunk=200_000):
    if len(pts) <= chunk:
        return integrand(pts)
    return np.concatenate([integrand(pts[i:i + chunk]) for i in range(0, len(pts), chunk)])


def _stratified_uniforms(rng, n_pairs: int, d: int) -> np.ndarray:
    """Stratified sample of the unit cube (one point per cell) plus antithetic mirrors."""
    k = max(1, int(np.floor(n_pairs ** (1.0 / d))))
    cells = k**d
    extra = n_pairs - cells
    grids = np.stack(np.meshgrid(*[np.arange(k)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    u = (grids + rng.random((cells, d))) / k
    if extra > 0:
        u = np.concatenate([u, rng.random((extra, d))])
    return np.concatenate([u, 1.0 - u])


def _mc_batch(mapper: _Mapper, integrand, u: np.ndarray, m: int):
    """Map unit-cube samples through the nested segments and return weighted integrand values."""
    N, d = u.shape
    prefix = np.zeros((N, 0))
    weights = np.ones(N)
    alive = np.ones(N, dtype=bool)
    for k in range(d):
        if k == 0:  # the outermost segments do not depend on the sample
            A, B, valid = (np.repeat(a, N, axis=0) for a in mapper.segments(prefix[:1], 0))
        else:
            A, B, valid = mapper.segments(prefix, k)
        L = np.where(valid, B - A, 0.0)
        total = L.sum(axis=1)
        alive &= total > 0
        cum = np.cumsum(L, axis=1)
        target = u[:, k] * total
        j = np.minimum((target[:, None] > cum).sum(axis=1), L.shape[1] - 1)
        rows = np.arange(N)
        Lj = L[rows, j]
        start = cum[rows, j] - Lj
        with np.errstate(invalid="ignore", divide="ignore"):
            tt = np.clip(np.where(Lj > 0, (target - start) / Lj, 0.5), 0.0, 1.0)
        psi, dpsi = _psi(tt, m)
        x = np.where(alive, np.nan_to_num(A[rows, j]) + Lj * psi, 0.5 * (mapper.lo[k] + mapper.hi[k]))
        weights = weights * total * dpsi
        prefix = np.concatenate([prefix, x[:, None]], axis=1)
    vals = np.zeros(N)
    if np.any(alive):
        v = np.asarray(integrand(prefix[alive][:, mapper.inv]), dtype=float)
        vals[alive] = np.where(np.isfinite(v), v, 0.0)
    return weights * vals


# ------------------------------------------------------------ polytope path

# Reference region 0 ≤ 2√2 b ≤ σ² ≤ 8 (or 0 ≤ b ≤ 2√2) as rows [a | c] of a·x + c ≤ 0.
_REFERENCE_HALFSPACES = {
    2: np.array([[-1.0, 0.0, 0.0], [TWO_SQRT2, -1.0, 0.0], [0.0, 1.0, -8.0]]),
    1: np.array([[-1.0, 0.0], [1.0, -TWO_SQRT2]]),
}


def _affine_weights(chart: FamilyChart) -> Optional[np.ndarray]:
    """Coefficients (d+1, 4) with weights = [x, 1] @ coef, or None if the weights are not affine."""
    if not chart.bell_diagonal:
        return None
    d = chart.dim
    lo, hi = chart.bounding_box.T
    rng = np.random.default_rng(12345)
    pts = lo + (hi - lo) * rng.random((64 * d + 64, d))

    def fit(p):
        if len(p) < 4 * d + 8:
            return None
        with np.errstate(all="ignore"):
            W = chart.weights(p)
        if not np.all(np.isfinite(W)):
            return None
        X = np.hstack([p, np.ones((len(p), 1))])
        coef = np.linalg.lstsq(X, W, rcond=None)[0]
        if np.max(np.abs(X @ coef - W)) > 1e-10 * (1.0 + np.abs(W).max()):
            return None
        return coef

    coef = fit(pts)
    if coef is None:
        # charts may clip weights outside the feasible set; retry on feasible points only
        with np.errstate(all="ignore"):
            coef = fit(pts[chart.margin(pts) > 0])
    return coef


def polytope_halfspaces(region: Region) -> Optional[np.ndarray]:
    """Rows [a | c] (a·x + c ≤ 0) describing the region when it is a convex polytope, else None."""
    if region.predicate == "entangled" or region.dim < 2:
        return None
    coef = _affine_weights(region.chart)
    if coef is None:
        return None
    W, c = coef[:-1].T, coef[-1]
    rows = []
    if region.domain in ("feasible", "feasible+reference"):
        rows.append(np.hstack([-W, -c[:, None]]))
    if "reference" in region.domain:
        ref = _REFERENCE_HALFSPACES.get(region.dim)
        if ref is None:
            return None
        rows.append(ref)
    if region.predicate == "separable":
        rows.append(np.hstack([W, (c - 0.5)[:, None]]))
    eye = np.eye(region.dim)
    lo, hi = region.box.T
    rows.append(np.hstack([-eye, lo[:, None]]))
    rows.append(np.hstack([eye, -hi[:, None]]))
    H = np.vstack(rows)
    keep = np.linalg.norm(H[:, :-1], axis=1) > 1e-14
    return H[keep]


def polytope_simplices(H: np.ndarray) -> np.ndarray:
    """Simplices (S, d+1, d) covering {x : a·x + c ≤ 0}; vertex 0 of each is an interior point."""
    A, c = H[:, :-1], H[:, -1]
    d = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.hstack([A, norms[:, None]]), b_ub=-c,
                  bounds=[(None, None)] * d + [(0.0, None)], method="highs")
    if not res.success or res.x[-1] <= 1e-12 * (1.0 + np.abs(res.x[:d]).max()):
        return np.zeros((0, d + 1, d))
    centre = res.x[:d]
    verts = HalfspaceIntersection(H, centre).intersections
    scale = 1.0 + np.abs(verts).max()
    uniq: list[np.ndarray] = []
    for v in verts:
        if not any(np.max(np.abs(v - u)) < 1e-9 * scale for u in uniq):
            uniq.append(v)
    V = np.array(uniq)
    hull = ConvexHull(V)  # facets are triangulated (Qt)
    facets = V[hull.simplices]
    return np.concatenate([np.broadcast_to(centre, (len(facets), 1, d)), facets], axis=1)


def _simplex_cubature_once(simplices: np.ndarray, integrand, n: int, m: int):
    """Collapsed-coordinate tensor rule x = v0 + Σ_j (u_1⋯u_j)(v_j − v_{j−1}) on every simplex."""
    S, _, d = simplices.shape
    t, wt = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    psi, dpsi = _psi(t, m)
    w1 = 0.5 * wt * dpsi
    U = np.stack(np.meshgrid(*[psi] * d, indexing="ij"), axis=-1).reshape(-1, d)
    Wt = np.ones(len(U))
    for j, wj in enumerate(np.meshgrid(*[w1] * d, indexing="ij")):
        Wt = Wt * wj.ravel() * U[:, j] ** (d - 1 - j)
    prods = np.cumprod(U, axis=1)  # (P, d)
    E = np.diff(simplices, axis=1)  # (S, d, d): rows e_j
    dets = np.abs(np.linalg.det(E))
    pts = simplices[:, None, 0, :] + np.einsum("pj,sjk->spk", prods, E)
    vals = np.asarray(integrand(pts.reshape(-1, d)), dtype=float).reshape(S, -1)
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return float(np.sum(dets[:, None] * Wt[None, :] * vals)), S * len(U)


def integrate(region: Region, integrand: Callable[[np.ndarray], np.ndarray], tol: float = 1e-6,
              seed: int = 0, method: str = "cubature", n_max: int = N_MAX_DEFAULT,
              m: int = 3, n_start: Optional[int] = None, relative: bool = True,
              n_batches: int = 8, workers: int = 1) -> QuadratureResult:
    """Integrate ``integrand`` (vectorised over points (N, d)) over ``region``.

    ``tol`` is relative to the value when ``relative`` (default).  Cubature
    doubles the per-level Gauss–Legendre order until successive estimates
    agree; Monte Carlo doubles the sample size until three standard errors
    are below the tolerance.  Raises :class:`NonConvergence` when the
    evaluation budget ``n_max`` is exhausted first.

    ``workers`` > 1 evaluates the Monte Carlo batches on a thread pool; each
    batch owns its generator and the reduction order is fixed, so results do
    not depend on the number of workers.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    mapper = _Mapper(region)
    f = lambda pts: _integrand_chunks(integrand, pts)
    meta = {"seed": seed, "tol": tol, "substitution_order": m}
    if method == "cubature":
        H = polytope_halfspaces(region)
        if H is not None:
            simplices = polytope_simplices(H)
            meta.update(scheme="simplex", n_simplices=len(simplices))
            if len(simplices) == 0:
                return QuadratureResult(0.0, 0.0, 0, "cubature", meta)
            rule = lambda n: _simplex_cubature_once(simplices, f, n, m)
            n = n_start or {2: 24, 3: 12}.get(region.dim, 8)
        else:
            meta.update(scheme="nested")
            rule = lambda n: _cubature_once(mapper, f, n, m)
            n = n_start or {1: 64, 2: 48, 3: 24}.get(region.dim, 12)
        prev, used = rule(n)
        total_evals = used
        while True:
            n *= 2
            cur, used = rule(n)
            total_evals += used
            err = abs(cur - prev)
            target = tol * abs(cur) if relative else tol
            if err <= target or (cur == 0.0 and prev == 0.0):
                meta.update(nodes_per_level=n, margin_evals=mapper.n_margin)
                return QuadratureResult(cur, err, total_evals, "cubature", meta)
            if total_evals + used * 2**region.dim > n_max or used * 2**region.dim > MAX_PASS_POINTS:
                raise NonConvergence(
                    f"cubature budget exhausted: estimate {cur:.10g} ± {err:.2e} after {total_evals} evaluations"
                )
            prev = cur
    if method == "monte_carlo":
        seeds = np.random.SeedSequence(seed).spawn(n_batches)
        rngs = [np.random.default_rng(s) for s in seeds]
        n_pairs = n_start or 2048
        sums = np.zeros(n_batches)
        counts = np.zeros(n_batches)
        total_evals = 0
        def batch(rng, n_pairs):
            vals = _mc_batch(mapper, f, _stratified_uniforms(rng, n_pairs, region.dim), m)
            return float(vals.sum()), len(vals)

        pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        while True:
            if pool is None:
                results = [batch(rng, n_pairs) for rng in rngs]
            else:
                results = list(pool.map(batch, rngs, [n_pairs] * n_batches))
            for i, (sm, cnt) in enumerate(results):
                sums[i] += sm
                counts[i] += cnt
                total_evals += cnt
            means = sums / counts
            value = float(means.mean())
            se = float(means.std(ddof=1) / np.sqrt(n_batches))
            target = tol * abs(value) if relative else tol
            if 3 * se <= target:
                if pool is not None:
                    pool.shutdown()
                meta.update(samples=int(counts.sum()), batches=n_batches)
                return QuadratureResult(value, 3 * se, total_evals, "monte_carlo", meta)
            if total_evals * 3 > n_max:
                if pool is not None:
                    pool.shutdown()
                raise NonConvergence(
                    f"Monte Carlo budget exhausted: estimate {value:.8g} ± {3 * se:.2e} after {total_evals} samples"
                )
            n_pairs *= 2
    raise DomainError(f"unknown method {method!r}")


# ------------------------------------------------------------ volume elements


def _bell_dweights(chart: FamilyChart, pts: np.ndarray) -> np.ndarray:
    T = tangent_matrices(chart, pts)
    return np.real(np.einsum("ak,niab,bk->nik", BELL_BASIS.conj(), T, BELL_BASIS))


def element_function(chart: FamilyChart, metric_id: str, kappa: float = KAPPA_HS) -> Callable:
    """Vectorised volume element √det g for the chart and metric.

    Bell-diagonal charts use the commuting reduction g = Σ_k ∂p_k∂p_k / (4 p_k f(1))
    (or κ Σ ∂p_k∂p_k for Hilbert–Schmidt); other charts use the eigenbasis formula.
    """
    f = _resolve_f(metric_id)
    if chart.bell_diagonal and chart.tangents is not None:
        f1 = None if f is None else float(f(1.0))

        def element(pts):
            # √det(M Mᵀ) as the product of the singular values of M; forming
            # the Gram matrix would square its condition number, which near
            # the boundary exceeds 1e8.
            dw = _bell_dweights(chart, pts)
            if f1 is None:
                M = np.sqrt(kappa) * dw
            else:
                w = chart.weights(pts)
                with np.errstate(divide="ignore", invalid="ignore"):
                    scale = np.where(w > 0, np.sqrt(0.25 / (f1 * w)), 0.0)
                M = dw * scale[:, None, :]
            good = np.all(np.isfinite(M), axis=(1, 2))
            out = np.full(len(M), np.nan)
            if np.any(good):
                out[good] = np.prod(np.linalg.svd(M[good], compute_uv=False), axis=1)
            return out

        return element

    def element(pts):
        return volume_elements(tensor_batch(chart, pts, metric_id, kappa=kappa, strict=False))[0]

    return element


# ---------------------------------------------------------------- conventions

FAMILY_ALIASES = {
    "trivariate": "jaynes_alpha",
    "trivariate_alpha": "jaynes_alpha",
    "bivariate": "jaynes_alpha_bivariate",
    "bivariate_alpha": "jaynes_alpha_bivariate",
    "jaynes": "jaynes_one_param",
    "ar": "ar_bell",
}

VOLUME_FAMILIES = ("ar_bell", "jaynes_alpha", "jaynes_alpha_bivariate", "jaynes_one_param", "tlb")


def region_for(family_id: str, metric_id: str, fixed_params: Optional[dict] = None,
               predicate: str = "feasible") -> Region:
    """Region with the volume conventions used for each family.

    * ``ar_bell`` – feasible states with b ≥ 0 (the reference half of the
      triangle; the other half is its mirror image under b → −b), sliced
      with σ² outermost.
    * ``jaynes_alpha`` – the fixed reference region 0 ≤ 2√2 b ≤ σ² ≤ 8; for
      Hilbert–Schmidt positivity is not imposed (the published piecewise
      probabilities correspond to this convention), for monotone metrics it
      is (they are undefined otherwise).
    * ``jaynes_alpha_bivariate`` – b ∈ [0, 2√2] along σ² = 4(1 + b²/8),
      σ² frozen in the tangent; same positivity rule as above.
    * ``jaynes_one_param`` – the α = 1 curve with its induced metric.
    * ``tlb`` – the feasible tetrahedron.
    """
    fixed = dict(fixed_params or {})
    fam = FAMILY_ALIASES.get(family_id, family_id)
    if metric_id not in METRIC_IDS:
        raise DomainError(f"metric must be one of {METRIC_IDS}")
    order = None
    if fam == "ar_bell":
        chart = get_chart("ar_bell", q=float(fixed.get("q", 1.0)))
        domain = "feasible+reference"
        # σ² outermost: the b-slices then shrink self-similarly into the
        # singular vertex b = σ² = 0 and its singularity becomes a pure
        # power of the outer coordinate.
        order = (1, 0)
    elif fam == "jaynes_alpha":
        chart = get_chart("jaynes_alpha", alpha=float(fixed.get("alpha", 1.0)))
        domain = "reference" if metric_id == "hs" else "feasible+reference"
    elif fam == "jaynes_alpha_bivariate":
        chart = get_chart("jaynes_alpha_bivariate", alpha=float(fixed.get("alpha", 1.0)),
                          tangent=fixed.get("tangent", "frozen"))
        domain = "reference" if metric_id == "hs" else "feasible+reference"
    elif fam == "jaynes_one_param":
        chart = get_chart("jaynes_alpha_bivariate", alpha=1.0, tangent="induced")
        domain = "feasible+reference"
    elif fam == "tlb":
        chart = get_chart("tlb")
        domain = "feasible"
    else:
        raise DomainError(f"no volume convention for family {family_id!r}; known: {VOLUME_FAMILIES}")
    return Region(chart, predicate, domain, order=order)


METHODS = ("cubature", "monte_carlo", "auto")

#: Loosest relative tolerance the Monte Carlo fallback of ``method="auto"`` is run at.
MC_FALLBACK_TOL = 1e-3


def _integrate_auto(region: Region, element, tol: float, seed: int, **kw) -> QuadratureResult:
    """Cubature first; stratified Monte Carlo (at max(tol, 1e-3)) if it does not converge."""
    try:
        return integrate(region, element, tol=tol, seed=seed, method="cubature", **kw)
    except NonConvergence as exc:
        mc_tol = max(tol, MC_FALLBACK_TOL)
        res = integrate(region, element, tol=mc_tol, seed=seed, method="monte_carlo", **kw)
        meta = dict(res.meta, fallback=f"cubature: {exc}", requested_tol=tol)
        return QuadratureResult(res.value, res.abs_error, res.n_evals, res.method, meta)


def _volume(family_id, metric_id, fixed_params, predicate, tol, seed, method, **kw) -> QuadratureResult:
    region = region_for(family_id, metric_id, fixed_params, predicate)
    element = element_function(region.chart, metric_id)
    method = method or "cubature"
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}")
    if method == "auto":
        res = _integrate_auto(region, element, tol, seed, **kw)
    else:
        res = integrate(region, element, tol=tol, seed=seed, method=method, **kw)
    meta = dict(res.meta)
    meta.update(family=FAMILY_ALIASES.get(family_id, family_id), metric=metric_id,
                predicate=predicate, domain=region.domain, fixed=dict(fixed_params or {}))
    if metric_id == "hs":
        meta["kappa"] = KAPPA_HS
        meta["kappa_convention"] = KAPPA_CONVENTION
    return QuadratureResult(res.value, res.abs_error, res.n_evals, res.method, meta)


def total_volume(family_id: str, metric_id: str, fixed_params: Optional[dict] = None,
                 tol: float = 1e-6, seed: int = 0, method: Optional[str] = None, **kw) -> QuadratureResult:
    """Volume of the family's region under the metric."""
    return _volume(family_id, metric_id, fixed_params, "feasible", tol, seed, method, **kw)


def separable_volume(family_id: str, metric_id: str, fixed_params: Optional[dict] = None,
                     tol: float = 1e-6, seed: int = 0, method: Optional[str] = None, **kw) -> QuadratureResult:
    """Volume of the Peres-separable part of the family's region."""
    return _volume(family_id, metric_id, fixed_params, "separable", tol, seed, method, **kw)


@dataclass(frozen=True)
class SepProbability:
    total: QuadratureResult
    separable: QuadratureResult
    value: float
    abs_error: float

    @property
    def n_evals(self) -> int:
        return self.total.n_evals + self.separable.n_evals


def ratio_with_error(sep: QuadratureResult, total: QuadratureResult) -> tuple[float, float]:
    if total.value == 0 or abs(total.value) <= 3 * total.abs_error:
        raise DegenerateTotal("total volume is consistent with zero")
    p = sep.value / total.value
    rel = np.hypot(sep.abs_error / sep.value if sep.value else 0.0, total.abs_error / total.value)
    err = abs(p) * rel if sep.value else sep.abs_error / abs(total.value)
    return float(p), float(err)


def sep_probability(family_id: str, metric_id: str, fixed_params: Optional[dict] = None,
                    tol: float = 1e-6, seed: int = 0, method: Optional[str] = None, **kw) -> SepProbability:
    """Separable volume / total volume with propagated error."""
    tot = total_volume(family_id, metric_id, fixed_params, tol, seed, method, **kw)
    sep = separable_volume(family_id, metric_id, fixed_params, tol, seed, method, **kw)
    p, err = ratio_with_error(sep, tot)
    return SepProbability(tot, sep, p, err)


# ------------------------------------------------------------ closed forms

GOLDEN_RATIO_CONJ = (np.sqrt(5.0) - 1.0) / 2.0


def _trivariate_prob(a: float) -> float:
    s2, s3 = np.sqrt(2.0), np.sqrt(3.0)
    if a in (-1.0, 0.0):
        return 0.0
    if np.isclose(a, -s2, rtol=0, atol=1e-14):
        return 5.0 / 8.0 * a * (a + 1)
    if np.isclose(a, GOLDEN_RATIO_CONJ, rtol=0, atol=1e-14):
        return -(np.sqrt(5.0) - 5.0) / 8.0 * a * (a + 1)
    if -1 < a < 0:
        return -0.25 * a * (a + 1)
    if 0 < a < 1:
        return -0.25 * (a - 2) * a * (a + 1)
    if a >= 1:
        return 0.75 - 0.25 / a
    if a <= -s3:
        return -0.25 / a + 0.75 + 1.0 / (a - 1)
    # -√3 < a < -1, a ≠ -√2
    return -(a + 1) * (a**4 - 5 * a**2 + 1) / (4 * a)


def _bivariate_prob(a: float) -> float:
    lo = (1 - 2 * np.sqrt(7.0)) / 3
    if lo < a < -1:
        return -a - 1
    if a <= lo:
        return np.sqrt((a - 2) * a) - np.sqrt(a * (a + 1)) - 1
    if a >= GOLDEN_RATIO_CONJ:
        return np.sqrt(a * (a + 1)) - a
    if 1.0 / 3.0 < a < GOLDEN_RATIO_CONJ:
        return -a + 2 * np.sqrt(a * (a + 1)) - 1
    return 0.0  # the interval [-1, 1/3]


def closed_form_sepprob(model_id: str, alpha: float) -> float:
    """Published piecewise Hilbert–Schmidt separability probabilities.

    ``trivariate_alpha``: the isolated points α = −√2 and α = (√5 − 1)/2 take
    their own printed values, α ∈ {−1, 0} give 0, α → ±∞ gives 3/4.
    ``bivariate_alpha``: zero on [−1, 1/3], α → ±∞ gives 1/2.
    Branch boundaries belong to the branch that is closed there in the
    printed case list; otherwise the higher-α branch is used.
    """
    a = float(alpha)
    if np.isnan(a):
        raise UndefinedBranch("alpha is NaN")
    model = FAMILY_ALIASES.get(model_id, model_id)
    if model in ("jaynes_alpha", "trivariate_alpha"):
        return 0.75 if np.isinf(a) else float(_trivariate_prob(a))
    if model in ("jaynes_alpha_bivariate", "bivariate_alpha"):
        return 0.5 if np.isinf(a) else float(_bivariate_prob(a))
    raise DomainError(f"unknown closed-form model {model_id!r}")


def trivariate_hs_total(alpha: float) -> float:
    """Published HS total volume 1/(2√2 α(1+α)) (signed) of the α-model."""
    return 1.0 / (2 * SQRT2 * alpha * (1 + alpha))


def bivariate_hs_total(alpha: float) -> float:
    """Published HS volume 2√(3α⁴ − 2α² + 3)/(4α² + 4α) (signed) of the bivariate model."""
    return 2 * np.sqrt(3 * alpha**4 - 2 * alpha**2 + 3) / (4 * alpha**2 + 4 * alpha)


JAYNES_BURES_PROB = 2 * np.arcsin(SQRT2 - 1) / np.pi


def jaynes_hs_prob() -> float:
    """(asinh(2 − √2) + root₃) / (√6 + asinh √2), root₃ the third root of x⁴ − 148x² + 68."""
    roots = np.sort(np.roots([1, 0, -148, 0, 68]).real)
    return float((np.arcsinh(2 - SQRT2) + roots[2]) / (np.sqrt(6.0) + np.arcsinh(SQRT2)))


KNOWN_VALUES = {
    ("ar_bell", "bures"): (np.pi / 4, np.pi * (SQRT2 - 1) / 4),
    ("ar_bell", "wigner_yanase"): (np.pi / 4, np.pi * (SQRT2 - 1) / 4),
    ("ar_bell", "hs"): (1 / (4 * SQRT2), 1 / (8 * SQRT2)),
    ("tlb", "bures"): (np.pi**2 / 8, np.pi * (4 - np.pi) / 8),
    ("tlb", "wigner_yanase"): (np.pi**2 / 8, np.pi * (4 - np.pi) / 8),
    ("tlb", "hs"): (1 / (6 * SQRT2), 1 / (12 * SQRT2)),
}


# ------------------------------------------------------------------- scanning


@dataclass
class ScanRow:
    param: float
    metric: str
    total: float = float("nan")
    total_err: float = float("nan")
    sep: float = float("nan")
    sep_err: float = float("nan")
    prob: float = float("nan")
    prob_err: float = float("nan")
    n_evals: int = 0
    closed_form: Optional[float] = None
    error: Optional[str] = None


SCAN_COLUMNS = ("param", "metric", "total", "total_err", "sep", "sep_err", "prob", "prob_err", "n_evals")


def parse_grid(spec: str) -> list[float]:
    """Parse ``lo:hi:step`` or a comma list into grid values."""
    spec = spec.strip()
    if ":" in spec:
        lo, hi, step = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise DomainError("grid step must be positive")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(n)]
    return [float(x) for x in spec.split(",") if x.strip()]


def scan(model: str, metric: str, param_grid: Sequence[float], tol: float = 1e-6, seed: int = 0,
         method: Optional[str] = None, compare_closed_form: bool = False, **kw) -> list[ScanRow]:
    """Total/separable volumes and probabilities over a parameter grid.

    The grid parameter is q for ``ar_bell`` and α for the Jaynes α-models.
    Per-point failures are recorded in the row, not raised.
    """
    fam = FAMILY_ALIASES.get(model, model)
    key = "q" if fam == "ar_bell" else "alpha"
    rows = []
    for val in param_grid:
        row = ScanRow(float(val), metric)
        if compare_closed_form and fam in ("jaynes_alpha", "jaynes_alpha_bivariate") and metric == "hs":
            row.closed_form = closed_form_sepprob(fam, val)
        try:
            res = sep_probability(fam, metric, {key: float(val)}, tol=tol, seed=seed, method=method, **kw)
            row.total, row.total_err = res.total.value, res.total.abs_error
            row.sep, row.sep_err = res.separable.value, res.separable.abs_error
            row.prob, row.prob_err = res.value, res.abs_error
            row.n_evals = res.n_evals
        except SepGeomError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def scan_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    extra = any(r.closed_form is not None for r in rows)
    wr.writerow(list(SCAN_COLUMNS) + (["closed_form"] if extra else []) + ["error"])
    for r in rows:
        vals = [getattr(r, c) for c in SCAN_COLUMNS]
        vals = [repr(v) if isinstance(v, float) else v for v in vals]
        if extra:
            vals.append("" if r.closed_form is None else repr(r.closed_form))
        vals.append(r.error or "")
        wr.writerow(vals)
    return buf.getvalue()


def scan_json(rows: Sequence[ScanRow], run_meta: dict) -> str:
    def clean(v):
        return None if isinstance(v, float) and not np.isfinite(v) else v

    payload = {"config": run_meta, "kappa": KAPPA_HS, "kappa_convention": KAPPA_CONVENTION,
               "rows": [{k: clean(v) for k, v in asdict(r).items()} for r in rows]}
    return json.dumps(payload, indent=2, sort_keys=True)
