"""Spine outputs: subspace regions, cluster balls, centrality bands, selection.

Every object here is certificate-gated. A subspace region needs a degree
envelope and a positive gap certificate; a cluster ball additionally needs
a separation margin; centrality bands need a Lipschitz modulus valid on a
certified domain; selection stability needs an observed margin clearing
twice the propagated noise. When a certificate is missing the operation
raises a refusal error instead of fabricating a number.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    DegenerateTopEigenvalue,
    DuplicateCenters,
    NoGapCertificate,
    NonpositiveMargin,
    OutsideDomain,
    ShapeMismatch,
    TooManyLabelsForExact,
)
from .concentration import (
    DeviationQuantile,
    davis_kahan_radius,
    deviation_quantile_from_envelope,
)
from .linalg import OrthonormalBasis, frobenius_subspace_bound, grassmann_distance, top_k_eigens
from .models import AdjacencyMatrix

__all__ = [
    "CertificateSet",
    "SubspaceRegion",
    "subspace_region",
    "region_contains",
    "nearest_center_round",
    "perm_hamming_distance",
    "RoundingErrorBound",
    "rounding_error_bound",
    "ClusterRegion",
    "cluster_region",
    "kmeans_labels",
    "align_to_centers",
    "katz_centrality",
    "katz_modulus",
    "eigenvector_centrality",
    "CentralityBand",
    "centrality_bands",
    "TopMSelection",
    "top_m_selection",
    "StabilityCertificate",
    "stability_certificate",
]

TIE_TOLERANCE = 1e-12  # scores closer than this are reported as ties
_CONTAIN_TOL = 1e-12   # float guard for membership at the boundary


@dataclass(frozen=True)
class CertificateSet:
    """Declared or computed certificates gating the inference outputs."""

    d_max: Optional[float] = None     # upper bound on max expected degree
    gap: Optional[float] = None       # lower bound on gap_k(P)
    margin: Optional[float] = None    # cluster-center separation
    c_row: Optional[float] = None     # rowwise stability constant (optional)
    centrality_domain_ok: Optional[bool] = None
    provenance: str = "declared"


def _as_matrix(A) -> np.ndarray:
    if isinstance(A, AdjacencyMatrix):
        return np.asarray(A.A, dtype=float)
    return np.asarray(A, dtype=float)


@dataclass(frozen=True)
class SubspaceRegion:
    """Grassmann ball around the observed top-k basis."""

    center: OrthonormalBasis
    radius: float
    alpha: float
    informative: bool
    certificates_used: CertificateSet
    quantile: DeviationQuantile

    @property
    def k(self) -> int:
        return self.center.k


def subspace_region(
    A, k: int, certificates: CertificateSet, alpha: float
) -> SubspaceRegion:
    """Confidence region for the latent top-k eigenspace.

    The center is the observed top-k basis; the radius is the Davis-Kahan
    transfer 2 q / gap of the envelope-based deviation quantile through the
    declared gap certificate. Missing or nonpositive certificates raise
    :class:`NoGapCertificate`; a radius is never fabricated.
    """
    M = _as_matrix(A)
    if certificates.gap is None or certificates.gap <= 0:
        raise NoGapCertificate(
            f"gap certificate {certificates.gap!r} is not positive"
        )
    if certificates.d_max is None or certificates.d_max < 0:
        raise ValueError("certificates must declare a nonnegative d_max")
    quant = deviation_quantile_from_envelope(certificates.d_max, M.shape[0], alpha)
    dk = davis_kahan_radius(quant.q, certificates.gap)
    center, _ = top_k_eigens(M, k)
    return SubspaceRegion(
        center=center,
        radius=dk.radius,
        alpha=alpha,
        informative=dk.informative,
        certificates_used=certificates,
        quantile=quant,
    )


def region_contains(U: OrthonormalBasis, region: SubspaceRegion) -> bool:
    """Membership test, rotation-invariant in both arguments."""
    if (U.n, U.k) != (region.center.n, region.center.k):
        raise ShapeMismatch("basis shape does not match the region center")
    return grassmann_distance(U, region.center) <= region.radius + _CONTAIN_TOL


# ---------------------------------------------------------------------------
# clustering

def nearest_center_round(rows: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Assign each row to its nearest center; ties go to the lowest index."""
    rows = np.asarray(rows, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ValueError("need at least two centers")
    if rows.shape[1] != centers.shape[1]:
        raise ShapeMismatch("rows and centers disagree on dimension")
    for a in range(centers.shape[0]):
        for b in range(a + 1, centers.shape[0]):
            if np.array_equal(centers[a], centers[b]):
                raise DuplicateCenters(f"centers {a} and {b} coincide")
    d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _confusion(g: np.ndarray, h: np.ndarray, K: int) -> np.ndarray:
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (g, h), 1)
    return conf


def perm_hamming_distance(g, h, method: str = "auto") -> int:
    """Permutation-invariant Hamming distance between label assignments.

    ``method`` is "exact" (enumerate all K! permutations, K <= 8),
    "matching" (optimal bipartite matching on the confusion matrix, any K),
    or "auto" (exact when K <= 8, matching otherwise). Both routes compute
    the same minimum.
    """
    g = np.asarray(g, dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    if g.shape != h.shape or g.ndim != 1:
        raise ShapeMismatch("assignments must be 1-d of equal length")
    if g.size == 0:
        return 0
    if g.min() < 0 or h.min() < 0:
        raise ValueError("labels must be nonnegative integers")
    K = int(max(g.max(), h.max())) + 1
    n = g.size
    conf = _confusion(g, h, K)
    if method == "auto":
        method = "exact" if K <= 8 else "matching"
    if method == "exact":
        if K > 8:
            raise TooManyLabelsForExact(
                f"K = {K} labels; exact enumeration is limited to K <= 8"
            )
        best = 0
        for perm in itertools.permutations(range(K)):
            agree = sum(conf[perm[b], b] for b in range(K))
            if agree > best:
                best = agree
        return n - best
    if method == "matching":
        row, col = linear_sum_assignment(-conf)
        return n - int(conf[row, col].sum())
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class RoundingErrorBound:
    exact: bool          # eta < Delta/4: the uniform branch, zero mislabels
    hamming_bound: int   # ceil(16 n eta^2 / Delta^2), clamped at n


def rounding_error_bound(eta: float, Delta: float, n: int) -> RoundingErrorBound:
    """Mislabel count bound for nearest-center rounding under a margin."""
    if Delta <= 0:
        raise NonpositiveMargin(f"margin {Delta} must be positive")
    if eta < 0:
        raise ValueError("row error must be nonnegative")
    raw = 16.0 * n * eta * eta / (Delta * Delta)
    bound = int(min(n, math.ceil(raw)))
    return RoundingErrorBound(exact=bool(eta < Delta / 4.0), hamming_bound=bound)


def kmeans_labels(rows: np.ndarray, K: int, restarts: int = 50) -> np.ndarray:
    """Deterministic K-means labels: farthest-point init, fixed restarts.

    Restart r seeds the first center at row floor(r n / restarts); the rest
    are chosen greedily farthest-first. No RNG is involved, so identical
    inputs give identical labels.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if K < 1 or K > n:
        raise ValueError("K must lie in [1, n]")
    best_labels, best_cost = None, np.inf
    for r in range(max(1, restarts)):
        centers = _farthest_point_init(rows, K, first=(r * n) // max(1, restarts))
        labels, cost = _lloyd(rows, centers)
        if cost < best_cost - 1e-15:
            best_labels, best_cost = labels, cost
    return best_labels


def _farthest_point_init(rows: np.ndarray, K: int, first: int) -> np.ndarray:
    chosen = [min(first, rows.shape[0] - 1)]
    d2 = ((rows - rows[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(K - 1):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((rows - rows[nxt]) ** 2).sum(axis=1))
    return rows[chosen].copy()


def _lloyd(rows: np.ndarray, centers: np.ndarray, iters: int = 100):
    K = centers.shape[0]
    labels = None
    for _ in range(iters):
        d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for a in range(K):
            mask = labels == a
            if mask.any():
                centers[a] = rows[mask].mean(axis=0)
    d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    cost = float(d2[np.arange(rows.shape[0]), labels].sum())
    return labels, cost


def align_to_centers(
    U: OrthonormalBasis, centers: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate an embedding so its rows sit near declared centers, then round.

    The cluster structure of the rows is found first (deterministic
    K-means), found centers are matched to the declared ones over all label
    permutations by weighted Procrustes residual, and the resulting
    rotation is polished by alternating reassignment and re-alignment.
    Returns (Q, labels).
    """
    centers = np.asarray(centers, dtype=float)
    K, k = centers.shape
    if k != U.k:
        raise ShapeMismatch("centers dimension must match the embedding")
    rows = U.U
    init = kmeans_labels(rows, K)
    found = np.zeros((K, k))
    weights = np.zeros(K)
    for a in range(K):
        mask = init == a
        weights[a] = mask.sum()
        if mask.any():
            found[a] = rows[mask].mean(axis=0)
    best_Q, best_res = np.eye(k), np.inf
    perms = itertools.permutations(range(K)) if K <= 8 else [tuple(range(K))]
    for perm in perms:
        target = centers[list(perm)]
        M = found.T @ (weights[:, None] * target)
        W, _, Vt = np.linalg.svd(M)
        Q = W @ Vt
        res = float((weights[:, None] * (found @ Q - target) ** 2).sum())
        if res < best_res - 1e-15:
            best_Q, best_res = Q, res
    Q = best_Q
    labels = nearest_center_round(rows @ Q, centers)
    for _ in range(50):
        target = centers[labels]
        W, _, Vt = np.linalg.svd(rows.T @ target)
        Q_new = W @ Vt
        new_labels = nearest_center_round(rows @ Q_new, centers)
        if np.array_equal(new_labels, labels):
            Q = Q_new
            break
        Q, labels = Q_new, new_labels
    return Q, labels


@dataclass(frozen=True)
class ClusterRegion:
    """Permutation-invariant Hamming ball around the rounded assignment."""

    labels: np.ndarray
    hamming_radius: int
    alpha: float
    margin_used: float
    margin_provenance: str  # "declared-centers" or "declared-assumption"
    radius_route: str       # "mean_square" or "uniform_rowwise"

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def contains(self, truth) -> bool:
        """Membership: invariant under label permutation of either side."""
        return perm_hamming_distance(self.labels, truth) <= self.hamming_radius

    @property
    def vacuous(self) -> bool:
        return self.hamming_radius >= self.labels.size


def cluster_region(
    A,
    k: int,
    certificates: CertificateSet,
    alpha: float,
    Delta: float,
    centers: Optional[np.ndarray] = None,
    c_row: Optional[float] = None,
    n_clusters: Optional[int] = None,
) -> ClusterRegion:
    """Clustering confidence ball from the subspace region and a margin.

    The Hamming radius follows the mean-square route
    ceil(16 * (2 k r^2) / Delta^2), i.e. ceil(32 k r^2 / Delta^2); with a
    user-certified rowwise constant ``c_row`` the uniform-recovery branch is
    also tried (radius 0 when c_row * r < Delta / 4) and the smaller valid
    radius is reported. Radii are clamped at n, where the ball is all
    assignments and the region is vacuous.
    """
    if Delta <= 0:
        raise NonpositiveMargin(f"margin {Delta} must be positive")
    sub = subspace_region(A, k, certificates, alpha)
    r = sub.radius
    n = sub.center.n
    ms_raw = 16.0 * frobenius_subspace_bound(r, k) / (Delta * Delta)
    candidates = [int(math.ceil(ms_raw))]
    route = "mean_square"
    c_row = c_row if c_row is not None else certificates.c_row
    if c_row is not None:
        if c_row < 0:
            raise ValueError("c_row must be nonnegative")
        rb = rounding_error_bound(c_row * r, Delta, n)
        uniform_radius = 0 if rb.exact else rb.hamming_bound
        if uniform_radius < candidates[0]:
            candidates.append(uniform_radius)
            route = "uniform_rowwise"
    radius = int(min(min(candidates), n))

    if centers is not None:
        centers = np.asarray(centers, dtype=float)
        _, labels = align_to_centers(sub.center, centers)
        provenance = "declared-centers"
    else:
        K = n_clusters if n_clusters is not None else k
        labels = kmeans_labels(sub.center.U, K)
        provenance = "declared-assumption"
    return ClusterRegion(
        labels=labels,
        hamming_radius=radius,
        alpha=alpha,
        margin_used=float(Delta),
        margin_provenance=provenance,
        radius_route=route,
    )


# ---------------------------------------------------------------------------
# centrality functionals

def katz_centrality(M: np.ndarray, beta: float) -> np.ndarray:
    """Katz scores (I - beta M)^{-1} 1 - 1 on the certified domain.

    The domain is spectral radius rho(M) <= 1/(2 beta), where the resolvent
    norm is at most 2 and the map is 4*beta-Lipschitz. Outside the domain
    the call is refused; that is the Omega certificate failure.
    """
    M = np.asarray(M, dtype=float)
    if beta <= 0:
        raise ValueError("beta must be positive")
    w = np.linalg.eigvalsh((M + M.T) / 2.0)
    rho = float(max(abs(w[0]), abs(w[-1])))
    limit = 1.0 / (2.0 * beta)
    if rho > limit * (1.0 + 1e-12):
        raise OutsideDomain(rho, limit)
    n = M.shape[0]
    x = np.linalg.solve(np.eye(n) - beta * M, np.ones(n))
    return x - 1.0


def katz_modulus(beta: float) -> float:
    """Lipschitz constant 4*beta, valid on {rho(M) <= 1/(2 beta)}."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return 4.0 * beta


def eigenvector_centrality(
    M: np.ndarray, gap_tol: float = 1e-10
) -> tuple[np.ndarray, float]:
    """Unit top eigenvector with nonnegative ones-alignment, plus its gap.

    Requires a simple top eigenvalue: the observed gamma = lam1 - lam2 must
    exceed ``gap_tol`` (scaled by the spectral size), and gamma is returned
    for the perturbation modulus 2/gamma.
    """
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    lam1, lam2 = w[-1], w[-2]
    gamma = float(lam1 - lam2)
    if gamma <= gap_tol * max(1.0, abs(lam1)):
        raise DegenerateTopEigenvalue(
            f"top eigenvalue gap {gamma} below tolerance"
        )
    v = V[:, -1]
    s = float(v.sum())
    if s < 0:
        v = -v
    elif s == 0.0:
        a = int(np.argmax(np.abs(v)))
        if v[a] < 0:
            v = -v
    return v, gamma


@dataclass(frozen=True)
class CentralityBand:
    """Simultaneous nodewise intervals point +- half_width."""

    point: np.ndarray
    half_width: float
    alpha: float
    functional: str
    domain_certified: bool

    def __post_init__(self):
        p = np.array(self.point, dtype=float, copy=True)
        p.setflags(write=False)
        object.__setattr__(self, "point", p)
        if self.half_width < 0:
            raise ValueError("half width must be nonnegative")

    def lower(self) -> np.ndarray:
        return self.point - self.half_width

    def upper(self) -> np.ndarray:
        return self.point + self.half_width

    def contains(self, truth, tol: float = 0.0) -> bool:
        truth = np.asarray(truth, dtype=float)
        return bool(np.all(np.abs(truth - self.point) <= self.half_width + tol))


def centrality_bands(
    point: np.ndarray,
    L: float,
    q: float,
    alpha: float,
    functional: str = "katz",
    domain_certified: bool = True,
) -> CentralityBand:
    """Bands of half-width L*q, simultaneous over all nodes."""
    if L < 0 or q < 0:
        raise ValueError("modulus and deviation bound must be nonnegative")
    return CentralityBand(
        point=np.asarray(point, dtype=float),
        half_width=L * q,
        alpha=alpha,
        functional=functional,
        domain_certified=domain_certified,
    )


# ---------------------------------------------------------------------------
# top-m selection

@dataclass(frozen=True)
class TopMSelection:
    sets: tuple            # admissible top-m sets, each a sorted tuple
    num_admissible: int    # exact count (sets may be truncated)
    margin: Optional[float]  # x_(m) - x_(m+1), defined only when unique
    truncated: bool = False

    @property
    def unique(self) -> bool:
        return self.num_admissible == 1


def top_m_selection(x, m: int, max_sets: int = 10000) -> TopMSelection:
    """Admissible top-m sets and the selection margin.

    A set S of size m is admissible when min_{i in S} x_i >= max_{j not in
    S} x_j. Ties at the threshold (exact float equality) make the selection
    set-valued and the margin undefined. For very large tie groups the
    enumerated list is truncated at ``max_sets`` (the exact count is always
    reported).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not 1 <= m <= n - 1:
        raise ValueError(f"m = {m} must lie in [1, {n - 1}]")
    order = np.argsort(-x, kind="stable")
    xs = x[order]
    t = xs[m - 1]
    sure = [int(i) for i in np.flatnonzero(x > t)]
    tied = [int(i) for i in np.flatnonzero(x == t)]
    slots = m - len(sure)
    count = math.comb(len(tied), slots)
    sets = []
    for combo in itertools.combinations(tied, slots):
        sets.append(tuple(sorted(sure + list(combo))))
        if len(sets) >= max_sets:
            break
    margin = float(t - xs[m]) if count == 1 else None
    return TopMSelection(
        sets=tuple(sets),
        num_admissible=count,
        margin=margin,
        truncated=count > len(sets),
    )


@dataclass(frozen=True)
class StabilityCertificate:
    """Sufficient condition for top-m invariance under operator noise q."""

    m: int
    observed_margin: Optional[float]
    threshold: float          # 2 L q
    certified: bool
    selected_set: Optional[tuple]  # present when the top-m set is unique
    tie_tolerance: float = TIE_TOLERANCE


def stability_certificate(
    x_hat, m: int, L: float, q: float
) -> StabilityCertificate:
    """Certify top-m selection stability from the observed margin.

    Certified iff the observed top-m set is unique and its margin exceeds
    2*L*q. Margins inside the tie tolerance are reported as ties and are
    never certified: near-ties are genuinely uncertifiable.
    """
    if L < 0 or q < 0:
        raise ValueError("modulus and deviation bound must be nonnegative")
    sel = top_m_selection(x_hat, m)
    threshold = 2.0 * L * q
    certified = (
        sel.unique
        and sel.margin is not None
        and sel.margin > threshold
        and sel.margin > TIE_TOLERANCE
    )
    return StabilityCertificate(
        m=m,
        observed_margin=sel.margin,
        threshold=threshold,
        certified=bool(certified),
        selected_set=sel.sets[0] if sel.unique else None,
    )
