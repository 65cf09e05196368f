"""
Spectral clustering and spectral segmentation from a distance matrix.

Distances become Gaussian-kernel similarities, the kernel width is picked
by the eigengap of the symmetric normalized Laplacian, and the rows of the
bottom ``C`` eigenvectors (normalized to unit length) are clustered with
k-means or cut into contiguous segments by dynamic programming.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

N_SIGMA = 20
_DEGENERATE_GAP = 1e-12


class SpectralError(ValueError):
    pass


def _check_distances(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SpectralError("distance matrix must be square")
    if np.any(np.isnan(D)) or np.any(D < 0):
        raise SpectralError("distances must be non-negative numbers")
    return D


def gaussian_kernel(D, sigma: float) -> np.ndarray:
    """``exp(-d^2 / (2 sigma^2))``; infinite distances map to zero."""
    if not sigma > 0:
        raise SpectralError("sigma must be positive")
    D = _check_distances(D)
    with np.errstate(over="ignore"):
        W = np.exp(-(D**2) / (2.0 * sigma**2))
    return W


def normalized_laplacian(W: np.ndarray) -> np.ndarray:
    """``I - D^{-1/2} W D^{-1/2}`` with degrees ``d_i = sum_j w_ij``."""
    deg = W.sum(axis=1)
    inv = np.zeros_like(deg)
    pos = deg > 0
    inv[pos] = 1.0 / np.sqrt(deg[pos])
    L = -(inv[:, None] * W * inv[None, :])
    L[np.diag_indices_from(L)] += pos.astype(float)
    return 0.5 * (L + L.T)


def _distance_scale(D: np.ndarray) -> float:
    off = D[~np.eye(D.shape[0], dtype=bool)]
    off = off[np.isfinite(off)]
    if off.size:
        med = float(np.median(off))
        if med > 0:
            return med
        pos = off[off > 0]
        if pos.size:
            return float(pos.mean())
    return 1.0


def sigma_grid(D) -> np.ndarray:
    """20 log-spaced kernel widths between 0.1x and 10x the median distance."""
    D = _check_distances(D)
    scale = _distance_scale(D)
    return scale * np.logspace(-1.0, 1.0, N_SIGMA)


@dataclass
class SigmaSelection:
    sigma: float
    eigengap: float
    eigenvalues: np.ndarray
    candidates: np.ndarray
    gaps: np.ndarray


def eigengap_search(D, C: int) -> SigmaSelection:
    """Evaluate every grid width and keep the one with the largest
    ``lambda_{C+1} - lambda_C`` (eigenvalues in ascending order)."""
    D = _check_distances(D)
    N = D.shape[0]
    if not N > C >= 2:
        raise SpectralError(f"need N > C >= 2, got N={N}, C={C}")
    grid = sigma_grid(D)
    gaps = np.full(grid.size, -np.inf)
    spectra = []
    for n, sigma in enumerate(grid):
        lam = eigh(normalized_laplacian(gaussian_kernel(D, sigma)), eigvals_only=True,
                   subset_by_index=[0, C])
        spectra.append(lam)
        # more than C (numerically) disconnected components: no usable gap
        if np.all(np.isfinite(lam)) and lam[C] > _DEGENERATE_GAP:
            gaps[n] = lam[C] - lam[C - 1]
    if not np.any(np.isfinite(gaps)):
        raise SpectralError("similarity graph is disconnected at every candidate width")
    best = int(np.argmax(gaps))
    return SigmaSelection(float(grid[best]), float(gaps[best]), spectra[best], grid, gaps)


def select_sigma_eigengap(D, C: int) -> float:
    """Kernel width from the grid that maximizes the ``C``-th eigengap."""
    return eigengap_search(D, C).sigma


def spectral_embedding(W: np.ndarray, C: int) -> np.ndarray:
    """Unit-normalized rows of the ``C`` bottom eigenvectors of ``L_sym``.

    Rows with zero norm stay zero.
    """
    L = normalized_laplacian(W)
    _, vecs = eigh(L, subset_by_index=[0, C - 1])
    norms = np.linalg.norm(vecs, axis=1)
    out = np.zeros_like(vecs)
    nz = norms > 1e-12
    out[nz] = vecs[nz] / norms[nz, None]
    return out


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    distortion: float


def _farthest_point_init(X: np.ndarray, C: int, rng) -> np.ndarray:
    idx = [int(rng.integers(X.shape[0]))]
    dist = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, C):
        nxt = int(np.argmax(dist))
        idx.append(nxt)
        dist = np.minimum(dist, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    C = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        own = d2[np.arange(X.shape[0]), new]
        counts = np.bincount(new, minlength=C)
        for c in np.flatnonzero(counts == 0):
            # re-seed an empty cluster at the point worst served by its centroid
            far = int(np.argmax(own))
            new[far] = c
            own[far] = 0.0
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(C):
            centers[c] = X[labels == c].mean(axis=0)
    d2 = ((X - centers[labels]) ** 2).sum(axis=1)
    return labels, centers, float(d2.sum())


def kmeans(points, C: int, runs: int = 10, seed=None) -> KMeansResult:
    """Lloyd's algorithm from ``runs`` farthest-point seedings.

    Each run starts from a random point and greedily adds the point farthest
    from the centres chosen so far. The run with the lowest total squared
    distance wins; ties keep the earliest run.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if not 1 <= C <= N:
        raise SpectralError(f"need 1 <= C <= N, got C={C}, N={N}")
    if runs < 1:
        raise SpectralError("runs must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(runs):
        centers = _farthest_point_init(X, C, rng)
        labels, centers, distortion = _lloyd(X, centers)
        if best is None or distortion < best.distortion:
            best = KMeansResult(labels, centers, distortion)
    return best


# --------------------------------------------------------------------------
# clustering


@dataclass
class ClusterAssignment:
    """Cluster labels in ``[0, C)`` plus the diagnostics of the run."""

    labels: np.ndarray
    n_clusters: int
    sigma: float
    eigengap: float
    distortion: float

    def report(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "sigma": self.sigma,
            "eigengap": self.eigengap,
            "distortion": self.distortion,
        }


def spectral_cluster(D, C: int, kmeans_runs: int = 10, seed=None,
                     sigma: float | None = None) -> ClusterAssignment:
    """Cluster the items of distance matrix ``D`` into ``C`` groups.

    The kernel width is selected by :func:`eigengap_search` unless given.
    """
    D = _check_distances(D)
    N = D.shape[0]
    if not N >= C >= 2:
        raise SpectralError(f"need N >= C >= 2, got N={N}, C={C}")
    if sigma is None:
        if N > C:
            sel = eigengap_search(D, C)
            sigma, gap = sel.sigma, sel.eigengap
        else:
            sigma, gap = float(sigma_grid(D)[N_SIGMA // 2]), float("nan")
    else:
        gap = float("nan")
    E = spectral_embedding(gaussian_kernel(D, sigma), C)

    nz = np.linalg.norm(E, axis=1) > 0
    if nz.sum() >= C:
        km = kmeans(E[nz], C, runs=kmeans_runs, seed=seed)
        labels = np.empty(N, dtype=np.int64)
        labels[nz] = km.labels
        if not nz.all():
            d2 = ((E[~nz, None, :] - km.centers[None]) ** 2).sum(axis=2)
            labels[~nz] = np.argmin(d2, axis=1)
        distortion = float(((E - km.centers[labels]) ** 2).sum())
    else:
        km = kmeans(E, C, runs=kmeans_runs, seed=seed)
        labels, distortion = km.labels, km.distortion
    return ClusterAssignment(labels, C, float(sigma), gap, distortion)


# --------------------------------------------------------------------------
# segmentation


@dataclass
class Segmentation:
    """Partition of ``[0, n)`` into contiguous segments.

    ``starts[0] == 0``; segment ``c`` covers ``starts[c]:starts[c + 1]``.
    """

    starts: np.ndarray
    n: int
    cost: float = float("nan")

    def __post_init__(self):
        self.starts = np.asarray(self.starts, dtype=np.int64)
        if self.starts.size < 1 or self.starts[0] != 0:
            raise SpectralError("segmentation must start at index 0")
        if np.any(np.diff(self.starts) <= 0) or self.starts[-1] >= self.n:
            raise SpectralError("segment starts must be strictly increasing within [0, n)")

    @property
    def n_segments(self) -> int:
        return int(self.starts.size)

    @property
    def change_points(self) -> np.ndarray:
        return self.starts[1:]

    @property
    def labels(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.int64)
        for c, s in enumerate(self.starts[1:], start=1):
            out[s:] = c
        return out

    @classmethod
    def from_labels(cls, labels) -> "Segmentation":
        labels = np.asarray(labels)
        starts = np.concatenate([[0], np.flatnonzero(labels[1:] != labels[:-1]) + 1])
        return cls(starts, labels.size)


def segment_costs(X) -> np.ndarray:
    """``cost[a, b]``: squared deviation of rows ``a..b-1`` from their mean."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    cost = np.full((N + 1, N + 1), np.inf)
    for a in range(N):
        seg = X[a:]
        csum = np.cumsum(seg, axis=0)
        csq = np.cumsum((seg**2).sum(axis=1))
        n = np.arange(1, N - a + 1)
        cost[a, a + 1 :] = np.maximum(csq - (csum**2).sum(axis=1) / n, 0.0)
    return cost


def segment_rows(X, C: int) -> Segmentation:
    """Optimal split of the rows of ``X`` into ``C`` contiguous segments.

    Minimizes the summed within-segment squared deviation from segment
    means, exactly, in O(N^2 C).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if not 1 <= C <= N:
        raise SpectralError(f"need 1 <= C <= N, got C={C}, N={N}")
    cost = segment_costs(X)
    total = np.full((C, N + 1), np.inf)
    back = np.zeros((C, N + 1), dtype=np.int64)
    total[0] = cost[0]
    for c in range(1, C):
        for end in range(c + 1, N + 1):
            cand = total[c - 1, c:end] + cost[c:end, end]
            k = int(np.argmin(cand))
            total[c, end] = cand[k]
            back[c, end] = c + k
    starts = [0] * C
    end = N
    for c in range(C - 1, 0, -1):
        end = back[c, end]
        starts[c] = end
    return Segmentation(np.array(starts), N, float(total[C - 1, N]))


def spectral_segment(D, C: int, sigma: float | None = None) -> Segmentation:
    """Cut temporally ordered items into ``C`` contiguous segments using the
    spectral embedding of their distance matrix."""
    D = _check_distances(D)
    N = D.shape[0]
    if N < C:
        raise SpectralError(f"cannot cut {N} items into {C} segments")
    if C == 1:
        return Segmentation(np.array([0]), N, 0.0)
    if sigma is None:
        sigma = select_sigma_eigengap(D, C) if N > C else float(sigma_grid(D)[N_SIGMA // 2])
    E = spectral_embedding(gaussian_kernel(D, sigma), C)
    return segment_rows(E, C)
