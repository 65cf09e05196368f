"""
State-space dynamics (SSD) distance between sequences.

A single HMM is trained on the whole corpus. Every sequence is then
projected onto that common state space as the transition matrix it induces
(expected transition counts under the global model, row-normalized), and
two sequences are compared through the mean Bhattacharyya affinity between
corresponding rows of their induced matrices.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import hmm
from .hmm import GaussianHMM, TrainConfig

_SIMPLEX_TOL = 1e-6
_EMPTY_STATE = 1e-8


class SSDError(ValueError):
    pass


@dataclass(frozen=True)
class SSDOptions:
    """Post-processing applied to induced matrices before comparison.

    strip_self_transitions
        Zero the diagonal and renormalize rows, so only moves between states
        count and dwell times are ignored.
    diffusion_power
        Compare ``A ** t`` instead of ``A``.
    row_smoothing_epsilon
        Mix every row with the uniform distribution,
        ``(1 - eps) * row + eps / K``. Keeps distances finite.
    """

    strip_self_transitions: bool = False
    diffusion_power: int = 1
    row_smoothing_epsilon: float = 1e-6

    def __post_init__(self):
        if int(self.diffusion_power) != self.diffusion_power or self.diffusion_power < 1:
            raise SSDError("diffusion_power must be an integer >= 1")
        if not 0 <= self.row_smoothing_epsilon <= 1:
            raise SSDError("row_smoothing_epsilon must lie in [0, 1]")


def _check_simplex(p: np.ndarray, name: str):
    if p.ndim != 1 or p.size == 0:
        raise SSDError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < -_SIMPLEX_TOL) or abs(p.sum() - 1) > _SIMPLEX_TOL:
        raise SSDError(f"{name} is not a probability vector")


def induced_transition(seq, model: GaussianHMM, fb: hmm.FBResult | None = None) -> np.ndarray:
    """Transition matrix that ``seq`` induces in the state space of ``model``.

    Entry ``(i, j)`` is proportional to the posterior expected number of
    ``i -> j`` transitions along the sequence. Rows for states the sequence
    (almost) never leaves from carry no evidence and are copied from the
    global ``model.A``.
    """
    if fb is None:
        fb = hmm.forward_backward(seq, model)
    counts = fb.xi_sum
    row = counts.sum(axis=1)
    out = np.array(model.A, dtype=float)
    live = row >= _EMPTY_STATE
    out[live] = counts[live] / row[live, None]
    return out


def smooth_rows(A: np.ndarray, epsilon: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if epsilon == 0:
        return A.copy()
    return (1.0 - epsilon) * A + epsilon / A.shape[1]


def strip_self_transitions(A: np.ndarray) -> np.ndarray:
    """Set self-transitions to zero and renormalize each row."""
    A = np.array(A, dtype=float)
    K = A.shape[0]
    if A.ndim != 2 or A.shape[1] != K or K < 2:
        raise SSDError("need a square matrix with at least two states")
    np.fill_diagonal(A, 0.0)
    mass = A.sum(axis=1)
    if np.any(mass <= 0):
        bad = np.flatnonzero(mass <= 0).tolist()
        raise SSDError(f"rows {bad} have no off-diagonal mass")
    return A / mass[:, None]


def power_transition(A: np.ndarray, t: int) -> np.ndarray:
    """``t``-step transition matrix ``A ** t``."""
    if int(t) != t or t < 1:
        raise SSDError("power must be an integer >= 1")
    A = np.asarray(A, dtype=float)
    P = np.linalg.matrix_power(A, int(t))
    # rows drift from 1 by rounding only; renormalize to keep them exact-ish
    return P / P.sum(axis=1, keepdims=True)


def apply_options(A: np.ndarray, options: SSDOptions) -> np.ndarray:
    """Smoothing, then optional self-transition stripping, then the power."""
    out = smooth_rows(A, options.row_smoothing_epsilon)
    if options.strip_self_transitions:
        out = strip_self_transitions(out)
    if options.diffusion_power > 1:
        out = power_transition(out, options.diffusion_power)
    return out


def bhattacharyya_affinity(p, q) -> float:
    """``sum_x sqrt(p(x) q(x))`` for two discrete distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_simplex(p, "p")
    _check_simplex(q, "q")
    if p.shape != q.shape:
        raise SSDError("distributions must have the same support")
    return float(min(1.0, np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None)).sum()))


def _row_affinities(Ai: np.ndarray, Aj: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(Ai, 0, None) * np.clip(Aj, 0, None)).sum(axis=1)


def ssd_pair_distance(Ai, Aj) -> float:
    """Minus log of the mean Bhattacharyya affinity between matching rows.

    Returns ``inf`` when every pair of rows has disjoint support.
    """
    Ai = np.asarray(Ai, dtype=float)
    Aj = np.asarray(Aj, dtype=float)
    if Ai.shape != Aj.shape or Ai.ndim != 2 or Ai.shape[0] != Ai.shape[1]:
        raise SSDError(f"incompatible induced matrices {Ai.shape} and {Aj.shape}")
    for k in range(Ai.shape[0]):
        _check_simplex(Ai[k], f"row {k} of first matrix")
        _check_simplex(Aj[k], f"row {k} of second matrix")
    if np.array_equal(Ai, Aj):
        return 0.0
    # sum in a fixed order so d(A, B) == d(B, A) bit for bit
    aff = float(np.mean(_row_affinities(Ai, Aj)))
    if aff <= 0.0:
        return float("inf")
    return max(0.0, -float(np.log(min(aff, 1.0))))


def pairwise_ssd(matrices) -> np.ndarray:
    """Distance matrix between a list of (processed) induced matrices."""
    M = np.asarray(matrices, dtype=float)
    N = M.shape[0]
    D = np.zeros((N, N))
    sq = np.sqrt(np.clip(M, 0, None))
    K = M.shape[1]
    for i in range(N):
        # affinity of every row of matrix i with the same row of every j
        aff = np.einsum("kl,nkl->n", sq[i], sq[i + 1 :]) / K
        with np.errstate(divide="ignore"):
            d = -np.log(np.minimum(aff, 1.0))
        d = np.maximum(d, 0.0)
        D[i, i + 1 :] = d
        D[i + 1 :, i] = d
    for i in range(N):
        for j in range(i + 1, N):
            if np.array_equal(M[i], M[j]):
                D[i, j] = D[j, i] = 0.0
    return D


@dataclass
class SSDResult:
    """Distance matrix plus the intermediate products that produced it."""

    distances: np.ndarray
    model: GaussianHMM
    induced: np.ndarray
    processed: np.ndarray
    fb_count: int
    train_log_likelihood: float
    options: SSDOptions
    train_config: TrainConfig

    def metadata(self) -> dict:
        return {
            "method": "ssd",
            "K": self.model.n_states,
            "options": asdict(self.options),
            "train_config": asdict(self.train_config),
            "fb_count": self.fb_count,
            "train_log_likelihood": self.train_log_likelihood,
        }


def ssd_distances(
    dataset,
    K: int,
    train_config: TrainConfig | None = None,
    options: SSDOptions | None = None,
    model: GaussianHMM | None = None,
) -> SSDResult:
    """Full SSD pipeline.

    1. fit one ``K``-state HMM on every sequence (skipped if ``model`` given);
    2. one forward-backward pass per sequence to get its induced matrix;
    3. pairwise SSD distances between the processed matrices.
    """
    train_config = train_config or TrainConfig()
    options = options or SSDOptions()
    seqs = [hmm.as_sequence(s) for s in dataset]
    if not seqs:
        raise SSDError("dataset is empty")
    if model is None:
        trained = hmm.fit(seqs, K, train_config)
        model, train_ll = trained.model, trained.log_likelihood
    else:
        if model.n_states != K:
            raise SSDError(f"model has {model.n_states} states, expected {K}")
        train_ll = float("nan")

    before = hmm.counters["forward_backward"]
    induced = np.stack([induced_transition(s, model) for s in seqs])
    fb_count = hmm.counters["forward_backward"] - before

    processed = np.stack([apply_options(A, options) for A in induced])
    D = pairwise_ssd(processed)
    return SSDResult(D, model, induced, processed, fb_count, train_ll, options, train_config)


def ssd_distance_matrix(dataset, K: int, train_config=None, options=None) -> np.ndarray:
    """``N x N`` SSD distance matrix for ``dataset``."""
    return ssd_distances(dataset, K, train_config, options).distances
