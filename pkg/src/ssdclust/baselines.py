"""
Likelihood-matrix distances built from one HMM per sequence.

``L[i, j]`` is the per-sample log-likelihood of sequence ``j`` under the
model trained on sequence ``i``. The SYM, BP, YY and KL distances are all
functions of ``L``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import hmm
from .hmm import GaussianHMM, TrainConfig

METHODS = ("sym", "bp", "yy", "kl")
_KL_FLOOR = 1e-12


class BaselineError(ValueError):
    pass


def _fit_one(index: int, seq, Km: int, config: TrainConfig) -> GaussianHMM:
    if seq.shape[0] < Km:
        raise BaselineError(
            f"sequence {index} has length {seq.shape[0]}, too short for {Km} states"
        )
    return hmm.baum_welch([seq], Km, config)


def train_per_sequence_models(
    dataset, Km: int, config: TrainConfig | None = None, n_jobs: int = 1
) -> list[GaussianHMM]:
    """Train model ``i`` on sequence ``i`` alone.

    Every sequence uses the same ``config`` (and seed), so identical
    sequences yield identical models. ``n_jobs > 1`` fans the fits out with
    joblib; results do not depend on it.
    """
    config = config or TrainConfig()
    seqs = [hmm.as_sequence(s) for s in dataset]
    for i, s in enumerate(seqs):
        if s.shape[0] < Km:
            raise BaselineError(f"sequence {i} has length {s.shape[0]}, too short for {Km} states")
    if n_jobs == 1:
        return [_fit_one(i, s, Km, config) for i, s in enumerate(seqs)]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(_fit_one)(i, s, Km, config) for i, s in enumerate(seqs))


def likelihood_matrix(dataset, models) -> np.ndarray:
    """``L[i, j] = log p(S_j | theta_i) / len(S_j)``; exactly ``N**2`` evaluations."""
    seqs = [hmm.as_sequence(s) for s in dataset]
    if len(models) != len(seqs):
        raise BaselineError(f"got {len(models)} models for {len(seqs)} sequences")
    N = len(seqs)
    L = np.empty((N, N))
    for i, model in enumerate(models):
        for j, s in enumerate(seqs):
            L[i, j] = hmm.log_likelihood(s, model) / s.shape[0]
    return L


def _check_L(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 1:
        raise BaselineError("likelihood matrix must be square and non-empty")
    if not np.all(np.isfinite(L)):
        raise BaselineError("likelihood matrix has non-finite entries")
    return L


def _canonical(raw: np.ndarray) -> np.ndarray:
    """Symmetrize, zero the diagonal and shift so the minimum is not negative."""
    D = 0.5 * (raw + raw.T)
    np.fill_diagonal(D, 0.0)
    N = D.shape[0]
    if N > 1:
        low = D[~np.eye(N, dtype=bool)].min()
        if low < 0:
            D = D - low
            np.fill_diagonal(D, 0.0)
    return D


def symmetrized_likelihood(L) -> np.ndarray:
    """Raw ``(l_ij + l_ji) / 2``; larger means more similar."""
    L = _check_L(L)
    return 0.5 * (L + L.T)


def sym_distance(L) -> np.ndarray:
    """SYM distance: the negated symmetrized likelihood, shifted to be >= 0."""
    return _canonical(-symmetrized_likelihood(L))


def bp_distance(L) -> np.ndarray:
    """BP distance ``((l_ij - l_ii)/l_ii + (l_ji - l_jj)/l_jj) / 2``."""
    L = _check_L(L)
    diag = np.diag(L)
    if np.any(diag == 0):
        raise BaselineError("BP distance is undefined when a self-likelihood is zero")
    rel = (L - diag[:, None]) / diag[:, None]
    return _canonical(0.5 * (rel + rel.T))


def yy_distance(L) -> np.ndarray:
    """Yin-Yang distance ``|l_ii + l_jj - l_ij - l_ji|``."""
    L = _check_L(L)
    diag = np.diag(L)
    D = np.abs(diag[:, None] + diag[None, :] - L - L.T)
    np.fill_diagonal(D, 0.0)
    return D


def normalize_columns(L) -> np.ndarray:
    """Map every column of ``L`` to a probability vector over the models.

    Columns are exponentiated after subtracting their maximum, normalized,
    floored at 1e-12 and renormalized so every entry is positive.
    """
    L = np.asarray(L, dtype=float)
    P = np.exp(L - L.max(axis=0, keepdims=True))
    P /= P.sum(axis=0, keepdims=True)
    P = np.maximum(P, _KL_FLOOR)
    return P / P.sum(axis=0, keepdims=True)


def symmetric_kl(p, q) -> float:
    """``(KL(p||q) + KL(q||p)) / 2`` in nats; ``p`` and ``q`` strictly positive."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(0.5 * np.sum((p - q) * (np.log(p) - np.log(q))))


def kl_distance(L) -> np.ndarray:
    """Symmetrized KL divergence between columns of the normalized ``L``.

    ``L`` may be rectangular (``P x N``) when only ``P`` sequences have
    their own model.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[1] < 2:
        raise BaselineError("KL distance needs at least two sequences")
    if not np.all(np.isfinite(L)):
        raise BaselineError("likelihood matrix has non-finite entries")
    F = normalize_columns(L)
    logF = np.log(F)
    # (p - q)·(log p - log q) expands to the four cross terms below
    pl = np.einsum("ki,ki->i", F, logF)
    cross = F.T @ logF
    D = 0.5 * (pl[:, None] + pl[None, :] - cross - cross.T)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


@dataclass
class BaselineResult:
    L: np.ndarray
    models: list
    likelihood_count: int
    Km: int
    train_config: TrainConfig
    subset: np.ndarray | None = None

    def distances(self, method: str) -> np.ndarray:
        method = method.lower()
        if method == "kl":
            return kl_distance(self.L)
        if self.subset is not None:
            raise BaselineError(f"{method} needs a square likelihood matrix (no subset)")
        if method == "sym":
            return sym_distance(self.L)
        if method == "bp":
            return bp_distance(self.L)
        if method == "yy":
            return yy_distance(self.L)
        raise BaselineError(f"unknown baseline method {method!r}")

    def metadata(self) -> dict:
        return {
            "Km": self.Km,
            "train_config": asdict(self.train_config),
            "likelihood_count": self.likelihood_count,
            "subset_size": None if self.subset is None else int(len(self.subset)),
        }


def fit_baselines(
    dataset,
    Km: int,
    config: TrainConfig | None = None,
    subset_size: int | None = None,
    subset_seed=None,
    n_jobs: int = 1,
) -> BaselineResult:
    """Train per-sequence models and evaluate the likelihood matrix.

    With ``subset_size=P`` only ``P`` uniformly chosen sequences get a model
    and ``L`` is ``P x N``; only the KL distance is then available.
    """
    config = config or TrainConfig()
    seqs = [hmm.as_sequence(s) for s in dataset]
    subset = None
    owners = seqs
    if subset_size is not None:
        if not 1 <= subset_size <= len(seqs):
            raise BaselineError("subset_size must lie in [1, N]")
        rng = np.random.default_rng(subset_seed)
        subset = np.sort(rng.choice(len(seqs), size=subset_size, replace=False))
        owners = [seqs[i] for i in subset]
    models = train_per_sequence_models(owners, Km, config, n_jobs=n_jobs)
    before = hmm.counters["log_likelihood"]
    if subset is None:
        L = likelihood_matrix(seqs, models)
    else:
        L = np.array([[hmm.log_likelihood(s, m) / s.shape[0] for s in seqs] for m in models])
    count = hmm.counters["log_likelihood"] - before
    return BaselineResult(L, models, count, Km, config, subset)
