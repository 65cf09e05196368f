"""
Gaussian-emission hidden Markov models.

Scaled forward-backward inference, sequence log-likelihoods, multi-sequence
Baum-Welch training with restarts, sampling and JSON serialization.
Emissions are diagonal-covariance Gaussians.
"""
from __future__ import annotations

import bisect
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np

FORMAT_VERSION = 1
_LOG_2PI = math.log(2.0 * math.pi)
_EMPTY_STATE = 1e-8

#: Operation counters. ``forward_backward`` and ``log_likelihood`` count public
#: calls; ``em_estep`` counts per-sequence E-steps performed during training.
counters: Counter = Counter()


class HMMError(ValueError):
    """Invalid input to an HMM routine."""


class DegenerateModelError(HMMError):
    """The model assigns zero probability to an observation sequence."""


def as_sequence(x) -> np.ndarray:
    """Coerce ``x`` to a finite ``(T, d)`` float array with ``T >= 1``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise HMMError(f"sequence must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise HMMError("sequence must contain at least one observation")
    if arr.shape[1] < 1:
        raise HMMError("observations must have at least one feature")
    if not np.all(np.isfinite(arr)):
        raise HMMError("sequence contains non-finite observations")
    return arr


def _as_dataset(dataset) -> list[np.ndarray]:
    seqs = [as_sequence(s) for s in dataset]
    if not seqs:
        raise HMMError("dataset is empty")
    d = seqs[0].shape[1]
    for i, s in enumerate(seqs):
        if s.shape[1] != d:
            raise HMMError(f"sequence {i} has dimension {s.shape[1]}, expected {d}")
    return seqs


@dataclass(frozen=True)
class GaussianHMM:
    """HMM with ``K`` states and diagonal Gaussian emissions.

    Attributes
    ----------
    pi : ndarray (K,)
        Initial state distribution.
    A : ndarray (K, K)
        Row-stochastic transition matrix, ``A[i, j] = p(q_{t+1}=j | q_t=i)``.
    means, variances : ndarray (K, d)
        Emission parameters. Variances are strictly positive.
    """

    pi: np.ndarray
    A: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        A = np.array(self.A, dtype=float)
        means = np.array(self.means, dtype=float)
        variances = np.array(self.variances, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if variances.ndim == 1:
            variances = variances[:, None]
        K = pi.shape[0]
        if pi.ndim != 1 or K < 1:
            raise HMMError("pi must be a non-empty vector")
        if A.shape != (K, K):
            raise HMMError(f"A must have shape {(K, K)}, got {A.shape}")
        if means.shape[0] != K or variances.shape != means.shape:
            raise HMMError("emission parameters must have shape (K, d)")
        for name, arr in (("pi", pi), ("A", A), ("means", means), ("variances", variances)):
            if not np.all(np.isfinite(arr)):
                raise HMMError(f"{name} contains non-finite values")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-10:
            raise HMMError("pi must lie on the probability simplex")
        if np.any(A < 0) or np.any(np.abs(A.sum(axis=1) - 1.0) > 1e-10):
            raise HMMError("rows of A must lie on the probability simplex")
        if np.any(variances <= 0):
            raise HMMError("emission variances must be strictly positive")
        for name, arr in (("pi", pi), ("A", A), ("means", means), ("variances", variances)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def emission_logpdf(self, X: np.ndarray) -> np.ndarray:
        """Log emission densities, shape ``(T, K)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise HMMError(
                f"observation dimension {X.shape[-1]} does not match model dimension "
                f"{self.n_features}"
            )
        inv = 1.0 / self.variances
        const = -0.5 * (self.n_features * _LOG_2PI + np.log(self.variances).sum(axis=1))
        # expand (x - m)^2 / v without materializing (T, K, d)
        quad = (X**2) @ inv.T - 2.0 * X @ (self.means * inv).T + (self.means**2 * inv).sum(axis=1)
        return const - 0.5 * quad

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gaussian_hmm_diag",
            "n_states": self.n_states,
            "n_features": self.n_features,
            "pi": self.pi.tolist(),
            "A": self.A.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianHMM":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise HMMError(f"unsupported model format_version {version!r}")
        return cls(data["pi"], data["A"], data["means"], data["variances"])

    def to_json(self) -> str:
        # json writes floats with repr, so values round-trip bit-exactly
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GaussianHMM":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FBResult:
    """Output of :func:`forward_backward`.

    ``alpha`` and ``beta`` are the scaled forward/backward variables: each
    ``alpha[t]`` sums to one, and ``log_scaling[t]`` is the log normalizer of
    step ``t``, so ``log_scaling.sum()`` is the sequence log-likelihood.
    """

    log_likelihood: float
    gamma: np.ndarray
    xi_sum: np.ndarray
    log_scaling: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def slice_log_likelihoods(self) -> np.ndarray:
        """``log sum_k alpha_k(t) beta_k(t)`` for every t, in unscaled terms.

        Every entry equals the sequence log-likelihood up to rounding.
        """
        cum = np.cumsum(self.log_scaling)
        total = cum[-1]
        with np.errstate(divide="ignore"):
            log_alpha = np.log(self.alpha) + cum[:, None]
            log_beta = np.log(self.beta) + (total - cum)[:, None]
        s = np.where(self.alpha > 0, log_alpha + log_beta, -np.inf)
        m = s.max(axis=1)
        return m + np.log(np.exp(s - m[:, None]).sum(axis=1))


@numba.njit(cache=True)
def _fb_kernel(logB, pi, A):
    T, K = logB.shape
    shift = np.empty(T)
    B = np.empty((T, K))
    for t in range(T):
        m = logB[t, 0]
        for k in range(1, K):
            if logB[t, k] > m:
                m = logB[t, k]
        shift[t] = m
        for k in range(K):
            B[t, k] = math.exp(logB[t, k] - m)

    alpha = np.empty((T, K))
    c = np.empty(T)
    s = 0.0
    for k in range(K):
        alpha[0, k] = pi[k] * B[0, k]
        s += alpha[0, k]
    c[0] = s
    if not s > 0.0:
        return False, 0.0, alpha, alpha, alpha, np.zeros((K, K)), c
    for k in range(K):
        alpha[0, k] /= s
    for t in range(1, T):
        s = 0.0
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += alpha[t - 1, i] * A[i, j]
            alpha[t, j] = acc * B[t, j]
            s += alpha[t, j]
        c[t] = s
        if not s > 0.0:
            return False, 0.0, alpha, alpha, alpha, np.zeros((K, K)), c
        for j in range(K):
            alpha[t, j] /= s

    beta = np.empty((T, K))
    for k in range(K):
        beta[T - 1, k] = 1.0
    xi_sum = np.zeros((K, K))
    tmp = np.empty(K)
    for t in range(T - 2, -1, -1):
        for j in range(K):
            tmp[j] = B[t + 1, j] * beta[t + 1, j] / c[t + 1]
        for i in range(K):
            acc = 0.0
            for j in range(K):
                v = A[i, j] * tmp[j]
                acc += v
                xi_sum[i, j] += alpha[t, i] * v
            beta[t, i] = acc

    gamma = alpha * beta
    for t in range(T):
        s = 0.0
        for k in range(K):
            s += gamma[t, k]
        for k in range(K):
            gamma[t, k] /= s

    log_c = np.empty(T)
    loglik = 0.0
    for t in range(T):
        log_c[t] = math.log(c[t]) + shift[t]
        loglik += log_c[t]
    return True, loglik, alpha, beta, gamma, xi_sum, log_c


@numba.njit(cache=True)
def _forward_kernel(logB, pi, A):
    T, K = logB.shape
    alpha = np.empty(K)
    new = np.empty(K)
    m = logB[0, 0]
    for k in range(1, K):
        m = max(m, logB[0, k])
    s = 0.0
    for k in range(K):
        alpha[k] = pi[k] * math.exp(logB[0, k] - m)
        s += alpha[k]
    if not s > 0.0:
        return False, 0.0
    loglik = math.log(s) + m
    for k in range(K):
        alpha[k] /= s
    for t in range(1, T):
        m = logB[t, 0]
        for k in range(1, K):
            m = max(m, logB[t, k])
        s = 0.0
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += alpha[i] * A[i, j]
            new[j] = acc * math.exp(logB[t, j] - m)
            s += new[j]
        if not s > 0.0:
            return False, 0.0
        loglik += math.log(s) + m
        for j in range(K):
            alpha[j] = new[j] / s
    return True, loglik


@numba.njit(cache=True)
def _logsumexp(v):
    m = v[0]
    for x in v[1:]:
        if x > m:
            m = x
    if m == -np.inf:
        return m
    s = 0.0
    for x in v:
        s += math.exp(x - m)
    return m + math.log(s)


@numba.njit(cache=True)
def _logaddexp(a, b):
    if a < b:
        a, b = b, a
    if b == -np.inf:
        return a
    return a + math.log1p(math.exp(b - a))


@numba.njit(cache=True)
def _log_forward(logB, log_pi, log_A):
    T, K = logB.shape
    la = np.empty((T, K))
    log_c = np.empty(T)
    v = np.empty(K)
    for k in range(K):
        la[0, k] = log_pi[k] + logB[0, k]
    for t in range(T):
        if t > 0:
            for j in range(K):
                for i in range(K):
                    v[i] = la[t - 1, i] + log_A[i, j]
                la[t, j] = _logsumexp(v) + logB[t, j]
        log_c[t] = _logsumexp(la[t])
        if log_c[t] == -np.inf:
            return False, la, log_c
        la[t] -= log_c[t]
    return True, la, log_c


@numba.njit(cache=True)
def _fb_log_kernel(logB, pi, A):
    # Exact log-domain pass, used when the scaled pass underflows because
    # the transitions rule out every state that explains an observation.
    T, K = logB.shape
    log_A = np.log(A)
    ok, la, log_c = _log_forward(logB, np.log(pi), log_A)
    if not ok:
        return False, 0.0, la, la, la, np.zeros((K, K)), log_c
    v = np.empty(K)
    lb = np.zeros((T, K))
    xi = np.full((K, K), -np.inf)
    w = np.empty(K)
    for t in range(T - 2, -1, -1):
        for j in range(K):
            w[j] = logB[t + 1, j] + lb[t + 1, j] - log_c[t + 1]
        for i in range(K):
            for j in range(K):
                v[j] = log_A[i, j] + w[j]
                xi[i, j] = _logaddexp(xi[i, j], la[t, i] + v[j])
            lb[t, i] = _logsumexp(v)

    gamma = np.empty((T, K))
    for t in range(T):
        for k in range(K):
            v[k] = la[t, k] + lb[t, k]
        z = _logsumexp(v)
        for k in range(K):
            gamma[t, k] = math.exp(v[k] - z)
    loglik = 0.0
    for t in range(T):
        loglik += log_c[t]
    return True, loglik, np.exp(la), np.exp(lb), gamma, np.exp(xi), log_c


def _forward_log_kernel(logB, pi, A):
    with np.errstate(divide="ignore"):
        ok, _, log_c = _log_forward(logB, np.log(pi), np.log(A))
    return ok, float(log_c.sum()) if ok else 0.0


def _fb(logB, pi, A):
    out = _fb_kernel(logB, pi, A)
    if not out[0]:
        with np.errstate(divide="ignore"):
            out = _fb_log_kernel(logB, pi, A)
        if not out[0]:
            raise DegenerateModelError("sequence has zero probability under the model")
    return out


def _check_dims(X: np.ndarray, model: GaussianHMM):
    if X.shape[1] != model.n_features:
        raise HMMError(
            f"sequence dimension {X.shape[1]} does not match model dimension {model.n_features}"
        )


def _run_fb(X: np.ndarray, model: GaussianHMM) -> FBResult:
    _, ll, alpha, beta, gamma, xi_sum, log_c = _fb(model.emission_logpdf(X), model.pi, model.A)
    return FBResult(float(ll), gamma, xi_sum, log_c, alpha, beta)


def forward_backward(seq, model: GaussianHMM) -> FBResult:
    """Scaled forward-backward pass of ``seq`` through ``model``.

    Runs in O(K^2 T). Raises :class:`HMMError` on a dimension mismatch or
    non-finite observations and :class:`DegenerateModelError` when the
    sequence is impossible under the model.
    """
    X = as_sequence(seq)
    _check_dims(X, model)
    counters["forward_backward"] += 1
    return _run_fb(X, model)


def log_likelihood(seq, model: GaussianHMM) -> float:
    """``log p(seq | model)`` computed with the scaled forward recursion."""
    X = as_sequence(seq)
    _check_dims(X, model)
    counters["log_likelihood"] += 1
    logB = model.emission_logpdf(X)
    ok, ll = _forward_kernel(logB, model.pi, model.A)
    if not ok:
        ok, ll = _forward_log_kernel(logB, model.pi, model.A)
        if not ok:
            raise DegenerateModelError("sequence has zero probability under the model")
    return float(ll)


def sample(model: GaussianHMM, T: int, seed=None, return_states: bool = False):
    """Draw a length-``T`` sequence from ``model``.

    Deterministic given ``seed``. With ``return_states`` the hidden state
    path is returned as well.
    """
    if T < 1:
        raise HMMError("T must be at least 1")
    rng = np.random.default_rng(seed)
    K = model.n_states
    u = rng.random(T)
    cum_pi = np.cumsum(model.pi)
    cum_A = np.cumsum(model.A, axis=1)
    states = np.empty(T, dtype=np.int64)
    states[0] = min(int(np.searchsorted(cum_pi, u[0], side="right")), K - 1)
    rows = cum_A.tolist()
    q = int(states[0])
    for t in range(1, T):
        q = min(bisect.bisect_right(rows[q], u[t]), K - 1)
        states[t] = q
    noise = rng.standard_normal((T, model.n_features))
    X = model.means[states] + noise * np.sqrt(model.variances[states])
    if return_states:
        return X, states
    return X


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    """Baum-Welch settings.

    ``variance_floor`` is relative: each emission variance is kept above
    ``variance_floor`` times the global per-dimension sample variance.
    """

    max_iters: int = 200
    log_lik_rel_tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise HMMError("max_iters must be >= 1")
        if self.restarts < 1:
            raise HMMError("restarts must be >= 1")
        if not self.log_lik_rel_tol > 0 or not self.variance_floor > 0:
            raise HMMError("tolerances must be positive")


@dataclass
class TrainResult:
    model: GaussianHMM
    log_likelihood: float
    trace: list = field(default_factory=list)
    restart_log_likelihoods: list = field(default_factory=list)
    best_restart: int = 0


def _global_variance(seqs: list[np.ndarray]) -> np.ndarray:
    allx = np.concatenate(seqs, axis=0)
    return allx.var(axis=0)


def _floor_values(global_var: np.ndarray, rel: float) -> np.ndarray:
    floor = rel * global_var
    # constant features have zero spread; fall back to an absolute floor
    return np.where(floor > 0, floor, rel)


def init_model(dataset, K: int, seed=None) -> GaussianHMM:
    """Initial model: uniform ``pi`` and ``A``, global variances, and means at
    ``K`` observations picked by k-means++ seeding (each next mean drawn with
    probability proportional to its squared distance from the chosen ones).
    """
    seqs = _as_dataset(dataset)
    if K < 1:
        raise HMMError("K must be >= 1")
    allx = np.concatenate(seqs, axis=0)
    n = allx.shape[0]
    if n < K:
        raise HMMError(f"K={K} exceeds the total number of observations ({n})")
    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(n))]
    d2 = ((allx - allx[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # fewer distinct observations than states
            nxt = int(rng.choice(np.setdiff1d(np.arange(n), idx)))
        idx.append(nxt)
        d2 = np.minimum(d2, ((allx - allx[nxt]) ** 2).sum(axis=1))
    var = np.maximum(allx.var(axis=0), _floor_values(allx.var(axis=0), 1e-6))
    return GaussianHMM(
        pi=np.full(K, 1.0 / K),
        A=np.full((K, K), 1.0 / K),
        means=allx[idx].copy(),
        variances=np.tile(var, (K, 1)),
    )


def _e_step(seqs, model: GaussianHMM):
    K, d = model.n_states, model.n_features
    total = 0.0
    pi_acc = np.zeros(K)
    xi_acc = np.zeros((K, K))
    occ = np.zeros(K)
    sx = np.zeros((K, d))
    sxx = np.zeros((K, d))
    logB_all = model.emission_logpdf(np.concatenate(seqs, axis=0))
    start = 0
    for X in seqs:
        counters["em_estep"] += 1
        logB = logB_all[start:start + X.shape[0]]
        start += X.shape[0]
        _, ll, _, _, g, xi_sum, _ = _fb(logB, model.pi, model.A)
        total += ll
        pi_acc += g[0]
        xi_acc += xi_sum
        occ += g.sum(axis=0)
        sx += g.T @ X
        sxx += g.T @ (X * X)
    return total, (pi_acc, xi_acc, occ, sx, sxx)


def _m_step(stats, model: GaussianHMM, floor: np.ndarray, n_seqs: int) -> GaussianHMM:
    pi_acc, xi_acc, occ, sx, sxx = stats
    K = model.n_states
    pi = pi_acc / n_seqs
    pi = pi / pi.sum()

    row = xi_acc.sum(axis=1)
    A = np.full((K, K), 1.0 / K)
    live = row >= _EMPTY_STATE
    A[live] = xi_acc[live] / row[live, None]

    means = model.means.copy()
    variances = model.variances.copy()
    full = occ >= _EMPTY_STATE
    means[full] = sx[full] / occ[full, None]
    var = sxx[full] / occ[full, None] - means[full] ** 2
    variances[full] = np.maximum(var, floor)
    return GaussianHMM(pi, A, means, variances)


def _fit_once(seqs, K, config: TrainConfig, seed, floor):
    model = init_model(seqs, K, seed)
    trace = []
    prev = None
    for _ in range(config.max_iters):
        ll, stats = _e_step(seqs, model)
        trace.append(ll)
        if prev is not None and (ll - prev) < config.log_lik_rel_tol * abs(prev):
            return model, trace
        prev = ll
        model = _m_step(stats, model, floor, len(seqs))
    ll, _ = _e_step(seqs, model)
    trace.append(ll)
    return model, trace


def restart_seeds(seed: int, restarts: int) -> list[int]:
    """Per-restart integer seeds derived from one root seed."""
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(restarts)]


def fit(dataset, K: int, config: TrainConfig | None = None) -> TrainResult:
    """Baum-Welch on several sequences, keeping the best of ``config.restarts`` runs.

    Each run stops after ``max_iters`` M-steps or once the relative
    improvement of the total log-likelihood drops below
    ``log_lik_rel_tol``. Ties between runs go to the earliest restart.
    """
    config = config or TrainConfig()
    seqs = _as_dataset(dataset)
    if K < 1:
        raise HMMError("K must be >= 1")
    n_obs = sum(s.shape[0] for s in seqs)
    if K > n_obs:
        raise HMMError(f"K={K} exceeds the total number of observations ({n_obs})")
    floor = _floor_values(_global_variance(seqs), config.variance_floor)

    best = None
    lls = []
    for r, s in enumerate(restart_seeds(config.seed, config.restarts)):
        model, trace = _fit_once(seqs, K, config, s, floor)
        lls.append(trace[-1])
        if best is None or trace[-1] > best.log_likelihood:
            best = TrainResult(model, trace[-1], trace, best_restart=r)
    best.restart_log_likelihoods = lls
    return best


def baum_welch(dataset, K: int, config: TrainConfig | None = None) -> GaussianHMM:
    """Train a ``K``-state model on all sequences in ``dataset``."""
    return fit(dataset, K, config).model


__all__ = [
    "FBResult",
    "GaussianHMM",
    "HMMError",
    "DegenerateModelError",
    "TrainConfig",
    "TrainResult",
    "as_sequence",
    "baum_welch",
    "fit",
    "forward_backward",
    "init_model",
    "log_likelihood",
    "sample",
    "counters",
]
