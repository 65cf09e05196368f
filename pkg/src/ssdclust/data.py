"""
Datasets: the mixture-of-HMMs benchmark, a control-chart generator,
sequence CSV files and windowing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hmm
from .hmm import GaussianHMM

#: Transition matrices of the two mixture components.
MOHMM_A1 = np.array([[0.6, 0.4], [0.4, 0.6]])
MOHMM_A2 = np.array([[0.4, 0.6], [0.6, 0.4]])
MOHMM_MEANS = np.array([[0.0], [3.0]])


class DataError(ValueError):
    pass


@dataclass
class LabeledDataset:
    """Sequences with optional integer class labels."""

    sequences: list
    labels: np.ndarray | None = None
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.sequences = [hmm.as_sequence(s) for s in self.sequences]
        if self.sequences:
            d = self.sequences[0].shape[1]
            if any(s.shape[1] != d for s in self.sequences):
                raise DataError("sequences have inconsistent dimensions")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.sequences),):
                raise DataError("need one label per sequence")
            if np.any(self.labels < 0):
                raise DataError("labels must be non-negative")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.sequences))]

    def __len__(self):
        return len(self.sequences)

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1

    @property
    def n_features(self) -> int:
        return self.sequences[0].shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = list(idx)
        return LabeledDataset(
            [self.sequences[i] for i in idx],
            None if self.labels is None else self.labels[idx],
            [self.ids[i] for i in idx],
        )


def mohmm_models() -> tuple[GaussianHMM, GaussianHMM]:
    """The two 2-state components: shared N(0,1)/N(3,1) emissions, uniform
    start, and mirrored transition matrices."""
    var = np.ones((2, 1))
    pi = np.full(2, 0.5)
    return GaussianHMM(pi, MOHMM_A1, MOHMM_MEANS, var), GaussianHMM(pi, MOHMM_A2, MOHMM_MEANS, var)


@dataclass(frozen=True)
class MoHMMConfig:
    n: int = 100
    mean_length: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DataError("need at least two sequences")
        if self.mean_length < 5:
            raise DataError("mean_length must be >= 5")

    @property
    def length_range(self) -> tuple[int, int]:
        return math.ceil(0.6 * self.mean_length), math.floor(1.4 * self.mean_length)


def generate_mohmm(config: MoHMMConfig, return_states: bool = False):
    """Sequences from an equiprobable mixture of the two :func:`mohmm_models`.

    Lengths are uniform integers in ``[ceil(0.6 mu), floor(1.4 mu)]``. The
    label of each sequence is the index of the component that generated it.
    """
    models = mohmm_models()
    rng = np.random.default_rng(config.seed)
    lo, hi = config.length_range
    labels = rng.integers(0, 2, size=config.n)
    lengths = rng.integers(lo, hi + 1, size=config.n)
    seeds = rng.integers(0, 2**63 - 1, size=config.n)
    seqs, states = [], []
    for lab, T, s in zip(labels, lengths, seeds):
        X, q = hmm.sample(models[lab], int(T), int(s), return_states=True)
        seqs.append(X)
        states.append(q)
    ds = LabeledDataset(seqs, labels)
    if return_states:
        return ds, states
    return ds


CONTROL_CHART_CLASSES = (
    "normal",
    "cyclic",
    "increasing_trend",
    "decreasing_trend",
    "upward_shift",
    "downward_shift",
)


def generate_control_charts(n_per_class: int = 100, length: int = 60, seed=None) -> LabeledDataset:
    """Six-class synthetic control charts.

    All classes share a base level of 30 with uniform noise ``2 r``,
    ``r ~ U(-3, 3)``. Cyclic charts add ``a sin(2 pi t / p)`` with
    ``a ~ U(10, 15)``, ``p ~ U(10, 15)``; trends add ``+-g t`` with
    ``g ~ U(0.2, 0.5)``; shifts add ``+-x`` with ``x ~ U(7.5, 20)`` from a
    change time drawn in ``[length/3, 2 length/3]``. Labels follow
    :data:`CONTROL_CHART_CLASSES`.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=float)
    seqs, labels = [], []
    for c, name in enumerate(CONTROL_CHART_CLASSES):
        for _ in range(n_per_class):
            y = 30.0 + 2.0 * rng.uniform(-3.0, 3.0, size=length)
            if name == "cyclic":
                y += rng.uniform(10, 15) * np.sin(2 * np.pi * t / rng.uniform(10, 15))
            elif name.endswith("trend"):
                sign = 1.0 if name.startswith("increasing") else -1.0
                y += sign * rng.uniform(0.2, 0.5) * t
            elif name.endswith("shift"):
                sign = 1.0 if name.startswith("upward") else -1.0
                t0 = rng.integers(length // 3, 2 * length // 3 + 1)
                y += sign * rng.uniform(7.5, 20) * (t >= t0)
            seqs.append(y[:, None])
            labels.append(c)
    return LabeledDataset(seqs, np.array(labels))


# visiting orders of the regime fixture; states emit N(0|3|6, 0.25)
REGIME_CYCLES = (
    (0, 1, 2), (0, 2, 1), (0, 1), (1, 2), (0, 2), (0,), (1,), (2,), (0, 1, 2, 1),
)


def regime_model(cycle, p: float = 0.9) -> GaussianHMM:
    """Three-state HMM that follows ``cycle`` with probability ``p``.

    States off the cycle jump to its first state. Regimes share emissions
    and differ only in how they move between states.
    """
    K = 3
    A = np.full((K, K), (1.0 - p) / (K - 1))
    for s in range(K):
        nxt = cycle[(cycle.index(s) + 1) % len(cycle)] if s in cycle else cycle[0]
        A[s, nxt] = p
    pi = np.full(K, 0.02 / K)
    pi[cycle[0]] += 0.98
    return GaussianHMM(pi, A, [[0.0], [3.0], [6.0]], [[0.25]] * K)


def generate_regimes(length: int = 50, cycles=REGIME_CYCLES, seed=None) -> LabeledDataset:
    """One sequence per regime in ``cycles``, labelled by position.

    Concatenated in order, this is a segmentation fixture whose boundaries
    are visible only through the dynamics.
    """
    if length < 2:
        raise DataError("regime length must be at least 2")
    seeds = np.random.SeedSequence(seed).spawn(len(cycles))
    seqs = [hmm.sample(regime_model(c), length, seed=ss) for c, ss in zip(cycles, seeds)]
    return LabeledDataset(seqs, np.arange(len(cycles)))


def load_control_chart(path) -> LabeledDataset:
    """Read the public control-chart corpus.

    Accepts either the sequence CSV format of :func:`load_sequences` or the
    original whitespace-separated text file (one 60-sample series per line,
    600 lines in six consecutive blocks of 100, one block per class).
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("seq_id"):
        return load_sequences(path)
    rows = np.loadtxt(path)
    if rows.ndim != 2 or rows.shape[0] % len(CONTROL_CHART_CLASSES):
        raise DataError(f"{path}: expected blocks of equal size for 6 classes")
    per = rows.shape[0] // len(CONTROL_CHART_CLASSES)
    labels = np.repeat(np.arange(len(CONTROL_CHART_CLASSES)), per)
    return LabeledDataset([r[:, None] for r in rows], labels)


# --------------------------------------------------------------------------
# CSV


def save_sequences(dataset: LabeledDataset, path) -> None:
    """Write ``seq_id,t,[label,]f0..f{d-1}`` rows sorted by (seq_id, t).

    Floats are written with ``repr`` so loading returns identical values.
    """
    d = dataset.n_features
    header = ["seq_id", "t"] + (["label"] if dataset.labels is not None else [])
    header += [f"f{k}" for k in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n, X in enumerate(dataset.sequences):
            sid = dataset.ids[n]
            lab = [] if dataset.labels is None else [int(dataset.labels[n])]
            for t, row in enumerate(X):
                w.writerow([sid, t] + lab + [repr(float(v)) for v in row])


def load_sequences(path) -> LabeledDataset:
    """Read a sequence CSV file.

    Rows are grouped by ``seq_id`` (in order of first appearance) and sorted
    by ``t``. The ``label`` column is optional. Malformed input raises
    :class:`DataError` naming the offending line.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header[:2] != ["seq_id", "t"]:
            raise DataError(f"{path}:1: header must start with seq_id,t")
        has_label = len(header) > 2 and header[2] == "label"
        feat_cols = header[3:] if has_label else header[2:]
        if not feat_cols:
            raise DataError(f"{path}:1: no feature columns")
        if feat_cols != [f"f{k}" for k in range(len(feat_cols))]:
            raise DataError(f"{path}:1: feature columns must be f0..f{len(feat_cols) - 1}")
        width = len(header)

        groups: dict[str, dict[int, list[float]]] = {}
        labels: dict[str, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            sid = row[0].strip()
            try:
                t = int(row[1])
                lab = int(row[2]) if has_label else None
                vals = [float(v) for v in row[width - len(feat_cols):]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            seq = groups.setdefault(sid, {})
            if t in seq:
                raise DataError(f"{path}:{lineno}: duplicate time index {t} for sequence {sid!r}")
            seq[t] = vals
            if has_label:
                if labels.setdefault(sid, lab) != lab:
                    raise DataError(f"{path}:{lineno}: label changes within sequence {sid!r}")

    if not groups:
        raise DataError(f"{path}: no data rows")
    ids = list(groups)
    seqs = [np.array([groups[s][t] for t in sorted(groups[s])]) for s in ids]
    lab_arr = np.array([labels[s] for s in ids]) if has_label else None
    return LabeledDataset(seqs, lab_arr, ids)


# --------------------------------------------------------------------------
# windowing


def window_subsequences(seq, W: int) -> list[np.ndarray]:
    """Non-overlapping length-``W`` windows; a shorter tail is dropped."""
    X = hmm.as_sequence(seq)
    if W < 2:
        raise DataError("window length must be >= 2")
    if W > X.shape[0]:
        raise DataError(f"window length {W} exceeds sequence length {X.shape[0]}")
    n = X.shape[0] // W
    return [X[k * W:(k + 1) * W] for k in range(n)]


def concatenate_sources(dataset: LabeledDataset):
    """Join all sequences into one long sequence, grouped by label.

    Returns the concatenated ``(T, d)`` array and the per-sample source
    label. Sequences keep their relative order inside each label.
    """
    if dataset.labels is None:
        raise DataError("concatenation needs labelled sequences")
    order = np.argsort(dataset.labels, kind="stable")
    X = np.concatenate([dataset.sequences[i] for i in order], axis=0)
    y = np.concatenate([np.full(dataset.sequences[i].shape[0], dataset.labels[i]) for i in order])
    return X, y


def window_labels(sample_labels, W: int) -> np.ndarray:
    """Majority source label per window (ties go to the smaller label)."""
    y = np.asarray(sample_labels)
    n = y.size // W
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        out[k] = np.argmax(np.bincount(y[k * W:(k + 1) * W]))
    return out
