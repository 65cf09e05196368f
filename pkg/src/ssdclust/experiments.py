"""
End-to-end experiment drivers: distances, repeated clustering, spectral
segmentation and the mixture-of-HMMs benchmark.

All randomness derives from one root seed. Repetition ``r`` uses
``SeedSequence([root, r]).spawn(3)`` for, in order, data generation, HMM
training and the k-means step, each reduced to a 32-bit integer.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import baselines, spectral, ssd
from .data import LabeledDataset, MoHMMConfig, concatenate_sources, generate_mohmm
from .data import window_labels, window_subsequences
from .evaluation import clustering_accuracy, segmentation_error
from .hmm import TrainConfig
from .spectral import Segmentation
from .ssd import SSDOptions

METHODS = ("ssd",) + baselines.METHODS


@dataclass(frozen=True)
class RunSeeds:
    data: int
    train: int
    cluster: int


def derive_seeds(root: int, repetition: int = 0) -> RunSeeds:
    children = np.random.SeedSequence([int(root), int(repetition)]).spawn(3)
    data, train, cluster = (int(c.generate_state(1)[0]) for c in children)
    return RunSeeds(data, train, cluster)


def compute_distances(
    dataset,
    methods,
    K: int = 4,
    Km: int = 2,
    train_config: TrainConfig | None = None,
    options: SSDOptions | None = None,
    kl_subset: int | None = None,
    n_jobs: int = 1,
) -> tuple[dict, dict]:
    """Distance matrices for several methods on one dataset.

    Baselines share one set of per-sequence models. Returns
    ``(matrices, metadata)`` keyed by method name.
    """
    train_config = train_config or TrainConfig()
    seqs = dataset.sequences if isinstance(dataset, LabeledDataset) else list(dataset)
    methods = [m.lower() for m in methods]
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    out, meta = {}, {}
    if "ssd" in methods:
        t0 = time.perf_counter()
        res = ssd.ssd_distances(seqs, K, train_config, options)
        out["ssd"] = res.distances
        meta["ssd"] = res.metadata() | {"wall_time": time.perf_counter() - t0}
    base = [m for m in methods if m != "ssd"]
    square = [m for m in base if m != "kl" or kl_subset is None]
    if square:
        t0 = time.perf_counter()
        fitted = baselines.fit_baselines(seqs, Km, train_config, n_jobs=n_jobs)
        wall = time.perf_counter() - t0
        for m in square:
            out[m] = fitted.distances(m)
            meta[m] = {"method": m} | fitted.metadata() | {"wall_time": wall}
    if "kl" in base and kl_subset is not None:
        t0 = time.perf_counter()
        fitted = baselines.fit_baselines(
            seqs, Km, train_config, subset_size=kl_subset, subset_seed=train_config.seed,
            n_jobs=n_jobs,
        )
        out["kl"] = fitted.distances("kl")
        meta["kl"] = {"method": "kl"} | fitted.metadata() | {
            "wall_time": time.perf_counter() - t0
        }
    return out, meta


def cluster_and_score(D, C: int, truth=None, seed=None, kmeans_runs: int = 10) -> dict:
    assignment = spectral.spectral_cluster(D, C, kmeans_runs=kmeans_runs, seed=seed)
    rec = {"labels": assignment.labels, **assignment.report()}
    if truth is not None:
        rec.update(clustering_accuracy(assignment.labels, truth).to_dict())
    return rec


def run_clustering(
    dataset_factory,
    method: str,
    C: int,
    repetitions: int = 1,
    seed: int = 0,
    K: int = 4,
    Km: int = 2,
    train_config: TrainConfig | None = None,
    options: SSDOptions | None = None,
    kmeans_runs: int = 10,
    n_jobs: int = 1,
) -> dict:
    """Repeat data -> distances -> spectral clustering ``repetitions`` times.

    ``dataset_factory(data_seed)`` returns the :class:`LabeledDataset` of a
    repetition; fixed corpora can ignore the seed. Accuracy fields appear
    only when the dataset carries labels.
    """
    if C < 2:
        raise ValueError("need at least two clusters")
    train_config = train_config or TrainConfig()
    runs = []
    for r in range(repetitions):
        seeds = derive_seeds(seed, r)
        ds = dataset_factory(seeds.data)
        cfg = replace(train_config, seed=seeds.train)
        mats, meta = compute_distances(ds, [method], K, Km, cfg, options, n_jobs=n_jobs)
        rec = cluster_and_score(mats[method], C, ds.labels, seeds.cluster, kmeans_runs)
        rec.update(repetition=r, seeds=asdict(seeds), distance_metadata=meta[method])
        runs.append(rec)
    summary = {"method": method, "C": C, "repetitions": repetitions, "seed": seed}
    if runs and "accuracy" in runs[0]:
        acc = np.array([r["accuracy"] for r in runs])
        summary.update(mean_accuracy=float(acc.mean()), std_accuracy=float(acc.std()),
                       mean_error=float(100 - acc.mean()))
    return {"summary": summary, "runs": runs}


def run_segmentation(
    dataset: LabeledDataset,
    W: int,
    C: int | None = None,
    method: str = "ssd",
    K: int = 4,
    Km: int = 2,
    train_config: TrainConfig | None = None,
    options: SSDOptions | None = None,
) -> dict:
    """Concatenate the sources, cut into length-``W`` windows, compute
    window distances and segment them spectrally."""
    if dataset.labels is not None:
        X, y = concatenate_sources(dataset)
    else:
        X, y = np.concatenate(dataset.sequences, axis=0), None
    windows = window_subsequences(X, W)
    if C is None:
        if y is None:
            raise ValueError("number of segments is required for unlabeled data")
        C = int(np.unique(y).size)
    mats, meta = compute_distances(windows, [method], K, Km, train_config, options)
    seg = spectral.spectral_segment(mats[method], C)
    out = {
        "n_windows": len(windows),
        "n_segments": seg.n_segments,
        "starts": seg.starts,
        "change_points": seg.change_points,
        "labels": seg.labels,
        "cost": seg.cost,
        "distance_metadata": meta[method],
    }
    if y is not None:
        truth = Segmentation.from_labels(window_labels(y, W))
        out["truth_starts"] = truth.starts
        out["error"] = segmentation_error(seg, truth)
    return out


def benchmark_mohmm(
    mean_lengths,
    methods=METHODS,
    n: int = 100,
    repetitions: int = 20,
    seed: int = 0,
    K: int = 4,
    Km: int = 2,
    train_config: TrainConfig | None = None,
    options: SSDOptions | None = None,
    kmeans_runs: int = 10,
    n_jobs: int = 1,
    progress=None,
) -> list[dict]:
    """Clustering error versus mean sequence length on mixture-of-HMMs data.

    Every method sees the same datasets. Returns one row per
    ``(mean_length, method)`` with the mean and standard deviation of the
    error (percent) over repetitions.
    """
    train_config = train_config or TrainConfig()
    methods = list(methods)
    rows = []
    for mu in mean_lengths:
        errors = {m: [] for m in methods}
        for r in range(repetitions):
            seeds = derive_seeds(seed, r)
            ds = generate_mohmm(MoHMMConfig(n, int(mu), seeds.data))
            cfg = replace(train_config, seed=seeds.train)
            mats, _ = compute_distances(ds, methods, K, Km, cfg, options, n_jobs=n_jobs)
            for m in methods:
                rec = cluster_and_score(mats[m], 2, ds.labels, seeds.cluster, kmeans_runs)
                errors[m].append(rec["error"])
            if progress is not None:
                progress(mu, r, {m: errors[m][-1] for m in methods})
        for m in methods:
            e = np.array(errors[m])
            rows.append({
                "mean_length": int(mu),
                "method": m,
                "mean_error": float(e.mean()),
                "std_error": float(e.std()),
                "repetitions": repetitions,
            })
    return rows


__all__ = [
    "METHODS",
    "RunSeeds",
    "benchmark_mohmm",
    "cluster_and_score",
    "compute_distances",
    "derive_seeds",
    "run_clustering",
    "run_segmentation",
]
