"""Acceptance gate.

One test per criterion; the terminal summary lists a PASS/FAIL line for
each. The MoHMM and control-chart checks train many models and take a few
minutes on one core.

Set ``SSDCLUST_CONTROL_CHART`` to the public synthetic control chart file
(``synthetic_control.data`` or the sequence CSV) to run the corpus check;
without it a generated surrogate is used.
"""
import math
import os
import time

import numpy as np
import pytest

from ssdclust import baselines, hmm, spectral, ssd
from ssdclust.data import MoHMMConfig, generate_control_charts, generate_mohmm
from ssdclust.data import load_control_chart
from ssdclust.evaluation import clustering_accuracy
from ssdclust.experiments import benchmark_mohmm, cluster_and_score, compute_distances
from ssdclust.experiments import derive_seeds
from ssdclust.hmm import GaussianHMM, TrainConfig

from oracles import best_permutation_accuracy, brute_force_segmentation
from oracles import path_log_likelihood, path_transition_counts, random_model

CORPUS_ENV = "SSDCLUST_CONTROL_CHART"
SURROGATE_REPS = 5


def _detail(record_property, text):
    record_property("detail", text)


@pytest.mark.acceptance("oracle equivalence (200 instances, 1e-8 abs, < 60 s)")
def test_oracle_equivalence(record_property):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst_ll = worst_a = 0.0
    for _ in range(200):
        K, T, d = rng.integers(1, 4), rng.integers(1, 9), rng.integers(1, 3)
        pi, A, mu, var = random_model(rng, K, d)
        X = rng.normal(0, 2, size=(T, d))
        m = GaussianHMM(pi, A, mu, var)
        worst_ll = max(worst_ll, abs(hmm.log_likelihood(X, m)
                                     - path_log_likelihood(X, pi, A, mu, var)))
        counts = path_transition_counts(X, pi, A, mu, var)
        occ = counts.sum(axis=1, keepdims=True)
        expected = np.where(occ >= 1e-8, counts / np.maximum(occ, 1e-300), A)
        worst_a = max(worst_a, np.abs(ssd.induced_transition(X, m) - expected).max())
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"max |dlogL|={worst_ll:.1e}, max |dA|={worst_a:.1e}, "
                             f"{elapsed:.1f}s")
    assert worst_ll <= 1e-8 and worst_a <= 1e-8
    assert elapsed < 60


@pytest.mark.acceptance("per-slice likelihood consistency (100 pairs, 1e-8 rel)")
def test_slice_consistency(record_property):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        K, T, d = rng.integers(1, 6), rng.integers(1, 60), rng.integers(1, 4)
        pi, A, mu, var = random_model(rng, K, d)
        X = rng.normal(0, 3, size=(T, d))
        fb = hmm.forward_backward(X, GaussianHMM(pi, A, mu, var))
        ref = hmm.log_likelihood(X, GaussianHMM(pi, A, mu, var))
        slices = fb.slice_log_likelihoods()
        worst = max(worst, float(np.max(np.abs(slices - ref) / abs(ref))))
    _detail(record_property, f"max rel dev={worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.acceptance("EM monotonicity (50 datasets, slack 1e-6)")
def test_em_monotonicity(record_property):
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(50):
        K_true, d = rng.integers(1, 4), rng.integers(1, 3)
        truth = GaussianHMM(*random_model(rng, K_true, d))
        seqs = [hmm.sample(truth, int(rng.integers(5, 60)), seed=int(rng.integers(2**31)))
                for _ in range(int(rng.integers(1, 6)))]
        res = hmm.fit(seqs, int(rng.integers(1, 5)), TrainConfig(restarts=1, seed=i))
        worst = max(worst, float(-np.min(np.diff(res.trace), initial=0.0)))
    _detail(record_property, f"largest decrease={worst:.1e}")
    assert worst <= 1e-6


@pytest.mark.acceptance("hand values (affinity, SSD pair, BP, YY, KL)")
def test_hand_values(record_property):
    p, q = [0.6, 0.4], [0.4, 0.6]
    A1 = np.array([p, q])
    L = np.array([[-1.0, -2.0], [-4.0, -3.0]])
    got = {
        "affinity": ssd.bhattacharyya_affinity(p, q),
        "ssd": ssd.ssd_pair_distance(A1, A1[::-1]),
        "bp": baselines.bp_distance(L)[0, 1],
        "yy": baselines.yy_distance(L)[0, 1],
        "kl": baselines.kl_distance(np.log([[0.5, 0.9], [0.5, 0.1]]))[0, 1],
    }
    _detail(record_property, ", ".join(f"{k}={v:.6f}" for k, v in got.items()))
    assert got["affinity"] == pytest.approx(0.979796, abs=1e-6)
    assert got["ssd"] == pytest.approx(0.020411, abs=1e-6)
    assert got["bp"] == pytest.approx(2 / 3, abs=1e-9)
    assert got["yy"] == pytest.approx(2.0, abs=1e-9)
    # 0.5 * (KL(p||q) + KL(q||p)) for p=(.5,.5), q=(.9,.1)
    kl = 0.5 * (0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
                + 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5))
    assert got["kl"] == pytest.approx(kl, abs=1e-9)
    assert kl == pytest.approx(0.439445, abs=1e-6)


@pytest.fixture(scope="module")
def mohmm_rows():
    t0 = time.perf_counter()
    rows = benchmark_mohmm([25, 50], ["ssd", "sym", "bp", "yy"], n=100, repetitions=20)
    rows += benchmark_mohmm([400], ["ssd"], n=100, repetitions=20)
    return {(r["mean_length"], r["method"]): r["mean_error"] for r in rows}, \
        time.perf_counter() - t0


@pytest.mark.acceptance("MoHMM (a): SSD mean error at mean length 400 <= 5%")
def test_mohmm_long_sequences(mohmm_rows, record_property):
    err, elapsed = mohmm_rows
    _detail(record_property, f"ssd={err[(400, 'ssd')]:.2f}%, benchmark {elapsed:.0f}s")
    assert err[(400, "ssd")] <= 5.0


@pytest.mark.acceptance("MoHMM (b): SSD below SYM/BP/YY at mean lengths 25 and 50")
def test_mohmm_short_sequences(mohmm_rows, record_property):
    err, _ = mohmm_rows
    _detail(record_property, "; ".join(
        f"{mu}: " + " ".join(f"{m}={err[(mu, m)]:.1f}" for m in ("ssd", "sym", "bp", "yy"))
        for mu in (25, 50)))
    for mu in (25, 50):
        for m in ("sym", "bp", "yy"):
            assert err[(mu, "ssd")] < err[(mu, m)]


@pytest.mark.acceptance("scalability counters at N=50 (50 FB passes, 2500 likelihoods)")
def test_scalability_counters(record_property):
    ds = generate_mohmm(MoHMMConfig(50, 25, seed=0))
    cfg = TrainConfig(seed=1)
    fb0 = hmm.counters["forward_backward"]
    res = ssd.ssd_distances(ds.sequences, 4, cfg)
    fb = hmm.counters["forward_backward"] - fb0
    ll0 = hmm.counters["log_likelihood"]
    fitted = baselines.fit_baselines(ds.sequences, 2, cfg)
    for m in ("sym", "bp", "yy"):
        fitted.distances(m)
    ll = hmm.counters["log_likelihood"] - ll0
    _detail(record_property, f"fb={fb} (reported {res.fb_count}), likelihoods={ll} "
                             f"(reported {fitted.likelihood_count})")
    assert fb == res.fb_count == 50
    assert ll == fitted.likelihood_count == 2500


def _control_chart_corpus():
    path = os.environ.get(CORPUS_ENV)
    return load_control_chart(path) if path else None


@pytest.mark.acceptance("control chart (corpus: K=20 accuracy >= 88%; "
                        "otherwise surrogate: SSD >= baselines at Km=2)")
def test_control_chart(record_property):
    corpus = _control_chart_corpus()
    if corpus is not None:
        accs = []
        for r in range(10):
            seeds = derive_seeds(0, r)
            mats, _ = compute_distances(corpus, ["ssd"], 20, 2, TrainConfig(seed=seeds.train))
            accs.append(cluster_and_score(mats["ssd"], 6, corpus.labels,
                                          seeds.cluster)["accuracy"])
        mean = float(np.mean(accs))
        _detail(record_property, f"corpus, 10 reps: ssd={mean:.2f}% (+-{np.std(accs):.2f})")
        assert mean >= 88.0
        return
    methods = ["sym", "bp", "yy", "kl"]
    accs = {m: [] for m in ["ssd"] + methods}
    for r in range(SURROGATE_REPS):
        seeds = derive_seeds(0, r)
        ds = generate_control_charts(30, seed=seeds.data)
        cfg = TrainConfig(seed=seeds.train)
        mats, _ = compute_distances(ds, ["ssd"] + methods, 20, 2, cfg)
        for m, D in mats.items():
            accs[m].append(cluster_and_score(D, 6, ds.labels, seeds.cluster)["accuracy"])
    mean = {m: float(np.mean(v)) for m, v in accs.items()}
    _detail(record_property, f"surrogate, {SURROGATE_REPS} reps: "
            + " ".join(f"{m}={v:.1f}" for m, v in mean.items()))
    for m in methods:
        assert mean["ssd"] >= mean[m]


@pytest.mark.acceptance("segmentation DP optimality (100 instances, N<=12, C<=4)")
def test_dp_optimality(record_property):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 13))
        C = int(rng.integers(1, min(4, N) + 1))
        X = rng.normal(size=(N, int(rng.integers(1, 4))))
        seg = spectral.segment_rows(X, C)
        cost, starts = brute_force_segmentation(X, C)
        assert tuple(int(s) for s in seg.starts) == starts
        worst = max(worst, abs(seg.cost - cost) / max(cost, 1e-300))
    _detail(record_property, f"boundaries identical, max rel cost dev={worst:.1e}")
    assert worst <= 1e-9


@pytest.mark.acceptance("accuracy metric equals brute force (100 vectors, C<=6)")
def test_accuracy_metric(record_property):
    rng = np.random.default_rng(5)
    for _ in range(100):
        C = int(rng.integers(1, 7))
        n = int(rng.integers(1, 40))
        truth = rng.integers(0, C, size=n)
        pred = rng.integers(0, C, size=n)
        assert clustering_accuracy(pred, truth).accuracy == best_permutation_accuracy(pred, truth)
    _detail(record_property, "100/100 exact")
