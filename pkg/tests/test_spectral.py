import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssdclust import spectral
from ssdclust.evaluation import clustering_accuracy
from ssdclust.spectral import Segmentation, SpectralError

from oracles import brute_force_segmentation, laplacian_spectrum


def blocks(sizes, across=10.0, within=0.0):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    D = np.where(labels[:, None] == labels[None, :], within, across).astype(float)
    np.fill_diagonal(D, 0)
    return D, labels


def test_gaussian_kernel_values():
    D = np.array([[0.0, math.sqrt(2) * 1.5, math.inf], [math.sqrt(2) * 1.5, 0, 1], [math.inf, 1, 0]])
    W = spectral.gaussian_kernel(D, 1.5)
    assert W[0, 0] == 1.0
    assert W[0, 1] == pytest.approx(math.exp(-1), abs=1e-15)
    assert W[0, 2] == 0.0
    with pytest.raises(SpectralError):
        spectral.gaussian_kernel(D, 0.0)


def test_laplacian_spectrum_matches_reference():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 2))
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    W = spectral.gaussian_kernel(D, 1.0)
    lam = np.linalg.eigvalsh(spectral.normalized_laplacian(W))
    np.testing.assert_allclose(lam, laplacian_spectrum(W), atol=1e-10)
    assert lam.min() == pytest.approx(0, abs=1e-8)
    assert lam.max() <= 2 + 1e-10


def test_eigengap_on_two_separated_groups():
    D, _ = blocks([3, 3])
    sel = spectral.eigengap_search(D, 2)
    # with self-loops each 3-clique has spectrum {0, 1, 1}
    assert sel.eigengap == pytest.approx(1.0, abs=1e-6)
    assert sel.eigenvalues[0] == pytest.approx(0, abs=1e-8)
    assert sel.eigenvalues[1] == pytest.approx(0, abs=1e-8)


def test_sigma_scales_with_distances():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 2))
    X[6:] += 4
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    s1 = spectral.select_sigma_eigengap(D, 2)
    s2 = spectral.select_sigma_eigengap(7.0 * D, 2)
    assert s2 == pytest.approx(7.0 * s1, rel=1e-12)


def test_minimal_instance_returns_grid_member():
    D = np.array([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]])
    s = spectral.select_sigma_eigengap(D, 2)
    assert np.any(np.isclose(spectral.sigma_grid(D), s, rtol=0, atol=0))
    with pytest.raises(SpectralError):
        spectral.select_sigma_eigengap(D[:2, :2], 2)


def test_disconnected_everywhere_is_an_error():
    D, _ = blocks([1, 1, 1, 1], across=np.inf)
    with pytest.raises(SpectralError):
        spectral.eigengap_search(D, 2)


def test_block_matrix_is_split_perfectly():
    D, labels = blocks([5, 7])
    a = spectral.spectral_cluster(D, 2, seed=0)
    assert clustering_accuracy(a.labels, labels).accuracy == 100.0
    assert a.sigma > 0


def test_cluster_equivariant_to_permutation():
    rng = np.random.default_rng(2)
    X = np.concatenate([rng.normal(0, 0.3, (10, 2)), rng.normal(3, 0.3, (10, 2)),
                        rng.normal((0, 4), 0.3, (10, 2))])
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    perm = rng.permutation(30)
    a = spectral.spectral_cluster(D, 3, seed=0).labels
    b = spectral.spectral_cluster(D[np.ix_(perm, perm)], 3, seed=0).labels
    assert clustering_accuracy(b, a[perm]).accuracy == 100.0


def test_cluster_invariant_to_scaling():
    rng = np.random.default_rng(3)
    X = np.concatenate([rng.normal(0, 1, (15, 2)), rng.normal(2.5, 1, (15, 2))])
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    a = spectral.spectral_cluster(D, 2, seed=4).labels
    b = spectral.spectral_cluster(3.5 * D, 2, seed=4).labels
    np.testing.assert_array_equal(a, b)


def test_cluster_preconditions():
    D, _ = blocks([2, 2])
    with pytest.raises(SpectralError):
        spectral.spectral_cluster(D, 1)
    with pytest.raises(SpectralError):
        spectral.spectral_cluster(D, 5)


def test_embedding_rows_unit_norm():
    D, _ = blocks([4, 4], across=3.0, within=0.5)
    E = spectral.spectral_embedding(spectral.gaussian_kernel(D, 1.0), 2)
    np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0)


def test_kmeans_each_point_own_cluster():
    X = np.random.default_rng(0).normal(size=(6, 2))
    km = spectral.kmeans(X, 6, runs=3, seed=0)
    assert sorted(km.labels) == list(range(6))
    assert km.distortion == 0


def test_kmeans_recovers_blobs():
    rng = np.random.default_rng(5)
    X = np.concatenate([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (25, 2))])
    truth = np.repeat([0, 1], [20, 25])
    km = spectral.kmeans(X, 2, seed=1)
    assert clustering_accuracy(km.labels, truth).accuracy == 100.0


def test_kmeans_duplicates_stay_together():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(12, 2))
    X = np.concatenate([X, X[:4]])
    labels = spectral.kmeans(X, 3, seed=0).labels
    np.testing.assert_array_equal(labels[:4], labels[12:])


def test_kmeans_deterministic():
    X = np.random.default_rng(7).normal(size=(30, 3))
    a, b = spectral.kmeans(X, 4, seed=9), spectral.kmeans(X, 4, seed=9)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_segment_piecewise_constant():
    X = np.repeat(np.array([[1.0, 0], [0, 1], [-1, 0]]), [4, 3, 5], axis=0)
    seg = spectral.segment_rows(X, 3)
    np.testing.assert_array_equal(seg.starts, [0, 4, 7])
    assert seg.cost == 0


def test_segment_single():
    seg = spectral.segment_rows(np.random.default_rng(0).normal(size=(5, 2)), 1)
    np.testing.assert_array_equal(seg.starts, [0])
    np.testing.assert_array_equal(seg.labels, 0)


def test_segment_matches_exhaustive_n8():
    X = np.random.default_rng(3).normal(size=(8, 2))
    seg = spectral.segment_rows(X, 2)
    cost, starts = brute_force_segmentation(X, 2)
    assert tuple(seg.starts) == starts
    assert seg.cost == pytest.approx(cost, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_segment_property(N, C, seed):
    C = min(C, N)
    X = np.random.default_rng(seed).normal(size=(N, 2))
    seg = spectral.segment_rows(X, C)
    cost, _ = brute_force_segmentation(X, C)
    assert seg.n_segments == C
    assert seg.cost == pytest.approx(cost, rel=1e-9, abs=1e-12)


def test_segmentation_type():
    s = Segmentation([0, 3, 5], 8)
    np.testing.assert_array_equal(s.labels, [0, 0, 0, 1, 1, 2, 2, 2])
    np.testing.assert_array_equal(s.change_points, [3, 5])
    back = Segmentation.from_labels(s.labels)
    np.testing.assert_array_equal(back.starts, s.starts)
    with pytest.raises(SpectralError):
        Segmentation([0, 3, 3], 8)
    with pytest.raises(SpectralError):
        Segmentation([1, 3], 8)


def test_spectral_segment_on_ordered_blocks():
    D, labels = blocks([6, 5, 7], across=5.0, within=0.3)
    seg = spectral.spectral_segment(D, 3)
    np.testing.assert_array_equal(seg.starts, [0, 6, 11])
    assert spectral.spectral_segment(D, 1).n_segments == 1
    with pytest.raises(SpectralError):
        spectral.spectral_segment(D[:2, :2], 3)
