import math

import numpy as np
import pytest

from clda.exceptions import ConfigurationError
from clda.merge import TopicMatrix
from clda.spherical_kmeans import (
    Clustering,
    assign,
    cosine_distance,
    initial_clustering,
    kmeans,
    lloyd_step,
    multi_restart,
    read_assignments,
    write_assignments,
)
from oracles import brute_force_kmeans, partition_objective, random_unit_rows


@pytest.mark.parametrize("a, b, expected", [
    ((1, 0), (1, 0), 0.0),
    ((1, 0), (0, 1), 1.0),
    ((1, 0), (1, 1), 1 - 1 / math.sqrt(2)),
    ((2, 0), (5, 0), 0.0),
    ((1, 0), (-1, 0), 2.0),
])
def test_cosine_distance(a, b, expected):
    assert cosine_distance(a, b) == pytest.approx(expected, abs=1e-12)


def test_cosine_distance_value():
    assert cosine_distance((1, 0), (1, 1)) == pytest.approx(0.29289, abs=1e-5)


def test_cosine_distance_zero_vector():
    with pytest.raises(ValueError):
        cosine_distance((0, 0), (1, 0))


def test_lloyd_fixed_point():
    X = np.eye(3)
    c = initial_clustering(X, np.eye(3))
    step = lloyd_step(X, c)
    np.testing.assert_array_equal(step.centroids, np.eye(3))
    assert step.assignment.tolist() == [0, 1, 2]
    assert step.objective == 0.0


def test_lloyd_duplicates_share_cluster():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    out = kmeans(X, 2, X[[0, 2]])
    assert out.assignment.tolist() == [0, 0, 1]
    assert out.objective == pytest.approx(0.0, abs=1e-12)


def test_two_orthogonal_rows_one_cluster():
    X = np.eye(2)
    out = kmeans(X, 1, X[[0]])
    np.testing.assert_allclose(out.centroids, [[1 / math.sqrt(2)] * 2])
    assert out.objective == pytest.approx(2 * (1 - 1 / math.sqrt(2)))


def test_single_cluster_is_normalized_mean():
    rng = np.random.default_rng(0)
    X = random_unit_rows(rng, 12, 5)
    out = multi_restart(X, 1, restarts=3)
    mean = X.sum(axis=0)
    np.testing.assert_allclose(out.centroids[0], mean / np.linalg.norm(mean), atol=1e-12)
    assert not out.assignment.any()


def test_k_equals_n_is_singletons():
    rng = np.random.default_rng(1)
    X = random_unit_rows(rng, 6, 4)
    out = multi_restart(X, 6, restarts=2)
    assert sorted(out.assignment.tolist()) == list(range(6))
    assert out.objective == pytest.approx(0.0, abs=1e-12)


def test_k_too_large():
    with pytest.raises(ConfigurationError):
        multi_restart(np.eye(3), 4)
    with pytest.raises(ConfigurationError):
        multi_restart(np.array([[1.0, 0.0]] * 3), 2)


def test_unknown_init_mode():
    with pytest.raises(ConfigurationError):
        multi_restart(np.eye(3), 2, init_mode="kmeans++")


@pytest.mark.parametrize("seed", range(30))
def test_exhaustive_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    K = int(rng.integers(2, min(3, n - 1) + 1))
    X = random_unit_rows(rng, n, 4)
    best = brute_force_kmeans(X, K)
    out = multi_restart(X, K, init_mode="exhaustive")
    assert out.objective == pytest.approx(best, abs=1e-9)
    assert partition_objective(X, out.assignment) == pytest.approx(out.objective, abs=1e-9)


def test_single_restart_equals_plain_kmeans():
    rng = np.random.default_rng(2)
    X = random_unit_rows(rng, 20, 6)
    single = multi_restart(X, 3, restarts=1, seed=7)
    init = X[np.random.default_rng(7).choice(20, size=3, replace=False)]
    direct = kmeans(X, 3, init)
    np.testing.assert_array_equal(single.assignment, direct.assignment)
    assert single.objective == direct.objective


@pytest.mark.parametrize("seed", range(10))
def test_more_restarts_never_worse(seed):
    rng = np.random.default_rng(100 + seed)
    X = random_unit_rows(rng, 40, 8)
    one = multi_restart(X, 4, restarts=1, seed=seed)
    many = multi_restart(X, 4, restarts=10, seed=seed)
    assert many.objective <= one.objective + 1e-12
    assert many.restarts_run == 10


@pytest.mark.parametrize("seed", range(10))
def test_objective_monotone(seed):
    rng = np.random.default_rng(200 + seed)
    X = random_unit_rows(rng, 50, 6)
    init = X[rng.choice(50, size=5, replace=False)]
    out = kmeans(X, 5, init, tol=0.0)
    h = np.array(out.history)
    assert (np.diff(h) <= 1e-12).all()


@pytest.mark.parametrize("seed", range(10))
def test_converged_state_is_consistent(seed):
    rng = np.random.default_rng(300 + seed)
    X = random_unit_rows(rng, 40, 5)
    out = multi_restart(X, 4, restarts=3, seed=seed, tol=0.0)
    # every row sits at its nearest centroid
    np.testing.assert_array_equal(assign(X, out.centroids), out.assignment)
    # every centroid is the normalized mean of its members
    for g in range(4):
        members = X[out.members(g)]
        assert len(members)
        mean = members.sum(axis=0)
        np.testing.assert_allclose(out.centroids[g], mean / np.linalg.norm(mean), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out.centroids, axis=1), 1.0)


def test_empty_cluster_reseeded_with_worst_row():
    X = np.array([[1.0, 0.0], [0.96, 0.28], [0.0, 1.0]])
    # both starting centroids sit near row 0, the second never wins a row
    C = np.array([[1.0, 0.0], [1.0, 0.0]])
    step = lloyd_step(X, initial_clustering(X, C))
    assert np.bincount(step.assignment, minlength=2)[1] == 0
    np.testing.assert_allclose(step.centroids[1], [0.0, 1.0])
    final = kmeans(X, 2, C)
    assert final.assignment.tolist() == [0, 0, 1]


def test_restart_tie_goes_to_first():
    X = np.eye(4)
    out = multi_restart(X, 2, restarts=5, seed=0)
    first = kmeans(X, 2, X[np.random.default_rng(0).choice(4, size=2, replace=False)])
    np.testing.assert_array_equal(out.assignment, first.assignment)


def test_provided_init_single_run():
    X = np.eye(3)
    out = multi_restart(X, 3, restarts=10, init_mode="provided", init_centroids=np.eye(3))
    assert out.restarts_run == 1 and out.objective == 0.0
    with pytest.raises(ConfigurationError):
        multi_restart(X, 3, init_mode="provided")


def test_parallel_restarts_identical():
    rng = np.random.default_rng(4)
    X = random_unit_rows(rng, 60, 10)
    a = multi_restart(X, 5, restarts=8, seed=3, workers=1)
    b = multi_restart(X, 5, restarts=8, seed=3, workers=4)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    np.testing.assert_array_equal(a.centroids, b.centroids)


def test_seed_changes_are_deterministic():
    rng = np.random.default_rng(5)
    X = random_unit_rows(rng, 30, 5)
    a = multi_restart(X, 3, restarts=4, seed=11)
    b = multi_restart(X, 3, restarts=4, seed=11)
    np.testing.assert_array_equal(a.centroids, b.centroids)


def test_every_segment_can_host_any_topic():
    # two segments, each with two local topics; both land in the same cluster
    # when K=1, and with K=3 one global topic can be absent from a segment
    rows = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.99, 0.14, 0.0], [0.0, 0.0, 1.0]])
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    m = TopicMatrix(rows, (("a", 0), ("a", 1), ("b", 0), ("b", 1)))
    out = multi_restart(m, 3, init_mode="exhaustive")
    cmap = out.cluster_map()
    assert cmap[("a", 0)] == cmap[("b", 0)]
    segments_of = {g: {k for (k, _), gg in cmap.items() if gg == g} for g in range(3)}
    assert sorted(len(s) for s in segments_of.values()) == [1, 1, 2]


def test_cluster_map_requires_provenance():
    with pytest.raises(ValueError):
        Clustering(np.eye(2), np.array([0, 1]), 0.0).cluster_map()


def test_assignments_roundtrip(tmp_path):
    m = TopicMatrix(np.eye(3), (("x", 0), ("x", 1), ("y", 0)))
    out = multi_restart(m, 2, init_mode="exhaustive")
    write_assignments(out, tmp_path / "a.tsv")
    prov, labels = read_assignments(tmp_path / "a.tsv")
    assert prov == m.provenance
    np.testing.assert_array_equal(labels, out.assignment)
