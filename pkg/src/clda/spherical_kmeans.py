"""Spherical k-means over unit-norm topic vectors.

Rows and centroids live on the unit sphere and points are assigned by cosine
distance ``1 - a.b / (|a||b|)``.  Centroids are member means rescaled to unit
length.  The objective is the sum of cosine distances from each row to its
centroid, which is half the squared Euclidean error on the sphere; Lloyd
iterations never increase it.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .merge import TopicMatrix

__all__ = [
    "Clustering",
    "cosine_distance",
    "clustering_objective",
    "assign",
    "initial_clustering",
    "lloyd_step",
    "kmeans",
    "multi_restart",
    "distinct_row_indices",
    "write_assignments",
    "read_assignments",
]

logger = logging.getLogger(__name__)

INIT_MODES = ("random-topics", "provided", "exhaustive")


@dataclass(frozen=True)
class Clustering:
    """Global topics (``centroids``) and the cluster of every pooled row.

    ``history`` holds the objective before the first Lloyd step followed by
    the objective after each step.  ``provenance`` is copied from the
    :class:`TopicMatrix` when one was clustered.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    objective: float
    restarts_run: int = 1
    n_iter: int = 0
    history: tuple[float, ...] = ()
    provenance: tuple[tuple[str, int], ...] | None = field(default=None, repr=False)

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == g)

    def cluster_map(self) -> dict[tuple[str, int], int]:
        """``(segment_key, local_index) -> cluster id``."""
        if self.provenance is None:
            raise ValueError("clustering carries no provenance")
        return {p: int(g) for p, g in zip(self.provenance, self.assignment)}


def cosine_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine distance undefined for zero-norm vectors")
    return float(1.0 - np.dot(a, b) / (na * nb))


def _rows(matrix) -> tuple[np.ndarray, tuple | None]:
    if isinstance(matrix, TopicMatrix):
        return matrix.rows, matrix.provenance
    return np.asarray(matrix, dtype=np.float64), None


def _unit(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm centroid")
    return v / norms


def _distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.maximum(1.0 - X @ C.T, 0.0)


def assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per row; ties go to the lowest cluster id."""
    return np.argmin(_distances(X, centroids), axis=1)


def clustering_objective(X: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    d = 1.0 - np.einsum("ij,ij->i", X, centroids[assignment])
    return float(np.maximum(d, 0.0).sum())


def initial_clustering(matrix, init_centroids) -> Clustering:
    """Wrap starting centroids as a clustering with nearest-centroid assignment."""
    X, prov = _rows(matrix)
    C = _unit(np.asarray(init_centroids, dtype=np.float64))
    a = assign(X, C)
    obj = clustering_objective(X, C, a)
    return Clustering(C, a, obj, history=(obj,), provenance=prov)


def lloyd_step(matrix, clustering: Clustering) -> Clustering:
    """Assign rows to the nearest centroid, then move centroids to member means.

    An empty cluster is re-seeded with the worst-fit row, meaning the row
    farthest from its own (updated) centroid.  Several empty clusters take
    rows in decreasing order of that distance.
    """
    X, prov = _rows(matrix)
    C_old = clustering.centroids
    K = C_old.shape[0]
    a = assign(X, C_old)
    sums = np.zeros_like(C_old)
    np.add.at(sums, a, X)
    counts = np.bincount(a, minlength=K)
    C = C_old.copy()
    nonempty = counts > 0
    C[nonempty] = _unit(sums[nonempty])

    empty = np.flatnonzero(~nonempty)
    if empty.size:
        d = 1.0 - np.einsum("ij,ij->i", X, C[a])
        order = np.lexsort((np.arange(len(X)), -d))
        for g, r in zip(empty, order):
            C[g] = X[r] / np.linalg.norm(X[r])
        logger.debug("re-seeded %d empty cluster(s)", empty.size)

    obj = clustering_objective(X, C, a)
    return replace(clustering, centroids=C, assignment=a, objective=obj,
                   n_iter=clustering.n_iter + 1, history=clustering.history + (obj,),
                   provenance=prov if prov is not None else clustering.provenance)


def kmeans(matrix, K: int, init_centroids, max_iters: int = 100, tol: float = 1e-9) -> Clustering:
    """Lloyd iterations from ``init_centroids`` until a fixed point.

    Stops when assignments no longer change, when the objective improves by
    less than ``tol``, or after ``max_iters`` steps.
    """
    X, _ = _rows(matrix)
    if not 1 <= K <= X.shape[0]:
        raise ConfigurationError(f"K={K} outside [1, {X.shape[0]}]")
    init_centroids = np.asarray(init_centroids, dtype=np.float64)
    if init_centroids.shape != (K, X.shape[1]):
        raise ConfigurationError(
            f"init_centroids has shape {init_centroids.shape}, expected {(K, X.shape[1])}")
    current = initial_clustering(matrix, init_centroids)
    for it in range(max_iters):
        new = lloyd_step(matrix, current)
        same = it > 0 and np.array_equal(new.assignment, current.assignment)
        improvement = current.objective - new.objective
        current = new
        if same or improvement < tol:
            break
    return current


def distinct_row_indices(X: np.ndarray) -> np.ndarray:
    """Index of the first occurrence of every distinct row, ascending."""
    _, first = np.unique(X, axis=0, return_index=True)
    return np.sort(first)


def multi_restart(
    matrix,
    K: int,
    restarts: int = 10,
    seed: int = 0,
    init_mode: str = "random-topics",
    init_centroids=None,
    max_iters: int = 100,
    tol: float = 1e-9,
    workers: int | None = None,
) -> Clustering:
    """Run k-means from several starts and keep the lowest objective.

    ``init_mode`` selects the starting centroids:

    ``"random-topics"``
        ``K`` distinct rows drawn without replacement, one draw per restart.
    ``"provided"``
        ``init_centroids`` as given (e.g. topics of a full-corpus LDA run);
        forces a single restart.
    ``"exhaustive"``
        every ``K``-subset of distinct rows; only sensible for tiny inputs.

    Ties in the objective go to the earliest restart.
    """
    X, _ = _rows(matrix)
    if init_mode not in INIT_MODES:
        raise ConfigurationError(f"unknown init_mode {init_mode!r}")
    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")
    if init_mode == "provided":
        if init_centroids is None:
            raise ConfigurationError("init_mode 'provided' needs init_centroids")
        inits = [np.asarray(init_centroids, dtype=np.float64)]
    else:
        distinct = distinct_row_indices(X)
        if not 1 <= K <= len(distinct):
            raise ConfigurationError(f"K={K} exceeds the {len(distinct)} distinct rows")
        if init_mode == "exhaustive":
            inits = [X[list(c)] for c in itertools.combinations(distinct, K)]
        else:
            rng = np.random.default_rng(seed)
            inits = [X[rng.choice(distinct, size=K, replace=False)] for _ in range(restarts)]

    def run(init):
        return kmeans(matrix, K, init, max_iters=max_iters, tol=tol)

    if workers and workers > 1 and len(inits) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, inits))
    else:
        results = [run(init) for init in inits]
    best = min(range(len(results)), key=lambda i: (results[i].objective, i))
    logger.debug("best of %d restarts: #%d objective %.6g", len(results), best,
                 results[best].objective)
    return replace(results[best], restarts_run=len(results))


def write_assignments(clustering: Clustering, path: str | Path) -> None:
    """``segment_key<TAB>local_index<TAB>cluster_id`` per pooled row."""
    if clustering.provenance is None:
        raise ValueError("clustering carries no provenance")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (key, idx), g in zip(clustering.provenance, clustering.assignment):
            fh.write(f"{key}\t{idx}\t{int(g)}\n")


def read_assignments(path: str | Path) -> tuple[tuple[tuple[str, int], ...], np.ndarray]:
    prov, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            key, idx, g = line.rstrip("\n").split("\t")
            prov.append((key, int(idx)))
            labels.append(int(g))
    return tuple(prov), np.asarray(labels, dtype=np.int64)
