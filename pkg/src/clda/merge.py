"""Pool local topics from all segments into one matrix over the global vocabulary."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gibbs_lda import LocalTopicSet

__all__ = [
    "CorruptTopicError",
    "TopicMatrix",
    "align_to_global",
    "smooth",
    "normalize",
    "merge_all",
    "write_merged",
    "read_merged",
]

Provenance = tuple[str, int]


class CorruptTopicError(ValueError):
    """A local topic refers to a word id outside the global vocabulary."""


@dataclass(frozen=True)
class TopicMatrix:
    """Rows are local topics; ``provenance[i]`` is ``(segment_key, local_index)``.

    ``discarded`` lists the provenance of rows dropped during normalization.
    """

    rows: np.ndarray
    provenance: tuple[Provenance, ...]
    discarded: tuple[Provenance, ...] = field(default=())

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def num_words(self) -> int:
        return self.rows.shape[1]

    def index_of(self, prov: Provenance) -> int:
        return self.provenance.index(prov)


def align_to_global(local: LocalTopicSet, num_words: int) -> np.ndarray:
    """Place each local topic into a length-``num_words`` vector.

    Words the segment never saw get an explicit zero; present entries are
    copied unchanged.
    """
    ids = np.asarray(local.local_vocab, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= num_words):
        raise CorruptTopicError(
            f"segment {local.segment_key!r} references word id {ids.max()} "
            f">= vocabulary size {num_words}"
        )
    out = np.zeros((local.num_topics, num_words), dtype=np.float64)
    out[:, ids] = local.topics
    return out


def smooth(rows: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    """Add ``epsilon`` to every entry. ``epsilon == 0`` returns ``rows`` as is."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return rows
    return rows + epsilon


def normalize(
    rows: np.ndarray,
    provenance: Sequence[Provenance] | None = None,
    norm: str = "l2",
) -> TopicMatrix:
    """Scale each row to unit norm, dropping all-zero rows with a warning.

    ``norm`` is ``"l2"`` (default) or ``"l1"``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if provenance is None:
        provenance = [("", i) for i in range(rows.shape[0])]
    if norm == "l2":
        norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    elif norm == "l1":
        norms = np.abs(rows).sum(axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    keep = norms > 0
    dropped = tuple(p for p, k in zip(provenance, keep) if not k)
    if dropped:
        warnings.warn(f"dropping {len(dropped)} all-zero topic(s): {list(dropped)}",
                      stacklevel=2)
    kept_prov = tuple(p for p, k in zip(provenance, keep) if k)
    return TopicMatrix(rows[keep] / norms[keep, None], kept_prov, dropped)


def _lift(local: LocalTopicSet, num_words: int, epsilon: float) -> np.ndarray:
    return smooth(align_to_global(local, num_words), epsilon)


def merge_all(
    locals_: Sequence[LocalTopicSet],
    num_words: int,
    epsilon: float = 0.0,
    norm: str = "l2",
    workers: int | None = None,
) -> TopicMatrix:
    """Align, smooth and normalize every segment's topics, then stack them.

    Rows follow the order of ``locals_`` and, within a segment, local topic
    index order.  Segments may hold different numbers of topics.
    """
    if not locals_:
        raise ValueError("merge_all needs at least one LocalTopicSet")
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(lambda lt: _lift(lt, num_words, epsilon), locals_))
    else:
        blocks = [_lift(lt, num_words, epsilon) for lt in locals_]
    provenance = [(lt.segment_key, i) for lt in locals_ for i in range(lt.num_topics)]
    return normalize(np.vstack(blocks), provenance, norm)


def write_merged(matrix: TopicMatrix, path: str | Path) -> None:
    """``rows W`` header, then ``segment_key<TAB>local_index<TAB>v0 v1 ...``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(matrix)} {matrix.num_words}\n")
        for (key, idx), row in zip(matrix.provenance, matrix.rows):
            fh.write(f"{key}\t{idx}\t{' '.join(f'{v:.9f}' for v in row)}\n")


def read_merged(path: str | Path) -> TopicMatrix:
    with open(path, encoding="utf-8") as fh:
        n, W = map(int, fh.readline().split())
        rows = np.zeros((n, W))
        prov = []
        for i in range(n):
            key, idx, values = fh.readline().rstrip("\n").split("\t")
            prov.append((key, int(idx)))
            rows[i] = np.array(values.split(), dtype=np.float64)
    return TopicMatrix(rows, tuple(prov))
