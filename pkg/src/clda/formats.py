"""Topic and mixture text files.

A topic file holds one topic per line as ``topic_index<TAB>wordid:value ...``
with values written to 9 decimal places.  An optional leading comment line
``# vocab_size=W`` records the vocabulary size.  A topic index may repeat,
e.g. one line per time slice of the same dynamic topic.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = ["write_topics", "read_topics", "write_mixtures", "read_mixtures"]


def write_topics(
    path: str | Path,
    topics: np.ndarray,
    word_ids: Sequence[int] | None = None,
    vocab_size: int | None = None,
    skip_zeros: bool = False,
    raw_counts: bool = False,
) -> None:
    """Write topic rows; column ``c`` is labelled ``word_ids[c]`` (default ``c``).

    ``raw_counts`` writes integer counts instead of 9-decimal values.
    """
    topics = np.atleast_2d(np.asarray(topics))
    ids = np.arange(topics.shape[1]) if word_ids is None else np.asarray(word_ids)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if vocab_size is not None:
            fh.write(f"# vocab_size={vocab_size}\n")
        for k, row in enumerate(topics):
            cols = np.flatnonzero(row) if skip_zeros else range(len(row))
            if raw_counts:
                body = " ".join(f"{ids[c]}:{int(row[c])}" for c in cols)
            else:
                body = " ".join(f"{ids[c]}:{row[c]:.9f}" for c in cols)
            fh.write(f"{k}\t{body}\n")


def read_topics(path: str | Path, vocab_size: int | None = None) -> tuple[list[int], np.ndarray, int]:
    """Parse a topic file into ``(topic_indices, dense rows, vocab_size)``.

    The vocabulary size comes from ``vocab_size``, else the file header, else
    the largest word id plus one.
    """
    header_size = None
    indices, entries = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "vocab_size":
                    header_size = int(value)
                continue
            idx, _, body = line.partition("\t")
            pairs = [item.split(":") for item in body.split()]
            indices.append(int(idx))
            entries.append([(int(w), float(v)) for w, v in pairs])
    if vocab_size is not None and header_size is not None and vocab_size != header_size:
        raise ValueError(f"{path}: vocab_size {header_size} != expected {vocab_size}")
    max_id = max((w for row in entries for w, _ in row), default=-1)
    W = vocab_size or header_size or max_id + 1
    if max_id >= W:
        raise ValueError(f"{path}: word id {max_id} outside vocabulary of size {W}")
    dense = np.zeros((len(entries), W))
    for r, row in enumerate(entries):
        for w, v in row:
            dense[r, w] = v
    return indices, dense, W


def write_mixtures(path: str | Path, doc_ids: Sequence[str], mixtures: np.ndarray) -> None:
    """``doc_id<TAB>topic:prob ...`` per document."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, row in zip(doc_ids, mixtures):
            fh.write(f"{doc_id}\t{' '.join(f'{k}:{p:.9f}' for k, p in enumerate(row))}\n")


def read_mixtures(path: str | Path) -> tuple[list[str], np.ndarray]:
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc_id, body = line.rstrip("\n").split("\t")
            ids.append(doc_id)
            rows.append([float(item.split(":")[1]) for item in body.split()])
    return ids, np.asarray(rows)
