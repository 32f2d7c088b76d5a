"""Corpus ingestion: tokenization, vocabulary pruning, encoding and splitting.

Documents are kept as integer token-id arrays over one shared
:class:`Vocabulary`.  A :class:`Corpus` knows its canonical segment order,
and :func:`split_corpus` cuts it into one sub-corpus per segment key.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "EmptyVocabularyError",
    "Vocabulary",
    "Document",
    "Corpus",
    "tokenize",
    "build_vocabulary",
    "encode",
    "decode",
    "split_corpus",
    "holdout_split",
    "order_segments",
    "read_text_records",
    "write_text_records",
    "read_bow_records",
    "read_vocabulary",
    "write_vocabulary",
    "read_encoded",
    "write_encoded",
]

_TOKEN_RE = re.compile(r"[^\W_]+")


class EmptyVocabularyError(ValueError):
    """Raised when pruning removes every word."""


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    index: dict[str, int] = field(repr=False, compare=False)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        words = tuple(words)
        index = {w: i for i, w in enumerate(words)}
        if len(index) != len(words):
            raise ValueError("duplicate words in vocabulary")
        return cls(words, index)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index


@dataclass(frozen=True)
class Document:
    doc_id: str
    segment_key: str
    tokens: np.ndarray

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    """Encoded documents plus the canonical segment order.

    ``n_dropped`` counts documents that were emptied by vocabulary pruning
    during :func:`encode`.
    """

    vocabulary: Vocabulary
    documents: tuple[Document, ...]
    segments: tuple[str, ...]
    n_dropped: int = 0

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def num_tokens(self) -> int:
        return int(sum(len(d) for d in self.documents))

    @property
    def local_vocab(self) -> np.ndarray:
        """Sorted ids of the words that actually occur in this corpus."""
        if not self.documents:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([d.tokens for d in self.documents]))

    def lengths(self) -> np.ndarray:
        return np.array([len(d) for d in self.documents], dtype=np.int64)


def tokenize(raw_text: str) -> list[str]:
    """Lowercase ``raw_text`` and split on runs of non-alphanumeric characters.

    >>> tokenize("TCP/IP   networks")
    ['tcp', 'ip', 'networks']
    """
    return _TOKEN_RE.findall(raw_text.lower())


def build_vocabulary(
    docs: Sequence[Sequence[str]],
    stopwords: Iterable[str] = (),
    min_count: int = 1,
    min_doc_fraction: float = 0.0,
) -> Vocabulary:
    """Build a lexicographically ordered vocabulary from tokenized documents.

    A word is kept when it is not a stopword, occurs at least ``min_count``
    times overall and appears in at least ``ceil(min_doc_fraction * len(docs))``
    distinct documents.
    """
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    if not 0.0 <= min_doc_fraction <= 1.0:
        raise ValueError("min_doc_fraction must lie in [0, 1]")
    stop = set(stopwords)
    counts: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for doc in docs:
        counts.update(doc)
        doc_freq.update(set(doc))
    min_docs = math.ceil(min_doc_fraction * len(docs))
    kept = sorted(
        w for w, c in counts.items()
        if w not in stop and c >= min_count and doc_freq[w] >= min_docs
    )
    if not kept:
        raise EmptyVocabularyError("empty vocabulary: every word was filtered out")
    return Vocabulary.from_words(kept)


def order_segments(keys: Iterable[str], numeric: bool = False) -> tuple[str, ...]:
    """Canonical segment order: lexicographic, or by numeric value if asked."""
    distinct = set(keys)
    if numeric:
        return tuple(sorted(distinct, key=lambda k: (float(k), k)))
    return tuple(sorted(distinct))


def encode(
    docs: Sequence[Sequence[str]],
    vocabulary: Vocabulary,
    doc_ids: Sequence[str] | None = None,
    segment_keys: Sequence[str] | None = None,
    numeric_segments: bool = False,
) -> Corpus:
    """Map tokenized documents to word ids.

    Out-of-vocabulary tokens are dropped silently; documents left with no
    tokens are excluded and counted in ``Corpus.n_dropped``.
    """
    if len(vocabulary) == 0:
        raise EmptyVocabularyError("cannot encode against an empty vocabulary")
    n = len(docs)
    doc_ids = [str(i) for i in range(n)] if doc_ids is None else list(doc_ids)
    segment_keys = ["0"] * n if segment_keys is None else [str(k) for k in segment_keys]
    if len(doc_ids) != n or len(segment_keys) != n:
        raise ValueError("doc_ids and segment_keys must match docs in length")

    index = vocabulary.index
    documents = []
    dropped = 0
    for doc_id, key, tokens in zip(doc_ids, segment_keys, docs):
        ids = [index[t] for t in tokens if t in index]
        if not ids:
            dropped += 1
            continue
        documents.append(Document(doc_id, key, np.asarray(ids, dtype=np.int64)))
    segments = order_segments((d.segment_key for d in documents), numeric_segments)
    return Corpus(vocabulary, tuple(documents), segments, dropped)


def decode(document: Document, vocabulary: Vocabulary) -> list[str]:
    return [vocabulary.words[i] for i in document.tokens]


def split_corpus(corpus: Corpus) -> list[Corpus]:
    """One sub-corpus per segment key, in canonical order.

    Every sub-corpus shares the parent's :class:`Vocabulary`; its
    ``local_vocab`` gives the word ids that occur in it.
    """
    by_key: dict[str, list[Document]] = {k: [] for k in corpus.segments}
    for doc in corpus.documents:
        by_key[doc.segment_key].append(doc)
    return [
        Corpus(corpus.vocabulary, tuple(by_key[k]), (k,)) for k in corpus.segments
    ]


def holdout_split(
    corpus: Corpus, holdout_fraction: float, seed: int
) -> tuple[Corpus, Corpus]:
    """Stratified random train/test split.

    Each segment contributes ``round(holdout_fraction * n_s)`` documents to the
    test side (halves round up).  Document order is preserved on both sides.
    """
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    test_mask = np.zeros(len(corpus), dtype=bool)
    positions: dict[str, list[int]] = {k: [] for k in corpus.segments}
    for i, doc in enumerate(corpus.documents):
        positions[doc.segment_key].append(i)
    for key in corpus.segments:
        members = np.asarray(positions[key], dtype=np.int64)
        n_test = int(math.floor(holdout_fraction * len(members) + 0.5))
        if n_test:
            test_mask[rng.permutation(members)[:n_test]] = True
    train = tuple(d for d, t in zip(corpus.documents, test_mask) if not t)
    test = tuple(d for d, t in zip(corpus.documents, test_mask) if t)
    return (
        Corpus(corpus.vocabulary, train, corpus.segments, corpus.n_dropped),
        Corpus(corpus.vocabulary, test, corpus.segments),
    )


# --- file formats -----------------------------------------------------------

def read_text_records(path: str | Path) -> list[tuple[str, str, str]]:
    """Read ``doc_id<TAB>segment_key<TAB>raw_text`` lines."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 2)
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected doc_id<TAB>segment_key<TAB>text")
            doc_id, key = parts[0], parts[1]
            records.append((doc_id, key, parts[2] if len(parts) == 3 else ""))
    return records


def read_bow_records(path: str | Path) -> list[tuple[str, str, list[int]]]:
    """Read ``doc_id<TAB>segment_key<TAB>wordid:count ...`` lines.

    Counts are expanded into repeated token ids in ascending word-id order.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected doc_id<TAB>segment_key<TAB>bow")
            pairs = []
            for item in (parts[2].split() if len(parts) > 2 else []):
                wid, _, cnt = item.partition(":")
                pairs.append((int(wid), int(cnt) if cnt else 1))
            tokens = [w for w, c in sorted(pairs) for _ in range(c)]
            records.append((parts[0], parts[1], tokens))
    return records


def read_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        return Vocabulary.from_words(line.rstrip("\n") for line in fh)


def write_text_records(corpus: Corpus, path: str | Path) -> None:
    """Inverse of :func:`read_text_records` for an encoded corpus (words joined by spaces)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            fh.write(f"{doc.doc_id}\t{doc.segment_key}\t{' '.join(decode(doc, corpus.vocabulary))}\n")


def write_vocabulary(vocabulary: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word in vocabulary.words:
            fh.write(word + "\n")


def write_encoded(corpus: Corpus, path: str | Path) -> None:
    """Write ``doc_id<TAB>segment_key<TAB>id id id ...`` preserving token order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            fh.write(f"{doc.doc_id}\t{doc.segment_key}\t{' '.join(map(str, doc.tokens))}\n")


def read_encoded(
    path: str | Path,
    vocabulary: Vocabulary,
    segments: Sequence[str] | None = None,
    numeric_segments: bool = False,
) -> Corpus:
    docs = []
    W = len(vocabulary)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            doc_id, key, ids = line.split("\t")
            tokens = np.array(ids.split(), dtype=np.int64)
            if tokens.size and (tokens.min() < 0 or tokens.max() >= W):
                raise ValueError(f"{path}:{lineno}: word id outside vocabulary")
            docs.append(Document(doc_id, key, tokens))
    if segments is None:
        segments = order_segments((d.segment_key for d in docs), numeric_segments)
    return Corpus(vocabulary, tuple(docs), tuple(segments))
