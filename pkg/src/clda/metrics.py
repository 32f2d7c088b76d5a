"""Evaluation: held-out perplexity, representative word sets and topic matching."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .gibbs_lda import (
    LocalTopicSet,
    SamplerConfig,
    UnscorableDocumentError,
    fold_in,
    token_probabilities,
)

__all__ = [
    "ZeroProbabilityError",
    "WordSet",
    "MatchPair",
    "MatchReport",
    "HeldoutResult",
    "perplexity",
    "heldout_perplexity",
    "top_words",
    "dice",
    "jaccard",
    "greedy_match",
    "global_topic_mean",
]


class ZeroProbabilityError(ValueError):
    """A scored token has probability zero, typically from unsmoothed topics."""


def perplexity(doc_word_probs: Iterable[Sequence[float]]) -> float:
    """``exp(-sum_d sum_w log P(w|d) / sum_d N_d)``.

    ``doc_word_probs`` yields, per document, the model probability of each of
    its tokens.
    """
    log_sum = 0.0
    n_tokens = 0
    for d, probs in enumerate(doc_word_probs):
        probs = np.asarray(probs, dtype=np.float64)
        bad = np.flatnonzero(~(probs > 0))
        if bad.size:
            raise ZeroProbabilityError(
                f"document {d}, token {bad[0]}: P(w|d) = {probs[bad[0]]!r}")
        log_sum += math.fsum(np.log(probs))
        n_tokens += probs.size
    if n_tokens == 0:
        raise ValueError("perplexity needs at least one scorable token")
    return math.exp(-log_sum / n_tokens)


@dataclass(frozen=True)
class HeldoutResult:
    perplexity: float
    n_documents: int
    n_tokens: int
    n_oov_tokens: int
    n_unscorable: int


def heldout_perplexity(
    models: dict[str, LocalTopicSet] | LocalTopicSet,
    test: Corpus,
    config: SamplerConfig,
) -> HeldoutResult:
    """Fold every test document into its segment's model and score it.

    ``models`` maps segment keys to trained topic sets; a single
    :class:`LocalTopicSet` scores every document.  Tokens outside the model's
    vocabulary are dropped and counted; documents with nothing left are
    counted as unscorable and excluded.  Document ``i`` is folded in with
    seed ``(config.seed, i)``.
    """
    per_doc = []
    oov = unscorable = 0
    for i, doc in enumerate(test.documents):
        model = models if isinstance(models, LocalTopicSet) else models[doc.segment_key]
        tokens, dropped = model.localize(doc.tokens)
        oov += dropped
        try:
            theta = fold_in(model.topics, tokens, config, seed=(config.seed, i))
        except UnscorableDocumentError:
            unscorable += 1
            continue
        per_doc.append(token_probabilities(model.topics, theta, tokens))
    n_tokens = sum(p.size for p in per_doc)
    value = perplexity(per_doc) if n_tokens else float("nan")
    return HeldoutResult(value, len(per_doc), n_tokens, oov, unscorable)


@dataclass(frozen=True)
class WordSet:
    words: frozenset[int]
    source: tuple[Hashable, int] | None = None
    n: int = 20

    def __len__(self) -> int:
        return len(self.words)


def top_words(topic, n: int = 20, source=None) -> WordSet:
    """The ``n`` most probable word ids; boundary ties go to the lower id.

    Zero-probability words are never included.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = np.asarray(topic, dtype=np.float64)
    order = np.lexsort((np.arange(p.size), -p))
    chosen = [int(w) for w in order[:n] if p[w] > 0]
    return WordSet(frozenset(chosen), source, n)


def _sets(a, b) -> tuple[frozenset, frozenset]:
    a = a.words if isinstance(a, WordSet) else frozenset(a)
    b = b.words if isinstance(b, WordSet) else frozenset(b)
    if not a and not b:
        raise ValueError("similarity undefined for two empty sets")
    return a, b


def dice(A, B) -> float:
    """Sørensen-Dice coefficient ``2|A & B| / (|A| + |B|)``."""
    a, b = _sets(A, B)
    return 2 * len(a & b) / (len(a) + len(b))


def jaccard(A, B) -> float:
    """Jaccard index ``|A & B| / |A | B|``."""
    a, b = _sets(A, B)
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class MatchPair:
    a: int
    b: int
    jaccard: float
    dice: float


@dataclass(frozen=True)
class MatchReport:
    pairs: tuple[MatchPair, ...]

    def mean_jaccard(self) -> float:
        return float(np.mean([p.jaccard for p in self.pairs]))

    def mean_dice(self) -> float:
        return float(np.mean([p.dice for p in self.pairs]))

    def to_csv(self) -> str:
        lines = ["rank,idA,idB,jaccard,dice"]
        for r, p in enumerate(self.pairs):
            lines.append(f"{r},{p.a},{p.b},{p.jaccard:.6f},{p.dice:.6f}")
        return "\n".join(lines) + "\n"


def greedy_match(setsA: Sequence, setsB: Sequence) -> MatchReport:
    """One-to-one matching that repeatedly takes the most similar free pair.

    Similarity is Jaccard; ties go to the lowest index in ``setsA``, then in
    ``setsB``.  Pairs are reported from best to worst (stable for ties).
    """
    if not setsA or not setsB:
        raise ValueError("greedy_match needs two nonempty lists")
    J = np.array([[jaccard(a, b) for b in setsB] for a in setsA])
    free = np.ones_like(J, dtype=bool)
    pairs = []
    for _ in range(min(len(setsA), len(setsB))):
        masked = np.where(free, J, -np.inf)
        i, j = np.unravel_index(np.argmax(masked), J.shape)
        pairs.append(MatchPair(int(i), int(j), float(J[i, j]), dice(setsA[i], setsB[j])))
        free[i, :] = False
        free[:, j] = False
    pairs.sort(key=lambda p: -p.jaccard)
    return MatchReport(tuple(pairs))


def global_topic_mean(topics) -> np.ndarray:
    """Elementwise mean of topic vectors, rescaled to sum to one."""
    T = np.atleast_2d(np.asarray(topics, dtype=np.float64))
    if T.shape[0] == 0:
        raise ValueError("need at least one topic")
    mean = T.mean(axis=0)
    return mean / mean.sum()
