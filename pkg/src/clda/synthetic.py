"""Synthetic corpora sampled from the LDA generative process with known topics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, Vocabulary

__all__ = ["PlantedCorpus", "planted_corpus"]


@dataclass(frozen=True)
class PlantedCorpus:
    corpus: Corpus
    topics: np.ndarray
    presence: np.ndarray


def planted_corpus(
    num_topics: int = 6,
    num_segments: int = 8,
    num_docs: int = 2000,
    vocab_size: int = 500,
    doc_length: int = 100,
    alpha: float = 0.1,
    topic_concentration: float = 0.1,
    head_size: int = 10,
    head_mass: float = 0.7,
    head_concentration: float = 5.0,
    presence: np.ndarray | None = None,
    seed: int = 0,
) -> PlantedCorpus:
    """Forward-sample documents from planted topics.

    Each topic mixes a Dirichlet tail ``Dir(topic_concentration)`` over the
    whole vocabulary with a ``Dir(head_concentration)`` "head" over ``head_size`` signature
    words of its own (disjoint across topics), the head carrying
    ``head_mass`` of the probability.  The head gives every topic a
    well-defined set of top words; ``head_size=0`` yields plain Dirichlet
    topics.  Documents are
    spread evenly over segments ``"s00", "s01", ...``; each draws
    ``theta ~ Dir(alpha)`` over the topics marked present in its segment
    (``presence`` is a ``num_segments x num_topics`` boolean mask, default
    all present), a Poisson length with mean ``doc_length`` (at least 1),
    then a topic and a word per token.
    """
    rng = np.random.default_rng(seed)
    topics = rng.dirichlet(np.full(vocab_size, topic_concentration), size=num_topics)
    if head_size:
        if head_size * num_topics > vocab_size:
            raise ValueError("vocabulary too small for disjoint topic heads")
        heads = rng.permutation(vocab_size)[:head_size * num_topics].reshape(num_topics, head_size)
        topics *= 1.0 - head_mass
        for k in range(num_topics):
            topics[k, heads[k]] += head_mass * rng.dirichlet(np.full(head_size, head_concentration))
    if presence is None:
        presence = np.ones((num_segments, num_topics), dtype=bool)
    presence = np.asarray(presence, dtype=bool)
    if presence.shape != (num_segments, num_topics) or not presence.any(axis=1).all():
        raise ValueError("presence must be num_segments x num_topics with a topic per segment")

    width = max(2, len(str(num_segments - 1)))
    keys = [f"s{s:0{width}d}" for s in range(num_segments)]
    vocabulary = Vocabulary.from_words(f"w{i:04d}" for i in range(vocab_size))
    cum_topics = np.cumsum(topics, axis=1)
    docs = []
    for j in range(num_docs):
        s = j * num_segments // num_docs
        active = np.flatnonzero(presence[s])
        theta = np.zeros(num_topics)
        theta[active] = rng.dirichlet(np.full(active.size, alpha))
        n = max(1, int(rng.poisson(doc_length)))
        z = rng.choice(num_topics, size=n, p=theta)
        u = rng.random(n)
        words = np.empty(n, dtype=np.int64)
        for k in np.unique(z):
            at = z == k
            words[at] = np.searchsorted(cum_topics[k], u[at] * cum_topics[k, -1], side="right")
        words = np.minimum(words, vocab_size - 1)
        docs.append(Document(f"d{j:05d}", keys[s], words))
    return PlantedCorpus(Corpus(vocabulary, tuple(docs), tuple(keys)), topics, presence)
