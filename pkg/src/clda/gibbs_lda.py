"""Collapsed Gibbs sampling for LDA on a single segment.

The sampler works over the segment's *local* vocabulary: word ids that occur
in the sub-corpus are re-indexed to ``0..|W_s|-1`` and the emitted topics are
indexed the same way, with :attr:`LocalTopicSet.local_vocab` mapping columns
back to global word ids.  Lifting topics into the global space is the job of
:mod:`clda.merge`.

Random numbers are drawn once per sweep as one uniform per token (in corpus
token order), so the serial and the sharded sampler consume identical
streams; with one shard they produce identical states.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .corpus import Corpus
from .exceptions import ConfigurationError

__all__ = [
    "SamplerConfig",
    "SamplerState",
    "LocalTopicSet",
    "UnscorableDocumentError",
    "init_random",
    "gibbs_sweep",
    "sharded_sweep",
    "conditional",
    "train",
    "train_sharded",
    "fold_in",
    "token_probabilities",
]

logger = logging.getLogger(__name__)


class UnscorableDocumentError(ValueError):
    """A held-out document has no tokens the model can score."""


@dataclass(frozen=True)
class SamplerConfig:
    """Hyperparameters of one LDA run.

    ``alpha`` defaults to ``50 / num_topics``.  ``foldin_iterations`` is the
    number of sweeps run per held-out document in :func:`fold_in`.
    """

    num_topics: int
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 0
    foldin_iterations: int = 20

    def __post_init__(self):
        if self.num_topics < 1:
            raise ConfigurationError(f"num_topics must be >= 1, got {self.num_topics}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 50.0 / self.num_topics)
        if not self.alpha > 0 or not self.beta > 0:
            raise ConfigurationError("alpha and beta must be positive")
        if self.iterations < 1 or self.foldin_iterations < 1:
            raise ConfigurationError("iteration counts must be >= 1")


@dataclass
class SamplerState:
    """Topic assignments and the count statistics they induce.

    Tokens are stored flat: ``words[t]`` is the local word id of token ``t``,
    ``doc_of[t]`` its document, and ``offsets[j]:offsets[j+1]`` the slice of
    document ``j``.  ``n_wk`` has shape ``(K, W)``.
    """

    words: np.ndarray
    doc_of: np.ndarray
    offsets: np.ndarray
    vocab_ids: np.ndarray
    z: np.ndarray
    n_wk: np.ndarray
    n_k: np.ndarray
    n_jk: np.ndarray
    rng: np.random.Generator = field(repr=False)

    @property
    def num_topics(self) -> int:
        return self.n_k.shape[0]

    @property
    def num_words(self) -> int:
        return self.n_wk.shape[1]

    @property
    def num_tokens(self) -> int:
        return self.words.shape[0]

    def doc_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def z_of(self, j: int) -> np.ndarray:
        return self.z[self.offsets[j]:self.offsets[j + 1]]

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if the counts disagree with ``z``."""
        K, W = self.n_wk.shape
        assert np.array_equal(self.n_wk.sum(axis=1), self.n_k), "sum_w n_wk != n_k"
        assert np.array_equal(self.n_jk.sum(axis=1), self.doc_lengths()), "sum_k n_jk != N_d"
        assert int(self.n_k.sum()) == self.num_tokens, "sum_k n_k != token count"
        assert self.n_wk.min(initial=0) >= 0 and self.n_jk.min(initial=0) >= 0
        expected = np.zeros((K, W), dtype=np.int64)
        np.add.at(expected, (self.z, self.words), 1)
        assert np.array_equal(expected, self.n_wk), "n_wk inconsistent with z"


@dataclass(frozen=True)
class LocalTopicSet:
    """Topics and document mixtures estimated on one segment.

    ``topics`` has shape ``(L, |W_s|)`` with columns indexed like
    ``local_vocab`` (sorted global word ids).  ``topic_counts`` keeps the raw
    ``n_wk`` counts for debugging output.
    """

    segment_key: str
    topics: np.ndarray
    local_vocab: np.ndarray
    doc_mixtures: np.ndarray
    doc_lengths: np.ndarray
    doc_ids: tuple[str, ...] = ()
    topic_counts: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def num_topics(self) -> int:
        return self.topics.shape[0]

    def localize(self, tokens: np.ndarray) -> tuple[np.ndarray, int]:
        """Map global token ids to topic columns, dropping unknown words.

        Returns the mapped tokens and the number of dropped tokens.
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        pos = np.searchsorted(self.local_vocab, tokens)
        pos = np.minimum(pos, len(self.local_vocab) - 1)
        known = self.local_vocab[pos] == tokens
        return pos[known], int((~known).sum())


# --- kernels ----------------------------------------------------------------

@njit(nogil=True, cache=True)
def _sample_tokens(order, words, doc_of, z, n_wk, n_k, n_jk, u, alpha, beta, wbeta):
    K = n_k.shape[0]
    cum = np.empty(K)
    for t in order:
        w = words[t]
        j = doc_of[t]
        k = z[t]
        n_wk[k, w] -= 1
        n_k[k] -= 1
        n_jk[j, k] -= 1
        total = 0.0
        for kk in range(K):
            total += (n_wk[kk, w] + beta) / (n_k[kk] + wbeta) * (n_jk[j, kk] + alpha)
            cum[kk] = total
        r = u[t] * total
        k = 0
        while k < K - 1 and cum[k] <= r:
            k += 1
        z[t] = k
        n_wk[k, w] += 1
        n_k[k] += 1
        n_jk[j, k] += 1


@njit(nogil=True, cache=True)
def _foldin_sweep(words, z, n_k, phi, u, alpha):
    K = n_k.shape[0]
    cum = np.empty(K)
    for t in range(words.shape[0]):
        w = words[t]
        n_k[z[t]] -= 1
        total = 0.0
        for kk in range(K):
            total += phi[kk, w] * (n_k[kk] + alpha)
            cum[kk] = total
        r = u[t] * total
        k = 0
        while k < K - 1 and cum[k] <= r:
            k += 1
        z[t] = k
        n_k[k] += 1


# --- training ---------------------------------------------------------------

def _flatten(documents: Sequence[np.ndarray]):
    lengths = np.array([len(d) for d in documents], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    flat = (np.concatenate(documents).astype(np.int64) if len(documents)
            else np.zeros(0, dtype=np.int64))
    doc_of = np.repeat(np.arange(len(documents), dtype=np.int64), lengths)
    return flat, doc_of, offsets


def init_random(sub_corpus: Corpus, config: SamplerConfig) -> SamplerState:
    """Assign every token a uniformly random topic and tally the counts."""
    if len(sub_corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    vocab_ids = sub_corpus.local_vocab
    flat, doc_of, offsets = _flatten([d.tokens for d in sub_corpus.documents])
    words = np.searchsorted(vocab_ids, flat)
    K, W, D = config.num_topics, len(vocab_ids), len(sub_corpus)

    rng = np.random.default_rng(config.seed)
    z = rng.integers(0, K, size=len(words), dtype=np.int64)
    n_wk = np.zeros((K, W), dtype=np.int64)
    np.add.at(n_wk, (z, words), 1)
    n_jk = np.zeros((D, K), dtype=np.int64)
    np.add.at(n_jk, (doc_of, z), 1)
    n_k = n_wk.sum(axis=1)
    return SamplerState(words, doc_of, offsets, vocab_ids, z, n_wk, n_k, n_jk, rng)


def conditional(state: SamplerState, config: SamplerConfig, token: int) -> np.ndarray:
    """Full conditional ``P(z_t = k | rest)`` of one token, normalized.

    Computed in numpy straight from the counts, independent of the kernel.
    """
    k_old, w, j = state.z[token], state.words[token], state.doc_of[token]
    n_w = state.n_wk[:, w].astype(float)
    n_k = state.n_k.astype(float)
    n_j = state.n_jk[j].astype(float)
    n_w[k_old] -= 1
    n_k[k_old] -= 1
    n_j[k_old] -= 1
    weights = (n_w + config.beta) / (n_k + state.num_words * config.beta) * (n_j + config.alpha)
    return weights / weights.sum()


def gibbs_sweep(state: SamplerState, config: SamplerConfig) -> SamplerState:
    """Resample every token once, in corpus order. Mutates ``state``."""
    u = state.rng.random(state.num_tokens)
    order = np.arange(state.num_tokens, dtype=np.int64)
    _sample_tokens(order, state.words, state.doc_of, state.z, state.n_wk, state.n_k,
                   state.n_jk, u, float(config.alpha), float(config.beta),
                   state.num_words * float(config.beta))
    return state


def _shard_orders(state: SamplerState, num_shards: int) -> list[np.ndarray]:
    D = len(state.offsets) - 1
    orders = []
    for s in range(num_shards):
        docs = range(s, D, num_shards)
        parts = [np.arange(state.offsets[j], state.offsets[j + 1], dtype=np.int64) for j in docs]
        orders.append(np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64))
    return orders


def sharded_sweep(
    state: SamplerState,
    config: SamplerConfig,
    num_shards: int,
    executor: ThreadPoolExecutor | None = None,
    orders: list[np.ndarray] | None = None,
) -> SamplerState:
    """One AD-LDA iteration over round-robin document shards.

    Each shard samples against its own copy of the topic-word counts taken at
    the start of the sweep; shard deltas are summed into the shared counts
    in shard order afterwards.  Document-topic rows and ``z`` entries are
    owned by exactly one shard, so shards write them directly.
    """
    if num_shards < 1:
        raise ConfigurationError("num_shards must be >= 1")
    if orders is None:
        orders = _shard_orders(state, num_shards)
    u = state.rng.random(state.num_tokens)
    snap_wk, snap_k = state.n_wk.copy(), state.n_k.copy()
    alpha, beta = float(config.alpha), float(config.beta)
    wbeta = state.num_words * beta

    def run(order):
        n_wk, n_k = snap_wk.copy(), snap_k.copy()
        _sample_tokens(order, state.words, state.doc_of, state.z, n_wk, n_k,
                       state.n_jk, u, alpha, beta, wbeta)
        return n_wk - snap_wk, n_k - snap_k

    results = list(executor.map(run, orders)) if executor else [run(o) for o in orders]
    for d_wk, d_k in results:
        state.n_wk += d_wk
        state.n_k += d_k
    return state


def _estimate(state: SamplerState, config: SamplerConfig, segment_key: str,
              doc_ids: tuple[str, ...]) -> LocalTopicSet:
    K, W = state.n_wk.shape
    beta, alpha = config.beta, config.alpha
    phi = (state.n_wk + beta) / (state.n_k + W * beta)[:, None]
    lengths = state.doc_lengths()
    theta = (state.n_jk + alpha) / (lengths + K * alpha)[:, None]
    return LocalTopicSet(segment_key, phi, state.vocab_ids.copy(), theta, lengths,
                         doc_ids, state.n_wk.copy())


def train(
    sub_corpus: Corpus,
    config: SamplerConfig,
    segment_key: str | None = None,
    callback: Callable[[int, SamplerState], None] | None = None,
) -> LocalTopicSet:
    """Fit LDA by ``config.iterations`` collapsed Gibbs sweeps.

    Parameters
    ----------
    sub_corpus : Corpus
        Documents of one segment.
    config : SamplerConfig
    segment_key : str, optional
        Label stored on the result; defaults to the corpus' single segment.
    callback : callable, optional
        Called as ``callback(iteration, state)`` after every sweep.

    Returns
    -------
    LocalTopicSet
        Point estimates from the final sweep's counts.
    """
    state = init_random(sub_corpus, config)
    for it in range(config.iterations):
        gibbs_sweep(state, config)
        if callback is not None:
            callback(it, state)
    key = segment_key if segment_key is not None else _default_key(sub_corpus)
    return _estimate(state, config, key, tuple(d.doc_id for d in sub_corpus.documents))


def train_sharded(
    sub_corpus: Corpus,
    config: SamplerConfig,
    num_shards: int,
    segment_key: str | None = None,
    workers: int | None = None,
    callback: Callable[[int, SamplerState], None] | None = None,
) -> LocalTopicSet:
    """Like :func:`train`, but samples shards concurrently (AD-LDA).

    ``workers`` bounds the shard threads (default: ``num_shards``).  The
    result does not depend on ``workers``.
    """
    if num_shards < 1:
        raise ConfigurationError("num_shards must be >= 1")
    state = init_random(sub_corpus, config)
    orders = _shard_orders(state, num_shards)
    n_threads = min(num_shards, workers or num_shards)
    executor = ThreadPoolExecutor(n_threads) if n_threads > 1 else None
    try:
        for it in range(config.iterations):
            sharded_sweep(state, config, num_shards, executor, orders)
            if callback is not None:
                callback(it, state)
    finally:
        if executor is not None:
            executor.shutdown()
    key = segment_key if segment_key is not None else _default_key(sub_corpus)
    return _estimate(state, config, key, tuple(d.doc_id for d in sub_corpus.documents))


def _default_key(corpus: Corpus) -> str:
    return corpus.segments[0] if len(corpus.segments) == 1 else ""


# --- held-out inference -----------------------------------------------------

def fold_in(
    topics: np.ndarray,
    tokens: np.ndarray,
    config: SamplerConfig,
    seed=None,
) -> np.ndarray:
    """Estimate a held-out document's topic mixture with topics held fixed.

    ``tokens`` index the columns of ``topics`` (see
    :meth:`LocalTopicSet.localize`).  Runs ``config.foldin_iterations`` sweeps
    over the document alone and reads the mixture from the final counts.
    ``seed`` defaults to ``config.seed``.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        raise UnscorableDocumentError("document has no in-vocabulary tokens")
    phi = np.ascontiguousarray(topics, dtype=np.float64)
    K = phi.shape[0]
    rng = np.random.default_rng(config.seed if seed is None else seed)
    z = rng.integers(0, K, size=tokens.size, dtype=np.int64)
    n_k = np.bincount(z, minlength=K).astype(np.int64)
    alpha = float(config.alpha)
    for _ in range(config.foldin_iterations):
        _foldin_sweep(tokens, z, n_k, phi, rng.random(tokens.size), alpha)
    return (n_k + alpha) / (tokens.size + K * alpha)


def token_probabilities(topics: np.ndarray, mixture: np.ndarray, tokens: np.ndarray) -> np.ndarray:
    """``P(w|d) = sum_k theta_k phi_k[w]`` for every token of one document."""
    return mixture @ np.asarray(topics)[:, np.asarray(tokens, dtype=np.int64)]
