"""End-to-end CLDA runs as a sequence of restartable stages.

Every stage reads its inputs from and writes its outputs to one output
directory, so any stage can be re-run alone (for instance re-clustering with
a new K without retraining).  ``run_pipeline`` simply runs all stages in
order.

Output layout::

    vocab.txt  segments.txt  corpus_train.tsv  corpus_test.tsv
    segments/<key>/{topics.tsv,mixtures.tsv,*.npy}
    merged.tsv  merged.npy
    centroids.tsv  centroids.npy  assignments.tsv  clustering.txt
    eval.txt  proportions.csv  composition_<g>.csv  lifespans.csv
    manifest.txt
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import __version__
from .corpus import (
    Corpus,
    Document,
    build_vocabulary,
    encode,
    holdout_split,
    order_segments,
    read_bow_records,
    read_encoded,
    read_text_records,
    read_vocabulary,
    split_corpus,
    tokenize,
    write_encoded,
    write_vocabulary,
)
from .dynamics import dynamics_report, write_composition_csv, write_proportions_csv
from .exceptions import ConfigurationError
from .formats import read_topics, write_mixtures, write_topics
from .gibbs_lda import LocalTopicSet, SamplerConfig, train, train_sharded
from .merge import TopicMatrix, align_to_global, merge_all, normalize, write_merged
from .metrics import MatchReport, global_topic_mean, greedy_match, heldout_perplexity, top_words
from .spherical_kmeans import Clustering, multi_restart, write_assignments

__all__ = [
    "PipelineConfig",
    "StageError",
    "MissingArtifactError",
    "STAGES",
    "run_pipeline",
    "run_stage",
    "compare_models",
    "load_local_topics",
    "load_clustering",
]

logger = logging.getLogger(__name__)

STAGES = ("ingest", "train", "merge", "cluster", "evaluate", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of a run.  See ``README.md`` for the meaning of each key."""

    input: str = ""
    input_format: str = "text"
    vocabulary: str = ""
    stopwords: str = ""
    min_count: int = 1
    min_doc_fraction: float = 0.0
    segment_order: str = "lexicographic"
    local_topics: int = 10
    global_topics: int = 10
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    shards: int = 1
    foldin_iterations: int = 20
    epsilon: float = 0.0
    norm: str = "l2"
    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-9
    init_mode: str = "random-topics"
    init_iterations: int = 100
    holdout_fraction: float = 0.2
    top_n: int = 20
    report_words: int = 10
    weighting: str = "tokens"
    reference_topics: str = ""
    raw_counts: bool = False
    seed: int = 0
    workers: int = 1
    output: str = "clda_out"

    def __post_init__(self):
        if self.local_topics < 1 or self.global_topics < 1:
            raise ConfigurationError("local_topics and global_topics must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigurationError("holdout_fraction must lie in [0, 1)")
        if self.input_format not in ("text", "bow"):
            raise ConfigurationError(f"unknown input_format {self.input_format!r}")
        if self.segment_order not in ("lexicographic", "numeric"):
            raise ConfigurationError(f"unknown segment_order {self.segment_order!r}")
        if self.init_mode not in ("random-topics", "full-lda"):
            raise ConfigurationError(f"unknown init_mode {self.init_mode!r}")
        if self.workers < 1 or self.shards < 1 or self.restarts < 1:
            raise ConfigurationError("workers, shards and restarts must be >= 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: "PipelineConfig | None" = None):
        """Build a config from string values, e.g. parsed file lines or flags."""
        known = {f.name: f for f in fields(cls)}
        parsed = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            parsed[name] = _coerce(getattr(cls, name, None), known[name].type, raw)
        return dataclasses.replace(base or cls(), **parsed)

    @classmethod
    def from_file(cls, path: str | Path, overrides: Mapping[str, str] | None = None):
        """Parse flat ``key = value`` lines (``#`` starts a comment)."""
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
                values[key.strip()] = value.strip()
        values.update(overrides or {})
        return cls.from_mapping(values)

    def to_lines(self) -> list[str]:
        return [f"{f.name} = {'' if getattr(self, f.name) is None else getattr(self, f.name)}"
                for f in fields(self)]

    @property
    def outdir(self) -> Path:
        return Path(self.output)

    def sampler_config(self, num_topics: int, seed: int, iterations: int | None = None):
        return SamplerConfig(num_topics, self.alpha, self.beta, iterations or self.iterations,
                             seed, self.foldin_iterations)


def _coerce(default, annotation, raw: str):
    ann = str(annotation)
    if raw in ("", "none", "None") and "None" in ann:
        return None
    if "bool" in ann:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if "int" in ann:
        return int(raw)
    if "float" in ann:
        return float(raw)
    return raw


# --- artifact helpers ---------------------------------------------------------

def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    return path


def _segment_dir(outdir: Path, key: str) -> Path:
    if not key or "/" in key or "\\" in key or key in (".", ".."):
        raise ValueError(f"segment key {key!r} cannot be used as a directory name")
    return outdir / "segments" / key


def _read_segments(outdir: Path) -> list[str]:
    return _require(outdir / "segments.txt").read_text(encoding="utf-8").split("\n")[:-1]


def _load_corpus(cfg: PipelineConfig, name: str) -> Corpus:
    out = cfg.outdir
    vocab = read_vocabulary(_require(out / "vocab.txt"))
    return read_encoded(_require(out / name), vocab, _read_segments(out))


def load_local_topics(outdir: str | Path) -> list[LocalTopicSet]:
    """Read every segment's trained model, in canonical segment order."""
    outdir = Path(outdir)
    result = []
    for key in _read_segments(outdir):
        d = _segment_dir(outdir, key)
        ids_path = _require(d / "doc_ids.txt")
        result.append(LocalTopicSet(
            segment_key=key,
            topics=np.load(_require(d / "topics.npy")),
            local_vocab=np.load(_require(d / "local_vocab.npy")),
            doc_mixtures=np.load(_require(d / "mixtures.npy")),
            doc_lengths=np.load(_require(d / "lengths.npy")),
            doc_ids=tuple(ids_path.read_text(encoding="utf-8").split("\n")[:-1]),
        ))
    return result


def _read_provenance(path: Path) -> tuple[tuple[str, int], ...]:
    prov = []
    with open(_require(path), encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            key, idx, _ = line.split("\t", 2)
            prov.append((key, int(idx)))
    return tuple(prov)


def load_clustering(outdir: str | Path) -> Clustering:
    outdir = Path(outdir)
    centroids = np.load(_require(outdir / "centroids.npy"))
    labels = np.load(_require(outdir / "assignment.npy"))
    info = _read_kv(_require(outdir / "clustering.txt"))
    return Clustering(centroids, labels, float(info["objective"]),
                      int(info["restarts_run"]), int(info["n_iter"]),
                      provenance=_read_provenance(outdir / "merged.tsv"))


def _read_kv(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition(" = ")
        if sep:
            out[key.strip()] = value.strip()
    return out


def _segment_seed(cfg: PipelineConfig, index: int) -> int:
    return cfg.seed + index


# --- stages -------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.input:
        raise ConfigurationError("no input file configured")
    numeric = cfg.segment_order == "numeric"
    if cfg.input_format == "text":
        records = read_text_records(cfg.input)
        stop = set()
        if cfg.stopwords:
            stop = set(Path(cfg.stopwords).read_text(encoding="utf-8").split())
        tokens = [tokenize(text) for _, _, text in records]
        vocab = build_vocabulary(tokens, stop, cfg.min_count, cfg.min_doc_fraction)
        corpus = encode(tokens, vocab, [r[0] for r in records], [r[1] for r in records],
                        numeric_segments=numeric)
    else:
        if not cfg.vocabulary:
            raise ConfigurationError("bag-of-words input needs a vocabulary file")
        vocab = read_vocabulary(cfg.vocabulary)
        docs, dropped = [], 0
        for doc_id, key, ids in read_bow_records(cfg.input):
            if any(i < 0 or i >= len(vocab) for i in ids):
                raise ValueError(f"document {doc_id!r} uses a word id outside the vocabulary")
            if not ids:
                dropped += 1
                continue
            docs.append(Document(doc_id, key, np.asarray(ids, dtype=np.int64)))
        segments = order_segments((d.segment_key for d in docs), numeric)
        corpus = Corpus(vocab, tuple(docs), segments, dropped)

    train_c, test_c = holdout_split(corpus, cfg.holdout_fraction, cfg.seed)
    write_vocabulary(vocab, out / "vocab.txt")
    (out / "segments.txt").write_text("".join(k + "\n" for k in corpus.segments), encoding="utf-8")
    write_encoded(train_c, out / "corpus_train.tsv")
    write_encoded(test_c, out / "corpus_test.tsv")
    for key in corpus.segments:
        _segment_dir(out, key)
    return {"documents": len(corpus), "dropped_documents": corpus.n_dropped,
            "vocabulary_size": len(vocab), "segments": len(corpus.segments),
            "train_documents": len(train_c), "test_documents": len(test_c)}


def _train_one(cfg: PipelineConfig, index: int, sub: Corpus, shard_workers: int) -> LocalTopicSet:
    key = sub.segments[0]
    if len(sub) == 0:
        raise ValueError(f"segment {key!r} has no training documents")
    sc = cfg.sampler_config(cfg.local_topics, _segment_seed(cfg, index))
    t0 = time.perf_counter()
    if cfg.shards > 1:
        local = train_sharded(sub, sc, cfg.shards, key, workers=shard_workers)
    else:
        local = train(sub, sc, key)
    logger.info("segment %s: %d docs, %d tokens, %.2fs", key, len(sub), sub.num_tokens,
                time.perf_counter() - t0)
    return local


def stage_train(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    corpus = _load_corpus(cfg, "corpus_train.tsv")
    subs = split_corpus(corpus)
    S = len(subs)
    if cfg.global_topics > S * cfg.local_topics:
        raise ConfigurationError(
            f"global_topics={cfg.global_topics} exceeds S*L={S * cfg.local_topics}")
    concurrent = min(cfg.workers, S)
    shard_workers = max(1, cfg.workers // max(concurrent, 1))
    jobs = list(enumerate(subs))
    if concurrent > 1:
        with ThreadPoolExecutor(concurrent) as pool:
            locals_ = list(pool.map(lambda job: _train_one(cfg, job[0], job[1], shard_workers), jobs))
    else:
        locals_ = [_train_one(cfg, i, sub, shard_workers) for i, sub in jobs]

    W = len(corpus.vocabulary)
    for local in locals_:
        d = _segment_dir(out, local.segment_key)
        d.mkdir(parents=True, exist_ok=True)
        write_topics(d / "topics.tsv", local.topics, local.local_vocab, W)
        if cfg.raw_counts:
            write_topics(d / "topic_counts.tsv", local.topic_counts, local.local_vocab, W,
                         raw_counts=True)
        write_mixtures(d / "mixtures.tsv", local.doc_ids, local.doc_mixtures)
        np.save(d / "topics.npy", local.topics)
        np.save(d / "local_vocab.npy", local.local_vocab)
        np.save(d / "mixtures.npy", local.doc_mixtures)
        np.save(d / "lengths.npy", local.doc_lengths)
        (d / "doc_ids.txt").write_text("".join(i + "\n" for i in local.doc_ids), encoding="utf-8")
    return {"segments": S, "seeds": {lt.segment_key: _segment_seed(cfg, i)
                                     for i, lt in enumerate(locals_)}}


def stage_merge(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    W = len(read_vocabulary(_require(out / "vocab.txt")))
    locals_ = load_local_topics(out)
    matrix = merge_all(locals_, W, cfg.epsilon, cfg.norm, workers=cfg.workers)
    write_merged(matrix, out / "merged.tsv")
    np.save(out / "merged.npy", matrix.rows)
    return {"rows": len(matrix), "discarded": list(matrix.discarded)}


def _full_lda_init(cfg: PipelineConfig, W: int) -> np.ndarray:
    corpus = _load_corpus(cfg, "corpus_train.tsv")
    sc = cfg.sampler_config(cfg.global_topics, cfg.seed, cfg.init_iterations)
    flat = Corpus(corpus.vocabulary, corpus.documents, ("*",))
    full = train(flat, sc, "*")
    init = normalize(align_to_global(full, W), norm="l2")
    if len(init) != cfg.global_topics:
        raise ValueError("full-corpus LDA produced an all-zero topic")
    return init.rows


def stage_cluster(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    rows = np.load(_require(out / "merged.npy"))
    matrix = TopicMatrix(rows, _read_provenance(out / "merged.tsv"))
    if cfg.init_mode == "full-lda":
        init = _full_lda_init(cfg, rows.shape[1])
        clustering = multi_restart(matrix, cfg.global_topics, 1, cfg.seed, "provided", init,
                                   cfg.max_iters, cfg.tol)
    else:
        clustering = multi_restart(matrix, cfg.global_topics, cfg.restarts, cfg.seed,
                                   "random-topics", max_iters=cfg.max_iters, tol=cfg.tol,
                                   workers=cfg.workers)
    write_topics(out / "centroids.tsv", clustering.centroids, vocab_size=rows.shape[1],
                 skip_zeros=True)
    np.save(out / "centroids.npy", clustering.centroids)
    np.save(out / "assignment.npy", clustering.assignment)
    write_assignments(clustering, out / "assignments.tsv")
    (out / "clustering.txt").write_text(
        f"objective = {clustering.objective:.12g}\n"
        f"restarts_run = {clustering.restarts_run}\n"
        f"n_iter = {clustering.n_iter}\n"
        f"global_topics = {clustering.num_clusters}\n", encoding="utf-8")
    return {"objective": clustering.objective, "restarts_run": clustering.restarts_run}


def stage_evaluate(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    locals_ = {lt.segment_key: lt for lt in load_local_topics(out)}
    test = _load_corpus(cfg, "corpus_test.tsv")
    result = heldout_perplexity(locals_, test, cfg.sampler_config(cfg.local_topics, cfg.seed))
    lines = [
        f"perplexity = {result.perplexity:.6f}",
        f"heldout_documents = {len(test)}",
        f"scored_documents = {result.n_documents}",
        f"scored_tokens = {result.n_tokens}",
        f"oov_tokens = {result.n_oov_tokens}",
        f"unscorable_documents = {result.n_unscorable}",
    ]
    report = None
    if cfg.reference_topics:
        report = compare_models(out / "centroids.tsv", cfg.reference_topics, cfg.top_n)
        lines += [f"match_mean_jaccard = {report.mean_jaccard():.6f}",
                  f"match_mean_dice = {report.mean_dice():.6f}", "", report.to_csv().rstrip("\n")]
    (out / "eval.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"perplexity": result.perplexity, "unscorable": result.n_unscorable}


def stage_report(cfg: PipelineConfig) -> dict[str, object]:
    out = cfg.outdir
    vocab = read_vocabulary(_require(out / "vocab.txt"))
    locals_ = load_local_topics(out)
    clustering = load_clustering(out)
    report = dynamics_report(clustering, locals_, cfg.report_words, cfg.weighting)
    write_proportions_csv(report, out / "proportions.csv")
    K = clustering.num_clusters
    for stale in out.glob("composition_*.csv"):
        suffix = stale.stem.split("_", 1)[1]
        if not suffix.isdigit() or int(suffix) >= K:
            stale.unlink()
    for g in range(K):
        write_composition_csv(report, g, out / f"composition_{g}.csv", vocab)
    with open(out / "lifespans.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("topic,birth,death,absent\n")
        for g, span in report.lifespans.items():
            fh.write(f"{g},{span.birth or ''},{span.death or ''},{';'.join(span.absent)}\n")
    return {"global_topics": K}


_STAGE_FUNCS: dict[str, Callable[[PipelineConfig], dict]] = {
    "ingest": stage_ingest,
    "train": stage_train,
    "merge": stage_merge,
    "cluster": stage_cluster,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_stage(cfg: PipelineConfig, stage: str) -> dict[str, object]:
    """Run one stage against the artifacts in ``cfg.output``.

    Raises :class:`StageError` wrapping the underlying failure; artifacts
    written before the failure are left in place.
    """
    if stage not in _STAGE_FUNCS:
        raise ConfigurationError(f"unknown stage {stage!r}; expected one of {STAGES}")
    t0 = time.perf_counter()
    try:
        info = _STAGE_FUNCS[stage](cfg)
    except Exception as exc:
        raise StageError(stage, exc) from exc
    elapsed = time.perf_counter() - t0
    logger.info("stage %s done in %.2fs", stage, elapsed)
    _write_manifest(cfg, stage, elapsed, info)
    return info


def run_pipeline(cfg: PipelineConfig) -> Path:
    """Run every stage in order and return the output directory."""
    for stage in STAGES:
        run_stage(cfg, stage)
    return cfg.outdir


def compare_models(topics_a: str | Path, topics_b: str | Path, top_n: int = 20,
                   output: str | Path | None = None) -> MatchReport:
    """Match two topic files one-to-one by top-word Jaccard similarity.

    Lines sharing a topic index are averaged into one topic first, so a file
    listing a dynamic topic once per time slice is compared by its mean.
    """
    idx_a, rows_a, W_a = read_topics(topics_a)
    idx_b, rows_b, W_b = read_topics(topics_b)
    if W_a != W_b:
        raise ValueError(f"vocabulary size mismatch: {W_a} != {W_b}")
    sets_a = _collapse(idx_a, rows_a, top_n, "A")
    sets_b = _collapse(idx_b, rows_b, top_n, "B")
    report = greedy_match(sets_a, sets_b)
    if output is not None:
        Path(output).write_text(report.to_csv(), encoding="utf-8")
    return report


def _collapse(indices, rows, top_n, label):
    order = sorted(set(indices))
    sets = []
    for k in order:
        members = rows[[i for i, idx in enumerate(indices) if idx == k]]
        topic = members[0] if len(members) == 1 else global_topic_mean(np.abs(members))
        sets.append(top_words(topic, top_n, source=(label, k)))
    return sets


# --- manifest -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(cfg: PipelineConfig, stage: str, elapsed: float, info: dict) -> None:
    out = cfg.outdir
    path = out / "manifest.txt"
    previous = _read_kv(path) if path.exists() else {}
    timings = {k: v for k, v in previous.items() if k.startswith("stage_seconds.")}
    seeds = {k: v for k, v in previous.items() if k.startswith("seed.segment.")}
    timings[f"stage_seconds.{stage}"] = f"{elapsed:.3f}"
    if stage == "train":
        seeds = {f"seed.segment.{k}": str(v) for k, v in info["seeds"].items()}

    import numba
    lines = ["# clda run manifest",
             f"clda_version = {__version__}",
             f"python_version = {platform.python_version()}",
             f"numpy_version = {np.__version__}",
             f"numba_version = {numba.__version__}",
             f"last_stage = {stage}"]
    lines += [f"config.{line}" for line in cfg.to_lines()]
    lines += [f"{k} = {v}" for k, v in sorted(seeds.items())]
    lines += [f"{k} = {timings[k]}" for k in sorted(timings)]
    for root, _, files in sorted(os.walk(out)):
        for name in sorted(files):
            p = Path(root) / name
            if p == path:
                continue
            lines.append(f"file {p.relative_to(out).as_posix()} sha256={_sha256(p)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
