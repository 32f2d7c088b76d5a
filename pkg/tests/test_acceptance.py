"""Acceptance criteria, one test per criterion.

Every test records a ``criterion N: PASS|FAIL|SKIP`` line which is echoed in
the pytest terminal summary.  Run alone with::

    python -m pytest tests/test_acceptance.py -v
"""
import hashlib
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from clda.corpus import Corpus, Document, Vocabulary, read_vocabulary, write_text_records
from clda.dynamics import dynamics_report
from clda.formats import read_topics, write_topics
from clda.gibbs_lda import LocalTopicSet, SamplerConfig, gibbs_sweep, init_random, sharded_sweep, train
from clda.merge import merge_all
from clda.metrics import dice, greedy_match, jaccard, perplexity, top_words
from clda.pipeline import PipelineConfig, compare_models, run_pipeline, run_stage
from clda.spherical_kmeans import kmeans, multi_restart
from clda.synthetic import planted_corpus
from oracles import brute_force_kmeans, naive_greedy, random_unit_rows

RESULTS = []

# value observed on the first oracle run of criterion 4 (planted_corpus(seed=0), pipeline seed 0)
PINNED_PLANTED_JACCARD = 0.8838383838383839


def record(n, ok, detail, skipped=False):
    status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
    RESULTS.append(f"criterion {n}: {status}  {detail}")
    print(RESULTS[-1])
    return ok


def snapshot(out: Path) -> dict[str, str]:
    return {p.relative_to(out).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.txt"}


def manifest_without_timing(out: Path) -> list[str]:
    skip = ("stage_seconds.", "config.output", "config.workers")
    return [line for line in (out / "manifest.txt").read_text().splitlines()
            if not line.startswith(skip)]


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    pc = planted_corpus(seed=0)
    root = tmp_path_factory.mktemp("planted")
    write_text_records(pc.corpus, root / "docs.tsv")
    return pc, root


def planted_config(root, name, **kw):
    base = dict(input=str(root / "docs.tsv"), local_topics=10, global_topics=6, iterations=500,
                restarts=10, seed=0, output=str(root / name))
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def planted_run(planted):
    _, root = planted
    cfg = planted_config(root, "w8", workers=8)
    t0 = time.perf_counter()
    run_pipeline(cfg)
    return cfg, time.perf_counter() - t0


def centroid_recovery(pc, out: Path) -> float:
    vocab = read_vocabulary(out / "vocab.txt")
    planted_id = np.array([int(w[1:]) for w in vocab.words])
    _, centroids, _ = read_topics(out / "centroids.tsv")
    found = [{int(planted_id[w]) for w in top_words(c, 10).words} for c in centroids]
    truth = [top_words(p, 10) for p in pc.topics]
    return greedy_match(found, truth).mean_jaccard()


def test_criterion_1_perplexity_oracle():
    t0 = time.perf_counter()
    hand = math.exp(-(math.log(0.5) + math.log(0.25) + math.log(0.125)) / 3)
    got = perplexity([[0.5, 0.25], [0.125]])
    errors = [abs(got - hand) / hand, abs(got - 4.0) / 4.0]
    for W in (2, 100, 10_000):
        uniform = perplexity([[1 / W] * 5, [1 / W] * 3, [1 / W] * 9])
        errors.append(abs(uniform - W) / W)
    elapsed = time.perf_counter() - t0
    ok = max(errors) <= 1e-9 and elapsed < 1
    assert record(1, ok, f"max rel err {max(errors):.2e}, {elapsed:.3f}s")


def _conservation_holds(state, N_j):
    K, W = state.n_wk.shape
    n_wk = np.zeros((K, W), dtype=np.int64)
    np.add.at(n_wk, (state.z, state.words), 1)
    n_jk = np.zeros((len(N_j), K), dtype=np.int64)
    np.add.at(n_jk, (state.doc_of, state.z), 1)
    return (np.array_equal(n_wk, state.n_wk) and np.array_equal(n_jk, state.n_jk)
            and np.array_equal(state.n_wk.sum(axis=1), state.n_k)
            and np.array_equal(state.n_jk.sum(axis=1), N_j)
            and int(state.n_k.sum()) == int(N_j.sum()))


def test_criterion_2_gibbs_invariants():
    rng = np.random.default_rng(2)
    W = 200
    vocab = Vocabulary.from_words(f"w{i:03d}" for i in range(W))
    docs = tuple(Document(f"d{j}", "s", rng.integers(0, W, size=rng.integers(20, 120)))
                 for j in range(50))
    corpus = Corpus(vocab, docs, ("s",))
    N_j = np.array([len(d.tokens) for d in docs])
    cfg = SamplerConfig(5, seed=3)
    t0 = time.perf_counter()
    failures = []
    for mode, sweep in (("serial", lambda s: gibbs_sweep(s, cfg)),
                        ("4-shard", lambda s: sharded_sweep(s, cfg, 4))):
        state = init_random(corpus, cfg)
        for it in range(100):
            sweep(state)
            if not _conservation_holds(state, N_j):
                failures.append((mode, it))
                break
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10
    assert record(2, ok, f"violations {failures or 'none'} over 2x100 sweeps, {elapsed:.2f}s")


def test_criterion_3_fit_improvement(planted):
    _, root = planted
    t0 = time.perf_counter()
    values = {}
    for sweeps in (2, 200):
        cfg = planted_config(root, f"fit{sweeps}", iterations=sweeps, holdout_fraction=0.2)
        for stage in ("ingest", "train", "evaluate"):
            run_stage(cfg, stage)
        text = (cfg.outdir / "eval.txt").read_text()
        values[sweeps] = float(text.split("perplexity = ")[1].split()[0])
    elapsed = time.perf_counter() - t0
    ok = values[200] < values[2] and elapsed < 60
    assert record(3, ok, f"perplexity 2 sweeps {values[2]:.2f} -> 200 sweeps {values[200]:.2f}, "
                         f"{elapsed:.1f}s")


def test_criterion_4_planted_recovery(planted, planted_run):
    pc, _ = planted
    cfg, elapsed = planted_run
    score = centroid_recovery(pc, cfg.outdir)
    ok = score >= 0.8 and elapsed < 300
    assert record(4, ok, f"mean Jaccard {score:.4f} (pinned {PINNED_PLANTED_JACCARD:.4f}), "
                         f"{elapsed:.1f}s")


def test_planted_recovery_matches_pinned_value(planted, planted_run):
    pc, _ = planted
    assert centroid_recovery(pc, planted_run[0].outdir) == pytest.approx(PINNED_PLANTED_JACCARD,
                                                                         abs=1e-12)


def test_clda_close_to_full_corpus_lda(planted, planted_run):
    # full-corpus LDA on the same training split, matched on top-20 words
    from clda.corpus import read_encoded
    _, root = planted
    out = planted_run[0].outdir
    vocab = read_vocabulary(out / "vocab.txt")
    train_c = read_encoded(out / "corpus_train.tsv", vocab)
    flat = Corpus(vocab, train_c.documents, ("*",))
    full = train(flat, SamplerConfig(6, iterations=500, seed=0), "*")
    write_topics(root / "full_lda.tsv", full.topics, full.local_vocab, len(vocab))
    report = compare_models(out / "centroids.tsv", root / "full_lda.tsv", top_n=20)
    assert report.mean_jaccard() >= 0.6


def test_criterion_5_clustering_oracle():
    rng = np.random.default_rng(5)
    sut_time = 0.0
    misses, non_monotone, cases = 0, 0, 0
    for _ in range(40):
        n = int(rng.integers(3, 9))
        K = int(rng.integers(2, 4))
        if K >= n:
            continue
        X = random_unit_rows(rng, n, int(rng.integers(2, 6)))
        cases += 1
        t0 = time.perf_counter()
        best = multi_restart(X, K, init_mode="exhaustive")
        runs = [kmeans(X, K, X[list(idx)], tol=0.0)
                for idx in rng.choice(n, size=(5, K), replace=True) if len(set(idx)) == K]
        sut_time += time.perf_counter() - t0
        if abs(best.objective - brute_force_kmeans(X, K)) > 1e-9:
            misses += 1
        for run in runs + [best]:
            if np.any(np.diff(run.history) > 1e-12):
                non_monotone += 1
    ok = misses == 0 and non_monotone == 0 and sut_time < 1
    assert record(5, ok, f"{cases} instances, {misses} missed optima, {non_monotone} "
                         f"non-monotone runs, {sut_time:.3f}s")


def test_criterion_6_metric_identities():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        a = set(rng.choice(60, size=rng.integers(1, 25), replace=False).tolist())
        b = set(rng.choice(60, size=rng.integers(0, 25), replace=False).tolist())
        J, S = jaccard(a, b), dice(a, b)
        if not (J == jaccard(b, a) and S == dice(b, a) and 0 <= J <= 1 and 0 <= S <= 1
                and abs(S - 2 * J / (1 + J)) <= 1e-12):
            bad += 1
    A, B = set(range(20)), set(range(4, 24))
    pair_ok = abs(dice(A, B) - 0.8) <= 1e-12 and abs(jaccard(A, B) - 16 / 24) <= 1e-12
    greedy_bad = 0
    for _ in range(100):
        na, nb = rng.integers(1, 10, size=2)
        sa = [set(rng.choice(15, size=rng.integers(1, 7), replace=False).tolist()) for _ in range(na)]
        sb = [set(rng.choice(15, size=rng.integers(1, 7), replace=False).tolist()) for _ in range(nb)]
        got = [(p.a, p.b, p.jaccard, p.dice) for p in greedy_match(sa, sb).pairs]
        if got != naive_greedy(sa, sb):
            greedy_bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and pair_ok and greedy_bad == 0 and elapsed < 5
    assert record(6, ok, f"{bad} identity failures, 80% pair dice {dice(A, B):.4f} jaccard "
                         f"{jaccard(A, B):.4f}, {greedy_bad} greedy mismatches, {elapsed:.2f}s")


def test_criterion_7_determinism(planted, planted_run):
    _, root = planted
    t0 = time.perf_counter()
    runs = {}
    for name in ("w1a", "w1b"):
        cfg = planted_config(root, name, workers=1)
        run_pipeline(cfg)
        runs[name] = cfg.outdir
    runs["w8"] = planted_run[0].outdir
    elapsed = time.perf_counter() - t0 + planted_run[1]
    snaps = {k: snapshot(v) for k, v in runs.items()}
    manifests = {k: manifest_without_timing(v) for k, v in runs.items()}
    same = snaps["w1a"] == snaps["w1b"] == snaps["w8"]
    same_manifest = manifests["w1a"] == manifests["w1b"] == manifests["w8"]
    ok = same and same_manifest and elapsed < 600
    assert record(7, ok, f"{len(snaps['w1a'])} files identical across 2 runs and workers 1/8: "
                         f"{same}, manifests match: {same_manifest}, {elapsed:.1f}s")


def test_criterion_8_parallel_speedup(planted):
    threads = os.cpu_count() or 1
    if threads < 8:
        record(8, False, f"needs >= 8 hardware threads, machine has {threads}", skipped=True)
        pytest.skip(f"requires >= 8 hardware threads (found {threads})")
    _, root = planted
    times = {}
    for workers in (1, 8):
        cfg = planted_config(root, f"speed{workers}", workers=workers)
        run_stage(cfg, "ingest")
        t0 = time.perf_counter()
        run_stage(cfg, "train")
        times[workers] = time.perf_counter() - t0
    ratio = times[8] / times[1]
    assert record(8, ratio <= 0.5, f"train {times[1]:.1f}s -> {times[8]:.1f}s, ratio {ratio:.2f}")


def test_criterion_9_extreme_k():
    rng = np.random.default_rng(9)
    S, L, W = 4, 3, 30
    locals_ = [LocalTopicSet(f"s{s}", rng.dirichlet(np.full(W, 0.3), size=L), np.arange(W),
                             rng.dirichlet(np.ones(L), size=5), rng.integers(5, 50, size=5))
               for s in range(S)]
    t0 = time.perf_counter()
    matrix = merge_all(locals_, W)
    one = multi_restart(matrix, 1, restarts=3)
    k1 = one.num_clusters == 1 and len(one.members(0)) == S * L
    full = multi_restart(matrix, S * L, restarts=3)
    singletons = full.objective == pytest.approx(0.0, abs=1e-12) and \
        sorted(full.assignment.tolist()) == list(range(S * L))
    pigeon = True
    for K in (L + 1, L + 3, S * L):
        report = dynamics_report(multi_restart(matrix, K, restarts=3, seed=K), locals_)
        for seg in report.segments:
            absent = sum(seg in report.absences[g] for g in range(K))
            pigeon &= absent >= K - L
    elapsed = time.perf_counter() - t0
    ok = k1 and singletons and pigeon and elapsed < 1
    assert record(9, ok, f"K=1 all-in-one {k1}, K=S*L singletons {singletons}, "
                         f"pigeonhole {pigeon}, {elapsed:.3f}s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
