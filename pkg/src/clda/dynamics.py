"""Global-topic proportions per segment and local composition of global topics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Vocabulary
from .gibbs_lda import LocalTopicSet
from .metrics import top_words
from .spherical_kmeans import Clustering

__all__ = [
    "CompositionEntry",
    "TopicLifespan",
    "DynamicsReport",
    "segment_topic_mass",
    "global_proportions",
    "local_composition",
    "birth_death",
    "dynamics_report",
    "write_proportions_csv",
    "write_composition_csv",
]

WEIGHTINGS = ("tokens", "documents")


@dataclass(frozen=True)
class CompositionEntry:
    provenance: tuple[str, int]
    fraction: float
    top_words: tuple[int, ...]


@dataclass(frozen=True)
class TopicLifespan:
    absent: tuple[str, ...]
    birth: str | None
    death: str | None


@dataclass(frozen=True)
class DynamicsReport:
    segments: tuple[str, ...]
    proportions: np.ndarray
    compositions: dict[tuple[str, int], list[CompositionEntry]]
    lifespans: dict[int, TopicLifespan]

    @property
    def absences(self) -> dict[int, tuple[str, ...]]:
        return {g: span.absent for g, span in self.lifespans.items()}


def segment_topic_mass(local: LocalTopicSet, weighting: str = "tokens") -> np.ndarray:
    """Mixture mass of each local topic in its segment.

    With ``"tokens"`` the mass is ``sum_j theta_j * N_j`` and sums to the
    segment's token count; ``"documents"`` gives the mean mixture instead.
    """
    if weighting == "tokens":
        return local.doc_mixtures.T @ local.doc_lengths.astype(np.float64)
    if weighting == "documents":
        return local.doc_mixtures.mean(axis=0)
    raise ValueError(f"unknown weighting {weighting!r}")


def _members(clustering: Clustering, local: LocalTopicSet, g: int) -> list[int]:
    cmap = clustering.cluster_map()
    return [i for i in range(local.num_topics) if cmap.get((local.segment_key, i)) == g]


def global_proportions(
    clustering: Clustering, locals_: Sequence[LocalTopicSet], weighting: str = "tokens"
) -> np.ndarray:
    """``S x K`` share of each segment's mass held by each global topic.

    Local topics absent from the clustering (dropped at merge time) do not
    count towards the segment total.
    """
    cmap = clustering.cluster_map()
    K = clustering.num_clusters
    out = np.zeros((len(locals_), K))
    for s, local in enumerate(locals_):
        mass = segment_topic_mass(local, weighting)
        for i, m in enumerate(mass):
            g = cmap.get((local.segment_key, i))
            if g is not None:
                out[s, g] += m
        total = out[s].sum()
        if total > 0:
            out[s] /= total
    return out


def local_composition(
    clustering: Clustering,
    locals_: Sequence[LocalTopicSet],
    g: int,
    segment: str,
    n_words: int = 10,
    weighting: str = "tokens",
) -> list[CompositionEntry]:
    """Local topics of ``segment`` in global topic ``g`` and their mass shares."""
    local = next((lt for lt in locals_ if lt.segment_key == segment), None)
    if local is None:
        raise KeyError(f"no local topics for segment {segment!r}")
    members = _members(clustering, local, g)
    if not members:
        return []
    mass = segment_topic_mass(local, weighting)[members]
    total = mass.sum()
    fractions = mass / total if total > 0 else np.full(len(members), 1.0 / len(members))
    entries = []
    for i, frac in zip(members, fractions):
        cols = top_words(local.topics[i], n_words).words
        words = tuple(int(local.local_vocab[c]) for c in sorted(cols, key=lambda c: (-local.topics[i][c], c)))
        entries.append(CompositionEntry((local.segment_key, i), float(frac), words))
    return entries


def birth_death(clustering: Clustering, locals_: Sequence[LocalTopicSet]) -> dict[int, TopicLifespan]:
    """Segments without members, plus first and last present segment, per cluster."""
    segments = [lt.segment_key for lt in locals_]
    present: dict[int, set[str]] = {g: set() for g in range(clustering.num_clusters)}
    for (key, _), g in zip(clustering.provenance or (), clustering.assignment):
        present[int(g)].add(key)
    spans = {}
    for g, keys in present.items():
        seen = [s for s in segments if s in keys]
        spans[g] = TopicLifespan(
            absent=tuple(s for s in segments if s not in keys),
            birth=seen[0] if seen else None,
            death=seen[-1] if seen else None,
        )
    return spans


def dynamics_report(
    clustering: Clustering,
    locals_: Sequence[LocalTopicSet],
    n_words: int = 10,
    weighting: str = "tokens",
) -> DynamicsReport:
    compositions = {}
    for local in locals_:
        for g in range(clustering.num_clusters):
            compositions[(local.segment_key, g)] = local_composition(
                clustering, locals_, g, local.segment_key, n_words, weighting)
    return DynamicsReport(
        segments=tuple(lt.segment_key for lt in locals_),
        proportions=global_proportions(clustering, locals_, weighting),
        compositions=compositions,
        lifespans=birth_death(clustering, locals_),
    )


def write_proportions_csv(report: DynamicsReport, path: str | Path) -> None:
    K = report.proportions.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment"] + [f"topic_{g}" for g in range(K)])
        for key, row in zip(report.segments, report.proportions):
            w.writerow([key] + [f"{v:.9f}" for v in row])


def write_composition_csv(
    report: DynamicsReport, g: int, path: str | Path, vocabulary: Vocabulary | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", "local_index", "fraction", "top_words"])
        for key in report.segments:
            for entry in report.compositions.get((key, g), []):
                words = [vocabulary.words[i] if vocabulary else str(i) for i in entry.top_words]
                w.writerow([key, entry.provenance[1], f"{entry.fraction:.9f}", ";".join(words)])
