"""Clustered LDA: per-segment topic models merged into global topics by spherical k-means."""

__version__ = "0.1.0"

from .corpus import Corpus, Document, Vocabulary, build_vocabulary, encode, split_corpus, tokenize
from .gibbs_lda import LocalTopicSet, SamplerConfig, fold_in, train, train_sharded
from .merge import TopicMatrix, merge_all
from .spherical_kmeans import Clustering, kmeans, multi_restart
from .metrics import dice, greedy_match, jaccard, perplexity, top_words
from .dynamics import dynamics_report
from .pipeline import PipelineConfig, compare_models, run_pipeline, run_stage

__all__ = [
    "Corpus", "Document", "Vocabulary", "build_vocabulary", "encode", "split_corpus", "tokenize",
    "LocalTopicSet", "SamplerConfig", "fold_in", "train", "train_sharded",
    "TopicMatrix", "merge_all",
    "Clustering", "kmeans", "multi_restart",
    "dice", "greedy_match", "jaccard", "perplexity", "top_words",
    "dynamics_report",
    "PipelineConfig", "compare_models", "run_pipeline", "run_stage",
]
