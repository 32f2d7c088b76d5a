"""
From local topics to global topics
==================================

Train every segment separately, pool the topics and cluster them.
"""

from clda.corpus import split_corpus
from clda.gibbs_lda import SamplerConfig, train
from clda.merge import merge_all
from clda.metrics import greedy_match, top_words
from clda.spherical_kmeans import multi_restart
from clda.synthetic import planted_corpus

pc = planted_corpus(num_topics=6, num_segments=8, num_docs=2000, vocab_size=500, seed=0)
W = len(pc.corpus.vocabulary)

locals_ = [train(sub, SamplerConfig(10, iterations=500, seed=i))
           for i, sub in enumerate(split_corpus(pc.corpus))]

pooled = merge_all(locals_, W)      # 80 unit-length rows
print(pooled.rows.shape, pooled.provenance[:3])

clustering = multi_restart(pooled, 6, restarts=10, seed=0)
print("objective", round(clustering.objective, 4), "after", clustering.n_iter, "steps")
for g in range(6):
    print(g, len(clustering.members(g)), "local topics")

report = greedy_match([top_words(c, 10) for c in clustering.centroids],
                      [top_words(p, 10) for p in pc.topics])
print("mean jaccard vs planted topics:", round(report.mean_jaccard(), 3))
