"""
Topic dynamics across segments
==============================

Plant topics that only exist in some segments and watch them appear and
disappear in the report.
"""

import numpy as np

from clda.corpus import split_corpus
from clda.dynamics import dynamics_report
from clda.gibbs_lda import SamplerConfig, train
from clda.merge import merge_all
from clda.spherical_kmeans import multi_restart
from clda.synthetic import planted_corpus

# topic 3 is born in segment 2 and dies after segment 4
presence = np.ones((6, 4), dtype=bool)
presence[[0, 1, 5], 3] = False
pc = planted_corpus(num_topics=4, num_segments=6, num_docs=1200, vocab_size=300,
                    presence=presence, seed=7)

locals_ = [train(sub, SamplerConfig(6, iterations=300, seed=i))
           for i, sub in enumerate(split_corpus(pc.corpus))]
clustering = multi_restart(merge_all(locals_, 300), 4, restarts=10)
report = dynamics_report(clustering, locals_)

np.set_printoptions(precision=2, suppress=True)
print(report.proportions)
for g, span in report.lifespans.items():
    print(g, "birth", span.birth, "death", span.death, "absent", span.absent)
