"""
Local topics on one segment
===========================

Sample a small planted corpus, train LDA on a single segment and look at
what came out.
"""

import numpy as np

from clda.corpus import split_corpus
from clda.gibbs_lda import SamplerConfig, train
from clda.metrics import greedy_match, top_words
from clda.synthetic import planted_corpus

pc = planted_corpus(num_topics=4, num_segments=2, num_docs=400, vocab_size=200, seed=3)
print(len(pc.corpus), "documents,", pc.corpus.num_tokens, "tokens")

first = split_corpus(pc.corpus)[0]
local = train(first, SamplerConfig(num_topics=4, iterations=300, seed=0))

# topics live on the segment's own vocabulary; lift them to global word ids
dense = np.zeros((local.num_topics, len(pc.corpus.vocabulary)))
dense[:, local.local_vocab] = local.topics

for k, topic in enumerate(dense):
    words = sorted(top_words(topic, 8).words, key=lambda w: -topic[w])
    print(k, " ".join(pc.corpus.vocabulary.words[w] for w in words))

report = greedy_match([top_words(t, 10) for t in dense], [top_words(p, 10) for p in pc.topics])
print(report.to_csv())
