"""
Topics from a planted corpus
============================

Users are generated from five topics with disjoint vocabularies. A collapsed
Gibbs sampler recovers them, and a held-out user's mixture is inferred
against the frozen model.
"""

import numpy as np

from psyling import lda
from psyling.corpus import Corpus
from psyling.synthetic import planted_topic_corpus

pc = planted_topic_corpus(n_users=200, n_topics=5, doc_length=120, seed=3)
corpus = pc.corpus()
train_docs, held_out = Corpus(corpus.documents[:-1]), corpus.documents[-1]

model, dists = lda.train(train_docs, K=5, iterations=300, seed=0)

# every learned topic should be dominated by a single planted prefix t0..t4
for k in range(model.K):
    print(k, lda.top_words(model, k, 6))

# map each learned topic to the planted topic named by its top word
planted_of = [int(lda.top_words(model, k, 1)[0][1]) for k in range(model.K)]

# inferred mixture for the unseen user versus the mixture that generated it
theta = lda.infer(model, held_out, iterations=200, burn_in=100, seed=1).theta
print("inferred ", np.round(theta, 2))
print("generated", np.round(pc.theta[-1][planted_of], 2))
