#!/usr/bin/env python3
"""Retrieve similar past sessions and score items the k-NN way.

Similarity between a session prefix and a past session is the cosine over
binary item-presence vectors: shared / sqrt(|prefix| * |past|), counting
distinct items. Candidates come from an inverted index, newest first, and a
0.5 floor keeps only genuinely overlapping sessions.
"""

import numpy as np

from sessionrec import Event, build_index, ingest_events, neighbors, sknn_scores

rng = np.random.default_rng(1)

# Synthesize a browsing log with two taste clusters. Shoppers 0..39 mostly
# click items 0..9, shoppers 40..79 mostly items 10..19.
events = []
for sid in range(80):
    base = 0 if sid < 40 else 10
    length = int(rng.integers(2, 6))
    items = base + rng.integers(0, 10, size=length)
    for j, item in enumerate(items):
        events.append(Event(f"u{sid}", 1000 + sid * 30 + j, f"p{item}"))

corpus = ingest_events(events)
index = build_index(corpus)
print(f"{len(corpus.sessions)} sessions, {len(corpus.vocab)} items")

# A fresh visitor clicks two items from the first cluster.
prefix = [corpus.vocab.index("p3"), corpus.vocab.index("p7")]

found = neighbors(index, prefix, k=5, threshold=0.3)
print("\ntop neighbors for [p3, p7]:")
for sid, sim in found:
    session = corpus.sessions[sid]
    keys = [corpus.vocab.key(i) for i in session.items]
    print(f"  session {sid} sim={sim:.3f} items={keys}")

# Every neighbor votes for the items it contains, weighted by similarity.
scores = sknn_scores(found, index, len(corpus.vocab))
ranked = np.argsort(-scores)
print("\nk-NN recommendations:")
for item in ranked[:5]:
    if scores[item] == 0:
        break
    print(f"  {corpus.vocab.key(item)}  score={scores[item]:.3f}")

# The similarity floor and the recency cutoff both shrink the pool.
strict = neighbors(index, prefix, k=5, threshold=0.9)
early = neighbors(index, prefix, k=5, threshold=0.3, now=1600)
print(f"\nwith threshold 0.9: {len(strict)} neighbors")
print(f"restricted to sessions before t=1600: {len(early)} neighbors")
assert all(corpus.sessions[sid].start_time < 1600 for sid, _ in early)
