"""Inverted-index retrieval of the sessions most similar to a prefix.

Similarity is the cosine between binary item-occurrence vectors: the number of
shared distinct items divided by sqrt(l(a) * l(b)), where l() is the distinct
item count by default (raw click count behind ``raw_length=True``). Recency is
session id order, since ids are assigned chronologically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import SessionCorpus
from .errors import RetrievalError

Neighbors = list[tuple[int, float]]
"""(session id, similarity) pairs, similarity descending, newer first on ties."""


@dataclass
class InvertedIndex:
    """Per-item posting lists over the training partition, newest session first."""

    postings: dict[int, list[int]]
    distinct: list[frozenset[int]]  # distinct items per session, indexed by id
    distinct_count: list[int]
    raw_len: list[int]
    start_time: list[int]

    def __len__(self) -> int:
        return len(self.distinct)


def build_index(corpus: SessionCorpus) -> InvertedIndex:
    """Index the training sessions of a corpus for candidate lookup."""
    postings: dict[int, list[int]] = {}
    distinct: list[frozenset[int]] = []
    distinct_count: list[int] = []
    raw_len: list[int] = []
    start_time: list[int] = []
    for s in corpus.train_sessions():
        items = frozenset(s.items)
        for item in sorted(items):
            postings.setdefault(item, []).append(s.id)
        distinct.append(items)
        distinct_count.append(len(items))
        raw_len.append(len(s.items))
        start_time.append(s.start_time)
    for lst in postings.values():
        lst.reverse()  # ids were appended chronologically; flip to newest-first
    return InvertedIndex(postings, distinct, distinct_count, raw_len, start_time)


def candidates(
    index: InvertedIndex,
    prefix: Sequence[int],
    m: int = 1000,
    now: Optional[int] = None,
) -> list[int]:
    """The ``m`` most recent indexed sessions sharing an item with the prefix.

    ``now`` restricts candidates to sessions starting strictly earlier; None
    means no time restriction (ad-hoc queries). Result is newest first.
    """
    if not prefix:
        raise RetrievalError("cannot retrieve candidates for an empty prefix")
    if m < 1:
        raise RetrievalError(f"candidate budget must be >= 1, got {m}")
    pool: set[int] = set()
    for item in dict.fromkeys(prefix):
        pool.update(index.postings.get(item, ()))
    eligible = sorted(pool, reverse=True)
    if now is not None:
        eligible = [sid for sid in eligible if index.start_time[sid] < now]
    return eligible[:m]


def similarity(
    a: Sequence[int], b: Sequence[int], raw_length: bool = False
) -> float:
    """Cosine similarity between the binary item vectors of two click sequences."""
    if not a or not b:
        raise RetrievalError("similarity of an empty sequence is undefined")
    da, db = set(a), set(b)
    shared = len(da & db)
    if shared == 0:
        return 0.0
    la = len(a) if raw_length else len(da)
    lb = len(b) if raw_length else len(db)
    return shared / math.sqrt(la * lb)


def neighbors(
    index: InvertedIndex,
    prefix: Sequence[int],
    k: int = 120,
    threshold: float = 0.5,
    m: int = 1000,
    now: Optional[int] = None,
    raw_length: bool = False,
) -> Neighbors:
    """Top-k most similar past sessions for a prefix.

    Candidates come from :func:`candidates`; sessions below the similarity
    threshold are discarded; the survivors are ranked by similarity with ties
    going to the more recent session, and the best ``k`` are returned.
    """
    if k < 1:
        raise RetrievalError(f"neighbor count must be >= 1, got {k}")
    if not 0.0 <= threshold <= 1.0:
        raise RetrievalError(f"threshold must be in [0, 1], got {threshold}")
    query = set(prefix)
    lq = len(prefix) if raw_length else len(query)
    scored: Neighbors = []
    for sid in candidates(index, prefix, m=m, now=now):
        shared = len(query & index.distinct[sid])
        ls = index.raw_len[sid] if raw_length else index.distinct_count[sid]
        sim = shared / math.sqrt(lq * ls)
        if sim >= threshold:
            scored.append((sid, sim))
    scored.sort(key=lambda t: (-t[1], -t[0]))
    return scored[:k]
