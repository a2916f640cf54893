"""Ranking metrics and evaluation drivers for models and baselines.

Scores are turned into 1-based ranks with a deterministic tie rule: an item
beats the target only with a strictly higher score, and among equal scores the
lower item index wins. Recall@N counts ranks within the cutoff; MRR@N averages
reciprocal ranks, zero beyond the cutoff.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .baselines import ItemKnn, pop_scores, sknn_scores
from .corpus import SessionCorpus, TrainingExample, augment
from .errors import ConfigError
from .model import ModelConfig, ModelParams, forward
from .neighbors import InvertedIndex, build_index, neighbors

BASELINES = ("pop", "sknn", "itemknn")


@dataclass
class RetrievalConfig:
    """Neighbor search knobs shared by training and evaluation."""

    k: int = 120
    threshold: float = 0.5
    m: int = 1000
    raw_length: bool = False


@dataclass
class EvalReport:
    """Recall@N and MRR@N over a set of prediction cases."""

    cases: int
    recall: dict[int, float]
    mrr: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "cases": self.cases,
            "recall": {str(n): v for n, v in self.recall.items()},
            "mrr": {str(n): v for n, v in self.mrr.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def rank_of(scores: np.ndarray, target: int) -> int:
    """1-based rank of the target under the deterministic tie rule."""
    t = scores[target]
    better = int(np.count_nonzero(scores > t))
    tied_before = int(np.count_nonzero(scores[:target] == t))
    return 1 + better + tied_before


def report_from_ranks(
    ranks: Sequence[Optional[int]], cutoffs: Sequence[int] = (5, 10)
) -> EvalReport:
    """Aggregate ranks (None = miss, e.g. no neighbors to score with)."""
    if not ranks:
        raise ConfigError("cannot build a report from zero cases")
    recall: dict[int, float] = {}
    mrr: dict[int, float] = {}
    n = len(ranks)
    for cutoff in cutoffs:
        hits = 0
        rr = 0.0
        for r in ranks:
            if r is not None and r <= cutoff:
                hits += 1
                rr += 1.0 / r
        recall[cutoff] = hits / n
        mrr[cutoff] = rr / n
    return EvalReport(cases=n, recall=recall, mrr=mrr)


def _collect_ranks(
    cases: Sequence[TrainingExample],
    score_one: Callable[[TrainingExample], Optional[np.ndarray]],
    threads: int = 1,
) -> list[Optional[int]]:
    """Rank every case; cases are independent, so threads only change speed."""
    def rank_case(ex: TrainingExample) -> Optional[int]:
        scores = score_one(ex)
        if scores is None:
            return None
        return rank_of(scores, ex.label)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(rank_case, cases))
    return [rank_case(ex) for ex in cases]


def test_examples(corpus: SessionCorpus) -> list[TrainingExample]:
    """Every (prefix, next item) prediction case in the test partition."""
    out: list[TrainingExample] = []
    for s in corpus.test_sessions():
        out.extend(augment(s))
    return out


def evaluate_model(
    params: ModelParams,
    config: ModelConfig,
    corpus: SessionCorpus,
    retrieval: RetrievalConfig = RetrievalConfig(),
    cutoffs: Sequence[int] = (5, 10),
    threads: int = 1,
    index: Optional[InvertedIndex] = None,
    cases: Optional[Sequence[TrainingExample]] = None,
) -> EvalReport:
    """Next-item metrics for a trained model over the corpus test partition.

    Neighbor retrieval searches the training partition only, with each case's
    session start time as "now". Pass ``cases`` to evaluate a custom case list
    (the trainer's validation split does).
    """
    if index is None:
        index = build_index(corpus)
    if cases is None:
        cases = test_examples(corpus)
    if not cases:
        raise ConfigError("no test cases to evaluate")

    def score_one(ex: TrainingExample) -> np.ndarray:
        nbrs = neighbors(
            index,
            ex.prefix,
            k=retrieval.k,
            threshold=retrieval.threshold,
            m=retrieval.m,
            now=ex.start_time,
            raw_length=retrieval.raw_length,
        )
        sessions = [corpus.sessions[sid] for sid, _ in nbrs]
        yhat, _ = forward(ex.prefix, sessions, params, config)
        return yhat.values

    return report_from_ranks(_collect_ranks(cases, score_one, threads), cutoffs)


def evaluate_baseline(
    name: str,
    corpus: SessionCorpus,
    retrieval: RetrievalConfig = RetrievalConfig(),
    cutoffs: Sequence[int] = (5, 10),
    threads: int = 1,
    cases: Optional[Sequence[TrainingExample]] = None,
) -> EvalReport:
    """Next-item metrics for one of the reference baselines.

    "pop" ranks by training click counts, "sknn" by neighbor-similarity sums
    (a case with no neighbors counts as a miss), "itemknn" by item-to-item
    cosine against the prefix's final click.
    """
    if name not in BASELINES:
        raise ConfigError(f"unknown baseline {name!r}, expected one of {BASELINES}")
    if cases is None:
        cases = test_examples(corpus)
    if not cases:
        raise ConfigError("no test cases to evaluate")

    if name == "pop":
        static = pop_scores(corpus)
        score_one = lambda ex: static
    elif name == "itemknn":
        knn = ItemKnn(corpus)
        score_one = lambda ex: knn.scores(ex.prefix)
    else:
        index = build_index(corpus)
        n_items = len(corpus.vocab)

        def score_one(ex: TrainingExample) -> Optional[np.ndarray]:
            nbrs = neighbors(
                index,
                ex.prefix,
                k=retrieval.k,
                threshold=retrieval.threshold,
                m=retrieval.m,
                now=ex.start_time,
                raw_length=retrieval.raw_length,
            )
            if not nbrs:
                return None
            return sknn_scores(nbrs, index, n_items)

    return report_from_ranks(_collect_ranks(cases, score_one, threads), cutoffs)
