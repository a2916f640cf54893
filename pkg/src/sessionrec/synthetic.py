"""Deterministic synthetic click streams for tests, demos, and smoke runs.

Two families:

* Chain corpora: a few item chains with a deterministic successor for every
  item. Any model that learns item-to-item transitions can drive next-click
  accuracy close to 1, which makes these good overfitting fixtures.
* Rotating-answer corpora: each group has one query item whose correct
  successor changes every era. A session is just (query, current answer), so
  the query alone is ambiguous across eras; only the most recent co-occurring
  sessions reveal the answer that is currently correct. Models that exploit
  retrieved neighbor sessions separate sharply from models that cannot.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Union

import numpy as np

from .corpus import (
    Event,
    SessionCorpus,
    filter_corpus,
    ingest_events,
    split_by_time,
)

BASE_TIME = 1_500_000_000
SESSION_SPACING = 60  # seconds between session starts


def chain_events(
    n_sessions: int = 200,
    n_chains: int = 3,
    chain_len: int = 10,
    min_len: int = 3,
    max_len: int = 8,
    seed: int = 7,
) -> list[Event]:
    """Sessions that walk one of ``n_chains`` circular item chains.

    Item keys look like "c2i7" (chain 2, position 7); the successor of c2i7 is
    always c2i8, wrapping at the chain end. Session starts are spaced a minute
    apart, clicks one second apart.
    """
    rng = np.random.default_rng(seed)
    events: list[Event] = []
    for s in range(n_sessions):
        chain = int(rng.integers(n_chains))
        start = int(rng.integers(chain_len))
        length = int(rng.integers(min_len, max_len + 1))
        t0 = BASE_TIME + s * SESSION_SPACING
        for j in range(length):
            item = f"c{chain}i{(start + j) % chain_len}"
            events.append(Event(f"s{s}", t0 + j, item))
    return events


def chain_corpus(
    n_sessions: int = 200,
    n_chains: int = 3,
    chain_len: int = 10,
    seed: int = 7,
) -> SessionCorpus:
    """Filtered, unsplit chain corpus (every session in the training partition)."""
    corpus = ingest_events(chain_events(n_sessions, n_chains, chain_len, seed=seed))
    return filter_corpus(corpus, min_support=5, min_len=2)


def rotating_answer_events(
    groups: int = 8,
    eras: int = 10,
    per_era: int = 6,
    test_per_group: int = 4,
    seed: int = 3,
) -> tuple[list[Event], int]:
    """Query/answer pairs whose answer rotates every era.

    Training sessions: for each era e and group g, ``per_era`` sessions
    [qg, a g/e]. Test sessions repeat the final era's pairing and sit at the
    end of the timeline. Returns (events, test_window_seconds) where the window
    isolates exactly the test block for :func:`split_by_time`.

    The seed only shuffles the interleaving of groups within each era; the
    query-to-answer mapping itself is fixed by construction.
    """
    rng = np.random.default_rng(seed)
    events: list[Event] = []
    n = 0

    def emit(key: str, query: str, answer: str) -> None:
        nonlocal n
        t0 = BASE_TIME + n * SESSION_SPACING
        events.append(Event(key, t0, query))
        events.append(Event(key, t0 + 1, answer))
        n += 1

    for era in range(eras):
        block = [(g, r) for g in range(groups) for r in range(per_era)]
        rng.shuffle(block)
        for g, r in block:
            emit(f"g{g}e{era}r{r}", f"q{g}", f"a{g}e{era}")
    n_test = groups * test_per_group
    for g in range(groups):
        for r in range(test_per_group):
            emit(f"tg{g}r{r}", f"q{g}", f"a{g}e{eras - 1}")
    test_window = n_test * SESSION_SPACING - SESSION_SPACING // 2
    return events, test_window


def rotating_answer_corpus(
    groups: int = 8,
    eras: int = 10,
    per_era: int = 6,
    test_per_group: int = 4,
    seed: int = 3,
) -> SessionCorpus:
    """Filtered and time-split rotating-answer corpus."""
    events, window = rotating_answer_events(groups, eras, per_era, test_per_group, seed)
    corpus = filter_corpus(ingest_events(events), min_support=5, min_len=2)
    return split_by_time(corpus, window)


def write_events_csv(events: list[Event], path: Union[str, Path]) -> None:
    """Write events as session,timestamp,item rows (the preprocess default layout)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for ev in events:
            writer.writerow([ev.session_key, ev.timestamp, ev.item_key])
