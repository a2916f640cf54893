#!/usr/bin/env python3
"""Turn a raw click log into a filtered, time-split corpus."""

import tempfile
from pathlib import Path

from sessionrec import Event, augment, filter_corpus, ingest_events, split_by_time
from sessionrec.corpus import load_corpus, save_corpus

# A tiny click log. Three shoppers, one of them comes back twice.
raw = [
    ("alice", 100, "boots"),
    ("alice", 104, "socks"),
    ("alice", 110, "boots"),
    ("bob", 200, "socks"),
    ("bob", 203, "laces"),
    ("bob", 207, "boots"),
    ("carol", 460, "laces"),
    ("carol", 462, "socks"),
    ("alice2", 520, "boots"),
    ("alice2", 523, "wax"),     # wax is clicked once; the support filter will drop it
    ("alice2", 527, "socks"),
]
events = [Event(s, t, i) for s, t, i in raw]

corpus = ingest_events(events)
print(f"ingested: {len(corpus.sessions)} sessions over {len(corpus.vocab)} items")

# Drop rare items and the sessions that collapse below two clicks.
corpus = filter_corpus(corpus, min_support=2, min_len=2)
print(f"after filtering: {len(corpus.sessions)} sessions over {len(corpus.vocab)} items")
print("item frequencies:", dict(zip(corpus.vocab.keys, corpus.vocab.counts)))

# Hold out everything that starts in the last 100 seconds of the log.
corpus = split_by_time(corpus, test_window=100)
print(f"train={len(corpus.train_sessions())} test={len(corpus.test_sessions())}")

# Each session expands into every (prefix, next item) pair for training.
for session in corpus.train_sessions():
    keys = [corpus.vocab.key(i) for i in session.items]
    print(f"session {session.id} {keys}")
    for example in augment(session):
        prefix = [corpus.vocab.key(i) for i in example.prefix]
        print(f"   {prefix} -> {corpus.vocab.key(example.label)}")

# The corpus round-trips through a directory: a binary session file plus
# a JSON vocabulary you can read with your eyes.
with tempfile.TemporaryDirectory() as td:
    save_corpus(corpus, td)
    again = load_corpus(td)
    print("saved files:", sorted(p.name for p in Path(td).iterdir()))
    assert len(again.sessions) == len(corpus.sessions)
    print("reloaded ok")
