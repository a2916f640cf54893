"""Command-line front end.

One executable, six subcommands: preprocess, neighbors, graph, train, evaluate,
recommend. Results go to stdout as JSON; diagnostics go to stderr. Exit codes:
0 success, 1 usage error, 2 runtime failure. Settings resolve with CLI flags
beating a --config JSON file beating built-in defaults, and every command that
writes an output directory drops the resolved configuration next to its
outputs as run_config.json.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from . import gradkit as gk
from .corpus import (
    SessionCorpus,
    drop_unseen_test_sessions,
    filter_corpus,
    ingest_events,
    load_corpus,
    read_events_csv,
    save_corpus,
    split_by_time,
    take_recent_fraction,
)
from .errors import ConfigError, SessionRecError
from .evaluation import (
    BASELINES,
    RetrievalConfig,
    evaluate_baseline,
    evaluate_model,
)
from .graphs import build_inter_graph, build_intra_graph
from .model import (
    LOSS_FORMS,
    VARIANTS,
    ModelConfig,
    bind_params,
    forward,
)
from .neighbors import build_index, neighbors
from .training import TrainConfig, train

DATA_DIR_ENV = "SESSIONREC_DATA"
RUN_CONFIG_FILENAME = "run_config.json"


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2 for runtime
        raise UsageError(message)


@dataclass
class RunConfig:
    """Every tunable, flattened; the serialized form of a run's settings."""

    # model architecture
    dim: int = 100
    heads: int = 8
    gat_layers: int = 2
    ggnn_steps: int = 1
    variant: str = "full"
    leaky_slope: float = 0.2
    loss_form: str = "binary_ce"
    share_readout: bool = False
    separate_embeddings: bool = False
    # optimization
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 0.1
    intra_decay_every: int = 3
    inter_decay_every: int = 5
    patience: int = 3
    val_fraction: float = 0.05
    # neighbor retrieval
    k: int = 120
    threshold: float = 0.5
    m: int = 1000
    raw_length: bool = False
    # preprocessing
    min_support: int = 5
    min_len: int = 2
    test_window: int = 86400
    fraction: Optional[str] = None
    # global
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            dim=self.dim,
            heads=self.heads,
            gat_layers=self.gat_layers,
            ggnn_steps=self.ggnn_steps,
            variant=self.variant,
            leaky_slope=self.leaky_slope,
            loss_form=self.loss_form,
            share_readout=self.share_readout,
            separate_embeddings=self.separate_embeddings,
        )

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            lr_decay=self.lr_decay,
            intra_decay_every=self.intra_decay_every,
            inter_decay_every=self.inter_decay_every,
            k=self.k,
            threshold=self.threshold,
            m=self.m,
            raw_length=self.raw_length,
            seed=self.seed,
            patience=self.patience,
            val_fraction=self.val_fraction,
        )

    def to_retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(
            k=self.k, threshold=self.threshold, m=self.m, raw_length=self.raw_length
        )


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overlaid by the --config file, overlaid by explicit flags."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from None
        if isinstance(doc, dict) and isinstance(doc.get("config"), dict):
            doc = doc["config"]  # accept a previously written run_config.json
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in doc.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def write_run_config(directory: Path, command: str, cfg: RunConfig, paths: dict) -> None:
    doc = {"command": command, "paths": paths, "config": cfg.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    (directory / RUN_CONFIG_FILENAME).write_text(text, encoding="utf-8")


def _corpus_dir(args: argparse.Namespace) -> Path:
    if getattr(args, "corpus", None):
        return Path(args.corpus)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise UsageError(f"--corpus is required (or set {DATA_DIR_ENV})")


def _parse_session_arg(text: str) -> list[str]:
    keys = [part.strip() for part in text.split(",") if part.strip()]
    if not keys:
        raise UsageError("--session must list at least one item key")
    return keys


def _map_keys(corpus: SessionCorpus, keys: list[str]) -> list[int]:
    return [corpus.vocab.index(k) for k in keys]


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# ---------------------------------------------------------------- subcommands


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    events = read_events_csv(
        args.input,
        delimiter=args.delimiter,
        session_col=args.session_col,
        time_col=args.time_col,
        item_col=args.item_col,
        skip_header=args.skip_header,
    )
    corpus = ingest_events(events)
    corpus = filter_corpus(corpus, min_support=cfg.min_support, min_len=cfg.min_len)
    window = cfg.test_window
    if args.test_days is not None:
        window = int(args.test_days * 86400)
        cfg.test_window = window
    corpus = split_by_time(corpus, window)
    if cfg.fraction:
        corpus = take_recent_fraction(corpus, cfg.fraction)
        corpus = drop_unseen_test_sessions(corpus)
    corpus.validate()
    out = Path(args.output)
    save_corpus(corpus, out)
    write_run_config(out, "preprocess", cfg, {"input": str(args.input), "output": str(out)})
    _emit(
        {
            "sessions": len(corpus.sessions),
            "train_sessions": corpus.train_count,
            "test_sessions": len(corpus.sessions) - corpus.train_count,
            "items": len(corpus.vocab),
            "output": str(out),
        }
    )
    return 0


def cmd_neighbors(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = load_corpus(_corpus_dir(args))
    prefix = _map_keys(corpus, _parse_session_arg(args.session))
    index = build_index(corpus)
    found = neighbors(
        index,
        prefix,
        k=cfg.k,
        threshold=cfg.threshold,
        m=cfg.m,
        raw_length=cfg.raw_length,
    )
    _emit([{"session": sid, "similarity": sim} for sid, sim in found])
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    keys = _parse_session_arg(args.session)
    corpus = None
    if args.with_neighbors or getattr(args, "corpus", None) or os.environ.get(DATA_DIR_ENV):
        if args.with_neighbors:
            corpus = load_corpus(_corpus_dir(args))
        elif getattr(args, "corpus", None):
            corpus = load_corpus(Path(args.corpus))
    if corpus is not None:
        prefix = _map_keys(corpus, keys)
        name_of = corpus.vocab.key
    else:
        local: dict[str, int] = {}
        for key in keys:
            local.setdefault(key, len(local))
        prefix = [local[key] for key in keys]
        names = list(local)
        name_of = lambda i: names[i]

    neighbor_sessions = []
    if args.with_neighbors:
        index = build_index(corpus)
        found = neighbors(
            index, prefix, k=cfg.k, threshold=cfg.threshold, m=cfg.m,
            raw_length=cfg.raw_length,
        )
        neighbor_sessions = [corpus.sessions[sid] for sid, _ in found]

    intra = build_intra_graph(prefix)
    inter = build_inter_graph(prefix, neighbor_sessions)
    _emit(
        {
            "intra": {
                "nodes": [name_of(i) for i in intra.node_items],
                "a_out": intra.a_out.tolist(),
                "a_in": intra.a_in.tolist(),
                "alias": intra.alias,
                "last_slot": intra.last_slot,
            },
            "inter": {
                "nodes": [name_of(i) for i in inter.node_items],
                "adjacency": inter.adjacency,
                "session_slots": inter.session_slots,
                "last_slot": inter.last_slot,
            },
        }
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = load_corpus(_corpus_dir(args))
    model_config = cfg.to_model_config(len(corpus.vocab))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run_config(out, "train", cfg, {"corpus": str(_corpus_dir(args)), "out": str(out)})
    result = train(corpus, model_config, cfg.to_train_config(), out_dir=out)
    _emit(
        {
            "epochs_run": len(result.history),
            "final_loss": result.final_loss,
            "checkpoints": [p.name for p in result.checkpoints],
            "out": str(out),
        }
    )
    return 0


def _parse_cutoffs(text: str) -> list[int]:
    try:
        cutoffs = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--at expects comma-separated integers, got {text!r}") from None
    if not cutoffs or any(c < 1 for c in cutoffs):
        raise UsageError("--at cutoffs must be positive")
    return cutoffs


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = load_corpus(_corpus_dir(args))
    cutoffs = _parse_cutoffs(args.at)
    if args.baseline is None and args.checkpoint is None:
        raise UsageError("evaluate needs --checkpoint or --baseline")

    if args.baseline is not None:
        report = evaluate_baseline(
            args.baseline, corpus, cfg.to_retrieval(), cutoffs, threads=cfg.threads
        )
    else:
        store, meta = gk.load_params(args.checkpoint)
        model_config = ModelConfig.from_dict(meta.get("model", {}))
        if model_config.vocab_size != len(corpus.vocab):
            raise ConfigError(
                "checkpoint was trained on a different vocabulary "
                f"({model_config.vocab_size} items vs {len(corpus.vocab)})"
            )
        params = bind_params(store, model_config)
        retrieval = cfg.to_retrieval()
        saved = meta.get("retrieval")
        if saved and not _retrieval_flags_given(args):
            retrieval = RetrievalConfig(**saved)
        report = evaluate_model(
            params, model_config, corpus, retrieval, cutoffs, threads=cfg.threads
        )

    payload = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        write_run_config(out, "evaluate", cfg, {"corpus": str(_corpus_dir(args))})
    _emit(payload)
    return 0


def _retrieval_flags_given(args: argparse.Namespace) -> bool:
    return any(
        getattr(args, name, None) is not None
        for name in ("k", "threshold", "m", "raw_length")
    )


def cmd_recommend(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus_dir = None
    if getattr(args, "corpus", None) or os.environ.get(DATA_DIR_ENV):
        corpus_dir = _corpus_dir(args)
    else:
        sibling = Path(args.checkpoint).parent / RUN_CONFIG_FILENAME
        if sibling.exists():
            doc = json.loads(sibling.read_text(encoding="utf-8"))
            stored = doc.get("paths", {}).get("corpus")
            if stored:
                corpus_dir = Path(stored)
    if corpus_dir is None:
        raise UsageError("--corpus is required (no run_config.json next to checkpoint)")
    corpus = load_corpus(corpus_dir)

    store, meta = gk.load_params(args.checkpoint)
    model_config = ModelConfig.from_dict(meta.get("model", {}))
    if model_config.vocab_size != len(corpus.vocab):
        raise ConfigError("checkpoint vocabulary does not match the corpus")
    params = bind_params(store, model_config)
    retrieval = cfg.to_retrieval()
    saved = meta.get("retrieval")
    if saved and not _retrieval_flags_given(args):
        retrieval = RetrievalConfig(**saved)

    prefix = _map_keys(corpus, _parse_session_arg(args.session))
    index = build_index(corpus)
    found = neighbors(
        index, prefix, k=retrieval.k, threshold=retrieval.threshold,
        m=retrieval.m, raw_length=retrieval.raw_length,
    )
    sessions = [corpus.sessions[sid] for sid, _ in found]
    yhat, _ = forward(prefix, sessions, params, model_config)
    scores = yhat.values
    # stable ranking: probability descending, item index ascending on ties
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[: args.top]
    _emit([{"item": corpus.vocab.key(i), "score": float(scores[i])} for i in order])
    return 0


# ------------------------------------------------------------------- parsing


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--config", default=None, help="JSON config file")

    retrieval = _Parser(add_help=False)
    retrieval.add_argument("--k", type=int, default=None, help="neighbors to keep")
    retrieval.add_argument("--threshold", type=float, default=None, help="similarity floor")
    retrieval.add_argument("--m", type=int, default=None, help="candidate budget")
    retrieval.add_argument(
        "--raw-length", dest="raw_length", action="store_const", const=True,
        default=None, help="use raw click counts in the similarity denominator",
    )

    parser = _Parser(prog="sessionrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser(
        "preprocess", parents=[common],
        help="events file -> filtered, time-split corpus directory",
    )
    p.add_argument("--input", required=True, help="CSV/TSV events file")
    p.add_argument("--output", required=True, help="corpus output directory")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--session-col", type=int, default=0)
    p.add_argument("--time-col", type=int, default=1)
    p.add_argument("--item-col", type=int, default=2)
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--min-support", dest="min_support", type=int, default=None)
    p.add_argument("--min-len", dest="min_len", type=int, default=None)
    p.add_argument("--test-window", dest="test_window", type=int, default=None,
                   help="test window in seconds")
    p.add_argument("--test-days", type=float, default=None,
                   help="test window in days (overrides --test-window)")
    p.add_argument("--fraction", default=None,
                   help='keep only this fraction of recent training sessions, e.g. "1/4"')
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser(
        "neighbors", parents=[common, retrieval],
        help="retrieve the most similar past sessions for an ad-hoc session",
    )
    p.add_argument("--corpus", default=None, help="corpus directory")
    p.add_argument("--session", required=True, help="comma-separated item keys")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser(
        "graph", parents=[common, retrieval],
        help="print a session's graphs as JSON",
    )
    p.add_argument("--corpus", default=None, help="corpus directory")
    p.add_argument("--session", required=True, help="comma-separated item keys")
    p.add_argument("--with-neighbors", action="store_true",
                   help="include retrieved neighbors in the undirected graph")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser(
        "train", parents=[common, retrieval],
        help="fit the model and write per-epoch checkpoints",
    )
    p.add_argument("--corpus", default=None, help="corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--dim", type=int, default=None, help="embedding width")
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--gat-layers", dest="gat_layers", type=int, default=None)
    p.add_argument("--ggnn-steps", dest="ggnn_steps", type=int, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--loss-form", dest="loss_form", choices=LOSS_FORMS, default=None)
    p.add_argument("--patience", type=int, default=None,
                   help="early-stop patience in epochs (0 disables)")
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "evaluate", parents=[common, retrieval],
        help="next-item metrics for a checkpoint or a baseline",
    )
    p.add_argument("--corpus", default=None, help="corpus directory")
    p.add_argument("--checkpoint", default=None, help="checkpoint file")
    p.add_argument("--baseline", choices=BASELINES, default=None)
    p.add_argument("--at", default="5,10", help="metric cutoffs, e.g. 5,10")
    p.add_argument("--out", default=None, help="also write report.json here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "recommend", parents=[common, retrieval],
        help="rank items for an ad-hoc session with a trained checkpoint",
    )
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--session", required=True, help="comma-separated item keys")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--corpus", default=None, help="corpus directory")
    p.set_defaults(func=cmd_recommend)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SessionRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
