"""Mini-batch Adam training with two learning-rate schedules.

Parameters feeding the neighbor (graph attention) branch decay their learning
rate every five epochs; everything else (embeddings, transition encoder,
fusion, readouts on the intra side) decays every three. Examples are shuffled
with a seeded generator and batched by prefix length, gradients are averaged
over each batch, and a checkpoint plus one JSON log line is written per epoch.
Early stopping watches Recall@10 on the most recent slice of the training
sessions.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import gradkit as gk
from .corpus import SessionCorpus, TrainingExample, augment
from .errors import NumericsError, TrainingError
from .evaluation import RetrievalConfig, evaluate_model
from .model import ModelConfig, ModelParams, build_params, forward, loss
from .neighbors import InvertedIndex, Neighbors, build_index, neighbors

logger = logging.getLogger(__name__)

LOG_FILENAME = "log.jsonl"


@dataclass
class TrainConfig:
    """Optimization and retrieval knobs; defaults follow the reference setup."""

    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 0.1
    intra_decay_every: int = 3
    inter_decay_every: int = 5
    k: int = 120
    threshold: float = 0.5
    m: int = 1000
    raw_length: bool = False
    seed: int = 0
    patience: int = 3
    val_fraction: float = 0.05

    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(
            k=self.k, threshold=self.threshold, m=self.m, raw_length=self.raw_length
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainResult:
    params: ModelParams
    model_config: ModelConfig
    history: list[dict]
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.history[-1]["loss"]


def group_learning_rates(config: TrainConfig, epoch: int) -> dict[str, float]:
    """Learning rate per parameter group at a 0-based epoch index."""
    return {
        "intra_shared": config.lr * config.lr_decay ** (epoch // config.intra_decay_every),
        "inter": config.lr * config.lr_decay ** (epoch // config.inter_decay_every),
    }


def precompute_neighbors(
    index: InvertedIndex,
    examples: list[TrainingExample],
    retrieval: RetrievalConfig,
) -> dict[tuple[int, int], Neighbors]:
    """Retrieve neighbors once per (session, prefix length) pair.

    The source session's start time is "now", so an example can only retrieve
    sessions that began strictly earlier: no peeking forward in time, and a
    session never retrieves itself.
    """
    cache: dict[tuple[int, int], Neighbors] = {}
    for ex in examples:
        key = (ex.session_id, len(ex.prefix))
        if key not in cache:
            cache[key] = neighbors(
                index,
                ex.prefix,
                k=retrieval.k,
                threshold=retrieval.threshold,
                m=retrieval.m,
                now=ex.start_time,
                raw_length=retrieval.raw_length,
            )
    return cache


def _length_bucketed_batches(
    examples: list[TrainingExample],
    order: np.ndarray,
    batch_size: int,
    rng: np.random.Generator,
) -> list[list[int]]:
    """Chunk a shuffled example order into batches of uniform prefix length."""
    buckets: dict[int, list[int]] = {}
    for idx in order:
        buckets.setdefault(len(examples[idx].prefix), []).append(int(idx))
    batches: list[list[int]] = []
    for length in sorted(buckets):
        bucket = buckets[length]
        for i in range(0, len(bucket), batch_size):
            batches.append(bucket[i : i + batch_size])
    return [batches[i] for i in rng.permutation(len(batches))]


def train(
    corpus: SessionCorpus,
    model_config: ModelConfig,
    config: TrainConfig = TrainConfig(),
    out_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """Fit the model on the corpus training partition.

    Returns the trained parameters and per-epoch history. When ``out_dir`` is
    given, writes ``epoch_<n>.ckpt`` checkpoints and appends one line per epoch
    to ``log.jsonl`` (epoch, mean loss, group learning rates, validation
    Recall@10 when measured, wall time).
    """
    model_config.validate()
    if model_config.vocab_size != len(corpus.vocab):
        raise TrainingError(
            f"model vocab_size {model_config.vocab_size} != corpus items {len(corpus.vocab)}"
        )
    train_sessions = corpus.train_sessions()
    if not train_sessions:
        raise TrainingError("corpus has no training sessions")

    n_val = int(len(train_sessions) * config.val_fraction) if config.patience > 0 else 0
    fit_sessions = train_sessions[: len(train_sessions) - n_val]
    val_sessions = train_sessions[len(train_sessions) - n_val :]
    if not fit_sessions:
        raise TrainingError("validation split left no sessions to fit on")

    fit_examples: list[TrainingExample] = []
    for s in fit_sessions:
        fit_examples.extend(augment(s))
    if not fit_examples:
        raise TrainingError("no training examples after augmentation")
    val_examples: list[TrainingExample] = []
    for s in val_sessions:
        val_examples.extend(augment(s))

    retrieval = config.retrieval()
    index = build_index(corpus)
    cache = precompute_neighbors(index, fit_examples + val_examples, retrieval)

    params = build_params(model_config, config.seed)
    store = params.store
    names = store.names()
    tensors = store.tensors()
    rng = np.random.default_rng(config.seed)

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / LOG_FILENAME).write_text("", encoding="utf-8")

    history: list[dict] = []
    checkpoints: list[Path] = []
    best_val = -np.inf
    stale = 0
    for epoch in range(config.epochs):
        started = time.perf_counter()
        lrs = group_learning_rates(config, epoch)
        order = rng.permutation(len(fit_examples))
        batches = _length_bucketed_batches(fit_examples, order, config.batch_size, rng)

        loss_sum = 0.0
        for batch_no, batch in enumerate(batches):
            grads = {name: np.zeros_like(t.values) for name, t in store.items()}
            for idx in batch:
                ex = fit_examples[idx]
                nbr_sessions = [
                    corpus.sessions[sid]
                    for sid, _ in cache[(ex.session_id, len(ex.prefix))]
                ]
                try:
                    yhat, _ = forward(ex.prefix, nbr_sessions, params, model_config)
                    objective = loss(yhat, ex.label, model_config.loss_form)
                    example_grads = gk.backward(objective, wrt=tensors)
                except NumericsError as exc:
                    raise TrainingError(
                        f"non-finite value at epoch {epoch}, batch {batch_no}, "
                        f"session {ex.session_id}: {exc}"
                    ) from exc
                loss_sum += objective.item()
                for name, g in zip(names, example_grads):
                    grads[name] += g
            scale = 1.0 / len(batch)
            for name in names:
                grads[name] *= scale
            gk.adam_step(store, grads, lrs)

        mean_loss = loss_sum / len(fit_examples)
        entry = {
            "epoch": epoch,
            "loss": mean_loss,
            "lr_intra_shared": lrs["intra_shared"],
            "lr_inter": lrs["inter"],
            "val_recall10": None,
        }

        if val_examples:
            val_report = evaluate_model(
                params,
                model_config,
                corpus,
                retrieval,
                cutoffs=(10,),
                index=index,
                cases=val_examples,
            )
            entry["val_recall10"] = val_report.recall[10]

        entry["wall_time"] = time.perf_counter() - started
        history.append(entry)
        logger.info(
            "epoch %d loss %.6f lr %.2g/%.2g val_recall10 %s",
            epoch, mean_loss, lrs["intra_shared"], lrs["inter"], entry["val_recall10"],
        )

        if out_path is not None:
            ckpt = out_path / f"epoch_{epoch}.ckpt"
            gk.save_params(
                ckpt,
                store,
                meta={
                    "model": model_config.to_dict(),
                    "retrieval": {
                        "k": config.k,
                        "threshold": config.threshold,
                        "m": config.m,
                        "raw_length": config.raw_length,
                    },
                    "epoch": epoch,
                    "seed": config.seed,
                },
            )
            checkpoints.append(ckpt)
            with open(out_path / LOG_FILENAME, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

        if val_examples:
            if entry["val_recall10"] > best_val:
                best_val = entry["val_recall10"]
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    logger.info("early stop at epoch %d (stagnant validation)", epoch)
                    break

    return TrainResult(params, model_config, history, checkpoints)
