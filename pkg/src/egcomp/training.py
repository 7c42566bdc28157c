"""Self-supervised sample construction and the mini-batch training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import EventGraph
from .matching import match
from .metrics import roc_auc
from .network import log_probabilities

logger = logging.getLogger(__name__)

BALANCE_MODES = ("none", "downsample")


@dataclass(frozen=True, order=True)
class Sample:
    source_graph_id: str
    candidate: str
    context: tuple
    label: int

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(sorted(self.context)))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not self.context:
            raise ValueError("sample context is empty")
        if self.candidate in self.context:
            raise ValueError(f"candidate {self.candidate!r} appears in its own context")

    @property
    def pair(self):
        return (self.candidate, self.context)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    lr: float = 0.005
    balance: str = "downsample"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if self.balance not in BALANCE_MODES:
            raise ValueError(f"balance must be one of {BALANCE_MODES}")


def samples_for_subgraph(graph_id, subgraph, schema_events) -> list[Sample]:
    """Positives by masking each matched event; negatives from every unmatched schema event."""
    subgraph = frozenset(subgraph)
    out = []
    if len(subgraph) >= 2:
        for e in sorted(subgraph):
            out.append(Sample(graph_id, e, tuple(subgraph - {e}), 1))
    if subgraph:
        ctx = tuple(subgraph)
        for e in sorted(set(schema_events) - subgraph):
            out.append(Sample(graph_id, e, ctx, 0))
    return out


def build_samples(instances, schema: EventGraph, seed: int = 0) -> list[Sample]:
    events = schema.event_ids
    samples = []
    for inst in instances:
        subgraph = match(inst, schema, seed).matched_subgraph
        if not subgraph:
            logger.warning("instance %s matches no schema event; skipped", inst.graph_id)
            continue
        if len(subgraph) < 2:
            logger.warning("instance %s matches one schema event; negatives only", inst.graph_id)
        samples.extend(samples_for_subgraph(inst.graph_id, subgraph, events))
    return samples


def downsample(samples, seed: int = 0) -> list[Sample]:
    """Drop random members of the larger class until both classes are equally large."""
    pos = [s for s in samples if s.label == 1]
    neg = [s for s in samples if s.label == 0]
    k = min(len(pos), len(neg))
    if k == 0:
        logger.warning("one class is empty; downsampling skipped")
        return list(samples)
    rng = np.random.default_rng(seed)
    keep = set()
    for group in (pos, neg):
        chosen = rng.choice(len(group), size=k, replace=False) if k < len(group) else range(len(group))
        keep.update(id(group[i]) for i in chosen)
    return [s for s in samples if id(s) in keep]


def loss(network, store, batch) -> ad.Tensor:
    """Mean binary cross-entropy of the network's averaged probability."""
    if not batch:
        raise ValueError("empty batch")
    pairs = [s.pair for s in batch]
    y = np.array([[float(s.label)] for s in batch])
    log_f, log_1mf = log_probabilities(network.logits(store, pairs))
    per_sample = -(log_f * y + log_1mf * (1.0 - y))
    bad = np.flatnonzero(~np.isfinite(per_sample.data[:, 0]))
    if bad.size:
        raise FloatingPointError(f"non-finite loss for sample {batch[bad[0]]}")
    return ad.mean(per_sample)


@dataclass
class TrainResult:
    params: ad.ParamStore
    log: list = field(default_factory=list)
    best_epoch: int | None = None

    def log_lines(self) -> list[str]:
        return format_log(self.log)


def format_log(log) -> list[str]:
    """Tab-separated ``epoch, train_loss, val_auc`` lines."""
    return [f"{ep}\t{tl!r}\t{'nan' if math.isnan(va) else repr(va)}" for ep, tl, va in log]


def evaluate_auc(network, store, samples) -> float:
    if not samples:
        return math.nan
    scores = network.predict_proba(store, [s.pair for s in samples])
    return roc_auc([s.label for s in samples], scores)


def train(network, samples, cfg: TrainConfig = TrainConfig(), val_samples=None, store=None) -> TrainResult:
    """Adam over shuffled mini-batches.

    With validation samples, the parameters of the epoch with the highest
    validation AUC are returned (earlier epoch on ties); otherwise the final
    parameters are.
    """
    if not samples:
        raise ValueError("no training samples")
    network.check_pairs([s.pair for s in samples])
    if val_samples:
        network.check_pairs([s.pair for s in val_samples])
    rng = np.random.default_rng(cfg.seed)
    if store is None:
        store = network.init_params(np.random.default_rng([cfg.seed, 1]))
    if cfg.balance == "downsample":
        samples = downsample(samples, cfg.seed)
    result = TrainResult(store)
    best_auc, best = -math.inf, None
    n = len(samples)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [samples[i] for i in order[start : start + cfg.batch_size]]
            store.zero_grad()
            value = loss(network, store, batch)
            ad.backward(value)
            store.adam_step(cfg.lr)
            epoch_loss += value.item() * len(batch)
        val_auc = evaluate_auc(network, store, val_samples) if val_samples else math.nan
        result.log.append((epoch, epoch_loss / n, val_auc))
        logger.info("epoch %d loss %.6f val_auc %.4f", epoch, epoch_loss / n, val_auc)
        if val_samples and val_auc > best_auc:
            best_auc, best = val_auc, (epoch, store.copy())
    if best is not None:
        result.best_epoch, result.params = best
    return result


def probe_samples(schema: EventGraph, n: int = 8, seed: int = 0) -> list[Sample]:
    """Random labelled pairs over the schema, for gradient checks."""
    rng = np.random.default_rng(seed)
    events = schema.event_ids
    if len(events) < 2:
        raise ValueError("gradient probes need at least two schema events")
    out = []
    for i in range(n):
        e = events[rng.integers(len(events))]
        rest = [x for x in events if x != e]
        k = int(rng.integers(1, len(rest) + 1))
        ctx = tuple(rng.choice(rest, size=k, replace=False).tolist())
        out.append(Sample("probe", e, ctx, i % 2))
    return out


def check_gradients(network, samples, seed: int = 0, tolerance: float = 1e-4) -> ad.GradCheckReport:
    """Central-difference check of the training loss for freshly initialized parameters."""
    network.check_pairs([s.pair for s in samples])
    store = network.init_params(np.random.default_rng(seed))
    return ad.grad_check(lambda: loss(network, store, samples), store, tolerance)
