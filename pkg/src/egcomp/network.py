"""Scoring networks over ``(candidate event, schema subgraph)`` pairs.

:class:`CompletionNetwork` averages the neighbor and path probabilities (or
uses just one of them for the ablations). :class:`FeatureMLPNetwork` backs
the ID-MLP and Type-MLP baselines. Both expose ``init_params`` and
``logits`` so the same training loop drives either.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .graph import EVENT, EventGraph
from .neighbor import (
    GnnConfig,
    SchemaGraphTensors,
    encode_schema,
    init_neighbor_params,
    neighbor_logits,
)
from .paths import PathConfig, PathTable, PathVocabulary, init_path_params, path_logits

MODULES = ("both", "neighbor", "path")
LOG2 = float(np.log(2.0))


class CompletionNetwork:
    def __init__(
        self,
        schema: EventGraph,
        gnn: GnnConfig = GnnConfig(),
        path: PathConfig = PathConfig(),
        modules: str = "both",
        type_vocabulary=None,
        path_vocabulary: PathVocabulary | None = None,
    ):
        if modules not in MODULES:
            raise ValueError(f"modules must be one of {MODULES}, got {modules!r}")
        self.schema = schema
        self.gnn = gnn
        self.path = path
        self.modules = modules
        self.tensors = SchemaGraphTensors(schema, type_vocabulary)
        self.paths = PathTable(schema, path)
        if path_vocabulary is not None and path_vocabulary != self.paths.vocabulary:
            raise ValueError("schema does not reproduce the stored path vocabulary")
        self.event_ids = set(schema.event_ids)

    @property
    def uses_neighbor(self):
        return self.modules in ("both", "neighbor")

    @property
    def uses_path(self):
        return self.modules in ("both", "path")

    def init_params(self, rng) -> ad.ParamStore:
        store = ad.ParamStore()
        if self.uses_neighbor:
            init_neighbor_params(store, len(self.tensors.type_vocabulary), self.gnn, rng)
        if self.uses_path:
            init_path_params(store, len(self.paths.vocabulary), self.path, rng)
        return store

    def check_pairs(self, pairs):
        check_pairs(pairs, self.event_ids)

    def logits(self, store: ad.ParamStore, pairs) -> list[ad.Tensor]:
        candidates = [e for e, _ in pairs]
        contexts = [sorted(ctx) for _, ctx in pairs]
        out = []
        if self.uses_neighbor:
            enc = encode_schema(self.tensors, store, self.gnn)
            out.append(neighbor_logits(enc, store, candidates, contexts, self.gnn))
        if self.uses_path:
            out.append(path_logits(self.paths.bags(list(zip(candidates, contexts))), store))
        return out

    def module_probabilities(self, store, pairs) -> dict[str, np.ndarray]:
        names = [m for m in ("neighbor", "path") if m == self.modules or self.modules == "both"]
        return {
            name: ad.sigmoid(lg).data[:, 0] for name, lg in zip(names, self.logits(store, pairs))
        }

    def predict_proba(self, store, pairs) -> np.ndarray:
        """Probability that each candidate is missing from its subgraph."""
        if not pairs:
            return np.zeros(0)
        return combine(self.logits(store, pairs))

    def config(self) -> dict:
        return {
            "modules": self.modules,
            "num_layers": self.gnn.num_layers,
            "hidden_dim": self.gnn.hidden_dim,
            "readout": self.gnn.readout,
            "neighbor_mlp_hidden": self.gnn.mlp_hidden,
            "max_path_len": self.path.max_len,
            "path_link_kinds": self.path.link_kinds,
            "path_mlp_hidden": self.path.mlp_hidden,
        }


def check_pairs(pairs, event_ids) -> None:
    for e, ctx in pairs:
        if e not in event_ids:
            raise KeyError(f"candidate {e!r} is not a schema event")
        if not ctx:
            raise ValueError(f"empty context for candidate {e!r}")
        if e in ctx:
            raise ValueError(f"candidate {e!r} is part of its own context")
        for c in ctx:
            if c not in event_ids:
                raise KeyError(f"context node {c!r} is not a schema event")


def combine(logits) -> np.ndarray:
    """Mean of the module sigmoids."""
    return np.mean([ad.sigmoid(lg).data[:, 0] for lg in logits], axis=0)


def combined_score(p_neighbor: float, p_path: float) -> float:
    return 0.5 * (p_neighbor + p_path)


def log_probabilities(logits):
    """``(log f, log(1 - f))`` tensors for the averaged sigmoid outputs."""
    if len(logits) == 1:
        (a,) = logits
        return ad.log_sigmoid(a), ad.log_sigmoid(-a)
    a, b = logits
    log_f = ad.logaddexp(ad.log_sigmoid(a), ad.log_sigmoid(b)) - LOG2
    log_1mf = ad.logaddexp(ad.log_sigmoid(-a), ad.log_sigmoid(-b)) - LOG2
    return log_f, log_1mf


class FeatureMLPNetwork:
    """One-hidden-layer MLP over ``[onehot(e), multihot(context)]`` features.

    ``key="id"`` indexes schema event ids, ``key="type"`` indexes event types.
    """

    def __init__(self, schema: EventGraph, key: str = "type", hidden: int = 100):
        if key not in ("id", "type"):
            raise ValueError("key must be 'id' or 'type'")
        self.schema = schema
        self.key = key
        self.hidden = hidden
        events = [n for n in schema.nodes if n.kind == EVENT]
        self.event_ids = {n.id for n in events}
        if key == "id":
            self.vocab = sorted(self.event_ids)
            self._key = {n.id: n.id for n in events}
        else:
            self.vocab = sorted({n.node_type for n in events})
            self._key = {n.id: n.node_type for n in events}
        self._pos = {k: i for i, k in enumerate(self.vocab)}

    def check_pairs(self, pairs):
        check_pairs(pairs, self.event_ids)

    def features(self, pairs) -> np.ndarray:
        d = len(self.vocab)
        out = np.zeros((len(pairs), 2 * d))
        for b, (e, ctx) in enumerate(pairs):
            out[b, self._pos[self._key[e]]] = 1.0
            for c in ctx:
                out[b, d + self._pos[self._key[c]]] = 1.0
        return out

    def init_params(self, rng) -> ad.ParamStore:
        store = ad.ParamStore()
        d = 2 * len(self.vocab)
        store.glorot("mlp.w1", d, self.hidden, rng)
        store.zeros("mlp.b1", 1, self.hidden)
        store.glorot("mlp.w2", self.hidden, 1, rng)
        store.zeros("mlp.b2", 1, 1)
        return store

    def logits(self, store, pairs) -> list[ad.Tensor]:
        x = ad.Tensor(self.features(pairs))
        hidden = ad.relu(ad.add_bias(x @ store["mlp.w1"], store["mlp.b1"]))
        return [ad.add_bias(hidden @ store["mlp.w2"], store["mlp.b2"])]

    def predict_proba(self, store, pairs) -> np.ndarray:
        if not pairs:
            return np.zeros(0)
        return combine(self.logits(store, pairs))

    def config(self) -> dict:
        return {"key": self.key, "hidden": self.hidden}
