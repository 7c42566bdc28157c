"""GCN encoding of the schema and the neighbor scoring head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import EventGraph

READOUTS = ("sum", "average", "attention")
ATTENTION_EPS = 1e-12


@dataclass(frozen=True)
class GnnConfig:
    num_layers: int = 3
    hidden_dim: int = 256
    readout: str = "sum"
    mlp_hidden: int = 256

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_dim < 1 or self.mlp_hidden < 1:
            raise ValueError("num_layers, hidden_dim and mlp_hidden must be >= 1")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}, got {self.readout!r}")


def type_key(node) -> str:
    # entity and event types live in one vocabulary; the kind prefix keeps them apart
    return f"{node.kind}:{node.node_type}"


class SchemaGraphTensors:
    """Fixed numeric view of a schema: node order, one-hot types, normalized adjacency."""

    def __init__(self, S: EventGraph, type_vocabulary=None):
        self.node_ids = [n.id for n in S.nodes]
        self.index = {nid: i for i, nid in enumerate(self.node_ids)}
        keys = sorted({type_key(n) for n in S.nodes})
        self.type_vocabulary = list(keys) if type_vocabulary is None else list(type_vocabulary)
        type_index = {k: i for i, k in enumerate(self.type_vocabulary)}
        n = len(self.node_ids)
        self.features = np.zeros((n, len(self.type_vocabulary)))
        for i, node in enumerate(S.nodes):
            key = type_key(node)
            if key not in type_index:
                raise KeyError(f"node type {key!r} of {node.id!r} is not in the type vocabulary")
            self.features[i, type_index[key]] = 1.0
        adj = np.eye(n)
        for link in S.links:
            a, b = self.index[link.src], self.index[link.dst]
            adj[a, b] = adj[b, a] = 1.0
        inv_sqrt = 1.0 / np.sqrt(adj.sum(axis=1))
        self.norm_adj = adj * inv_sqrt[:, None] * inv_sqrt[None, :]

    def selector(self, ids) -> np.ndarray:
        out = np.zeros((len(ids), len(self.node_ids)))
        for b, nid in enumerate(ids):
            out[b, self.index[nid]] = 1.0
        return out

    def context_mask(self, contexts) -> np.ndarray:
        out = np.zeros((len(contexts), len(self.node_ids)))
        for b, ctx in enumerate(contexts):
            for nid in ctx:
                out[b, self.index[nid]] = 1.0
        return out


@dataclass
class SchemaEncoding:
    tensors: SchemaGraphTensors
    embeddings: ad.Tensor

    def embedding(self, node_id) -> np.ndarray:
        return self.embeddings.data[self.tensors.index[node_id]]


def init_neighbor_params(store: ad.ParamStore, n_types: int, cfg: GnnConfig, rng) -> None:
    fan_in = n_types
    for k in range(1, cfg.num_layers + 1):
        store.glorot(f"gcn.w{k}", fan_in, cfg.hidden_dim, rng)
        store.zeros(f"gcn.b{k}", 1, cfg.hidden_dim)
        fan_in = cfg.hidden_dim
    store.glorot("neighbor.w1", 2 * cfg.hidden_dim, cfg.mlp_hidden, rng)
    store.zeros("neighbor.b1", 1, cfg.mlp_hidden)
    store.glorot("neighbor.w2", cfg.mlp_hidden, 1, rng)
    store.zeros("neighbor.b2", 1, 1)


def encode_schema(tensors: SchemaGraphTensors, store: ad.ParamStore, cfg: GnnConfig) -> SchemaEncoding:
    """K rounds of ``relu(A_hat H W + b)`` starting from one-hot node types.

    ``A_hat`` is the symmetrically normalized adjacency with self-loops over
    all link kinds, direction ignored.
    """
    h = ad.Tensor(tensors.features)
    adj = ad.Tensor(tensors.norm_adj)
    for k in range(1, cfg.num_layers + 1):
        h = ad.relu(ad.add_bias(adj @ h @ store[f"gcn.w{k}"], store[f"gcn.b{k}"]))
    return SchemaEncoding(tensors, h)


def readout_batch(enc: SchemaEncoding, candidates, contexts, cfg: GnnConfig) -> ad.Tensor:
    """Subgraph embeddings, one row per ``(candidate, context)`` pair."""
    if any(len(c) == 0 for c in contexts):
        raise ValueError("readout over an empty subgraph")
    h = enc.embeddings
    mask = enc.tensors.context_mask(contexts)
    if cfg.readout == "sum":
        return ad.Tensor(mask) @ h
    counts = mask.sum(axis=1, keepdims=True)
    if cfg.readout == "average":
        return ad.Tensor(mask / counts) @ h
    return attention_weights(enc, candidates, contexts) @ h


def attention_weights(enc: SchemaEncoding, candidates, contexts) -> ad.Tensor:
    """``beta[b, i]``: dot product of node i with the candidate over the sum across the context.

    Rows whose denominator is within ``ATTENTION_EPS`` of zero use uniform weights.
    """
    h = enc.embeddings
    mask = enc.tensors.context_mask(contexts)
    counts = mask.sum(axis=1, keepdims=True)
    h_e = ad.Tensor(enc.tensors.selector(candidates)) @ h
    scores = (h_e @ h.T) * mask
    denom = ad.row_sum(scores)
    ok = (np.abs(denom.data) >= ATTENTION_EPS).astype(np.float64)
    return (scores / (denom + (1.0 - ok))) * ok + ad.Tensor((mask / counts) * (1.0 - ok))


def readout(enc: SchemaEncoding, context, e, cfg: GnnConfig) -> np.ndarray:
    return readout_batch(enc, [e], [sorted(context)], cfg).data[0]


def neighbor_logits(enc: SchemaEncoding, store: ad.ParamStore, candidates, contexts, cfg: GnnConfig):
    h_e = ad.Tensor(enc.tensors.selector(candidates)) @ enc.embeddings
    h_ctx = readout_batch(enc, candidates, contexts, cfg)
    x = ad.concat([h_e, h_ctx], axis=1)
    hidden = ad.relu(ad.add_bias(x @ store["neighbor.w1"], store["neighbor.b1"]))
    return ad.add_bias(hidden @ store["neighbor.w2"], store["neighbor.b2"])


def predict_neighbor(enc: SchemaEncoding, e, context, store: ad.ParamStore, cfg: GnnConfig) -> float:
    if e in context:
        raise ValueError(f"candidate {e!r} is part of the context")
    return ad.sigmoid(neighbor_logits(enc, store, [e], [sorted(context)], cfg)).item()
