"""Bag-of-paths features between a candidate event and a matched schema subgraph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import EVENT, TEMP, TEMP_REV, TEMPORAL, EventGraph

MAX_PATH_LEN = 6
LINK_KIND_MODES = ("all", "temporal_only")


@dataclass(frozen=True)
class PathConfig:
    max_len: int = 4
    link_kinds: str = "all"
    mlp_hidden: int = 256

    def __post_init__(self):
        if not 1 <= self.max_len <= MAX_PATH_LEN:
            raise ValueError(f"max_len must be in [1, {MAX_PATH_LEN}], got {self.max_len}")
        if self.link_kinds not in LINK_KIND_MODES:
            raise ValueError(f"link_kinds must be one of {LINK_KIND_MODES}")
        if self.mlp_hidden < 1:
            raise ValueError("mlp_hidden must be >= 1")


def traversal_steps(S: EventGraph, node_id: str, cfg: PathConfig) -> list[tuple[str, str]]:
    """``(neighbor, label)`` for every link touching ``node_id``, in either direction.

    Temporal links read ``TEMP`` forwards and ``TEMP_REV`` backwards; other
    links carry their own type both ways.
    """
    steps = []
    for link, other in S.incident(node_id):
        if cfg.link_kinds == "temporal_only" and link.kind != TEMPORAL:
            continue
        if link.kind == TEMPORAL:
            label = TEMP if link.src == node_id else TEMP_REV
        else:
            label = link.link_type
        steps.append((other, label))
    return steps


def paths_from(S: EventGraph, source: str, cfg: PathConfig, targets=None) -> dict[str, set]:
    """Map each reachable node (or each of ``targets``) to its set of path types."""
    steps = {}
    out: dict[str, set] = {}
    visited = {source}
    labels: list[str] = []

    def visit(node):
        if node not in steps:
            steps[node] = traversal_steps(S, node, cfg)
        for other, label in steps[node]:
            if other in visited:
                continue
            labels.append(label)
            if targets is None or other in targets:
                out.setdefault(other, set()).add(tuple(labels))
            if len(labels) < cfg.max_len:
                visited.add(other)
                visit(other)
                visited.discard(other)
            labels.pop()

    visit(source)
    return out


def enumerate_paths(S: EventGraph, s: str, t: str, cfg: PathConfig = PathConfig()) -> set:
    """Label sequences of all node-distinct paths from ``s`` to ``t`` with length <= L."""
    if s == t:
        raise ValueError("source and target must differ")
    S.node(s)
    S.node(t)
    return paths_from(S, s, cfg, targets={t}).get(t, set())


@dataclass(frozen=True)
class PathVocabulary:
    paths: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(sorted(set(self.paths))))
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.paths)})

    def __len__(self):
        return len(self.paths)

    def __contains__(self, path):
        return path in self._index

    def index(self, path) -> int:
        return self._index[path]

    def to_list(self) -> list:
        return [list(p) for p in self.paths]

    @classmethod
    def from_list(cls, items) -> PathVocabulary:
        return cls(tuple(tuple(p) for p in items))


class PathTable:
    """All event-to-event path sets of one schema, enumerated once.

    ``sets[s][t]`` holds vocabulary indices of the path types from ``s`` to ``t``.
    """

    def __init__(self, S: EventGraph, cfg: PathConfig):
        self.cfg = cfg
        events = set(S.event_ids)
        raw = {s: paths_from(S, s, cfg, targets=events - {s}) for s in sorted(events)}
        self.vocabulary = PathVocabulary(
            tuple(p for by_t in raw.values() for ps in by_t.values() for p in ps)
        )
        self.sets = {
            s: {t: np.array(sorted(self.vocabulary.index(p) for p in ps), dtype=np.int64)
                for t, ps in by_t.items()}
            for s, by_t in raw.items()
        }

    def bag(self, e: str, context) -> np.ndarray:
        v = np.zeros(len(self.vocabulary))
        row = self.sets.get(e, {})
        for t in context:
            idx = row.get(t)
            if idx is not None:
                v[idx] = 1.0
        return v

    def bags(self, pairs) -> np.ndarray:
        out = np.zeros((len(pairs), len(self.vocabulary)))
        for b, (e, context) in enumerate(pairs):
            row = self.sets.get(e, {})
            for t in context:
                idx = row.get(t)
                if idx is not None:
                    out[b, idx] = 1.0
        return out


def build_vocabulary(S: EventGraph, cfg: PathConfig = PathConfig()) -> PathVocabulary:
    """Sorted union of path types over all ordered pairs of schema events."""
    if S.role != "schema":
        raise ValueError(f"graph {S.graph_id!r} is not a schema")
    return PathTable(S, cfg).vocabulary


def bag_of_paths(S, e, context, vocab: PathVocabulary, cfg: PathConfig = PathConfig()):
    """Multi-hot vector over ``vocab`` of the paths joining ``e`` to any event in ``context``."""
    if e in context:
        raise ValueError(f"candidate {e!r} is part of the context")
    v = np.zeros(len(vocab))
    targets = set(context)
    if not targets:
        return v
    if S.node(e).kind != EVENT:
        raise ValueError(f"{e!r} is not an event node")
    for ps in paths_from(S, e, cfg, targets=targets).values():
        for p in ps:
            v[vocab.index(p)] = 1.0
    return v


def init_path_params(store: ad.ParamStore, n_paths: int, cfg: PathConfig, rng) -> None:
    store.glorot("path.w1", n_paths, cfg.mlp_hidden, rng)
    store.zeros("path.b1", 1, cfg.mlp_hidden)
    store.glorot("path.w2", cfg.mlp_hidden, 1, rng)
    store.zeros("path.b2", 1, 1)


def path_logits(bags, store: ad.ParamStore) -> ad.Tensor:
    """Pre-sigmoid output of the path MLP for a ``(batch, |vocab|)`` multi-hot matrix."""
    x = ad.as_tensor(bags)
    w1 = store["path.w1"]
    if x.shape[1] != w1.shape[0]:
        raise ad.ShapeError(
            f"bag-of-paths dimension {x.shape[1]} does not match vocabulary size {w1.shape[0]}"
        )
    hidden = ad.relu(ad.add_bias(x @ w1, store["path.b1"]))
    return ad.add_bias(hidden @ store["path.w2"], store["path.b2"])


def predict_path(v, store: ad.ParamStore) -> float:
    return ad.sigmoid(path_logits(np.atleast_2d(v), store)).item()
