"""Bootstrapped completion of an instance graph over its schema."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field

from .graph import ARGUMENT, EVENT, TEMPORAL, EventGraph, Link, Node
from .matching import MatchResult, match

logger = logging.getLogger(__name__)

STOP_EMPTY = "candidates_exhausted"
STOP_NO_NEIGHBOR = "no_distance1_candidate"
STOP_THRESHOLD = "below_threshold"
STOP_GUARD = "max_additions"
STOP_UNMATCHED = "unmatched_instance"


@dataclass(frozen=True)
class InferenceConfig:
    threshold: float = 0.5
    max_additions: int | None = None

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.max_additions is not None and self.max_additions < 0:
            raise ValueError("max_additions must be >= 0")


@dataclass
class CompletionResult:
    completed_graph: EventGraph
    added_events: list = field(default_factory=list)
    final_subgraph: frozenset = frozenset()
    initial_subgraph: frozenset = frozenset()
    stop_reason: str = ""
    warning: str | None = None

    def sidecar(self) -> dict:
        return {
            "graph_id": self.completed_graph.graph_id,
            "added_events": [
                {"node_id": nid, "schema_node": sid, "score": score}
                for nid, sid, score in self.added_events
            ],
            "final_subgraph": sorted(self.final_subgraph),
            "stop_reason": self.stop_reason,
            "warning": self.warning,
        }

    def dumps_sidecar(self) -> str:
        return json.dumps(self.sidecar(), ensure_ascii=False, indent=1) + "\n"


def distance1_candidates(schema: EventGraph, subgraph, candidates) -> set:
    """Members of ``candidates`` joined to ``subgraph`` by a temporal link in either direction."""
    subgraph, candidates = set(subgraph), set(candidates)
    out = set()
    for link in schema.links_of_kind(TEMPORAL):
        if link.src in subgraph and link.dst in candidates:
            out.add(link.dst)
        if link.dst in subgraph and link.src in candidates:
            out.add(link.src)
    return out


def _fresh_id(node_type, taken, counters) -> str:
    while True:
        k = counters[node_type]
        counters[node_type] += 1
        nid = f"{node_type}:gen{k}"
        if nid not in taken:
            return nid


def complete(
    instance: EventGraph,
    schema: EventGraph,
    scorer,
    cfg: InferenceConfig = InferenceConfig(),
    seed: int = 0,
    matching: MatchResult | None = None,
) -> CompletionResult:
    """Grow the instance one schema event at a time.

    ``scorer(pairs)`` maps ``(candidate, context)`` pairs to probabilities.
    Each round scores the unmatched schema events that share a temporal link
    with the current subgraph, adds the best one if it clears the threshold
    (ties go to the smaller schema id), and copies its temporal and argument
    links to every instance node matched to the linked schema node.
    """
    m = matching if matching is not None else match(instance, schema, seed)
    subgraph = set(m.matched_subgraph)
    if not subgraph:
        logger.warning("instance %s matches no schema event", instance.graph_id)
        return CompletionResult(
            instance, [], frozenset(), frozenset(), STOP_UNMATCHED, "empty matched subgraph"
        )
    initial = frozenset(subgraph)
    images = defaultdict(list)  # schema node -> instance nodes
    for inst_id, schema_id in sorted({**m.assignment, **m.entity_assignment}.items()):
        images[schema_id].append(inst_id)
    nodes = list(instance.nodes)
    links = set(instance.links)
    taken = {n.id for n in nodes}
    counters = defaultdict(int)
    remaining = set(schema.event_ids) - subgraph
    limit = len(schema.event_ids) if cfg.max_additions is None else cfg.max_additions
    added = []
    stop = STOP_EMPTY
    while remaining:
        if len(added) >= limit:
            stop = STOP_GUARD
            break
        frontier = sorted(distance1_candidates(schema, subgraph, remaining))
        if not frontier:
            stop = STOP_NO_NEIGHBOR
            logger.info("no distance-1 candidate left for %s", instance.graph_id)
            break
        ctx = tuple(sorted(subgraph))
        scores = [float(s) for s in scorer([(c, ctx) for c in frontier])]
        best = max(range(len(frontier)), key=lambda i: (scores[i], -i))
        choice, score = frontier[best], scores[best]
        if not score > cfg.threshold:
            stop = STOP_THRESHOLD
            break
        subgraph.add(choice)
        remaining.discard(choice)
        node_type = schema.node_type(choice)
        new_id = _fresh_id(node_type, taken, counters)
        taken.add(new_id)
        nodes.append(Node(new_id, EVENT, node_type))
        for link, other in schema.incident(choice):
            if link.kind not in (TEMPORAL, ARGUMENT):
                continue
            for target in images.get(other, ()):
                if link.src == choice:
                    links.add(Link(new_id, target, link.kind, link.link_type))
                else:
                    links.add(Link(target, new_id, link.kind, link.link_type))
        images[choice].append(new_id)
        added.append((new_id, choice, score))
    completed = instance.replace(nodes=nodes, links=links)
    return CompletionResult(completed, added, frozenset(subgraph), initial, stop)
