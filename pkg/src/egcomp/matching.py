"""Two-stage heuristic mapping of instance events onto schema events.

Stage one keeps the schema events whose type equals the instance event's
type. When more than one survives, stage two picks the candidate whose
one-hop type neighborhood (previous event types, following event types,
argument roles) has the highest summed Jaccard index with the instance
event's neighborhood. Remaining ties are broken by a seeded random draw.

:func:`exact_match_oracle` solves the underlying many-to-one assignment
problem by exhaustive enumeration and exists to validate the heuristic on
small graphs.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import ARGUMENT, EVENT, INSTANCE, SCHEMA, TEMPORAL, EventGraph, Link

logger = logging.getLogger(__name__)

ORACLE_MAX_EVENTS = 8


@dataclass(frozen=True)
class TypeNeighborhood:
    prev_types: frozenset
    next_types: frozenset
    arg_roles: frozenset


@dataclass(frozen=True)
class MatchResult:
    """Partial many-to-one assignment of instance events to schema events.

    ``entity_assignment`` records the role-based entity mapping derived from
    the event assignment; downstream scoring only looks at events.
    """

    assignment: dict
    unmatched: frozenset
    entity_assignment: dict = field(default_factory=dict)

    @property
    def matched_subgraph(self) -> frozenset:
        return frozenset(self.assignment.values())

    def to_dict(self) -> dict:
        return {
            "assignment": dict(sorted(self.assignment.items())),
            "unmatched": sorted(self.unmatched),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc) -> MatchResult:
        if set(doc) != {"assignment", "unmatched"}:
            raise ValueError("match document needs exactly 'assignment' and 'unmatched'")
        assignment = dict(doc["assignment"])
        unmatched = frozenset(doc["unmatched"])
        if unmatched & set(assignment):
            raise ValueError("a node cannot be both assigned and unmatched")
        return cls(assignment, unmatched)


@dataclass(frozen=True)
class MatchObjective:
    """Node and link similarity terms of the assignment objective.

    ``link_sim`` receives two links: one from the instance, one from the schema.
    """

    node_sim: Callable
    link_sim: Callable


def type_equality_objective(instance: EventGraph, schema: EventGraph, link_weight=1.0):
    """Node term 1[types equal]; link term ``link_weight`` when both links are temporal."""

    def node_sim(i, j):
        return 1.0 if instance.node_type(i) == schema.node_type(j) else 0.0

    def link_sim(li: Link, lj: Link):
        return link_weight if li.kind == TEMPORAL and lj.kind == TEMPORAL else 0.0

    return MatchObjective(node_sim, link_sim)


def candidate_set(event_id: str, instance: EventGraph, schema: EventGraph) -> set:
    event_type = instance.node_type(event_id)
    return {n.id for n in schema.nodes if n.kind == EVENT and n.node_type == event_type}


def type_neighborhood(event_id: str, g: EventGraph) -> TypeNeighborhood:
    prev, nxt, roles = set(), set(), set()
    for link, other in g.incident(event_id):
        if link.kind == TEMPORAL:
            if link.dst == event_id:
                prev.add(g.node_type(other))
            else:
                nxt.add(g.node_type(other))
        elif link.kind == ARGUMENT and link.src == event_id:
            roles.add(link.link_type)
    return TypeNeighborhood(frozenset(prev), frozenset(nxt), frozenset(roles))


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def neighborhood_score(inst: TypeNeighborhood, cand: TypeNeighborhood) -> float:
    return (
        jaccard(cand.prev_types, inst.prev_types)
        + jaccard(cand.next_types, inst.next_types)
        + jaccard(cand.arg_roles, inst.arg_roles)
    )


def resolve_ambiguous(event_id, candidates, instance, schema, rng_seed=0) -> str:
    """Pick the candidate with the highest summed neighborhood Jaccard index."""
    if len(candidates) < 2:
        raise ValueError("resolve_ambiguous needs at least two candidates")
    inst_nb = type_neighborhood(event_id, instance)
    ordered = sorted(candidates)
    scores = [neighborhood_score(inst_nb, type_neighborhood(c, schema)) for c in ordered]
    best = max(scores)
    tied = [c for c, s in zip(ordered, scores) if s == best]
    if len(tied) == 1:
        return tied[0]
    logger.debug("tie between %s for %s; breaking randomly", tied, event_id)
    # seed mixes in the node id so each ambiguous node gets its own draw
    return random.Random(f"{rng_seed}:{event_id}").choice(tied)


def match(instance: EventGraph, schema: EventGraph, rng_seed: int = 0) -> MatchResult:
    if schema.role != SCHEMA:
        raise ValueError(f"graph {schema.graph_id!r} is not a schema")
    if instance.role != INSTANCE:
        raise ValueError(f"graph {instance.graph_id!r} is not an instance")
    by_type: dict[str, list[str]] = {}
    for n in schema.nodes:
        if n.kind == EVENT:
            by_type.setdefault(n.node_type, []).append(n.id)
    assignment, unmatched = {}, set()
    for eid in instance.event_ids:
        cands = by_type.get(instance.node_type(eid), [])
        if not cands:
            unmatched.add(eid)
        elif len(cands) == 1:
            assignment[eid] = cands[0]
        else:
            assignment[eid] = resolve_ambiguous(eid, cands, instance, schema, rng_seed)
    return MatchResult(assignment, frozenset(unmatched), _match_entities(instance, schema, assignment))


def _match_entities(instance, schema, assignment) -> dict:
    # first event (in id order) to claim an entity wins
    entity_map = {}
    for eid in sorted(assignment):
        schema_event = assignment[eid]
        by_role: dict[str, list[str]] = {}
        for link, other in schema.incident(schema_event):
            if link.kind == ARGUMENT and link.src == schema_event:
                by_role.setdefault(link.link_type, []).append(other)
        for link, other in instance.incident(eid):
            if link.kind != ARGUMENT or link.src != eid or other in entity_map:
                continue
            targets = by_role.get(link.link_type)
            if targets:
                entity_map[other] = min(targets)
    return entity_map


def objective_value(instance, schema, assignment: dict, obj: MatchObjective) -> float:
    """Objective of a (partial) event assignment: node terms plus link-pair terms."""
    total = sum(obj.node_sim(i, j) for i, j in assignment.items())
    s_links = {}
    for l in schema.links:
        s_links.setdefault((l.src, l.dst), []).append(l)
    for li in instance.links:
        if li.src in assignment and li.dst in assignment:
            for lj in s_links.get((assignment[li.src], assignment[li.dst]), ()):
                total += obj.link_sim(li, lj)
    return total


def exact_match_oracle(instance, schema, obj: MatchObjective | None = None):
    """Best many-to-one event assignment by exhaustive enumeration.

    Every instance event is either left unassigned or mapped to one schema
    event; all ``(|S|+1)^|I|`` assignments are scored. Returns
    ``(MatchResult, objective)``; the first maximizer in enumeration order wins.
    """
    if obj is None:
        obj = type_equality_objective(instance, schema)
    inst_ev, sch_ev = instance.event_ids, schema.event_ids
    if len(inst_ev) > ORACLE_MAX_EVENTS or len(sch_ev) > ORACLE_MAX_EVENTS:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_EVENTS} events per side "
            f"(got {len(inst_ev)} and {len(sch_ev)})"
        )
    n_i, n_s = len(inst_ev), len(sch_ev)
    if n_i == 0:
        return MatchResult({}, frozenset()), 0.0
    none = n_s  # sentinel column: unassigned
    node_tab = np.zeros((n_i, n_s + 1))
    for a, i in enumerate(inst_ev):
        for b, j in enumerate(sch_ev):
            node_tab[a, b] = obj.node_sim(i, j)
    pos_i = {e: a for a, e in enumerate(inst_ev)}
    pos_s = {e: b for b, e in enumerate(sch_ev)}
    link_tabs = []
    for li in instance.links:
        if li.src not in pos_i or li.dst not in pos_i:
            continue
        tab = np.zeros((n_s + 1, n_s + 1))
        for lj in schema.links:
            if lj.src in pos_s and lj.dst in pos_s:
                tab[pos_s[lj.src], pos_s[lj.dst]] += obj.link_sim(li, lj)
        link_tabs.append((pos_i[li.src], pos_i[li.dst], tab))

    best_val, best_row = -np.inf, None
    total = (n_s + 1) ** n_i
    radix = (n_s + 1) ** np.arange(n_i - 1, -1, -1)
    chunk = 1 << 18
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        choice = (codes[:, None] // radix[None, :]) % (n_s + 1)
        vals = node_tab[np.arange(n_i)[None, :], choice].sum(axis=1)
        for a, b, tab in link_tabs:
            vals += tab[choice[:, a], choice[:, b]]
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_row = float(vals[k]), choice[k]
    assignment = {inst_ev[a]: sch_ev[c] for a, c in enumerate(best_row) if c != none}
    unmatched = frozenset(e for e in inst_ev if e not in assignment)
    return MatchResult(assignment, unmatched), best_val
