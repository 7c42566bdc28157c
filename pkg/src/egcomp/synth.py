"""Synthetic schemas, instance families and schema perturbation.

Three generator modes:

``random``
    Temporal DAG with a random spanning tree plus extra forward links,
    random argument and relation links. Instances are random temporally
    connected regions of the schema.
``distance1``
    Events form clusters; each cluster is a temporal chain whose events all
    share one hub entity (role ``participant``). No temporal link crosses a
    cluster, and instances instantiate whole clusters, so a schema event is
    missing from an instance exactly when it is a temporal neighbor of it.
``second_hop``
    As ``distance1`` but consecutive clusters are joined by a temporal
    bridge. Temporal adjacency alone over-predicts; the shared hub entity
    (a two-hop ``(participant, participant)`` path) separates true members.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

from .graph import (
    ARGUMENT,
    ENTITY,
    EVENT,
    INSTANCE,
    RELATION,
    SCHEMA,
    TEMP,
    TEMPORAL,
    EventGraph,
    Link,
    Node,
    load_graph,
    save_graph,
)

MODES = ("random", "distance1", "second_hop")
ROLE_POOL = ("agent", "patient", "instrument", "place", "target", "victim", "destination", "origin")
RELATION_POOL = ("located_at", "part_of", "affiliated_with", "owns")
HUB_ROLE = "participant"
HUB_RELATION = "related_to"


@dataclass(frozen=True)
class GenConfig:
    n_event_types: int = 20
    n_entity_types: int = 8
    n_schema_events: int = 30
    n_schema_entities: int = 40
    temporal_density: float = 0.1
    argument_density: float = 0.05
    relation_density: float = 0.02
    n_instances: int = 100
    instance_coverage: float = 0.4
    dropout: float = 0.1
    seed: int = 0
    mode: str = "random"
    cluster_size: int = 5
    n_temporal_links: int | None = None
    n_argument_links: int | None = None
    n_relation_links: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_schema_events < 4:
            raise ValueError("n_schema_events must be >= 4")
        if self.n_event_types < 1 or self.n_entity_types < 1:
            raise ValueError("need at least one event type and one entity type")
        for name in ("temporal_density", "argument_density"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0.0 <= self.relation_density <= 1.0:
            raise ValueError("relation_density must lie in [0, 1]")
        if not 0.0 < self.instance_coverage < 1.0:
            raise ValueError("instance_coverage must lie in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.n_instances < 0 or self.n_schema_entities < 0:
            raise ValueError("counts must be non-negative")
        if self.mode != "random":
            if self.cluster_size < 2 or self.n_schema_events // self.cluster_size < 2:
                raise ValueError("clustered modes need at least two clusters of size >= 2")
            if self.n_schema_entities < self.n_schema_events // self.cluster_size:
                raise ValueError("clustered modes need one hub entity per cluster")


@dataclass(frozen=True)
class PerturbConfig:
    edge_change_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.edge_change_frac <= 1.0:
            raise ValueError("edge_change_frac must lie in [0, 1]")


class GeneratedInstance(NamedTuple):
    full: EventGraph
    incomplete: EventGraph
    hidden: frozenset  # schema event ids removed from ``full``


def _type_names(prefix, n):
    return [f"{prefix}{k:02d}" for k in range(n)]


def _assign_types(rng, n_nodes, names):
    # every type used once before any repeats
    types = [names[i % len(names)] if i < len(names) else rng.choice(names) for i in range(n_nodes)]
    rng.shuffle(types)
    return types


def _add_random(rng, links, candidates, count, make, what):
    pool = [c for c in candidates if make(*c) not in links]
    if count > len(pool):
        raise ValueError(f"cannot place {count} more {what} links (only {len(pool)} free slots)")
    for c in rng.sample(pool, count):
        links.add(make(*c))


def gen_schema(cfg: GenConfig) -> EventGraph:
    rng = random.Random(f"schema:{cfg.seed}")
    n_ev, n_en = cfg.n_schema_events, cfg.n_schema_entities
    ev_ids = [f"s:e{i:03d}" for i in range(n_ev)]
    en_ids = [f"s:n{i:03d}" for i in range(n_en)]
    nodes = [Node(i, EVENT, t) for i, t in zip(ev_ids, _assign_types(rng, n_ev, _type_names("Ev", cfg.n_event_types)))]
    nodes += [Node(i, ENTITY, t) for i, t in zip(en_ids, _assign_types(rng, n_en, _type_names("En", cfg.n_entity_types)))]
    if cfg.mode == "random":
        links = _random_links(rng, cfg, ev_ids, en_ids)
    else:
        links = _clustered_links(rng, cfg, ev_ids, en_ids)
    return EventGraph(f"synthetic-{cfg.mode}-{cfg.seed}", SCHEMA, tuple(nodes), tuple(links))


def _temporal(a, b):
    return Link(a, b, TEMPORAL, TEMP)


def _random_links(rng, cfg, ev_ids, en_ids):
    n_ev = len(ev_ids)
    links = set()
    for j in range(1, n_ev):
        links.add(_temporal(ev_ids[rng.randrange(j)], ev_ids[j]))
    forward = [(ev_ids[i], ev_ids[j]) for i in range(n_ev) for j in range(i + 1, n_ev)]
    if cfg.n_temporal_links is None:
        links.update(_temporal(a, b) for a, b in forward if rng.random() < cfg.temporal_density)
    else:
        if cfg.n_temporal_links < n_ev - 1:
            raise ValueError(f"a connected schema needs >= {n_ev - 1} temporal links")
        _add_random(rng, links, forward, cfg.n_temporal_links - len(links), _temporal, "temporal")

    args = {}
    for en in en_ids:
        args[(rng.choice(ev_ids), en)] = rng.choice(ROLE_POOL)
    pairs = [(e, n) for e in ev_ids for n in en_ids if (e, n) not in args]
    if cfg.n_argument_links is None:
        for p in pairs:
            if rng.random() < cfg.argument_density:
                args[p] = rng.choice(ROLE_POOL)
    else:
        extra = cfg.n_argument_links - len(args)
        if extra < 0:
            raise ValueError(f"every entity needs an argument link: need >= {len(en_ids)}")
        if extra > len(pairs):
            raise ValueError("too many argument links requested")
        for p in rng.sample(pairs, extra):
            args[p] = rng.choice(ROLE_POOL)
    links.update(Link(e, n, ARGUMENT, role) for (e, n), role in args.items())

    rel_pairs = [(a, b) for a in en_ids for b in en_ids if a != b]
    if cfg.n_relation_links is None:
        chosen = [p for p in rel_pairs if rng.random() < cfg.relation_density]
    else:
        if cfg.n_relation_links > len(rel_pairs):
            raise ValueError("too many relation links requested")
        chosen = rng.sample(rel_pairs, cfg.n_relation_links)
    links.update(Link(a, b, RELATION, rng.choice(RELATION_POOL)) for a, b in chosen)
    return links


def clusters_of(cfg: GenConfig, ev_ids) -> list[list[str]]:
    k = len(ev_ids) // cfg.cluster_size
    out = [ev_ids[c * cfg.cluster_size : (c + 1) * cfg.cluster_size] for c in range(k)]
    out[-1] = out[-1] + ev_ids[k * cfg.cluster_size :]
    return out


def _clustered_links(rng, cfg, ev_ids, en_ids):
    clusters = clusters_of(cfg, ev_ids)
    links = set()
    hubs = en_ids[: len(clusters)]
    others = en_ids[len(clusters) :]
    for c, members in enumerate(clusters):
        for a, b in zip(members, members[1:]):
            links.add(_temporal(a, b))
        for i in range(len(members)):
            for j in range(i + 2, len(members)):
                if rng.random() < cfg.temporal_density:
                    links.add(_temporal(members[i], members[j]))
        for e in members:
            links.add(Link(e, hubs[c], ARGUMENT, HUB_ROLE))
    home = {en: rng.randrange(len(clusters)) for en in others}
    for en in others:
        members = clusters[home[en]]
        linked = {rng.choice(members)}
        linked.update(e for e in members if rng.random() < cfg.argument_density)
        for e in sorted(linked):
            links.add(Link(e, en, ARGUMENT, rng.choice(ROLE_POOL)))
    for a, b in zip(hubs, hubs[1:]):
        links.add(Link(a, b, RELATION, HUB_RELATION))
    for a in others:
        for b in others:
            if a != b and home[a] == home[b] and rng.random() < cfg.relation_density:
                links.add(Link(a, b, RELATION, rng.choice(RELATION_POOL)))
    if cfg.mode == "second_hop":
        for left, right in zip(clusters, clusters[1:]):
            links.add(_temporal(left[-1], right[0]))
    return links


def _grow_region(rng, schema, size):
    adj = {e: set() for e in schema.event_ids}
    for link in schema.links_of_kind(TEMPORAL):
        adj[link.src].add(link.dst)
        adj[link.dst].add(link.src)
    region = {rng.choice(sorted(adj))}
    frontier = set(adj[next(iter(region))])
    while len(region) < size and frontier:
        pick = rng.choice(sorted(frontier))
        region.add(pick)
        frontier |= adj[pick]
        frontier -= region
    return region


def _instantiate(schema, chosen, graph_id, rng):
    ids = {}
    counters: dict[str, int] = {}

    def fresh(node):
        base = node.node_type.lower()
        k = counters.get(base, 0)
        counters[base] = k + 1
        return f"{base}:{k}"

    nodes, links = [], []
    for sid in sorted(chosen):
        node = schema.node(sid)
        ids[sid] = fresh(node)
        nodes.append(Node(ids[sid], EVENT, node.node_type))
    for sid in sorted(chosen):
        for link, other in schema.incident(sid):
            if link.kind == ARGUMENT and link.src == sid:
                if other not in ids:
                    ent = schema.node(other)
                    ids[other] = fresh(ent)
                    nodes.append(Node(ids[other], ENTITY, ent.node_type, f"filler {graph_id}/{ids[other]}"))
                links.append(Link(ids[sid], ids[other], ARGUMENT, link.link_type))
    for link in schema.links:
        if link.kind in (TEMPORAL, RELATION) and link.src in ids and link.dst in ids:
            links.append(Link(ids[link.src], ids[link.dst], link.kind, link.link_type))
    return EventGraph(graph_id, INSTANCE, tuple(nodes), tuple(links)), ids


def gen_instances(schema: EventGraph, cfg: GenConfig) -> list[GeneratedInstance]:
    out = []
    ev_ids = schema.event_ids
    for i in range(cfg.n_instances):
        rng = random.Random(f"instance:{cfg.seed}:{i}")
        if cfg.mode == "random":
            size = max(2, round(cfg.instance_coverage * len(ev_ids)))
            chosen = _grow_region(rng, schema, size)
        else:
            clusters = clusters_of(cfg, ev_ids)
            k = max(1, round(cfg.instance_coverage * len(clusters)))
            chosen = {e for c in rng.sample(clusters, k) for e in c}
        if len(chosen) < 2:
            raise ValueError("instance coverage leaves fewer than two events")
        full, ids = _instantiate(schema, chosen, f"inst{i:04d}", rng)
        n_hide = min(round(cfg.dropout * len(chosen)), len(chosen) - 2)
        hidden = set(rng.sample(sorted(chosen), n_hide)) if n_hide > 0 else set()
        incomplete = full.without_nodes(ids[s] for s in hidden)
        orphans = [n for n in incomplete.entity_ids if not any(l.kind == ARGUMENT for l, _ in incomplete.incident(n))]
        incomplete = incomplete.without_nodes(orphans)
        out.append(GeneratedInstance(full, incomplete, frozenset(hidden)))
    return out


def perturb_schema(schema: EventGraph, cfg: PerturbConfig) -> EventGraph:
    """Move ``floor(frac * |links|)`` random links to fresh endpoints of the same kinds.

    A moved link never lands on a position occupied in the original schema,
    so exactly that many original links disappear. Nodes are untouched.
    """
    rng = random.Random(f"perturb:{cfg.seed}")
    original = list(schema.links)
    k = math.floor(cfg.edge_change_frac * len(original))
    moved = set(rng.sample(range(len(original)), k))
    taken = set(original)
    kept = {l for i, l in enumerate(original) if i not in moved}
    events, entities = schema.event_ids, schema.entity_ids
    ends = {TEMPORAL: (events, events), ARGUMENT: (events, entities), RELATION: (entities, entities)}
    for i in sorted(moved):
        link = original[i]
        src_pool, dst_pool = ends[link.kind]
        for _ in range(10_000):
            a, b = rng.choice(src_pool), rng.choice(dst_pool)
            new = Link(a, b, link.kind, link.link_type)
            if a != b and new not in taken:
                break
        else:
            raise ValueError(f"no free endpoints left to rewire {link}")
        taken.add(new)
        kept.add(new)
    return schema.replace(graph_id=f"{schema.graph_id}-perturbed", links=kept)


def split_ids(ids, seed=0, fractions=(0.8, 0.1, 0.1)) -> dict[str, list[str]]:
    ids = sorted(ids)
    random.Random(f"split:{seed}").shuffle(ids)
    n_train = round(fractions[0] * len(ids))
    n_val = round(fractions[1] * len(ids))
    return {
        "train": sorted(ids[:n_train]),
        "val": sorted(ids[n_train : n_train + n_val]),
        "test": sorted(ids[n_train + n_val :]),
    }


@dataclass
class Dataset:
    schema: EventGraph
    graphs: dict  # graph id -> full instance graph
    incomplete: dict
    hidden: dict
    splits: dict

    def split(self, name) -> list[EventGraph]:
        return [self.graphs[g] for g in self.splits[name]]


def generate_dataset(cfg: GenConfig) -> Dataset:
    schema = gen_schema(cfg)
    generated = gen_instances(schema, cfg)
    graphs = {g.full.graph_id: g.full for g in generated}
    return Dataset(
        schema,
        graphs,
        {g.full.graph_id: g.incomplete for g in generated},
        {g.full.graph_id: g.hidden for g in generated},
        split_ids(graphs, cfg.seed),
    )


def write_dataset(ds: Dataset, out_dir, cfg: GenConfig | None = None) -> Path:
    out = Path(out_dir)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    (out / "incomplete").mkdir(exist_ok=True)
    save_graph(ds.schema, out / "schema.json")
    for gid in sorted(ds.graphs):
        save_graph(ds.graphs[gid], out / "graphs" / f"{gid}.json")
        save_graph(ds.incomplete[gid], out / "incomplete" / f"{gid}.json")
    manifest = {
        "schema": "schema.json",
        "graphs": {gid: f"graphs/{gid}.json" for gid in sorted(ds.graphs)},
        "incomplete": {gid: f"incomplete/{gid}.json" for gid in sorted(ds.graphs)},
        "hidden": {gid: sorted(ds.hidden[gid]) for gid in sorted(ds.graphs)},
        "splits": ds.splits,
        "config": asdict(cfg) if cfg is not None else None,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return path


def read_dataset(path) -> Dataset:
    """Load a dataset directory (or its ``manifest.json``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} not found")
    root = path if path.is_dir() else path.parent
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    schema = load_graph(root / manifest["schema"])
    graphs = {gid: load_graph(root / rel) for gid, rel in manifest["graphs"].items()}
    incomplete = {gid: load_graph(root / rel) for gid, rel in manifest["incomplete"].items()}
    hidden = {gid: frozenset(h) for gid, h in manifest["hidden"].items()}
    return Dataset(schema, graphs, incomplete, hidden, manifest["splits"])
