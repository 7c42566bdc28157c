"""Typed event graphs shared by schemas and instances, plus their JSON file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

EVENT = "event"
ENTITY = "entity"
NODE_KINDS = (EVENT, ENTITY)

TEMPORAL = "temporal"
ARGUMENT = "argument"
RELATION = "relation"
LINK_KINDS = (TEMPORAL, ARGUMENT, RELATION)

TEMP = "TEMP"
TEMP_REV = "TEMP_REV"

SCHEMA = "schema"
INSTANCE = "instance"
ROLES = (SCHEMA, INSTANCE)

_NODE_FIELDS = {"id", "kind", "type", "label"}
_LINK_FIELDS = {"src", "dst", "kind", "type"}
_GRAPH_FIELDS = {"graph_id", "role", "nodes", "links"}

# endpoint kinds each link kind must connect
_ENDPOINTS = {
    TEMPORAL: (EVENT, EVENT),
    ARGUMENT: (EVENT, ENTITY),
    RELATION: (ENTITY, ENTITY),
}


class GraphError(ValueError):
    """Base class for graph file and graph content errors."""


class GraphParseError(GraphError):
    """The file is not a well-formed graph document."""


class GraphValidationError(GraphError):
    """The graph violates a structural invariant."""


@dataclass(frozen=True, order=True)
class Node:
    id: str
    kind: str
    node_type: str
    label: str | None = None


@dataclass(frozen=True, order=True)
class Link:
    src: str
    dst: str
    kind: str
    link_type: str


@dataclass(frozen=True, eq=False)
class EventGraph:
    """An immutable heterogeneous graph of event and entity nodes.

    Nodes and links are kept sorted so iteration order never depends on how
    the graph was built. Construction validates every invariant and raises
    :class:`GraphValidationError` naming the first offending element.
    """

    graph_id: str
    role: str
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)
    _adj: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        links = tuple(sorted(self.links))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", links)
        by_id = {}
        for node in nodes:
            _validate_node(node)
            if node.id in by_id:
                raise GraphValidationError(f"duplicate node id {node.id!r}")
            by_id[node.id] = node
        if self.role not in ROLES:
            raise GraphValidationError(f"unknown graph role {self.role!r}")
        seen = set()
        adj: dict[str, list[tuple[Link, str]]] = {nid: [] for nid in by_id}
        for link in links:
            _validate_link(link, by_id)
            if link in seen:
                raise GraphValidationError(f"duplicate link {_fmt_link(link)}")
            seen.add(link)
            adj[link.src].append((link, link.dst))
            adj[link.dst].append((link, link.src))
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_adj", adj)

    def __eq__(self, other):
        if not isinstance(other, EventGraph):
            return NotImplemented
        return (
            self.graph_id == other.graph_id
            and self.role == other.role
            and set(self.nodes) == set(other.nodes)
            and set(self.links) == set(other.links)
        )

    def __hash__(self):
        return hash((self.graph_id, self.role, self.nodes, self.links))

    def __contains__(self, node_id):
        return node_id in self._by_id

    def node(self, node_id: str) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id!r} in graph {self.graph_id!r}") from None

    def node_type(self, node_id: str) -> str:
        """The type function over nodes."""
        return self.node(node_id).node_type

    @property
    def event_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == EVENT]

    @property
    def entity_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == ENTITY]

    def incident(self, node_id: str) -> list[tuple[Link, str]]:
        """``(link, other_endpoint)`` pairs for every link touching ``node_id``."""
        self.node(node_id)
        return self._adj[node_id]

    def links_of_kind(self, kind: str) -> list[Link]:
        return [link for link in self.links if link.kind == kind]

    def replace(self, *, graph_id=None, role=None, nodes=None, links=None) -> EventGraph:
        return EventGraph(
            graph_id=self.graph_id if graph_id is None else graph_id,
            role=self.role if role is None else role,
            nodes=self.nodes if nodes is None else tuple(nodes),
            links=self.links if links is None else tuple(links),
        )

    def without_nodes(self, node_ids: Iterable[str]) -> EventGraph:
        """Copy of the graph with ``node_ids`` and all their incident links removed."""
        drop = set(node_ids)
        return self.replace(
            nodes=[n for n in self.nodes if n.id not in drop],
            links=[l for l in self.links if l.src not in drop and l.dst not in drop],
        )

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            entry = {"id": n.id, "kind": n.kind, "type": n.node_type}
            if n.label is not None:
                entry["label"] = n.label
            nodes.append(entry)
        links = [
            {"src": l.src, "dst": l.dst, "kind": l.kind, "type": l.link_type} for l in self.links
        ]
        return {"graph_id": self.graph_id, "role": self.role, "nodes": nodes, "links": links}

    @classmethod
    def from_dict(cls, doc) -> EventGraph:
        if not isinstance(doc, dict):
            raise GraphParseError("graph document must be a JSON object")
        _check_fields(doc, _GRAPH_FIELDS, _GRAPH_FIELDS, "graph")
        if not isinstance(doc["nodes"], list) or not isinstance(doc["links"], list):
            raise GraphParseError("'nodes' and 'links' must be arrays")
        nodes = []
        for i, entry in enumerate(doc["nodes"]):
            where = f"nodes[{i}]"
            if not isinstance(entry, dict):
                raise GraphParseError(f"{where} must be an object")
            _check_fields(entry, _NODE_FIELDS, _NODE_FIELDS - {"label"}, where)
            _check_strings(entry, where)
            nodes.append(Node(entry["id"], entry["kind"], entry["type"], entry.get("label")))
        links = []
        for i, entry in enumerate(doc["links"]):
            where = f"links[{i}]"
            if not isinstance(entry, dict):
                raise GraphParseError(f"{where} must be an object")
            _check_fields(entry, _LINK_FIELDS, _LINK_FIELDS, where)
            _check_strings(entry, where)
            links.append(Link(entry["src"], entry["dst"], entry["kind"], entry["type"]))
        for key in ("graph_id", "role"):
            if not isinstance(doc[key], str):
                raise GraphParseError(f"{key!r} must be a string")
        return cls(doc["graph_id"], doc["role"], tuple(nodes), tuple(links))


def _check_fields(entry, allowed, required, where):
    unknown = set(entry) - allowed
    if unknown:
        raise GraphParseError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(entry)
    if missing:
        raise GraphParseError(f"{where}: missing field(s) {sorted(missing)}")


def _check_strings(entry, where):
    for key, value in entry.items():
        if not isinstance(value, str):
            raise GraphParseError(f"{where}.{key} must be a string")


def _fmt_link(link: Link) -> str:
    return f"{link.src} -[{link.kind}:{link.link_type}]-> {link.dst}"


def _validate_node(node: Node) -> None:
    if not node.id:
        raise GraphValidationError("node with empty id")
    if node.kind not in NODE_KINDS:
        raise GraphValidationError(f"node {node.id!r} has unknown kind {node.kind!r}")
    if not node.node_type:
        raise GraphValidationError(f"node {node.id!r} has empty type")


def _validate_link(link: Link, by_id: dict) -> None:
    if link.kind not in LINK_KINDS:
        raise GraphValidationError(f"link {_fmt_link(link)} has unknown kind {link.kind!r}")
    for end in (link.src, link.dst):
        if end not in by_id:
            raise GraphValidationError(f"link {_fmt_link(link)} refers to unknown node id {end!r}")
    if link.src == link.dst:
        raise GraphValidationError(f"self-loop link {_fmt_link(link)}")
    src_kind, dst_kind = _ENDPOINTS[link.kind]
    if by_id[link.src].kind != src_kind or by_id[link.dst].kind != dst_kind:
        raise GraphValidationError(
            f"{link.kind} link {_fmt_link(link)} must connect {src_kind} -> {dst_kind}"
        )
    if link.kind == TEMPORAL and link.link_type != TEMP:
        raise GraphValidationError(f"temporal link {_fmt_link(link)} must have type {TEMP!r}")
    if not link.link_type:
        raise GraphValidationError(f"link {_fmt_link(link)} has empty type")


def load_graph(path) -> EventGraph:
    """Read and validate a graph file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"{path}: {exc}") from exc
    return EventGraph.from_dict(doc)


def dumps_graph(g: EventGraph) -> str:
    return json.dumps(g.to_dict(), ensure_ascii=False, indent=1) + "\n"


def save_graph(g: EventGraph, path) -> None:
    Path(path).write_text(dumps_graph(g), encoding="utf-8")


def neighbors(g: EventGraph, node_id: str, kinds: Iterable[str] | None = None) -> set[str]:
    """Nodes adjacent to ``node_id`` in either direction, optionally by link kind."""
    allowed = None if kinds is None else set(kinds)
    return {
        other for link, other in g.incident(node_id) if allowed is None or link.kind in allowed
    }


def temporal_neighbors(g: EventGraph, node_id: str) -> set[str]:
    return neighbors(g, node_id, (TEMPORAL,))
