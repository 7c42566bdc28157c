"""Hypothesis strategies for random event graphs."""

from hypothesis import strategies as st

from egcomp.graph import ARGUMENT, ENTITY, EVENT, INSTANCE, RELATION, SCHEMA, TEMP, TEMPORAL, EventGraph, Link, Node

EVENT_TYPES = ("Attack", "Die", "Injure", "Arrest", "Flee")
ENTITY_TYPES = ("Person", "Place", "Weapon")
ROLES = ("agent", "victim", "place", "instrument")
RELATIONS = ("near", "part_of")


@st.composite
def event_graphs(
    draw,
    role=SCHEMA,
    min_events=1,
    max_events=6,
    max_entities=4,
    event_types=EVENT_TYPES,
    relations=True,
    prefix=None,
):
    prefix = prefix if prefix is not None else ("s" if role == SCHEMA else "i")
    n_ev = draw(st.integers(min_events, max_events))
    n_en = draw(st.integers(0, max_entities))
    ev = [f"{prefix}:e{i}" for i in range(n_ev)]
    en = [f"{prefix}:n{i}" for i in range(n_en)]
    nodes = [Node(i, EVENT, draw(st.sampled_from(event_types))) for i in ev]
    nodes += [Node(i, ENTITY, draw(st.sampled_from(ENTITY_TYPES))) for i in en]
    links = set()
    pairs = [(a, b) for a in ev for b in ev if a != b]
    if pairs:
        for a, b in draw(st.lists(st.sampled_from(pairs), max_size=2 * n_ev, unique=True)):
            links.add(Link(a, b, TEMPORAL, TEMP))
    if en:
        arg = [(a, b) for a in ev for b in en]
        for a, b in draw(st.lists(st.sampled_from(arg), max_size=2 * n_en, unique=True)):
            links.add(Link(a, b, ARGUMENT, draw(st.sampled_from(ROLES))))
    rel = [(a, b) for a in en for b in en if a != b]
    if relations and rel:
        for a, b in draw(st.lists(st.sampled_from(rel), max_size=n_en, unique=True)):
            links.add(Link(a, b, RELATION, draw(st.sampled_from(RELATIONS))))
    return EventGraph(f"{prefix}-graph", role, tuple(nodes), tuple(links))


def schemas(**kw):
    return event_graphs(role=SCHEMA, **kw)


def instances(**kw):
    return event_graphs(role=INSTANCE, **kw)
