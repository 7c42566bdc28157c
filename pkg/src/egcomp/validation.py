"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

from .graph import INSTANCE, SCHEMA, EventGraph


def check_graph(g, role=None, name="graph") -> EventGraph:
    if not isinstance(g, EventGraph):
        raise TypeError(f"{name} must be an EventGraph, got {type(g).__name__}")
    if role is not None and g.role != role:
        raise ValueError(f"{name} {g.graph_id!r} has role {g.role!r}, expected {role!r}")
    return g


def check_schema(g) -> EventGraph:
    return check_graph(g, SCHEMA, "schema")


def check_instances(X, allow_empty=False) -> list[EventGraph]:
    if isinstance(X, EventGraph):
        raise TypeError("expected a sequence of instance graphs, got a single graph")
    graphs = [check_graph(g, INSTANCE, "instance") for g in X]
    if not graphs and not allow_empty:
        raise ValueError("no instance graphs given")
    return graphs


def check_pairs(pairs) -> list[tuple[str, tuple]]:
    """Normalize ``(candidate, context)`` pairs to a list with sorted tuple contexts."""
    out = []
    for item in pairs:
        try:
            e, ctx = item
        except (TypeError, ValueError):
            raise TypeError(f"expected (candidate, context) pairs, got {item!r}") from None
        if isinstance(ctx, str):
            raise TypeError(f"context for {e!r} must be a collection of node ids, not a string")
        out.append((e, tuple(sorted(ctx))))
    return out


def check_fraction(value, name, low_open=True, high_open=True) -> float:
    value = float(value)
    lo_ok = value > 0 if low_open else value >= 0
    hi_ok = value < 1 if high_open else value <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if low_open else "["
        hi = ")" if high_open else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value
