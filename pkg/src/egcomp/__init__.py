"""Schema-guided event graph completion."""

from .estimators import IDMLP, AddAll, AddNeighbor, SchemaGuidedCompleter, TypeMLP
from .graph import EventGraph, Link, Node, load_graph, save_graph
from .matching import MatchResult, match

__version__ = "0.1.0"

__all__ = [
    "AddAll",
    "AddNeighbor",
    "EventGraph",
    "IDMLP",
    "Link",
    "MatchResult",
    "Node",
    "SchemaGuidedCompleter",
    "TypeMLP",
    "load_graph",
    "match",
    "save_graph",
]
