"""Binary and hide-and-predict evaluation, plus the schema perturbation sweep.

A *scorer* is anything with a ``score_pairs(pairs)`` method (every
estimator in :mod:`egcomp.estimators`) or a plain callable mapping a list of
``(candidate, context)`` pairs to probabilities.
"""

from __future__ import annotations

import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import EventGraph
from .inference import InferenceConfig, complete
from .matching import match
from .metrics import accuracy, roc_auc, set_f1, set_jaccard
from .synth import PerturbConfig, perturb_schema
from .training import samples_for_subgraph
from .validation import check_fraction, check_instances, check_schema

logger = logging.getLogger(__name__)

DEFAULT_SWEEP = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def as_scorer(model):
    if hasattr(model, "score_pairs"):
        return model.score_pairs
    if callable(model):
        return model
    raise TypeError(f"{type(model).__name__} is neither a scorer nor callable")


def module_scorer(model, module: str):
    """Scores from one module of a fitted combined model (``both`` keeps the average)."""
    if module == "both":
        return model.score_pairs
    if module not in ("neighbor", "path"):
        raise ValueError(f"unknown module {module!r}")

    def score(pairs):
        return model.module_proba(pairs)[module]

    return score


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class BinaryEvalReport:
    accuracy: float
    auc: float  # NaN when only one class is present
    n_pos: int
    n_neg: int
    scores: np.ndarray
    samples: list = field(repr=False, default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def summary(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": None if math.isnan(self.auc) else self.auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }

    def table(self) -> str:
        lines = ["graph_id\tcandidate\tcontext\tlabel\tscore"]
        for s, p in zip(self.samples, self.scores):
            lines.append(f"{s.source_graph_id}\t{s.candidate}\t{','.join(s.context)}\t{s.label}\t{p!r}")
        return "\n".join(lines) + "\n"


class _SampleBuilder:
    # picklable so that --jobs can ship it to worker processes
    def __init__(self, schema, seed):
        self.schema, self.seed = schema, seed

    def __call__(self, inst):
        subgraph = match(inst, self.schema, self.seed).matched_subgraph
        return samples_for_subgraph(inst.graph_id, subgraph, self.schema.event_ids)


def eval_binary(instances, schema: EventGraph, scorer, seed: int = 0, jobs: int = 1) -> BinaryEvalReport:
    """Accuracy (threshold 0.5) and AUC over unbalanced masked samples."""
    graphs = sorted(check_instances(instances), key=lambda g: g.graph_id)
    schema = check_schema(schema)
    samples = [s for group in _map(_SampleBuilder(schema, seed), graphs, jobs) for s in group]
    score = as_scorer(scorer)
    scores = np.asarray(score([s.pair for s in samples]), dtype=np.float64) if samples else np.zeros(0)
    labels = [s.label for s in samples]
    n_pos = int(sum(labels))
    return BinaryEvalReport(
        accuracy=accuracy(labels, scores),
        auc=roc_auc(labels, scores),
        n_pos=n_pos,
        n_neg=len(labels) - n_pos,
        scores=scores,
        samples=samples,
    )


@dataclass(frozen=True)
class GraphCompletionScore:
    graph_id: str
    hidden_nodes: tuple  # instance node ids removed
    truth: frozenset  # schema nodes
    predicted: frozenset
    jaccard: float
    f1: float
    flagged: str | None = None


@dataclass
class CompletionEvalReport:
    graphs: list

    @property
    def mean_jaccard(self) -> float:
        return float(np.mean([g.jaccard for g in self.graphs])) if self.graphs else math.nan

    @property
    def f1(self) -> float:
        return float(np.mean([g.f1 for g in self.graphs])) if self.graphs else math.nan

    @property
    def flagged(self) -> list:
        return [g.graph_id for g in self.graphs if g.flagged]

    def summary(self) -> dict:
        return {
            "n_graphs": len(self.graphs),
            "mean_jaccard": self.mean_jaccard,
            "f1": self.f1,
            "flagged": self.flagged,
        }

    def table(self) -> str:
        lines = ["graph_id\tjaccard\tf1\ttruth\tpredicted\tflag"]
        for g in self.graphs:
            lines.append(
                f"{g.graph_id}\t{g.jaccard!r}\t{g.f1!r}\t{','.join(sorted(g.truth))}"
                f"\t{','.join(sorted(g.predicted))}\t{g.flagged or ''}"
            )
        return "\n".join(lines) + "\n"


def hide_events(graph: EventGraph, hide_frac: float, seed: int) -> tuple:
    """``ceil(hide_frac * n)`` (at least one) event ids, reproducible per graph and seed."""
    events = graph.event_ids
    k = min(len(events), max(1, math.ceil(hide_frac * len(events))))
    return tuple(sorted(random.Random(f"hide:{seed}:{graph.graph_id}").sample(events, k)))


class _GraphCompleter:
    def __init__(self, schema, scorer, threshold, hide_frac, seed):
        self.schema, self.scorer = schema, scorer
        self.threshold, self.hide_frac, self.seed = threshold, hide_frac, seed

    def __call__(self, graph):
        hidden = hide_events(graph, self.hide_frac, self.seed)
        full = match(graph, self.schema, self.seed).assignment
        remainder = graph.without_nodes(hidden)
        m = match(remainder, self.schema, self.seed)
        lost = [h for h in hidden if h not in full]
        if lost:
            logger.warning("%s: hidden nodes %s match no schema event", graph.graph_id, lost)
        # schema nodes still covered by the remainder are not missing
        truth = frozenset(full[h] for h in hidden if h in full) - m.matched_subgraph
        if not m.matched_subgraph:
            return GraphCompletionScore(graph.graph_id, hidden, truth, frozenset(), 0.0, 0.0, "empty_subgraph")
        cfg = InferenceConfig(threshold=self.threshold)
        result = complete(remainder, self.schema, self.scorer, cfg, self.seed, matching=m)
        predicted = result.final_subgraph - result.initial_subgraph
        return GraphCompletionScore(
            graph.graph_id, hidden, truth, predicted, set_jaccard(predicted, truth), set_f1(predicted, truth)
        )


def eval_completion(
    instances,
    schema: EventGraph,
    model,
    hide_frac: float = 0.1,
    seed: int = 0,
    threshold: float | None = None,
    jobs: int = 1,
) -> CompletionEvalReport:
    """Hide events, complete the remainder, compare added schema nodes with the hidden ones.

    ``threshold`` defaults to the model's own ``threshold`` attribute, else 0.5.
    """
    check_fraction(hide_frac, "hide_frac")
    graphs = sorted(check_instances(instances), key=lambda g: g.graph_id)
    schema = check_schema(schema)
    if threshold is None:
        threshold = getattr(model, "threshold", 0.5)
    worker = _GraphCompleter(schema, as_scorer(model), threshold, hide_frac, seed)
    return CompletionEvalReport(_map(worker, graphs, jobs))


@dataclass
class SweepRow:
    edge_change_frac: float
    auc: float
    accuracy: float


@dataclass
class SweepReport:
    rows: list

    @property
    def decreases(self) -> list:
        """``(lo, hi)`` fraction pairs where AUC did not fall from ``lo`` to the next step ``hi``."""
        return [
            (a.edge_change_frac, b.edge_change_frac)
            for a, b in zip(self.rows, self.rows[1:])
            if not b.auc <= a.auc
        ]

    @property
    def monotone(self) -> bool:
        return not self.decreases

    @property
    def endpoints_hold(self) -> bool:
        return self.rows[0].auc >= self.rows[-1].auc

    def report(self) -> str:
        lines = ["edge_change_frac\tauc\taccuracy"]
        lines += [f"{r.edge_change_frac}\t{r.auc!r}\t{r.accuracy!r}" for r in self.rows]
        lines.append(f"# monotone non-increasing: {'yes' if self.monotone else 'no'}")
        for lo, hi in self.decreases:
            lines.append(f"# auc rose between {lo} and {hi}")
        first, last = self.rows[0], self.rows[-1]
        verdict = "holds" if self.endpoints_hold else "violated"
        lines.append(f"# auc({first.edge_change_frac}) >= auc({last.edge_change_frac}): {verdict}")
        return "\n".join(lines) + "\n"


def perturbation_sweep(
    make_model,
    train_graphs,
    test_graphs,
    schema: EventGraph,
    fractions=DEFAULT_SWEEP,
    seed: int = 0,
    val_graphs=None,
    module: str = "both",
) -> SweepReport:
    """Retrain and evaluate on progressively rewired copies of ``schema``.

    ``make_model()`` returns a fresh unfitted estimator; ``module`` picks which
    module's scores are evaluated when the model is a combined one.
    """
    rows = []
    for frac in fractions:
        perturbed = perturb_schema(schema, PerturbConfig(frac, seed))
        model = make_model().fit(train_graphs, schema=perturbed, X_val=val_graphs)
        scorer = module_scorer(model, module) if module != "both" else model
        rep = eval_binary(test_graphs, perturbed, scorer, seed)
        logger.info("perturbation %.2f auc %.4f", frac, rep.auc)
        rows.append(SweepRow(float(frac), rep.auc, rep.accuracy))
    return SweepReport(rows)


def histogram_table(scores, labels, bins=20) -> str:
    """Score histogram by class, for external plotting."""
    scores, labels = np.asarray(scores), np.asarray(labels)
    edges = np.linspace(0.0, 1.0, bins + 1)
    pos, _ = np.histogram(scores[labels == 1], bins=edges)
    neg, _ = np.histogram(scores[labels == 0], bins=edges)
    lines = ["bin_low\tbin_high\tpositives\tnegatives"]
    lines += [f"{edges[i]:.3f}\t{edges[i + 1]:.3f}\t{pos[i]}\t{neg[i]}" for i in range(bins)]
    return "\n".join(lines) + "\n"


def write_report(out_dir, name, summary: dict, table: str, extra: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.tsv").write_text(table, encoding="utf-8")
    (out / f"{name}.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    for fname, text in (extra or {}).items():
        (out / fname).write_text(text, encoding="utf-8")

