"""Scikit-learn style estimators for schema-guided event graph completion.

Every estimator is fitted on a list of instance graphs together with the
schema they follow, then scores ``(candidate, context)`` pairs, where the
candidate is a schema event id and the context a collection of schema event
ids (the matched subgraph). :meth:`complete` runs bootstrapped inference on
a new instance graph.

>>> model = SchemaGuidedCompleter(epochs=5).fit(train_graphs, schema=schema)
>>> model.predict_proba([("s:ev3", ["s:ev1", "s:ev2"])])[:, 1]
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .autodiff import CHECKPOINT_VERSION, ParamStore
from .graph import TEMPORAL
from .inference import CompletionResult, InferenceConfig, complete
from .neighbor import GnnConfig
from .network import CompletionNetwork, FeatureMLPNetwork
from .paths import PathConfig, PathVocabulary
from .training import TrainConfig, build_samples, format_log, train
from .validation import check_instances, check_pairs, check_schema

CHECKPOINT_FORMAT = "egcomp.checkpoint"

# fixed offsets from the single random_state
MATCH_SEED_OFFSET = 0
TRAIN_SEED_OFFSET = 1


class _PairScorer(BaseEstimator):
    """Shared prediction surface; subclasses implement ``score_pairs``."""

    threshold = 0.5
    random_state = 0

    def _fit_schema(self, schema):
        self.schema_ = check_schema(schema)
        self.event_ids_ = frozenset(self.schema_.event_ids)

    def score_pairs(self, pairs) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, pairs) -> np.ndarray:
        p = self.score_pairs(pairs)
        return np.column_stack([1.0 - p, p])

    def predict(self, pairs) -> np.ndarray:
        return (self.score_pairs(pairs) > self.threshold).astype(int)

    def complete(self, graph, matching=None) -> CompletionResult:
        check_is_fitted(self, "schema_")
        cfg = InferenceConfig(threshold=self.threshold)
        seed = self.random_state + MATCH_SEED_OFFSET
        return complete(graph, self.schema_, self.score_pairs, cfg, seed, matching)

    def transform(self, X) -> list:
        """Completed copies of the given instance graphs."""
        return [self.complete(g).completed_graph for g in check_instances(X, allow_empty=True)]


class AddAll(_PairScorer):
    """Declares every candidate missing."""

    def __init__(self, threshold=0.5, random_state=0):
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X=None, y=None, *, schema, X_val=None):
        self._fit_schema(schema)
        return self

    def score_pairs(self, pairs):
        check_is_fitted(self, "schema_")
        return np.ones(len(check_pairs(pairs)))


class AddNeighbor(_PairScorer):
    """Declares a candidate missing iff it shares a temporal link with the context."""

    def __init__(self, threshold=0.5, random_state=0):
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X=None, y=None, *, schema, X_val=None):
        self._fit_schema(schema)
        adj = {e: set() for e in self.event_ids_}
        for link in self.schema_.links_of_kind(TEMPORAL):
            adj[link.src].add(link.dst)
            adj[link.dst].add(link.src)
        self.temporal_adjacency_ = adj
        return self

    def score_pairs(self, pairs):
        check_is_fitted(self, "temporal_adjacency_")
        adj = self.temporal_adjacency_
        return np.array(
            [1.0 if adj.get(e, set()) & set(ctx) else 0.0 for e, ctx in check_pairs(pairs)]
        )


class _TrainedScorer(_PairScorer):
    """Estimators whose scores come from a network trained on masked samples."""

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            balance=self.balance,
            seed=self.random_state + TRAIN_SEED_OFFSET,
        )

    def _fit_network(self, network, X, X_val):
        graphs = check_instances(X)
        match_seed = self.random_state + MATCH_SEED_OFFSET
        samples = build_samples(graphs, self.schema_, match_seed)
        val = None
        if X_val is not None:
            val = build_samples(check_instances(X_val), self.schema_, match_seed)
        result = train(network, samples, self._train_config(), val_samples=val)
        self.network_ = network
        self.params_ = result.params
        self.training_log_ = result.log
        self.best_epoch_ = result.best_epoch
        self.n_train_samples_ = len(samples)
        return self

    def score_pairs(self, pairs):
        check_is_fitted(self, "params_")
        pairs = check_pairs(pairs)
        self.network_.check_pairs(pairs)
        return self.network_.predict_proba(self.params_, pairs)

    def training_log_lines(self) -> list[str]:
        check_is_fitted(self, "training_log_")
        return format_log(self.training_log_)

    def _checkpoint_extra(self) -> dict:
        return {}

    def save(self, path) -> None:
        """Write parameters, optimizer state and configuration as one JSON document."""
        check_is_fitted(self, "params_")
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "estimator": type(self).__name__,
            "estimator_params": self.get_params(),
            "schema_id": self.schema_.graph_id,
            "network": self.network_.config(),
            **self._checkpoint_extra(),
            "best_epoch": self.best_epoch_,
            "training_log": [
                [ep, tl, None if math.isnan(va) else va] for ep, tl, va in self.training_log_
            ],
            **self.params_.to_dict(),
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, schema):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a checkpoint")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
        klass = _ESTIMATORS.get(doc["estimator"])
        if klass is None or not issubclass(klass, cls):
            raise ValueError(f"checkpoint holds a {doc['estimator']}, not a {cls.__name__}")
        est = klass(**doc["estimator_params"])
        est._fit_schema(schema)
        est.network_ = est._restore_network(doc)
        est.params_ = ParamStore.from_dict(doc)
        est.training_log_ = [
            (ep, tl, math.nan if va is None else va) for ep, tl, va in doc["training_log"]
        ]
        est.best_epoch_ = doc["best_epoch"]
        expected = est.network_.init_params(np.random.default_rng(0))
        for name in expected:
            if name not in est.params_ or est.params_[name].shape != expected[name].shape:
                raise ValueError(f"checkpoint parameter {name!r} does not fit this schema")
        return est


class SchemaGuidedCompleter(_TrainedScorer):
    """Neighbor (GCN) and bag-of-paths scores averaged into one probability.

    Parameters
    ----------
    num_layers, hidden_dim, readout
        GCN depth, width and subgraph readout (``sum``, ``average``, ``attention``).
    max_path_len, path_link_kinds
        Longest path considered and whether non-temporal links are walked.
    mlp_hidden
        Hidden width of both scoring MLPs.
    modules
        ``both``, or ``neighbor`` / ``path`` for single-module ablations.
    epochs, batch_size, lr, balance
        Training loop settings; ``balance="downsample"`` equalizes the classes.
    threshold
        Inference stops once the best candidate scores at or below this value.
    random_state
        Seeds matching tie-breaks, initialization and shuffling.
    """

    def __init__(
        self,
        num_layers=3,
        hidden_dim=256,
        readout="sum",
        max_path_len=4,
        path_link_kinds="all",
        mlp_hidden=256,
        modules="both",
        epochs=20,
        batch_size=128,
        lr=0.005,
        balance="downsample",
        threshold=0.5,
        random_state=0,
    ):
        self.num_layers = num_layers
        self.hidden_dim = hidden_dim
        self.readout = readout
        self.max_path_len = max_path_len
        self.path_link_kinds = path_link_kinds
        self.mlp_hidden = mlp_hidden
        self.modules = modules
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.balance = balance
        self.threshold = threshold
        self.random_state = random_state

    def _configs(self):
        gnn = GnnConfig(self.num_layers, self.hidden_dim, self.readout, self.mlp_hidden)
        path = PathConfig(self.max_path_len, self.path_link_kinds, self.mlp_hidden)
        return gnn, path

    def build_network(self, schema) -> CompletionNetwork:
        gnn, path = self._configs()
        return CompletionNetwork(check_schema(schema), gnn, path, self.modules)

    def fit(self, X, y=None, *, schema, X_val=None):
        """Train on self-supervised samples from ``X``; ``y`` is ignored."""
        InferenceConfig(self.threshold)
        self._fit_schema(schema)
        network = self.build_network(self.schema_)
        return self._fit_network(network, X, X_val)

    def module_proba(self, pairs) -> dict:
        """Per-module probabilities before averaging."""
        check_is_fitted(self, "params_")
        return self.network_.module_probabilities(self.params_, check_pairs(pairs))

    def _checkpoint_extra(self):
        return {
            "type_vocabulary": list(self.network_.tensors.type_vocabulary),
            "path_vocabulary": self.network_.paths.vocabulary.to_list(),
        }

    def _restore_network(self, doc):
        gnn, path = self._configs()
        return CompletionNetwork(
            self.schema_,
            gnn,
            path,
            self.modules,
            type_vocabulary=doc["type_vocabulary"],
            path_vocabulary=PathVocabulary.from_list(doc["path_vocabulary"]),
        )


class _MLPBaseline(_TrainedScorer):
    key = "type"

    def __init__(
        self,
        hidden=100,
        epochs=20,
        batch_size=128,
        lr=0.005,
        balance="downsample",
        threshold=0.5,
        random_state=0,
    ):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.balance = balance
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y=None, *, schema, X_val=None):
        self._fit_schema(schema)
        return self._fit_network(FeatureMLPNetwork(self.schema_, self.key, self.hidden), X, X_val)

    def _restore_network(self, doc):
        return FeatureMLPNetwork(self.schema_, self.key, self.hidden)


class IDMLP(_MLPBaseline):
    """MLP over the one-hot schema id of the candidate and multi-hot ids of the context."""

    key = "id"


class TypeMLP(_MLPBaseline):
    """MLP over the one-hot event type of the candidate and multi-hot types of the context."""

    key = "type"


_ESTIMATORS = {
    cls.__name__: cls for cls in (SchemaGuidedCompleter, IDMLP, TypeMLP)
}


def load_checkpoint(path, schema) -> _TrainedScorer:
    """Restore whichever trained estimator a checkpoint holds."""
    return _TrainedScorer.load(path, schema)
