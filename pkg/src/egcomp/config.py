"""Run configuration: one flat ``key = value`` file plus command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .inference import InferenceConfig
from .neighbor import GnnConfig
from .paths import PathConfig
from .synth import GenConfig, PerturbConfig
from .training import TrainConfig

MODEL_KINDS = ("schema_guided", "id_mlp", "type_mlp", "add_all", "add_neighbor")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # model
    estimator: str = "schema_guided"
    layers: int = 3
    hidden_dim: int = 256
    readout: str = "sum"
    mlp_hidden: int = 256
    max_path_len: int = 4
    path_link_kinds: str = "all"
    modules: str = "both"
    baseline_hidden: int = 100
    # training
    epochs: int = 20
    batch_size: int = 128
    lr: float = 0.005
    balance: str = "downsample"
    # inference and evaluation
    threshold: float = 0.5
    max_additions: int | None = None
    hide_frac: float = 0.1
    # generation
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
    gen_mode: str = "random"
    cluster_size: int = 5
    n_temporal_links: int | None = None
    n_argument_links: int | None = None
    n_relation_links: int | None = None
    edge_change_frac: float = 0.0
    # global
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.estimator not in MODEL_KINDS:
            raise ConfigError(f"estimator must be one of {MODEL_KINDS}, got {self.estimator!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0.0 < self.hide_frac < 1.0:
            raise ConfigError("hide_frac must lie in (0, 1)")
        if self.baseline_hidden < 1:
            raise ConfigError("baseline_hidden must be >= 1")
        try:
            self.gnn()
            self.path()
            self.train()
            self.inference()
            self.gen()
            self.perturb()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def gnn(self) -> GnnConfig:
        return GnnConfig(self.layers, self.hidden_dim, self.readout, self.mlp_hidden)

    def path(self) -> PathConfig:
        return PathConfig(self.max_path_len, self.path_link_kinds, self.mlp_hidden)

    def train(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.balance, self.seed)

    def inference(self) -> InferenceConfig:
        return InferenceConfig(self.threshold, self.max_additions)

    def gen(self) -> GenConfig:
        return GenConfig(
            n_event_types=self.n_event_types,
            n_entity_types=self.n_entity_types,
            n_schema_events=self.n_schema_events,
            n_schema_entities=self.n_schema_entities,
            temporal_density=self.temporal_density,
            argument_density=self.argument_density,
            relation_density=self.relation_density,
            n_instances=self.n_instances,
            instance_coverage=self.instance_coverage,
            dropout=self.dropout,
            seed=self.seed,
            mode=self.gen_mode,
            cluster_size=self.cluster_size,
            n_temporal_links=self.n_temporal_links,
            n_argument_links=self.n_argument_links,
            n_relation_links=self.n_relation_links,
        )

    def perturb(self) -> PerturbConfig:
        return PerturbConfig(self.edge_change_frac, self.seed)

    def build_estimator(self):
        from . import estimators as est

        common = dict(threshold=self.threshold, random_state=self.seed)
        if self.estimator == "add_all":
            return est.AddAll(**common)
        if self.estimator == "add_neighbor":
            return est.AddNeighbor(**common)
        train = dict(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, balance=self.balance)
        if self.estimator in ("id_mlp", "type_mlp"):
            klass = est.IDMLP if self.estimator == "id_mlp" else est.TypeMLP
            return klass(hidden=self.baseline_hidden, **train, **common)
        return est.SchemaGuidedCompleter(
            num_layers=self.layers,
            hidden_dim=self.hidden_dim,
            readout=self.readout,
            max_path_len=self.max_path_len,
            path_link_kinds=self.path_link_kinds,
            mlp_hidden=self.mlp_hidden,
            modules=self.modules,
            **train,
            **common,
        )

    def to_text(self) -> str:
        return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in dataclasses.asdict(self).items())


def _field_types() -> dict:
    defaults = {f.name: f.default for f in fields(RunConfig)}
    kinds = {}
    for f in fields(RunConfig):
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        kinds[f.name] = (kind.split(" |")[0], "None" in kind, defaults[f.name])
    return kinds


def parse_value(key: str, raw: str):
    kinds = _field_types()
    if key not in kinds:
        raise ConfigError(f"unknown configuration key {key!r}")
    base, optional, _ = kinds[key]
    raw = raw.strip()
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {base}, got {raw!r}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = parse_value(key, raw)
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then ``overrides`` (``None`` values are skipped)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in _field_types():
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = value
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_keys() -> dict:
    """Key -> (type name, optional, default); the CLI builds its flags from this."""
    return _field_types()
