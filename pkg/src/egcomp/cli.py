"""Command line entry point.

Every subcommand runs in two phases. The first loads and validates all
inputs and writes nothing; any failure there exits with status 1. The second
does the work and writes outputs; a failure there exits with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, config_keys, load_config, parse_value
from .estimators import AddAll, AddNeighbor, load_checkpoint
from .evaluation import (
    DEFAULT_SWEEP,
    eval_binary,
    eval_completion,
    histogram_table,
    module_scorer,
    perturbation_sweep,
    write_report,
)
from .graph import SCHEMA, load_graph, save_graph
from .inference import complete
from .matching import match
from .network import MODULES, CompletionNetwork
from .synth import GenConfig, gen_schema, generate_dataset, read_dataset, write_dataset
from .training import check_gradients, probe_samples
from .validation import check_instances, check_schema

logger = logging.getLogger("egcomp")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
TRAINABLE = ("schema_guided", "id_mlp", "type_mlp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_flags(parser):
    group = parser.add_argument_group("configuration (file keys as --kebab-case)")
    group.add_argument("--config", help="key = value configuration file")
    for key in config_keys():
        flag = "--" + key.replace("_", "-")
        # parsed later so the file and the flag share one converter
        group.add_argument(flag, dest=f"cfg_{key}", default=None, metavar=key.upper())


def _data_flags(parser, need_graphs=True):
    parser.add_argument("--data", help="dataset directory written by `gen`")
    parser.add_argument("--schema", help="schema graph file (overrides the dataset's)")
    if need_graphs:
        parser.add_argument("--graphs", nargs="+", help="instance graph files instead of --data")
        parser.add_argument("--split", default="test", choices=("train", "val", "test"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="egcomp", description="Schema-guided event graph completion.")
    parser.add_argument("--version", action="version", version=f"egcomp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    _config_flags(p)

    p = sub.add_parser("match", help="match an instance graph into a schema")
    p.add_argument("--graph", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", help="output file (default: stdout)")
    _config_flags(p)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _data_flags(p, need_graphs=False)
    p.add_argument("--graphs", nargs="+", help="training graph files instead of --data")
    p.add_argument("--val-graphs", nargs="+", help="validation graph files")
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--log", help="training log (default: <out>.log.tsv)")
    _config_flags(p)

    for name, text in (("eval-binary", "accuracy and AUC"), ("eval-complete", "hide-and-predict F1")):
        p = sub.add_parser(name, help=text)
        _data_flags(p)
        p.add_argument("--model", help="checkpoint (baselines add_all / add_neighbor need none)")
        p.add_argument("--module", default="both", choices=MODULES, help="score with one module only")
        p.add_argument("--out", required=True, help="report directory")
        p.add_argument("--plot", action="store_true", help="also write plotting data")
        _config_flags(p)

    p = sub.add_parser("eval-perturb", help="retrain and evaluate on rewired schemas")
    _data_flags(p, need_graphs=False)
    p.add_argument("--fractions", default=",".join(str(f) for f in DEFAULT_SWEEP))
    p.add_argument("--module", default="both", choices=MODULES)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--plot", action="store_true")
    _config_flags(p)

    p = sub.add_parser("complete", help="complete one instance graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--model", help="checkpoint (baselines add_all / add_neighbor need none)")
    p.add_argument("--out", required=True, help="completed graph file")
    p.add_argument("--sidecar", help="added-node report (default: <out>.sidecar.json)")
    _config_flags(p)

    p = sub.add_parser("grad-check", help="compare backprop with central differences")
    p.add_argument("--schema", help="schema file (default: a generated 5-event schema)")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out", help="report file")
    _config_flags(p)
    return parser


def _run_config(args):
    overrides = {}
    for key in config_keys():
        raw = getattr(args, f"cfg_{key}", None)
        if raw is not None:
            overrides[key] = parse_value(key, raw)
    return load_config(args.config, overrides)


def _writable(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory {parent} does not exist")
    return Path(path)


def _load_schema(path):
    return check_schema(load_graph(path))


def _inputs(args, split):
    """Schema plus the requested graph lists, from --data or explicit files."""
    if args.data:
        ds = read_dataset(args.data)
        schema = _load_schema(args.schema) if args.schema else ds.schema
        return schema, {name: ds.split(name) for name in ds.splits}
    if not args.schema:
        raise UsageError("give --data, or --schema with --graphs")
    if not getattr(args, "graphs", None):
        raise UsageError("give --data or --graphs")
    graphs = check_instances([load_graph(p) for p in args.graphs])
    out = {split: graphs}
    if getattr(args, "val_graphs", None):
        out["val"] = check_instances([load_graph(p) for p in args.val_graphs])
    return _load_schema(args.schema), out


def _scoring_model(args, cfg, schema):
    if args.model:
        model = load_checkpoint(args.model, schema)
        model.set_params(threshold=cfg.threshold)
        return model
    if cfg.estimator == "add_all":
        return AddAll(threshold=cfg.threshold).fit(schema=schema)
    if cfg.estimator == "add_neighbor":
        return AddNeighbor(threshold=cfg.threshold).fit(schema=schema)
    raise UsageError(f"estimator {cfg.estimator!r} needs a --model checkpoint")


def _scorer(model, module):
    if module == "both":
        return model
    if not hasattr(model, "module_proba"):
        raise UsageError("--module needs a combined-model checkpoint")
    if model.modules != "both" and model.modules != module:
        raise UsageError(f"checkpoint has no {module} module")
    return module_scorer(model, module)


def cmd_gen(args, cfg):
    ds = generate_dataset(cfg.gen())
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise UsageError(f"{out} exists and is not empty")

    def run():
        path = write_dataset(ds, out, cfg.gen())
        print(path)

    return run


def cmd_match(args, cfg):
    graph = load_graph(args.graph)
    schema = _load_schema(args.schema)
    if graph.role == SCHEMA:
        raise UsageError("--graph must be an instance graph")
    out = _writable(args.out) if args.out else None

    def run():
        text = match(graph, schema, cfg.seed).dumps()
        if out:
            out.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)

    return run


def cmd_train(args, cfg):
    if cfg.estimator not in TRAINABLE:
        raise UsageError(f"estimator {cfg.estimator!r} has nothing to train")
    schema, graphs = _inputs(args, "train")
    if "train" not in graphs:
        raise UsageError("no training graphs")
    val = graphs.get("val") or None
    model = cfg.build_estimator()
    out = _writable(args.out)
    log = _writable(args.log or f"{args.out}.log.tsv")

    def run():
        model.fit(graphs["train"], schema=schema, X_val=val)
        model.save(out)
        log.write_text("epoch\ttrain_loss\tval_auc\n" + "".join(l + "\n" for l in model.training_log_lines()))
        print(out)

    return run


def cmd_eval_binary(args, cfg):
    schema, graphs = _inputs(args, args.split)
    model = _scoring_model(args, cfg, schema)
    scorer = _scorer(model, args.module)
    out = Path(args.out)

    def run():
        rep = eval_binary(graphs[args.split], schema, scorer, cfg.seed, cfg.jobs)
        extra = {"scores_hist.tsv": histogram_table(rep.scores, rep.labels)} if args.plot else None
        write_report(out, "eval_binary", rep.summary(), rep.table(), extra)
        print(json.dumps(rep.summary(), sort_keys=True))

    return run


def cmd_eval_complete(args, cfg):
    schema, graphs = _inputs(args, args.split)
    model = _scoring_model(args, cfg, schema)
    scorer = _scorer(model, args.module)
    out = Path(args.out)

    def run():
        rep = eval_completion(graphs[args.split], schema, scorer, cfg.hide_frac, cfg.seed, cfg.threshold, cfg.jobs)
        extra = None
        if args.plot:
            rows = "".join(f"{g.graph_id}\t{g.jaccard!r}\t{g.f1!r}\n" for g in rep.graphs)
            extra = {"completion_plot.tsv": "graph_id\tjaccard\tf1\n" + rows}
        write_report(out, "eval_complete", rep.summary(), rep.table(), extra)
        print(json.dumps(rep.summary(), sort_keys=True))

    return run


def cmd_eval_perturb(args, cfg):
    if cfg.estimator not in TRAINABLE:
        raise UsageError("the perturbation sweep retrains a model; pick a trainable one")
    if not args.data:
        raise UsageError("eval-perturb needs --data")
    schema, graphs = _inputs(args, "test")
    try:
        fractions = [float(x) for x in args.fractions.split(",")]
    except ValueError:
        raise UsageError(f"bad --fractions {args.fractions!r}") from None
    if not fractions or any(not 0.0 <= f <= 1.0 for f in fractions):
        raise UsageError("fractions must lie in [0, 1]")
    if args.module != "both" and cfg.modules != "both" and cfg.modules != args.module:
        raise UsageError(f"--modules {cfg.modules} has no {args.module} module")
    out = Path(args.out)

    def run():
        rep = perturbation_sweep(
            cfg.build_estimator,
            graphs["train"],
            graphs["test"],
            schema,
            fractions,
            cfg.seed,
            val_graphs=graphs.get("val") or None,
            module=args.module,
        )
        summary = {
            "rows": [vars(r) for r in rep.rows],
            "monotone": rep.monotone,
            "endpoints_hold": rep.endpoints_hold,
            "module": args.module,
        }
        extra = None
        if args.plot:
            extra = {"perturbation_plot.tsv": "".join(f"{r.edge_change_frac}\t{r.auc!r}\n" for r in rep.rows)}
        write_report(out, "perturbation", summary, rep.report(), extra)
        sys.stdout.write(rep.report())

    return run


def cmd_complete(args, cfg):
    graph = load_graph(args.graph)
    schema = _load_schema(args.schema)
    check_instances([graph])
    model = _scoring_model(args, cfg, schema)
    out = _writable(args.out)
    sidecar = _writable(args.sidecar or f"{args.out}.sidecar.json")

    def run():
        result = complete(graph, schema, model.score_pairs, cfg.inference(), cfg.seed)
        save_graph(result.completed_graph, out)
        sidecar.write_text(result.dumps_sidecar(), encoding="utf-8")
        if result.warning:
            logger.warning("%s: %s", graph.graph_id, result.warning)
        print(out)

    return run


def cmd_grad_check(args, cfg):
    if args.schema:
        schema = _load_schema(args.schema)
    else:
        schema = gen_schema(GenConfig(n_schema_events=5, n_schema_entities=4, seed=cfg.seed))
    if args.samples < 1 or not args.tolerance > 0:
        raise UsageError("--samples must be >= 1 and --tolerance positive")
    network = CompletionNetwork(schema, cfg.gnn(), cfg.path(), cfg.modules)
    samples = probe_samples(schema, args.samples, cfg.seed)
    out = _writable(args.out) if args.out else None

    def run():
        rep = check_gradients(network, samples, cfg.seed, args.tolerance)
        text = rep.summary() + "\n"
        if rep.worst is not None:
            name, idx, a, n = rep.worst
            text += f"worst {name}{list(idx)} analytic={float(a)!r} numeric={float(n)!r}\n"
        if out:
            out.write_text(text, encoding="utf-8")
        sys.stdout.write(text)
        if not rep.passed:
            raise RuntimeError("gradient check failed")

    return run


COMMANDS = {
    "gen": cmd_gen,
    "match": cmd_match,
    "train": cmd_train,
    "eval-binary": cmd_eval_binary,
    "eval-complete": cmd_eval_complete,
    "eval-perturb": cmd_eval_perturb,
    "complete": cmd_complete,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"egcomp: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _run_config(args)
        run = COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"egcomp {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        run()
    except Exception as exc:  # noqa: BLE001 - reported, then mapped to the runtime exit code
        print(f"egcomp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK

