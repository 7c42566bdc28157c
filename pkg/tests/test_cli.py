import json
import subprocess
import sys

import pytest

from egcomp.cli import main
from egcomp.config import ConfigError, load_config, parse_config_text
from egcomp.graph import load_graph

from conftest import DATA

SMALL = ["--layers", "2", "--hidden-dim", "8", "--mlp-hidden", "8", "--max-path-len", "2", "--epochs", "2"]
GEN = ["--n-schema-events", "12", "--n-schema-entities", "12", "--n-instances", "20", "--gen-mode", "distance1",
       "--cluster-size", "3", "--seed", "1"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--out", str(root / "data"), *GEN]) == 0
    assert main(["train", "--data", str(root / "data"), "--out", str(root / "model.json"), *SMALL]) == 0
    return root


def test_gen_writes_manifest(workdir):
    manifest = json.loads((workdir / "data" / "manifest.json").read_text())
    assert len(manifest["graphs"]) == 20
    assert manifest["config"]["mode"] == "distance1"


def test_train_writes_checkpoint_and_log(workdir):
    assert json.loads((workdir / "model.json").read_text())["estimator"] == "SchemaGuidedCompleter"
    lines = (workdir / "model.json.log.tsv").read_text().splitlines()
    assert lines[0] == "epoch\ttrain_loss\tval_auc"
    assert len(lines) == 3


def test_train_is_byte_reproducible(workdir, tmp_path):
    assert main(["train", "--data", str(workdir / "data"), "--out", str(tmp_path / "m.json"), *SMALL]) == 0
    assert (tmp_path / "m.json").read_bytes() == (workdir / "model.json").read_bytes()


@pytest.mark.parametrize("command", ["eval-binary", "eval-complete"])
def test_eval_reports_are_byte_identical(workdir, tmp_path, command):
    for name in ("a", "b"):
        argv = [command, "--data", str(workdir / "data"), "--model", str(workdir / "model.json"),
                "--out", str(tmp_path / name), "--plot"]
        assert main(argv) == 0
    stem = command.replace("-", "_")
    for suffix in ("tsv", "json"):
        assert (tmp_path / "a" / f"{stem}.{suffix}").read_bytes() == (tmp_path / "b" / f"{stem}.{suffix}").read_bytes()
    assert len(list((tmp_path / "a").iterdir())) == 3


def test_eval_with_one_module_and_baseline(workdir, tmp_path):
    assert main(["eval-binary", "--data", str(workdir / "data"), "--model", str(workdir / "model.json"),
                 "--module", "path", "--out", str(tmp_path / "p")]) == 0
    assert main(["eval-binary", "--data", str(workdir / "data"), "--estimator", "add_all",
                 "--out", str(tmp_path / "aa")]) == 0
    assert json.loads((tmp_path / "aa" / "eval_binary.json").read_text())["auc"] == 0.5


def test_complete_writes_graph_and_sidecar(workdir, tmp_path):
    graph = sorted((workdir / "data" / "incomplete").iterdir())[0]
    out = tmp_path / "done.json"
    argv = ["complete", "--graph", str(graph), "--schema", str(workdir / "data" / "schema.json"),
            "--model", str(workdir / "model.json"), "--threshold", "0.5", "--out", str(out)]
    assert main(argv) == 0
    assert set(load_graph(graph).nodes) <= set(load_graph(out).nodes)
    sidecar = json.loads((tmp_path / "done.json.sidecar.json").read_text())
    assert "added_events" in sidecar


def test_match_without_type_overlap(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"graph_id": "g", "role": "instance",
                             "nodes": [{"id": "v", "kind": "event", "type": "Vote"}], "links": []}))
    out = tmp_path / "m.json"
    assert main(["match", "--graph", str(g), "--schema", str(DATA / "ied_schema.json"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["assignment"] == {}


def test_grad_check_passes(tmp_path):
    out = tmp_path / "gc.txt"
    assert main(["grad-check", "--layers", "2", "--hidden-dim", "16", "--mlp-hidden", "16", "--out", str(out)]) == 0
    assert out.read_text().startswith("PASS")


def test_eval_perturb_runs(workdir, tmp_path):
    argv = ["eval-perturb", "--data", str(workdir / "data"), "--fractions", "0,0.5", "--module", "path",
            "--out", str(tmp_path / "pert"), *SMALL]
    assert main(argv) == 0
    assert "monotone non-increasing" in (tmp_path / "pert" / "perturbation.tsv").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["train", "--data", "nowhere", "--out", "x.json"],
        ["train", "--estimator", "bogus", "--out", "x.json"],
        ["train", "--epochs", "-1", "--out", "x.json"],
        ["train", "--epochs", "two", "--out", "x.json"],
        ["eval-binary", "--estimator", "schema_guided", "--graphs", "a.json", "--out", "r"],
        ["gen", "--out", "d", "--dropout", "1.5"],
        ["match", "--graph", "missing.json", "--schema", "missing.json"],
        ["complete", "--graph", "a", "--schema", "b"],
    ],
)
def test_validation_errors_exit_1(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_missing_output_directory_is_validation_error(workdir, tmp_path):
    argv = ["train", "--data", str(workdir / "data"), "--out", str(tmp_path / "no" / "such" / "m.json"), *SMALL]
    assert main(argv) == 1


def test_failed_grad_check_is_runtime_error(tmp_path, monkeypatch):
    import egcomp.cli as cli

    class Failing:
        passed = False
        worst = None

        def summary(self):
            return "failed"

    monkeypatch.setattr(cli, "check_gradients", lambda *a, **k: Failing())
    assert main(["grad-check", "--layers", "1", "--hidden-dim", "4", "--mlp-hidden", "4"]) == 2


def test_config_file_and_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# small run\nepochs = 3\nreadout = attention  # trailing\nmax_additions = none\n")
    cfg = load_config(path, {"epochs": 5})
    assert (cfg.epochs, cfg.readout, cfg.max_additions) == (5, "attention", None)
    assert load_config(path).epochs == 3
    assert parse_config_text(cfg.to_text()) == {k: getattr(cfg, k) for k in parse_config_text(cfg.to_text())}


@pytest.mark.parametrize("text", ["epochs = 3\nepochs = 4\n", "nonsense\n", "unknown_key = 1\n", "lr = fast\n"])
def test_bad_config_text(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_defaults():
    cfg = load_config()
    assert (cfg.epochs, cfg.batch_size, cfg.lr, cfg.layers, cfg.max_path_len, cfg.threshold) == (20, 128, 0.005, 3, 4, 0.5)


def test_config_flag_via_cli(workdir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("estimator = add_neighbor\n")
    assert main(["eval-binary", "--config", str(cfg), "--data", str(workdir / "data"), "--out", str(tmp_path / "r")]) == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "egcomp", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "grad-check" in res.stdout
