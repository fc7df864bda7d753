import json
import os

import pytest

from qasian import cli
from qasian.errors import ValidationError


def run(tmp_path, *argv):
    return cli.main(["--outdir", str(tmp_path), *argv])


class TestConfig:
    def test_defaults_complete(self):
        cfg = cli.load_config()
        assert cfg["n_eta"] == 4
        assert cfg["params"]["sigma"] == 0.3
        assert cfg["extraction"]["ae_mode"] == "exact"

    def test_preset_deep_merge(self):
        cfg = cli.load_config(preset="smoke")
        assert cfg["n_eta"] == 3
        assert cfg["params"]["sigma"] == 0.5
        # untouched nested keys survive the merge
        assert cfg["params"]["r"] == 0.05
        assert cfg["extraction"]["ae_eps"] == 1e-4

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            cli.load_config(preset="nope")

    def test_file_overrides(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"params": {"sigma": 0.7}, "n_eta": 5}))
        cfg = cli.load_config(path=str(p))
        assert cfg["params"]["sigma"] == 0.7
        assert cfg["n_eta"] == 5
        assert cfg["params"]["K"] == 1.0


class TestCommands:
    def test_price_smoke(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "price")
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["stage"] == "done"
        assert "value" in summary["price"]
        for name in ("defaults.json", "condition_report.json",
                     "nodes.csv", "surface.csv", "quotes.csv"):
            assert (tmp_path / name).exists(), name

    def test_build_artifacts(self, tmp_path):
        code = run(tmp_path, "--preset", "smoke", "build")
        assert code == 0
        for name in ("C_tau1", "C_eta1", "C_eta2", "A1", "A2"):
            assert (tmp_path / f"{name}.csv").exists()
            assert (tmp_path / f"{name}.json").exists()

    def test_solve_reports_condition(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "solve")
        assert code == 0
        rep = json.loads((tmp_path / "condition_report.json").read_text())
        assert rep["bound_satisfied"] is True
        assert (tmp_path / "solution.csv").exists()

    def test_dump_encoding(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "dump-encoding", "ctau1")
        assert code == 0
        desc = json.loads((tmp_path / "encoding_ctau1.json").read_text())
        assert desc["n_anc"] == 2
        assert (tmp_path / "encoding_ctau1.csv").exists()

    def test_converge_levels(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "converge", "--levels", "3")
        assert code == 0
        lines = (tmp_path / "convergence.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + 3 levels

    def test_converge_too_few_levels(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "converge", "--levels", "2")
        assert code == 2


class TestExitCodes:
    def test_validation_before_compute(self, tmp_path, capsys):
        # infeasible scale resolution fails fast with exit 2 and leaves
        # no solver artifacts behind
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"params": {"sigma": 0.01}}))
        code = cli.main(["--outdir", str(tmp_path / "out"),
                         "--config", str(cfg), "solve"])
        assert code == 2
        assert not (tmp_path / "out" / "solution.csv").exists()

    def test_bad_market_param(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"params": {"sigma": -1.0}}))
        code = cli.main(["--outdir", str(tmp_path / "out"),
                         "--config", str(cfg), "build"])
        assert code == 2

    def test_overfull_node_request(self, tmp_path, capsys):
        # pin a register layout whose fit is impossible: more nodes than
        # grid points on the time axis
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "params": {"sigma": 0.5},
            "n_eta": 3, "n_tau1": 1,
            "extraction": {"M_tau1": 8, "M_eta": 4, "Delta": 0.0}}))
        code = cli.main(["--outdir", str(tmp_path / "out"),
                         "--config", str(cfg), "extract"])
        assert code == 2


class TestDeterminism:
    def test_same_seed_same_surface(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code = cli.main(["--outdir", str(out), "--preset", "smoke",
                             "--ae-mode", "stochastic", "--ae-eps", "1e-5",
                             "--seed", "7", "price"])
            assert code == 0
        assert (a / "surface.csv").read_text() == (b / "surface.csv").read_text()
        assert (a / "nodes.csv").read_text() == (b / "nodes.csv").read_text()

    def test_different_seed_differs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out, seed in ((a, "1"), (b, "2")):
            code = cli.main(["--outdir", str(out), "--preset", "smoke",
                             "--ae-mode", "stochastic", "--ae-eps", "1e-3",
                             "--seed", seed, "price"])
            assert code == 0
        assert (a / "nodes.csv").read_text() != (b / "nodes.csv").read_text()

    def test_defaults_json_resolves_overrides(self, tmp_path, capsys):
        code = run(tmp_path, "--preset", "smoke", "--ae-eps", "1e-6", "build")
        assert code == 0
        cfg = json.loads((tmp_path / "defaults.json").read_text())
        assert cfg["extraction"]["ae_eps"] == 1e-6
        assert cfg["n_eta"] == 3
