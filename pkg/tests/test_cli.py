"""CLI surface: subcommands, config-file merging and exit codes."""

import json

import numpy as np
import pytest

from sgldlab.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestGenData:
    def test_writes_csv_and_manifest(self, tmp_path):
        out = tmp_path / "data.csv"
        assert run_cli("gen-data", "--seed", "3", "--out", str(out)) == 0
        assert out.exists()
        assert (tmp_path / "data_manifest.json").exists()
        header = out.read_text().splitlines()[0]
        assert header == "z0,z1,y"

    def test_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("gen-data", "--seed", "5", "--out", str(a))
        run_cli("gen-data", "--seed", "5", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestRun:
    def test_gaussian_chain(self, tmp_path):
        out = tmp_path / "samples.csv"
        code = run_cli(
            "run", "--model", "gaussian", "--dim", "2", "--lam", "0.1",
            "--beta", "1.0", "--steps", "500", "--seed", "1", "--out", str(out),
        )
        assert code == 0
        body = np.loadtxt(out, delimiter=",", skiprows=1)
        assert body.shape == (500, 3)

    def test_divergent_chain_exit_code(self, tmp_path):
        code = run_cli(
            "run", "--model", "gaussian", "--dim", "1", "--lam", "5.0",
            "--beta", "1e6", "--steps", "200", "--seed", "0",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 2

    def test_validation_error_exit_code(self, tmp_path):
        code = run_cli(
            "run", "--model", "gaussian", "--lam", "-0.1",
            "--steps", "10", "--out", str(tmp_path / "x.csv"),
        )
        assert code == 1


class TestVerify:
    def test_gaussian_passes(self, tmp_path):
        out = tmp_path / "verify.json"
        code = run_cli("verify", "--model", "gaussian", "--dim", "2",
                       "--trials", "1000", "--out", str(out))
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["dissipativity"]["passed"]

    def test_mixture_passes(self):
        assert run_cli("verify", "--model", "mixture", "--a-hat", "2",
                       "--trials", "1000") == 0


class TestConstants:
    def test_report_written(self, tmp_path):
        out = tmp_path / "constants.json"
        code = run_cli("constants", "--model", "gaussian", "--dim", "1",
                       "--beta", "1.0", "--n-mc", "20000", "--out", str(out))
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["values"]["lambda_max"] == pytest.approx(1.0 / 512.0)
        assert obj["inputs"]["c_hat_note"]


class TestWassersteinCommand:
    def test_exact_between_two_chains(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, seed in ((a, 1), (b, 2)):
            run_cli("run", "--model", "gaussian", "--dim", "1", "--lam", "0.1",
                    "--steps", "200", "--seed", str(seed), "--out", str(path))
        capsys.readouterr()  # drop the run output
        code = run_cli("wasserstein", "--a", str(a), "--b", str(b),
                       "--p", "2", "--method", "exact")
        assert code == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["method"] == "exact_matching"
        assert obj["value"] >= 0


class TestSweepAndBoundCheck:
    def test_sweep_writes_cells(self, tmp_path):
        outdir = tmp_path / "sweep"
        code = run_cli(
            "sweep", "--model", "mixture", "--a-hat", "2",
            "--lambdas", "0.1,0.2", "--chains", "64", "--metric", "W1",
            "--seed", "0", "--mix-time", "10", "--outdir", str(outdir),
        )
        assert code == 0
        lines = (outdir / "sweep_cells.csv").read_text().splitlines()
        assert lines[0].startswith("lambda,n_steps,distance")
        assert len(lines) == 3

    def test_bound_check_exit_zero(self, tmp_path):
        outdir = tmp_path / "bc"
        code = run_cli(
            "bound-check", "--model", "mixture", "--a-hat", "2",
            "--lambdas", "0.1,0.2", "--chains", "64", "--n-mc", "20000",
            "--seed", "0", "--mix-time", "10", "--outdir", str(outdir),
        )
        assert code == 0
        obj = json.loads((outdir / "bound_check.json").read_text())
        assert obj["violations"] == 0
        assert (outdir / "bound_check.png").exists()


class TestConfigFile:
    def test_config_supplies_defaults_cli_overrides(self, tmp_path):
        cfg = tmp_path / "config.toml"
        out = tmp_path / "samples.csv"
        cfg.write_text(
            "[run]\nmodel = \"gaussian\"\ndim = 1\nlam = 0.1\n"
            f"steps = 50\nseed = 9\nout = \"{out}\"\n"
        )
        code = run_cli("--config", str(cfg), "run", "--steps", "75")
        assert code == 0
        body = np.loadtxt(out, delimiter=",", skiprows=1, ndmin=2)
        assert body.shape[0] == 75  # CLI value wins over the file's 50
