from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levycoupling.harness import ConfigError, fit_rate, load_config
from levycoupling.harness.cli import main
from levycoupling.harness.config import parse_lines

N6 = [2**m for m in range(4, 10)]


class TestFitRate:
    @pytest.mark.parametrize("power", [-1.0, -0.5])
    def test_exact_power_law(self, power):
        fit = fit_rate([(N, 3.0 * N**power, 0.0) for N in N6])
        assert fit.slope == pytest.approx(power, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
        assert fit.slope_stderr < 1e-10

    def test_log_n_over_n(self):
        fit = fit_rate([(N, 0.1 * math.log(N) / N, 0.0) for N in N6])
        # numpy.polyfit on the same six points
        assert fit.slope == pytest.approx(-0.7683933387461167, abs=1e-10)
        assert -1.0 <= fit.slope <= -0.75

    def test_point_errors_propagate(self):
        fit = fit_rate([(N, 1.0 / N, 0.1 / N) for N in N6])
        x = np.log(N6)
        xc = x - x.mean()
        assert fit.slope_stderr_points == pytest.approx(0.1 * math.sqrt(np.sum(xc**2)) / np.sum(xc**2))
        assert fit.slope_stderr == fit.slope_stderr_points

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_rate([(N, 1.0 / N, 0.0) for N in N6[:3]])

    def test_degenerate(self):
        with pytest.raises(ValueError):
            fit_rate([(16, 0.1 * (i + 1), 0.0) for i in range(5)])

    @given(st.floats(-2, 0), st.floats(0.01, 10))
    def test_recovers_any_power(self, power, c):
        fit = fit_rate([(N, c * N**power, 0.01) for N in N6])
        assert fit.slope == pytest.approx(power, abs=1e-9)


class TestConfig:
    def test_parse(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("# comment\nexperiment = coupling-rate\nm = 4..6  # N = 16..64\nsubcoupler = Independent, edgeworth\np = 1\n\n")
        cfg = load_config(path)
        assert cfg.N == (16, 32, 64) and cfg.m_values == (4, 5, 6)
        assert cfg.subcoupler == ("independent", "edgeworth")
        assert cfg.p == 1.0

    def test_override_precedence(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("experiment = tail-stats\nM = 100\nseed = 1\n")
        cfg = load_config(path, ["M=200", "N=8,16"], seed=5)
        assert (cfg.M, cfg.N, cfg.seed) == (200, (8, 16), 5)

    def test_scientific_integers(self):
        assert load_config(None, ["experiment=tail-stats", "M=1e6"]).M == 10**6

    @pytest.mark.parametrize(
        "pairs",
        [
            ["experiment=nope"],
            ["experiment=tail-stats", "colour=red"],
            ["experiment=tail-stats", "eta=0.05"],
            ["experiment=tail-stats", "kappa=5"],
            ["experiment=coupling-rate", "N=24"],
            ["experiment=coupling-rate", "d=3", "kappa=6"],
            ["experiment=tail-stats", "M=abc"],
            ["experiment=coupling-rate", "subcoupler=magic"],
            ["experiment=tail-stats", "d=1"],
        ],
    )
    def test_errors(self, pairs):
        with pytest.raises(ConfigError):
            load_config(None, pairs)

    def test_bad_lines(self):
        with pytest.raises(ConfigError):
            parse_lines(["just words"])
        with pytest.raises(ConfigError):
            parse_lines([" = 3"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.cfg")


def run_cli(*args) -> int:
    return main(["run", *args])


class TestCli:
    def test_unknown_experiment(self, tmp_path, capsys):
        code = run_cli("--experiment", "bogus", "--out", str(tmp_path))
        assert code == 2
        err = capsys.readouterr().err
        assert "usage:" in err and "unknown experiment" in err

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_matrix_identities(self, tmp_path):
        code = run_cli("--experiment", "matrix-identities", "--override", "d=3", "--override", "M=10000", "--out", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["passed"] and summary["failed"] == []
        assert summary["config"]["d"] == 3 and summary["seed"] == 20240521
        for v in summary["verdicts"].values():
            assert set(v) == {"estimate", "stderr", "target", "tolerance", "pass"}
            assert v["pass"]
        rows = list(csv.DictReader(open(tmp_path / "results.csv", newline="")))
        assert {r["quantity"] for r in rows} >= {"dyadic.max_HE_inverse_norm", "N16.GGt_minus_block_formula"}
        assert all(float(r["estimate"]) < 1e-9 for r in rows if r["quantity"].endswith("block_formula"))

    def test_lemma1_example(self, tmp_path):
        code = run_cli(
            "--experiment", "lemma1-moments", "--override", "M=20000", "--override", "n_sub=128", "--out", str(tmp_path)
        )
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        v = summary["verdicts"]["N16.var_zeta1"]
        assert v["target"] == pytest.approx(1 / 192) and v["pass"]

    def test_failure_exit_code(self, tmp_path):
        code = run_cli(
            "--experiment", "coupling-rate",
            "--override", "m=2..5", "--override", "trees=20", "--override", "n_sub=16",
            "--override", "slope_edgeworth_max=-5",
            "--out", str(tmp_path),
        )  # fmt: skip
        assert code == 1
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert "edgeworth.slope" in summary["failed"]
        plot = list(csv.DictReader(open(tmp_path / "plotdata.csv", newline="")))
        assert {r["series"] for r in plot} == {"independent", "edgeworth"}
        assert [int(r["N"]) for r in plot if r["series"] == "edgeworth"] == [4, 8, 16, 32]

    def test_exception_exit_code(self, tmp_path):
        code = run_cli("--experiment", "expansion-moments", "--override", "eps=0.02,0.04", "--out", str(tmp_path))
        assert code == 1
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["error"].startswith("ValueError") and "exception" in summary["failed"]

    @pytest.mark.parametrize(
        "experiment,overrides",
        [
            ("lemma1-moments", ["M=25000", "n_sub=32"]),
            ("coupling-rate", ["m=2..5", "trees=30", "chunk=10", "n_sub=16", "subcoupler=independent,edgeworth,assignment"]),
        ],
    )
    def test_byte_identical_across_workers(self, tmp_path, experiment, overrides):
        outs = []
        for workers in (1, 3):
            out = tmp_path / f"w{workers}"
            args = ["--experiment", experiment, "--seed", "11", "--workers", str(workers), "--out", str(out)]
            for o in overrides:
                args += ["--override", o]
            run_cli(*args)
            outs.append((out / "results.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_list_and_trajectory(self, tmp_path, capsys):
        assert main(["list"]) == 0
        assert "coupling-rate" in capsys.readouterr().out
        path = tmp_path / "t.csv"
        assert main(["trajectory", "--m", "3", "--n-sub", "16", "--out", str(path)]) == 0
        assert path.read_text().splitlines()[0] == "r,S1,node,coupled,guard_fired"
        assert main(["trajectory", "--m", "3", "--subcoupler", "nope", "--out", str(path)]) == 2
