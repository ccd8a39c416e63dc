import csv

import numpy as np
import pytest
from click.testing import CliRunner

from relerr.cli import main
from relerr.data import Dataset
from relerr.inference import lpre_anova_test
from relerr.solver import LinearHypothesis, fit_lpre


@pytest.fixture
def runner():
    return CliRunner()


def write_csv(path, x_cols, y, response="y"):
    names = list(x_cols) + [response]
    n = len(y)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([f"{x_cols[c][i]:.10g}" for c in x_cols] + [f"{y[i]:.10g}"])


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(20130501)
    n = 120
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    y = np.exp(1.0 + 0.5 * x1 + 0.0 * x2) * np.exp(0.4 * rng.standard_normal(n))
    path = tmp_path / "data.csv"
    write_csv(path, {"x1": x1, "x2": x2}, y)
    return path, x1, x2, y


class TestFit:
    def test_writes_coefficient_table(self, runner, tmp_path, data_csv):
        path, x1, x2, y = data_csv
        out = tmp_path / "fit.csv"
        result = runner.invoke(main, [
            "fit", "--input", str(path), "--response", "y",
            "--criterion", "lpre", "--output", str(out)])
        assert result.exit_code == 0, result.output
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["coef"] for r in rows] == ["intercept", "x1", "x2"]
        # estimates must match the library fit exactly
        x = np.column_stack([np.ones_like(x1), x1, x2])
        ref = fit_lpre(Dataset(x, y))
        got = np.array([float(r["estimate"]) for r in rows])
        np.testing.assert_allclose(got, ref.beta, rtol=1e-9)
        assert all(float(r["see"]) > 0 for r in rows)
        assert all(0.0 <= float(r["p_value"]) <= 1.0 for r in rows)

    def test_two_sided_doubles_p(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for out, kind in ((out1, "one-sided"), (out2, "two-sided")):
            r = runner.invoke(main, [
                "fit", "--input", str(path), "--response", "y",
                "--output", str(out), "--pvalue", kind])
            assert r.exit_code == 0
        p1 = [float(r["p_value"]) for r in csv.DictReader(open(out1))]
        p2 = [float(r["p_value"]) for r in csv.DictReader(open(out2))]
        np.testing.assert_allclose(p2, [2 * v for v in p1], rtol=1e-9)

    def test_nonsmooth_criterion_uses_resampling_seed(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (out1, out2):
            r = runner.invoke(main, [
                "fit", "--input", str(path), "--response", "y",
                "--criterion", "lare", "--output", str(out),
                "--seed", "9", "--resamples", "60"])
            assert r.exit_code == 0, r.output
        assert out1.read_text() == out2.read_text()

    def test_missing_response_column_exits_1(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        r = runner.invoke(main, [
            "fit", "--input", str(path), "--response", "nope",
            "--output", str(tmp_path / "x.csv")])
        assert r.exit_code == 1
        assert "no column named" in r.output

    def test_missing_file_exits_2(self, runner, tmp_path):
        r = runner.invoke(main, [
            "fit", "--input", str(tmp_path / "absent.csv"), "--response", "y",
            "--output", str(tmp_path / "x.csv")])
        assert r.exit_code == 2


class TestTest:
    def test_zero_coefs_matches_library(self, runner, data_csv):
        path, x1, x2, y = data_csv
        r = runner.invoke(main, [
            "test", "--input", str(path), "--response", "y",
            "--zero-coefs", "2"])
        assert r.exit_code == 0, r.output
        x = np.column_stack([np.ones_like(x1), x1, x2])
        ref = lpre_anova_test(Dataset(x, y), LinearHypothesis.zero_coefs([2], 3))
        lines = dict(line.split() for line in r.output.strip().splitlines())
        assert float(lines["statistic"]) == pytest.approx(ref.statistic, rel=1e-5)
        assert float(lines["p_value"]) == pytest.approx(ref.p_value, abs=1e-5)
        assert int(lines["df"]) == 1

    def test_hypothesis_file(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        hfile = tmp_path / "h.csv"
        hfile.write_text("0\n1\n-1\n")  # beta_1 = beta_2
        r = runner.invoke(main, [
            "test", "--input", str(path), "--response", "y",
            "--hypothesis-file", str(hfile)])
        assert r.exit_code == 0, r.output
        assert "p_value" in r.output

    def test_requires_exactly_one_hypothesis_source(self, runner, data_csv):
        path, *_ = data_csv
        r = runner.invoke(main, [
            "test", "--input", str(path), "--response", "y"])
        assert r.exit_code == 1
        assert "exactly one" in r.output


class TestSimulate:
    def test_estimation_mode(self, runner, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            "mode = estimation\n"
            "beta = 1, 0.5\n"
            "error_law = log_normal(0, 0.5)\n"
            "n = 80\n"
            "replications = 10\n"
            "estimators = lpre\n"
            "seed = 2\n"
            "compute_see = false\n"
        )
        out = tmp_path / "metrics.csv"
        r = runner.invoke(main, [
            "simulate", "--config", str(cfg), "--output", str(out)])
        assert r.exit_code == 0, r.output
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 2
        assert {row["estimator"] for row in rows} == {"lpre"}

    def test_replications_and_seed_override(self, runner, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            "beta = 1, 0.5\n"
            "error_law = log_normal(0, 0.5)\n"
            "n = 60\nreplications = 500\nestimators = lpre\n"
            "compute_see = false\n"
        )
        out = tmp_path / "m.csv"
        r = runner.invoke(main, [
            "simulate", "--config", str(cfg), "--output", str(out),
            "--replications", "5", "--seed", "77"])
        assert r.exit_code == 0, r.output

    def test_power_mode(self, runner, tmp_path):
        cfg = tmp_path / "pow.cfg"
        cfg.write_text(
            "mode = power\n"
            "beta = 1, 0.5, 0\n"
            "error_law = log_uniform(-2, 2)\n"
            "n = 100\nreplications = 20\n"
            "zero_coefs = 2\n"
            "beta_grid = 1,0.5,0; 1,0.5,1\n"
            "alphas = 0.05\n"
        )
        out = tmp_path / "power.csv"
        r = runner.invoke(main, [
            "simulate", "--config", str(cfg), "--output", str(out)])
        assert r.exit_code == 0, r.output
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 2
        assert float(rows[1]["reject_rate"]) >= float(rows[0]["reject_rate"])

    def test_bad_config_exits_1(self, runner, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense\n")
        r = runner.invoke(main, [
            "simulate", "--config", str(cfg), "--output", str(tmp_path / "o.csv")])
        assert r.exit_code == 1

    def test_missing_config_exits_2(self, runner, tmp_path):
        r = runner.invoke(main, [
            "simulate", "--config", str(tmp_path / "absent.cfg"),
            "--output", str(tmp_path / "o.csv")])
        assert r.exit_code == 2


class TestPredict:
    def test_split_mode(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        out = tmp_path / "pred.csv"
        r = runner.invoke(main, [
            "predict", "--input", str(path), "--split", "80",
            "--response", "y", "--criterion", "lpre", "--criterion", "ls",
            "--output", str(out)])
        assert r.exit_code == 0, r.output
        rows = list(csv.DictReader(open(out)))
        assert [row["method"] for row in rows] == ["lpre", "ls"]
        for row in rows:
            for key in ("mpe", "mppe", "mape", "mspe"):
                assert float(row[key]) >= 0

    def test_train_test_mode_matches_split(self, runner, tmp_path, data_csv):
        path, x1, x2, y = data_csv
        train, test = tmp_path / "train.csv", tmp_path / "test.csv"
        write_csv(train, {"x1": x1[:80], "x2": x2[:80]}, y[:80])
        write_csv(test, {"x1": x1[80:], "x2": x2[80:]}, y[80:])
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        ra = runner.invoke(main, [
            "predict", "--train", str(train), "--test", str(test),
            "--response", "y", "--criterion", "lpre", "--output", str(out_a)])
        rb = runner.invoke(main, [
            "predict", "--input", str(path), "--split", "80",
            "--response", "y", "--criterion", "lpre", "--output", str(out_b)])
        assert ra.exit_code == 0 and rb.exit_code == 0
        assert out_a.read_text() == out_b.read_text()

    def test_requires_input_spec(self, runner, tmp_path):
        r = runner.invoke(main, [
            "predict", "--response", "y", "--output", str(tmp_path / "o.csv")])
        assert r.exit_code == 1

    def test_bad_split_exits_1(self, runner, tmp_path, data_csv):
        path, *_ = data_csv
        r = runner.invoke(main, [
            "predict", "--input", str(path), "--split", "0",
            "--response", "y", "--output", str(tmp_path / "o.csv")])
        assert r.exit_code == 1
