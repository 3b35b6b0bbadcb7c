import csv
import json

import pytest

from warpgreen import checks, cli
from warpgreen.errors import ConfigError


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return str(path)


def run(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code = cli.main([command, "--config", write(tmp_path, cfg), "--out", str(out), "--quiet", *extra])
    return code, out


EUCLID = {"manifold": {"family": "euclidean", "dim": 3}}


def test_missing_dim_names_field(tmp_path):
    with pytest.raises(ConfigError) as exc:
        cli.load_config(write(tmp_path, {"manifold": {"family": "euclidean"}}))
    assert exc.value.field == "manifold.dim"
    assert exc.value.line == 2


def test_unknown_key_rejected_with_line(tmp_path):
    text = '{\n  "manifold": {"family": "euclidean", "dim": 3},\n  "numerics": {\n    "tolerance": 1\n  }\n}'
    with pytest.raises(ConfigError) as exc:
        cli.load_config(write(tmp_path, text))
    assert exc.value.field == "numerics.tolerance"
    assert exc.value.line == 4


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity"])
def test_non_finite_rejected(tmp_path, token):
    text = '{"manifold": {"family": "euclidean", "dim": 3},\n "numerics": {"r_max": %s}}' % token
    with pytest.raises(ConfigError) as exc:
        cli.load_config(write(tmp_path, text))
    assert exc.value.line == 2


def test_bad_json_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        cli.load_config(write(tmp_path, '{\n"manifold": \n}'))
    assert exc.value.line == 3


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "analyze", {"manifold": {"family": "euclidean"}})
    assert code == cli.EXIT_CONFIG
    assert "manifold.dim" in capsys.readouterr().err


def test_missing_family_parameter(tmp_path):
    code, _ = run(tmp_path, "analyze", {"manifold": {"family": "power_exp", "dim": 3, "params": {"B": 1}}})
    assert code == cli.EXIT_CONFIG


def test_analyze_euclidean(tmp_path):
    code, out = run(tmp_path, "analyze", EUCLID)
    assert code == 0
    rep = json.loads((out / "report.analyze.json").read_text())
    assert rep["results"]["rho"]["2"] == pytest.approx(0.0625, rel=1e-12)
    assert rep["results"]["parabolic"] is False
    flux = [c for c in rep["checks"] if c["name"].startswith("flux identity")]
    assert flux and flux[0]["pass"]
    with open(out / "analyze.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "omega", "rho", "G"]
    assert rows[2][0] == "2" and rows[2][1] == "3.9210325738741894"


def test_analyze_parabolic(tmp_path):
    cfg = {"manifold": {"family": "tabulated", "dim": 3, "params": {"knots": [[0, 0, 1, 0], [1, 0.75, 0.5, -0.5], [2, 1, 0, 0]]}}}
    code, out = run(tmp_path, "analyze", cfg)
    assert code == 0
    rep = json.loads((out / "report.analyze.json").read_text())
    assert rep["results"]["parabolic"] is True
    assert "skipped" in rep["results"]["green_checks"]


def test_criterion_flat(tmp_path):
    cfg = dict(EUCLID, source={"family": "power_decay", "C": 1.0, "alpha": 3.0})
    code, out = run(tmp_path, "criterion", cfg)
    assert code == 0
    rep = json.loads((out / "report.criterion.json").read_text())
    assert rep["verdicts"]["thm2"] == "Converges"
    assert rep["results"]["threshold_line"] == "model α* = 2"
    with open(out / "criterion.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["m", "term", "partial_sum"]


def test_criterion_hyperbolic(tmp_path):
    cfg = {"manifold": {"family": "hyperbolic", "dim": 3}, "source": {"family": "power_decay", "alpha": 1.5}}
    code, out = run(tmp_path, "criterion", cfg)
    rep = json.loads((out / "report.criterion.json").read_text())
    assert code == 0 and rep["verdicts"]["thm2"] == "Converges"
    assert rep["results"]["model_alpha_star"] == 1.0


@pytest.mark.parametrize("alpha, verdict", [(3.0, "Inconclusive"), (4.0, "Converges")])
def test_criterion_thm1_hardy(tmp_path, alpha, verdict):
    # the thm1 term behaves like (1 + O(1/m)) 4 m^{2 - alpha}
    cfg = dict(
        EUCLID,
        source={"family": "power_decay", "alpha": alpha},
        criterion={"variant": "thm1"},
        weight={"kind": "hardy", "gamma": -2.0, "Cprime": 0.25},
        numerics={"m_max": 128},
    )
    code, out = run(tmp_path, "criterion", cfg)
    rep = json.loads((out / "report.criterion.json").read_text())
    assert code == 0 and rep["verdicts"]["thm1"] == verdict


def test_corollary_mode(tmp_path):
    code, out = run(tmp_path, "criterion", {"criterion": {"mode": "corollary", "gamma1": 0, "gamma2": -3}})
    rep = json.loads((out / "report.criterion.json").read_text())
    assert code == 0 and rep["results"]["corollary_alpha_star"] == 3.0


def test_corollary_invalid_exponents(tmp_path):
    code, _ = run(tmp_path, "criterion", {"criterion": {"mode": "corollary", "gamma1": -1, "gamma2": -3}})
    assert code == cli.EXIT_CONFIG


def test_solve_outputs(tmp_path):
    cfg = {
        "manifold": {"family": "hyperbolic", "dim": 3},
        "source": {"family": "power_decay", "alpha": 3.0},
        "numerics": {"r_max": 10, "h": 0.05},
    }
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    rep = json.loads((out / "report.solve.json").read_text())
    assert rep["results"]["u0"] < 0
    assert rep["results"]["sign_convention"] == "Delta u = +f"
    with open(out / "solution.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u", "u_prime", "residual"]
    assert len(rows) == 202
    assert float(rows[1][1]) == rep["results"]["u0"]


def test_solve_tail_divergence_exit(tmp_path, capsys):
    cfg = dict(EUCLID, source={"family": "power_decay", "alpha": 1.5})
    code, _ = run(tmp_path, "solve", cfg)
    assert code == cli.EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert "alpha=1.5" in err and "alpha*=2" in err


def test_sharpness(tmp_path):
    code, out = run(tmp_path, "sharpness", {"sharpness": {"gammas": [0, -3]}})
    assert code == 0
    with open(out / "sharpness.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["gamma", "alpha", "converged", "alpha_star"]
    assert rows[1:] == [["0", "0.5", "false", "1"], ["0", "1.5", "true", "1"], ["-3", "1.5", "false", "2"], ["-3", "2.5", "true", "2"]]


def test_sharpness_one_sided_alphas(tmp_path):
    # every row is still checked against alpha*
    code, _ = run(tmp_path, "sharpness", {"sharpness": {"gammas": [0], "alphas": [2.0, 3.0]}})
    assert code == 0


def test_verify_failure_exit(tmp_path, monkeypatch):
    def broken(n, tol=1e-10):
        return checks.Check("forced", 1.0, "0", tol, False)

    monkeypatch.setattr(checks, "hardy_reproduction_check", broken)
    code, out = run(tmp_path, "verify", {"verify": {"groups": ["hardy"]}})
    assert code == cli.EXIT_VERIFY
    assert json.loads((out / "report.verify.json").read_text())["all_pass"] is False


def test_verify_subset_deterministic(tmp_path):
    cfg = {"verify": {"groups": ["hardy", "poincare"], "trials": 16}}
    code1, out = run(tmp_path, "verify", cfg, "--seed", "5")
    first = (out / "report.verify.json").read_bytes()
    code2, out = run(tmp_path, "verify", cfg, "--seed", "5")
    assert code1 == code2 == 0
    assert (out / "report.verify.json").read_bytes() == first
    assert json.loads(first)["config"]["numerics"]["seed"] == 5


def test_timing_sidecar(tmp_path):
    _, out = run(tmp_path, "criterion", {"criterion": {"mode": "corollary", "gamma1": 2, "gamma2": 1}})
    timing = json.loads((out / "timing.criterion.json").read_text())
    assert timing["backend"] in ("cython", "python")
    assert "seconds" not in (out / "report.criterion.json").read_text()


def test_threads_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.workers() == 3
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        cli.workers()


def test_float_format():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(True) == "true"
    assert cli._clean({"a": float("inf"), "b": [float("nan")]}) == {"a": "inf", "b": ["nan"]}
