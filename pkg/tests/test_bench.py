import json

import numpy as np
import pytest
import yaml

from bcprox.bench.cli import main
from bcprox.bench.config import load_config, validate_config
from bcprox.bench.generators import generate_problem
from bcprox.bench.runner import contraction_factor, envelope_check, run_experiment, verify_rates
from bcprox.errors import ConfigError
from bcprox.rates import RateInputs, rate_randomized_optimal
from bcprox.structured import ConsensusG


def base_config(tmp_path, **over):
    cfg = {
        "version": 1,
        "problem": {"kind": "finite_sum", "N": 4, "n": 2, "regularizer": {"kind": "l1", "lam": 0.1}, "seed": 3},
        "solver": {"algorithm": "finito", "stepsize": {"alpha": 0.5}, "max_iters": 120},
        "start": {"scale": 3.0},
        "samplers": [
            {"name": "uniform", "kind": "randomized", "probabilities": "uniform", "batch": 1},
            {"name": "cyclic", "kind": "cyclic"},
        ],
        "seeds": [0, 1, 2],
        "output": {"dir": str(tmp_path / "runs")},
    }
    cfg.update(over)
    return cfg


def test_generator_builds_consensus_problem():
    p = generate_problem({"kind": "finite_sum", "N": 4, "n": 2, "smooth": "quadratic", "regularizer": {"kind": "l1", "lam": 0.1}})
    assert p.N == 4 and isinstance(p.nonsmooth, ConsensusG) and p.structure.dims == (2, 2, 2, 2)


def test_generator_is_deterministic():
    spec = {"kind": "sharing", "N": 3, "n": 2}
    a, b = generate_problem(spec, seed=4), generate_problem(spec, seed=4)
    for fa, fb in zip(a.blocks, b.blocks):
        np.testing.assert_array_equal(fa.H, fb.H)
        np.testing.assert_array_equal(fa.q, fb.q)
    assert not np.array_equal(a.blocks[0].H, generate_problem(spec, seed=5).blocks[0].H)


def test_generator_reports_exact_moduli():
    p = generate_problem({"kind": "generic_bc", "dims": [1, 2, 4]}, seed=1)
    for f in p.blocks:
        ev = np.linalg.eigvalsh(f.H)
        assert f.lipschitz == pytest.approx(ev.max(), rel=1e-12)
        assert f.strong_convexity == pytest.approx(ev.min(), rel=1e-12)


@pytest.mark.parametrize("smooth", ["quadratic", "sine"])
def test_reported_lipschitz_bounds_sampled_estimate(smooth):
    rng = np.random.default_rng(0)
    p = generate_problem({"kind": "generic_bc", "dims": [2, 3], "smooth": smooth}, seed=2)
    for f in p.blocks:
        a = rng.standard_normal((1000, f.dim)) * 3
        b = a + rng.standard_normal((1000, f.dim)) * rng.uniform(1e-3, 3, (1000, 1))
        est = max(np.linalg.norm(f.grad(x) - f.grad(y)) / np.linalg.norm(x - y) for x, y in zip(a, b))
        assert est <= f.lipschitz * (1 + 1e-12)


def test_nonconvex_generator_uses_sine_and_l0():
    cfg = validate_config({"version": 1, "problem": {"kind": "finite_sum", "nonconvex": True}, "samplers": [{"kind": "cyclic"}]})
    assert cfg["problem"]["smooth"] == "sine" and cfg["problem"]["regularizer"]["kind"] == "l0"


def test_fan_out_and_byte_identical_rerun(tmp_path):
    cfg = validate_config(base_config(tmp_path))
    summary = run_experiment(cfg)
    out = tmp_path / "runs"
    csvs = sorted(f.name for f in out.glob("*.csv"))
    assert len(csvs) == 6 and (out / "summary.json").exists()
    first = {n: (out / n).read_bytes() for n in csvs}
    first_summary = (out / "summary.json").read_bytes()
    run_experiment(cfg)
    assert {n: (out / n).read_bytes() for n in csvs} == first
    assert (out / "summary.json").read_bytes() == first_summary
    text = first[csvs[0]].decode()
    assert text.splitlines()[0] == "k,indices,fbe,phi_z,residual,wall_ns" and "\r" not in text
    for run in summary["runs"]:
        assert run["status"] in ("max_iters", "converged")
        assert run["contraction_factor"] <= 1


def test_solver_errors_are_recorded_per_run(tmp_path):
    raw = base_config(tmp_path)
    raw["solver"] = dict(raw["solver"], stepsize={"gammas": [100.0] * 4})
    summary = run_experiment(validate_config(raw))
    assert all(r["status"] == "error" and "ContractError" in r["error"] for r in summary["runs"])


def test_contraction_factor_fit():
    k = np.arange(50)
    factor, r2 = contraction_factor(2.0 + 3.0 * 0.8**k, 2.0)
    assert factor == pytest.approx(0.8) and r2 == pytest.approx(1.0)
    assert contraction_factor([1.0, 1.0], 1.0) == (None, None)


def test_envelope_check():
    gap = 0.5 ** np.arange(20)
    assert envelope_check(gap, 0.4)["passed"]
    rep = envelope_check(gap, 0.6)
    assert not rep["passed"] and rep["first_violation_k"] == 5


@pytest.mark.parametrize(
    "change",
    [
        {"version": 2},
        {"colour": "red"},
        {"solver": {"algorithm": "sharing"}},
        {"solver": {"stepsize": {"alpha": 0.5, "gammas": [1.0]}}},
        {"solver": {"max_iters": 0}},
        {"samplers": []},
        {"samplers": [{"kind": "greedy"}]},
        {"samplers": [{"name": "a", "kind": "cyclic"}, {"name": "a", "kind": "shuffled"}]},
        {"seeds": [-1]},
        {"problem": {"kind": "finite_sum", "regularizer": {"kind": "l7"}}},
        {"problem": {"kind": "accel", "smooth": "sine"}},
        {"problem": {"kind": "finite_sum", "mu": 1.0, "kappa": 0.5}},
    ],
)
def test_config_validation(tmp_path, change):
    raw = base_config(tmp_path, **change)
    with pytest.raises(ConfigError):
        validate_config(raw)


def test_missing_version_rejected():
    with pytest.raises(ConfigError):
        validate_config({"problem": {"kind": "finite_sum"}})


def _write(tmp_path, cfg):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def test_load_config_fills_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, base_config(tmp_path)))
    assert cfg["solver"]["trace_every"] == 1 and cfg["output"]["record_wall_time"] is False


@pytest.mark.parametrize("command", ["solve-bc", "solve-finito", "bench"])
def test_cli_solve_commands(tmp_path, command, capsys):
    path = _write(tmp_path, base_config(tmp_path))
    out = tmp_path / command
    assert main([command, "--config", str(path), "--seed", "1", "--out", str(out), "--trace-every", "5"]) == 0
    assert len(list(out.glob("*.csv"))) == 2
    rows = (out / "cyclic_seed1.csv").read_text().splitlines()
    assert rows[1].startswith("0,") and rows[2].startswith("5,")
    assert "wrote 2 run(s)" in capsys.readouterr().out


def test_cli_solve_sharing_and_accel(tmp_path):
    sharing = base_config(tmp_path, problem={"kind": "sharing", "N": 3, "n": 2, "regularizer": {"kind": "point", "c": [0.0, 0.0]}})
    sharing["solver"] = {"stepsize": {"alpha": 0.9}, "max_iters": 50}
    assert main(["solve-sharing", "--config", str(_write(tmp_path, sharing)), "--out", str(tmp_path / "s")]) == 0
    accel = {"version": 1, "problem": {"kind": "accel", "N": 3, "n": 2}, "solver": {"max_iters": 50}, "seeds": [0]}
    assert main(["solve-accel", "--config", str(_write(tmp_path, accel)), "--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "uniform_seed0.csv").exists()


def test_cli_rates(tmp_path, capsys):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"L": [2.0, 2.0], "mu": [1.0, 1.0], "gammas": [0.5, 0.5], "p": [0.5, 0.5]}))
    assert main(["rates", "--config", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["randomized"] == pytest.approx(1 / 12)


def test_cli_reports_config_errors(tmp_path, capsys):
    path = _write(tmp_path, {"version": 9, "problem": {"kind": "finite_sum"}})
    assert main(["bench", "--config", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def _rate_config(tmp_path):
    cfg = base_config(tmp_path, seeds=20)
    cfg["solver"] = {"algorithm": "bc", "stepsize": {"alpha": 0.5}, "max_iters": 200, "check_descent": False}
    cfg["start"] = {"scale": 3.0, "seed": 0}
    return validate_config(cfg)


def test_verify_passes_and_negative_control_fails(tmp_path):
    cfg = _rate_config(tmp_path)
    rep = verify_rates(cfg)
    assert rep["passed"], rep
    assert rep["ground_truth_residual"] <= 1e-12
    for s in rep["samplers"].values():
        assert 0 < s["c_theory"] < 1 and s["observed_factor"] < 1
    assert not verify_rates(cfg, c_scale=100.0)["passed"]


def test_verify_needs_fixed_instance(tmp_path):
    cfg = _rate_config(tmp_path)
    cfg["start"] = {"scale": 1.0}
    with pytest.raises(ConfigError):
        verify_rates(cfg)


def test_verify_uses_optimal_constant_for_optimal_pair(tmp_path):
    cfg = base_config(tmp_path, seeds=20)
    cfg["solver"] = {"algorithm": "bc", "stepsize": {"optimal": True}, "max_iters": 200, "check_descent": False}
    cfg["start"] = {"scale": 3.0, "seed": 0}
    cfg["samplers"] = [{"name": "optimal", "kind": "randomized", "probabilities": "optimal", "batch": 1}]
    cfg = validate_config(cfg)
    rep = verify_rates(cfg)
    problem = generate_problem(cfg["problem"])
    _, _, c_star = rate_randomized_optimal(RateInputs.from_problem(problem))
    assert rep["samplers"]["optimal"]["c"] == c_star and rep["passed"]
