"""Experiment runner: fan out over seeds and samplers, write traces and a summary.

Every (seed, sampler) pair is an independent run with its own solver
state, so runs execute on a thread pool (size capped by the
``BCPROX_THREADS`` environment variable).  Each run writes its own CSV;
the summary is written once all runs are done.  A failing run is recorded
in the summary and does not stop the batch.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..accel import AccelConfig, solve_accel
from ..blocks import Stepsize
from ..errors import BCProxError, ConfigError
from ..incremental import solve_finito, solve_sharing
from ..rates import (
    RateInputs,
    rate_essentially_cyclic,
    rate_randomized,
    rate_randomized_optimal,
    rate_shuffled_cyclic,
)
from ..sampling import SamplerSpec
from ..solver import BcSolverConfig, proximal_gradient, solve_bc
from .generators import as_finite_sum, as_sharing, generate_problem, starting_point

GROUND_TRUTH_TOL = 1e-13
GROUND_TRUTH_MAX_ITERS = 10**6
GAP_FLOOR = 1e-12


def worker_count(jobs):
    env = os.environ.get("BCPROX_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def build_step(problem, spec):
    if "gammas" in spec:
        return Stepsize(spec["gammas"]).validate(problem)
    if "optimal" in spec:
        g, _, _ = rate_randomized_optimal(RateInputs.from_problem(problem))
        return Stepsize(g).validate(problem)
    return Stepsize.default(problem, float(spec["alpha"]))


def build_sampler(spec, problem, seed):
    s = {k: v for k, v in spec.items() if k != "name"}
    s.setdefault("seed", seed)
    probs = s.get("probabilities")
    if probs == "uniform":
        s["probabilities"] = [1.0 / problem.N] * problem.N
    elif probs == "optimal":
        _, p, _ = rate_randomized_optimal(RateInputs.from_problem(problem))
        s["probabilities"] = p.tolist()
    return SamplerSpec.from_dict(s)


def is_convex_problem(problem):
    return problem.nonsmooth.is_convex and all(
        getattr(b, "H", None) is not None or b.strong_convexity > 0 for b in problem.blocks
    )


def minimum_phi(problem, x0, step=None):
    """``min Phi`` by full proximal-gradient steps (convex problems)."""
    step = step or Stepsize.default(problem)
    _, phi, res, its = proximal_gradient(problem, x0, step, tol=GROUND_TRUTH_TOL, max_iters=GROUND_TRUTH_MAX_ITERS)
    return phi, res, its


def contraction_factor(fbe, ref, k=None):
    """Per-iteration factor ``exp(slope)`` of a least-squares fit of ``log(fbe - ref)`` against ``k``.

    Points whose gap is below ``1e-12 (1 + |ref|)`` are ignored; returns
    ``(factor, r_squared)`` or ``(None, None)`` with fewer than three points.
    """
    fbe = np.asarray(fbe, dtype=float)
    k = np.arange(fbe.size) if k is None else np.asarray(k, dtype=float)
    gap = fbe - ref
    keep = gap > GAP_FLOOR * (1.0 + abs(ref))
    if keep.sum() < 3:
        return None, None
    x, y = k[keep], np.log(gap[keep])
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(np.exp(slope)), r2


def run_single(cfg, seed, sampler_cfg, problem=None):
    """One run; returns ``(trace, info)``."""
    problem = problem or generate_problem(cfg["problem"], seed)
    start = cfg["start"]
    x0 = starting_point(problem, start.get("seed", seed), float(start["scale"]))
    solver = cfg["solver"]
    step = build_step(problem, solver["stepsize"])
    algo = solver["algorithm"]
    if algo == "accel":
        res = solve_accel(problem, x0, AccelConfig(
            step, seed=sampler_cfg.get("seed", seed), max_iters=int(solver["max_iters"]),
            tol_residual=float(solver["tol_residual"]), trace_every=int(solver["trace_every"]),
        ))
    else:
        bc = BcSolverConfig(
            step=step,
            sampler=build_sampler(sampler_cfg, problem, seed),
            max_iters=int(solver["max_iters"]),
            tol_residual=float(solver["tol_residual"]),
            trace_every=int(solver["trace_every"]),
            check_descent=bool(solver["check_descent"]),
        )
        if algo == "finito":
            res = solve_finito(as_finite_sum(problem), x0[: problem.structure.dims[0]], bc)
        elif algo == "sharing":
            res = solve_sharing(as_sharing(problem), x0, bc)
        else:
            res = solve_bc(problem, x0, bc)
    info = {
        "status": res.status.value,
        "iterations": res.iterations,
        "final_residual": res.trace[-1].residual,
        "final_fbe": res.trace[-1].fbe,
        "final_phi_z": res.trace[-1].phi_z,
    }
    if getattr(res, "violation_at", None) is not None:
        info["violation_at"] = res.violation_at
    return res.trace, info, problem, x0, step


def _plot(trace, path, title):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
        k = trace.k
        axes[0].plot(k, trace.fbe - np.min(trace.fbe) + 1e-16)
        axes[0].set_yscale("log")
        axes[0].set_title("fbe - min fbe")
        axes[1].plot(k, np.maximum(trace.residual, 1e-18))
        axes[1].set_yscale("log")
        axes[1].set_title("residual")
        for ax in axes:
            ax.set_xlabel("k")
        fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        return True
    except Exception:  # plotting never fails a run
        return False


def run_experiment(cfg, out_dir=None, plot=None, keep_traces=False):
    """Run every (seed, sampler) pair of a validated config.

    Writes ``<sampler>_seed<seed>.csv`` per run and ``summary.json`` into
    ``out_dir`` (default ``cfg["output"]["dir"]``; ``False`` disables
    writing).  Returns the summary dict; with ``keep_traces`` the traces are
    attached under ``"traces"`` keyed by ``(sampler, seed)``.
    """
    out_dir = cfg["output"]["dir"] if out_dir is None else out_dir
    plot = cfg["output"]["plot"] if plot is None else plot
    record_time = bool(cfg["output"]["record_wall_time"])
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    fixed_problem = generate_problem(cfg["problem"]) if "seed" in cfg["problem"] else None
    jobs = [(seed, s) for seed in cfg["seeds"] for s in cfg["samplers"]]

    def one(job):
        seed, s = job
        entry = {"seed": seed, "sampler": s["name"], "algorithm": cfg["solver"]["algorithm"]}
        try:
            trace, info, problem, x0, step = run_single(cfg, seed, s, fixed_problem)
        except BCProxError as exc:
            entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
            return entry, None
        entry.update(info)
        ref = None
        if is_convex_problem(problem):
            try:
                ref, _, _ = minimum_phi(problem, x0, step)
                entry["min_phi"] = ref
            except BCProxError as exc:
                entry["min_phi_error"] = str(exc)
        if ref is None:
            ref = float(np.min(trace.fbe))
        factor, r2 = contraction_factor(trace.fbe, ref, trace.k)
        entry["contraction_factor"] = factor
        entry["fit_r2"] = r2
        if out_dir:
            name = f"{s['name']}_seed{seed}"
            trace.to_csv(out_dir / f"{name}.csv", record_time=record_time)
            entry["csv"] = f"{name}.csv"
            if plot:
                entry["plot"] = f"{name}.png" if _plot(trace, out_dir / f"{name}.png", name) else None
        return entry, trace

    with ThreadPoolExecutor(max_workers=worker_count(len(jobs))) as pool:
        results = list(pool.map(one, jobs))
    summary = {
        "config": {k: v for k, v in cfg.items() if k != "output"},
        "runs": [r[0] for r in results],
    }
    if out_dir:
        with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if keep_traces:
        summary["traces"] = {(e["sampler"], e["seed"]): t for e, t in results}
    return summary


def theoretical_rate(problem, step, sampler):
    """``(c, period)`` certified for ``sampler``: the envelope gap contracts by ``1 - c`` every ``period`` iterations."""
    if np.any(problem.strong_convexity <= 0) or not problem.nonsmooth.is_convex:
        raise ConfigError("linear rates need strongly convex blocks and a convex G")
    if sampler.kind == "randomized":
        inp = RateInputs.from_problem(problem, step, sampler.inclusion_floor(problem.N))
        return rate_randomized(inp), 1
    if sampler.kind in ("cyclic", "shuffled"):
        return rate_shuffled_cyclic(RateInputs.from_problem(problem, step)), problem.N
    T = int(sampler.period)
    return rate_essentially_cyclic(RateInputs.from_problem(problem, step, T=T)), T


def uses_optimal_pair(stepsize, sampler_cfg):
    """True for optimal stepsizes with single-index sampling at the optimal probabilities.

    That pair is certified by the tighter optimal constant rather than the
    general randomized formula.
    """
    return (
        bool(stepsize.get("optimal"))
        and sampler_cfg.get("kind") == "randomized"
        and sampler_cfg.get("probabilities") == "optimal"
        and sampler_cfg.get("batch") == 1
    )


def envelope_check(mean_gap, c, period=1, burn_in=5, slack=0.05):
    """Compare ``mean_gap[nu * period]`` with ``(1 - c)^nu mean_gap[0] (1 + slack)`` for ``nu >= burn_in``."""
    mean_gap = np.asarray(mean_gap, dtype=float)
    idx = np.arange(0, mean_gap.size, period)
    nu = idx // period
    env = (1.0 - c) ** nu * mean_gap[0] * (1.0 + slack)
    mask = nu >= burn_in
    obs = mean_gap[idx][mask]
    bound = env[mask]
    ok = obs <= bound
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, obs / bound, np.inf)
    first_bad = int(idx[mask][~ok][0]) if not ok.all() else None
    return {
        "passed": bool(ok.all()),
        "c": float(c),
        "period": int(period),
        "burn_in": int(burn_in),
        "checked_points": int(mask.sum()),
        "worst_ratio": float(ratio.max()) if ratio.size else None,
        "first_violation_k": first_bad,
    }


def verify_rates(cfg, c_scale=1.0, burn_in=5, slack=0.05):
    """Monte-Carlo check of the linear-rate envelopes for every sampler in ``cfg``.

    The problem must be fixed (``problem.seed``) and strongly convex, and the
    start fixed (``start.seed``), so that seeds only change the sampling.
    The mean envelope gap over seeds must stay below
    ``(1 - c_scale c)^nu gap_0 (1 + slack)`` after ``burn_in`` windows.
    """
    if "seed" not in cfg["problem"] or "seed" not in cfg["start"]:
        raise ConfigError("rate verification needs fixed problem.seed and start.seed")
    if cfg["solver"]["algorithm"] == "accel":
        raise ConfigError("rate verification covers the non-accelerated solvers")
    cfg = dict(cfg, solver=dict(cfg["solver"], trace_every=1, tol_residual=0.0))
    problem = generate_problem(cfg["problem"])
    x0 = starting_point(problem, cfg["start"]["seed"], float(cfg["start"]["scale"]))
    step = build_step(problem, cfg["solver"]["stepsize"])
    min_phi, gt_res, gt_its = minimum_phi(problem, x0, step)
    summary = run_experiment(cfg, out_dir=False, plot=False, keep_traces=True)
    report = {"min_phi": min_phi, "ground_truth_residual": gt_res, "ground_truth_iterations": gt_its, "samplers": {}}
    for s in cfg["samplers"]:
        traces = [summary["traces"][(s["name"], seed)] for seed in cfg["seeds"]]
        if any(t is None for t in traces):
            report["samplers"][s["name"]] = {"passed": False, "error": "a run failed"}
            continue
        K = min(len(t) for t in traces)
        mean_gap = np.mean([t.fbe[:K] - min_phi for t in traces], axis=0)
        if uses_optimal_pair(cfg["solver"]["stepsize"], s):
            _, _, c = rate_randomized_optimal(RateInputs.from_problem(problem))
            period = 1
        else:
            c, period = theoretical_rate(problem, step, build_sampler(s, problem, 0))
        rep = envelope_check(mean_gap, c * c_scale, period, burn_in, slack)
        rep["c_theory"] = c
        factor, r2 = contraction_factor(mean_gap + min_phi, min_phi)
        rep["observed_factor"] = factor
        rep["observed_fit_r2"] = r2
        report["samplers"][s["name"]] = rep
    report["passed"] = all(r["passed"] for r in report["samplers"].values())
    return report
