"""Certified linear-rate constants versus the contraction actually observed.

Prints the constants for uniform, optimal, cyclic and essentially cyclic
sampling on one strongly convex instance, then runs the Monte-Carlo
envelope check on 50 seeds.  The certified constants are safe but
conservative: the observed per-iteration factor is far below 1 - c.

    python3 demos/rate_constants.py
"""

from bcprox.bench.config import load_config
from bcprox.bench.generators import generate_problem
from bcprox.bench.runner import build_step, verify_rates
from bcprox.rates import RateInputs, rates_report

cfg = load_config("demos/configs/rate_check.yaml")
problem = generate_problem(cfg["problem"])
step = build_step(problem, cfg["solver"]["stepsize"])
inp = RateInputs.from_problem(problem, step, [1.0 / problem.N] * problem.N, T=2 * problem.N)
for key, value in rates_report(inp).items():
    print(f"{key:>20}: {value}")

report = verify_rates(cfg)
for name, r in report["samplers"].items():
    print(f"{name:>10}: {'PASS' if r['passed'] else 'FAIL'}  1-c={1 - r['c']:.5f}  observed factor={r['observed_factor']:.4f}")
