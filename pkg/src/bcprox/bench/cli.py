"""Command-line entry point ``bcprox``.

Subcommands::

    bcprox solve-bc       --config run.yaml [--seed S] [--out DIR] [--trace-every K] [--plot]
    bcprox solve-finito   ...
    bcprox solve-sharing  ...
    bcprox solve-accel    ...
    bcprox bench          --config run.yaml [--out DIR] [--plot]
    bcprox verify         --config run.yaml [--out DIR] [--c-scale F]
    bcprox rates          --config rates.json [--out report.json]

``solve-*`` run the named solver on the config's problem (one seed, every
sampler); ``bench`` runs all seeds; ``verify`` checks the linear-rate
envelopes and exits with status 1 on failure; ``rates`` reads rate inputs
as JSON (``{"L": [...], "mu": [...], "gammas": [...], "p": [...], "T": 8}``)
and prints every constant as JSON.
"""

import argparse
import json
import sys
from pathlib import Path

from ..errors import BCProxError
from ..rates import RateInputs, rates_report
from .config import load_config, validate_config
from .runner import run_experiment, verify_rates

SOLVERS = {"solve-bc": "bc", "solve-finito": "finito", "solve-sharing": "sharing", "solve-accel": "accel"}


def _parser():
    ap = argparse.ArgumentParser(prog="bcprox", description="Block-coordinate forward-backward solvers and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*SOLVERS, "bench", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--trace-every", type=int, help="record every k-th iteration")
        p.add_argument("--plot", action="store_true", help="also write PNG line charts")
        if name == "verify":
            p.add_argument("--c-scale", type=float, default=1.0, help="multiply the certified constants (negative controls)")
    p = sub.add_parser("rates")
    p.add_argument("--config", required=True, help="JSON file with rate inputs ('-' for stdin)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    return ap


def _load(args, algorithm=None):
    cfg = load_config(args.config)
    raw = dict(cfg)
    if algorithm is not None:
        raw["solver"] = dict(raw["solver"], algorithm=algorithm)
    if args.seed is not None:
        raw["seeds"] = [args.seed]
    if args.trace_every is not None:
        raw["solver"] = dict(raw["solver"], trace_every=args.trace_every)
    if args.out:
        raw["output"] = dict(raw["output"], dir=args.out)
    if args.plot:
        raw["output"] = dict(raw["output"], plot=True)
    return validate_config(raw)


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "rates":
            text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text(encoding="utf-8")
            _emit(rates_report(RateInputs.from_dict(json.loads(text))), args.out)
            return 0
        if args.command == "verify":
            cfg = _load(args)
            report = verify_rates(cfg, c_scale=args.c_scale)
            _emit(report, Path(cfg["output"]["dir"]) / "verify.json" if args.out else None)
            for name, rep in report["samplers"].items():
                print(f"{'PASS' if rep['passed'] else 'FAIL'} {name} c={rep.get('c')} worst_ratio={rep.get('worst_ratio')}")
            return 0 if report["passed"] else 1
        cfg = _load(args, SOLVERS.get(args.command))
        summary = run_experiment(cfg)
        for run in summary["runs"]:
            print(f"{run['sampler']} seed={run['seed']} status={run['status']} "
                  f"iterations={run.get('iterations')} residual={run.get('final_residual')}")
        print(f"wrote {len(summary['runs'])} run(s) to {cfg['output']['dir']}")
        return 0 if all(r["status"] != "error" for r in summary["runs"]) else 1
    except (BCProxError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
