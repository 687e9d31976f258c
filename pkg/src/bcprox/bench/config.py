"""Run configuration files.

A run is described by a YAML document::

    version: 1
    problem:                      # see bcprox.bench.generators
      kind: finite_sum
      N: 4
      n: 2
      regularizer: {kind: l1, lam: 0.1}
      seed: 3                     # optional: same instance for every run seed
    solver:
      algorithm: bc               # bc | finito | sharing | accel (default by problem kind)
      stepsize: {alpha: 0.5}      # or {gammas: [...]} or {optimal: true}
      max_iters: 500
      tol_residual: 1.0e-12
      trace_every: 1
      check_descent: true
    start: {scale: 1.0}           # random start x0, seeded by the run seed or start.seed
    samplers:                     # one run per (seed, sampler)
      - {name: uniform, kind: randomized, probabilities: uniform, batch: 1}
      - {name: cyclic, kind: cyclic}
    seeds: [0, 1, 2]
    output:
      dir: runs/example
      record_wall_time: false     # true records wall-clock ns (reruns then differ)
      plot: false

``probabilities`` accepts a list, ``uniform`` or ``optimal`` (the
probabilities that maximize the randomized rate constant).  Sampler seeds
default to the run seed.
"""

import copy

import yaml

from ..errors import ConfigError
from .generators import normalize_spec

VERSION = 1
ALGORITHMS = ("bc", "finito", "sharing", "accel")
DEFAULT_ALGORITHM = {"finite_sum": "finito", "sharing": "sharing", "generic_bc": "bc", "accel": "accel"}
SOLVER_KEYS = {"algorithm", "stepsize", "max_iters", "tol_residual", "trace_every", "check_descent"}
TOP_KEYS = {"version", "problem", "solver", "samplers", "seeds", "output", "start", "name"}
SAMPLER_KEYS = {"name", "kind", "probabilities", "batch", "schedule", "period", "permutations", "seed"}


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return validate_config(raw)


def validate_config(raw):
    """Check a parsed document and fill in defaults; returns a new dict."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    cfg = copy.deepcopy(raw)
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if "version" not in cfg:
        raise ConfigError("configuration needs a version field")
    if cfg["version"] != VERSION:
        raise ConfigError(f"unsupported configuration version {cfg['version']!r}")
    if "problem" not in cfg:
        raise ConfigError("configuration needs a problem section")
    cfg["problem"] = normalize_spec(cfg["problem"])
    kind = cfg["problem"]["kind"]

    solver = dict(cfg.get("solver") or {})
    unknown = set(solver) - SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys {sorted(unknown)}")
    solver.setdefault("algorithm", DEFAULT_ALGORITHM[kind])
    if solver["algorithm"] not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
    if solver["algorithm"] == "finito" and kind != "finite_sum":
        raise ConfigError("finito needs a finite_sum problem")
    if solver["algorithm"] == "sharing" and kind != "sharing":
        raise ConfigError("the sharing solver needs a sharing problem")
    if solver["algorithm"] == "accel" and cfg["problem"]["smooth"] != "quadratic":
        raise ConfigError("accel needs quadratic blocks")
    step = solver.setdefault("stepsize", {"alpha": 0.95})
    if not isinstance(step, dict) or len(step) != 1 or next(iter(step)) not in ("alpha", "gammas", "optimal"):
        raise ConfigError("stepsize must be one of {alpha: a}, {gammas: [...]}, {optimal: true}")
    solver.setdefault("max_iters", 1000)
    solver.setdefault("tol_residual", 0.0)
    solver.setdefault("trace_every", 1)
    solver.setdefault("check_descent", True)
    if int(solver["max_iters"]) < 1 or int(solver["trace_every"]) < 1 or float(solver["tol_residual"]) < 0:
        raise ConfigError("need max_iters >= 1, trace_every >= 1, tol_residual >= 0")
    cfg["solver"] = solver

    samplers = cfg.get("samplers")
    if solver["algorithm"] == "accel":
        samplers = samplers or [{"name": "uniform", "kind": "randomized", "probabilities": "uniform", "batch": 1}]
    if not samplers:
        raise ConfigError("at least one sampler is required")
    names = set()
    out = []
    for i, s in enumerate(samplers):
        s = dict(s)
        unknown = set(s) - SAMPLER_KEYS
        if unknown:
            raise ConfigError(f"unknown sampler keys {sorted(unknown)}")
        s.setdefault("name", f"{s.get('kind')}{i}")
        if s["name"] in names:
            raise ConfigError(f"duplicate sampler name {s['name']!r}")
        names.add(s["name"])
        if s.get("kind") not in ("cyclic", "shuffled", "randomized", "essentially_cyclic"):
            raise ConfigError(f"unknown sampler kind {s.get('kind')!r}")
        if solver["algorithm"] == "accel" and not (s["kind"] == "randomized" and s.get("probabilities") == "uniform" and s.get("batch") == 1):
            raise ConfigError("the accelerated solver samples one block uniformly")
        out.append(s)
    cfg["samplers"] = out

    seeds = cfg.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    if not seeds or any(int(s) < 0 for s in seeds):
        raise ConfigError("seeds must be a nonempty list of nonnegative integers")
    cfg["seeds"] = [int(s) for s in seeds]
    start = dict(cfg.get("start") or {})
    start.setdefault("scale", 1.0)
    cfg["start"] = start
    output = dict(cfg.get("output") or {})
    output.setdefault("dir", "runs")
    output.setdefault("record_wall_time", False)
    output.setdefault("plot", False)
    cfg["output"] = output
    return cfg


def dump_config(cfg, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
