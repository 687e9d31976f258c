"""Seeded synthetic problem families.

A problem spec is a plain dict::

    {"kind": "finite_sum" | "sharing" | "generic_bc" | "accel",
     "N": 4, "n": 2,                  # or "dims": [2, 3, 1] for generic_bc / accel
     "smooth": "quadratic" | "sine",
     "mu": [0.5, 2.0],                # range of strong convexity moduli (0 -> convex)
     "kappa": [1.0, 10.0],            # range of condition numbers L / mu
     "L": [1.0, 4.0],                 # range of L when mu == 0
     "a": [0.5, 2.0], "b": [0.5, 2.0],  # sine blocks: 0.5 a ||x||^2 + b sum sin(x)
     "regularizer": {"kind": "l1", "lam": 0.1},
     "seed": 7}                       # optional: fixes the instance across runs

Quadratic blocks are ``0.5 x'Hx + q'x`` with ``H = V diag(lam) V'`` where
the extreme eigenvalues are exactly ``mu_i`` and ``kappa_i mu_i``, so the
reported moduli are exact up to rounding.  With ``n = 1`` the single
eigenvalue is ``mu_i`` (``kappa_i = 1``).  Sine blocks are nonconvex when
``|b_i| > a_i``; their Lipschitz modulus ``a_i + |b_i|`` is certified.

``finite_sum`` lifts ``(1/N) sum_i f_i(x) + g(x)`` to the consensus form,
``sharing`` builds ``(1/N) sum_i f_i(x_i) + g(sum_i x_i)``, and
``generic_bc`` / ``accel`` use a separable ``G = sum_i g(x_i)``.
"""

import numpy as np

from ..blocks import BlockStructure, Problem, QuadraticBlock, sine_block
from ..errors import ConfigError
from ..incremental import FiniteSumProblem, SharingProblem
from ..prox import atom_from_spec
from ..sampling import PROBLEM_STREAM, make_rng
from ..structured import ConsensusG, SeparableG, SharingG

KINDS = ("finite_sum", "sharing", "generic_bc", "accel")
SMOOTH = ("quadratic", "sine")
DEFAULTS = {
    "N": 4,
    "n": 2,
    "smooth": "quadratic",
    "mu": [0.5, 2.0],
    "kappa": [1.0, 10.0],
    "L": [1.0, 4.0],
    "a": [0.5, 2.0],
    "b": [0.5, 2.0],
    "regularizer": {"kind": "l1", "lam": 0.1},
}
KEYS = set(DEFAULTS) | {"kind", "dims", "seed", "nonconvex"}


def _range(spec, key):
    v = spec[key]
    if np.isscalar(v):
        return float(v), float(v)
    lo, hi = (float(t) for t in v)
    if lo > hi:
        raise ConfigError(f"empty range for {key}: {v}")
    return lo, hi


def random_quadratic(rng, n, mu, L):
    """``(H, q)`` with ``lambda_min(H) = mu`` and ``lambda_max(H) = L`` (``mu`` if ``n = 1``)."""
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if n == 1:
        lam = np.array([mu])
    else:
        lam = np.concatenate([[mu], rng.uniform(mu, L, n - 2), [L]])
    H = (V * lam) @ V.T
    return 0.5 * (H + H.T), rng.standard_normal(n)


def normalize_spec(spec):
    spec = dict(spec)
    unknown = set(spec) - KEYS
    if unknown:
        raise ConfigError(f"unknown problem keys {sorted(unknown)}")
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"problem kind must be one of {KINDS}, got {kind!r}")
    if spec.pop("nonconvex", False):
        spec.setdefault("smooth", "sine")
        spec.setdefault("regularizer", {"kind": "l0", "lam": 0.1})
    out = dict(DEFAULTS)
    out.update(spec)
    if out["smooth"] not in SMOOTH:
        raise ConfigError(f"smooth must be one of {SMOOTH}")
    if kind == "accel" and out["smooth"] != "quadratic":
        raise ConfigError("accel problems need quadratic blocks")
    if int(out["N"]) < 1:
        raise ConfigError("N must be at least 1")
    if "dims" in spec:
        out["dims"] = [int(d) for d in spec["dims"]]
        out["N"] = len(out["dims"])
        if kind in ("finite_sum", "sharing"):
            if len(set(out["dims"])) != 1:
                raise ConfigError(f"{kind} problems need equal block dimensions")
            out["n"] = out["dims"][0]
    else:
        out["dims"] = [int(out["n"])] * int(out["N"])
    if min(out["dims"]) < 1:
        raise ConfigError("block dimensions must be positive")
    mu_lo, _ = _range(out, "mu")
    k_lo, _ = _range(out, "kappa")
    if mu_lo < 0 or k_lo < 1:
        raise ConfigError("need mu >= 0 and kappa >= 1")
    out["regularizer"] = atom_from_spec(out["regularizer"]).to_spec()
    return out


def _smooth_blocks(spec, rng):
    blocks = []
    for n in spec["dims"]:
        if spec["smooth"] == "quadratic":
            mu = rng.uniform(*_range(spec, "mu"))
            if mu > 0:
                L = mu * rng.uniform(*_range(spec, "kappa"))
            else:
                L = rng.uniform(*_range(spec, "L"))
            H, q = random_quadratic(rng, n, mu, L)
            blocks.append(QuadraticBlock(H, q))
        else:
            a = rng.uniform(*_range(spec, "a"))
            b = rng.uniform(*_range(spec, "b")) * rng.choice([-1.0, 1.0])
            blocks.append(sine_block(a, b, q=rng.standard_normal(n)))
    return blocks


def generate_problem(spec, seed=0):
    """Build a :class:`Problem` from ``spec``; ``spec["seed"]`` overrides ``seed``."""
    spec = normalize_spec(spec)
    rng = make_rng(spec.get("seed", seed), PROBLEM_STREAM)
    blocks = _smooth_blocks(spec, rng)
    g = atom_from_spec(spec["regularizer"])
    kind = spec["kind"]
    if kind == "accel" and not g.is_convex:
        raise ConfigError("accel problems need a convex regularizer")
    n = spec["dims"][0]
    if kind == "finite_sum":
        return Problem(blocks, ConsensusG(g, n))
    if kind == "sharing":
        return Problem(blocks, SharingG(g, n))
    return Problem(blocks, SeparableG(g, BlockStructure(tuple(spec["dims"]))))


def starting_point(problem, seed=0, scale=1.0):
    """Seeded start; a common point in every block when ``G`` is a consensus term."""
    rng = make_rng(seed, 2)
    if isinstance(problem.nonsmooth, ConsensusG):
        return np.tile(scale * rng.standard_normal(problem.nonsmooth.n), problem.N)
    return scale * rng.standard_normal(problem.structure.size)


def as_finite_sum(problem):
    if not isinstance(problem.nonsmooth, ConsensusG):
        raise ConfigError("problem does not have consensus structure")
    return FiniteSumProblem(problem.blocks, problem.nonsmooth.g)


def as_sharing(problem):
    if not isinstance(problem.nonsmooth, SharingG):
        raise ConfigError("problem does not have sharing structure")
    return SharingProblem(problem.blocks, problem.nonsmooth.g)
