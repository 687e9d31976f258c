import numpy as np
import pytest

from bcprox.blocks import BlockStructure, Problem, QuadraticBlock, Stepsize, sine_block
from bcprox.prox import L0, L1, Box, NonNeg, Quadratic, Zero
from bcprox.structured import ConsensusG, SeparableG, SharingG

CONVEX_ATOMS = [Zero(), L1(0.3), Box(-0.5, 1.0), NonNeg(), Quadratic(0.7)]


def random_spd(rng, n, mu, L):
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.linspace(mu, L, n) if n > 1 else np.array([mu])
    return (V * lam) @ V.T


def random_problem(rng, N=None, dims=None, convex=True, G="separable", atom=None, strongly=False):
    """Small random instance; ``G`` in {separable, consensus, sharing, zero}."""
    N = N or int(rng.integers(1, 6))
    if G in ("consensus", "sharing"):
        n = int(rng.integers(1, 4))
        dims = [n] * N
    dims = dims or [int(d) for d in rng.integers(1, 4, N)]
    blocks = []
    for n in dims:
        if convex or rng.random() < 0.4:
            mu = rng.uniform(0.2, 1.0) if strongly else rng.choice([0.0, rng.uniform(0.1, 1.0)])
            H = random_spd(rng, n, mu, mu + rng.uniform(0.0, 5.0))
            blocks.append(QuadraticBlock(0.5 * (H + H.T), rng.standard_normal(n)))
        else:
            blocks.append(sine_block(rng.uniform(0.0, 1.0), rng.uniform(0.5, 3.0), q=rng.standard_normal(n)))
    if atom is None:
        atom = CONVEX_ATOMS[int(rng.integers(len(CONVEX_ATOMS)))] if convex else L0(rng.uniform(0.05, 0.5))
    structure = BlockStructure(tuple(dims))
    if G == "consensus":
        nonsmooth = ConsensusG(atom, dims[0])
    elif G == "sharing":
        nonsmooth = SharingG(atom, dims[0])
    elif G == "zero":
        nonsmooth = None
    else:
        nonsmooth = SeparableG(atom, structure)
    return Problem(blocks, nonsmooth)


def random_step(rng, p, lo=0.1, hi=0.99):
    L = np.where(p.lipschitz > 0, p.lipschitz, 1.0)
    return Stepsize(rng.uniform(lo, hi, p.N) * p.N / L)


def feasible_point(rng, p, scale=1.0):
    """A random point where G is finite (the prox of a random point)."""
    u = scale * rng.standard_normal(p.structure.size)
    return p.nonsmooth.prox(u, np.ones(p.N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one "PASS/FAIL <criterion>" line per acceptance test, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
