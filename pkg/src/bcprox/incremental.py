"""Incremental solvers that touch only the sampled blocks per iteration.

Both are the block-coordinate forward-backward scheme specialized to a
structured ``G``; they keep an aggregate of the forward steps so that an
iteration costs one prox of ``g`` plus ``|I|`` block gradients.

Finito / MISO
    ``min_x (1/N) sum_i f_i(x) + g(x)`` with every ``f_i`` on the same
    space, lifted to ``N`` copies ``x_i`` tied by :class:`ConsensusG`.
    State: ``s_i = x_i - (gamma_i/N) grad f_i(x_i)`` and the weighted mean
    ``s_hat = gamma_hat sum_i s_i / gamma_i``; the prox point is
    ``z = prox_{gamma_hat g}(s_hat)``.
Sharing
    ``min (1/N) sum_i f_i(x_i) + g(x_1 + ... + x_N)``.  State: the forward
    points ``s_i`` and their sum ``s_tilde``; the prox of the lifted ``G``
    is ``z_i = s_i + gamma_i w`` with
    ``w = (prox_{gamma_tilde g}(s_tilde) - s_tilde) / gamma_tilde``.

Within one iteration the sampled indices are processed in ascending order.
Aggregates are recomputed from scratch every ``refresh`` iterations to keep
rounding drift bounded; a drift above ``1e-8 (1 + ||aggregate||)`` at that
point is reported as a :class:`NumericError`.
"""

import numpy as np

from .blocks import BlockStructure, BlockVector, Problem, Stepsize
from .errors import ContractError, NumericError, StructureError
from .fbe import FbeEvaluator
from .prox import atom_from_spec
from .solver import SolveResult, run_monitored
from .structured import ConsensusG, SharingG

REFRESH_PERIOD = 4096
DRIFT_RTOL = 1e-8


class _SameSpaceProblem:
    def __init__(self, blocks, g):
        blocks = tuple(blocks)
        if not blocks:
            raise StructureError("need at least one smooth term")
        n = blocks[0].dim
        if any(b.dim != n for b in blocks):
            raise StructureError("all smooth terms must act on the same dimension")
        self.blocks = blocks
        self.g = atom_from_spec(g)
        self.n = n
        self.N = len(blocks)
        self.structure = BlockStructure.uniform(self.N, n)
        self._lifted = None

    @property
    def lipschitz(self):
        return np.array([b.lipschitz for b in self.blocks])

    @property
    def strong_convexity(self):
        return np.array([b.strong_convexity for b in self.blocks])

    def lifted(self):
        """The equivalent block problem ``(1/N) sum_i f_i(x_i) + G(x)``."""
        if self._lifted is None:
            self._lifted = Problem(self.blocks, self._make_G())
        return self._lifted


class FiniteSumProblem(_SameSpaceProblem):
    """``min_x (1/N) sum_i f_i(x) + g(x)``."""

    def _make_G(self):
        return ConsensusG(self.g, self.n)

    def cost(self, x):
        x = np.asarray(x, dtype=float)
        return sum(b.eval(x) for b in self.blocks) / self.N + float(self.g(x))


class SharingProblem(_SameSpaceProblem):
    """``min (1/N) sum_i f_i(x_i) + g(sum_i x_i)``."""

    def _make_G(self):
        return SharingG(self.g, self.n)

    def cost(self, x):
        rows = np.asarray(x, dtype=float).reshape(self.N, self.n)
        return sum(b.eval(r) for b, r in zip(self.blocks, rows)) / self.N + float(self.g(rows.sum(axis=0)))


def _check_drift(name, stored, exact):
    gap = np.linalg.norm(stored - exact)
    if not gap <= DRIFT_RTOL * (1.0 + np.linalg.norm(stored)):
        raise NumericError(f"{name} drifted from its definition by {gap:.3e}")


def _gammas_for(problem, step):
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    step.validate(problem.lifted())
    return step


class FinitoState:
    """Aggregate state of the Finito/MISO iteration.

    ``x`` holds the lifted iterate: row ``i`` is the last prox point used to
    refresh ``s_i``.  ``z`` is kept equal to ``prox_{gamma_hat g}(s_hat)``.
    """

    def __init__(self, problem, x_init, step, refresh=REFRESH_PERIOD):
        step = _gammas_for(problem, step)
        self.problem = problem
        self.step = step
        self.gammas = step.gammas
        self.gamma_hat = 1.0 / np.sum(1.0 / self.gammas)
        self.uniform = bool(np.all(self.gammas == self.gammas[0]))
        self.refresh = int(refresh)
        x_init = np.asarray(x_init, dtype=float).reshape(problem.n)
        N = problem.N
        self.x = np.tile(x_init, (N, 1))
        self.s = np.empty((N, problem.n))
        for i, f in enumerate(problem.blocks):
            self.s[i] = x_init - self.gammas[i] / N * f.grad(x_init)
        self.s_hat = self.exact_aggregate()
        self.iterations = 0
        self.z = self._prox()

    def exact_aggregate(self):
        if self.uniform:
            return self.s.mean(axis=0)
        inv = 1.0 / self.gammas
        return self.gamma_hat * (inv @ self.s)

    def check_consistency(self):
        _check_drift("s_hat", self.s_hat, self.exact_aggregate())

    def _prox(self):
        z = np.asarray(self.problem.g.prox(self.s_hat, self.gamma_hat), dtype=float)
        if not np.all(np.isfinite(z)):
            raise NumericError("prox of g returned non-finite values")
        return z

    # lifted views used by the monitored loop
    @property
    def x_flat(self):
        return self.x.reshape(-1)

    @property
    def z_flat(self):
        return np.tile(self.z, self.problem.N)


def finito_step(problem, st, indices):
    """One Finito iteration on the sampled ``indices``; returns ``(z, st)``.

    ``z`` is the prox point the iteration used; ``st`` is updated in place.
    """
    indices = np.sort(np.asarray(indices, dtype=int))
    if indices.size == 0:
        raise ContractError("index set must be nonempty")
    z = st.z
    N = problem.N
    for i in indices:
        gi = st.gammas[i]
        v = z - gi / N * problem.blocks[i].grad(z)
        coef = 1.0 / N if st.uniform else st.gamma_hat / gi
        st.s_hat += coef * (v - st.s[i])
        st.s[i] = v
        st.x[i] = z
    st.iterations += 1
    if st.refresh and st.iterations % st.refresh == 0:
        st.check_consistency()
        st.s_hat = st.exact_aggregate()
    st.z = st._prox()
    return z, st


class SharingState:
    """Aggregate state of the incremental sharing iteration.

    ``x`` holds the lifted iterate; ``w`` is kept consistent with ``s_tilde``.
    """

    def __init__(self, problem, x_init, step, refresh=REFRESH_PERIOD):
        step = _gammas_for(problem, step)
        self.problem = problem
        self.step = step
        self.gammas = step.gammas
        self.gamma_tilde = float(np.sum(self.gammas))
        self.refresh = int(refresh)
        N, n = problem.N, problem.n
        self.x = np.array(np.asarray(x_init, dtype=float).reshape(N, n))
        self.s = np.empty((N, n))
        for i, f in enumerate(problem.blocks):
            self.s[i] = self.x[i] - self.gammas[i] / N * f.grad(self.x[i])
        self.s_tilde = self.s.sum(axis=0)
        self.iterations = 0
        self.w = self._shift()

    def exact_aggregate(self):
        return self.s.sum(axis=0)

    def check_consistency(self):
        _check_drift("s_tilde", self.s_tilde, self.exact_aggregate())

    def _shift(self):
        gt, st = self.gamma_tilde, self.s_tilde
        w = (np.asarray(self.problem.g.prox(st, gt), dtype=float) - st) / gt
        if not np.all(np.isfinite(w)):
            raise NumericError("prox of g returned non-finite values")
        return w

    @property
    def z(self):
        return self.s + self.gammas[:, None] * self.w

    @property
    def x_flat(self):
        return self.x.reshape(-1)

    @property
    def z_flat(self):
        return self.z.reshape(-1)


def sharing_step(problem, st, indices):
    """One sharing iteration on the sampled ``indices``; ``st`` is updated in place and returned."""
    indices = np.sort(np.asarray(indices, dtype=int))
    if indices.size == 0:
        raise ContractError("index set must be nonempty")
    w = st.w
    N = problem.N
    for i in indices:
        gi = st.gammas[i]
        zi = st.s[i] + gi * w
        v = zi - gi / N * problem.blocks[i].grad(zi)
        st.s_tilde += v - st.s[i]
        st.s[i] = v
        st.x[i] = zi
    st.iterations += 1
    if st.refresh and st.iterations % st.refresh == 0:
        st.check_consistency()
        st.s_tilde = st.exact_aggregate()
    st.w = st._shift()
    return st


def extract_z(st):
    """Current output: ``z`` in R^n for Finito, the lifted block vector for sharing.

    The aggregate is checked against its definition first and the prox is
    recomputed from it.
    """
    st.check_consistency()
    if isinstance(st, FinitoState):
        return st._prox()
    if isinstance(st, SharingState):
        w = st._shift()
        return BlockVector(st.problem.structure, (st.s + st.gammas[:, None] * w).reshape(-1))
    raise TypeError(f"unsupported state {type(st).__name__}")


class _IncrementalEngine:
    """Adapter exposing an incremental state to the monitored loop."""

    def __init__(self, problem, st, step_fn, ev):
        self.problem, self.st, self.step_fn, self.ev = problem, st, step_fn, ev

    @property
    def x(self):
        return self.st.x_flat

    @property
    def z(self):
        return self.st.z_flat

    def advance(self, indices):
        self.step_fn(self.problem, self.st, indices)

    def evaluate(self):
        _, fbe, phi_z, _ = self.ev.evaluate(self.st.x_flat.copy())
        return fbe, phi_z


def _solve(problem, st, step_fn, cfg, callback):
    ev = FbeEvaluator(problem.lifted(), cfg.step)
    engine = _IncrementalEngine(problem, st, step_fn, ev)
    trace, status, k, violation = run_monitored(engine, ev, cfg, callback)
    return SolveResult(
        z=BlockVector(problem.structure, st.z_flat),
        x=BlockVector(problem.structure, st.x_flat),
        trace=trace,
        status=status,
        iterations=k,
        violation_at=violation,
    )


def solve_finito(problem, x_init, cfg, callback=None, refresh=REFRESH_PERIOD):
    """Run Finito/MISO; the trace monitors the envelope of the lifted problem.

    The returned ``z`` is the lifted vector ``(z, ..., z)``; its first block
    is the solution estimate in R^n.
    """
    st = FinitoState(problem, x_init, cfg.step, refresh=refresh)
    return _solve(problem, st, finito_step, cfg, callback)


def solve_sharing(problem, x_init, cfg, callback=None, refresh=REFRESH_PERIOD):
    """Run the incremental sharing solver from the lifted point ``x_init``."""
    st = SharingState(problem, x_init, cfg.step, refresh=refresh)
    return _solve(problem, st, lambda p, s, I: sharing_step(p, s, I), cfg, callback)
