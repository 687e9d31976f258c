"""General forward-backward block-coordinate scheme.

Each iteration computes ``z^k = T(x^k)`` for the full vector, selects an
index set ``I`` and copies the blocks ``z_i^k, i in I`` into ``x``.  The
envelope decreases at every iteration by at least

    sum_{i in I} xi_i / (2 gamma_i) ||z_i^k - x_i^k||^2,   xi_i = (N - gamma_i L_i) / N,

whatever the sampling rule; the solver checks this and aborts on a
violation, which can only come from a wrong Lipschitz constant or a prox
that does not return a global minimizer.

There is no natural stopping rule; iterations stop once the fixed-point
residual ``||x^k - z^k||`` in the ``Gamma^{-1}`` metric drops to
``tol_residual`` or after ``max_iters`` updates.
"""

import enum
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blocks import BlockVector, Stepsize, as_flat
from .errors import ContractError, NumericError
from .fbe import FbeEvaluator
from .sampling import SamplerSpec, make_sampler
from .trace import SolverTrace

DESCENT_RTOL = 1e-8


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DESCENT_VIOLATION = "descent_violation"


@dataclass
class BcSolverConfig:
    step: Stepsize
    sampler: SamplerSpec
    max_iters: int = 1000
    tol_residual: float = 0.0
    trace_every: int = 1
    check_descent: bool = True

    def __post_init__(self):
        if not isinstance(self.step, Stepsize):
            self.step = Stepsize(self.step)
        if self.max_iters < 1:
            raise ContractError("max_iters must be at least 1")
        if self.tol_residual < 0:
            raise ContractError("tol_residual must be nonnegative")
        if self.trace_every < 1:
            raise ContractError("trace_every must be at least 1")


@dataclass
class SolveResult:
    z: BlockVector
    x: BlockVector
    trace: SolverTrace
    status: Status
    iterations: int
    violation_at: Optional[int] = None


def descent_amount(x, z, indices, gammas, xi, structure):
    """``sum_{i in I} xi_i / (2 gamma_i) ||z_i - x_i||^2`` on flat arrays."""
    total = 0.0
    for i in indices:
        s = structure.slice(i)
        d = z[s] - x[s]
        total += xi[i] / (2.0 * gammas[i]) * float(d @ d)
    return total


def descent_slack(fbe):
    return DESCENT_RTOL * (1.0 + abs(fbe))


def check_sure_descent(report_k, report_k1, indices, step):
    """Check ``fbe(x^{k+1}) <= fbe(x^k) - sum_{i in I} xi_i/(2 gamma_i) ||z_i^k - x_i^k||^2``.

    The reports must come from consecutive iterations of one run; a slack of
    ``1e-8 (1 + |fbe(x^k)|)`` absorbs rounding.
    """
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    x, z = report_k.x, report_k.z
    dec = descent_amount(x.data, z.data, indices, step.gammas, report_k.xi, x.structure)
    return bool(report_k1.fbe <= report_k.fbe - dec + descent_slack(report_k.fbe))


class _GenericEngine:
    """Plain scheme state: the full vector ``x`` and ``z = T(x)`` (computed lazily)."""

    def __init__(self, ev, x):
        self.ev = ev
        self.x = x
        self._z = ev.T(x)

    @property
    def z(self):
        if self._z is None:
            self._z = self.ev.T(self.x)
        return self._z

    def advance(self, indices):
        structure = self.ev.problem.structure
        z = self.z
        for i in indices:
            s = structure.slice(i)
            self.x[s] = z[s]
        self._z = None

    def evaluate(self):
        self._z, fbe, phi_z, _ = self.ev.evaluate(self.x)
        return fbe, phi_z


def run_monitored(engine, ev, cfg, callback=None):
    """Shared iteration loop with residual stopping, tracing and descent checks.

    ``engine`` exposes flat arrays ``x`` (the full iterate) and ``z``
    (``T(x)``), ``advance(indices)`` and ``evaluate() -> (fbe, phi_z)``.
    Returns ``(trace, status, iterations, violation_at)``.
    """
    p = ev.problem
    structure = p.structure
    gammas, xi = ev.gammas, ev.xi
    inv_gamma = 1.0 / ev.gamma_flat
    sampler = make_sampler(cfg.sampler, p.N)
    trace = SolverTrace()
    every = cfg.trace_every
    t0 = time.perf_counter_ns()

    def guarded(fn, k):
        try:
            return fn()
        except NumericError as exc:
            exc.iteration = k
            raise

    def monitor(k):
        return guarded(engine.evaluate, k)

    def residual(k):
        d = guarded(lambda: engine.z, k) - engine.x
        return float(np.sqrt(d @ (d * inv_gamma)))

    fbe, phi_z = monitor(0)
    res = residual(0)
    fresh = True  # fbe/phi_z belong to the current x
    ref_fbe, pending = fbe, 0.0
    k = 0
    status, violation = None, None
    while True:
        if res <= cfg.tol_residual or k >= cfg.max_iters:
            status = Status.CONVERGED if res <= cfg.tol_residual else Status.MAX_ITERS
            if not fresh:
                fbe, phi_z = monitor(k)
            trace.append(k, (), fbe, phi_z, res, time.perf_counter_ns() - t0)
            break
        indices = np.sort(sampler.next_indices(k))
        if fresh and k % every == 0:
            trace.append(k, indices, fbe, phi_z, res, time.perf_counter_ns() - t0)
        if callback is not None:
            callback(k, engine.x, engine.z, indices)
        pending += descent_amount(engine.x, engine.z, indices, gammas, xi, structure)
        guarded(lambda: engine.advance(indices), k)
        k += 1
        if k % every == 0 or (cfg.check_descent and every == 1):
            fbe, phi_z = monitor(k)
            fresh = True
            if cfg.check_descent and fbe > ref_fbe - pending + descent_slack(ref_fbe):
                status, violation = Status.DESCENT_VIOLATION, k
                trace.append(k, (), fbe, phi_z, residual(k), time.perf_counter_ns() - t0)
                break
            ref_fbe, pending = fbe, 0.0
        else:
            fresh = False
        res = residual(k)
    return trace, status, k, violation


def solve_bc(p, x0, cfg, callback=None):
    """Run the block-coordinate forward-backward scheme from ``x0``.

    ``callback(k, x, z, indices)`` is invoked with flat arrays (do not
    modify them) just before the blocks in ``indices`` are updated.
    Returns the last ``z`` together with the trace and termination status.
    """
    ev = FbeEvaluator(p, cfg.step)
    x = np.array(as_flat(x0, p.structure), dtype=float)
    try:
        engine = _GenericEngine(ev, x)
    except NumericError as exc:
        exc.iteration = 0
        raise
    trace, status, k, violation = run_monitored(engine, ev, cfg, callback)
    return SolveResult(
        z=BlockVector(p.structure, engine.z),
        x=BlockVector(p.structure, engine.x),
        trace=trace,
        status=status,
        iterations=k,
        violation_at=violation,
    )


def proximal_gradient(p, x0, step, tol=1e-13, max_iters=10**6):
    """Full proximal-gradient iterations (every block each step) until the residual is below ``tol``.

    Returns ``(z, phi(z), residual, iterations)``; used for ground-truth minima.
    """
    ev = FbeEvaluator(p, step)
    x = np.array(as_flat(x0, p.structure), dtype=float)
    inv_gamma = 1.0 / ev.gamma_flat
    res = np.inf
    for it in range(max_iters):
        z = ev.T(x)
        d = z - x
        res = float(np.sqrt(d @ (d * inv_gamma)))
        x = z
        if res <= tol:
            break
    z, fbe, phi_z, res = ev.evaluate(x)
    return BlockVector(p.structure, z), phi_z, res, it + 1
