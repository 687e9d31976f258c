"""Forward-backward operator, forward-backward envelope and majorizing model.

For a stepsize ``Gamma = blockdiag(gamma_i I)`` the forward-backward map is

    T(x) = prox_G^{Gamma^{-1}}(x - Gamma grad F(x))

and the envelope is the optimal value of the subproblem it solves,

    fbe(x) = F(x) + <grad F(x), z - x> + G(z) + 0.5 ||z - x||^2_{Gamma^{-1}},  z in T(x).

The envelope is always evaluated at the concrete ``z`` returned by the prox,
so it is exact whatever minimizer the prox selects.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector, Stepsize, as_flat
from .errors import ContractError, NumericError


@dataclass
class FbeReport:
    x: BlockVector
    z: BlockVector
    fbe: float
    phi_z: float
    residual: float  # ||x - z|| in the Gamma^{-1} metric
    residual_euclid: float
    xi: np.ndarray  # (N - gamma_i L_i) / N


class FbeEvaluator:
    """Evaluates ``T`` and the envelope for a fixed problem and stepsize.

    Solvers keep one instance around to avoid re-validating the stepsize
    and re-expanding per-block weights on every call.
    """

    def __init__(self, problem, step):
        if not isinstance(step, Stepsize):
            step = Stepsize(step)
        step.validate(problem)
        self.problem = problem
        self.step = step
        self.gammas = step.gammas
        self.gamma_flat = problem.structure.expand(step.gammas)
        self.xi = step.xi(problem)

    def forward(self, x):
        """Return ``(x - Gamma grad F(x), grad F(x))`` on flat arrays."""
        g = self.problem._grad(x)
        return x - self.gamma_flat * g, g

    def T(self, x):
        u, _ = self.forward(x)
        return self.problem.nonsmooth.prox(u, self.gammas)

    def evaluate(self, x):
        """Return ``(z, fbe, phi_z, residual)`` for a flat ``x``."""
        p = self.problem
        u, g = self.forward(x)
        z = p.nonsmooth.prox(u, self.gammas)
        Gz = p.nonsmooth.value(z)
        if not np.isfinite(Gz):
            raise ContractError("prox returned a point where G is infinite")
        d = z - x
        sq = d * d
        res2 = float(sq @ (1.0 / self.gamma_flat))
        Fx = p._F(x)
        fbe = Fx + float(g @ d) + Gz + 0.5 * res2
        phi_z = p._F(z) + Gz
        if not np.isfinite(fbe):
            raise NumericError("forward-backward envelope is not finite")
        return z, fbe, phi_z, np.sqrt(res2)

    def report(self, x):
        x = as_flat(x, self.problem.structure)
        z, fbe, phi_z, res = self.evaluate(x)
        s = self.problem.structure
        return FbeReport(
            x=BlockVector(s, x),
            z=BlockVector(s, z, copy=False),
            fbe=fbe,
            phi_z=phi_z,
            residual=res,
            residual_euclid=float(np.linalg.norm(z - x)),
            xi=self.xi.copy(),
        )


def forward_backward(p, x, step):
    """``z = prox_G^{Gamma^{-1}}(x - Gamma grad F(x))``."""
    ev = FbeEvaluator(p, step)
    return BlockVector(p.structure, ev.T(as_flat(x, p.structure)), copy=False)


def fbe_value(p, x, step):
    """Envelope value, the point ``z`` it is attained at and residual diagnostics."""
    return FbeEvaluator(p, step).report(x)


def model_value(p, w, x, step):
    """``F(x) + <grad F(x), w - x> + G(w) + 0.5 ||w - x||^2_{Gamma^{-1}}`` (may be ``inf``)."""
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    x = as_flat(x, p.structure)
    w = as_flat(w, p.structure)
    Gw = p.nonsmooth.value(w)
    if not np.isfinite(Gw):
        return np.inf
    d = w - x
    gamma_flat = p.structure.expand(step.gammas)
    return p._F(x) + float(p._grad(x) @ d) + Gw + 0.5 * float(d @ (d / gamma_flat))


def prox_G(p, u, step):
    """Prox of the problem's ``G`` in the metric ``Gamma^{-1}``."""
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    return BlockVector(p.structure, p.nonsmooth.prox(as_flat(u, p.structure), step.gammas), copy=False)


def moreau_envelope_G(G, u, step, structure):
    """``min_w G(w) + 0.5 ||w - u||^2_{Gamma^{-1}}`` and its minimizer."""
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    u = as_flat(u, structure)
    w = G.prox(u, step.gammas)
    d = w - u
    return G.value(w) + 0.5 * float(d @ (d / structure.expand(step.gammas))), w


def fbe_moreau_form(p, x, step):
    """``F(x) - 0.5 ||grad F(x)||^2_Gamma + G^{Gamma^{-1}}(x - Gamma grad F(x))``.

    Algebraically identical to the envelope; kept as an independent route.
    """
    if not isinstance(step, Stepsize):
        step = Stepsize(step)
    x = as_flat(x, p.structure)
    gamma_flat = p.structure.expand(step.gammas)
    g = p._grad(x)
    env, _ = moreau_envelope_G(p.nonsmooth, x - gamma_flat * g, step, p.structure)
    return p._F(x) - 0.5 * float(g @ (gamma_flat * g)) + env
