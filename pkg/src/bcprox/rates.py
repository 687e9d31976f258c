"""Closed-form linear-rate constants for strongly convex instances.

Notation: ``xi_i = (N - gamma_i L_i) / N``, ``kappa_i = L_i / mu_i``,
``delta = min_i gamma_i mu_i / N`` and ``Delta = max_i gamma_i L_i / N``.
Every constant ``c`` lies in ``(0, 1)`` and certifies a contraction
``gap_{next} <= (1 - c) gap`` of the envelope gap ``fbe - min Phi``:

* :func:`rate_randomized` -- per iteration, in expectation, for sampling
  rules that pick block ``i`` with probability at least ``p_i``;
* :func:`rate_randomized_optimal` -- stepsizes and probabilities that
  maximize that constant;
* :func:`rate_essentially_cyclic` -- per window of ``T`` iterations;
* :func:`rate_shuffled_cyclic` -- per epoch of ``N`` iterations for
  cyclic and shuffled cyclic sampling;
* :func:`rate_accelerated` -- per iteration of the accelerated method,
  up to a constant factor.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError

OPTIMAL_STEP_SHRINK = 1.0 - 1e-9


def _vec(v):
    return np.array(v, dtype=float).reshape(-1)


@dataclass
class RateInputs:
    """Per-block data for the rate formulas.

    ``gammas`` and ``p`` may be omitted for :func:`rate_randomized_optimal`;
    ``T`` is only used by :func:`rate_essentially_cyclic`.
    """

    L: np.ndarray
    mu: np.ndarray
    gammas: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    T: Optional[int] = None
    N: int = field(init=False)

    def __post_init__(self):
        self.L, self.mu = _vec(self.L), _vec(self.mu)
        self.N = self.L.size
        if self.mu.size != self.N:
            raise ContractError("L and mu must have the same length")
        if np.any(self.mu <= 0):
            raise ContractError("rate constants need mu_i > 0 for every block")
        if np.any(self.mu > self.L * (1 + 1e-12)):
            raise ContractError("mu_i must not exceed L_i")
        if self.gammas is not None:
            self.gammas = _vec(self.gammas)
            if self.gammas.size != self.N:
                raise ContractError("one stepsize per block is needed")
            if np.any(self.gammas <= 0) or np.any(self.gammas * self.L >= self.N):
                raise ContractError("stepsizes must satisfy 0 < gamma_i < N / L_i")
        if self.p is not None:
            self.p = _vec(self.p)
            if self.p.size != self.N:
                raise ContractError("one probability per block is needed")
            if np.any(self.p <= 0) or np.any(self.p > 1):
                raise ContractError("probabilities must lie in (0, 1]")
        if self.T is not None and self.T < 1:
            raise ContractError("period T must be at least 1")

    @classmethod
    def from_problem(cls, problem, step=None, p=None, T=None):
        gammas = None if step is None else getattr(step, "gammas", step)
        return cls(problem.lipschitz, problem.strong_convexity, gammas, p, T)

    def _need_gammas(self):
        if self.gammas is None:
            raise ContractError("stepsizes are required")
        return self.gammas

    @property
    def xi(self):
        return (self.N - self._need_gammas() * self.L) / self.N

    @property
    def kappa(self):
        return self.L / self.mu

    @property
    def delta(self):
        return float(np.min(self._need_gammas() * self.mu) / self.N)

    @property
    def Delta(self):
        return float(np.max(self._need_gammas() * self.L) / self.N)

    @property
    def sigma(self):
        """Strong convexity modulus of the scaled envelope (equals ``delta``)."""
        return self.delta

    def to_dict(self):
        d = {"L": self.L.tolist(), "mu": self.mu.tolist()}
        if self.gammas is not None:
            d["gammas"] = self.gammas.tolist()
        if self.p is not None:
            d["p"] = self.p.tolist()
        if self.T is not None:
            d["T"] = int(self.T)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"L", "mu", "gammas", "p", "T"}
        if unknown:
            raise ContractError(f"unknown rate input keys {sorted(unknown)}")
        return cls(d["L"], d["mu"], d.get("gammas"), d.get("p"), d.get("T"))


def rate_randomized(inp):
    """``c = min_i (xi_i p_i / gamma_i) / max_i ((N - gamma_i mu_i) / (gamma_i^2 mu_i))``."""
    g = inp._need_gammas()
    if inp.p is None:
        raise ContractError("sampling probabilities are required")
    num = np.min(inp.xi * inp.p / g)
    den = np.max((inp.N - g * inp.mu) / (g**2 * inp.mu))
    return float(num / den)


def _kappa_terms(kappa):
    return (np.sqrt(kappa) + np.sqrt(np.maximum(kappa - 1.0, 0.0))) ** 2


def rate_randomized_optimal(inp):
    """Return ``(gammas, p, c)`` maximizing the randomized constant.

    ``gamma_i = (N / mu_i)(1 - sqrt(1 - 1/kappa_i))``,
    ``p_i`` proportional to ``(sqrt(kappa_i) + sqrt(kappa_i - 1))^2`` and
    ``c = 1 / sum_i (sqrt(kappa_i) + sqrt(kappa_i - 1))^2``.

    When ``kappa_i = 1`` the formula gives ``gamma_i = N / L_i``, the open
    end of the admissible interval, so such stepsizes are multiplied by
    ``1 - 1e-9``; ``c`` is reported for the unshrunk parameters.
    """
    kappa = inp.kappa
    if np.any(kappa < 1.0):
        raise ContractError("condition numbers must be at least 1")
    kappa = np.maximum(kappa, 1.0)
    N = inp.N
    gammas = N / inp.mu * (1.0 - np.sqrt(1.0 - 1.0 / kappa))
    gammas = np.where(gammas * inp.L >= N * OPTIMAL_STEP_SHRINK, gammas * OPTIMAL_STEP_SHRINK, gammas)
    terms = _kappa_terms(kappa)
    p = terms / terms.sum()
    c = 1.0 / terms.sum()
    return gammas, p, float(c)


def rate_essentially_cyclic(inp):
    """``c = delta (1 - Delta) / (N (1 + T (1 - delta))^2 (1 - delta))``, per window of ``T`` iterations."""
    if inp.T is None:
        raise ContractError("the period T is required")
    d, D, N, T = inp.delta, inp.Delta, inp.N, inp.T
    return float(d * (1.0 - D) / (N * (1.0 + T * (1.0 - d)) ** 2 * (1.0 - d)))


def rate_shuffled_cyclic(inp):
    """``c = delta (1 - Delta) / (N (2 - delta)^2 (1 - delta))``, per epoch of ``N`` iterations."""
    d, D, N = inp.delta, inp.Delta, inp.N
    return float(d * (1.0 - D) / (N * (2.0 - d) ** 2 * (1.0 - d)))


def rate_accelerated(N, sigma):
    """``c = 1 / (1/2 + sqrt(1/4 + N^2 / sigma))`` for the accelerated method (``sigma > 0``)."""
    if sigma <= 0:
        raise ContractError("a linear rate needs sigma > 0")
    return float(1.0 / (0.5 + np.sqrt(0.25 + N**2 / sigma)))


def accelerated_sublinear_bound(N, dist_q_sq, k):
    """``2 N^2 ||x0 - x*||_Q^2 / (k + 1)^2`` (vectorized over ``k``)."""
    k = np.asarray(k, dtype=float)
    return 2.0 * N**2 * dist_q_sq / (k + 1.0) ** 2


def rates_report(inp):
    """Every constant computable from ``inp``, as a JSON-ready dict."""
    out = {"N": inp.N, "kappa": inp.kappa.tolist()}
    g, p, c = rate_randomized_optimal(inp)
    out["randomized_optimal"] = {"gammas": g.tolist(), "p": p.tolist(), "c": c}
    if inp.gammas is not None:
        out["xi"] = inp.xi.tolist()
        out["delta"] = inp.delta
        out["Delta"] = inp.Delta
        out["shuffled_cyclic"] = rate_shuffled_cyclic(inp)
        out["accelerated"] = rate_accelerated(inp.N, inp.sigma)
        if inp.p is not None:
            out["randomized"] = rate_randomized(inp)
        if inp.T is not None:
            out["essentially_cyclic"] = rate_essentially_cyclic(inp)
    return out
