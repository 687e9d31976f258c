"""Nonseparable nonsmooth terms built from a small atom ``g``.

* :class:`ConsensusG` -- ``G(x) = (1/N) sum_i g(x_i) + indicator{x_1 = ... = x_N}``,
  which turns ``min (1/N) sum_i f_i(x) + g(x)`` into the block form.
* :class:`SharingG` -- ``G(x) = g(x_1 + ... + x_N)``.
* :class:`GeneralizedSharingG` -- indicator of ``sum_i A_i x_i = 0``.
* :class:`SeparableG` -- ``G(x) = sum_i g_i(x_i)`` (one atom per block).

All proxes are taken in the metric ``Gamma^{-1}`` with
``Gamma = blockdiag(gamma_i I)``.
"""

from collections import namedtuple

import numpy as np
import scipy.linalg

from .blocks import BlockStructure, BlockVector, NonsmoothOracle, Stepsize, as_flat
from .errors import ConfigError, StructureError
from .prox import ProxAtom, atom_from_spec

ConsensusProx = namedtuple("ConsensusProx", "v gamma_hat u_hat")
SharingProx = namedtuple("SharingProx", "v gamma_tilde u_tilde w")


def _gammas(step):
    return step.gammas if isinstance(step, Stepsize) else np.asarray(step, dtype=float).reshape(-1)


class _UniformBlocks(NonsmoothOracle):
    """Common plumbing for G acting on N blocks of equal dimension n."""

    def __init__(self, g, n):
        self.g = atom_from_spec(g)
        self.n = int(n)
        self.is_convex = self.g.is_convex

    def check_structure(self, structure):
        if not structure.is_uniform or structure.dims[0] != self.n:
            raise StructureError(
                f"{type(self).__name__} needs equal block dimensions {self.n}, got {structure.dims}"
            )

    def _rows(self, flat):
        if flat.size % self.n:
            raise StructureError(f"vector length {flat.size} is not a multiple of n={self.n}")
        return flat.reshape(-1, self.n)


class ConsensusG(_UniformBlocks):
    """``(1/N) sum_i g(x_i)`` restricted to the consensus set.

    A point belongs to the consensus set only if all blocks are bitwise
    equal; the prox returns such points exactly.
    """

    def value(self, x):
        rows = self._rows(np.asarray(x, dtype=float))
        if not np.all(rows == rows[0]):
            return np.inf
        return float(self.g(rows[0]))

    def reduce(self, u, gammas):
        """Return ``(gamma_hat, u_hat)``: harmonic stepsize and weighted mean."""
        rows = self._rows(np.asarray(u, dtype=float))
        inv = 1.0 / gammas
        gamma_hat = 1.0 / inv.sum()
        return gamma_hat, gamma_hat * (inv @ rows)

    def prox(self, u, gammas):
        gamma_hat, u_hat = self.reduce(u, gammas)
        v = self.g.prox(u_hat, gamma_hat)
        return np.tile(v, gammas.size)


class SharingG(_UniformBlocks):
    """``g(sum_i x_i)``, i.e. ``g o A`` with ``A = [I ... I]``.

    The prox aims at a sum ``prox_{gamma_tilde g}(u_tilde)`` that may sit
    exactly on a breakpoint of ``g`` (a zero of ``l0``, a face of a box,
    the point of a point indicator), but ``sum_i v_i`` reproduces it only
    up to rounding.  ``value`` therefore snaps coordinates of the sum lying
    within ``feas_tol (1 + ||sum_i x_i||)`` of a breakpoint coordinate onto
    it before evaluating ``g``.
    """

    def __init__(self, g, n, feas_tol=1e-9):
        super().__init__(g, n)
        self.feas_tol = feas_tol
        self._breaks = self.g.breakpoints(self.n)

    def value(self, x):
        s = self._rows(np.asarray(x, dtype=float)).sum(axis=0)
        if self._breaks.size:
            tol = self.feas_tol * (1.0 + np.linalg.norm(s))
            for b in self._breaks:
                s = np.where(np.abs(s - b) <= tol, b, s)
        return float(self.g(s))

    def shift(self, u, gammas):
        """Return ``(gamma_tilde, u_tilde, w)`` with ``prox(u)_i = u_i + gamma_i w``."""
        rows = self._rows(np.asarray(u, dtype=float))
        gamma_tilde = float(gammas.sum())
        u_tilde = rows.sum(axis=0)
        w = (self.g.prox(u_tilde, gamma_tilde) - u_tilde) / gamma_tilde
        return gamma_tilde, u_tilde, w

    def prox(self, u, gammas):
        _, _, w = self.shift(u, gammas)
        rows = self._rows(np.asarray(u, dtype=float))
        return (rows + gammas[:, None] * w).reshape(-1)


class GeneralizedSharingG(NonsmoothOracle):
    """Indicator of ``{x : sum_i A_i x_i = 0}`` for a full-row-rank ``A = [A_1 ... A_N]``.

    The ``m x m`` matrix ``A Gamma A'`` is Cholesky-factored once per
    stepsize vector and cached.
    """

    is_convex = True

    def __init__(self, A_blocks, feas_tol=1e-9):
        mats = [np.atleast_2d(np.asarray(A, dtype=float)) for A in A_blocks]
        m = mats[0].shape[0]
        if any(A.shape[0] != m for A in mats):
            raise ConfigError("all A_i must have the same number of rows")
        self.A_blocks = mats
        self.A = np.hstack(mats)
        self.structure = BlockStructure(tuple(A.shape[1] for A in mats))
        smin = np.linalg.svd(self.A, compute_uv=False)
        if smin.size < m or smin[-1] <= 1e-10:
            raise ConfigError("A = [A_1 ... A_N] must have full row rank")
        self.feas_tol = feas_tol
        self._factors = {}

    def check_structure(self, structure):
        if structure.dims != self.structure.dims:
            raise StructureError(f"A_i column counts {self.structure.dims} do not match {structure.dims}")

    def factor(self, gammas):
        key = tuple(np.asarray(gammas, dtype=float))
        fac = self._factors.get(key)
        if fac is None:
            Aw = self.A * self.structure.expand(gammas)
            try:
                fac = scipy.linalg.cho_factor(Aw @ self.A.T)
            except np.linalg.LinAlgError:
                raise ConfigError("A Gamma A' is singular") from None
            self._factors[key] = fac
        return fac

    def value(self, x):
        x = np.asarray(x, dtype=float)
        r = self.A @ x
        return 0.0 if np.linalg.norm(r) <= self.feas_tol * (1.0 + np.linalg.norm(x)) else np.inf

    def prox(self, u, gammas):
        u = np.asarray(u, dtype=float)
        y = scipy.linalg.cho_solve(self.factor(gammas), self.A @ u)
        return u - self.structure.expand(gammas) * (self.A.T @ y)


class SeparableG(NonsmoothOracle):
    """``sum_i g_i(x_i)`` with one atom per block (or one atom shared by all)."""

    def __init__(self, atoms, structure):
        if isinstance(atoms, (ProxAtom, dict)):
            atoms = [atoms] * structure.N
        self.atoms = [atom_from_spec(a) for a in atoms]
        if len(self.atoms) != structure.N:
            raise StructureError("need one atom per block")
        self.structure = structure
        self.is_convex = all(a.is_convex for a in self.atoms)

    def check_structure(self, structure):
        if structure != self.structure:
            raise StructureError("SeparableG built for a different block structure")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(sum(a(x[s]) for a, s in zip(self.atoms, self.structure.slices)))

    def prox(self, u, gammas):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for a, s, g in zip(self.atoms, self.structure.slices, gammas):
            out[s] = a.prox(u[s], g)
        return out


def consensus_prox(G, u, step, full_output=False):
    """Prox of a :class:`ConsensusG`; every block of the result is identical."""
    gammas = _gammas(step)
    structure = u.structure if isinstance(u, BlockVector) else BlockStructure.uniform(gammas.size, G.n)
    flat = as_flat(u, structure)
    G.check_structure(structure)
    gamma_hat, u_hat = G.reduce(flat, gammas)
    v_hat = G.g.prox(u_hat, gamma_hat)
    v = BlockVector(structure, np.tile(v_hat, gammas.size), copy=False)
    return ConsensusProx(v, gamma_hat, u_hat) if full_output else v


def sharing_prox(G, u, step, full_output=False):
    """Prox of a :class:`SharingG`: ``v_i = u_i + gamma_i w``."""
    gammas = _gammas(step)
    structure = u.structure if isinstance(u, BlockVector) else BlockStructure.uniform(gammas.size, G.n)
    flat = as_flat(u, structure)
    G.check_structure(structure)
    gamma_tilde, u_tilde, w = G.shift(flat, gammas)
    v = (flat.reshape(-1, G.n) + gammas[:, None] * w).reshape(-1)
    v = BlockVector(structure, v, copy=False)
    return SharingProx(v, gamma_tilde, u_tilde, w) if full_output else v


def generalized_sharing_prox(G, u, step):
    """``v_i = u_i - gamma_i A_i' (A Gamma A')^{-1} sum_j A_j u_j``."""
    gammas = _gammas(step)
    flat = as_flat(u, G.structure)
    return BlockVector(G.structure, G.prox(flat, gammas), copy=False)


def weighted_mean_gap(w, u_rows, gammas):
    """Both sides of ``sum_i ||w - u_i||^2/gamma_i = sum_i ||u_hat - u_i||^2/gamma_i + ||w - u_hat||^2/gamma_hat``."""
    u_rows = np.asarray(u_rows, dtype=float)
    inv = 1.0 / np.asarray(gammas, dtype=float)
    gamma_hat = 1.0 / inv.sum()
    u_hat = gamma_hat * (inv @ u_rows)
    lhs = float(inv @ np.sum((w - u_rows) ** 2, axis=1))
    rhs = float(inv @ np.sum((u_hat - u_rows) ** 2, axis=1) + np.sum((w - u_hat) ** 2) / gamma_hat)
    return lhs, rhs
