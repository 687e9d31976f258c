"""Block-structured vectors, smooth/nonsmooth oracles and the problem container.

Problems have the form

    Phi(x) = F(x) + G(x),    F(x) = (1/N) sum_i f_i(x_i)

where ``x = (x_1, ..., x_N)`` is split into ``N`` blocks, each ``f_i`` is
smooth with a known gradient Lipschitz constant and ``G`` is an arbitrary
(possibly nonconvex, nonseparable) proximable function.

Internally all vectors are flat float64 arrays; :class:`BlockVector` is a
thin view-providing wrapper used at the public surface.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, NumericError, StructureError

#: stepsizes must satisfy gamma_i * L_i <= N - STEP_MARGIN
STEP_MARGIN = 1e-12
#: default fraction of the largest admissible stepsize
DEFAULT_ALPHA = 0.95


@dataclass(frozen=True)
class BlockStructure:
    """Partition of a vector of length ``sum(dims)`` into ``N`` blocks."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise StructureError("a block structure needs at least one block")
        if any(d <= 0 for d in dims):
            raise StructureError(f"block dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        offsets = np.concatenate([[0], np.cumsum(dims)])
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(
            self,
            "_slices",
            tuple(slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(dims))),
        )
        # per-coordinate block id, used to expand per-block weights
        object.__setattr__(self, "_owner", np.repeat(np.arange(len(dims)), dims))

    @classmethod
    def uniform(cls, N, n):
        return cls((n,) * N)

    @property
    def N(self):
        return len(self.dims)

    @property
    def size(self):
        return int(self._offsets[-1])

    @property
    def is_uniform(self):
        return len(set(self.dims)) == 1

    def slice(self, i):
        return self._slices[i]

    @property
    def slices(self):
        return self._slices

    def expand(self, per_block):
        """Repeat one scalar per block over that block's coordinates."""
        per_block = np.asarray(per_block, dtype=float)
        if per_block.shape != (self.N,):
            raise StructureError(f"expected {self.N} per-block values, got shape {per_block.shape}")
        return per_block[self._owner]

    def block_sqnorms(self, flat):
        """Squared Euclidean norm of each block of ``flat``."""
        return np.bincount(self._owner, weights=flat * flat, minlength=self.N)

    def check(self, flat):
        flat = np.asarray(flat)
        if flat.ndim != 1 or flat.shape[0] != self.size:
            raise StructureError(
                f"vector of shape {flat.shape} does not conform to block dims {self.dims}"
            )
        return flat


class BlockVector:
    """A flat float64 array together with its block partition.

    ``v.block(i)`` returns a writable view of block ``i``.
    """

    __slots__ = ("structure", "data")

    def __init__(self, structure, data, copy=True):
        data = np.array(data, dtype=float, copy=copy).reshape(-1)
        structure.check(data)
        if not np.all(np.isfinite(data)):
            raise NumericError("block vector entries must be finite")
        self.structure = structure
        self.data = data

    @classmethod
    def from_blocks(cls, blocks):
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)).reshape(-1) for b in blocks]
        structure = BlockStructure(tuple(b.size for b in blocks))
        return cls(structure, np.concatenate(blocks), copy=False)

    @classmethod
    def zeros(cls, structure):
        return cls(structure, np.zeros(structure.size), copy=False)

    def block(self, i):
        return self.data[self.structure.slice(i)]

    def blocks(self):
        return [self.data[s] for s in self.structure.slices]

    def copy(self):
        return BlockVector(self.structure, self.data, copy=True)

    def __len__(self):
        return self.structure.N

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def _wrap(self, data):
        return BlockVector(self.structure, data, copy=False)

    def __add__(self, other):
        return self._wrap(self.data + as_flat(other, self.structure))

    def __sub__(self, other):
        return self._wrap(self.data - as_flat(other, self.structure))

    def __mul__(self, scalar):
        return self._wrap(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.data)

    def __eq__(self, other):
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self.structure == other.structure and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"BlockVector(dims={self.structure.dims}, data={self.data!r})"


def as_flat(x, structure=None):
    """Return the flat float array behind ``x`` (a BlockVector or array-like)."""
    if isinstance(x, BlockVector):
        if structure is not None and x.structure != structure:
            raise StructureError(
                f"block dims {x.structure.dims} do not match expected {structure.dims}"
            )
        return x.data
    flat = np.asarray(x, dtype=float).reshape(-1)
    if structure is not None:
        structure.check(flat)
    return flat


@dataclass(frozen=True)
class SmoothBlockOracle:
    """One smooth summand ``f_i`` acting on a block of dimension ``dim``.

    ``lipschitz`` is a modulus for the gradient; ``strong_convexity`` is 0
    unless the caller asserts a positive modulus.
    """

    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    strong_convexity: float = 0.0

    def __post_init__(self):
        if self.dim <= 0:
            raise ContractError("block dimension must be positive")
        if not self.lipschitz >= 0 or not np.isfinite(self.lipschitz):
            raise ContractError(f"invalid Lipschitz constant {self.lipschitz}")
        if self.strong_convexity < 0:
            raise ContractError("strong convexity modulus must be nonnegative")
        if self.strong_convexity > self.lipschitz * (1 + 1e-12):
            raise ContractError(
                f"strong convexity {self.strong_convexity} exceeds Lipschitz constant {self.lipschitz}"
            )


class QuadraticBlock(SmoothBlockOracle):
    """``f(x) = 0.5 x'Hx + q'x`` with ``L = lambda_max(H)`` and ``mu = lambda_min(H)``."""

    def __init__(self, H, q=None):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise ContractError(f"H must be square, got shape {H.shape}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ContractError("H must be symmetric")
        H = 0.5 * (H + H.T)
        q = np.zeros(n) if q is None else np.asarray(q, dtype=float).reshape(n)
        eig = np.linalg.eigvalsh(H)
        if eig[0] < -1e-10:
            raise ContractError(f"H must be positive semidefinite (lambda_min={eig[0]:.3e})")
        L, mu = max(float(eig[-1]), 0.0), max(float(eig[0]), 0.0)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "q", q)
        super().__init__(
            dim=n,
            eval=lambda x: float(x @ (0.5 * (H @ x) + q)),
            grad=lambda x: H @ x + q,
            lipschitz=L,
            strong_convexity=mu,
        )


def quadratic_block(H, q=None):
    return QuadraticBlock(H, q)


def sine_block(a, b, q=None, dim=None):
    """Nonconvex block ``f(x) = 0.5 a ||x||^2 + b sum_j sin(x_j) + q'x``.

    The gradient is ``(a + |b|)``-Lipschitz; ``f`` is strongly convex with
    modulus ``a - |b|`` when that is positive.
    """
    if q is None:
        q = np.zeros(1 if dim is None else dim)
    q = np.asarray(q, dtype=float).reshape(-1)
    a, b = float(a), float(b)
    if a < 0:
        raise ContractError("curvature a must be nonnegative")
    return SmoothBlockOracle(
        dim=q.size,
        eval=lambda x: 0.5 * a * (x @ x) + b * np.sum(np.sin(x)) + q @ x,
        grad=lambda x: a * x + b * np.cos(x) + q,
        lipschitz=a + abs(b),
        strong_convexity=max(a - abs(b), 0.0),
    )


def zero_block(dim):
    return SmoothBlockOracle(dim, lambda x: 0.0, lambda x: np.zeros_like(x), 0.0)


class NonsmoothOracle:
    """Interface for the nonsmooth term ``G``.

    Subclasses implement ``value(x)`` (may return ``inf``) and
    ``prox(u, gammas)`` returning an element of the proximal map of ``G`` in
    the metric ``Gamma^{-1}``, where ``Gamma = blockdiag(gamma_i I)``.  Both
    take flat arrays; ``gammas`` holds one stepsize per block.
    """

    is_convex = True

    def value(self, x):
        raise NotImplementedError

    def prox(self, u, gammas):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(as_flat(x))

    def check_structure(self, structure):
        """Raise StructureError if this G cannot act on ``structure``."""


class ZeroG(NonsmoothOracle):
    is_convex = True

    def value(self, x):
        return 0.0

    def prox(self, u, gammas):
        return np.array(u, dtype=float, copy=True)


class FunctionalG(NonsmoothOracle):
    """G given by user callables ``value(x)`` and ``prox(u, gammas)``."""

    def __init__(self, value, prox, is_convex):
        self._value = value
        self._prox = prox
        self.is_convex = bool(is_convex)

    def value(self, x):
        return float(self._value(x))

    def prox(self, u, gammas):
        return np.asarray(self._prox(u, gammas), dtype=float)


@dataclass(frozen=True)
class Stepsize:
    """Per-block stepsizes ``gamma_i``; ``Gamma = blockdiag(gamma_i I_{n_i})``."""

    gammas: np.ndarray = field(repr=True)

    def __post_init__(self):
        g = np.array(self.gammas, dtype=float).reshape(-1)
        if g.size == 0 or not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ContractError(f"stepsizes must be positive and finite, got {g}")
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)

    @classmethod
    def default(cls, problem, alpha=DEFAULT_ALPHA):
        """``gamma_i = alpha N / L_i`` (blocks with ``L_i = 0`` get ``alpha N``)."""
        if not 0 < alpha < 1:
            raise ContractError("alpha must lie in (0, 1)")
        L = problem.lipschitz
        N = problem.N
        return cls(np.where(L > 0, alpha * N / np.where(L > 0, L, 1.0), alpha * N))

    @property
    def N(self):
        return self.gammas.size

    def validate(self, problem):
        """Check ``0 < gamma_i < N / L_i`` (with a 1e-12 margin)."""
        if self.N != problem.N:
            raise ContractError(f"{self.N} stepsizes given for {problem.N} blocks")
        bad = self.gammas * problem.lipschitz > problem.N - STEP_MARGIN
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ContractError(
                f"stepsize gamma_{i}={self.gammas[i]:.6g} violates gamma_i < N/L_i "
                f"= {problem.N / problem.lipschitz[i]:.6g}"
            )
        return self

    def xi(self, problem):
        """Per-block slack ``(N - gamma_i L_i) / N``."""
        return (problem.N - self.gammas * problem.lipschitz) / problem.N

    def inv_weights(self):
        return 1.0 / self.gammas


class Problem:
    """``Phi(x) = (1/N) sum_i f_i(x_i) + G(x)``."""

    def __init__(self, blocks: Sequence[SmoothBlockOracle], nonsmooth: Optional[NonsmoothOracle] = None):
        blocks = tuple(blocks)
        if not blocks:
            raise StructureError("problem needs at least one block")
        self.blocks = blocks
        self.structure = BlockStructure(tuple(b.dim for b in blocks))
        self.nonsmooth = ZeroG() if nonsmooth is None else nonsmooth
        self.nonsmooth.check_structure(self.structure)
        self.lipschitz = np.array([b.lipschitz for b in blocks], dtype=float)
        self.strong_convexity = np.array([b.strong_convexity for b in blocks], dtype=float)
        self.lipschitz.setflags(write=False)
        self.strong_convexity.setflags(write=False)

    @property
    def N(self):
        return self.structure.N

    @property
    def lambda_F(self):
        """Per-block weights of the metric ``Lambda_F = (1/N) blockdiag(L_i I)``."""
        return self.lipschitz / self.N

    @property
    def mu_F(self):
        """Per-block weights of ``mu_F = (1/N) blockdiag(mu_i I)``."""
        return self.strong_convexity / self.N

    # flat-array kernels used by the solvers

    def _F(self, x):
        total = 0.0
        for f, s in zip(self.blocks, self.structure.slices):
            total += f.eval(x[s])
        return total / self.N

    def _grad(self, x):
        out = np.empty_like(x)
        N = self.N
        for i, (f, s) in enumerate(zip(self.blocks, self.structure.slices)):
            out[s] = f.grad(x[s])
        out /= N
        if not np.all(np.isfinite(out)):
            i = int(self.structure._owner[np.flatnonzero(~np.isfinite(out))[0]])
            raise NumericError(f"non-finite gradient in block {i}", block=i)
        return out

    def F(self, x):
        return self._F(as_flat(x, self.structure))

    def grad_F(self, x):
        return BlockVector(self.structure, self._grad(as_flat(x, self.structure)), copy=False)

    def G(self, x):
        return self.nonsmooth.value(as_flat(x, self.structure))

    def phi(self, x):
        flat = as_flat(x, self.structure)
        g = self.nonsmooth.value(flat)
        if not np.isfinite(g):
            return np.inf
        return self._F(flat) + g

    def vector(self, data):
        return BlockVector(self.structure, data)


def eval_F(p, x):
    """``(1/N) sum_i f_i(x_i)``."""
    return p.F(x)


def grad_F(p, x):
    """Block ``i`` of the result is ``(1/N) grad f_i(x_i)``."""
    return p.grad_F(x)


def norm_in_metric(v, weights, structure=None):
    """``sqrt(sum_i w_i ||v_i||^2)`` for per-block weights ``w_i >= 0``."""
    if structure is None:
        if not isinstance(v, BlockVector):
            raise ContractError("a block structure is required for plain arrays")
        structure = v.structure
    flat = as_flat(v, structure)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (structure.N,):
        raise StructureError(f"expected {structure.N} weights, got {w.size}")
    if np.any(w < 0):
        raise ContractError("metric weights must be nonnegative")
    return float(np.sqrt(structure.block_sqnorms(flat) @ w))


def sqnorm_in_metric(flat, weights, structure):
    """Squared weighted norm on flat arrays; weights may be negative (no check)."""
    return float(structure.block_sqnorms(flat) @ weights)
