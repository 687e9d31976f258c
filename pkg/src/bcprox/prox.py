"""Closed-form proximal maps of separable regularizers and a brute-force oracle.

Every atom ``psi`` exposes ``psi(w)`` (summing over the last axis, so a
stack of points of shape ``(M, d)`` evaluates row-wise) and
``psi.prox(u, t)`` returning a global minimizer of

    psi(w) + ||w - u||^2 / (2 t).

For nonconvex atoms the minimizer set may contain several points; the
element of smallest Euclidean norm is returned, ties broken towards the
componentwise smallest point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, NumericError


class ProxAtom:
    kind = None
    is_convex = True

    def __call__(self, w):
        raise NotImplementedError

    def prox(self, u, t):
        raise NotImplementedError

    def breakpoints(self, d):
        """Points where ``psi`` is nonsmooth or where its domain collapses.

        Used by :func:`brute_force_prox` as extra candidates.
        """
        return np.zeros((0, d))

    def to_spec(self):
        return {"kind": self.kind}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.to_spec().items() if k != "kind")
        return f"{type(self).__name__}({params})"


class Zero(ProxAtom):
    kind = "zero"

    def __call__(self, w):
        return np.zeros(np.shape(w)[:-1]) if np.ndim(w) > 1 else 0.0

    def prox(self, u, t):
        return np.array(u, dtype=float, copy=True)


class L1(ProxAtom):
    """``lam * ||w||_1``; the prox is soft thresholding."""

    kind = "l1"

    def __init__(self, lam):
        if lam < 0:
            raise ContractError("lam must be nonnegative")
        self.lam = float(lam)

    def __call__(self, w):
        return self.lam * np.sum(np.abs(w), axis=-1)

    def prox(self, u, t):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.maximum(np.abs(u) - t * self.lam, 0.0)

    def breakpoints(self, d):
        return np.zeros((1, d))

    def to_spec(self):
        return {"kind": self.kind, "lam": self.lam}


class L0(ProxAtom):
    """``lam * #{j : w_j != 0}``; the prox is hard thresholding at ``sqrt(2 t lam)``."""

    kind = "l0"
    is_convex = False

    def __init__(self, lam):
        if lam < 0:
            raise ContractError("lam must be nonnegative")
        self.lam = float(lam)

    def __call__(self, w):
        return self.lam * np.count_nonzero(w, axis=-1).astype(float)

    def prox(self, u, t):
        u = np.asarray(u, dtype=float)
        # strict: at |u| = sqrt(2 t lam) both 0 and u are minimizers, keep 0
        return np.where(u * u > 2.0 * t * self.lam, u, 0.0)

    def breakpoints(self, d):
        return np.zeros((1, d))

    def to_spec(self):
        return {"kind": self.kind, "lam": self.lam}


class Box(ProxAtom):
    """Indicator of ``{w : lo <= w <= hi}``."""

    kind = "box"

    def __init__(self, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ContractError("box requires lo <= hi")
        self.lo, self.hi = lo, hi

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        inside = np.all((w >= self.lo) & (w <= self.hi), axis=-1)
        return np.where(inside, 0.0, np.inf) if np.ndim(inside) else (0.0 if inside else np.inf)

    def prox(self, u, t):
        return np.clip(np.asarray(u, dtype=float), self.lo, self.hi)

    def breakpoints(self, d):
        lo = np.broadcast_to(self.lo, (d,))
        hi = np.broadcast_to(self.hi, (d,))
        pts = [p for p in (lo, hi) if np.all(np.isfinite(p))]
        return np.array(pts).reshape(-1, d)

    def to_spec(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class NonNeg(Box):
    """Indicator of the nonnegative orthant."""

    kind = "nonneg"

    def __init__(self):
        super().__init__(0.0, np.inf)

    def breakpoints(self, d):
        return np.zeros((1, d))

    def to_spec(self):
        return {"kind": self.kind}


class PointIndicator(ProxAtom):
    """Indicator of the single point ``c``."""

    kind = "point"

    def __init__(self, c=0.0):
        self.c = np.asarray(c, dtype=float)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        at = np.all(w == self.c, axis=-1)
        return np.where(at, 0.0, np.inf) if np.ndim(at) else (0.0 if at else np.inf)

    def prox(self, u, t):
        return np.broadcast_to(self.c, np.shape(u)).astype(float)

    def breakpoints(self, d):
        return np.broadcast_to(self.c, (d,)).reshape(1, d).astype(float)

    def to_spec(self):
        return {"kind": self.kind, "c": self.c.tolist()}


class Quadratic(ProxAtom):
    """``(a/2) ||w||^2`` with ``a >= 0``."""

    kind = "quadratic"

    def __init__(self, a):
        if a < 0:
            raise ContractError("quadratic atom requires a >= 0")
        self.a = float(a)

    def __call__(self, w):
        return 0.5 * self.a * np.sum(np.square(w), axis=-1)

    def prox(self, u, t):
        return np.asarray(u, dtype=float) / (1.0 + t * self.a)

    def to_spec(self):
        return {"kind": self.kind, "a": self.a}


_ATOMS = {
    "zero": lambda s: Zero(),
    "l1": lambda s: L1(s["lam"]),
    "l0": lambda s: L0(s["lam"]),
    "box": lambda s: Box(s["lo"], s["hi"]),
    "nonneg": lambda s: NonNeg(),
    "point": lambda s: PointIndicator(s.get("c", 0.0)),
    "quadratic": lambda s: Quadratic(s["a"]),
}


def atom_from_spec(spec):
    """Build an atom from a mapping such as ``{"kind": "l1", "lam": 0.1}``."""
    if isinstance(spec, ProxAtom):
        return spec
    try:
        return _ATOMS[spec["kind"]](spec)
    except KeyError as exc:
        raise ConfigError(f"invalid regularizer spec {spec!r}: missing {exc}") from None


def apply_atom(atom, u, t):
    """Global minimizer of ``atom(w) + ||w - u||^2 / (2 t)``."""
    if not t > 0:
        raise ContractError(f"stepsize must be positive, got {t}")
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NumericError("prox input is not finite")
    return atom.prox(u, t)


def moreau_envelope(atom, u, t):
    """Value of ``min_w atom(w) + ||w - u||^2 / (2 t)``."""
    u = np.asarray(u, dtype=float)
    p = atom.prox(u, t)
    return float(atom(p) + np.sum((p - u) ** 2) / (2.0 * t))


# -- brute-force oracle ------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Search grid for :func:`brute_force_prox`.

    In one dimension the grid has ``points`` nodes on ``[u - R, u + R]``
    with ``R = radius_factor * max(1, ||u||)``, followed by ``steps`` rounds
    of ternary bracketing around the best node.  In two or three dimensions
    a coarse grid (``coarse_points`` per axis) is refined by ``zoom_levels``
    successive grids of ``zoom_points`` per axis around the incumbent.
    """

    points: int = 4001
    steps: int = 60
    radius_factor: float = 5.0
    coarse_points: tuple = (201, 31)
    zoom_points: int = 11
    zoom_levels: int = 40


def _select(points, values):
    """Index of the minimum value; ties go to smallest norm, then lexicographic."""
    vmin = np.min(values)
    if not np.isfinite(vmin):
        return int(np.argmin(values))
    tied = np.flatnonzero(values == vmin)
    if tied.size == 1:
        return int(tied[0])
    cand = points[tied]
    keys = [cand[:, j] for j in range(cand.shape[1] - 1, -1, -1)]
    keys.append(np.sum(cand * cand, axis=1))
    return int(tied[np.lexsort(keys)[0]])


def grid_minimize(objective, center, radius, grid=GridSpec(), candidates=None, difference=None):
    """Minimize a row-vectorized ``objective`` over a box by grid search.

    ``objective`` maps an ``(M, d)`` array to ``M`` values (``inf`` allowed).
    In one dimension, ``difference(a, b)`` (if given) should return
    ``objective(a) - objective(b)`` for scalars without cancellation; the
    bracketing steps then resolve the minimizer well below the
    ``sqrt(eps)`` limit of comparing rounded objective values.
    Returns the best point found.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    if d > 3:
        raise ContractError("brute-force search supports at most 3 dimensions")
    extra = np.zeros((0, d)) if candidates is None else np.asarray(candidates, dtype=float).reshape(-1, d)

    if d == 1:
        nodes = np.linspace(center[0] - radius, center[0] + radius, grid.points)
        pts = np.concatenate([nodes[:, None], extra])
        vals = objective(pts)
        best = pts[_select(pts, vals)]
        h = 2.0 * radius / (grid.points - 1)
        a, b = best[0] - h, best[0] + h
        f = lambda s: objective(np.array([[s]]))[0]
        if difference is None:
            difference = lambda s1, s2: f(s1) - f(s2)
        for _ in range(grid.steps):
            m1, m2 = a + (b - a) / 3.0, b - (b - a) / 3.0
            with np.errstate(invalid="ignore"):  # inf - inf: both outside the domain
                left = not difference(m1, m2) > 0.0
            if left:
                b = m2
            else:
                a = m1
        pts = np.concatenate([pts, [[0.5 * (a + b)]]])
        vals = np.append(vals, f(0.5 * (a + b)))
        return pts[_select(pts, vals)]

    m = grid.coarse_points[d - 2]
    r = radius
    axes = [np.linspace(c - r, c + r, m) for c in center]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = np.concatenate([pts, extra])
    vals = objective(pts)
    k = _select(pts, vals)
    best, fbest = pts[k], vals[k]
    h = 2.0 * r / (m - 1)
    offsets = np.linspace(-1.0, 1.0, grid.zoom_points)
    unit = np.stack(np.meshgrid(*([offsets] * d), indexing="ij"), axis=-1).reshape(-1, d)
    for _ in range(grid.zoom_levels):
        r = 3.0 * h
        pts = np.concatenate([best + r * unit, best[None, :], extra])
        vals = objective(pts)
        k = _select(pts, vals)
        if vals[k] <= fbest:
            best, fbest = pts[k], vals[k]
        h = 2.0 * r / (grid.zoom_points - 1)
    return best


def brute_force_prox(psi, u, t, grid=GridSpec(), candidates=None):
    """Grid-search minimizer of ``psi(w) + ||w - u||^2 / (2 t)`` for ``dim(u) <= 3``.

    ``psi`` must accept an ``(M, d)`` stack and return ``M`` values.  If
    ``psi`` is a :class:`ProxAtom` its breakpoints are added as candidates.
    In two or three dimensions the search is repeated on every coordinate
    face through each candidate (some coordinates pinned to the candidate's
    values), since minimizers of sparsity-type terms sit on such faces and a
    grid never hits them exactly.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    d = u.size
    if d > 3:
        raise ContractError("brute-force prox supports at most 3 dimensions")
    if not t > 0:
        raise ContractError("stepsize must be positive")
    if candidates is None and isinstance(psi, ProxAtom):
        candidates = psi.breakpoints(d)
    cands = np.zeros((0, d)) if candidates is None else np.asarray(candidates, dtype=float).reshape(-1, d)
    radius = grid.radius_factor * max(1.0, float(np.linalg.norm(u)))

    def objective(W):
        return np.asarray(psi(W), dtype=float) + np.sum((W - u) ** 2, axis=1) / (2.0 * t)

    def difference(a, b):
        # objective(a) - objective(b) with the quadratic part in factored form
        dpsi = float(np.asarray(psi(np.array([[a]])), dtype=float)[0] - np.asarray(psi(np.array([[b]])), dtype=float)[0])
        return dpsi + (a - b) * (a + b - 2.0 * u[0]) / (2.0 * t)

    found = [grid_minimize(objective, u, radius, grid, cands, difference if d == 1 else None)]
    for b in cands:
        for mask in range(1, 2**d - 1):
            pinned = np.array([(mask >> j) & 1 for j in range(d)], dtype=bool)
            free = ~pinned

            def face_objective(V, b=b, free=free):
                W = np.tile(b, (V.shape[0], 1))
                W[:, free] = V
                return objective(W)

            v = grid_minimize(face_objective, u[free], radius, grid)
            w = b.copy()
            w[free] = v
            found.append(w)
    found = np.array(found)
    return found[_select(found, objective(found))]


def prox_objective(psi, w, u, t):
    w, u = np.asarray(w, dtype=float), np.asarray(u, dtype=float)
    return float(psi(w) + np.sum((w - u) ** 2) / (2.0 * t))
