"""Index-set selection rules for the block-coordinate solvers.

Indices are 0-based.  Four kinds are supported:

``cyclic``
    ``I^{k+1} = {k mod N}``.
``shuffled``
    ``I^{k+1} = {pi_{k // N}(k mod N)}``; a fresh uniformly random
    permutation is drawn at the start of every epoch of ``N`` iterations,
    unless explicit ``permutations`` are given (then they are cycled).
``randomized``
    Without ``batch``: each ``i`` is included independently with
    probability ``p_i``; an empty draw is discarded and redrawn.  Redrawing
    only raises inclusion probabilities, so every ``i`` is still selected
    with probability at least ``p_i``.  With ``batch=b``: ``b`` distinct
    indices are drawn without replacement with weights proportional to
    ``p``.
``essentially_cyclic``
    A fixed schedule of index sets repeated periodically; every window of
    ``T`` consecutive iterations must cover all indices.

Random streams come from numpy's PCG64 bit generator seeded through a
``SeedSequence``.  Sampler streams use spawn key ``(1,)`` of the run seed and
problem generators use ``(0,)``, so the two never share state.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractError

SAMPLER_STREAM = 1
PROBLEM_STREAM = 0


def make_rng(seed, stream):
    """PCG64 generator for ``seed`` on an independent sub-stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


@dataclass(frozen=True)
class SamplerSpec:
    kind: str
    seed: int = 0
    probabilities: Optional[tuple] = None
    batch: Optional[int] = None
    schedule: Optional[tuple] = None
    period: Optional[int] = None
    permutations: Optional[tuple] = None

    KINDS = ("cyclic", "shuffled", "randomized", "essentially_cyclic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown sampler kind {self.kind!r}")
        if self.kind == "randomized":
            if self.probabilities is None:
                raise ConfigError("randomized sampling needs probabilities")
            p = tuple(float(v) for v in self.probabilities)
            if any(not 0 < v <= 1 for v in p):
                raise ConfigError(f"probabilities must lie in (0, 1], got {p}")
            object.__setattr__(self, "probabilities", p)
            if self.batch is not None and not 1 <= self.batch <= len(p):
                raise ConfigError("batch size must be between 1 and N")
        if self.kind == "essentially_cyclic":
            if not self.schedule:
                raise ConfigError("essentially cyclic sampling needs a nonempty schedule")
            sched = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.schedule)
            object.__setattr__(self, "schedule", sched)
            if self.period is None:
                object.__setattr__(self, "period", len(sched))
        if self.permutations is not None:
            object.__setattr__(self, "permutations", tuple(tuple(int(i) for i in p) for p in self.permutations))

    @classmethod
    def cyclic(cls):
        return cls("cyclic")

    @classmethod
    def shuffled(cls, seed=0, permutations=None):
        return cls("shuffled", seed=seed, permutations=permutations)

    @classmethod
    def randomized(cls, probabilities, batch=None, seed=0):
        return cls("randomized", seed=seed, probabilities=tuple(probabilities), batch=batch)

    @classmethod
    def uniform(cls, N, seed=0):
        """One index per iteration, uniformly at random."""
        return cls.randomized([1.0 / N] * N, batch=1, seed=seed)

    @classmethod
    def essentially_cyclic(cls, schedule, period=None):
        return cls("essentially_cyclic", schedule=tuple(schedule), period=period)

    @classmethod
    def full(cls, N):
        """Every block at every iteration (plain proximal gradient)."""
        return cls("essentially_cyclic", schedule=(tuple(range(N)),), period=1)

    def inclusion_floor(self, N):
        """Lower bound on the probability that each index is selected."""
        if self.kind == "randomized":
            p = np.array(self.probabilities)
            # with a batch, the first weighted draw alone already picks i w.p. p_i / sum(p)
            return p if self.batch is None else p / p.sum()
        raise ContractError("inclusion probabilities are defined for randomized sampling only")

    def to_dict(self):
        d = {"kind": self.kind, "seed": self.seed}
        for key in ("probabilities", "batch", "schedule", "period", "permutations"):
            v = getattr(self, key)
            if v is not None:
                d[key] = [list(s) for s in v] if key in ("schedule", "permutations") else (list(v) if isinstance(v, tuple) else v)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"seed", "probabilities", "batch", "schedule", "period", "permutations"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown sampler keys {sorted(unknown)}")
        for key in ("probabilities", "schedule", "permutations"):
            if key in d and d[key] is not None:
                d[key] = tuple(tuple(s) if isinstance(s, (list, tuple)) else s for s in d[key])
        return cls(kind, **d)


def validate_essentially_cyclic(schedule, T, N=None):
    """True iff every length-``T`` window of the periodic schedule covers ``range(N)``.

    ``N`` defaults to one plus the largest index in the schedule.
    """
    sets = [set(int(i) for i in s) for s in schedule]
    if not sets:
        raise ContractError("schedule must be nonempty")
    if T < 1:
        return False
    if N is None:
        N = max((max(s) for s in sets if s), default=-1) + 1
    full = set(range(N))
    P = len(sets)
    for start in range(P):
        covered = set()
        for t in range(T):
            covered |= sets[(start + t) % P]
        if not full <= covered:
            return False
    return True


class Sampler:
    """Mutable sampler state; ``next_indices(k)`` must be called with k = 0, 1, 2, ..."""

    def __init__(self, spec, N):
        self.spec = spec
        self.N = int(N)
        self.k = 0
        self.rng = make_rng(spec.seed, SAMPLER_STREAM)
        self._perm = None
        if spec.kind == "randomized":
            if len(spec.probabilities) != N:
                raise ConfigError(f"{len(spec.probabilities)} probabilities given for N={N}")
            self._p = np.array(spec.probabilities)
            self._w = self._p / self._p.sum()
            self._cum = np.cumsum(self._w)
        if spec.kind == "essentially_cyclic":
            sched = spec.schedule
            for s in sched:
                if not s or min(s) < 0 or max(s) >= N:
                    raise ConfigError(f"schedule entry {s} is not a nonempty subset of range({N})")
            if not validate_essentially_cyclic(sched, spec.period, N):
                raise ConfigError(f"schedule does not cover all {N} indices within every {spec.period} steps")
            self._schedule = [np.array(s, dtype=int) for s in sched]
        if spec.permutations is not None:
            for p in spec.permutations:
                if sorted(p) != list(range(N)):
                    raise ConfigError(f"{p} is not a permutation of range({N})")

    def next_indices(self, k):
        if k != self.k:
            raise ContractError(f"sampler expected iteration {self.k}, got {k}")
        self.k += 1
        kind = self.spec.kind
        N = self.N
        if kind == "cyclic":
            return np.array([k % N])
        if kind == "shuffled":
            epoch, pos = divmod(k, N)
            if pos == 0 or self._perm is None:
                if self.spec.permutations is not None:
                    perms = self.spec.permutations
                    self._perm = np.array(perms[epoch % len(perms)])
                else:
                    self._perm = self.rng.permutation(N)
            return np.array([self._perm[pos]])
        if kind == "randomized":
            if self.spec.batch is None:
                while True:
                    mask = self.rng.random(N) < self._p
                    if mask.any():
                        return np.flatnonzero(mask)
            if self.spec.batch == 1:
                # inverse-CDF draw; same law as the weighted choice below, but cheaper
                i = int(np.searchsorted(self._cum, self.rng.random() * self._cum[-1], side="right"))
                return np.array([min(i, N - 1)])
            idx = self.rng.choice(N, size=self.spec.batch, replace=False, p=self._w)
            return np.sort(idx)
        return self._schedule[k % len(self._schedule)]

    def stream(self, count):
        """The next ``count`` index sets."""
        return [self.next_indices(self.k) for _ in range(count)]


def make_sampler(spec, N):
    return Sampler(spec, N)


def next_indices(sampler, k):
    return sampler.next_indices(k)
