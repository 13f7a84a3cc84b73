"""Discrete two-sided Wiener paths on a uniform grid.

A path value is never stored: every increment is recomputed on demand from
(seed, dim, grid index + offset) through the counter-based engine in
:mod:`rpsde.philox`.  This gives three properties the pullback construction
relies on:

* exact shift identities: ``shift(p, j).increment(k) == p.increment(k + j)``
  bit for bit, because shifting only adds to the word index;
* order-independent extension to negative times (no state to mutate);
* reproducible ensembles: replica ``i`` of ``ensemble(seed, n, ...)`` is the
  same path regardless of ``n`` or of how work is split across workers.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import AlignmentError, InvalidSpecError
from .philox import (
    MAX_ABS_INDEX,
    MAX_DIM,
    U64,
    WORD_OFFSET,
    derive_key,
    derive_seed,
    fill_increments,
    splitmix64,
)

__all__ = ["GridSpec", "NoisePath", "ensemble"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid; the period is ``steps_per_period * dt`` by construction."""

    dt: float
    steps_per_period: int

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise InvalidSpecError(f"dt must be positive and finite, got {self.dt}")
        if self.steps_per_period < 1:
            raise InvalidSpecError(
                f"steps_per_period must be >= 1, got {self.steps_per_period}"
            )

    @property
    def period(self) -> float:
        return self.steps_per_period * self.dt

    @classmethod
    def for_period(cls, period: float, dt_nominal: float) -> "GridSpec":
        """Grid whose period is exactly ``period`` with step closest to ``dt_nominal``."""
        if not (period > 0.0 and dt_nominal > 0.0):
            raise InvalidSpecError("period and dt_nominal must be positive")
        n = max(1, round(period / dt_nominal))
        return cls(dt=period / n, steps_per_period=n)

    def index_of(self, t: float) -> int:
        """Grid index of an aligned time; raises AlignmentError otherwise."""
        k = round(t / self.dt)
        tol = min(0.25 * self.dt, 1e-9 * max(1.0, abs(t)))
        if abs(k * self.dt - t) > tol:
            raise AlignmentError(
                f"time {t!r} is not grid-aligned (dt={self.dt!r}, nearest node {k * self.dt!r})"
            )
        if abs(k) > MAX_ABS_INDEX:
            raise AlignmentError(f"grid index {k} outside supported range")
        return int(k)

    def time_of(self, k: int) -> float:
        return k * self.dt

    def phase_index(self, k: int) -> int:
        return k % self.steps_per_period


@dataclass(frozen=True)
class NoisePath:
    """One realization of m-dimensional discrete white noise.

    ``offset`` implements the Wiener shift: this object represents the path
    ``theta_{offset * dt} omega`` of the base realization chosen by ``seed``.
    Immutable; safe to use from any number of workers concurrently.
    """

    seed: int
    dim: int
    grid: GridSpec
    offset: int = 0

    def __post_init__(self):
        if not (1 <= self.dim <= MAX_DIM):
            raise InvalidSpecError(f"dim must be in [1, {MAX_DIM}], got {self.dim}")
        key0, key1 = derive_key(self.seed, self.dim)
        object.__setattr__(self, "_key0", U64(key0))
        object.__setattr__(self, "_key1", U64(key1))

    # -- core access -------------------------------------------------------

    def _word_start(self, k: int) -> int:
        j = k + self.offset
        if abs(j) > MAX_ABS_INDEX:
            raise AlignmentError(f"index {k} (offset {self.offset}) outside supported range")
        return (j + WORD_OFFSET) * self.dim

    def increments(self, k0: int, k1: int) -> np.ndarray:
        """Increments W((k+1)dt) - W(k dt) for k in [k0, k1), shape (k1-k0, m)."""
        n = k1 - k0
        if n < 0:
            raise InvalidSpecError("k1 must be >= k0")
        out = np.empty((n, self.dim))
        if n:
            fill_increments(
                self._key0,
                self._key1,
                U64(self._word_start(k0)),
                n,
                self.dim,
                np.sqrt(self.grid.dt),
                out,
            )
        return out

    def increment(self, k: int) -> np.ndarray:
        """Single increment, shape (m,)."""
        return self.increments(k, k + 1)[0]

    def evaluate(self, k: int) -> np.ndarray:
        """Path value at node k: signed cumulative sum of increments, W(0) = 0."""
        if k == 0:
            return np.zeros(self.dim)
        if k > 0:
            return self.increments(0, k).sum(axis=0)
        return -self.increments(k, 0).sum(axis=0)

    def shift(self, steps: int) -> "NoisePath":
        """The path theta_{steps*dt} omega; composition adds offsets exactly."""
        return replace(self, offset=self.offset + steps)

    def descriptor(self) -> str:
        return f"seed={self.seed}:dim={self.dim}:offset={self.offset}"


def ensemble(seed: int, n: int, dim: int, grid: GridSpec) -> list[NoisePath]:
    """``n`` independent replicas with seeds derived from ``(seed, index)``.

    Replica ``i`` is ``NoisePath(derive_seed(seed, i), ...)`` — identical
    across runs and across any partitioning of the index range.
    """
    if n < 1:
        raise InvalidSpecError("ensemble needs n >= 1")
    return [NoisePath(derive_seed(seed, i), dim, grid) for i in range(n)]


def ensemble_seeds(seed: int, n: int) -> np.ndarray:
    """Vectorized replica-seed derivation (same values as ``ensemble``)."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = U64(seed & ((1 << 64) - 1)) + idx * U64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
        z = z ^ (z >> U64(31))
    return z


# kept for callers that want the scalar mixing function by name
mix_seed = splitmix64
