"""
Probability objects over grid cells: PMFs, stochastic channels and sample sets.

Randomness always goes through numpy's PCG64 bit generator so that a seed
reproduces the same draws on every platform. Sub-seeds for cycles, shards or
trials are derived with SeedSequence spawn keys (see derive_seed).
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constants import PMF_TOLERANCE, ROW_TOLERANCE
from .errors import DomainError


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *keys: int) -> int:
    """
    Deterministic sub-seed for (seed, keys).

    Uses SeedSequence(seed, spawn_key=keys) and takes its first 63-bit state
    word, so the same (seed, keys) always yields the same sub-seed and distinct
    keys yield independent streams.
    """
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector over m cells."""
    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("PMF must be a non-empty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("PMF entries must be finite and non-negative")
        if abs(p.sum() - 1.0) > PMF_TOLERANCE:
            raise DomainError(f"PMF sums to {p.sum():.12g}, expected 1")
        object.__setattr__(self, 'p', p)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> 'Pmf':
        """Normalize non-negative weights into a PMF."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0 or np.any(w < 0):
            raise DomainError("weights must be non-negative with a positive total")
        return cls(w / total)

    @property
    def m(self) -> int:
        return self.p.size

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.p > 0))

    def __len__(self) -> int:
        return self.p.size


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix, c[x][y] = P(report y | true x)."""
    c: np.ndarray

    def __post_init__(self):
        c = _frozen(self.c)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
            raise DomainError("channel must be a non-empty square matrix")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise DomainError("channel entries must be finite and non-negative")
        row_error = np.abs(c.sum(axis=1) - 1.0).max()
        if row_error > ROW_TOLERANCE:
            raise DomainError(f"channel rows deviate from 1 by {row_error:.3g}")
        object.__setattr__(self, 'c', c)

    @classmethod
    def identity(cls, m: int) -> 'Channel':
        return cls(np.eye(m))

    @classmethod
    def point_mass_channel(cls, m: int, target: int) -> 'Channel':
        """Every row reports `target`."""
        c = np.zeros((m, m))
        c[:, target] = 1.0
        return cls(c)

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def positive(self) -> bool:
        return bool(np.all(self.c > 0))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Multiset of cell indices plus the seed that produced it (None for ingested data)."""
    indices: np.ndarray
    m: int
    seed: Optional[int] = None
    source: str = 'sampled'

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64)
        if indices.ndim != 1:
            raise DomainError("sample indices must be a vector")
        if indices.size and (indices.min() < 0 or indices.max() >= self.m):
            raise DomainError(f"sample index outside [0, {self.m})")
        indices.setflags(write=False)
        object.__setattr__(self, 'indices', indices)

    @property
    def n(self) -> int:
        return self.indices.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.m)

    def __len__(self) -> int:
        return self.indices.size


def uniform_pmf(m: int) -> Pmf:
    if m < 1:
        raise DomainError("m must be at least 1")
    return Pmf(np.full(m, 1.0 / m))


def uniform_channel(m: int) -> Channel:
    if m < 1:
        raise DomainError("m must be at least 1")
    return Channel(np.full((m, m), 1.0 / m))


def _normalized_cdf(weights: np.ndarray) -> np.ndarray:
    # Dividing by the last entry makes the final value exactly 1.0
    cdf = np.cumsum(weights, axis=-1)
    return cdf / cdf[..., -1:]


def sample(pmf: Pmf, n: int, seed: int) -> SampleSet:
    """n i.i.d. draws by inverse CDF on the cumulative vector."""
    rng = make_rng(seed)
    u = rng.random(n)
    indices = np.searchsorted(_normalized_cdf(pmf.p), u, side='right')
    return SampleSet(indices, pmf.m, seed=seed)


def obfuscate(samples: SampleSet, channel: Channel, seed: int) -> SampleSet:
    """Replace each x by an independent draw from row x of the channel."""
    if samples.m != channel.m:
        raise DomainError(f"samples over {samples.m} cells, channel over {channel.m}")
    rng = make_rng(seed)
    u = rng.random(samples.n)
    cdf = _normalized_cdf(channel.c)
    noisy = np.empty(samples.n, dtype=np.int64)
    # Group by true cell so each row's CDF is searched once
    for x in np.unique(samples.indices):
        mask = samples.indices == x
        noisy[mask] = np.searchsorted(cdf[x], u[mask], side='right')
    return SampleSet(noisy, channel.m, seed=seed, source='obfuscated')


def push_forward(pmf: Pmf, channel: Channel) -> Pmf:
    """Output distribution: out[y] = sum_x pmf[x] * channel[x][y]."""
    if pmf.m != channel.m:
        raise DomainError(f"PMF over {pmf.m} cells, channel over {channel.m}")
    return Pmf(pmf.p @ channel.c)


def check_dist(dist, m: int) -> np.ndarray:
    """Distance table as a float (m, m) array."""
    dist = np.asarray(dist, dtype=float)
    if dist.shape != (m, m):
        raise DomainError(f"distance table of shape {dist.shape}, expected ({m}, {m})")
    return dist
