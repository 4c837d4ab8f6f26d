"""With-replacement sampling designs and (reduced-)sample probabilities.

Two designs are supported, both making ``n`` independent draws:

* SRSWR: every draw is uniform over ``1..N``;
* PPSWR: draw ``i`` is selected with probability ``p_i``.

The probability that the *set of distinct units* of an ``n``-draw sample
equals a given set ``s`` of size ``nu`` follows from inclusion-exclusion over
the units of ``s`` that are never drawn::

    P(s) = sum_{A subset of s} (-1)^(nu - |A|) * (sum_{i in A} p_i)^n

For SRSWR this collapses to the single-sum form used by
:func:`srswr_reduced_prob`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .population import DrawProbabilities, Population

__all__ = [
    "DesignKind",
    "DesignSpec",
    "OrderedSample",
    "ReducedSample",
    "draw",
    "draw_labels",
    "reduce",
    "ordered_sample_prob",
    "ordered_log_prob",
    "reduced_sample_prob",
    "srswr_reduced_prob",
    "brute_force_reduced_prob",
    "brute_force_reduced_distribution",
    "enumerate_sequences",
    "realizing_sequences",
    "DEFAULT_NU_CAP",
    "BRUTE_FORCE_LIMIT",
]

DEFAULT_NU_CAP = 25
BRUTE_FORCE_LIMIT = 10**7


class DesignKind(str, enum.Enum):
    SRSWR = "srswr"
    PPSWR = "ppswr"


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """A with-replacement design with a fixed number of draws.

    Use :meth:`srswr` / :meth:`ppswr` rather than the raw constructor.
    """

    kind: DesignKind
    n_draws: int
    population_size: int
    draw_probs: DrawProbabilities | None = None

    def __post_init__(self):
        kind = DesignKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.n_draws) != self.n_draws or self.n_draws < 1:
            raise DomainError(f"n_draws must be a positive integer, got {self.n_draws!r}")
        object.__setattr__(self, "n_draws", int(self.n_draws))
        if self.population_size < 1:
            raise DomainError("population_size must be >= 1")
        if kind is DesignKind.PPSWR:
            if self.draw_probs is None:
                raise DomainError("PPSWR design requires draw probabilities")
            if not isinstance(self.draw_probs, DrawProbabilities):
                object.__setattr__(self, "draw_probs", DrawProbabilities(self.draw_probs))
            if len(self.draw_probs) != self.population_size:
                raise DomainError("draw_probs length must equal the population size")

    @classmethod
    def srswr(cls, N: int, n: int) -> "DesignSpec":
        return cls(DesignKind.SRSWR, n, int(N))

    @classmethod
    def ppswr(cls, p, n: int) -> "DesignSpec":
        p = p if isinstance(p, DrawProbabilities) else DrawProbabilities(p)
        return cls(DesignKind.PPSWR, n, len(p), p)

    @property
    def N(self) -> int:
        return self.population_size

    @property
    def probs(self) -> np.ndarray:
        """Per-unit draw probabilities (uniform for SRSWR)."""
        if self.kind is DesignKind.PPSWR:
            return self.draw_probs.probs
        return np.full(self.population_size, 1.0 / self.population_size)

    def with_draws(self, n: int) -> "DesignSpec":
        return DesignSpec(self.kind, n, self.population_size, self.draw_probs)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "n_draws": self.n_draws, "N": self.population_size}


@dataclass(frozen=True, eq=False)
class OrderedSample:
    """Unit labels in selection order (repeats allowed) with their responses."""

    draws: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=np.int64).reshape(-1)
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if d.shape != y.shape:
            raise DomainError("draws and responses must have equal length")
        if d.size and d.min() < 1:
            raise DomainError("unit labels start at 1")
        object.__setattr__(self, "draws", d)
        object.__setattr__(self, "responses", y)

    @classmethod
    def from_population(cls, draws, pop: Population, response: str) -> "OrderedSample":
        d = np.asarray(draws, dtype=np.int64)
        if d.size and d.max() > pop.N:
            raise DomainError(f"label {int(d.max())} exceeds N={pop.N}")
        return cls(d, pop.response(response)[d - 1])

    @property
    def n(self) -> int:
        return int(self.draws.size)


@dataclass(frozen=True, eq=False)
class ReducedSample:
    """Distinct sampled labels in increasing order with their responses."""

    units: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.units, dtype=np.int64).reshape(-1)
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if u.shape != y.shape:
            raise DomainError("units and responses must have equal length")
        if u.size == 0:
            raise DomainError("a reduced sample has at least one unit")
        if u.min() < 1 or np.any(np.diff(u) <= 0):
            raise DomainError("units must be distinct, increasing labels >= 1")
        object.__setattr__(self, "units", u)
        object.__setattr__(self, "responses", y)

    @classmethod
    def from_population(cls, units, pop: Population, response: str) -> "ReducedSample":
        u = np.unique(np.asarray(units, dtype=np.int64))
        if u.size and u.max() > pop.N:
            raise DomainError(f"label {int(u.max())} exceeds N={pop.N}")
        return cls(u, pop.response(response)[u - 1])

    @property
    def nu(self) -> int:
        return int(self.units.size)


def reduce(sample: OrderedSample | ReducedSample) -> ReducedSample:
    """Map an ordered sample to its sorted set of distinct units."""
    if isinstance(sample, ReducedSample):
        return sample
    units, first = np.unique(sample.draws, return_index=True)
    return ReducedSample(units, sample.responses[first])


def draw_labels(design: DesignSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent ordered samples as a ``(size, n)`` label array."""
    shape = (size, design.n_draws)
    if design.kind is DesignKind.SRSWR:
        return rng.integers(1, design.population_size + 1, size=shape)
    return rng.choice(design.population_size, size=shape, p=design.draw_probs.probs) + 1


def draw(design: DesignSpec, pop: Population, response: str, rng: np.random.Generator) -> OrderedSample:
    """One ordered sample under ``design`` with responses attached."""
    if design.population_size != pop.N:
        raise DomainError(f"design is for N={design.population_size}, population has N={pop.N}")
    labels = draw_labels(design, rng, 1)[0]
    return OrderedSample.from_population(labels, pop, response)


def _check_labels(design: DesignSpec, labels: np.ndarray) -> None:
    if labels.size and (labels.min() < 1 or labels.max() > design.population_size):
        raise DomainError(f"labels must lie in 1..{design.population_size}")


def ordered_log_prob(design: DesignSpec, labels: np.ndarray) -> np.ndarray:
    """Log-probability of ordered label sequences, along the last axis."""
    labels = np.asarray(labels)
    if design.kind is DesignKind.SRSWR:
        return np.full(labels.shape[:-1], -labels.shape[-1] * math.log(design.population_size))
    return np.log(design.draw_probs.probs)[labels - 1].sum(axis=-1)


def ordered_sample_prob(design: DesignSpec, sample: OrderedSample) -> float:
    """Probability that ``design`` selects exactly this draw sequence."""
    _check_labels(design, sample.draws)
    if sample.n != design.n_draws:
        return 0.0
    if design.kind is DesignKind.SRSWR:
        return float(design.population_size) ** (-sample.n)
    return float(np.prod(design.draw_probs.probs[sample.draws - 1]))


@lru_cache(maxsize=4096)
def srswr_reduced_prob(N: int, n: int, nu: int, nu_cap: int = DEFAULT_NU_CAP) -> float:
    """Probability that ``n`` SRSWR draws from ``N`` units hit exactly a given ``nu``-set.

    ``(nu/N)^n * [1 - sum_{k=1}^{nu} (-1)^(k-1) C(nu,k) ((nu-k)/nu)^n]``

    The bracket alternates in sign, so it is evaluated exactly: multiplied out,
    the numerator is the integer count of surjections onto the set.
    """
    if nu < 1 or nu > N:
        raise DomainError(f"need 1 <= nu <= N, got nu={nu}, N={N}")
    if nu > n:
        return 0.0
    if nu > nu_cap:
        raise EnumerationLimitError(f"nu={nu} exceeds the closed-form cap {nu_cap}")
    onto = sum((-1) ** k * math.comb(nu, k) * (nu - k) ** n for k in range(nu + 1))
    return float(Fraction(onto, N**n))


def _subset_sums(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sums of ``p`` over all 2^len(p) subsets, with subset sizes."""
    sums = np.zeros(1)
    sizes = np.zeros(1, dtype=np.int64)
    for value in p:
        sums = np.concatenate([sums, sums + value])
        sizes = np.concatenate([sizes, sizes + 1])
    return sums, sizes


def reduced_sample_prob(
    design: DesignSpec, reduced: ReducedSample, nu_cap: int = DEFAULT_NU_CAP
) -> float:
    """Probability that the distinct units of an ``n``-draw sample are ``reduced.units``.

    Exactly 0 when ``nu > n``. Raises :class:`DomainError` when ``nu > N``.
    """
    nu = reduced.nu
    if nu > design.population_size:
        raise DomainError(f"nu={nu} exceeds N={design.population_size}")
    _check_labels(design, reduced.units)
    n = design.n_draws
    if nu > n:
        return 0.0
    if design.kind is DesignKind.SRSWR:
        return srswr_reduced_prob(design.population_size, n, nu, nu_cap)
    if nu > nu_cap:
        raise EnumerationLimitError(f"nu={nu} exceeds the closed-form cap {nu_cap}")
    p = design.draw_probs.probs[reduced.units - 1]
    sums, sizes = _subset_sums(p)
    signs = np.where((nu - sizes) % 2 == 0, 1.0, -1.0)
    return math.fsum(signs * sums**n)


# -- enumeration (oracles and exact tools) -----------------------------------


def enumerate_sequences(n_symbols: int, length: int, chunk: int = 1 << 16):
    """Yield all ``n_symbols**length`` sequences over ``0..n_symbols-1`` in chunks.

    Sequences appear in lexicographic order; each chunk is an ``(m, length)`` array.
    """
    total = n_symbols**length
    powers = n_symbols ** np.arange(length - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (codes[:, None] // powers[None, :]) % n_symbols


def _masks(labels: np.ndarray) -> np.ndarray:
    """Bitmask (bit ``i-1`` for label ``i``) of the distinct labels of each row."""
    return np.bitwise_or.reduce(np.left_shift(np.int64(1), labels - 1), axis=-1)


def brute_force_reduced_distribution(design: DesignSpec, limit: int = BRUTE_FORCE_LIMIT) -> dict[int, float]:
    """Distribution of the distinct-unit set by full enumeration of all ``N^n`` sequences.

    Returns a mapping from bitmask (bit ``i-1`` set when unit ``i`` is in the set)
    to probability.
    """
    N, n = design.population_size, design.n_draws
    if N**n > limit:
        raise EnumerationLimitError(f"N^n = {N}^{n} exceeds the enumeration limit {limit}")
    if N > 62:
        raise EnumerationLimitError("bitmask enumeration supports N <= 62")
    all_masks, all_probs = [], []
    for seq in enumerate_sequences(N, n):
        labels = seq + 1
        all_masks.append(_masks(labels))
        all_probs.append(np.prod(design.probs[seq], axis=1))
    masks = np.concatenate(all_masks)
    probs = np.concatenate(all_probs)
    order = np.argsort(masks, kind="stable")
    masks, probs = masks[order], probs[order]
    keys, starts = np.unique(masks, return_index=True)
    groups = np.split(probs, starts[1:])
    return {int(k): math.fsum(g) for k, g in zip(keys, groups)}


def brute_force_reduced_prob(
    design: DesignSpec, reduced: ReducedSample, limit: int = BRUTE_FORCE_LIMIT
) -> float:
    """Oracle for :func:`reduced_sample_prob` by exhaustive enumeration."""
    if reduced.nu > design.population_size:
        raise DomainError(f"nu={reduced.nu} exceeds N={design.population_size}")
    _check_labels(design, reduced.units)
    dist = brute_force_reduced_distribution(design, limit)
    mask = int(_masks(reduced.units[None, :])[0])
    return dist.get(mask, 0.0)


def realizing_sequences(units: np.ndarray, n: int, cap: int) -> np.ndarray:
    """All length-``n`` label sequences whose distinct set is exactly ``units``.

    Enumerates the ``nu**n`` sequences over ``units`` and keeps those using
    every unit. Raises :class:`EnumerationLimitError` when ``nu**n > cap``.
    """
    units = np.asarray(units, dtype=np.int64)
    nu = units.size
    if nu > n:
        return np.empty((0, n), dtype=np.int64)
    if nu**n > cap:
        raise EnumerationLimitError(f"{nu}^{n} sequences exceed the enumeration cap {cap}")
    full = (1 << nu) - 1
    out = []
    for seq in enumerate_sequences(nu, n):
        keep = _masks(seq + 1) == full
        out.append(units[seq[keep]])
    return np.concatenate(out)
