"""Per-strategy point and variance estimators.

The ``*_kernel`` functions operate on the last axis of arrays so the Monte
Carlo harness can evaluate a whole block of samples at once; the sample-level
functions are thin wrappers around them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .designs import DesignKind, DesignSpec, OrderedSample, ReducedSample, reduce
from .errors import DomainError, UndefinedVarianceError
from .population import DrawProbabilities, Population

__all__ = [
    "EstimatorKind",
    "EstimatorId",
    "PointAndVar",
    "expansion_total",
    "hansen_hurwitz_total",
    "effective_sample_mean",
    "pathak_factor",
    "pathak_var",
    "pathak_var_estimate",
    "evaluate",
    "evaluate_point",
    "expansion_kernel",
    "hansen_hurwitz_kernel",
]


class EstimatorKind(str, enum.Enum):
    EXPANSION_TOTAL = "expansion_total"
    HANSEN_HURWITZ_TOTAL = "hansen_hurwitz_total"
    EFFECTIVE_MEAN_VARHAT = "effective_mean_varhat"


@dataclass(frozen=True, eq=False)
class EstimatorId:
    """An estimator tag plus the design context it needs."""

    kind: EstimatorKind
    N: int | None = None
    draw_probs: DrawProbabilities | None = None
    n_draws: int | None = None

    def __post_init__(self):
        kind = EstimatorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is EstimatorKind.HANSEN_HURWITZ_TOTAL:
            if self.draw_probs is None:
                raise DomainError("Hansen-Hurwitz estimator requires draw probabilities")
        elif self.N is None:
            raise DomainError(f"{kind.value} requires N")
        if kind is EstimatorKind.EFFECTIVE_MEAN_VARHAT and self.n_draws is None:
            raise DomainError("effective_mean_varhat requires n_draws")

    @classmethod
    def for_design(cls, kind, design: DesignSpec) -> "EstimatorId":
        """Bind an estimator to the context supplied by ``design``."""
        kind = EstimatorKind(kind)
        if kind is EstimatorKind.HANSEN_HURWITZ_TOTAL:
            probs = design.draw_probs
            if probs is None:
                probs = DrawProbabilities(design.probs)
            return cls(kind, N=design.N, draw_probs=probs)
        return cls(kind, N=design.N, n_draws=design.n_draws)

    @property
    def depends_only_on_reduced(self) -> bool:
        """True when the estimator is a function of the distinct-unit data alone."""
        return self.kind is EstimatorKind.EFFECTIVE_MEAN_VARHAT


@dataclass(frozen=True)
class PointAndVar:
    point: float
    var_hat: float | None = None

    def __post_init__(self):
        if self.var_hat is not None and not self.var_hat >= 0:
            raise DomainError(f"var_hat must be >= 0, got {self.var_hat!r}")


# -- array kernels ------------------------------------------------------------


def expansion_kernel(y: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """``N * mean(y)`` and ``N^2 s^2 / n`` along the last axis (s^2 with ddof=1)."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[-1]
    point = N * y.mean(axis=-1)
    if n < 2:
        return point, np.full(point.shape, np.nan)
    var = N * N * y.var(axis=-1, ddof=1) / n
    return point, var


def hansen_hurwitz_kernel(y: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hansen-Hurwitz total and its variance estimator along the last axis.

    ``p`` holds the draw probability of each drawn unit (same shape as ``y``).
    """
    z = np.asarray(y, dtype=np.float64) / np.asarray(p, dtype=np.float64)
    n = z.shape[-1]
    point = z.mean(axis=-1)
    if n < 2:
        return point, np.full(point.shape, np.nan)
    var = z.var(axis=-1, ddof=1) / n
    return point, var


# -- sample-level estimators --------------------------------------------------


def expansion_total(sample: OrderedSample, N: int) -> PointAndVar:
    """Expansion estimator of the total under SRSWR, over all ``n`` draws."""
    if sample.n < 2:
        raise UndefinedVarianceError("expansion variance needs n >= 2 draws")
    point, var = expansion_kernel(sample.responses, N)
    return PointAndVar(float(point), float(var))


def hansen_hurwitz_total(sample: OrderedSample, p: DrawProbabilities) -> PointAndVar:
    """Hansen-Hurwitz estimator of the total under PPSWR.

    ``point = mean(y_i / p_i)``, ``var_hat = sum((y_i/p_i - point)^2) / (n (n-1))``.
    """
    if sample.n < 2:
        raise UndefinedVarianceError("Hansen-Hurwitz variance needs n >= 2 draws")
    probs = p.probs if isinstance(p, DrawProbabilities) else np.asarray(p, dtype=np.float64)
    point, var = hansen_hurwitz_kernel(sample.responses, probs[sample.draws - 1])
    return PointAndVar(float(point), float(var))


def effective_sample_mean(reduced: ReducedSample) -> float:
    """Mean response over the distinct sampled units."""
    return float(np.mean(reduced.responses))


@lru_cache(maxsize=4096)
def _pathak_fraction(N: int, n: int) -> Fraction:
    return Fraction(sum(j ** (n - 1) for j in range(1, N)), N**n)


def pathak_factor(N: int, n: int) -> float:
    """``sum_{j=1}^{N-1} j^(n-1) / N^n``, exact rational arithmetic rounded once."""
    N, n = int(N), int(n)
    if N < 2 or n < 1:
        raise DomainError(f"pathak_factor needs N >= 2 and n >= 1, got N={N}, n={n}")
    return float(_pathak_fraction(N, n))


def pathak_var(pop: Population, response: str, n: int) -> float:
    """Exact SRSWR variance of the effective sample mean after ``n`` draws."""
    if pop.N < 2:
        raise DomainError("variance of the effective sample mean needs N >= 2")
    y = pop.response(response)
    return pathak_factor(pop.N, n) * float(np.var(y, ddof=1))


def pathak_var_estimate(reduced: ReducedSample, N: int, n: int) -> float:
    """Unbiased (given nu >= 2) estimate of the variance of the effective sample mean."""
    if reduced.nu < 2:
        raise UndefinedVarianceError("variance estimate needs at least 2 distinct units")
    return pathak_factor(N, n) * float(np.var(reduced.responses, ddof=1))


def evaluate(estimator: EstimatorId, sample: OrderedSample | ReducedSample) -> PointAndVar:
    """Point estimate and variance estimate of ``estimator`` on ``sample``.

    ``var_hat`` is ``None`` for estimators without an accompanying variance
    estimator (the effective-mean variance estimate itself).
    """
    kind = estimator.kind
    if kind is EstimatorKind.EFFECTIVE_MEAN_VARHAT:
        return PointAndVar(pathak_var_estimate(reduce(sample), estimator.N, estimator.n_draws))
    if isinstance(sample, ReducedSample):
        raise DomainError(f"{kind.value} needs the ordered sample, not the reduced set")
    if kind is EstimatorKind.EXPANSION_TOTAL:
        return expansion_total(sample, estimator.N)
    return hansen_hurwitz_total(sample, estimator.draw_probs)


def evaluate_point(estimator: EstimatorId, sample: OrderedSample | ReducedSample) -> float:
    """Point estimate only; defined for single-draw samples as well."""
    kind = estimator.kind
    if kind is EstimatorKind.EFFECTIVE_MEAN_VARHAT:
        return evaluate(estimator, sample).point
    if isinstance(sample, ReducedSample):
        raise DomainError(f"{kind.value} needs the ordered sample, not the reduced set")
    if kind is EstimatorKind.EXPANSION_TOTAL:
        return float(expansion_kernel(sample.responses, estimator.N)[0])
    p = estimator.draw_probs.probs[sample.draws - 1]
    return float(hansen_hurwitz_kernel(sample.responses, p)[0])


def sequence_estimates(estimator: EstimatorId, labels: np.ndarray, y: np.ndarray):
    """Vectorized point and variance estimates for rows of ``labels`` with responses ``y``.

    Only for the ordered-sample estimators (expansion, Hansen-Hurwitz).
    """
    kind = estimator.kind
    if kind is EstimatorKind.EXPANSION_TOTAL:
        return expansion_kernel(y, estimator.N)
    if kind is EstimatorKind.HANSEN_HURWITZ_TOTAL:
        return hansen_hurwitz_kernel(y, estimator.draw_probs.probs[labels - 1])
    raise DomainError(f"{kind.value} has no per-sequence kernel")


def strategy_design_matches(estimator: EstimatorId, design: DesignSpec) -> bool:
    """Whether an estimator's bound context is consistent with ``design``."""
    if estimator.kind is EstimatorKind.HANSEN_HURWITZ_TOTAL:
        return len(estimator.draw_probs) == design.N
    if estimator.kind is EstimatorKind.EFFECTIVE_MEAN_VARHAT:
        return estimator.N == design.N and design.kind is DesignKind.SRSWR
    return estimator.N == design.N
