"""Rao-Blackwellization across a randomly selected strategy.

A strategy pairs a design with an estimator and carries a prior probability
of being the one used. Conditioning the selected strategy's estimate on the
observed data (without the strategy label) gives posterior strategy weights

    w_k  proportional to  prior_k * P(data | design_k)

and the improved estimate ``sum_k w_k * estimate_k(data)``. Data is either the
ordered draw sequence or the reduced set of distinct units, chosen with
:class:`ConditioningLevel`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .designs import (
    DesignSpec,
    OrderedSample,
    ReducedSample,
    enumerate_sequences,
    ordered_log_prob,
    realizing_sequences,
    reduce,
    reduced_sample_prob,
    _masks,
)
from .errors import (
    DomainError,
    EnumerationLimitError,
    ImpossibleSampleError,
    RBSurveyError,
    UndefinedVarianceError,
)
from .estimators import (
    EstimatorId,
    PointAndVar,
    evaluate,
    evaluate_point,
    pathak_var_estimate,
    sequence_estimates,
)
from .population import Population

__all__ = [
    "Strategy",
    "StrategyMixture",
    "ConditioningLevel",
    "RBResult",
    "MixtureMoments",
    "posterior_weights",
    "rb_point",
    "rb_var_estimate",
    "rb_within_design",
    "exact_mixture_moments",
    "retrospective_var",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 10**6


class ConditioningLevel(str, enum.Enum):
    REDUCED_SET = "reduced_set"
    ORDERED_SAMPLE = "ordered_sample"


@dataclass(frozen=True, eq=False)
class Strategy:
    design: DesignSpec
    estimator: EstimatorId
    prior: float = 1.0
    name: str | None = None

    def __post_init__(self):
        if not (0.0 < self.prior <= 1.0):
            raise DomainError(f"strategy prior must lie in (0, 1], got {self.prior!r}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"{self.design.kind.value}_n{self.design.n_draws}_{self.estimator.kind.value}"


class StrategyMixture:
    """Ordered, non-empty collection of strategies whose priors sum to one.

    Strategies given with prior 0 are dropped.
    """

    def __init__(self, strategies: Sequence[Strategy]):
        kept = []
        for s in strategies:
            if isinstance(s, Strategy):
                kept.append(s)
            else:
                design, estimator, prior = s[:3]
                if prior == 0:
                    continue
                kept.append(Strategy(design, estimator, prior, *s[3:]))
        if not kept:
            raise DomainError("a strategy mixture needs at least one strategy")
        total = math.fsum(s.prior for s in kept)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"strategy priors sum to {total!r}, not 1")
        Ns = {s.design.N for s in kept}
        if len(Ns) != 1:
            raise DomainError("all strategies must target the same population size")
        self.strategies = tuple(kept)

    def __len__(self) -> int:
        return len(self.strategies)

    def __iter__(self):
        return iter(self.strategies)

    def __getitem__(self, i) -> Strategy:
        return self.strategies[i]

    @property
    def priors(self) -> np.ndarray:
        return np.array([s.prior for s in self.strategies])

    @property
    def N(self) -> int:
        return self.strategies[0].design.N

    @classmethod
    def single(cls, strategy_or_design, estimator: EstimatorId | None = None) -> "StrategyMixture":
        if isinstance(strategy_or_design, Strategy):
            s = strategy_or_design
            return cls([Strategy(s.design, s.estimator, 1.0, s.name)])
        return cls([Strategy(strategy_or_design, estimator, 1.0)])


@dataclass
class RBResult:
    """Outcome of a Rao-Blackwellized estimate.

    ``term_a`` / ``term_b`` are the posterior-weighted mean of per-strategy
    variance estimates and the posterior spread of per-strategy points; when
    ``term_a - term_b < 0`` the reported ``var_hat`` falls back to ``term_a``.
    """

    point: float
    weights: np.ndarray
    per_strategy_points: np.ndarray
    var_hat: float | None = None
    var_hat_fallback_used: bool = False
    term_a: float | None = None
    term_b: float | None = None
    per_strategy_var_hats: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "point": self.point,
            "weights": [float(w) for w in self.weights],
            "per_strategy_points": [float(v) for v in self.per_strategy_points],
            "var_hat": self.var_hat,
            "var_hat_fallback_used": self.var_hat_fallback_used,
            "term_a": self.term_a,
            "term_b": self.term_b,
        }


def _normalize_log_weights(priors: np.ndarray, log_probs: np.ndarray) -> np.ndarray:
    """Normalized ``prior * exp(log_prob)`` along the last axis, -inf meaning zero."""
    with np.errstate(divide="ignore"):
        logw = np.log(priors) + log_probs
    top = np.max(logw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise ImpossibleSampleError("observed data has probability zero under every strategy")
    w = np.exp(logw - top)
    return w / w.sum(axis=-1, keepdims=True)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _data_log_probs(mixture: StrategyMixture, sample, level: ConditioningLevel) -> np.ndarray:
    if level is ConditioningLevel.ORDERED_SAMPLE:
        if isinstance(sample, ReducedSample):
            raise DomainError("ordered-sample conditioning needs the ordered sample")
        out = []
        for s in mixture:
            if sample.n != s.design.n_draws:
                out.append(-math.inf)
            else:
                out.append(float(ordered_log_prob(s.design, sample.draws)))
        return np.array(out)
    reduced = reduce(sample)
    return np.array([_log(reduced_sample_prob(s.design, reduced)) for s in mixture])


def posterior_weights(mixture: StrategyMixture, sample, level=ConditioningLevel.ORDERED_SAMPLE) -> np.ndarray:
    """Posterior probability of each strategy given the data at ``level``."""
    level = ConditioningLevel(level)
    return _normalize_log_weights(mixture.priors, _data_log_probs(mixture, sample, level))


def _within_design(strategy: Strategy, reduced: ReducedSample, cap: int) -> tuple[float, float | None]:
    """Conditional point and variance estimates given the distinct-unit set.

    The point is the probability-weighted average of the estimator over all
    orderings that reduce to ``reduced``. The variance estimate is the
    averaged per-ordering variance estimate minus the exact conditional
    variance of the estimator over those orderings, which keeps it unbiased
    for the variance of the conditioned estimator (and may be negative).
    """
    design, est = strategy.design, strategy.estimator
    if reduced.nu > design.n_draws:
        raise DomainError(f"nu={reduced.nu} cannot arise from {design.n_draws} draws")
    if est.depends_only_on_reduced:
        pv = evaluate(est, reduced)
        return pv.point, pv.var_hat
    seqs = realizing_sequences(reduced.units, design.n_draws, cap)
    lookup = dict(zip(reduced.units.tolist(), reduced.responses.tolist()))
    y = np.vectorize(lookup.__getitem__, otypes=[np.float64])(seqs)
    logp = ordered_log_prob(design, seqs)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    points, vars_ = sequence_estimates(est, seqs, y)
    point = float(np.dot(w, points))
    if design.n_draws < 2:
        return point, None
    spread = float(np.dot(w, (points - point) ** 2))
    return point, float(np.dot(w, vars_)) - spread


def rb_within_design(strategy: Strategy, reduced: ReducedSample, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Conditional expectation of the strategy's estimator given the distinct-unit set.

    Enumerates every length-``n`` sequence whose distinct set is ``reduced.units``
    and averages the estimator weighted by the sequences' selection probabilities.
    """
    return _within_design(strategy, reduced, enumeration_cap)[0]


def _per_strategy(mixture, sample, level, weights, cap, need_var):
    """Per-strategy (point, var_hat) on the data; zero-weight strategies give (0, 0)."""
    points = np.zeros(len(mixture))
    var_hats = np.zeros(len(mixture))
    reduced = reduce(sample)
    for k, s in enumerate(mixture):
        if weights[k] == 0.0:
            continue
        if level is ConditioningLevel.ORDERED_SAMPLE:
            if s.estimator.depends_only_on_reduced or need_var:
                pv = evaluate(s.estimator, sample)
            else:
                pv = PointAndVar(evaluate_point(s.estimator, sample))
            point, var_hat = pv.point, pv.var_hat
        else:
            point, var_hat = _within_design(s, reduced, cap)
        points[k] = point
        if need_var:
            if var_hat is None:
                raise UndefinedVarianceError(f"strategy {s.label!r} has no variance estimate here")
            var_hats[k] = var_hat
    return points, var_hats


def _assert_convex(point: float, weights: np.ndarray, points: np.ndarray) -> None:
    live = points[weights > 0]
    lo, hi = live.min(), live.max()
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if not (lo - slack <= point <= hi + slack):
        raise RBSurveyError(f"RB point {point!r} outside per-strategy range [{lo!r}, {hi!r}]")


def rb_point(
    mixture: StrategyMixture,
    sample: OrderedSample | ReducedSample,
    level=ConditioningLevel.ORDERED_SAMPLE,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
) -> RBResult:
    """Rao-Blackwellized point estimate over the strategies in ``mixture``."""
    level = ConditioningLevel(level)
    weights = posterior_weights(mixture, sample, level)
    points, _ = _per_strategy(mixture, sample, level, weights, enumeration_cap, need_var=False)
    point = float(np.dot(weights, points))
    _assert_convex(point, weights, points)
    return RBResult(point, weights, points)


def combine_variance(weights: np.ndarray, points: np.ndarray, var_hats: np.ndarray, point: float):
    """``(var_hat, fallback_used, term_a, term_b)`` from per-strategy inputs.

    ``var_hat = term_a - term_b``; if negative, ``term_a``; if that is negative
    too (possible only with set-level conditioning), 0.
    """
    term_a = float(np.dot(weights, var_hats))
    term_b = float(np.dot(weights, (points - point) ** 2))
    diff = term_a - term_b
    if diff >= 0:
        return diff, False, term_a, term_b
    return max(term_a, 0.0), True, term_a, term_b


def rb_var_estimate(
    mixture: StrategyMixture,
    sample: OrderedSample | ReducedSample,
    level=ConditioningLevel.ORDERED_SAMPLE,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
) -> RBResult:
    """RB point estimate together with its variance estimate and fallback flag."""
    level = ConditioningLevel(level)
    weights = posterior_weights(mixture, sample, level)
    points, var_hats = _per_strategy(mixture, sample, level, weights, enumeration_cap, need_var=True)
    point = float(np.dot(weights, points))
    _assert_convex(point, weights, points)
    var_hat, fallback, a, b = combine_variance(weights, points, var_hats, point)
    return RBResult(point, weights, points, var_hat, fallback, a, b, var_hats)


# -- exact moments by enumeration ----------------------------------------------


@dataclass(frozen=True)
class MixtureMoments:
    """Exact design moments of the preliminary and improved estimators.

    ``var_rb`` is computed directly over the conditioning values;
    ``var_rb_decomposition`` is ``var_preliminary - expected_conditional_var``.
    ``expected_var_estimate`` is the expectation of the variance estimator
    before the negative-value fallback (``None`` when some strategy lacks a
    variance estimator).
    """

    expectation: float
    var_preliminary: float
    var_rb: float
    var_rb_decomposition: float
    expected_conditional_var: float
    expected_var_estimate: float | None
    expected_var_estimate_with_fallback: float | None
    level: ConditioningLevel
    n_support: int


def _strategy_table(strategy: Strategy, y_pop: np.ndarray, level: ConditioningLevel, limit: int):
    """Map conditioning key -> (probability, point, var_hat) for one strategy."""
    design, est = strategy.design, strategy.estimator
    N, n = design.N, design.n_draws
    if N**n > limit:
        raise EnumerationLimitError(f"N^n = {N}^{n} exceeds the enumeration limit {limit}")
    keys_l, p_l, pt_l, v_l = [], [], [], []
    for chunk in enumerate_sequences(N, n):
        labels = chunk + 1
        probs = np.prod(design.probs[chunk], axis=1)
        if est.depends_only_on_reduced:
            pts = np.empty(labels.shape[0])
            vs = np.full(labels.shape[0], np.nan)
            for i, row in enumerate(labels):
                red = ReducedSample(np.unique(row), y_pop[np.unique(row) - 1])
                try:
                    pts[i] = pathak_var_estimate(red, est.N, est.n_draws)
                except UndefinedVarianceError:
                    pts[i] = np.nan
        else:
            pts, vs = sequence_estimates(est, labels, y_pop[chunk])
        if level is ConditioningLevel.ORDERED_SAMPLE:
            keys = (chunk * (N ** np.arange(n - 1, -1, -1))).sum(axis=1)
        else:
            keys = _masks(labels)
        keys_l.append(keys)
        p_l.append(probs)
        pt_l.append(pts)
        v_l.append(vs)
    keys = np.concatenate(keys_l)
    probs = np.concatenate(p_l)
    pts = np.concatenate(pt_l)
    vs = np.concatenate(v_l)
    order = np.argsort(keys, kind="stable")
    keys, probs, pts, vs = keys[order], probs[order], pts[order], vs[order]
    uniq, starts = np.unique(keys, return_index=True)
    table = {}
    for key, g_p, g_pt, g_v in zip(
        uniq, np.split(probs, starts[1:]), np.split(pts, starts[1:]), np.split(vs, starts[1:])
    ):
        total = math.fsum(g_p)
        if total == 0.0:
            continue
        mean = math.fsum(g_p * g_pt) / total
        var_hat = math.fsum(g_p * g_v) / total
        if level is ConditioningLevel.REDUCED_SET:
            var_hat -= math.fsum(g_p * (g_pt - mean) ** 2) / total
        table[int(key)] = (total, mean, var_hat)
    return table


def exact_mixture_moments(
    mixture: StrategyMixture,
    pop: Population,
    response: str,
    level=ConditioningLevel.REDUCED_SET,
    limit: int = DEFAULT_ENUMERATION_CAP,
) -> MixtureMoments:
    """Exact expectation and variances of the preliminary and RB estimators.

    Every design is enumerated over all ``N^n`` ordered sequences (refused when
    ``N^n > limit``). At ``REDUCED_SET`` level the per-strategy estimate of a set
    is its within-design conditional expectation.
    """
    level = ConditioningLevel(level)
    y = pop.response(response)
    if mixture.N != pop.N:
        raise DomainError("mixture and population disagree on N")
    if level is ConditioningLevel.ORDERED_SAMPLE and len({s.design.n_draws for s in mixture}) > 1:
        raise DomainError("ordered-sample moments need a common draw count across strategies")
    tables = [_strategy_table(s, y, level, limit) for s in mixture]
    priors = mixture.priors
    keys = sorted(set().union(*tables))

    # rows: support points; columns: strategies
    P = np.zeros((len(keys), len(mixture)))
    PT = np.zeros_like(P)
    V = np.zeros_like(P)
    for k, tab in enumerate(tables):
        for i, key in enumerate(keys):
            if key in tab:
                P[i, k], PT[i, k], V[i, k] = tab[key]
    joint = P * priors[None, :]
    expectation = math.fsum((joint * PT).ravel())
    var_prelim = math.fsum((joint * (PT - expectation) ** 2).ravel())
    p_data = joint.sum(axis=1)
    w = joint / p_data[:, None]
    rb = (w * PT).sum(axis=1)
    var_rb = math.fsum(p_data * (rb - expectation) ** 2)
    cond = math.fsum((joint * (PT - rb[:, None]) ** 2).ravel())
    var_rb_decomp = var_prelim - cond
    scale = max(abs(var_prelim), abs(var_rb), 1e-300)
    if abs(var_rb - var_rb_decomp) > 1e-9 * scale:
        raise RBSurveyError(
            f"variance decomposition mismatch: direct {var_rb!r} vs decomposition {var_rb_decomp!r}"
        )
    live_v = V[joint > 0]
    if live_v.size and np.all(np.isfinite(live_v)):
        a = (w * V).sum(axis=1)
        b = (w * (PT - rb[:, None]) ** 2).sum(axis=1)
        ev = math.fsum(p_data * (a - b))
        ev_fb = math.fsum(p_data * np.where(a - b < 0, np.maximum(a, 0.0), a - b))
    else:
        ev = ev_fb = None
    return MixtureMoments(
        expectation=expectation,
        var_preliminary=var_prelim,
        var_rb=var_rb,
        var_rb_decomposition=var_rb_decomp,
        expected_conditional_var=cond,
        expected_var_estimate=ev,
        expected_var_estimate_with_fallback=ev_fb,
        level=level,
        n_support=len(keys),
    )


# -- retrospective (unknown sample size) ------------------------------------------


def retrospective_weights(posited_sizes: Sequence[int], size_prior, nu: int, N: int) -> np.ndarray:
    """Posterior over posited SRSWR draw counts given only that ``nu`` distinct units were seen.

    Under SRSWR the probability of a particular distinct set depends on the set
    only through its size, so the weights are a function of ``nu``.
    """
    sizes = [int(k) for k in posited_sizes]
    prior = np.asarray(size_prior, dtype=np.float64)
    if prior.shape != (len(sizes),):
        raise DomainError("size_prior must have one entry per posited size")
    if any(k < 1 for k in sizes):
        raise DomainError("posited sizes must be >= 1")
    if np.any(prior < 0) or abs(math.fsum(prior) - 1.0) > 1e-12:
        raise DomainError("size_prior must be a probability vector")
    if nu > N:
        raise DomainError(f"nu={nu} exceeds N={N}")
    probe = ReducedSample(np.arange(1, nu + 1), np.zeros(nu))
    likes = np.array([reduced_sample_prob(DesignSpec.srswr(N, k), probe) for k in sizes])
    joint = prior * likes
    total = joint.sum()
    if total <= 0:
        raise ImpossibleSampleError(f"nu={nu} distinct units exceed every posited size {sizes}")
    return joint / total


def retrospective_var(posited_sizes: Sequence[int], size_prior, reduced: ReducedSample, N: int) -> RBResult:
    """RB estimate of the variance of the effective sample mean with unknown draw count.

    Each posited size ``n_k`` defines an SRSWR strategy whose estimator is
    :func:`pathak_var_estimate` at ``n_k``. The returned ``point`` is the
    posterior-weighted average of those estimates.
    """
    weights = retrospective_weights(posited_sizes, size_prior, reduced.nu, N)
    if reduced.nu < 2:
        raise UndefinedVarianceError("variance estimate needs at least 2 distinct units")
    points = np.array(
        [pathak_var_estimate(reduced, N, k) if w > 0 else 0.0 for k, w in zip(posited_sizes, weights)]
    )
    point = float(np.dot(weights, points))
    _assert_convex(point, weights, points)
    return RBResult(point, weights, points)
