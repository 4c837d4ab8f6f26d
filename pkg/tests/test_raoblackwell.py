import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsurvey import (
    ConditioningLevel,
    DesignSpec,
    DomainError,
    EstimatorId,
    ImpossibleSampleError,
    OrderedSample,
    Population,
    ReducedSample,
    Strategy,
    StrategyMixture,
    draw_probabilities,
    exact_mixture_moments,
    pathak_var_estimate,
    rb_point,
    rb_var_estimate,
    rb_within_design,
    reduce,
    reduced_sample_prob,
    retrospective_var,
)
from rbsurvey.estimators import evaluate
from rbsurvey.raoblackwell import combine_variance, posterior_weights, retrospective_weights

from conftest import two_strategy_mixture

ORDERED = ConditioningLevel.ORDERED_SAMPLE
REDUCED = ConditioningLevel.REDUCED_SET

Y = [Fraction(1), Fraction(4), Fraction(2), Fraction(9)]
X = [Fraction(1), Fraction(3), Fraction(2), Fraction(5)]
P = [x / sum(X) for x in X]


def _expansion(seq):
    return 4 * sum(Y[u - 1] for u in seq) / len(seq)


def _hh(seq):
    return sum(Y[u - 1] / P[u - 1] for u in seq) / len(seq)


def _seq_prob(seq, probs):
    out = Fraction(1)
    for u in seq:
        out *= probs[u - 1]
    return out


def test_two_strategy_toy_ordered(toy_pop):
    """Hand computation in rationals for the sample (2, 4)."""
    mix = two_strategy_mixture(toy_pop, 2, priors=(0.3, 0.7))
    seq = (2, 4)
    pri = (Fraction(3, 10), Fraction(7, 10))
    joint = (pri[0] * Fraction(1, 16), pri[1] * _seq_prob(seq, P))
    w = [j / sum(joint) for j in joint]
    pts = (_expansion(seq), _hh(seq))
    z = [Y[u - 1] / P[u - 1] for u in seq]
    v = (Fraction(16) * (Y[1] - Y[3]) ** 2 / 2 / 2, (z[0] - z[1]) ** 2 / 2 / 2)
    rb = w[0] * pts[0] + w[1] * pts[1]
    a = w[0] * v[0] + w[1] * v[1]
    b = w[0] * (pts[0] - rb) ** 2 + w[1] * (pts[1] - rb) ** 2

    res = rb_var_estimate(mix, OrderedSample.from_population(seq, toy_pop, "y"), ORDERED)
    np.testing.assert_allclose(res.weights, [float(x) for x in w], rtol=1e-14)
    assert res.point == pytest.approx(float(rb), rel=1e-14)
    assert res.term_a == pytest.approx(float(a), rel=1e-13)
    assert res.term_b == pytest.approx(float(b), rel=1e-13)
    assert res.var_hat == pytest.approx(float(a - b), rel=1e-12)
    assert res.var_hat_fallback_used is False


def _oracle_reduced_rb(units, n, pri):
    """E[preliminary | distinct set] by enumeration over all sequences and both designs."""
    num = den = Fraction(0)
    for seq in itertools.product(range(1, 5), repeat=n):
        if set(seq) != set(units):
            continue
        for prior, probs, est in ((pri[0], [Fraction(1, 4)] * 4, _expansion), (pri[1], P, _hh)):
            j = prior * _seq_prob(seq, probs)
            num += j * est(seq)
            den += j
    return num / den


@pytest.mark.parametrize("units", [(2, 4), (1, 2, 3), (3,), (1, 4)])
def test_reduced_level_matches_enumeration(toy_pop, units):
    n = 3
    mix = two_strategy_mixture(toy_pop, n, priors=(0.25, 0.75))
    oracle = _oracle_reduced_rb(units, n, (Fraction(1, 4), Fraction(3, 4)))
    sample = ReducedSample.from_population(units, toy_pop, "y")
    assert rb_point(mix, sample, REDUCED).point == pytest.approx(float(oracle), rel=1e-13)


def test_ordered_level_rejects_reduced_input(toy_pop):
    mix = two_strategy_mixture(toy_pop, 2)
    with pytest.raises(DomainError):
        rb_point(mix, ReducedSample.from_population([1, 2], toy_pop, "y"), ORDERED)


def test_within_design_expansion_is_set_mean(toy_pop):
    # conditional on the set, E[N * ybar_n] under SRSWR is N * mean over the set
    srs = DesignSpec.srswr(4, 3)
    s = Strategy(srs, EstimatorId.for_design("expansion_total", srs))
    r = ReducedSample.from_population([1, 4], toy_pop, "y")
    assert rb_within_design(s, r) == pytest.approx(4 * (1 + 9) / 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=4), st.floats(0.01, 0.99))
def test_weights_probability_vector_and_convexity(seq, prior):
    pop = Population({"y": [1.0, 4.0, 2.0, 9.0]}, size_measure=[1.0, 3.0, 2.0, 5.0])
    mix = two_strategy_mixture(pop, len(seq), priors=(prior, 1 - prior))
    sample = OrderedSample.from_population(seq, pop, "y")
    for level in (ORDERED, REDUCED):
        res = rb_point(mix, sample, level)
        assert np.all(res.weights >= 0)
        assert res.weights.sum() == pytest.approx(1.0, abs=1e-12)
        lo, hi = res.per_strategy_points.min(), res.per_strategy_points.max()
        assert lo - 1e-9 <= res.point <= hi + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=5), st.sampled_from(["srswr", "ppswr"]))
def test_degenerate_prior_identity(seq, kind):
    pop = Population({"y": [1.0, 4.0, 2.0, 9.0]}, size_measure=[1.0, 3.0, 2.0, 5.0])
    n = len(seq)
    design = DesignSpec.srswr(4, n) if kind == "srswr" else DesignSpec.ppswr(draw_probabilities(pop), n)
    est = EstimatorId.for_design("expansion_total" if kind == "srswr" else "hansen_hurwitz_total", design)
    mix = StrategyMixture.single(Strategy(design, est))
    sample = OrderedSample.from_population(seq, pop, "y")
    direct = evaluate(est, sample)
    res = rb_var_estimate(mix, sample, ORDERED)
    assert res.point == direct.point
    assert res.var_hat == direct.var_hat
    assert not res.var_hat_fallback_used


def test_zero_weight_strategy_gets_zero(toy_pop):
    srs2 = DesignSpec.srswr(4, 2)
    srs3 = DesignSpec.srswr(4, 3)
    mix = StrategyMixture(
        [
            Strategy(srs2, EstimatorId.for_design("expansion_total", srs2), 0.5),
            Strategy(srs3, EstimatorId.for_design("expansion_total", srs3), 0.5),
        ]
    )
    res = rb_var_estimate(mix, OrderedSample.from_population([1, 2, 4], toy_pop, "y"), ORDERED)
    np.testing.assert_array_equal(res.weights, [0.0, 1.0])
    assert res.per_strategy_points[0] == 0.0
    assert res.point == pytest.approx(4 * 14 / 3)


def test_impossible_sample(toy_pop):
    mix = two_strategy_mixture(toy_pop, 2)
    with pytest.raises(ImpossibleSampleError):
        rb_point(mix, OrderedSample.from_population([1, 2, 3], toy_pop, "y"), ORDERED)
    with pytest.raises(ImpossibleSampleError):
        rb_point(mix, ReducedSample.from_population([1, 2, 3], toy_pop, "y"), REDUCED)


def test_mixture_validation(toy_pop):
    srs = DesignSpec.srswr(4, 2)
    est = EstimatorId.for_design("expansion_total", srs)
    with pytest.raises(DomainError):
        StrategyMixture([Strategy(srs, est, 0.5), Strategy(srs, est, 0.4)])
    other = DesignSpec.srswr(5, 2)
    with pytest.raises(DomainError):
        StrategyMixture([Strategy(srs, est, 0.5), Strategy(other, EstimatorId.for_design("expansion_total", other), 0.5)])
    with pytest.raises(DomainError):
        Strategy(srs, est, 0.0)


def test_combine_variance_fallback():
    w = np.array([0.5, 0.5])
    v, fb, a, b = combine_variance(w, np.array([0.0, 10.0]), np.array([1.0, 1.0]), 5.0)
    assert (a, b) == (1.0, 25.0)
    assert fb and v == 1.0


@pytest.mark.parametrize("level", [ORDERED, REDUCED])
@pytest.mark.parametrize("n", [2, 3])
def test_exact_moments_properties(toy_pop, level, n):
    mix = two_strategy_mixture(toy_pop, n, priors=(0.4, 0.6))
    m = exact_mixture_moments(mix, toy_pop, "y", level=level)
    assert m.expectation == pytest.approx(16.0, rel=1e-12)
    assert m.var_rb == pytest.approx(m.var_rb_decomposition, rel=1e-10)
    assert m.var_rb <= m.var_preliminary + 1e-12
    assert m.expected_var_estimate == pytest.approx(m.var_rb, rel=1e-10)
    assert m.expected_var_estimate_with_fallback >= m.expected_var_estimate


def test_exact_moments_degenerate(toy_pop):
    srs = DesignSpec.srswr(4, 3)
    mix = StrategyMixture.single(Strategy(srs, EstimatorId.for_design("expansion_total", srs)))
    m = exact_mixture_moments(mix, toy_pop, "y", level=ORDERED)
    # N^2 sigma^2 / n with sigma^2 the population variance (divisor N)
    y = toy_pop.response("y")
    assert m.var_preliminary == pytest.approx(16 * y.var() / 3, rel=1e-12)
    assert m.var_rb == pytest.approx(m.var_preliminary, rel=1e-12)


# -- unknown sample size ----------------------------------------------------------------


def test_retrospective_single_size_is_preliminary():
    r = ReducedSample([1, 5, 9], np.array([2.0, 3.5, 7.0]))
    res = retrospective_var([6], [1.0], r, 31)
    assert res.point == pathak_var_estimate(r, 31, 6)


def test_retrospective_impossible():
    r = ReducedSample(np.arange(1, 9), np.arange(8.0))
    with pytest.raises(ImpossibleSampleError):
        retrospective_var([5, 6, 7], [1 / 3] * 3, r, 31)


def test_retrospective_hand_assembled():
    sizes = list(range(5, 15))
    raw = [1.0 / k for k in range(1, 11)]
    prior = [v / sum(raw) for v in raw]
    r = ReducedSample([2, 3, 11, 17, 30], np.array([8.3, 8.6, 11.0, 12.9, 18.0]))
    likes = [reduced_sample_prob(DesignSpec.srswr(31, n), r) for n in sizes]
    joint = [p * l for p, l in zip(prior, likes)]
    w = [j / sum(joint) for j in joint]
    expected = sum(wi * pathak_var_estimate(r, 31, n) for wi, n in zip(w, sizes))
    res = retrospective_var(sizes, prior, r, 31)
    assert res.point == pytest.approx(expected, rel=1e-13)
    np.testing.assert_allclose(retrospective_weights(sizes, prior, 5, 31), w, rtol=1e-13)
    # every weight is positive since nu=5 <= every posited size
    assert np.all(res.weights > 0)


def test_posterior_weights_reduced_depend_on_set_only(toy_pop):
    mix = two_strategy_mixture(toy_pop, 4)
    a = posterior_weights(mix, OrderedSample.from_population([1, 2, 2, 1], toy_pop, "y"), REDUCED)
    b = posterior_weights(mix, OrderedSample.from_population([2, 1, 1, 1], toy_pop, "y"), REDUCED)
    np.testing.assert_allclose(a, b, rtol=1e-15)
    full = reduce(OrderedSample.from_population([2, 1, 1, 1], toy_pop, "y"))
    np.testing.assert_allclose(posterior_weights(mix, full, REDUCED), a, rtol=1e-15)
