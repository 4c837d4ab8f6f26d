import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsurvey import (
    DesignSpec,
    DomainError,
    OrderedSample,
    Population,
    ReducedSample,
    brute_force_reduced_prob,
    draw,
    ordered_sample_prob,
    reduce,
    reduced_sample_prob,
)
from rbsurvey.designs import (
    brute_force_reduced_distribution,
    draw_labels,
    realizing_sequences,
    srswr_reduced_prob,
)
from rbsurvey.errors import EnumerationLimitError


def _set(units):
    units = np.asarray(units)
    return ReducedSample(units, np.zeros(units.size))


def _oracle_set_prob(p, n, units):
    """Exact probability by itertools enumeration with rationals."""
    p = [Fraction(v) for v in p]
    target = set(units)
    total = Fraction(0)
    for seq in itertools.product(range(1, len(p) + 1), repeat=n):
        if set(seq) == target:
            term = Fraction(1)
            for u in seq:
                term *= p[u - 1]
            total += term
    return total


# frozen from _oracle_set_prob
def test_srswr_examples():
    d = DesignSpec.srswr(4, 2)
    assert reduced_sample_prob(d, _set([1, 2])) == pytest.approx(0.125, abs=1e-15)
    assert reduced_sample_prob(d, _set([1])) == pytest.approx(0.0625, abs=1e-15)
    assert _oracle_set_prob([Fraction(1, 4)] * 4, 2, [1, 2]) == Fraction(1, 8)


def test_ppswr_example():
    d = DesignSpec.ppswr([0.5, 0.3, 0.2], 2)
    assert reduced_sample_prob(d, _set([1, 2])) == pytest.approx(0.30, abs=1e-12)
    assert brute_force_reduced_prob(d, _set([1, 2])) == pytest.approx(0.30, abs=1e-12)


def test_incompatible_and_invalid_sets():
    d = DesignSpec.srswr(4, 2)
    assert reduced_sample_prob(d, _set([1, 2, 3])) == 0.0
    with pytest.raises(DomainError):
        reduced_sample_prob(DesignSpec.srswr(3, 5), _set([1, 2, 3, 4]))
    with pytest.raises(DomainError):
        reduced_sample_prob(d, _set([1, 7]))


def test_design_validation():
    with pytest.raises(DomainError):
        DesignSpec.srswr(4, 0)
    with pytest.raises(DomainError):
        DesignSpec.ppswr([0.5, 0.6], 2)
    assert DesignSpec.srswr(4, 2).with_draws(3).n_draws == 3


def test_ordered_sample_prob():
    d = DesignSpec.ppswr([0.5, 0.3, 0.2], 3)
    s = OrderedSample([1, 3, 1], np.zeros(3))
    assert ordered_sample_prob(d, s) == pytest.approx(0.5 * 0.2 * 0.5, rel=1e-14)
    assert ordered_sample_prob(d, OrderedSample([1, 3], np.zeros(2))) == 0.0


def test_appendix_reduction():
    s = OrderedSample([2, 3, 1, 1, 4, 2], np.array([20.0, 30, 10, 10, 40, 20]))
    r = reduce(s)
    np.testing.assert_array_equal(r.units, [1, 2, 3, 4])
    np.testing.assert_array_equal(r.responses, [10, 20, 30, 40])
    assert reduce(r) is r


def test_reduced_sample_validation():
    with pytest.raises(DomainError):
        ReducedSample([2, 1], [0.0, 0.0])
    with pytest.raises(DomainError):
        ReducedSample([], [])


@pytest.mark.parametrize("N,n", [(3, 4), (5, 3), (6, 6), (2, 1)])
def test_srswr_closed_form_vs_rational_oracle(N, n):
    for nu in range(1, N + 1):
        exact = _oracle_set_prob([Fraction(1, N)] * N, n, range(1, nu + 1))
        assert srswr_reduced_prob(N, n, nu) == pytest.approx(float(exact), rel=1e-13, abs=0)


def test_large_srswr_is_finite_and_consistent():
    # N=31, n=14: summing C(N, nu) * P(set of size nu) over nu is 1
    total = math.fsum(math.comb(31, nu) * srswr_reduced_prob(31, 14, nu) for nu in range(1, 15))
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_ppswr_matches_oracle(N, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 1.0, size=N)
    p = x / x.sum()
    p[-1] = 1.0 - p[:-1].sum()
    d = DesignSpec.ppswr(p, n)
    dist = brute_force_reduced_distribution(d)
    assert math.fsum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    for mask, prob in dist.items():
        units = [i + 1 for i in range(N) if mask >> i & 1]
        assert reduced_sample_prob(d, _set(units)) == pytest.approx(prob, rel=1e-12, abs=1e-300)


def test_brute_force_limit():
    with pytest.raises(EnumerationLimitError):
        brute_force_reduced_distribution(DesignSpec.srswr(20, 10), limit=1000)


def test_realizing_sequences_count():
    # surjections from 5 draws onto 3 units: 3! * S(5, 3) = 150
    seqs = realizing_sequences(np.array([2, 4, 7]), 5, 10_000)
    assert seqs.shape == (150, 5)
    assert all(set(row) == {2, 4, 7} for row in seqs.tolist())


def test_draw_labels_shape_and_range():
    rng = np.random.default_rng(1)
    lab = draw_labels(DesignSpec.srswr(5, 3), rng, 1000)
    assert lab.shape == (1000, 3)
    assert lab.min() >= 1 and lab.max() <= 5
    lab = draw_labels(DesignSpec.ppswr([0.9, 0.1], 4), rng, 2000)
    assert abs((lab == 1).mean() - 0.9) < 0.02


def test_draw_returns_population_responses():
    pop = Population({"y": [10.0, 20.0, 30.0]})
    s = draw(DesignSpec.srswr(3, 6), pop, "y", np.random.default_rng(3))
    assert s.n == 6
    np.testing.assert_array_equal(s.responses, 10.0 * s.draws)
