import numpy as np
import pytest

from rbsurvey import DesignSpec, EstimatorId, Population, Strategy, StrategyMixture, draw_probabilities

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy_pop():
    """Four units with a response and a size measure."""
    return Population({"y": np.array([1.0, 4.0, 2.0, 9.0])}, size_measure=np.array([1.0, 3.0, 2.0, 5.0]))


def two_strategy_mixture(pop: Population, n: int, priors=(0.3, 0.7)) -> StrategyMixture:
    """SRSWR + expansion and PPSWR + Hansen-Hurwitz at ``n`` draws."""
    srs = DesignSpec.srswr(pop.N, n)
    pps = DesignSpec.ppswr(draw_probabilities(pop), n)
    return StrategyMixture(
        [
            Strategy(srs, EstimatorId.for_design("expansion_total", srs), priors[0], "srs"),
            Strategy(pps, EstimatorId.for_design("hansen_hurwitz_total", pps), priors[1], "pps"),
        ]
    )


@pytest.fixture
def mixture_factory():
    return two_strategy_mixture
