"""Design-based inference over a randomly selected sampling strategy.

Rao-Blackwellized estimators across with-replacement designs, closed-form
probabilities of distinct-unit sample sets, and seeded Monte Carlo studies.
"""

from .designs import (
    DesignKind,
    DesignSpec,
    OrderedSample,
    ReducedSample,
    brute_force_reduced_prob,
    draw,
    ordered_sample_prob,
    reduce,
    reduced_sample_prob,
)
from .errors import (
    DomainError,
    EnumerationLimitError,
    FixtureError,
    ImpossibleSampleError,
    ParseError,
    RBSurveyError,
    SchemaError,
    StudyError,
    UndefinedVarianceError,
)
from .estimators import (
    EstimatorId,
    EstimatorKind,
    PointAndVar,
    effective_sample_mean,
    expansion_total,
    hansen_hurwitz_total,
    pathak_factor,
    pathak_var,
    pathak_var_estimate,
)
from .population import (
    DrawProbabilities,
    Population,
    draw_probabilities,
    load_fixture,
    load_population,
    population_mean,
    population_total,
)
from .raoblackwell import (
    ConditioningLevel,
    RBResult,
    Strategy,
    StrategyMixture,
    exact_mixture_moments,
    rb_point,
    rb_var_estimate,
    rb_within_design,
    retrospective_var,
)

__version__ = "0.1.0"
