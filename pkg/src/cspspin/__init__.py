"""Random Max-CSPs, their mean-field spin glasses, and the zero-temperature Parisi formula."""

from .predicates import (
    FAMILIES,
    FourierSpectrum,
    MixturePolynomial,
    Predicate,
    PredicateDistribution,
    PredicateError,
    builtin_predicate,
    eval_predicate,
    load_predicate,
    mixture,
    mixture_of,
    mixture_of_distribution,
    noise_stability,
    walsh_transform,
)
from .parisi import (
    GridError,
    OptimizerOptions,
    OrderParameter,
    ParisiError,
    ParisiEvaluation,
    ParisiGrid,
    csp_value_formula,
    evaluate_parisi,
    minimize_alg,
    minimize_gsed,
    rs_value,
)

__version__ = "0.1.0"
