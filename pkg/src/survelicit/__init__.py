"""survelicit: prior-informed comparison of parametric survival models.

Turns experts' elicited quartile judgements into joint prior distributions
over the parameters of five survival families, computes Monte Carlo model
evidence, Bayes factors, Hellinger-distance dilution weights and posterior
model probabilities, and summarises prior/posterior survival alongside
frequentist information criteria and nonparametric estimators.
"""

from .families import (
    Family,
    ModelParams,
    survival,
    log_density,
    hazard,
    mean_survival,
    median_survival,
    gompertz_mode,
)
from .elicitation import (
    ConstraintSet,
    ElicitedQuantity,
    PriorSpec,
    PriorDraws,
    fit_beta_from_quartiles,
    fit_normal_from_quartiles,
    sample_prior,
    transform_to_params,
    exact_exponential_prior_density,
)

__version__ = "0.1.0"

__all__ = [
    "Family",
    "ModelParams",
    "survival",
    "log_density",
    "hazard",
    "mean_survival",
    "median_survival",
    "gompertz_mode",
    "ConstraintSet",
    "ElicitedQuantity",
    "PriorSpec",
    "PriorDraws",
    "fit_beta_from_quartiles",
    "fit_normal_from_quartiles",
    "sample_prior",
    "transform_to_params",
    "exact_exponential_prior_density",
    "__version__",
]
