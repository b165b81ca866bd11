"""Sample minmax predictors for density estimation under logarithmic loss."""

from .errors import *  # noqa: F401,F403
from .experiment import ExperimentConfig, ResultRow, load_config, parse_config, run_experiment
from .gaussian import (
    GaussianDensity,
    LinearGaussianFit,
    ScalarGaussianPredictive,
    linear_smp_bound_mc,
    linear_smp_predict,
    location_minimax,
    location_mle,
    location_smp,
    ols_fit,
    ridge_fit,
    ridge_log_norm_lambda,
    ridge_smp_predict,
)
from .logistic import (
    BernoulliPredictive,
    LogisticFit,
    LogisticSMP,
    logistic_objective,
    newton_fit,
    ridge_smp_lambda_default,
    separation_check,
    smp_predict,
    stability_check,
)
from .montecarlo import RiskEstimate
from .multinomial import (
    CategoricalDensity,
    multinomial_excess_risk_bound,
    multinomial_mle,
    multinomial_smp,
)
from .numerics import (
    SpdFactor,
    degrees_of_freedom,
    quad_form_inv,
    sherman_morrison_leverage,
    spd_factorize,
    trace_inverse,
)
from .risk import excess_risk_mc, kl_categorical, kl_gaussian

__version__ = "0.1.0"
