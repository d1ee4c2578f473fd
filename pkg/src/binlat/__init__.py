"""Score tests for latent processes in binomial time series regression."""

from .glm import GlmFit, fit_glm, glm_prob_limit, info_matrices
from .latent_test import (
    DEFAULT_GRID,
    DegenerateStatisticError,
    davies_quantile,
    davies_tail,
    q_tau,
    standard_latent_test,
    sup_latent_test,
)
from .marginal import MarginalFit, fit_marginal, marginal_loglik
from .model import LatentKernel, ModelError, ModelParams, ObservationSeries, trend_design
from .serial_test import SerialTestUndefined, serial_dependence_test
from .simulation import DgpSpec, simulate_series

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID",
    "DegenerateStatisticError",
    "DgpSpec",
    "GlmFit",
    "LatentKernel",
    "MarginalFit",
    "ModelError",
    "ModelParams",
    "ObservationSeries",
    "SerialTestUndefined",
    "davies_quantile",
    "davies_tail",
    "fit_glm",
    "fit_marginal",
    "glm_prob_limit",
    "info_matrices",
    "marginal_loglik",
    "q_tau",
    "serial_dependence_test",
    "simulate_series",
    "standard_latent_test",
    "sup_latent_test",
    "trend_design",
]
