"""Certified convergence diagnostics for Sinkhorn's algorithm on the line."""

from .config import ConfigError, ExperimentConfig, parse_config
from .coupling import conditional_coupling_check, randomized_suite, pair_coupling_check
from .experiment import NumericalFailure, prepare, run, verify, verify_files
from .measures import Marginal1D, gaussian, make_marginal, perturbed_gaussian
from .oracle import GaussianEOT, solve_gaussian
from .rates import RateCertificate, RateParams, certify

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "GaussianEOT",
    "Marginal1D",
    "NumericalFailure",
    "RateCertificate",
    "RateParams",
    "certify",
    "conditional_coupling_check",
    "gaussian",
    "make_marginal",
    "parse_config",
    "perturbed_gaussian",
    "prepare",
    "randomized_suite",
    "run",
    "solve_gaussian",
    "pair_coupling_check",
    "verify",
    "verify_files",
]
