"""Distributional instrumental-variable estimation.

Estimates the interventional CDFs of a response under a binary treatment
from (instrument, treatment, response) data by minimizing a combined
uniformity/independence loss over monotone Bernstein-parametrized CDFs,
and derives causal effect curves on several scales from the fitted pair.
"""

__version__ = "0.1.0"

from .bernstein import (
    DegenerateCDFError,
    LinkFunction,
    MonotoneCoefficients,
    ParametricCDF,
    QuantileRangeError,
    ResponseScaler,
    UnconstrainedParams,
    bernstein_basis,
    bernstein_basis_derivative,
    cdf_eval,
    constrain,
    pdf_eval,
    quantile,
    unconstrain,
)
from .criteria import KernelSpec, cvm_statistic, div_loss, hsic_statistic, probit_transform
from .data import IVDataset, infer_z_type
from .effects import EffectCurve, ace, dok, dte, logit_ce, qte
from .estimator import (
    DiveConfig,
    DiveFit,
    FitError,
    dive_fit,
    fit_ccdf_mle,
    initialize_lambda,
    ipit_residuals,
    next_lambda,
)
from .optimizer import OptimizerConfig, OptTrace, loss_and_gradient
from .simulate import SCENARIOS, mae, mse, sample, true_cdf
from .stat_tests import TestResult, cvm_test, hsic_perm_test

__all__ = [
    "__version__",
    "DegenerateCDFError",
    "LinkFunction",
    "MonotoneCoefficients",
    "ParametricCDF",
    "QuantileRangeError",
    "ResponseScaler",
    "UnconstrainedParams",
    "bernstein_basis",
    "bernstein_basis_derivative",
    "cdf_eval",
    "constrain",
    "pdf_eval",
    "quantile",
    "unconstrain",
    "KernelSpec",
    "cvm_statistic",
    "div_loss",
    "hsic_statistic",
    "probit_transform",
    "IVDataset",
    "infer_z_type",
    "EffectCurve",
    "ace",
    "dok",
    "dte",
    "logit_ce",
    "qte",
    "DiveConfig",
    "DiveFit",
    "FitError",
    "dive_fit",
    "fit_ccdf_mle",
    "initialize_lambda",
    "ipit_residuals",
    "next_lambda",
    "OptimizerConfig",
    "OptTrace",
    "loss_and_gradient",
    "SCENARIOS",
    "mae",
    "mse",
    "sample",
    "true_cdf",
    "TestResult",
    "cvm_test",
    "hsic_perm_test",
]
