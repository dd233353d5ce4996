"""Interventional CDF estimation from instrumental-variable data.

The fitting loop alternates gradient-based minimization of the combined
uniformity/independence loss with two stopping tests on the resulting
probability-integral-transform residuals. When either test rejects, the
independence weight is adapted multiplicatively (step nu/t at restart t)
and the optimization restarts warm. The per-arm maximum-likelihood fit
of the conditional CDFs on the same basis doubles as the biased
observational baseline and provides the initial weight and warm start.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from ._rng import derive_seed
from .bernstein import (
    DEFAULT_BOUND,
    LinkFunction,
    MonotoneCoefficients,
    ParametricCDF,
    ResponseScaler,
    UnconstrainedParams,
    bernstein_basis,
    bernstein_basis_derivative,
    cdf_values,
    constrain_array,
    inv_softplus,
)
from .criteria import KernelSpec, clamp_residuals, cvm_statistic, hsic_statistic
from .data import IVDataset
from .optimizer import OptimizerConfig, OptTrace, _grad_through_constrain, minimize
from .stat_tests import cvm_test, hsic_perm_test

LAMBDA_FLOOR = 1e-12


class FitError(RuntimeError):
    """Raised when a maximum-likelihood fit cannot be carried out."""


@dataclass(frozen=True)
class DiveConfig:
    """Settings of the full fitting algorithm."""

    order: int = 50
    alpha: float = 0.1
    max_restarts: int = 10
    nu: float = 5.0
    link: LinkFunction = LinkFunction()
    beta: str = "sum"
    bound: float = DEFAULT_BOUND
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    cvm_replicates: int = 999
    hsic_permutations: int = 199
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_restarts < 1:
            raise ValueError("need at least one restart")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "alpha": self.alpha,
            "max_restarts": self.max_restarts,
            "nu": self.nu,
            "link": self.link.kind,
            "beta": self.beta,
            "bound": self.bound,
            "learning_rate": self.optimizer.learning_rate,
            "max_epochs": self.optimizer.max_epochs,
            "cvm_replicates": self.cvm_replicates,
            "hsic_permutations": self.hsic_permutations,
            "seed": self.seed,
        }


@dataclass
class DiveFit:
    """Fitted pair of interventional CDFs plus the fitting diagnostics."""

    cdf0: ParametricCDF
    cdf1: ParametricCDF
    lambda_final: float
    p_uniform: float
    p_independent: float
    converged: bool
    restarts_used: int
    lambda_path: list
    traces: list

    def to_dict(self, config: DiveConfig | None = None) -> dict:
        payload = {
            "converged": self.converged,
            "lambda_final": self.lambda_final,
            "p_uniform": self.p_uniform,
            "p_independent": self.p_independent,
            "restarts_used": self.restarts_used,
            "lambda_path": list(self.lambda_path),
            "cdf0": self.cdf0.to_dict(),
            "cdf1": self.cdf1.to_dict(),
            "trace": [
                {
                    "restart": t + 1,
                    "lambda": self.lambda_path[t],
                    "epochs": int(trace.stopped_epoch),
                    "stop_reason": trace.stop_reason,
                    "losses": [float(v) for v in trace.losses],
                }
                for t, trace in enumerate(self.traces)
            ],
        }
        if config is not None:
            payload["config"] = config.to_dict()
        return payload


def instrument_kernel(data: IVDataset) -> KernelSpec:
    """Kernel matched to the instrument's sample space."""
    if data.z_type == "discrete":
        return KernelSpec(family="discrete-indicator")
    return KernelSpec(family="gaussian", rule="median-heuristic")


def ipit_residuals(cdf0, cdf1, data: IVDataset) -> np.ndarray:
    """Clamped CDF values under the observed treatment, one per observation."""
    r = np.where(
        data.d == 1,
        cdf_values(cdf1, data.y),
        cdf_values(cdf0, data.y),
    )
    return clamp_residuals(r)


def _ramp_gamma(order: int, low: float = -2.0, high: float = 2.0) -> np.ndarray:
    """Free parameters whose coefficients are equally spaced over [low, high]."""
    gamma = np.empty(order + 1)
    gamma[0] = low
    gamma[1:] = inv_softplus((high - low) / order)
    return gamma


def _negative_log_likelihood(gamma, basis, dbasis, link, width, bound):
    theta, clipped = constrain_array(gamma, bound)
    index = basis @ theta
    slope = np.maximum(dbasis @ theta, 1e-300)
    value = -float(np.sum(np.log(link.pdf(index)) + np.log(slope) - np.log(width)))
    d_index = link.dlogpdf(index)
    grad_theta = -(basis.T @ d_index + dbasis.T @ (1.0 / slope))
    return value, _grad_through_constrain(grad_theta, gamma, clipped)


def _fit_arm_gamma(y_arm: np.ndarray, order: int, link: LinkFunction,
                   scaler: ResponseScaler, bound: float) -> np.ndarray:
    if y_arm.size < order / 2:
        warnings.warn(
            f"arm has {y_arm.size} observations for order {order}; "
            "the conditional fit is underdetermined",
            RuntimeWarning,
            stacklevel=3,
        )
    if np.ptp(y_arm) == 0:
        raise FitError("degenerate arm: all responses equal")
    s = scaler.scale(y_arm)
    basis = bernstein_basis(s, order)
    dbasis = bernstein_basis_derivative(s, order)
    x0 = _ramp_gamma(order)
    result = scipy.optimize.minimize(
        _negative_log_likelihood,
        x0,
        args=(basis, dbasis, link, scaler.width, bound),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500},
    )
    return np.asarray(result.x, dtype=float)


def _cdf_from_gamma(gamma, scaler, link, bound) -> ParametricCDF:
    theta, _ = constrain_array(np.asarray(gamma, dtype=float), bound)
    return ParametricCDF(
        scaler=scaler,
        link=link,
        coeffs=MonotoneCoefficients(theta=tuple(theta), bound=bound),
    )


def fit_ccdf_mle(data: IVDataset, order: int,
                 link: LinkFunction | None = None,
                 bound: float = DEFAULT_BOUND,
                 scaler: ResponseScaler | None = None):
    """Per-arm maximum-likelihood conditional CDFs on the monotone basis.

    This is the observational baseline: biased under confounding but a
    good warm start and weight calibration for the instrumented fit.
    """
    link = link or LinkFunction()
    scaler = scaler or ResponseScaler.from_data(data.y)
    gammas = [
        _fit_arm_gamma(data.arm(d), order, link, scaler, bound) for d in (0, 1)
    ]
    return tuple(_cdf_from_gamma(g, scaler, link, bound) for g in gammas)


def _lambda_from_stats(cvm: float, hsic: float) -> float:
    """Weight making the two loss terms the same size; 1.0 if there is no dependence."""
    if hsic <= LAMBDA_FLOOR:
        return 1.0
    return cvm / max(hsic, LAMBDA_FLOOR)


def initialize_lambda(data: IVDataset, config: DiveConfig) -> float:
    """Balance the two loss terms at the conditional maximum-likelihood fit."""
    cdf0, cdf1 = fit_ccdf_mle(data, config.order, config.link, config.bound)
    r = ipit_residuals(cdf0, cdf1, data)
    k_z = instrument_kernel(data)
    return _lambda_from_stats(cvm_statistic(r), hsic_statistic(r, data.z, KernelSpec(), k_z))


def next_lambda(lam: float, p_uniform: float, p_independent: float, nu_t: float) -> float:
    """Multiplicative weight update driven by whichever test rejects harder."""
    if p_independent <= p_uniform:
        return lam * (1.0 + nu_t)
    return lam / (1.0 + nu_t)


def dive_fit(data: IVDataset, config: DiveConfig | None = None) -> DiveFit:
    """Run the full estimation loop and return the fitted pair with diagnostics.

    A fit that exhausts all restarts is returned with converged=False;
    treat such an estimate with care.
    """
    config = config or DiveConfig()
    scaler = ResponseScaler.from_data(data.y)
    k_z = instrument_kernel(data).resolve(data.z)
    k_r = KernelSpec()

    try:
        g0, g1 = [
            _fit_arm_gamma(data.arm(d), config.order, config.link, scaler, config.bound)
            for d in (0, 1)
        ]
    except FitError as exc:
        warnings.warn(f"conditional warm start failed ({exc}); using ramp init",
                      RuntimeWarning, stacklevel=2)
        g0 = _ramp_gamma(config.order)
        g1 = _ramp_gamma(config.order)
    cdf0 = _cdf_from_gamma(g0, scaler, config.link, config.bound)
    cdf1 = _cdf_from_gamma(g1, scaler, config.link, config.bound)
    r = ipit_residuals(cdf0, cdf1, data)
    lam = _lambda_from_stats(cvm_statistic(r), hsic_statistic(r, data.z, k_r, k_z))

    lambda_path = []
    traces = []
    converged = False
    p_uniform = p_independent = float("nan")
    restarts_used = config.max_restarts
    for t in range(1, config.max_restarts + 1):
        params0, params1, trace = minimize(
            config.optimizer, data, lam, (g0, g1), config.beta,
            k_r=k_r, k_z=k_z, link=config.link, scaler=scaler, bound=config.bound,
        )
        g0 = params0.as_array()
        g1 = params1.as_array()
        cdf0 = _cdf_from_gamma(g0, scaler, config.link, config.bound)
        cdf1 = _cdf_from_gamma(g1, scaler, config.link, config.bound)
        r = ipit_residuals(cdf0, cdf1, data)
        p_uniform = cvm_test(
            r, config.cvm_replicates, seed=derive_seed(config.seed, t, 0)
        ).p_value
        p_independent = hsic_perm_test(
            r, data.z, config.hsic_permutations,
            seed=derive_seed(config.seed, t, 1), k_r=k_r, k_z=k_z,
        ).p_value
        lambda_path.append(lam)
        traces.append(trace)
        if min(p_uniform, p_independent) > config.alpha:
            converged = True
            restarts_used = t
            break
        lam = next_lambda(lam, p_uniform, p_independent, config.nu / t)

    return DiveFit(
        cdf0=cdf0,
        cdf1=cdf1,
        lambda_final=lambda_path[-1],
        p_uniform=p_uniform,
        p_independent=p_independent,
        converged=converged,
        restarts_used=restarts_used,
        lambda_path=lambda_path,
        traces=traces,
    )
