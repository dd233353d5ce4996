"""Monotone CDF parametrization built from Bernstein basis expansions.

A distribution on a bounded response interval [L, U] is represented as
``F(y) = link(basis(s(y)) @ theta)`` where ``s`` rescales [L, U] onto
[0, 1], ``basis`` is the Bernstein basis of order M and ``theta`` is a
non-decreasing coefficient vector, which makes F monotone. The
unconstrained parametrization (first entry free, increments through
softplus) is what gradient-based fitting operates on.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri

DEFAULT_BOUND = 15.0
SCALER_PADDING = 0.1

_SQRT_2PI = np.sqrt(2.0 * np.pi)


class DegenerateCDFError(ValueError):
    """Raised when an operation needs a strictly increasing CDF but got a flat one."""


class QuantileRangeError(ValueError):
    """Raised when a requested probability level is outside the attained CDF range."""


# ---------------------------------------------------------------------------
# link functions

def _normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _logistic_pdf(x):
    return expit(x) * expit(-x)


def _min_ev_cdf(x):
    # CDF of the minimum extreme value distribution: 1 - exp(-exp(x))
    return -np.expm1(-np.exp(x))


def _min_ev_pdf(x):
    return np.exp(x - np.exp(x))


def _min_ev_quantile(p):
    return np.log(-np.log1p(-np.asarray(p, dtype=float)))


def _max_ev_cdf(x):
    # Gumbel CDF: exp(-exp(-x))
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def _max_ev_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-x - np.exp(-x))


def _max_ev_quantile(p):
    return -np.log(-np.log(np.asarray(p, dtype=float)))


def _normal_dlogpdf(x):
    return -np.asarray(x, dtype=float)


def _logistic_dlogpdf(x):
    return 1.0 - 2.0 * expit(x)


def _min_ev_dlogpdf(x):
    return 1.0 - np.exp(np.asarray(x, dtype=float))


def _max_ev_dlogpdf(x):
    return -1.0 + np.exp(-np.asarray(x, dtype=float))


_LINKS = {
    "standard-normal": (ndtr, _normal_pdf, ndtri, _normal_dlogpdf),
    "standard-logistic": (expit, _logistic_pdf, logit, _logistic_dlogpdf),
    "min-extreme-value": (_min_ev_cdf, _min_ev_pdf, _min_ev_quantile, _min_ev_dlogpdf),
    "max-extreme-value": (_max_ev_cdf, _max_ev_pdf, _max_ev_quantile, _max_ev_dlogpdf),
}

LINK_KINDS = tuple(_LINKS)


@dataclass(frozen=True)
class LinkFunction:
    """A strictly increasing CDF on the reals used to squash the basis expansion."""

    kind: str = "standard-normal"

    def __post_init__(self):
        if self.kind not in _LINKS:
            raise ValueError(f"unknown link {self.kind!r}; choose from {LINK_KINDS}")

    def cdf(self, x):
        return _LINKS[self.kind][0](x)

    def pdf(self, x):
        return _LINKS[self.kind][1](x)

    def quantile(self, p):
        return _LINKS[self.kind][2](p)

    def dlogpdf(self, x):
        """Derivative of the log density, used by likelihood gradients."""
        return _LINKS[self.kind][3](x)


# ---------------------------------------------------------------------------
# response scaling

@dataclass(frozen=True)
class ResponseScaler:
    """Affine map taking the response interval [lower, upper] onto [0, 1]."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("scaler bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    @classmethod
    def from_data(cls, y, padding: float = SCALER_PADDING) -> "ResponseScaler":
        """Bounds covering the data with a margin of ``padding * range`` per side."""
        y = np.asarray(y, dtype=float)
        lo, hi = float(np.min(y)), float(np.max(y))
        span = hi - lo
        if span <= 0:
            span = max(abs(lo), 1.0)
        return cls(lo - padding * span, hi + padding * span)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def scale(self, y):
        """Clamp to [lower, upper] and rescale onto [0, 1]."""
        y = np.clip(np.asarray(y, dtype=float), self.lower, self.upper)
        return (y - self.lower) / self.width


# ---------------------------------------------------------------------------
# Bernstein basis

def _check_basis_args(u, order: int):
    u = np.asarray(u, dtype=float)
    if int(order) < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("basis argument must lie in [0, 1]")
    return u, int(order)


def bernstein_basis(u, order: int) -> np.ndarray:
    """Bernstein basis of the given order evaluated at u in [0, 1].

    Returns an array with trailing dimension order + 1. Entries are
    non-negative and sum to one. Evaluation uses the de Casteljau
    recurrence, which stays stable for large orders because every update
    is a convex combination.
    """
    u, order = _check_basis_args(u, order)
    out = np.zeros(u.shape + (order + 1,))
    out[..., 0] = 1.0
    uu = u[..., None]
    for m in range(1, order + 1):
        out[..., 1 : m + 1] = out[..., 1 : m + 1] * (1.0 - uu) + out[..., 0:m] * uu
        out[..., 0] *= 1.0 - u
    return out


def bernstein_basis_derivative(u, order: int) -> np.ndarray:
    """Componentwise derivative d/du of ``bernstein_basis``; entries sum to zero."""
    u, order = _check_basis_args(u, order)
    if order == 1:
        base = np.ones(u.shape + (1,))
    else:
        base = bernstein_basis(u, order - 1)
    out = np.zeros(u.shape + (order + 1,))
    out[..., 1:] += order * base
    out[..., :-1] -= order * base
    return out


# ---------------------------------------------------------------------------
# coefficients

@dataclass(frozen=True)
class MonotoneCoefficients:
    """Non-decreasing basis coefficients with a sup-norm bound."""

    theta: tuple
    bound: float = DEFAULT_BOUND

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        if len(theta) < 2:
            raise ValueError("need at least order 1, i.e. two coefficients")
        arr = np.asarray(theta)
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        if np.any(np.diff(arr) < 0):
            raise ValueError("coefficients must be non-decreasing")
        if self.bound <= 0:
            raise ValueError("bound must be positive")
        if np.max(np.abs(arr)) >= self.bound:
            raise ValueError("coefficients must be strictly inside (-bound, bound)")

    @property
    def order(self) -> int:
        return len(self.theta) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class UnconstrainedParams:
    """Free parameters mapped onto strictly increasing coefficients by ``constrain``."""

    gamma: tuple

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if len(gamma) < 2:
            raise ValueError("need at least two parameters")
        if not np.all(np.isfinite(np.asarray(gamma))):
            raise ValueError("parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.gamma, dtype=float)


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def inv_softplus(x):
    # log(exp(x) - 1), stable for small and large x
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return x + np.log(-np.expm1(-x))


def constrain_array(gamma: np.ndarray, bound: float = DEFAULT_BOUND):
    """Map free parameters to a strictly increasing, clipped coefficient array.

    Returns (theta, clipped_mask); the mask marks entries moved by the clip
    to (-bound, bound), where the gradient of the map vanishes.
    """
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(gamma)):
        raise ValueError("non-finite unconstrained parameters")
    theta = np.empty_like(gamma)
    theta[0] = gamma[0]
    theta[1:] = gamma[0] + np.cumsum(softplus(gamma[1:]))
    hi = np.nextafter(bound, -np.inf)
    lo = np.nextafter(-bound, np.inf)
    clipped = (theta > hi) | (theta < lo)
    theta = np.clip(theta, lo, hi)
    return theta, clipped


def constrain(g: UnconstrainedParams, bound: float = DEFAULT_BOUND) -> MonotoneCoefficients:
    """Public constrain map; warns when the bound clips any coefficient."""
    theta, clipped = constrain_array(g.as_array(), bound)
    if np.any(clipped):
        warnings.warn(
            f"{int(clipped.sum())} coefficient(s) clipped to (-{bound}, {bound})",
            RuntimeWarning,
            stacklevel=2,
        )
    return MonotoneCoefficients(theta=tuple(theta), bound=bound)


def unconstrain(coeffs: MonotoneCoefficients) -> UnconstrainedParams:
    """Inverse of ``constrain`` for strictly increasing coefficients."""
    theta = coeffs.as_array()
    diffs = np.diff(theta)
    if np.any(diffs <= 0):
        raise DegenerateCDFError("coefficients must be strictly increasing to invert")
    gamma = np.empty_like(theta)
    gamma[0] = theta[0]
    gamma[1:] = inv_softplus(diffs)
    return UnconstrainedParams(gamma=tuple(gamma))


# ---------------------------------------------------------------------------
# the parametric CDF

@dataclass(frozen=True)
class ParametricCDF:
    """Monotone CDF ``y -> link(basis(scale(y)) @ theta)`` on [lower, upper]."""

    scaler: ResponseScaler
    link: LinkFunction
    coeffs: MonotoneCoefficients

    @property
    def order(self) -> int:
        return self.coeffs.order

    def index(self, y):
        """The basis expansion before the link is applied."""
        s = self.scaler.scale(y)
        return bernstein_basis(s, self.order) @ self.coeffs.as_array()

    def to_dict(self) -> dict:
        return {
            "link": self.link.kind,
            "L": self.scaler.lower,
            "U": self.scaler.upper,
            "theta": list(self.coeffs.theta),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "ParametricCDF":
        theta = np.asarray(payload["theta"], dtype=float)
        bound = max(DEFAULT_BOUND, float(np.max(np.abs(theta))) * (1.0 + 1e-9) + 1e-9)
        return cls(
            scaler=ResponseScaler(float(payload["L"]), float(payload["U"])),
            link=LinkFunction(payload["link"]),
            coeffs=MonotoneCoefficients(theta=tuple(theta), bound=bound),
        )

    @classmethod
    def from_json(cls, text: str) -> "ParametricCDF":
        return cls.from_dict(json.loads(text))


def cdf_eval(F: ParametricCDF, y):
    """Evaluate the CDF at y (scalar or array); y is clamped to [lower, upper]."""
    return F.link.cdf(F.index(y))


def cdf_values(cdf_like, y):
    """Evaluate either a ParametricCDF or a plain callable CDF at y."""
    if callable(cdf_like):
        return np.asarray(cdf_like(y), dtype=float)
    return cdf_eval(cdf_like, y)


def pdf_eval(F: ParametricCDF, y):
    """Density of the parametric CDF; only defined on [lower, upper]."""
    y = np.asarray(y, dtype=float)
    if np.any(y < F.scaler.lower) or np.any(y > F.scaler.upper):
        raise ValueError("density is only defined on the response interval")
    s = F.scaler.scale(y)
    theta = F.coeffs.as_array()
    slope = bernstein_basis_derivative(s, F.order) @ theta
    return F.link.pdf(bernstein_basis(s, F.order) @ theta) * slope / F.scaler.width


def quantile(F: ParametricCDF, tau: float) -> float:
    """Invert the CDF by bisection; |cdf(result) - tau| <= 1e-8."""
    theta = F.coeffs.as_array()
    if np.all(theta == theta[0]):
        raise DegenerateCDFError("flat CDF has no inverse")
    tau = float(tau)
    lo, hi = F.scaler.lower, F.scaler.upper
    flo, fhi = float(cdf_eval(F, lo)), float(cdf_eval(F, hi))
    if not flo < tau < fhi:
        raise QuantileRangeError(
            f"level {tau} outside attained range ({flo:.6g}, {fhi:.6g})"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = float(cdf_eval(F, mid))
        if abs(fmid - tau) <= 1e-8:
            return mid
        if fmid < tau:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * max(abs(lo), abs(hi), 1.0):
            break
    mid = 0.5 * (lo + hi)
    if abs(float(cdf_eval(F, mid)) - tau) > 1e-8:
        raise DegenerateCDFError(
            "bisection stalled; CDF is numerically flat near the target level"
        )
    return mid
