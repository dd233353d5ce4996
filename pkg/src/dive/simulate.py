"""Seeded generators for benchmark structural causal models.

Each scenario is an instrumental-variable SCM: instrument z, hidden
confounder h, treatment d = 1(4z + 4h >= noise) and a response whose
interventional CDF under either treatment arm is known in closed form
(scenario 2 needs a one-dimensional quadrature over the confounder).
The rank-example scenario reproduces a model where rank invariance
fails but the interventional CDFs are plain normal distributions; it
carries an uninformative instrument and is meant as a fixture, not as
an estimation benchmark.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, ndtr

from ._rng import substream
from .bernstein import cdf_values
from .data import IVDataset

SCENARIOS = (
    "S1-linear",
    "S2-heteroscedastic",
    "S3-nonlinear",
    "S4-crossing",
    "EX1-rank-example",
)

S2_QUADRATURE_NODES = 128

_S2_NODES, _S2_WEIGHTS = np.polynomial.legendre.leggauss(S2_QUADRATURE_NODES)
_S2_NODES = 0.5 * (_S2_NODES + 1.0)  # map onto (0, 1)
_S2_WEIGHTS = 0.5 * _S2_WEIGHTS


def _standard_logistic(rng: np.random.Generator, size: int) -> np.ndarray:
    # inverse-CDF sampling from the substream's uniforms
    u = np.clip(rng.random(size), 1e-300, None)
    return np.log(u) - np.log1p(-u)


def _check_scenario(scenario: str) -> str:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    return scenario


def _draw(scenario: str, n: int, rng: np.random.Generator):
    if scenario == "EX1-rank-example":
        h = rng.standard_normal(n)
        n_y = rng.standard_normal(n)
        n_d = rng.random(n)
        z = rng.standard_normal(n)  # the model itself has no instrument
        d = (n_d >= 0.2 + 0.6 * (h >= 0)).astype(np.int64)
        y = h - d + d * n_y - (1 - d) * n_y
        return z, d, y

    z = _standard_logistic(rng, n)
    h = _standard_logistic(rng, n)
    n_d = _standard_logistic(rng, n)
    d = (4.0 * z + 4.0 * h >= n_d).astype(np.int64)
    if scenario == "S1-linear":
        y = np.where(d == 1, -2.0, -10.0) + 6.0 * h
    elif scenario == "S2-heteroscedastic":
        n_y = _standard_logistic(rng, n)
        y = 16.0 * d + 6.0 * h + h * n_y
    elif scenario == "S3-nonlinear":
        y = np.logaddexp(0.0, np.where(d == 1, 26.0, 18.0) + 6.0 * h)
    else:  # S4-crossing
        y = np.where(d == 1, 9.0 * h - 6.0, 6.0 * h)
    return z, d, y


def sample(scenario: str, n: int, seed: int) -> IVDataset:
    """Draw n observations; deterministic given the seed.

    If a draw happens to land in a single treatment arm it is redrawn
    from the next substream, so every returned dataset is usable.
    """
    _check_scenario(scenario)
    if n < 1:
        raise ValueError("need n >= 1")
    for attempt in range(128):
        z, d, y = _draw(scenario, n, substream(seed, attempt))
        if d.min() != d.max():
            return IVDataset(z=z, d=d, y=y, z_type="continuous")
    raise RuntimeError(f"could not draw both treatment arms for {scenario} at n={n}")


def _s2_true_cdf(d: int, y: np.ndarray) -> np.ndarray:
    """Interventional CDF of scenario 2 by quadrature over the confounder.

    With u uniform, h = logit(u) follows the confounder's law, so the
    mixture integral becomes a smooth integral over (0, 1).
    """
    c = y[..., None] - 16.0 * d
    h = np.log(_S2_NODES) - np.log1p(-_S2_NODES)
    t = (c - 6.0 * h) / h
    inner = np.where(h > 0, expit(t), expit(-t))
    inner = np.where(h == 0.0, (c >= 0).astype(float), inner)
    return inner @ _S2_WEIGHTS


def _inv_softplus(y: np.ndarray) -> np.ndarray:
    # log(exp(y) - 1) without overflow for large y
    with np.errstate(divide="ignore"):
        return y + np.log(-np.expm1(-y))


def true_cdf(scenario: str, d: int, y):
    """Closed-form interventional CDF of the scenario under treatment d."""
    _check_scenario(scenario)
    if d not in (0, 1):
        raise ValueError("treatment must be 0 or 1")
    y = np.asarray(y, dtype=float)
    if scenario == "S1-linear":
        loc = -2.0 if d == 1 else -10.0
        out = expit((y - loc) / 6.0)
    elif scenario == "S2-heteroscedastic":
        out = _s2_true_cdf(d, y)
    elif scenario == "S3-nonlinear":
        c = 26.0 if d == 1 else 18.0
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = expit((_inv_softplus(y[pos]) - c) / 6.0)
    elif scenario == "S4-crossing":
        out = expit((y + 6.0) / 9.0) if d == 1 else expit(y / 6.0)
    else:  # EX1-rank-example
        shift = 1.0 if d == 1 else 0.0
        out = ndtr((y + shift) / np.sqrt(2.0))
    return out if out.ndim else float(out)


def _pointwise_errors(fhat0, fhat1, scenario: str, data: IVDataset) -> np.ndarray:
    truth = np.where(
        data.d == 1,
        true_cdf(scenario, 1, data.y),
        true_cdf(scenario, 0, data.y),
    )
    fitted = np.where(
        data.d == 1,
        cdf_values(fhat1, data.y),
        cdf_values(fhat0, data.y),
    )
    return truth - fitted


def mse(fhat0, fhat1, scenario: str, data: IVDataset) -> float:
    """Mean squared distance to the true interventional CDF at the sample points."""
    return float(np.mean(np.square(_pointwise_errors(fhat0, fhat1, scenario, data))))


def mae(fhat0, fhat1, scenario: str, data: IVDataset) -> float:
    """Largest absolute distance to the true interventional CDF at the sample points."""
    return float(np.max(np.abs(_pointwise_errors(fhat0, fhat1, scenario, data))))


def sample_gaussian_linear(n: int, seed: int,
                           mu0: float = 0.0, mu1: float = 2.0,
                           h_scale: float = 2.0) -> IVDataset:
    """Linear IV model whose interventional laws are normal with equal variances.

    Used by the loss-landscape command: under either intervention the
    response is N(mu_d, h_scale^2).
    """
    rng = substream(seed, 0)
    z = rng.standard_normal(n)
    h = rng.standard_normal(n)
    n_d = rng.standard_normal(n)
    d = (4.0 * z + 4.0 * h >= n_d).astype(np.int64)
    y = np.where(d == 1, mu1, mu0) + h_scale * h
    return IVDataset(z=z, d=d, y=y, z_type="continuous")
