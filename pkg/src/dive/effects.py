"""Plug-in causal effect curves computed from two fitted CDFs.

All effects contrast the treated and untreated interventional CDFs on a
chosen scale: the CDF difference, the quantile difference, the
horizontal (response-scale) difference, the log-odds difference, and
the average effect obtained by integrating the CDFs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logit

from .bernstein import ParametricCDF, QuantileRangeError, cdf_eval, quantile
from .criteria import RESIDUAL_EPS

EFFECT_KINDS = ("DTE", "QTE", "DOK", "LogitCE")

DEFAULT_Y_POINTS = 201
DEFAULT_TAU_GRID = np.round(np.arange(0.05, 0.9501, 0.01), 10)
ACE_GRID_POINTS = 512


@dataclass(frozen=True)
class EffectCurve:
    """An effect evaluated on a grid (y values or probability levels)."""

    abscissa: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        abscissa = np.asarray(self.abscissa, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if abscissa.shape != values.shape or abscissa.ndim != 1:
            raise ValueError("abscissa and values must be equal-length vectors")
        if np.any(np.diff(abscissa) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        if self.kind not in EFFECT_KINDS:
            raise ValueError(f"kind must be one of {EFFECT_KINDS}")
        abscissa.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "abscissa", abscissa)
        object.__setattr__(self, "values", values)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "abscissa": [float(a) for a in self.abscissa],
            "values": [None if not np.isfinite(v) else float(v) for v in self.values],
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["abscissa", "value"])
            for a, v in zip(self.abscissa, self.values):
                writer.writerow([repr(float(a)), repr(float(v))])


def _check_common_scale(cdf0: ParametricCDF, cdf1: ParametricCDF):
    s0, s1 = cdf0.scaler, cdf1.scaler
    if s0.lower != s1.lower or s0.upper != s1.upper:
        raise ValueError(
            f"mismatched response scalers: [{s0.lower}, {s0.upper}] vs "
            f"[{s1.lower}, {s1.upper}]"
        )
    return s0


def default_y_grid(cdf0: ParametricCDF, cdf1: ParametricCDF,
                   points: int = DEFAULT_Y_POINTS) -> np.ndarray:
    scaler = _check_common_scale(cdf0, cdf1)
    return np.linspace(scaler.lower, scaler.upper, points)


def dte(cdf0: ParametricCDF, cdf1: ParametricCDF, grid=None) -> EffectCurve:
    """CDF difference F1(y) - F0(y); a risk difference varying with y."""
    _check_common_scale(cdf0, cdf1)
    grid = default_y_grid(cdf0, cdf1) if grid is None else np.asarray(grid, dtype=float)
    return EffectCurve(grid, cdf_eval(cdf1, grid) - cdf_eval(cdf0, grid), "DTE")


def qte(cdf0: ParametricCDF, cdf1: ParametricCDF, tau_grid=None) -> EffectCurve:
    """Quantile difference Q1(tau) - Q0(tau) by inverting both CDFs."""
    _check_common_scale(cdf0, cdf1)
    taus = DEFAULT_TAU_GRID if tau_grid is None else np.asarray(tau_grid, dtype=float)
    values = np.array([quantile(cdf1, t) - quantile(cdf0, t) for t in taus])
    return EffectCurve(taus, values, "QTE")


def dok(cdf0: ParametricCDF, cdf1: ParametricCDF, grid=None) -> EffectCurve:
    """Horizontal difference Q0(F1(y)) - y on the response scale.

    Grid points where F1(y) leaves the attained range of F0 are masked
    with NaN instead of raising, so the curve stays plottable.
    """
    _check_common_scale(cdf0, cdf1)
    grid = default_y_grid(cdf0, cdf1) if grid is None else np.asarray(grid, dtype=float)
    levels = cdf_eval(cdf1, grid)
    values = np.full(grid.shape, np.nan)
    for i, (y, level) in enumerate(zip(grid, levels)):
        try:
            values[i] = quantile(cdf0, level) - y
        except QuantileRangeError:
            pass
    return EffectCurve(grid, values, "DOK")


def logit_ce(cdf0: ParametricCDF, cdf1: ParametricCDF, grid=None,
             eps: float = RESIDUAL_EPS) -> EffectCurve:
    """Log-odds difference logit(F1(y)) - logit(F0(y)), CDF values clamped."""
    _check_common_scale(cdf0, cdf1)
    grid = default_y_grid(cdf0, cdf1) if grid is None else np.asarray(grid, dtype=float)
    f0 = np.clip(cdf_eval(cdf0, grid), eps, 1.0 - eps)
    f1 = np.clip(cdf_eval(cdf1, grid), eps, 1.0 - eps)
    return EffectCurve(grid, logit(f1) - logit(f0), "LogitCE")


def interventional_mean(cdf: ParametricCDF, points: int = ACE_GRID_POINTS) -> float:
    """E[Y] of a CDF supported on [lower, upper]: upper - integral of the CDF."""
    scaler = cdf.scaler
    grid = np.linspace(scaler.lower, scaler.upper, points)
    return scaler.upper - float(np.trapz(cdf_eval(cdf, grid), grid))


def ace(cdf0: ParametricCDF, cdf1: ParametricCDF, points: int = ACE_GRID_POINTS) -> float:
    """Average effect: difference of the interventional means by quadrature."""
    _check_common_scale(cdf0, cdf1)
    return interventional_mean(cdf1, points) - interventional_mean(cdf0, points)
