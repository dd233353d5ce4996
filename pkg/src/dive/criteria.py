"""Uniformity and independence criteria: the two terms of the fitting loss.

The Cramér-von Mises statistic measures the squared L2 distance between
the empirical CDF of the residuals and the standard uniform CDF. The
HSIC statistic (a biased V-statistic computed from Gram matrices)
measures dependence between the probit-transformed residuals and the
instrument.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import ndtri

RESIDUAL_EPS = 1e-6

KERNEL_FAMILIES = ("gaussian", "discrete-indicator")
BANDWIDTH_RULES = ("median-heuristic", "fixed")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its bandwidth rule.

    Gaussian: k(a, b) = exp(-(a - b)^2 / (2 bw^2)); for multi-column
    inputs a product of per-column Gaussians with per-column bandwidths.
    Discrete indicator: k(a, b) = 1(a == b).
    """

    family: str = "gaussian"
    bandwidth: float | tuple | None = None
    rule: str = "median-heuristic"

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.rule not in BANDWIDTH_RULES:
            raise ValueError(f"unknown bandwidth rule {self.rule!r}")
        if self.rule == "fixed" and self.family == "gaussian":
            if self.bandwidth is None:
                raise ValueError("fixed-rule gaussian kernel needs a bandwidth")
            bw = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
            if np.any(bw <= 0):
                raise ValueError("bandwidth must be positive")

    @property
    def resolved(self) -> bool:
        return self.family != "gaussian" or self.rule == "fixed"

    def resolve(self, values) -> "KernelSpec":
        """Pin the bandwidth via the median heuristic on the given values."""
        if self.resolved:
            return self
        cols = _as_columns(values)
        bw = tuple(median_heuristic(cols[:, j]) for j in range(cols.shape[1]))
        bandwidth = bw[0] if len(bw) == 1 else bw
        return replace(self, bandwidth=bandwidth, rule="fixed")

    def gram(self, values) -> np.ndarray:
        """n x n kernel matrix of the values (resolving the bandwidth if needed)."""
        cols = _as_columns(values)
        if self.family == "discrete-indicator":
            out = np.ones((cols.shape[0], cols.shape[0]))
            for j in range(cols.shape[1]):
                out *= cols[:, j, None] == cols[None, :, j]
            return out
        spec = self.resolve(cols)
        bw = np.atleast_1d(np.asarray(spec.bandwidth, dtype=float))
        if bw.size not in (1, cols.shape[1]):
            raise ValueError("bandwidth count does not match input columns")
        if bw.size == 1 and cols.shape[1] > 1:
            bw = np.repeat(bw, cols.shape[1])
        sq = np.subtract.outer(cols[:, 0], cols[:, 0])
        sq /= bw[0]
        np.square(sq, out=sq)
        for j in range(1, cols.shape[1]):
            diff = cols[:, j, None] - cols[None, :, j]
            sq += np.square(diff / bw[j])
        sq *= -0.5
        return np.exp(sq, out=sq)


def _as_columns(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.ndim == 2:
        return arr
    raise ValueError("instrument values must be a vector or a 2-D array")


def median_heuristic(values) -> float:
    """Median of pairwise absolute differences; 1.0 when the median degenerates."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size < 2:
        return 1.0
    med = float(np.median(pdist(arr[:, None], metric="cityblock")))
    return med if med > 0 else 1.0


def clamp_residuals(r, eps: float = RESIDUAL_EPS) -> np.ndarray:
    """Clamp probability-scale residuals strictly inside (0, 1)."""
    r = np.asarray(r, dtype=float)
    return np.clip(r, eps, 1.0 - eps)


def _check_residuals(r) -> np.ndarray:
    r = np.asarray(r, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("empty residual vector")
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals must be finite")
    if np.any(r < 0.0) or np.any(r > 1.0):
        raise ValueError("residuals must lie in [0, 1]")
    return r


def cvm_statistic(r) -> float:
    """Cramér-von Mises distance of the sample to the standard uniform law.

    Equals the integral of (ecdf(u) - u)^2 over [0, 1], evaluated in
    closed form from the order statistics:
    1/(12 n^2) + (1/n) sum_i ((i - 0.5)/n - r_(i))^2.
    """
    r = _check_residuals(r)
    n = r.size
    grid = (np.arange(1, n + 1) - 0.5) / n
    return 1.0 / (12.0 * n * n) + float(np.mean(np.square(grid - np.sort(r))))


def probit_transform(r, eps: float = RESIDUAL_EPS) -> np.ndarray:
    """Standard normal quantile of the residuals, clamped away from {0, 1}."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must be in (0, 0.5)")
    r = np.asarray(r, dtype=float)
    return ndtri(np.clip(r, eps, 1.0 - eps))


def center_gram(K: np.ndarray) -> np.ndarray:
    """Doubly centered Gram matrix H K H with H = I - J/n."""
    row = K.mean(axis=1)
    return K - row[:, None] - row[None, :] + row.mean()


def psd_factor(A: np.ndarray, rel_tol: float = 1e-13, max_rank: int | None = None):
    """Pivoted Cholesky factor F with A ~ F F^T for symmetric PSD A.

    Stops once the residual trace falls below rel_tol times the original
    trace (machine-precision reconstruction for smooth kernel matrices,
    at a rank far below n). Returns None if the rank cap is hit first.
    """
    n = A.shape[0]
    cap = n if max_rank is None else min(n, max_rank)
    diag = np.diagonal(A).astype(float).copy()
    total = float(diag.sum())
    if total <= 0:
        return np.zeros((n, 0))
    threshold = rel_tol * total
    F = np.empty((n, cap))
    for k in range(cap):
        i = int(np.argmax(diag))
        pivot = diag[i]
        if pivot <= 0:
            return F[:, :k]
        col = A[:, i] - F[:, :k] @ F[i, :k]
        F[:, k] = col / np.sqrt(pivot)
        diag -= np.square(F[:, k])
        np.maximum(diag, 0.0, out=diag)
        if float(diag.sum()) <= threshold:
            return F[:, : k + 1]
    return None


def hsic_from_grams(K: np.ndarray, L: np.ndarray) -> float:
    """Biased V-statistic HSIC from two Gram matrices, in O(n^2).

    Algebraically equal to the literal normalized sums
    (1/n^2) sum_ij K_ij L_ij + (1/n^4) sum_ijqr K_ij L_qr
    - (2/n^3) sum_ijq K_ij L_iq; the doubly centered contraction
    trace(HKH L)/n^2 is used because it avoids the cancellation of
    three large terms.
    """
    n = K.shape[0]
    return float(np.sum(center_gram(K) * L)) / n**2


def hsic_statistic(r, z, k_r: KernelSpec | None = None, k_z: KernelSpec | None = None) -> float:
    """HSIC between probit-transformed residuals and the instrument.

    Median-heuristic bandwidths are resolved on the probit-transformed
    residuals and on the raw instrument values respectively.
    """
    r = _check_residuals(r)
    z = _as_columns(z)
    if z.shape[0] != r.size:
        raise ValueError(f"length mismatch: {r.size} residuals vs {z.shape[0]} instruments")
    if r.size < 2:
        raise ValueError("need at least two observations")
    k_r = k_r or KernelSpec()
    k_z = k_z or KernelSpec()
    x = probit_transform(r)
    return hsic_from_grams(k_r.gram(x), k_z.gram(z))


BETA_CHOICES = ("sum", "max")


def div_loss(r, z, lam: float, beta: str = "sum",
             k_r: KernelSpec | None = None, k_z: KernelSpec | None = None) -> float:
    """Aggregate uniformity and weighted independence criteria.

    beta="sum" adds the two terms, beta="max" takes the larger; either is
    zero exactly when both terms are zero.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if beta not in BETA_CHOICES:
        raise ValueError(f"beta must be one of {BETA_CHOICES}")
    a = cvm_statistic(r)
    b = lam * hsic_statistic(r, z, k_r, k_z)
    return a + b if beta == "sum" else max(a, b)
