"""Monte-Carlo tests behind the two stopping rules of the fitting loop.

Uniformity of the residuals is tested with a Cramér-von Mises statistic
against a simulated null of fresh uniform samples; independence from the
instrument with an HSIC permutation test. Each replicate draws from its
own (seed, replicate) substream, so p-values do not depend on execution
order, and the add-one estimator keeps them strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .criteria import (
    KernelSpec,
    _check_residuals,
    center_gram,
    cvm_statistic,
    probit_transform,
    psd_factor,
)

FACTOR_RANK_CAP = 512

MIN_TEST_SIZE = 5


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    replicates: int
    seed: int


def _add_one_pvalue(null: np.ndarray, observed: float) -> float:
    return (1.0 + int(np.count_nonzero(null >= observed))) / (1.0 + null.size)


def cvm_test(r, replicates: int = 999, seed: int = 0) -> TestResult:
    """Test the residuals for standard uniformity.

    The null distribution is simulated: each replicate draws a fresh
    i.i.d. uniform sample of the same size and recomputes the statistic.
    """
    r = _check_residuals(r)
    n = r.size
    if n < MIN_TEST_SIZE:
        raise ValueError(f"test needs at least {MIN_TEST_SIZE} observations, got {n}")
    if replicates < 99:
        raise ValueError("need at least 99 replicates")
    observed = cvm_statistic(r)
    null = np.empty(replicates)
    for b in range(replicates):
        null[b] = cvm_statistic(substream(seed, b).random(n))
    return TestResult(observed, _add_one_pvalue(null, observed), replicates, seed)


def hsic_perm_test(r, z, permutations: int = 199, seed: int = 0,
                   k_r: KernelSpec | None = None,
                   k_z: KernelSpec | None = None) -> TestResult:
    """Permutation test of independence between residuals and instrument.

    Residuals are permuted against the fixed instrument; the Gram matrix
    of the instrument and the row sums of both Gram matrices are reused
    across permutations, so each replicate costs one O(n^2) contraction.
    """
    r = _check_residuals(r)
    z = np.asarray(z, dtype=float)
    n = r.size
    if (z.shape[0] if z.ndim else 0) != n:
        raise ValueError("residuals and instrument must have equal length")
    if n < MIN_TEST_SIZE:
        raise ValueError(f"test needs at least {MIN_TEST_SIZE} observations, got {n}")
    if permutations < 99:
        raise ValueError("need at least 99 permutations")
    k_r = k_r or KernelSpec()
    k_z = k_z or KernelSpec()

    x = probit_transform(r)
    # Centering commutes with a shared permutation of rows and columns,
    # so the statistic is a contraction of the two centered Grams. Their
    # low-rank pivoted-Cholesky factors (exact to machine precision)
    # turn each replicate into a small matmul instead of an O(n^2) gather.
    kc = center_gram(k_r.resolve(x).gram(x))
    lc = center_gram(k_z.gram(z))
    fk = psd_factor(kc, max_rank=FACTOR_RANK_CAP)
    fl = psd_factor(lc, max_rank=FACTOR_RANK_CAP)

    if fk is not None and fl is not None:
        def stat(perm=None):
            left = fk if perm is None else fk[perm]
            return float(np.sum(np.square(left.T @ fl))) / n**2
    else:  # rank cap exceeded; fall back to the direct contraction
        def stat(perm=None):
            kp = kc if perm is None else kc[np.ix_(perm, perm)]
            return float(np.sum(kp * lc)) / n**2

    observed = stat()
    null = np.empty(permutations)
    for b in range(permutations):
        null[b] = stat(substream(seed, b).permutation(n))
    return TestResult(observed, _add_one_pvalue(null, observed), permutations, seed)
