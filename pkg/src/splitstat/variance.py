"""Variance estimators for full-sample and block-distributed U-statistics.

Four estimators live here: the leave-one-out jackknife for the Gini mean
difference (full sample and its size-weighted distributed aggregate), the
plug-in estimate of the first-projection variance built from per-block
Hoeffding projections, and the sample variance of bootstrap replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BlockPartition,
    DataTable,
    InsufficientSampleError,
    InvalidArgumentError,
)
from .symstat import Kernel, _pair_row_sums, _rows_of, gini_kernel, hoeffding_alpha_hat


class InsufficientReplicatesError(ValueError):
    """A bootstrap result holds too few replicates for the request."""


@dataclass(frozen=True)
class VarianceEstimate:
    """A nonnegative variance estimate with its method label and any
    per-block components it was aggregated from."""

    value: float
    method: str
    components: np.ndarray | None = None

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise InvalidArgumentError(
                f"variance estimate must be nonnegative, got {self.value}"
            )


def _as_vector(sample) -> np.ndarray:
    rows = _rows_of(sample)
    if rows.shape[1] != 1:
        raise InvalidArgumentError(
            f"expected a 1-D sample, got row dimension {rows.shape[1]}"
        )
    return rows[:, 0]


def _gini_jackknife_s2(x: np.ndarray) -> float:
    """S^2 for the Gini mean difference on a 1-D array (length >= 3).

    Algebraically S^2 = 4 (n-1) (n-2)^-2 sum_i (q_i - U)^2 with row means
    q_i = (n-1)^-1 sum_{j != i} |x_i - x_j|, but it is evaluated over the
    common denominator,

        S^2 = 4 sum_i (n r_i - R)^2 / ((n-2)^2 n^2 (n-1)),

    with raw row sums r_i and R = sum_i r_i.  Clearing denominators before
    squaring keeps small-integer samples exact in floating point (the whole
    numerator is integer arithmetic there), which plain q_i - U differences do
    not achieve.
    """
    n = x.size
    r = _pair_row_sums(gini_kernel(), x.reshape(-1, 1))
    R = math.fsum(r.tolist())
    dev = n * r - R
    num = 4.0 * math.fsum((dev * dev).tolist())
    return num / ((n - 2) ** 2 * n * n * (n - 1))


def jackknife_gini_variance(sample) -> tuple[float, float]:
    """Leave-one-out jackknife for the Gini mean difference U_N.

    Returns ``(S2, var_hat)`` where ``S2`` estimates the asymptotic variance
    parameter (``4 zeta_1`` for nondegenerate kernels) and
    ``var_hat = S2 / N`` estimates Var(U_N).

    Raises
    ------
    InsufficientSampleError
        If N < 3 (the estimator divides by N - 2).
    """
    x = _as_vector(sample)
    n = x.size
    if n < 3:
        raise InsufficientSampleError(f"jackknife needs N >= 3, got {n}")
    s2 = _gini_jackknife_s2(x)
    return s2, s2 / n


def distributed_jackknife_variance(
    table, partition: BlockPartition
) -> VarianceEstimate:
    """Size-weighted aggregate of per-block jackknife S^2 for the Gini
    statistic: ``S2 = N^-1 sum_k n_k S2_k``, reported as the variance
    estimate ``value = S2 / N`` for the distributed statistic.

    ``components`` holds the per-block ``S2_k``.  With K = 1 this reduces
    exactly to :func:`jackknife_gini_variance`'s ``var_hat``.

    Raises
    ------
    InsufficientSampleError
        Naming the first block with fewer than 3 rows.
    """
    x = _as_vector(table)
    if partition.N != x.size:
        raise InvalidArgumentError(
            f"partition covers {partition.N} rows, sample has {x.size}"
        )
    small = np.flatnonzero(partition.sizes < 3)
    if small.size:
        k = int(small[0])
        raise InsufficientSampleError(
            f"block {k} has {int(partition.sizes[k])} rows; jackknife needs >= 3"
        )
    s2_blocks = np.empty(partition.K)
    for k in range(partition.K):
        s2_blocks[k] = _gini_jackknife_s2(x[partition.block_rows(k)])
    n_tot = float(partition.N)
    if partition.K == 1:
        # bit-identical to the full-sample jackknife (n * S2 / n can round)
        s2 = float(s2_blocks[0])
    else:
        s2 = math.fsum(
            float(partition.sizes[k]) * s2_blocks[k] for k in range(partition.K)
        ) / n_tot
    return VarianceEstimate(
        value=s2 / n_tot, method="distributed-jackknife", components=s2_blocks
    )


def sigma_alpha_hat(table, partition: BlockPartition, kernel: Kernel) -> float:
    """Plug-in estimate of the first-projection variance sigma_alpha^2.

    Per block, the empirical projections a_i from
    :func:`splitstat.symstat.hoeffding_alpha_hat` give the block mean square
    ``n_k^-1 sum_i a_i^2``; these are combined by the size-weighted mean,
    which collapses to ``N^-1 sum_k sum_i a_{k,i}^2``.

    Zero exactly on constant data.  Degree and minimum-block-size errors
    propagate from the projection routine.
    """
    rows = _rows_of(table)
    if partition.N != rows.shape[0]:
        raise InvalidArgumentError(
            f"partition covers {partition.N} rows, table has {rows.shape[0]}"
        )
    block_sums = []
    for k in range(partition.K):
        a = hoeffding_alpha_hat(rows[partition.block_rows(k)], kernel)
        block_sums.append(math.fsum((a * a).tolist()))
    return math.fsum(block_sums) / float(partition.N)


def bootstrap_sample_variance(result) -> float:
    """Sample variance of the uncentered bootstrap statistics T*_b, with
    divisor B (population convention): ``B^-1 sum_b (T*_b - mean)^2``.

    For the distributed bootstrap this estimates Var of the aggregated
    statistic (~ N^-1 sigma_alpha^2 in the nondegenerate case).

    Raises
    ------
    InsufficientReplicatesError
        If fewer than 2 replicate statistics are present.
    """
    raw = np.asarray(result.raw_statistics, dtype=float)
    b = raw.size
    if b < 2:
        raise InsufficientReplicatesError(
            f"sample variance needs at least 2 replicates, got {b}"
        )
    mean = math.fsum(raw.tolist()) / b
    dev = raw - mean
    return math.fsum((dev * dev).tolist()) / b
