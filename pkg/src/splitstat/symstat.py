"""Full-sample and block-distributed U-statistics with pluggable kernels.

The central object is :class:`Kernel`: a symmetric function of ``degree`` rows.
``u_stat`` averages it over all index subsets of that size, ``u_stat_weighted``
does the same over an inflated multiset given integer weights (without ever
expanding it), and ``distributed_u_stat`` evaluates per block and aggregates by
the size-weighted mean.

Degree-2 kernels may carry a vectorized ``pairwise`` hook returning the cross
matrix ``H[i, j] = h(x_i, y_j)``; the evaluators then run in chunked O(n^2)
array code instead of Python loops.  The arithmetic is the same either way:
the pair enumeration is exhaustive, merely batched.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    BlockPartition,
    DataTable,
    InsufficientSampleError,
    InvalidArgumentError,
    _as_matrix,
)

# Cap on elements per pairwise chunk (~128 MB of float64).
_CHUNK_ELEMS = 1 << 24

_MAX_DEGREE = 4


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel of a U-statistic.

    Parameters
    ----------
    degree : int
        Number of arguments m, 1 <= m <= 4.  Higher degrees are rejected at
        construction: exhaustive subset enumeration beyond m = 4 is
        combinatorially hopeless and nothing here needs it.
    func : callable
        ``func(row_1, ..., row_m) -> float``; must be invariant under any
        permutation of its arguments (checked by the test suite, not at
        runtime).
    name : str
        Label used in reports.
    pairwise : callable, optional
        Degree-2 fast path: ``pairwise(X, Y) -> H`` with
        ``H[i, j] = func(X[i], Y[j])`` for row matrices X, Y.
    """

    degree: int
    func: Callable[..., float]
    name: str = ""
    pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 1 <= self.degree <= _MAX_DEGREE:
            raise InvalidArgumentError(
                f"kernel degree must be in 1..{_MAX_DEGREE}, got {self.degree}"
            )


@dataclass(frozen=True)
class DistributedEstimate:
    """Per-block statistic values and their size-weighted aggregate."""

    per_block: np.ndarray
    sizes: np.ndarray
    aggregate: float

    @property
    def K(self) -> int:
        return int(self.per_block.size)

    @property
    def N(self) -> int:
        return int(self.sizes.sum())


def _rows_of(data) -> np.ndarray:
    if isinstance(data, DataTable):
        return data.values
    return _as_matrix(data)


def _pair_sum(kernel: Kernel, rows: np.ndarray) -> float:
    """Sum of h over unordered pairs i < j, chunked triangular evaluation."""
    n = rows.shape[0]
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    parts = []
    for i0 in range(0, n, step):
        i1 = min(i0 + step, n)
        h = kernel.pairwise(rows[i0:i1], rows[:i1])
        # columns < i0 pair each chunk row with every earlier row; the
        # trailing square needs its strict lower triangle only.
        parts.append(float(h[:, :i0].sum()))
        parts.append(float(np.tril(h[:, i0:], k=-1).sum()))
    return math.fsum(parts)


def _canonical_order(rows: np.ndarray) -> np.ndarray:
    """Row order sorted by value (lexicographically across columns)."""
    return np.lexsort(rows.T[::-1])


def _pair_row_sums(kernel: Kernel, rows: np.ndarray) -> np.ndarray:
    """Row sums s_i = sum_j h(x_i, x_j) over ALL j (diagonal included).

    The j summation runs in value-sorted order, so each s_i — and everything
    derived from it — is bit-identical under any permutation of the input
    rows (floating-point addition is order-sensitive, so a canonical order is
    the only way to honour that)."""
    n = rows.shape[0]
    cols = rows[_canonical_order(rows)]
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    s = np.empty(n)
    for i0 in range(0, n, step):
        i1 = min(i0 + step, n)
        s[i0:i1] = kernel.pairwise(rows[i0:i1], cols).sum(axis=1)
    return s


def _u_stat_rows(rows: np.ndarray, kernel: Kernel) -> float:
    n = rows.shape[0]
    m = kernel.degree
    if n < m:
        raise InsufficientSampleError(
            f"need at least {m} rows for a degree-{m} kernel, got {n}"
        )
    if m == 1:
        return math.fsum(kernel.func(rows[i]) for i in range(n)) / n
    if m == 2 and kernel.pairwise is not None:
        return _pair_sum(kernel, rows) / math.comb(n, 2)
    total = math.fsum(
        kernel.func(*(rows[i] for i in combo))
        for combo in itertools.combinations(range(n), m)
    )
    return total / math.comb(n, m)


def u_stat(table, kernel: Kernel) -> float:
    """Exact U-statistic: the kernel averaged over all size-m row subsets.

    Parameters
    ----------
    table : DataTable or array-like
        Sample of N rows (1-D input is treated as one column).
    kernel : Kernel

    Returns
    -------
    float
        ``(N choose m)^-1 * sum over subsets`` — exhaustive enumeration,
        vectorized in pair chunks when the kernel provides a hook.

    Raises
    ------
    InsufficientSampleError
        If N < m.
    """
    return _u_stat_rows(_rows_of(table), kernel)


def u_stat_weighted(table, weights, kernel: Kernel) -> float:
    """U-statistic of the inflated multiset where row i appears weights[i]
    times, evaluated in O(n^m) by multiplicity combinatorics.

    For degree 2 this is
    ``[sum_{i<j} w_i w_j h(x_i, x_j) + sum_i C(w_i, 2) h(x_i, x_i)] / C(N*, 2)``
    with ``N* = sum w_i``; higher degrees generalize through multiset counts
    ``prod_j C(w_{i_j}, c_j)``.  Same-row pairs contribute ``h(x, x)`` exactly
    as the expanded multiset would.

    Raises
    ------
    InsufficientSampleError
        If sum(weights) < m.
    InvalidArgumentError
        For degrees outside {2, 3, 4}, negative or non-integer weights.
    """
    rows = _rows_of(table)
    m = kernel.degree
    if m not in (2, 3, 4):
        raise InvalidArgumentError(
            f"weighted evaluation supports degrees 2..4, got {m}"
        )
    w = np.asarray(weights)
    if w.ndim != 1 or w.shape[0] != rows.shape[0]:
        raise InvalidArgumentError("weights must be one integer per row")
    if not np.issubdtype(w.dtype, np.integer):
        w_int = np.asarray(np.rint(w), dtype=np.int64)
        if not np.array_equal(w_int, w):
            raise InvalidArgumentError("weights must be non-negative integers")
        w = w_int
    if np.any(w < 0):
        raise InvalidArgumentError("weights must be non-negative integers")
    n_star = int(w.sum())
    if n_star < m:
        raise InsufficientSampleError(
            f"weights sum to {n_star}, below kernel degree {m}"
        )

    if m == 2 and kernel.pairwise is not None:
        wf = w.astype(np.float64)
        n = rows.shape[0]
        step = max(1, _CHUNK_ELEMS // max(n, 1))
        cross_parts = []
        diag = np.empty(n)
        for i0 in range(0, n, step):
            i1 = min(i0 + step, n)
            h = kernel.pairwise(rows[i0:i1], rows)
            cross_parts.append(float(wf[i0:i1] @ (h @ wf)))
            diag[i0:i1] = h[np.arange(i1 - i0), np.arange(i0, i1)]
        w_h_w = math.fsum(cross_parts)
        # w'Hw counts ordered pairs incl. i=j; unordered distinct pairs:
        distinct = 0.5 * (w_h_w - float((wf * wf) @ diag))
        same = float((wf * (wf - 1) / 2.0) @ diag)
        return (distinct + same) / math.comb(n_star, 2)

    support = np.flatnonzero(w)
    parts = []
    for combo in itertools.combinations_with_replacement(support.tolist(), m):
        counts = Counter(combo)
        ways = 1
        for idx, c in counts.items():
            ways *= math.comb(int(w[idx]), c)
            if ways == 0:
                break
        if ways == 0:
            continue
        parts.append(ways * kernel.func(*(rows[i] for i in combo)))
    return math.fsum(parts) / math.comb(n_star, m)


def distributed_u_stat(
    table, partition: BlockPartition, kernel: Kernel
) -> DistributedEstimate:
    """Per-block U-statistics and their size-weighted average.

    The aggregate is ``sum_k n_k T_k / N`` accumulated in block order with
    compensated summation, so it is bit-reproducible regardless of how the
    per-block work is scheduled.

    Raises
    ------
    InsufficientSampleError
        Naming the first block smaller than the kernel degree.
    """
    rows = _rows_of(table)
    if partition.N != rows.shape[0]:
        raise InvalidArgumentError(
            f"partition covers {partition.N} rows, table has {rows.shape[0]}"
        )
    m = kernel.degree
    small = np.flatnonzero(partition.sizes < m)
    if small.size:
        k = int(small[0])
        raise InsufficientSampleError(
            f"block {k} has {int(partition.sizes[k])} rows, "
            f"below kernel degree {m}"
        )
    per_block = np.empty(partition.K)
    for k in range(partition.K):
        per_block[k] = _u_stat_rows(rows[partition.block_rows(k)], kernel)
    sizes = partition.sizes.astype(np.int64)
    aggregate = math.fsum(
        float(sizes[k]) * per_block[k] for k in range(partition.K)
    ) / float(partition.N)
    return DistributedEstimate(
        per_block=per_block, sizes=sizes.copy(), aggregate=aggregate
    )


# ---------------------------------------------------------------------------
# Built-in kernels
# ---------------------------------------------------------------------------

def gini_kernel() -> Kernel:
    """Degree-2 kernel h(x, y) = |x - y| on scalar observations."""

    def h(x, y):
        if x.shape != (1,) or y.shape != (1,):
            raise InvalidArgumentError("gini kernel expects 1-D observations")
        return abs(float(x[0]) - float(y[0]))

    def pairwise(X, Y):
        if X.shape[1] != 1:
            raise InvalidArgumentError("gini kernel expects 1-D observations")
        return np.abs(X[:, 0][:, None] - Y[:, 0][None, :])

    return Kernel(degree=2, func=h, name="gini", pairwise=pairwise)


def product_kernel(c: float) -> Kernel:
    """Degree-2 kernel h(x, y) = (x - c)(y - c) on scalar observations.

    Degenerate when c equals the population mean: the first projection
    vanishes and only the quadratic term drives the statistic — the standard
    fixture for exercising degenerate limit behaviour.
    """
    c = float(c)

    def h(x, y):
        return (float(x[0]) - c) * (float(y[0]) - c)

    def pairwise(X, Y):
        if X.shape[1] != 1:
            raise InvalidArgumentError("product kernel expects 1-D observations")
        return np.outer(X[:, 0] - c, Y[:, 0] - c)

    return Kernel(degree=2, func=h, name=f"product({c:g})", pairwise=pairwise)


def hoeffding_alpha_hat(block, kernel: Kernel) -> np.ndarray:
    """Empirical first-projection values of a degree-2 kernel on one block.

    Returns ``a_i = 2 * (n^-1 sum_j h(x_i, x_j) - theta_hat)`` where
    ``theta_hat = n^-2 sum_i sum_j h(x_i, x_j)`` is the plug-in (V-statistic,
    diagonal included).  The values sum to zero up to roundoff by
    construction.

    Raises
    ------
    InvalidArgumentError
        If the kernel degree is not 2.
    InsufficientSampleError
        If the block has fewer than 2 rows.
    """
    rows = _rows_of(block)
    if kernel.degree != 2:
        raise InvalidArgumentError("first projection needs a degree-2 kernel")
    n = rows.shape[0]
    if n < 2:
        raise InsufficientSampleError(f"need at least 2 rows, got {n}")
    if kernel.pairwise is not None:
        s = _pair_row_sums(kernel, rows)
    else:
        s = np.array(
            [math.fsum(kernel.func(rows[i], rows[j]) for j in range(n))
             for i in range(n)]
        )
    theta_hat = math.fsum(s.tolist()) / (n * n)
    return 2.0 * (s / n - theta_hat)


def v_statistic(block, kernel: Kernel) -> float:
    """Plug-in V-statistic ``n^-2 sum_i sum_j h(x_i, x_j)`` of a degree-2
    kernel (all ordered pairs, diagonal included) — the bootstrap-world mean
    of the corresponding U-statistic."""
    rows = _rows_of(block)
    if kernel.degree != 2:
        raise InvalidArgumentError("v_statistic needs a degree-2 kernel")
    n = rows.shape[0]
    if n < 1:
        raise InsufficientSampleError("empty block")
    if kernel.pairwise is not None:
        s = _pair_row_sums(kernel, rows)
        return math.fsum(s.tolist()) / (n * n)
    return math.fsum(
        kernel.func(rows[i], rows[j]) for i in range(n) for j in range(n)
    ) / (n * n)
