"""Data model, block partitioning, and deterministic seed derivation.

Everything downstream (statistics, bootstrap engines, the simulation harness)
works in terms of the three types defined here: an immutable data table, a
partition of its rows into K non-empty blocks, and a seed spec from which all
random streams are derived by counter so that results never depend on
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InsufficientSampleError(ValueError):
    """A sample (or block) is too small for the requested statistic."""


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidArgumentError(
            f"values must be a 1-D or 2-D array, got ndim={arr.ndim}"
        )
    return arr


@dataclass(frozen=True)
class DataTable:
    """Immutable N x d matrix of observations (rows are samples).

    1-D input is treated as a single column.  Non-finite entries are rejected
    at construction; ingestion code is expected to drop incomplete rows before
    building a table.
    """

    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __init__(self, values, column_names: Sequence[str] | None = None):
        arr = _as_matrix(values)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError("DataTable requires N >= 1 and d >= 1")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(
                "DataTable entries must all be finite (no NaN/Inf)"
            )
        if column_names is not None:
            names = tuple(str(c) for c in column_names)
            if len(names) != arr.shape[1]:
                raise InvalidArgumentError(
                    f"{len(names)} column names for {arr.shape[1]} columns"
                )
        else:
            names = None
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "column_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_rows


@dataclass(frozen=True)
class BlockPartition:
    """Assignment of the N row indices to K disjoint non-empty blocks."""

    assignment: np.ndarray
    K: int
    sizes: np.ndarray

    def __init__(self, assignment):
        arr = np.asarray(assignment, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidArgumentError("assignment must be a non-empty 1-D sequence")
        if arr.min() < 0:
            raise InvalidArgumentError("block indices must be non-negative")
        k = int(arr.max()) + 1
        sizes = np.bincount(arr, minlength=k)
        if np.any(sizes == 0):
            missing = int(np.flatnonzero(sizes == 0)[0])
            raise InvalidArgumentError(
                f"block indices must cover 0..K-1 with no empty block "
                f"(block {missing} is empty)"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        sizes.flags.writeable = False
        object.__setattr__(self, "assignment", arr)
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "sizes", sizes)

    @property
    def N(self) -> int:
        return int(self.assignment.size)

    @cached_property
    def _block_rows(self) -> tuple[np.ndarray, ...]:
        # One argsort instead of K linear scans; stable so within-block order
        # follows row order.
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(order, bounds))

    def block_rows(self, k: int) -> np.ndarray:
        """Row indices of block k, in increasing row order."""
        if not 0 <= k < self.K:
            raise InvalidArgumentError(f"block index {k} outside 0..{self.K - 1}")
        return self._block_rows[k]


@dataclass(frozen=True)
class BalanceReport:
    ok: bool
    min_ratio: float
    max_ratio: float

    def __bool__(self) -> bool:  # allows `if check_balance(p):`
        return self.ok


@dataclass(frozen=True)
class SeedSpec:
    """Master seed for a whole computation.

    Streams are derived by counter from (master_seed, block, replicate), so
    identical triples always give identical streams no matter how many workers
    run or in which order the work is scheduled.
    """

    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidArgumentError("master_seed must be a 64-bit unsigned integer")

    def sequence(self, *path: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=tuple(path))


def derive_stream(seed: SeedSpec, block: int, replicate: int) -> np.random.Generator:
    """Independent random stream for (seed, block, replicate).

    Built on `numpy.random.SeedSequence` with the (block, replicate) pair as
    the spawn key — a splittable counter scheme, collision-free over the whole
    grid, so replicate b of block k can be reproduced without generating any
    other stream first.
    """
    if block < 0 or replicate < 0:
        raise InvalidArgumentError("block and replicate indices must be >= 0")
    return np.random.default_rng(seed.sequence(block, replicate))


def partition_random(table: DataTable, K: int, seed: SeedSpec) -> BlockPartition:
    """Randomly split the table's rows into K near-equal blocks.

    A uniformly random permutation of row indices is cut into K chunks whose
    sizes differ by at most one (the first N mod K blocks get the extra row).
    Deterministic given the seed.
    """
    n = table.n_rows
    if K < 1:
        raise InvalidArgumentError("K must be at least 1")
    if K > n:
        raise InvalidArgumentError(f"K={K} exceeds the number of rows N={n}")
    # Root lane of the seed (empty spawn key): never collides with the
    # (block, replicate) lanes used by the bootstrap engines.
    rng = np.random.default_rng(seed.sequence())
    perm = rng.permutation(n)
    base, extra = divmod(n, K)
    sizes = np.full(K, base, dtype=np.int64)
    sizes[:extra] += 1
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.repeat(np.arange(K), sizes)
    return BlockPartition(assignment)


def partition_predefined(assignment) -> BlockPartition:
    """Wrap an externally supplied assignment (e.g. data already sharded)."""
    return BlockPartition(assignment)


def check_balance(
    p: BlockPartition, c1: float = 0.5, c2: float = 2.0
) -> BalanceReport:
    """Check the pairwise block-size ratio band c1 <= n_k1/n_k2 <= c2.

    The defaults (0.5, 2.0) are this library's choice; nothing canonical fixes
    them.  Always reports the observed (min, max) pairwise ratios.
    """
    if not 0 < c1 <= c2:
        raise InvalidArgumentError("need 0 < c1 <= c2")
    smallest = int(p.sizes.min())
    largest = int(p.sizes.max())
    min_ratio = smallest / largest
    max_ratio = largest / smallest
    ok = (c1 <= min_ratio) and (max_ratio <= c2)
    return BalanceReport(ok=ok, min_ratio=min_ratio, max_ratio=max_ratio)
