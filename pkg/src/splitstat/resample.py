"""Bootstrap engines for block-distributed statistics.

Four engines with very different cost profiles:

* ``db_run`` — resample within every block, recompute every block statistic
  (full-cost, one O(sum n_k^2) pass per replicate);
* ``pdb_run`` — resample the K already-computed block statistics (O(K) per
  replicate, never touches the data again);
* ``blb_run`` — bag of little bootstraps: small subsets, multinomial weights
  inflating them back to size N, a scalar summary ξ averaged over subsets;
* ``sdb_run`` — subsampled double bootstrap: one weight draw per subset.

All randomness is drawn from counter-derived streams (see
:func:`splitstat.core.derive_stream`), so every engine is bit-reproducible
for a given master seed regardless of scheduling — except under a wall-clock
budget, where the number of completed iterations depends on the machine (the
result is flagged ``budgeted``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .core import (
    BlockPartition,
    InsufficientSampleError,
    InvalidArgumentError,
    SeedSpec,
    derive_stream,
)
from .symstat import (
    DistributedEstimate,
    Kernel,
    _rows_of,
    u_stat,
    u_stat_weighted,
    v_statistic,
)
from .variance import InsufficientReplicatesError

__all__ = [
    "BootstrapResult",
    "TimeBudget",
    "ConfidenceInterval",
    "EmptyResultError",
    "InsufficientReplicatesError",
    "db_run",
    "pdb_run",
    "blb_run",
    "sdb_run",
    "ci_equal_tail",
    "run_with_budget",
]


class EmptyResultError(RuntimeError):
    """A budgeted run finished zero iterations."""

    def __init__(self, message: str, completed: int = 0):
        super().__init__(message)
        self.completed = completed


@dataclass
class TimeBudget:
    """Wall-clock allowance for an engine run.

    ``completed`` counts fully finished iterations (replicates, or BLB
    subsets); an engine never starts a new iteration once ``seconds`` have
    elapsed on the monotonic clock.  The same object can be handed to
    :func:`run_with_budget`, which reads the counter back.
    """

    seconds: float
    completed: int = 0
    _deadline: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.seconds > 0:
            raise InvalidArgumentError("budget seconds must be positive")

    def start(self) -> None:
        if self._deadline is None:
            self._deadline = time.monotonic() + self.seconds

    def expired(self) -> bool:
        if self._deadline is None:
            self.start()
        return time.monotonic() >= self._deadline

    def count(self) -> None:
        self.completed += 1


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise InvalidArgumentError("level must be in (0, 1)")
        if self.lower > self.upper:
            raise InvalidArgumentError("lower endpoint exceeds upper")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class BootstrapResult:
    """Replicates of one engine run.

    ``replicates[b] = scale * (raw_statistics[b] - center)`` under the
    engine's scale convention (for the subsampled double bootstrap each
    replicate has its own center, kept in ``centers``; ``center`` then holds
    their mean).  ``timestamps[b]`` is the monotonic time, in seconds from
    the start of the run, at which iteration b finished — the raw material
    for estimate-versus-time trajectories.
    """

    replicates: np.ndarray
    raw_statistics: np.ndarray
    center: float
    scale_convention: str
    B: int
    centers: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    budgeted: bool = False

    def quantile(self, q) -> np.ndarray | float:
        """Empirical quantile(s) of the replicates, linear interpolation."""
        if self.B < 2:
            raise InsufficientReplicatesError(
                f"quantile queries need at least 2 replicates, got {self.B}"
            )
        return np.quantile(self.replicates, q)


def _finish(
    replicates: list[float],
    raw: list[float],
    center: float,
    convention: str,
    *,
    centers: list[float] | None = None,
    stamps: list[float] | None = None,
    budget: TimeBudget | None,
    engine: str,
) -> BootstrapResult:
    if not replicates:
        raise EmptyResultError(
            f"{engine}: budget elapsed before any iteration completed",
            completed=0,
        )
    return BootstrapResult(
        replicates=np.asarray(replicates),
        raw_statistics=np.asarray(raw),
        center=center,
        scale_convention=convention,
        B=len(replicates),
        centers=None if centers is None else np.asarray(centers),
        timestamps=None if stamps is None else np.asarray(stamps),
        budgeted=budget is not None,
    )


def db_run(
    table,
    partition: BlockPartition,
    kernel: Kernel,
    B: int,
    seed: SeedSpec,
    budget: TimeBudget | None = None,
) -> BootstrapResult:
    """Distributed bootstrap: resample within every block.

    Replicate b draws, for each block k, n_k rows with replacement from block
    k using the stream for (block k, replicate b), recomputes the block
    statistic, and aggregates ``T*_b = N^-1 sum_k n_k T*_bk``.  Replicates
    are ``sqrt(N) * (T*_b - center)`` with the center the size-weighted mean
    of per-block plug-in (V-statistic) values — the exact conditional mean of
    T*_b given the data, so replicates are conditionally centered.

    One full O(sum_k n_k^2) statistic evaluation per replicate: the honest,
    expensive engine.
    """
    rows = _rows_of(table)
    if partition.N != rows.shape[0]:
        raise InvalidArgumentError(
            f"partition covers {partition.N} rows, table has {rows.shape[0]}"
        )
    if B < 1:
        raise InvalidArgumentError("B must be at least 1")
    if kernel.degree != 2:
        raise InvalidArgumentError(
            "distributed bootstrap centers at the plug-in statistic and "
            "supports degree-2 kernels only"
        )
    m = kernel.degree
    small = np.flatnonzero(partition.sizes < m)
    if small.size:
        k = int(small[0])
        raise InsufficientSampleError(
            f"block {k} has {int(partition.sizes[k])} rows, below degree {m}"
        )
    K = partition.K
    n_tot = float(partition.N)
    blocks = [
        np.ascontiguousarray(rows[partition.block_rows(k)]) for k in range(K)
    ]
    sizes = [b.shape[0] for b in blocks]
    weights = [s / n_tot for s in sizes]
    center = math.fsum(
        weights[k] * v_statistic(blocks[k], kernel) for k in range(K)
    )
    sqrt_n = math.sqrt(n_tot)

    if budget is not None:
        budget.start()
    t0 = time.monotonic()
    raw: list[float] = []
    reps: list[float] = []
    stamps: list[float] = []
    for b in range(B):
        if budget is not None and budget.expired():
            break
        t_star = math.fsum(
            weights[k]
            * u_stat(
                blocks[k][derive_stream(seed, k, b).integers(0, sizes[k], sizes[k])],
                kernel,
            )
            for k in range(K)
        )
        raw.append(t_star)
        reps.append(sqrt_n * (t_star - center))
        stamps.append(time.monotonic() - t0)
        if budget is not None:
            budget.count()
    return _finish(
        reps, raw, center, "sqrt-N",
        stamps=stamps, budget=budget, engine="db_run",
    )


def pdb_run(
    estimate: DistributedEstimate,
    mode: Literal["nondegenerate", "degenerate"],
    B: int,
    seed: SeedSpec,
    budget: TimeBudget | None = None,
) -> BootstrapResult:
    """Pseudo-distributed bootstrap: resample the K block statistics.

    The block values are rescaled once — ``n_k T_k / sqrt(N/K)`` in the
    nondegenerate mode, ``n_k T_k`` in the degenerate mode — then each
    replicate draws K of them i.i.d. with replacement and averages.
    Replicates are ``sqrt(K) * (mean_of_draws - center)`` where the center
    (``sqrt(N/K) T_agg`` resp. ``(N/K) T_agg``) equals the exact mean of the
    rescaled values, so replicates are conditionally centered.

    Cost per replicate is O(K) and independent of N: the data are never
    touched again.  Requires K >= 2 (resampling one value is vacuous).
    """
    if estimate.K < 2:
        raise InvalidArgumentError("pseudo-distributed bootstrap needs K >= 2")
    if B < 1:
        raise InvalidArgumentError("B must be at least 1")
    K = estimate.K
    n_tot = float(estimate.N)
    nk_t = estimate.sizes.astype(np.float64) * estimate.per_block
    if mode == "nondegenerate":
        scaled = nk_t * math.sqrt(K / n_tot)
        convention = "K-sqrt"
    elif mode == "degenerate":
        scaled = nk_t
        convention = "N-over-sqrtK"
    else:
        raise InvalidArgumentError(
            f"mode must be 'nondegenerate' or 'degenerate', got {mode!r}"
        )
    # Algebraically sqrt(N/K)*T_agg (nondegenerate) resp. (N/K)*T_agg
    # (degenerate), but evaluated as the empirical mean of the rescaled
    # values with the same summation the replicate means use, so replicates
    # are conditionally centered to the bit (identical values => exact 0).
    center = float(scaled.mean())
    sqrt_k = math.sqrt(K)

    if budget is not None:
        budget.start()
    t0 = time.monotonic()
    raw: list[float] = []
    reps: list[float] = []
    stamps: list[float] = []
    for b in range(B):
        if budget is not None and budget.expired():
            break
        draws = scaled[derive_stream(seed, 0, b).integers(0, K, K)]
        t_star = float(draws.mean())
        raw.append(t_star)
        reps.append(sqrt_k * (t_star - center))
        stamps.append(time.monotonic() - t0)
        if budget is not None:
            budget.count()
    return _finish(
        reps, raw, center, convention,
        stamps=stamps, budget=budget, engine="pdb_run",
    )


def _subset_xi(
    u: np.ndarray, estimand: str, level: float, q, sqrt_n: float
) -> float:
    if estimand == "ci-width":
        tau = 1.0 - level
        lo, hi = np.quantile(u, [tau / 2.0, 1.0 - tau / 2.0])
        return float(hi - lo) / sqrt_n
    if estimand == "variance":
        dev = u - u.mean()
        return float(dev @ dev) / u.size
    if estimand == "quantile":
        return float(np.quantile(u, q))
    raise InvalidArgumentError(
        f"estimand must be 'ci-width', 'variance' or 'quantile', got {estimand!r}"
    )


def blb_run(
    table,
    subset_size: int,
    S: int,
    B: int,
    kernel: Kernel,
    seed: SeedSpec,
    estimand: str = "ci-width",
    level: float = 0.95,
    q: float | None = None,
    subsets: Literal["disjoint", "random"] = "disjoint",
    budget: TimeBudget | None = None,
) -> float:
    """Bag of little bootstraps: the scalar summary ξ averaged over subsets.

    Each of S subsets of ``subset_size`` rows gets B multinomial weight
    vectors summing to N (the full-data size); every weighted statistic is
    evaluated through :func:`splitstat.symstat.u_stat_weighted` — never by
    expanding the inflated sample.  From the B root values
    ``u = sqrt(N) * (weighted_stat - subset_stat)`` one ξ is extracted
    (equal-tail CI width at ``level`` by default; ``variance`` and
    ``quantile`` — with ``q`` — are the other conventions), and the subset
    values of ξ are averaged.

    ``subsets="disjoint"`` carves the subsets out of one random permutation
    (requires S * subset_size <= N); ``"random"`` draws each subset
    independently without replacement.  With ``subset_size == N`` and S = 1
    the weights are exactly the classical n-out-of-n bootstrap counts, so the
    run reduces to the entire-sample bootstrap.

    An iteration, for budgeting purposes, is one completed subset.
    """
    rows = _rows_of(table)
    n_tot = rows.shape[0]
    n = int(subset_size)
    if n < kernel.degree:
        raise InsufficientSampleError(
            f"subset size {n} below kernel degree {kernel.degree}"
        )
    if n > n_tot:
        raise InvalidArgumentError(f"subset size {n} exceeds N={n_tot}")
    if S < 1 or B < 1:
        raise InvalidArgumentError("S and B must be at least 1")
    if estimand == "quantile" and q is None:
        raise InvalidArgumentError("estimand 'quantile' requires q")
    if subsets == "disjoint":
        if S * n > n_tot:
            raise InvalidArgumentError(
                f"{S} disjoint subsets of {n} rows need {S * n} rows, have {n_tot}"
            )
        perm = derive_stream(seed, 0, 0).permutation(n_tot)
        subset_rows = [perm[s * n : (s + 1) * n] for s in range(S)]
    elif subsets == "random":
        subset_rows = [
            derive_stream(seed, s, 0).choice(n_tot, size=n, replace=False)
            for s in range(S)
        ]
    else:
        raise InvalidArgumentError(
            f"subsets must be 'disjoint' or 'random', got {subsets!r}"
        )
    sqrt_n = math.sqrt(n_tot)
    p_uniform = np.full(n, 1.0 / n)

    if budget is not None:
        budget.start()
    xi_values: list[float] = []
    for s in range(S):
        if budget is not None and budget.expired():
            break
        block = np.ascontiguousarray(rows[subset_rows[s]])
        theta_sub = u_stat(block, kernel)
        u = np.empty(B)
        for b in range(1, B + 1):
            w = derive_stream(seed, s, b).multinomial(n_tot, p_uniform)
            u[b - 1] = sqrt_n * (u_stat_weighted(block, w, kernel) - theta_sub)
        xi_values.append(_subset_xi(u, estimand, level, q, sqrt_n))
        if budget is not None:
            budget.count()
    if not xi_values:
        raise EmptyResultError(
            "blb_run: budget elapsed before any subset completed", completed=0
        )
    return math.fsum(xi_values) / len(xi_values)


def sdb_run(
    table,
    subset_size: int,
    S: int,
    kernel: Kernel,
    seed: SeedSpec,
    budget: TimeBudget | None = None,
) -> BootstrapResult:
    """Subsampled double bootstrap: one weight draw per subset.

    Iteration s draws a subset of ``subset_size`` rows with replacement from
    the full table, computes its statistic, then draws a single multinomial
    weight vector summing to N and records
    ``u_s = sqrt(N) * (weighted_stat - subset_stat)``.  The S roots form the
    replicates; each has its own center (see ``centers``).
    """
    rows = _rows_of(table)
    n_tot = rows.shape[0]
    n = int(subset_size)
    if n < kernel.degree:
        raise InsufficientSampleError(
            f"subset size {n} below kernel degree {kernel.degree}"
        )
    if S < 1:
        raise InvalidArgumentError("S must be at least 1")
    sqrt_n = math.sqrt(n_tot)
    p_uniform = np.full(n, 1.0 / n)

    if budget is not None:
        budget.start()
    t0 = time.monotonic()
    reps: list[float] = []
    raw: list[float] = []
    centers: list[float] = []
    stamps: list[float] = []
    for s in range(S):
        if budget is not None and budget.expired():
            break
        block = np.ascontiguousarray(
            rows[derive_stream(seed, s, 0).integers(0, n_tot, n)]
        )
        theta_sub = u_stat(block, kernel)
        w = derive_stream(seed, s, 1).multinomial(n_tot, p_uniform)
        theta_full = u_stat_weighted(block, w, kernel)
        reps.append(sqrt_n * (theta_full - theta_sub))
        raw.append(theta_full)
        centers.append(theta_sub)
        stamps.append(time.monotonic() - t0)
        if budget is not None:
            budget.count()
    if not reps:
        raise EmptyResultError(
            "sdb_run: budget elapsed before any subset completed", completed=0
        )
    return BootstrapResult(
        replicates=np.asarray(reps),
        raw_statistics=np.asarray(raw),
        center=float(np.mean(centers)),
        scale_convention="sqrt-N",
        B=len(reps),
        centers=np.asarray(centers),
        timestamps=np.asarray(stamps),
        budgeted=budget is not None,
    )


def ci_equal_tail(
    result: BootstrapResult, point: float, level: float, N: int
) -> ConfidenceInterval:
    """Equal-tail two-sided interval from replicate quantiles:

    ``(point - u_{1-tau/2} / sqrt(N),  point - u_{tau/2} / sqrt(N))``

    with tau = 1 - level and u_q the linearly interpolated empirical
    q-quantile of the replicates.
    """
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError("level must be in (0, 1)")
    if N < 1:
        raise InvalidArgumentError("N must be positive")
    tau = 1.0 - level
    lo_q, hi_q = result.quantile([tau / 2.0, 1.0 - tau / 2.0])
    sqrt_n = math.sqrt(float(N))
    return ConfidenceInterval(
        lower=point - float(hi_q) / sqrt_n,
        upper=point - float(lo_q) / sqrt_n,
        level=level,
    )


def run_with_budget(invocation: Callable[[TimeBudget], object], budget: TimeBudget):
    """Run an engine invocation under a wall-clock budget.

    ``invocation`` is a callable taking the budget (e.g.
    ``lambda bud: db_run(table, part, kern, B, seed, budget=bud)``); returns
    ``(result, completed)`` where ``completed`` is the number of fully
    finished iterations.  Zero completed iterations surface as
    :class:`EmptyResultError` (with ``completed=0``) from the engine.
    """
    budget.start()
    result = invocation(budget)
    return result, budget.completed
