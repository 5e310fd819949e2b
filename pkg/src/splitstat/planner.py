"""Choosing the number of blocks K under a computation budget.

For a statistic whose full-sample cost scales like c*N^a with a > 1,
splitting into K blocks costs ``C(K) = c*K*(N/K)^a = c*K^(1-a)*N^a`` —
strictly decreasing in K.  ``select_k`` returns ``max(K0, K0')`` where K0 is
the statistically preferred block count and K0' the smallest K whose
predicted cost fits the budget.  ``max_k_same_leading_mse`` is the advisory
ceiling below which the distributed estimator keeps the full-sample leading
MSE term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import InvalidArgumentError


class InfeasibleError(RuntimeError):
    """No block count within 1..N satisfies the budget."""


@dataclass(frozen=True)
class CostModel:
    """Cost scaling of one statistic evaluation: ``steps ~ c * n^a`` on a
    sample of size n, with memory growing like n^b.

    Requires a > 1 (otherwise splitting cannot help), b >= 1, c > 0.
    """

    a: float
    c: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a > 1.0:
            raise InvalidArgumentError(f"complexity exponent a must be > 1, got {self.a}")
        if not self.b >= 1.0:
            raise InvalidArgumentError(f"memory exponent b must be >= 1, got {self.b}")
        if not self.c > 0.0:
            raise InvalidArgumentError(f"cost constant c must be > 0, got {self.c}")


def predicted_cost(model: CostModel, N: int, K: int) -> float:
    """Predicted total cost of the K-block evaluation:
    ``c * K * (N/K)^a``."""
    if not 1 <= K <= N:
        raise InvalidArgumentError(f"need 1 <= K <= N, got K={K}, N={N}")
    return model.c * K * (N / K) ** model.a


def select_k(K0: int, model: CostModel, N: int, budget: float) -> int:
    """Smallest statistically acceptable K whose cost fits the budget.

    Returns ``max(K0, K0')`` with ``K0' = min{K : predicted_cost(K) <=
    budget}`` found by bisection over the strictly decreasing cost curve.
    Never returns less than K0; the cost at the returned K is within budget
    whenever the budget binds.

    Raises
    ------
    InfeasibleError
        If even K = N exceeds the budget.
    """
    if K0 < 1:
        raise InvalidArgumentError(f"K0 must be at least 1, got {K0}")
    if N < 1:
        raise InvalidArgumentError("N must be positive")
    if not budget > 0:
        raise InvalidArgumentError("budget must be positive")
    if predicted_cost(model, N, N) > budget:
        raise InfeasibleError(
            f"cost at K=N ({predicted_cost(model, N, N):.6g}) still exceeds "
            f"the budget {budget:.6g}"
        )
    lo, hi = 1, N
    while lo < hi:
        mid = (lo + hi) // 2
        if predicted_cost(model, N, mid) <= budget:
            hi = mid
        else:
            lo = mid + 1
    return max(K0, lo)


def max_k_same_leading_mse(N: int, tau1: float, epsilon: float = 0.1) -> int:
    """Advisory ceiling ``floor(N^((1 - 1/(2 tau1)) - epsilon))`` on K.

    Below this rate the distributed estimator's MSE keeps the full-sample
    leading term (tau1 is the Hoeffding-expansion order of the first
    non-vanishing projection; tau1 = 1 gives the familiar o(sqrt(N))
    guidance).  The bound is a rate, not an exact constant; ``epsilon`` is
    the slack that turns the little-o into a usable number.
    """
    if N < 1:
        raise InvalidArgumentError("N must be positive")
    if not tau1 >= 1.0:
        raise InvalidArgumentError(f"tau1 must be >= 1, got {tau1}")
    limit = 1.0 - 1.0 / (2.0 * tau1)
    if not 0.0 < epsilon < limit:
        raise InvalidArgumentError(
            f"epsilon must lie in (0, {limit:.6g}), got {epsilon}"
        )
    return int(math.floor(N ** (limit - epsilon)))
