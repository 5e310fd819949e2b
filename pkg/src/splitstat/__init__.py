"""splitstat: split-and-conquer statistical inference for large samples.

Block-distributed U-statistics, four bootstrap engines (DB, PDB, BLB, SDB),
jackknife and projection-based variance estimators, unbiased distance
covariance with distributed independence tests, and a K-selection planner.
"""

from .core import (
    BalanceReport,
    BlockPartition,
    DataTable,
    InsufficientSampleError,
    InvalidArgumentError,
    SeedSpec,
    check_balance,
    derive_stream,
    partition_predefined,
    partition_random,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceReport",
    "BlockPartition",
    "DataTable",
    "InsufficientSampleError",
    "InvalidArgumentError",
    "SeedSpec",
    "check_balance",
    "derive_stream",
    "partition_predefined",
    "partition_random",
    "__version__",
]
