"""Real-data preparation: bounded-ratio log transform, centering, rebalancing.

Percentage-type indicators are mapped through log((a + x)/(b - x)) before
centering; raw groups of unequal size are truncated to the smallest group so
the balanced-block estimators apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LOGIT_A = 1.0
DEFAULT_LOGIT_B = 101.0


def logit_transform(x, a: float = DEFAULT_LOGIT_A, b: float = DEFAULT_LOGIT_B):
    """log((a + x)/(b - x)), strictly increasing on -a < x < b.

    Accepts scalars or arrays.  Values at or beyond either bound raise with
    the offending bound named, so overflow never happens silently.
    """
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    if b <= 1:
        raise ValueError(f"b must exceed 1, got {b}")
    arr = np.asarray(x, dtype=float)
    low_bad = arr + a <= 0
    if np.any(low_bad):
        offender = float(arr[low_bad].min()) if arr.ndim else float(arr)
        raise ValueError(f"value {offender} violates the lower bound -a = {-a}")
    high_bad = b - arr <= 0
    if np.any(high_bad):
        offender = float(arr[high_bad].max()) if arr.ndim else float(arr)
        raise ValueError(f"value {offender} violates the upper bound b = {b}")
    out = np.log((a + arr) / (b - arr))
    return float(out) if np.isscalar(x) or out.ndim == 0 else out


def center_columns(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract column means; returns (centered matrix, means)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("x must be a matrix with at least one row")
    means = x.mean(axis=0)
    return x - means, means


@dataclass(frozen=True)
class RebalancePlan:
    """Block-local keep/drop plan truncating all groups to the smallest size.

    ``kept[i]`` and ``dropped[i]`` are positions within raw group i (0-based,
    in original within-group order); the earliest rows are kept.
    """

    n: int
    kept: tuple[np.ndarray, ...]
    dropped: tuple[np.ndarray, ...]

    @property
    def n_dropped(self) -> int:
        return int(sum(d.size for d in self.dropped))


def rebalance_blocks(raw_sizes) -> RebalancePlan:
    """Truncate each raw group to the smallest group size."""
    sizes = [int(s) for s in raw_sizes]
    if len(sizes) == 0 or any(s < 1 for s in sizes):
        raise ValueError("raw sizes must be positive")
    n = min(sizes)
    kept = tuple(np.arange(n) for _ in sizes)
    dropped = tuple(np.arange(n, s) for s in sizes)
    return RebalancePlan(n=n, kept=kept, dropped=dropped)
