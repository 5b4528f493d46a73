"""Block partition construction and data-driven identification.

Blocks group observations whose errors share one distribution.  The common
construction follows observation time order; an alternative sorts by the
response.  When the grouping is unknown, `identify_max_variance_blocks`
estimates the index set of the highest-variance group by ordering initial
blocks on their residual sums of squares and merging downward until a
one-sided variance-ratio test rejects equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import BlockPartition, Dataset
from .estimators import ols_fit


@dataclass(frozen=True)
class PartitionConfig:
    """Initial decomposition (m0 blocks of n0 rows) and test level alpha."""

    mode: str = "time_order"
    m0: int = 1
    n0: int = 20
    alpha: float = 0.05

    def __post_init__(self):
        if self.mode not in ("time_order", "by_response_descending", "data_driven"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if self.m0 < 1 or self.n0 < 1:
            raise ValueError("m0 and n0 must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie strictly between 0 and 1")


def default_block_size(p: int) -> int:
    """Initial block size keeping per-block variance estimates stable."""
    return max(p + 5, 20)


def time_order_partition(n_rows: int, m: int) -> BlockPartition:
    """m consecutive equal-size blocks over rows 0..n_rows-1."""
    if n_rows < 1 or m < 1:
        raise ValueError("n_rows and m must be positive")
    if n_rows % m != 0:
        raise ValueError(f"unbalanced partition: {m} blocks do not divide {n_rows} rows")
    n = n_rows // m
    return BlockPartition(tuple(np.arange(i * n, (i + 1) * n) for i in range(m)))


def response_descending_partition(data: Dataset, m: int) -> BlockPartition:
    """Blocks of rows chunked after sorting the response in descending order.

    Ties keep the original row order, so a constant response reproduces the
    time-order partition.
    """
    n_rows = data.n_rows
    if n_rows % m != 0:
        raise ValueError(f"unbalanced partition: {m} blocks do not divide {n_rows} rows")
    order = np.argsort(-data.y, kind="stable")
    n = n_rows // m
    return BlockPartition(tuple(order[i * n : (i + 1) * n] for i in range(m)))


def identify_max_variance_blocks(
    data: Dataset, config: PartitionConfig
) -> tuple[np.ndarray, dict]:
    """Estimate the row index set of the highest-variance error group.

    Rows are split into m0 time-ordered blocks of n0 rows each.  Blocks are
    arranged by descending residual sum of squares under the full-sample OLS
    fit; the top block seeds the candidate set, and each following block is
    merged while the one-sided variance-ratio test does not reject that its
    residual variance is smaller than the candidate's pooled one.  Returns the
    merged (sorted) row indices and per-step diagnostics.
    """
    p = data.p
    if config.n0 <= p:
        raise ValueError(f"initial block size n0={config.n0} must exceed p={p}")
    if config.m0 * config.n0 != data.n_rows:
        raise ValueError(
            f"m0*n0 = {config.m0 * config.n0} does not match {data.n_rows} rows"
        )

    base = time_order_partition(data.n_rows, config.m0)
    if config.m0 == 1:
        return np.asarray(base.blocks[0]), {
            "order": [1],
            "rss": None,
            "steps": [],
            "warning": "single initial block; nothing to test",
        }

    beta_ls = ols_fit(data).beta
    resid = data.y - data.x @ beta_ls
    rss = np.array([float(np.sum(resid[idx] ** 2)) for idx in base.blocks])
    order = np.argsort(-rss, kind="stable")

    n0 = config.n0
    merged = [int(order[0])]
    merged_rss = float(rss[order[0]])
    steps = []
    for next_block in order[1:]:
        df_merged = len(merged) * n0 - p
        v1_sq = merged_rss / df_merged
        v_next_sq = float(rss[next_block]) / (n0 - p)
        f_stat = v_next_sq / v1_sq if v1_sq > 0 else np.inf
        p_value = float(stats.f.cdf(f_stat, n0 - p, df_merged))
        reject = p_value < config.alpha
        steps.append(
            {
                "block": int(next_block) + 1,
                "f_stat": f_stat,
                "p_value": p_value,
                "merged": not reject,
            }
        )
        if reject:
            break
        merged.append(int(next_block))
        merged_rss += float(rss[next_block])

    rows = np.sort(np.concatenate([base.blocks[i] for i in merged]))
    diagnostics = {
        "order": [int(i) + 1 for i in order],
        "rss": rss.tolist(),
        "steps": steps,
        "merged_blocks": [int(i) + 1 for i in merged],
    }
    return rows, diagnostics
