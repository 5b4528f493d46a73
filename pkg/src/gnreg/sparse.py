"""l1-penalized variable selection on top of the mini-max block objective.

`glasso_fit` minimizes max-block-MSE + lam * ||beta||_1; the mean-uncertain
variant re-fits with the estimated upper-mean shift subtracted, as in the
profile estimator.  Cross-validation splits every block into the same fold
chunks, preserving the block structure on both sides of each split, and
scores a lambda by the maximum block MSE on the held-out chunks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _solver
from .core import BlockPartition, Dataset, FitResult
from .estimators import (
    SolverConfig,
    _centering_warning,
    _full_ols_beta,
    block_mse,
    mu_upper_hat,
)


@dataclass(frozen=True)
class LassoConfig:
    """Penalty weight, CV grid and sparsity-report threshold."""

    lam: float = 0.0
    lam_grid: tuple[float, ...] | None = None
    cv_folds: int = 5
    solver: SolverConfig = field(default_factory=SolverConfig)
    zero_threshold: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.zero_threshold < 0:
            raise ValueError("zero_threshold must be nonnegative")
        if self.lam_grid is not None:
            grid = tuple(float(v) for v in self.lam_grid)
            if len(grid) == 0:
                raise ValueError("lam_grid must be nonempty when given")
            if any(v < 0 for v in grid):
                raise ValueError("lam_grid values must be nonnegative")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("lam_grid must be strictly increasing")
            object.__setattr__(self, "lam_grid", grid)


class CVResult(NamedTuple):
    lambda_star: float
    lambdas: np.ndarray
    scores: np.ndarray


def default_lambda_grid(data: Dataset, num: int = 50) -> np.ndarray:
    """Log-spaced grid up to the weight deactivating the active block at 0."""
    quads = _solver.BlockQuadratics.from_data(data.y, data.x, data.blocks)
    at_zero = quads.c
    i0 = int(np.argmax(at_zero))
    lam_max = 2.0 * float(np.max(np.abs(quads.b[i0])))
    lo = 1e-4
    if lam_max <= lo * 10:
        lo = max(lam_max / 1000.0, 1e-12)
        lam_max = max(lam_max, lo * 10)
    return np.geomspace(lo, lam_max, num)


def _sparsity_report(beta: np.ndarray, threshold: float) -> dict:
    selected = np.flatnonzero(np.abs(beta) >= threshold)
    dropped = np.flatnonzero(np.abs(beta) < threshold)
    return {
        "selected": selected.tolist(),  # 0-based coefficient positions
        "zeroed": dropped.tolist(),
        "n_selected": int(selected.size),
    }


def _penalized_solve(
    quads: _solver.BlockQuadratics,
    lam: float,
    beta0: np.ndarray,
    config: LassoConfig,
) -> _solver.SolverOutput:
    if lam == 0.0:
        # Unpenalized case is the plain mini-max problem; reuse its solver.
        return _solver.solve_minimax(
            quads,
            beta0,
            max_iterations=config.solver.max_iterations,
            tolerance=config.solver.tolerance,
            step_rule=config.solver.step_rule,
        )
    return _solver.solve_penalized(
        quads,
        lam,
        beta0,
        max_iterations=config.solver.max_iterations,
        tolerance=config.solver.tolerance,
    )


def glasso_fit(data: Dataset, config: LassoConfig | None = None) -> FitResult:
    """Penalized mini-max fit at ``config.lam`` with a sparsity report."""
    config = config or LassoConfig()
    if not data.blocks.is_balanced:
        raise ValueError("penalized mini-max estimation requires balanced blocks")
    beta0 = _full_ols_beta(data)
    quads = _solver.BlockQuadratics.from_data(data.y, data.x, data.blocks)
    out = _penalized_solve(quads, config.lam, beta0, config)
    diag = dict(out.diagnostics)
    diag["lambda"] = config.lam
    diag["sparsity"] = _sparsity_report(out.beta, config.zero_threshold)
    return FitResult(
        beta=out.beta,
        objective_value=out.objective,
        active_block=out.active_block + 1,
        iterations=out.iterations,
        converged=out.converged,
        diagnostics=diag,
    )


def glasso_mean_uncertain_fit(
    data: Dataset, config: LassoConfig | None = None
) -> FitResult:
    """Penalized fit with the upper-mean shift from an initial penalized fit.

    Requires (approximately) centered covariates; deviations are recorded as
    diagnostics warnings like in the profile estimator.
    """
    config = config or LassoConfig()
    init = glasso_fit(data, config)
    shift_est = mu_upper_hat(data, init.beta)
    quads = _solver.BlockQuadratics.from_data(
        data.y, data.x, data.blocks, shift=shift_est.value
    )
    out = _penalized_solve(quads, config.lam, np.asarray(init.beta), config)
    diag = dict(out.diagnostics)
    diag["lambda"] = config.lam
    diag["sparsity"] = _sparsity_report(out.beta, config.zero_threshold)
    diag["mu_upper_block"] = shift_est.block
    warnings = _centering_warning(data)
    if warnings:
        diag["warnings"] = warnings
    return FitResult(
        beta=out.beta,
        objective_value=out.objective,
        active_block=out.active_block + 1,
        iterations=out.iterations,
        converged=out.converged,
        mu_upper_hat=shift_est.value,
        diagnostics=diag,
    )


def _fold_chunks(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous within-block index chunks, identical across blocks."""
    bounds = [int(round(j * n / folds)) for j in range(folds + 1)]
    return [np.arange(bounds[j], bounds[j + 1]) for j in range(folds)]


def _split_fold(
    data: Dataset, chunk: np.ndarray
) -> tuple[Dataset, list[np.ndarray]]:
    """Train dataset without the chunk rows, plus per-block validation rows."""
    train_rows = []
    val_rows = []
    for idx in data.blocks.blocks:
        mask = np.ones(idx.size, dtype=bool)
        mask[chunk] = False
        train_rows.append(idx[mask])
        val_rows.append(idx[~mask])
    sizes = [r.size for r in train_rows]
    order = np.concatenate(train_rows)
    offsets = np.cumsum([0] + sizes)
    blocks = tuple(
        np.arange(offsets[i], offsets[i + 1]) for i in range(len(train_rows))
    )
    train = Dataset(
        y=data.y[order], x=data.x[order], blocks=BlockPartition(blocks)
    )
    return train, val_rows


def _path_betas(
    train: Dataset, lambdas: np.ndarray, config: LassoConfig, objective: str
) -> list[tuple[np.ndarray, float | None]]:
    """(beta, shift) along the descending-lambda path with warm starts."""
    quads = _solver.BlockQuadratics.from_data(train.y, train.x, train.blocks)
    beta = np.zeros(train.p)
    out: list[tuple[np.ndarray, float | None]] = [None] * len(lambdas)  # type: ignore
    for j in np.argsort(-lambdas):
        lam = float(lambdas[j])
        sol = _penalized_solve(quads, lam, beta, config)
        beta = sol.beta
        if objective == "mean_uncertain":
            shift = mu_upper_hat(train, beta).value
            squads = _solver.BlockQuadratics.from_data(
                train.y, train.x, train.blocks, shift=shift
            )
            ssol = _penalized_solve(squads, lam, beta, config)
            out[j] = (ssol.beta, shift)
        else:
            out[j] = (sol.beta, None)
    return out


def cv_select_lambda(
    data: Dataset,
    config: LassoConfig | None = None,
    objective: str = "mean_certain",
) -> CVResult:
    """Pick the penalty weight by block-preserving k-fold cross-validation.

    Every block contributes the same held-out chunk per fold; the fold score
    at a given lambda is the maximum over blocks of the held-out MSE (with
    the trained shift subtracted for the mean-uncertain objective), averaged
    over folds.  Exact score ties resolve toward the larger (sparser) lambda.
    """
    config = config or LassoConfig()
    if objective not in ("mean_certain", "mean_uncertain"):
        raise ValueError(f"unknown objective {objective!r}")
    if config.lam_grid is not None:
        lambdas = np.asarray(config.lam_grid, dtype=float)
    else:
        lambdas = default_lambda_grid(data)
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    if not data.blocks.is_balanced:
        raise ValueError("cross-validation requires balanced blocks")

    n = data.blocks.n
    chunks = _fold_chunks(n, config.cv_folds)
    scores = np.zeros((config.cv_folds, lambdas.size))
    for k, chunk in enumerate(chunks):
        if chunk.size == 0:
            raise ValueError(
                f"cv_folds={config.cv_folds} leaves an empty fold for block size {n}"
            )
        train, val_rows = _split_fold(data, chunk)
        path = _path_betas(train, lambdas, config, objective)
        for j, (beta, shift) in enumerate(path):
            shift_val = shift if shift is not None else 0.0
            per_block = [
                float(np.mean((data.y[rows] - data.x[rows] @ beta - shift_val) ** 2))
                for rows in val_rows
            ]
            scores[k, j] = max(per_block)

    mean_scores = scores.mean(axis=0)
    best = mean_scores.min()
    # ties toward the larger lambda
    j_star = int(np.flatnonzero(mean_scores == best)[-1])
    return CVResult(float(lambdas[j_star]), lambdas, mean_scores)
