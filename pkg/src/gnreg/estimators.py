"""Least-squares baseline, mini-max block estimator and the profile variant.

Case 1 (mean-certain errors) minimizes the maximum block mean squared
residual.  Case 2 (mean-uncertain errors) first estimates the upper mean as
the largest block-mean residual under an initial fit, then re-fits with that
shift subtracted.  Predictions add the shift back when present.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _solver
from .core import Dataset, FitResult, _spd_solve

CENTERING_WARN_FACTOR = 0.1


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the mini-max subgradient solver.

    ``tolerance`` bounds the optimality gap (relative to the objective scale)
    below which a fit is declared converged.  ``seed`` is reserved for
    randomized restarts and is unused by the default deterministic rules.
    """

    max_iterations: int = 10000
    tolerance: float = 1e-8
    step_rule: str = "polyak"
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.step_rule not in ("polyak", "diminishing"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


class UpperMeanEstimate(NamedTuple):
    """Largest block-mean residual and the attaining block (1-based)."""

    value: float
    block: int


def _require_balanced(data: Dataset, what: str) -> None:
    if not data.blocks.is_balanced:
        raise ValueError(f"{what} requires a balanced block partition")


def _full_ols_beta(data: Dataset) -> np.ndarray:
    xtx = data.x.T @ data.x / data.n_rows
    xty = data.x.T @ data.y / data.n_rows
    return _spd_solve(xtx, xty, "design matrix rank deficient")


def block_mse(data: Dataset, beta: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Per-block mean of (y - x beta - shift)^2."""
    beta = np.asarray(beta, dtype=float)
    resid = data.y - data.x @ beta - shift
    return np.array([float(np.mean(resid[idx] ** 2)) for idx in data.blocks.blocks])


def ols_fit(data: Dataset) -> FitResult:
    """Ordinary least squares on the full sample via the normal equations."""
    beta = _full_ols_beta(data)
    resid = data.y - data.x @ beta
    per_block = block_mse(data, beta)
    return FitResult(
        beta=beta,
        objective_value=float(np.mean(resid**2)),
        active_block=int(np.argmax(per_block)) + 1,
        iterations=0,
        converged=True,
    )


def minimax_fit(data: Dataset, config: SolverConfig | None = None) -> FitResult:
    """Coefficients minimizing the maximum block mean squared residual.

    Initialized at the full-sample OLS solution and monotone in the best
    iterate, so the fitted maximum block risk never exceeds the OLS one.
    """
    config = config or SolverConfig()
    _require_balanced(data, "mini-max estimation")
    beta0 = _full_ols_beta(data)
    quads = _solver.BlockQuadratics.from_data(data.y, data.x, data.blocks)
    out = _solver.solve_minimax(
        quads,
        beta0,
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
        step_rule=config.step_rule,
    )
    return FitResult(
        beta=out.beta,
        objective_value=out.objective,
        active_block=out.active_block + 1,
        iterations=out.iterations,
        converged=out.converged,
        diagnostics=out.diagnostics,
    )


def mu_upper_hat(data: Dataset, beta_init: np.ndarray) -> UpperMeanEstimate:
    """Largest block-mean residual under ``beta_init``."""
    beta_init = np.asarray(beta_init, dtype=float)
    resid = data.y - data.x @ beta_init
    means = np.array([float(np.mean(resid[idx])) for idx in data.blocks.blocks])
    blk = int(np.argmax(means))
    return UpperMeanEstimate(float(means[blk]), blk + 1)


def _centering_warning(data: Dataset) -> list[str]:
    warnings = []
    col_means = data.x.mean(axis=0)
    col_sds = data.x.std(axis=0)
    for k, (mu, sd) in enumerate(zip(col_means, col_sds)):
        threshold = CENTERING_WARN_FACTOR * sd
        if abs(mu) > threshold and sd > 0:
            warnings.append(
                f"covariate column {k + 1} has sample mean {mu:.4g} "
                f"(over {CENTERING_WARN_FACTOR} x std {sd:.4g}); "
                "the shifted estimator may be biased on non-centered designs"
            )
        elif sd == 0 and mu != 0:
            warnings.append(
                f"covariate column {k + 1} is constant and nonzero; "
                "the shifted estimator may be biased on non-centered designs"
            )
    return warnings


def profile_minimax_fit(
    data: Dataset,
    config: SolverConfig | None = None,
    init: str = "ols",
) -> FitResult:
    """Two-stage fit for mean-uncertain errors.

    Fits an initial estimator (``init`` is "ols" or "minimax"), estimates the
    upper mean as the largest block-mean residual, then minimizes the maximum
    block mean squared residual with that shift subtracted.  Covariates are
    expected to be centered; a noncentered design is recorded as a warning in
    the diagnostics rather than rejected, so bias experiments remain possible.
    """
    config = config or SolverConfig()
    _require_balanced(data, "profile mini-max estimation")
    if init == "ols":
        init_fit = ols_fit(data)
    elif init == "minimax":
        init_fit = minimax_fit(data, config)
    else:
        raise ValueError(f"unknown init {init!r}; expected 'ols' or 'minimax'")

    shift_est = mu_upper_hat(data, init_fit.beta)
    quads = _solver.BlockQuadratics.from_data(
        data.y, data.x, data.blocks, shift=shift_est.value
    )
    out = _solver.solve_minimax(
        quads,
        np.asarray(init_fit.beta, dtype=float),
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
        step_rule=config.step_rule,
    )
    diag = dict(out.diagnostics)
    diag["init"] = init
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


def predict(beta: np.ndarray, mu_upper_hat: float | None, x_new: np.ndarray):
    """Point prediction beta'x, plus the upper-mean shift when present.

    ``x_new`` may be a single p-vector (returns a float) or an (N, p) matrix
    (returns a vector).
    """
    beta = np.asarray(beta, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        if x_new.shape[0] != beta.shape[0]:
            raise ValueError(
                f"x_new has dimension {x_new.shape[0]}, expected {beta.shape[0]}"
            )
        out = float(x_new @ beta)
        return out + mu_upper_hat if mu_upper_hat is not None else out
    if x_new.ndim == 2:
        if x_new.shape[1] != beta.shape[0]:
            raise ValueError(
                f"x_new has {x_new.shape[1]} columns, expected {beta.shape[0]}"
            )
        out = x_new @ beta
        return out + mu_upper_hat if mu_upper_hat is not None else out
    raise ValueError("x_new must be a vector or a matrix")
