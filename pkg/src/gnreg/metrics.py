"""Risk metrics, the Monte Carlo benchmark runner and normality diagnostics.

MPE is the maximum over blocks of the block mean squared prediction error,
APE the average.  The runner fits each requested method on identical
replicated datasets, records the per-replication mini-max risk inequalities
(the fitted max-block risk never worse than least squares, the average risk
never better, and the shifted variant of the former), and aggregates
everything into a serializable report.  Both training-sample metrics (the
inequalities are training-sample statements) and fresh-sample metrics on an
independently drawn dataset of the same design are reported.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import Dataset, DistributionFamily, FitResult
from .estimators import (
    SolverConfig,
    block_mse,
    minimax_fit,
    ols_fit,
    profile_minimax_fit,
)
from .simgen import ExperimentConfig, experiment_config, generate
from .sparse import LassoConfig, glasso_fit, glasso_mean_uncertain_fit

INEQUALITY_SLACK = 1e-6

METHODS = ("ols", "minimax", "profile", "glasso", "glasso_mu")


def mpe(data: Dataset, beta: np.ndarray, shift: float = 0.0) -> float:
    """Maximum over blocks of the shifted block mean squared error."""
    return float(block_mse(data, beta, shift).max())


def ape(data: Dataset, beta: np.ndarray, shift: float = 0.0) -> float:
    """Average over blocks of the shifted block mean squared error."""
    return float(block_mse(data, beta, shift).mean())


def coefficient_mse(estimates: np.ndarray, beta0: np.ndarray) -> np.ndarray:
    """Per-coordinate mean of (beta_hat_k - beta0_k)^2 across replications."""
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    beta0 = np.asarray(beta0, dtype=float)
    return np.mean((estimates - beta0) ** 2, axis=0)


@dataclass(frozen=True)
class NormalityDiagnostics:
    """Empirical vs target covariance of sqrt(n)(beta_hat - beta0)."""

    empirical_cov: np.ndarray
    target_cov: np.ndarray | None
    rel_frobenius: float | None
    skewness: np.ndarray
    excess_kurtosis: np.ndarray

    def to_jsonable(self) -> dict:
        return {
            "empirical_cov": self.empirical_cov.tolist(),
            "target_cov": None if self.target_cov is None else self.target_cov.tolist(),
            "rel_frobenius": self.rel_frobenius,
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
        }


def normality_check(
    estimates: np.ndarray,
    beta0: np.ndarray,
    n: int,
    target_sigma2: float | None = None,
    target_exx: np.ndarray | None = None,
) -> NormalityDiagnostics:
    """Compare the scaled estimator spread with its limiting covariance.

    ``estimates`` is an (R, p) matrix of fitted coefficients over R
    replications at per-block size n.  The target covariance is
    target_sigma2 * inv(target_exx) when both are given.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    r = estimates.shape[0]
    if r < 100:
        raise ValueError(f"need at least 100 replications, got {r}")
    z = np.sqrt(n) * (estimates - np.asarray(beta0, dtype=float))
    emp_cov = np.atleast_2d(np.cov(z, rowvar=False))
    target_cov = None
    rel_frob = None
    if target_sigma2 is not None and target_exx is not None:
        target_cov = target_sigma2 * np.linalg.inv(np.asarray(target_exx, dtype=float))
        rel_frob = float(
            np.linalg.norm(emp_cov - target_cov) / np.linalg.norm(target_cov)
        )
    return NormalityDiagnostics(
        empirical_cov=emp_cov,
        target_cov=target_cov,
        rel_frobenius=rel_frob,
        skewness=stats.skew(z, axis=0),
        excess_kurtosis=stats.kurtosis(z, axis=0),
    )


@dataclass
class MethodMetrics:
    coef_mse: np.ndarray
    mpe_train: float
    ape_train: float
    mpe_fresh: float
    ape_fresh: float
    runtime_s: float
    estimates: np.ndarray

    def to_jsonable(self) -> dict:
        return {
            "coef_mse": self.coef_mse.tolist(),
            "mpe_train": self.mpe_train,
            "ape_train": self.ape_train,
            "mpe_fresh": self.mpe_fresh,
            "ape_fresh": self.ape_fresh,
            "runtime_s": self.runtime_s,
        }


@dataclass
class BenchmarkReport:
    experiment: str
    replications: int
    failed: int
    methods: dict[str, MethodMetrics]
    inequality_counts: dict[str, int]
    normality: dict[str, NormalityDiagnostics] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "replications": self.replications,
            "failed": self.failed,
            "methods": {k: v.to_jsonable() for k, v in sorted(self.methods.items())},
            "inequality_counts": dict(sorted(self.inequality_counts.items())),
            "normality": {
                k: v.to_jsonable() for k, v in sorted(self.normality.items())
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_text_table(self) -> str:
        """Plain-text metrics table, one row per method."""
        lines = [
            f"experiment: {self.experiment}   replications: {self.replications}"
            f"   failed: {self.failed}",
            "",
        ]
        p = next(iter(self.methods.values())).coef_mse.size if self.methods else 0
        show_coords = p <= 6
        header = ["method"]
        if show_coords:
            header += [f"MSE(b{k + 1})" for k in range(p)]
        else:
            header += ["mean MSE"]
        header += ["MPE", "APE", "MPE*", "APE*"]
        rows = [header]
        for name, mm in self.methods.items():
            row = [name]
            if show_coords:
                row += [f"{v:.4f}" for v in mm.coef_mse]
            else:
                row += [f"{float(mm.coef_mse.mean()):.4f}"]
            row += [
                f"{mm.mpe_train:.4f}",
                f"{mm.ape_train:.4f}",
                f"{mm.mpe_fresh:.4f}",
                f"{mm.ape_fresh:.4f}",
            ]
            rows.append(row)
        widths = [max(len(r[j]) for r in rows) for j in range(len(header))]
        for r in rows:
            lines.append("  ".join(s.rjust(w) for s, w in zip(r, widths)))
        lines.append("")
        lines.append("MPE/APE: training sample;  MPE*/APE*: fresh sample")
        if self.inequality_counts:
            lines.append("")
            for key, count in sorted(self.inequality_counts.items()):
                lines.append(f"{key}: {count}/{self.replications - self.failed}")
        return "\n".join(lines)


def _fit_method(
    name: str,
    data: Dataset,
    solver: SolverConfig,
    lasso: LassoConfig,
) -> FitResult:
    if name == "ols":
        return ols_fit(data)
    if name == "minimax":
        return minimax_fit(data, solver)
    if name == "profile":
        return profile_minimax_fit(data, solver, init="minimax")
    if name == "glasso":
        return glasso_fit(data, lasso)
    if name == "glasso_mu":
        return glasso_mean_uncertain_fit(data, lasso)
    raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")


def run_benchmark(
    experiment_id: str,
    methods: list[str],
    replications: int,
    seed: int = 0,
    solver: SolverConfig | None = None,
    lasso: LassoConfig | None = None,
    fixed_family: DistributionFamily | None = None,
    config: ExperimentConfig | None = None,
) -> BenchmarkReport:
    """Monte Carlo comparison of fitting methods on a named experiment.

    Every replication draws a training dataset and an independent fresh
    dataset of identical design (same realized error family) from a child
    stream of ``seed``, fits each method on the same training data, and
    accumulates risk metrics.  With ``fixed_family`` the error family is held
    constant across replications, which also enables normality diagnostics
    against the limiting covariance.  A replication where some fit raises is
    counted in ``failed`` and excluded from all aggregates.
    """
    if not methods:
        raise ValueError("methods must be nonempty")
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    solver = solver or SolverConfig()
    lasso = lasso or LassoConfig()
    base = config if config is not None else experiment_config(experiment_id, seed)
    if fixed_family is not None:
        base = ExperimentConfig(
            p=base.p,
            beta0=base.beta0,
            covariate_law=base.covariate_law,
            error_mean_range=base.error_mean_range,
            error_var_range=base.error_var_range,
            m=base.m,
            n=base.n,
            seed=base.seed,
            fixed_family=fixed_family,
        )

    master = np.random.SeedSequence(seed)
    rep_seqs = master.spawn(replications)
    per_method: dict[str, dict] = {
        name: {
            "betas": [],
            "mpe_train": [],
            "ape_train": [],
            "mpe_fresh": [],
            "ape_fresh": [],
            "runtime": 0.0,
        }
        for name in methods
    }
    counts = {
        "minimax_mpe_le_ols": 0,
        "minimax_ape_ge_ols": 0,
        "profile_shifted_mpe_le_ols": 0,
    }
    track_minimax = "ols" in methods and "minimax" in methods
    track_profile = "ols" in methods and "profile" in methods
    failed = 0

    for rep_seq in rep_seqs:
        train_seq, fresh_seq = rep_seq.spawn(2)
        sim = generate(base, train_seq)
        fresh_cfg = ExperimentConfig(
            p=base.p,
            beta0=base.beta0,
            covariate_law=base.covariate_law,
            error_mean_range=base.error_mean_range,
            error_var_range=base.error_var_range,
            m=base.m,
            n=base.n,
            seed=base.seed,
            fixed_family=sim.family,
        )
        fresh = generate(fresh_cfg, fresh_seq)

        results: dict[str, FitResult] = {}
        try:
            for name in methods:
                start = time.perf_counter()
                results[name] = _fit_method(name, sim.dataset, solver, lasso)
                per_method[name]["runtime"] += time.perf_counter() - start
        except (ValueError, np.linalg.LinAlgError):
            failed += 1
            continue

        for name, res in results.items():
            shift = res.mu_upper_hat if res.mu_upper_hat is not None else 0.0
            acc = per_method[name]
            acc["betas"].append(res.beta)
            acc["mpe_train"].append(mpe(sim.dataset, res.beta, shift))
            acc["ape_train"].append(ape(sim.dataset, res.beta, shift))
            acc["mpe_fresh"].append(mpe(fresh.dataset, res.beta, shift))
            acc["ape_fresh"].append(ape(fresh.dataset, res.beta, shift))

        if track_minimax:
            ols_mpe = per_method["ols"]["mpe_train"][-1]
            ols_ape = per_method["ols"]["ape_train"][-1]
            if per_method["minimax"]["mpe_train"][-1] <= ols_mpe + INEQUALITY_SLACK:
                counts["minimax_mpe_le_ols"] += 1
            if per_method["minimax"]["ape_train"][-1] >= ols_ape - INEQUALITY_SLACK:
                counts["minimax_ape_ge_ols"] += 1
        if track_profile:
            ols_mpe = per_method["ols"]["mpe_train"][-1]
            if per_method["profile"]["mpe_train"][-1] <= ols_mpe + INEQUALITY_SLACK:
                counts["profile_shifted_mpe_le_ols"] += 1

    report_methods = {}
    for name in methods:
        acc = per_method[name]
        betas = np.array(acc["betas"]) if acc["betas"] else np.empty((0, base.p))
        report_methods[name] = MethodMetrics(
            coef_mse=coefficient_mse(betas, base.beta0)
            if betas.size
            else np.full(base.p, np.nan),
            mpe_train=float(np.mean(acc["mpe_train"])) if acc["mpe_train"] else np.nan,
            ape_train=float(np.mean(acc["ape_train"])) if acc["ape_train"] else np.nan,
            mpe_fresh=float(np.mean(acc["mpe_fresh"])) if acc["mpe_fresh"] else np.nan,
            ape_fresh=float(np.mean(acc["ape_fresh"])) if acc["ape_fresh"] else np.nan,
            runtime_s=acc["runtime"],
            estimates=betas,
        )

    normality: dict[str, NormalityDiagnostics] = {}
    if fixed_family is not None:
        exx = base.exx()
        raw2 = fixed_family.raw_second_moments()
        sigma2_star = float(raw2.max())
        mu_up = float(fixed_family.means.max())
        v2 = fixed_family.variances + (mu_up - fixed_family.means) ** 2
        k_star = int(np.argmax(v2))
        sigma2_k_star = float(fixed_family.variances[k_star])
        for name in methods:
            mm = report_methods[name]
            if name in ("minimax", "glasso") and mm.estimates.shape[0] >= 100:
                normality[name] = normality_check(
                    mm.estimates, base.beta0, base.n, sigma2_star, exx
                )
            elif name in ("profile", "glasso_mu") and mm.estimates.shape[0] >= 100:
                normality[name] = normality_check(
                    mm.estimates, base.beta0, base.n, sigma2_k_star, exx
                )

    if not track_minimax:
        counts.pop("minimax_mpe_le_ols")
        counts.pop("minimax_ape_ge_ols")
    if not track_profile:
        counts.pop("profile_shifted_mpe_le_ols")

    return BenchmarkReport(
        experiment=experiment_id,
        replications=replications,
        failed=failed,
        methods=report_methods,
        inequality_counts=counts,
        normality=normality,
    )
