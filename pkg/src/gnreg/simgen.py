"""Seeded simulation generators for the benchmark experiments.

Errors are sampled blockwise: each block draws a mean from [mu_lo, mu_hi] and
a variance from [var_lo, var_hi], then fills the block with normals at those
parameters.  Streams are split per block with `numpy.random.SeedSequence`, so
blocks could be generated concurrently with identical output; covariates use
one further stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DistributionFamily, FamilyMember
from .partition import time_order_partition

EXPERIMENT_IDS = ("exp1", "exp2", "exp3_indep", "exp3_corr", "exp4")


@dataclass(frozen=True)
class IIDNormal:
    """Covariate columns drawn independently from N(mean, var)."""

    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if self.var < 0:
            raise ValueError("variance must be nonnegative")


@dataclass(frozen=True)
class MultivariateNormal:
    """Covariate rows drawn from N(mean, cov)."""

    cov: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be a square matrix")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        if self.mean is not None:
            mean = np.asarray(self.mean, dtype=float)
            if mean.shape != (cov.shape[0],):
                raise ValueError("mean length must match covariance size")
            mean.setflags(write=False)
            object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    beta0: np.ndarray
    covariate_law: IIDNormal | MultivariateNormal
    error_mean_range: tuple[float, float]
    error_var_range: tuple[float, float]
    m: int
    n: int
    seed: int = 0
    fixed_family: DistributionFamily | None = None

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=float)
        if beta0.shape != (self.p,):
            raise ValueError(f"beta0 must have length p={self.p}")
        beta0.setflags(write=False)
        object.__setattr__(self, "beta0", beta0)
        mu_lo, mu_hi = self.error_mean_range
        var_lo, var_hi = self.error_var_range
        if mu_lo > mu_hi:
            raise ValueError("error mean range must satisfy lo <= hi")
        if not 0 <= var_lo <= var_hi:
            raise ValueError("error variance range must satisfy 0 <= lo <= hi")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if self.fixed_family is not None and self.fixed_family.size != self.m:
            raise ValueError("fixed_family must have one member per block")

    def exx(self) -> np.ndarray:
        """Population second-moment matrix E[xx'] of the covariates."""
        if isinstance(self.covariate_law, IIDNormal):
            law = self.covariate_law
            return law.var * np.eye(self.p) + law.mean**2 * np.ones((self.p, self.p))
        cov = self.covariate_law.cov
        mean = self.covariate_law.mean
        if mean is None:
            return cov.copy()
        return cov + np.outer(mean, mean)

    def ex(self) -> np.ndarray:
        """Population covariate mean E[x]."""
        if isinstance(self.covariate_law, IIDNormal):
            return np.full(self.p, self.covariate_law.mean)
        mean = self.covariate_law.mean
        return np.zeros(self.p) if mean is None else mean.copy()


def equicorrelation(p: int, rho: float) -> np.ndarray:
    """Unit-diagonal covariance with constant off-diagonal correlation rho."""
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def sample_block_errors(
    config: ExperimentConfig, rng
) -> tuple[np.ndarray, DistributionFamily]:
    """Blockwise error sample plus the realized (mean, variance) family.

    ``rng`` is an integer seed or a `SeedSequence`; block i uses the i-th
    spawned child stream for both its parameters and its normals.  With
    ``config.fixed_family`` set, parameters are taken from it instead of drawn.
    """
    seq = _as_seedseq(rng)
    children = seq.spawn(config.m)
    mu_lo, mu_hi = config.error_mean_range
    var_lo, var_hi = config.error_var_range
    errors = np.empty((config.m, config.n))
    members = []
    for i, child in enumerate(children):
        gen = np.random.Generator(np.random.PCG64(child))
        if config.fixed_family is not None:
            mu_i, var_i = config.fixed_family.members[i]
        else:
            var_i = gen.uniform(var_lo, var_hi)
            mu_i = gen.uniform(mu_lo, mu_hi)
        errors[i] = mu_i + np.sqrt(var_i) * gen.standard_normal(config.n)
        members.append(FamilyMember(float(mu_i), float(var_i)))
    return errors, DistributionFamily(tuple(members))


def sample_covariates(config: ExperimentConfig, rng) -> np.ndarray:
    seq = _as_seedseq(rng)
    gen = np.random.Generator(np.random.PCG64(seq))
    n_rows = config.m * config.n
    law = config.covariate_law
    if isinstance(law, IIDNormal):
        return law.mean + np.sqrt(law.var) * gen.standard_normal((n_rows, config.p))
    mean = law.mean if law.mean is not None else np.zeros(config.p)
    return gen.multivariate_normal(mean, law.cov, size=n_rows, method="cholesky")


@dataclass(frozen=True)
class SimulatedExperiment:
    """A generated dataset together with its ground truth."""

    dataset: Dataset
    beta0: np.ndarray
    family: DistributionFamily
    config: ExperimentConfig


def generate(config: ExperimentConfig, rng=None) -> SimulatedExperiment:
    """Generate one dataset from ``config`` (time-ordered blocks)."""
    seq = _as_seedseq(config.seed if rng is None else rng)
    cov_seq, err_seq = seq.spawn(2)
    x = sample_covariates(config, cov_seq)
    errors, family = sample_block_errors(config, err_seq)
    y = x @ config.beta0 + errors.reshape(-1)
    blocks = time_order_partition(config.m * config.n, config.m)
    return SimulatedExperiment(
        dataset=Dataset(y=y, x=x, blocks=blocks),
        beta0=config.beta0,
        family=family,
        config=config,
    )


def experiment_config(experiment_id: str, seed: int = 0) -> ExperimentConfig:
    """Canonical benchmark configurations by identifier."""
    if experiment_id == "exp1":
        return ExperimentConfig(
            p=3,
            beta0=np.ones(3),
            covariate_law=IIDNormal(mean=10.0, var=2.0),
            error_mean_range=(0.0, 0.0),
            error_var_range=(0.0, 3.0),
            m=10,
            n=10,
            seed=seed,
        )
    if experiment_id == "exp2":
        return ExperimentConfig(
            p=3,
            beta0=np.ones(3),
            covariate_law=IIDNormal(mean=0.0, var=1.0),
            error_mean_range=(3.0, 5.0),
            error_var_range=(0.0, 4.0),
            m=10,
            n=20,
            seed=seed,
        )
    if experiment_id in ("exp3_indep", "exp3_corr", "exp4"):
        beta0 = np.zeros(40)
        beta0[:5] = 1.0
        if experiment_id == "exp3_corr":
            law: IIDNormal | MultivariateNormal = MultivariateNormal(
                equicorrelation(40, 0.5)
            )
        else:
            law = IIDNormal(mean=0.0, var=1.0)
        mean_range = (5.0, 10.0) if experiment_id == "exp4" else (0.0, 0.0)
        return ExperimentConfig(
            p=40,
            beta0=beta0,
            covariate_law=law,
            error_mean_range=mean_range,
            error_var_range=(1.0, 4.0),
            m=10,
            n=200,
            seed=seed,
        )
    raise ValueError(f"unknown experiment id {experiment_id!r}")


def make_experiment(experiment_id: str, seed: int = 0) -> SimulatedExperiment:
    """Generate the named benchmark experiment at the given seed."""
    return generate(experiment_config(experiment_id, seed))
