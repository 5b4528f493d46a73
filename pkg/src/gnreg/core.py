"""Domain types and population-level identities.

The error distribution is modeled as a finite family of (mean, variance)
members, one per data block.  The sublinear expectation of a functional over
the family is the maximum of the member-wise linear expectations; upper/lower
means and second moments fall out as maxima/minima over members.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

# Relative pivot threshold below which a symmetric system is declared singular.
PIVOT_RTOL = 1e-12


class FamilyMember(NamedTuple):
    """One (mean, variance) member of a distribution family."""

    mu: float
    sigma2: float


class SupremumResult(NamedTuple):
    """Value of a family supremum together with the attaining member (1-based)."""

    value: float
    member: int


@dataclass(frozen=True)
class DistributionFamily:
    """Finite family of (mean, variance) pairs, one member per block."""

    members: tuple[FamilyMember, ...]

    def __post_init__(self):
        members = tuple(FamilyMember(float(mu), float(s2)) for mu, s2 in self.members)
        if len(members) == 0:
            raise ValueError("empty distribution family")
        for mb in members:
            if not (np.isfinite(mb.mu) and np.isfinite(mb.sigma2)):
                raise ValueError("family members must be finite")
            if mb.sigma2 < 0:
                raise ValueError(f"negative variance {mb.sigma2} in family member")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_arrays(cls, means, variances) -> "DistributionFamily":
        means = np.atleast_1d(np.asarray(means, dtype=float))
        variances = np.atleast_1d(np.asarray(variances, dtype=float))
        if means.shape != variances.shape:
            raise ValueError("means and variances must have equal length")
        return cls(tuple(FamilyMember(m, v) for m, v in zip(means, variances)))

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def means(self) -> np.ndarray:
        return np.array([mb.mu for mb in self.members])

    @property
    def variances(self) -> np.ndarray:
        """Central variances sigma_i^2 of the members."""
        return np.array([mb.sigma2 for mb in self.members])

    def raw_second_moments(self) -> np.ndarray:
        """E[eps^2] per member, i.e. sigma_i^2 + mu_i^2."""
        return self.variances + self.means**2

    def max_raw_block(self) -> int:
        """1-based index of the member with the largest raw second moment."""
        return int(np.argmax(self.raw_second_moments())) + 1

    def max_shifted_block(self) -> int:
        """1-based index maximizing sigma_i^2 + (mu_upper - mu_i)^2."""
        mu_up = self.means.max()
        v2 = self.variances + (mu_up - self.means) ** 2
        return int(np.argmax(v2)) + 1


@dataclass(frozen=True)
class SublinearMoments:
    """Upper/lower mean and upper/lower raw second moment of a family."""

    mu_upper: float
    mu_lower: float
    sigma2_upper: float
    sigma2_lower: float

    def __post_init__(self):
        if self.mu_lower > self.mu_upper:
            raise ValueError("mu_lower exceeds mu_upper")
        if not (0 <= self.sigma2_lower <= self.sigma2_upper):
            raise ValueError("second moments must satisfy 0 <= lower <= upper")


def sublinear_expectation(
    family: DistributionFamily,
    functional: Callable[[FamilyMember], float],
) -> SupremumResult:
    """Maximum of the member-wise linear expectations of ``functional``.

    ``functional`` maps a (mean, variance) member to the linear expectation of
    some transform of the error under that member, e.g. ``lambda mb: mb.mu``
    for the identity transform.  Returns the supremum and the 1-based index of
    the attaining member (lowest index on ties).
    """
    if family.size == 0:  # defensive; the type forbids this
        raise ValueError("empty distribution family")
    values = np.array([float(functional(mb)) for mb in family.members])
    idx = int(np.argmax(values))
    return SupremumResult(float(values[idx]), idx + 1)


def sublinear_moments(family: DistributionFamily) -> SublinearMoments:
    """Upper/lower means and raw second moments over the family."""
    mus = family.means
    raw2 = family.raw_second_moments()
    return SublinearMoments(
        mu_upper=float(mus.max()),
        mu_lower=float(mus.min()),
        sigma2_upper=float(raw2.max()),
        sigma2_lower=float(raw2.min()),
    )


@dataclass(frozen=True)
class BlockPartition:
    """Disjoint index sets covering the rows 0..N-1 of a dataset."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=np.intp) for b in self.blocks)
        if len(blocks) == 0:
            raise ValueError("partition needs at least one block")
        for b in blocks:
            b.setflags(write=False)
            if b.ndim != 1 or b.size == 0:
                raise ValueError("each block must be a nonempty 1-d index array")
        all_idx = np.concatenate(blocks)
        n = all_idx.size
        seen = np.sort(all_idx)
        if not np.array_equal(seen, np.arange(n)):
            raise ValueError("blocks must be disjoint and cover rows 0..N-1 exactly")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks])

    @property
    def n_rows(self) -> int:
        return int(self.sizes.sum())

    @property
    def is_balanced(self) -> bool:
        sizes = self.sizes
        return bool(np.all(sizes == sizes[0]))

    @property
    def n(self) -> int:
        """Common block size; only defined for balanced partitions."""
        if not self.is_balanced:
            raise ValueError("unbalanced partition")
        return int(self.blocks[0].size)


@dataclass(frozen=True)
class Dataset:
    """Responses, covariates and a block partition over the rows."""

    y: np.ndarray
    x: np.ndarray
    blocks: BlockPartition

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1:
            raise ValueError("y must be a 1-d vector")
        if x.ndim != 2:
            raise ValueError("x must be a 2-d matrix")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[1] < 1:
            raise ValueError("x needs at least one column")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if self.blocks.n_rows != y.shape[0]:
            raise ValueError(
                f"partition covers {self.blocks.n_rows} rows, data has {y.shape[0]}"
            )
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n_rows(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    @property
    def m(self) -> int:
        return self.blocks.m


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients plus solver and block diagnostics.

    ``active_block`` is the 1-based index of the block attaining the maximum
    block risk at the solution.  ``mu_upper_hat`` is populated only by the
    mean-uncertainty estimators.
    """

    beta: np.ndarray
    objective_value: float
    active_block: int
    iterations: int
    converged: bool
    mu_upper_hat: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.objective_value < -1e-12:
            raise ValueError("objective value must be nonnegative")
        if self.active_block < 1:
            raise ValueError("active_block is 1-based and must be >= 1")

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])


def _spd_solve(a: np.ndarray, rhs: np.ndarray, err: str) -> np.ndarray:
    """Solve a symmetric positive-definite system via Cholesky.

    Declares the matrix singular when the smallest squared pivot falls below
    PIVOT_RTOL times the largest, so near-singular systems fail loudly and
    deterministically instead of returning garbage.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] != rhs.shape[0]:
        raise ValueError("matrix and right-hand side sizes differ")
    if not np.allclose(a, a.T, rtol=1e-8, atol=1e-10):
        raise ValueError(err)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ValueError(err) from None
    pivots = np.diag(chol) ** 2
    if pivots.min() < PIVOT_RTOL * pivots.max():
        raise ValueError(err)
    z = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol.T, z, lower=False)


def population_beta_mean_certain(exx: np.ndarray, ex_ce: np.ndarray) -> np.ndarray:
    """Coefficients identified by a mean-certain error model.

    ``exx`` is E[xx'] and ``ex_ce`` is E{x * (upper conditional mean of Y)}.
    """
    return _spd_solve(exx, ex_ce, "covariate second-moment matrix not invertible")


def population_beta_mean_uncertain(
    exx: np.ndarray,
    ex_ce: np.ndarray,
    ex: np.ndarray,
    mu_upper: float,
) -> np.ndarray:
    """Coefficients identified under mean-uncertainty.

    Subtracts the upper-mean correction mu_upper * (E[xx'])^{-1} E[x] from the
    mean-certain formula; with ex = 0 the two coincide bit for bit.
    """
    beta = population_beta_mean_certain(exx, ex_ce)
    correction = mu_upper * _spd_solve(
        exx, np.asarray(ex, dtype=float), "covariate second-moment matrix not invertible"
    )
    return beta - correction
