from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from dagprobit.errors import NumericalError, ValidationError
from dagprobit.graphs.dag import RESPONSE, Dag

# Standardised truncation bound beyond which the inverse-CDF sampler loses
# precision and draws are delegated to scipy's tail-robust sampler.
TAIL_CUTOFF = 6.0


@dataclass
class CholeskyFactor:
    """
    Modified Cholesky parameters (D, L) of a precision matrix
    Omega = L D^{-1} L^T that is Markov with respect to a DAG.

    `sigma2[j]` is the conditional variance of node j given its parents and
    `L[u, j]` the coefficient of parent u in the structural equation
    x_j = -L[pa(j), j]^T x_pa(j) + e_j. The diagonal of L is one and every
    other nonzero entry sits on an edge of the DAG.
    """

    sigma2: np.ndarray
    L: np.ndarray

    @property
    def q(self) -> int:
        return len(self.sigma2)

    @classmethod
    def identity(cls, q: int) -> "CholeskyFactor":
        return cls(np.ones(q), np.eye(q))

    @classmethod
    def from_coeffs(cls, dag: Dag, sigma2, coeffs) -> "CholeskyFactor":
        """
        Builds the factor from per-node coefficient vectors ordered as
        `dag.parents(j)`.
        """
        L = np.eye(dag.q)
        for j in range(dag.q):
            pa = dag.parents(j)
            c = np.asarray(coeffs[j], dtype=float)
            if c.shape != (len(pa),):
                raise ValidationError(
                    f"node {j} has {len(pa)} parents but {c.size} coefficients"
                )
            L[pa, j] = c
        return cls(np.asarray(sigma2, dtype=float).copy(), L)

    def coeffs(self, dag: Dag, j: int) -> np.ndarray:
        return self.L[dag.parents(j), j]

    def copy(self) -> "CholeskyFactor":
        return CholeskyFactor(self.sigma2.copy(), self.L.copy())

    def check(self, dag: Dag, fixed_response: bool = True):
        if self.L.shape != (dag.q, dag.q) or self.sigma2.shape != (dag.q,):
            raise ValidationError(
                f"Cholesky factor of size {self.q} does not match a DAG on {dag.q} vertices"
            )
        if not np.all(self.sigma2 > 0):
            raise ValidationError("conditional variances must be positive")
        if fixed_response and self.sigma2[RESPONSE] != 1.0:
            raise ValidationError("the response variance is fixed at 1")
        if not np.all(np.diag(self.L) == 1.0):
            raise ValidationError("L must have a unit diagonal")
        off_support = (self.L != 0) & ~dag.adj & ~np.eye(dag.q, dtype=bool)
        if off_support.any():
            raise ValidationError("L has coefficients outside the edges of the DAG")


@dataclass
class TruncatedNormalSpec:
    mean: float
    variance: float
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if not self.variance > 0:
            raise ValidationError(f"variance must be positive, got {self.variance}")
        if not self.lower < self.upper:
            raise ValidationError(
                f"empty truncation interval ({self.lower}, {self.upper}]"
            )


def _check_dims(dag: Dag, chol: CholeskyFactor):
    if chol.q != dag.q or chol.L.shape != (dag.q, dag.q):
        raise ValidationError(
            f"Cholesky factor of size {chol.q} does not match a DAG on {dag.q} vertices"
        )


def omega_from_cholesky(dag: Dag, chol: CholeskyFactor) -> np.ndarray:
    _check_dims(dag, chol)
    return chol.L @ np.diag(1.0 / chol.sigma2) @ chol.L.T


def unit_factor_inverse(dag: Dag, L: np.ndarray) -> np.ndarray:
    """
    Inverse of L. Under a topological order of the DAG, L is unit upper
    triangular, so a triangular solve suffices.
    """
    order = dag.topological_order()
    block = np.ix_(order, order)
    inv_ordered = linalg.solve_triangular(
        L[block], np.eye(dag.q), lower=False, unit_diagonal=True
    )
    inv = np.empty_like(inv_ordered)
    inv[block] = inv_ordered
    return inv


def sigma_from_cholesky(dag: Dag, chol: CholeskyFactor) -> np.ndarray:
    _check_dims(dag, chol)
    L_inv = unit_factor_inverse(dag, chol.L)
    sigma = L_inv.T @ np.diag(chol.sigma2) @ L_inv
    return (sigma + sigma.T) / 2


def check_spd(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Returns the lower Cholesky factor, raising NumericalError when `matrix`
    is not symmetric positive definite.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=1e-8, atol=1e-10):
        raise NumericalError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{name} is not positive definite")


def cholesky_from_sigma(dag: Dag, sigma: np.ndarray) -> CholeskyFactor:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (dag.q, dag.q):
        raise ValidationError(f"covariance of shape {sigma.shape} does not match q={dag.q}")
    check_spd(sigma, "covariance")
    L = np.eye(dag.q)
    sigma2 = np.empty(dag.q)
    for j in range(dag.q):
        pa = dag.parents(j)
        if len(pa) == 0:
            sigma2[j] = sigma[j, j]
            continue
        beta = linalg.solve(sigma[np.ix_(pa, pa)], sigma[pa, j], assume_a="pos")
        L[pa, j] = -beta
        sigma2[j] = sigma[j, j] - sigma[j, pa] @ beta
    return CholeskyFactor(sigma2, L)


def log_det_spd(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    try:
        c, _ = linalg.cho_factor(matrix, lower=True)
    except linalg.LinAlgError:
        raise NumericalError("matrix is not positive definite")
    return 2.0 * np.sum(np.log(np.diag(c)))


def sample_truncated_normal_array(mean, sd, lower, upper, rng: np.random.Generator):
    """
    Vectorised draws from N(mean, sd^2) restricted to (lower, upper].

    Intervals in the upper half are mirrored so the inverse CDF is always
    evaluated where the normal CDF keeps full relative precision; intervals
    lying more than TAIL_CUTOFF standard deviations out use
    `scipy.stats.truncnorm`.
    """
    shape = np.broadcast(mean, sd, lower, upper).shape
    mean, sd, lower, upper = (
        np.array(x, dtype=float).ravel()
        for x in np.broadcast_arrays(mean, sd, lower, upper)
    )
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)

    z = np.empty(lo.shape)
    tail = hi < -TAIL_CUTOFF
    body = ~tail
    if body.any():
        u = rng.uniform(stats.norm.cdf(lo[body]), stats.norm.cdf(hi[body]))
        z[body] = stats.norm.ppf(u)
    if tail.any():
        z[tail] = stats.truncnorm.rvs(lo[tail], hi[tail], random_state=rng)
    z = np.clip(z, lo, hi)
    z = np.where(flip, -z, z)
    x = mean + sd * z
    x = np.minimum(np.maximum(x, np.nextafter(lower, np.inf)), upper)
    return x.reshape(shape)


def sample_truncated_normal(spec: TruncatedNormalSpec, rng: np.random.Generator) -> float:
    return float(
        sample_truncated_normal_array(
            spec.mean, np.sqrt(spec.variance), spec.lower, spec.upper, rng
        )
    )


def sample_mvn(mean, cov, rng: np.random.Generator, size: int = None) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    chol = check_spd(cov, "covariance")
    if chol.shape[0] != mean.shape[0]:
        raise ValidationError("mean and covariance dimensions differ")
    if size is None:
        return mean + chol @ rng.standard_normal(mean.shape[0])
    return mean + rng.standard_normal((size, mean.shape[0])) @ chol.T


def sample_mvn_precision(mean, precision, scale: float, rng: np.random.Generator):
    """
    Draws from N(mean, scale * precision^{-1}) without forming the inverse.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.size == 0:
        return mean.copy()
    chol = check_spd(precision, "precision")
    z = rng.standard_normal(mean.shape[0])
    return mean + np.sqrt(scale) * linalg.solve_triangular(chol, z, lower=True, trans="T")


def sample_inverse_gamma(shape, rate, rng: np.random.Generator, size=None):
    if not np.all(np.asarray(shape) > 0) or not np.all(np.asarray(rate) > 0):
        raise ValidationError(f"inverse-gamma needs shape > 0 and rate > 0, got {shape}, {rate}")
    return stats.invgamma.rvs(shape, scale=rate, size=size, random_state=rng)


def log_interval_probability(lower, upper, mean=0.0, sd=1.0):
    """
    log P(lower < Z <= upper) for Z ~ N(mean, sd^2), vectorised and stable far
    into either tail.
    """
    a = (np.asarray(lower, dtype=float) - mean) / sd
    b = (np.asarray(upper, dtype=float) - mean) / sd
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        return log_hi + np.log1p(-np.exp(log_lo - log_hi))
