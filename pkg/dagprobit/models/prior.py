from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from dagprobit.errors import HyperparameterError
from dagprobit.graphs.dag import RESPONSE, Dag
from dagprobit.models.gauss import CholeskyFactor, sample_inverse_gamma


@dataclass
class Hyperparameters:
    """
    Prior and proposal settings. The Wishart scale matrix is U = g * I.
    """

    a: float
    g: float
    pi: float
    sigma0_sq: float = 0.25

    @classmethod
    def default(cls, q: int, n: int) -> "Hyperparameters":
        pi = 3.0 / (2 * q - 2) if q > 2 else 0.5
        g = 1.0 / n if n > 0 else 1.0
        return cls(a=q + 1.0, g=g, pi=pi, sigma0_sq=0.25)

    def validate(self, q: int) -> "Hyperparameters":
        if not self.a > q - 1:
            raise HyperparameterError(f"Wishart shape a={self.a} must exceed q-1={q - 1}")
        if not self.g > 0:
            raise HyperparameterError(f"scale g={self.g} must be positive")
        if not 0 < self.pi < 1:
            raise HyperparameterError(f"edge probability pi={self.pi} must lie in (0, 1)")
        if not self.sigma0_sq > 0:
            raise HyperparameterError(
                f"threshold proposal variance sigma0_sq={self.sigma0_sq} must be positive"
            )
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def node_shape(hp: Hyperparameters, q: int, npa: int) -> float:
    """
    Shape of the inverse-gamma prior on a conditional variance whose node
    has `npa` parents.
    """
    shape = (hp.a + npa - q + 3) / 2.0 - 1.0
    if not shape > 0:
        raise HyperparameterError(
            f"non-positive inverse-gamma shape {shape} for a={hp.a}, q={q}, |pa|={npa}"
        )
    return shape


def sample_prior_cholesky(
    dag: Dag, hp: Hyperparameters, rng: np.random.Generator, fixed_response: bool = True
) -> CholeskyFactor:
    """
    Independent node-wise draws. With `fixed_response=False` the response
    variance is drawn like any other, giving the unconstrained Wishart prior
    on the complete DAG.
    """
    q = dag.q
    sigma2 = np.ones(q)
    coeffs = []
    for j in range(q):
        npa = len(dag.parents(j))
        if j == RESPONSE and fixed_response:
            coeffs.append(rng.standard_normal(npa) / np.sqrt(hp.g))
            continue
        sigma2[j] = sample_inverse_gamma(node_shape(hp, q, npa), hp.g / 2.0, rng)
        coeffs.append(rng.standard_normal(npa) * np.sqrt(sigma2[j] / hp.g))
    return CholeskyFactor.from_coeffs(dag, sigma2, coeffs)


def log_prior_cholesky(dag: Dag, hp: Hyperparameters, chol: CholeskyFactor) -> float:
    """
    Log density of (D, L) under the DAG-Wishart prior. The response variance
    is fixed, so only its coefficients contribute.
    """
    total = 0.0
    for j in range(dag.q):
        c = chol.coeffs(dag, j)
        if j == RESPONSE:
            total += stats.norm.logpdf(c, scale=np.sqrt(1.0 / hp.g)).sum()
            continue
        shape = node_shape(hp, dag.q, len(c))
        total += stats.invgamma.logpdf(chol.sigma2[j], shape, scale=hp.g / 2.0)
        total += stats.norm.logpdf(c, scale=np.sqrt(chol.sigma2[j] / hp.g)).sum()
    return float(total)


def log_prior_dag(dag: Dag, hp: Hyperparameters) -> float:
    n_pairs = dag.q * (dag.q - 1) // 2
    k = dag.skeleton_size
    return k * np.log(hp.pi) + (n_pairs - k) * np.log1p(-hp.pi)
