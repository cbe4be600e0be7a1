import logging
import time
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg, special
from tqdm import tqdm

from dagprobit.errors import NumericalError, ValidationError
from dagprobit.graphs.dag import (
    RESPONSE,
    Dag,
    DagOperator,
    apply_operator,
    count_valid_operators,
    valid_operators,
)
from dagprobit.models.gauss import (
    CholeskyFactor,
    log_det_spd,
    log_interval_probability,
    sample_inverse_gamma,
    sample_mvn_precision,
    sample_truncated_normal_array,
)
from dagprobit.models.prior import Hyperparameters, log_prior_dag, node_shape
from dagprobit.samplers.base_sampler import BaseSampler
from dagprobit.samplers.chain import ChainConfig, ChainOutput, Dataset, McmcState

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2 * np.pi)

COUNTER_KEYS = ("dag_proposed", "dag_accepted", "theta0_proposed", "theta0_accepted")


@dataclass
class NodeSuffStats:
    """
    Conjugate quantities for the regression of node j on its parents:
    prior precision T = gI, posterior precision Tbar = gI + X_pa^T X_pa and
    the ridge estimate Lhat = Tbar^{-1} X_pa^T X_j.
    """

    T: np.ndarray
    Tbar: np.ndarray
    Lhat: np.ndarray
    xtx: float
    n: int

    @classmethod
    def from_gram(cls, gram: np.ndarray, n: int, j: int, pa, g: float) -> "NodeSuffStats":
        pa = np.asarray(pa, dtype=int)
        T = g * np.eye(len(pa))
        Tbar = T + gram[np.ix_(pa, pa)]
        if len(pa):
            try:
                factor = linalg.cho_factor(Tbar, lower=True)
            except linalg.LinAlgError:
                raise NumericalError(f"posterior precision of node {j} is not positive definite")
            Lhat = linalg.cho_solve(factor, gram[pa, j])
        else:
            Lhat = np.zeros(0)
        return cls(T, Tbar, Lhat, float(gram[j, j]), n)

    @property
    def residual(self) -> float:
        return self.xtx - float(self.Lhat @ self.Tbar @ self.Lhat)

    def log_det_ratio(self) -> float:
        return 0.5 * (log_det_spd(self.T) - log_det_spd(self.Tbar))


def log_marginal_node(j: int, pa, X: np.ndarray, hp: Hyperparameters, gram=None) -> float:
    """
    Log marginal likelihood of column j of the augmented data given its
    parents, with the node parameters integrated out. The response has unit
    variance, so only its coefficients are integrated.
    """
    n, q = X.shape
    if gram is None:
        gram = X.T @ X
    stats = NodeSuffStats.from_gram(gram, n, j, pa, hp.g)
    base = -0.5 * n * LOG_2PI + stats.log_det_ratio()
    if j == RESPONSE:
        return base - 0.5 * stats.residual
    shape = node_shape(hp, q, len(stats.Lhat))
    rate = 0.5 * (hp.g + stats.residual)
    return (
        base
        + special.gammaln(shape + n / 2)
        - special.gammaln(shape)
        + shape * np.log(hp.g / 2)
        - (shape + n / 2) * np.log(rate)
    )


def log_dag_acceptance(
    dag: Dag,
    op: DagOperator,
    X: np.ndarray,
    hp: Hyperparameters,
    gram=None,
    max_edges: int = None,
) -> Tuple[float, Dag]:
    """
    Log acceptance ratio of moving from `dag` by `op`, returned with the
    proposed graph. Only nodes whose parent set changes contribute.
    """
    if gram is None:
        gram = X.T @ X
    proposed = apply_operator(dag, op, max_edges=max_edges)
    log_ratio = 0.0
    for j in op.changed_nodes():
        log_ratio += log_marginal_node(j, proposed.parents(j), X, hp, gram)
        log_ratio -= log_marginal_node(j, dag.parents(j), X, hp, gram)
    log_ratio += log_prior_dag(proposed, hp) - log_prior_dag(dag, hp)
    log_ratio += np.log(count_valid_operators(dag, max_edges))
    log_ratio -= np.log(count_valid_operators(proposed, max_edges))
    return float(log_ratio), proposed


def dag_move(
    state: McmcState,
    X: np.ndarray,
    hp: Hyperparameters,
    rng: np.random.Generator,
    gram=None,
    max_edges: int = None,
) -> Tuple[Dag, bool]:
    ops = valid_operators(state.dag, max_edges)
    if not ops:
        return state.dag, False
    op = ops[rng.integers(len(ops))]
    log_alpha, proposed = log_dag_acceptance(state.dag, op, X, hp, gram, max_edges)
    if np.log(rng.uniform()) < log_alpha:
        return proposed, True
    return state.dag, False


def sample_chol_posterior(
    dag: Dag, X: np.ndarray, hp: Hyperparameters, rng: np.random.Generator, gram=None
) -> CholeskyFactor:
    n, q = X.shape
    if gram is None:
        gram = X.T @ X
    sigma2 = np.ones(q)
    coeffs = []
    for j in range(q):
        stats = NodeSuffStats.from_gram(gram, n, j, dag.parents(j), hp.g)
        if j != RESPONSE:
            shape = node_shape(hp, q, len(stats.Lhat)) + n / 2
            sigma2[j] = sample_inverse_gamma(shape, 0.5 * (hp.g + stats.residual), rng)
        coeffs.append(sample_mvn_precision(-stats.Lhat, stats.Tbar, sigma2[j], rng))
    return CholeskyFactor.from_coeffs(dag, sigma2, coeffs)


def response_mean(dag: Dag, chol: CholeskyFactor, data: Dataset) -> np.ndarray:
    pa = dag.parents(RESPONSE)
    return -data.X[:, pa - 1] @ chol.L[pa, RESPONSE]


def _threshold_bounds(y: np.ndarray, theta0: float):
    lower = np.where(y == 1, theta0, -np.inf)
    upper = np.where(y == 1, np.inf, theta0)
    return lower, upper


def update_latent(state: McmcState, data: Dataset, rng: np.random.Generator) -> np.ndarray:
    mu = response_mean(state.dag, state.chol, data)
    lower, upper = _threshold_bounds(data.y, state.theta0)
    return sample_truncated_normal_array(mu, 1.0, lower, upper, rng)


def threshold_log_ratio(theta0: float, proposal: float, y: np.ndarray, mu: np.ndarray) -> float:
    """
    Log ratio of the response likelihood, latent values integrated out, at
    threshold `proposal` versus `theta0`.
    """
    new = log_interval_probability(*_threshold_bounds(y, proposal), mean=mu)
    old = log_interval_probability(*_threshold_bounds(y, theta0), mean=mu)
    return float(np.sum(new - old))


def update_theta0(
    state: McmcState, data: Dataset, hp: Hyperparameters, rng: np.random.Generator
) -> Tuple[float, bool]:
    mu = response_mean(state.dag, state.chol, data)
    proposal = state.theta0 + np.sqrt(hp.sigma0_sq) * rng.standard_normal()
    log_r = threshold_log_ratio(state.theta0, proposal, data.y, mu)
    if np.log(rng.uniform()) < log_r:
        return float(proposal), True
    return state.theta0, False


class DagProbitSampler(BaseSampler):
    """
    Sweeps over the DAG, the Cholesky parameters, the latent response and
    the threshold, in that order. An accepted threshold move is followed by
    a fresh latent draw so that y = 1 exactly when x1 > theta0.
    """

    def __init__(
        self,
        data: Dataset,
        hp: Hyperparameters,
        config: ChainConfig,
        rng: np.random.Generator,
    ):
        super().__init__(data, hp, config, rng)
        self.q = data.q
        self._gram = np.zeros((self.q, self.q))
        self._gram[1:, 1:] = data.X.T @ data.X
        self.counters = dict.fromkeys(COUNTER_KEYS, 0)
        self.reset()

    def initial_dag(self) -> Dag:
        return Dag.empty(self.q)

    def reset(self):
        super().reset()
        theta0 = self.config.theta0_init
        if self.config.update_latent:
            lower, upper = _threshold_bounds(self.data.y, theta0)
            x1 = sample_truncated_normal_array(0.0, 1.0, lower, upper, self.rng)
        elif self.data.latent is None:
            raise ValidationError("a latent column must be supplied when it is not sampled")
        else:
            x1 = self.data.latent.copy()
        self.state = McmcState(self.initial_dag(), CholeskyFactor.identity(self.q), theta0, x1)
        self.counters = dict.fromkeys(COUNTER_KEYS, 0)
        self._refresh_gram()

    def _refresh_gram(self):
        x1 = self.state.x1
        cross = x1 @ self.data.X
        self._gram[0, 0] = x1 @ x1
        self._gram[0, 1:] = cross
        self._gram[1:, 0] = cross

    def augmented(self) -> np.ndarray:
        return self.data.augmented(self.state.x1)

    def dag_step(self):
        dag, accepted = dag_move(
            self.state,
            self.augmented(),
            self.hp,
            self.rng,
            gram=self._gram,
            max_edges=self.config.max_edges,
        )
        self.counters["dag_proposed"] += 1
        self.counters["dag_accepted"] += int(accepted)
        self.state.dag = dag

    def chol_step(self):
        self.state.chol = sample_chol_posterior(
            self.state.dag, self.augmented(), self.hp, self.rng, gram=self._gram
        )

    def latent_step(self):
        if not self.config.update_latent:
            return
        self.state.x1 = update_latent(self.state, self.data, self.rng)
        self._refresh_gram()

    def threshold_step(self):
        if not self.config.update_threshold:
            return
        theta0, accepted = update_theta0(self.state, self.data, self.hp, self.rng)
        self.counters["theta0_proposed"] += 1
        self.counters["theta0_accepted"] += int(accepted)
        self.state.theta0 = theta0
        if accepted:
            self.latent_step()

    def _update(self):
        self.dag_step()
        self.chol_step()
        self.latent_step()
        self.threshold_step()
        return self.state


class FixedDagSampler(DagProbitSampler):
    """
    Keeps the graph at `dag` for the whole run; used for the naive-DAG
    baseline.
    """

    def __init__(
        self,
        data: Dataset,
        hp: Hyperparameters,
        config: ChainConfig,
        rng: np.random.Generator,
        dag: Dag,
    ):
        self.dag = dag
        super().__init__(data, hp, config, rng)

    def initial_dag(self) -> Dag:
        return self.dag

    def dag_step(self):
        return None


def make_sampler(
    data: Dataset, hp: Hyperparameters, config: ChainConfig, rng: np.random.Generator
) -> DagProbitSampler:
    if config.fixed_dag is not None:
        return FixedDagSampler(data, hp, config, rng, config.fixed_dag)
    return DagProbitSampler(data, hp, config, rng)


def run_chain(
    data: Dataset,
    hp: Hyperparameters,
    config: ChainConfig,
    rng: np.random.Generator = None,
) -> ChainOutput:
    """
    Runs the sampler for `config.iterations` sweeps and stores every
    post-burn-in, thinned state. Deterministic given `config.seed`.
    """
    if data.q < 2:
        raise ValidationError("at least one covariate is required")
    hp.validate(data.q)
    config.validate(data.q)
    if config.update_threshold:
        data.check_propriety()
    if rng is None:
        rng = np.random.default_rng(config.seed)

    sampler = make_sampler(data, hp, config, rng)
    output = ChainOutput(
        data.q,
        seed=config.seed,
        config={**config.to_dict(), "hyperparameters": hp.to_dict()},
    )
    logger.info(
        "starting chain: n=%d q=%d T=%d seed=%s", data.n, data.q, config.iterations, config.seed
    )
    start = time.perf_counter()
    for t in tqdm(range(config.iterations), disable=not config.progress, desc="mcmc"):
        tick = time.perf_counter()
        state = sampler.update()
        output.timings.append(time.perf_counter() - tick)
        if config.recorded(t):
            output.record(state.dag, state.chol, state.theta0)
    output.counters = dict(sampler.counters)
    logger.info(
        "chain finished in %.1fs: %d samples, acceptance %s",
        time.perf_counter() - start,
        len(output),
        output.accept_rates(),
    )
    return output
