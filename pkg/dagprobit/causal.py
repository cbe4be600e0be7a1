import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import pandas as pd
from scipy import linalg, stats

from dagprobit.errors import ValidationError
from dagprobit.graphs.dag import RESPONSE, Dag
from dagprobit.models.gauss import check_spd, sigma_from_cholesky
from dagprobit.samplers.chain import ChainOutput, Dataset

logger = logging.getLogger(__name__)


@dataclass
class InterventionParams:
    """
    Law of the latent response under do(X_s = x): normal with mean
    gamma_s * x and variance tau1_sq.
    """

    gamma_s: float
    gamma: np.ndarray
    delta1_sq: float
    T: np.ndarray
    tau1_sq: float

    @property
    def tau1(self) -> float:
        return float(np.sqrt(self.tau1_sq))


@dataclass
class PosteriorSummary:
    edge_probs: np.ndarray
    n_samples: int = 0

    @property
    def q(self) -> int:
        return self.edge_probs.shape[0]

    def to_frame(self) -> pd.DataFrame:
        labels = list(range(1, self.q + 1))
        return pd.DataFrame(self.edge_probs, index=labels, columns=labels)

    def to_csv(self, path):
        self.to_frame().to_csv(path)

    @classmethod
    def from_csv(cls, path) -> "PosteriorSummary":
        frame = pd.read_csv(path, index_col=0)
        return cls(frame.to_numpy(dtype=float))


@dataclass
class CausalEffectTable:
    s: int
    x_values: np.ndarray
    effects: np.ndarray
    bma: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.s + 1,
                "x_tilde": self.x_values,
                "bma": self.bma,
                "lo": self.lower,
                "hi": self.upper,
            }
        )


def post_intervention(sigma: np.ndarray, s: int, pa_s) -> InterventionParams:
    """
    Post-intervention parameters of the response for an intervention on s.
    The family of s is ordered with s first.
    """
    sigma = np.asarray(sigma, dtype=float)
    pa_s = np.asarray(pa_s, dtype=int)
    if s == RESPONSE or not 0 <= s < sigma.shape[0]:
        raise ValidationError(f"cannot intervene on vertex {s}")
    if RESPONSE in pa_s:
        raise ValidationError("the response cannot be a parent of the intervened vertex")
    check_spd(sigma, "covariance")
    fa = np.concatenate([[s], pa_s]).astype(int)
    cross = sigma[RESPONSE, fa]
    coef = linalg.solve(sigma[np.ix_(fa, fa)], cross, assume_a="pos")
    gamma_s, gamma = float(coef[0]), coef[1:]
    delta1_sq = float(sigma[RESPONSE, RESPONSE] - cross @ coef)
    if len(pa_s):
        sigma_pa = sigma[np.ix_(pa_s, pa_s)]
        T = np.linalg.inv(sigma_pa) + np.outer(gamma, gamma) / delta1_sq
        # equals delta1_sq / (1 - gamma^T T^{-1} gamma / delta1_sq)
        tau1_sq = delta1_sq + float(gamma @ sigma_pa @ gamma)
    else:
        T = np.zeros((0, 0))
        tau1_sq = delta1_sq
    return InterventionParams(gamma_s, gamma, delta1_sq, T, tau1_sq)


def causal_effect(params: InterventionParams, theta0: float, x_tilde):
    """
    P(Y = 1 | do(X_s = x_tilde)). Vectorised over `x_tilde`.
    """
    return stats.norm.sf((theta0 - params.gamma_s * np.asarray(x_tilde)) / params.tau1)


def edge_probs(chain: ChainOutput) -> PosteriorSummary:
    if len(chain) == 0:
        raise ValidationError("chain holds no samples")
    counts = np.zeros((chain.q, chain.q))
    for dag in chain.dag_samples:
        counts += dag.adj
    return PosteriorSummary(counts / len(chain), len(chain))


def bma_effects(
    chain: ChainOutput, s: int, x_values, level: float = 0.95
) -> CausalEffectTable:
    """
    Per-sample causal effects of do(X_s = x) over the grid `x_values`, their
    average across samples and equal-tailed credible bounds.
    """
    if len(chain) == 0:
        raise ValidationError("chain holds no samples")
    if s == RESPONSE or not 0 <= s < chain.q:
        raise ValidationError(f"cannot intervene on vertex {s + 1} of {chain.q}")
    if not 0 < level < 1:
        raise ValidationError(f"credible level must lie in (0, 1), got {level}")
    x_values = np.atleast_1d(np.asarray(x_values, dtype=float))
    effects = np.empty((len(chain), len(x_values)))
    for t, dag in enumerate(chain.dag_samples):
        sigma = sigma_from_cholesky(dag, chain.cholesky(t))
        params = post_intervention(sigma, s, dag.parents(s))
        effects[t] = causal_effect(params, chain.theta0_trace[t], x_values)
    tail = (1 - level) / 2
    lower, upper = np.quantile(effects, [tail, 1 - tail], axis=0)
    logger.debug("effects of vertex %d computed over %d samples", s + 1, len(chain))
    return CausalEffectTable(s, x_values, effects, effects.mean(axis=0), lower, upper, level)


def effects_frame(tables: List[CausalEffectTable]) -> pd.DataFrame:
    return pd.concat([table.to_frame() for table in tables], ignore_index=True)


def dag_model_selection(summary: PosteriorSummary, k: float) -> Dag:
    """
    Graph of the edges whose inclusion probability reaches k. The result is
    not repaired, so it may contain cycles.
    """
    if not 0 <= k <= 1:
        raise ValidationError(f"threshold must lie in [0, 1], got {k}")
    probs = summary.edge_probs
    selected = (probs >= k) & (probs > 0)
    np.fill_diagonal(selected, False)
    return Dag(summary.q, adjacency=selected, check=False)


def median_probability_model(summary: PosteriorSummary) -> Dag:
    return dag_model_selection(summary, 0.5)


def effect_spread(table: CausalEffectTable) -> float:
    """Range of the averaged effect over the evaluation grid."""
    return float(table.bma.max() - table.bma.min())


def observed_effects(
    chain: ChainOutput, data: Dataset, nodes=None, level: float = 0.95
) -> Dict[int, CausalEffectTable]:
    """
    BMA effects of each vertex in `nodes` (default: every covariate),
    evaluated at the observed values of that covariate.
    """
    if nodes is None:
        nodes = range(1, data.q)
    return {s: bma_effects(chain, s, data.X[:, s - 1], level) for s in nodes}
