import enum
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn import metrics

from dagprobit.causal import (
    CausalEffectTable,
    PosteriorSummary,
    causal_effect,
    observed_effects,
    post_intervention,
)
from dagprobit.errors import ProprietyError, ValidationError
from dagprobit.graphs.dag import RESPONSE, Dag
from dagprobit.graphs.graph_structures import make_dag
from dagprobit.models.gauss import CholeskyFactor, sigma_from_cholesky
from dagprobit.models.prior import Hyperparameters
from dagprobit.samplers.chain import ChainConfig, Dataset
from dagprobit.samplers.mcmc import run_chain
from dagprobit.utils import spawn_rngs

logger = logging.getLogger(__name__)

MAX_RETRIES = 100


class ScoringMode(enum.Enum):
    directed = "directed"
    skeleton = "skeleton"


@dataclass
class SimConfig:
    q: int
    n: int
    reps: int = 1
    edge_prob: Optional[float] = None
    coeff_range: Tuple[float, float] = (1.0, 2.0)
    theta0_true: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.edge_prob is None:
            self.edge_prob = 3.0 / (2 * self.q - 2) if self.q > 2 else 0.5
        self.coeff_range = tuple(self.coeff_range)

    def validate(self) -> "SimConfig":
        if self.q < 2:
            raise ValidationError(f"need at least one covariate, got q={self.q}")
        if self.n < 1 or self.reps < 1:
            raise ValidationError("n and reps must be positive")
        if not 0 < self.edge_prob < 1:
            raise ValidationError(f"edge probability must lie in (0, 1), got {self.edge_prob}")
        lo, hi = self.coeff_range
        if not 0 <= lo < hi:
            raise ValidationError(f"coefficient range {self.coeff_range} must be 0 <= lo < hi")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coeff_range"] = list(self.coeff_range)
        return d


@dataclass
class SimulationTruth:
    dag: Dag
    chol: CholeskyFactor
    sigma: np.ndarray
    theta0: float
    latent: np.ndarray
    effects: Dict[int, np.ndarray] = field(default_factory=dict)

    def effects_frame(self, data: Dataset) -> pd.DataFrame:
        frames = [
            pd.DataFrame({"s": s + 1, "x_tilde": data.X[:, s - 1], "beta_true": beta})
            for s, beta in sorted(self.effects.items())
        ]
        return pd.concat(frames, ignore_index=True)


@dataclass
class EvalReport:
    """
    Edge-recovery scores over the threshold grid `k`. The ROC curve is
    (1 - spe, sen).
    """

    k: np.ndarray
    sen: np.ndarray
    spe: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray
    auc: float
    p_star: Optional[float] = None
    mae: Dict[int, float] = field(default_factory=dict)

    def roc_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": self.k,
                "fpr": 1 - self.spe,
                "sen": self.sen,
                "spe": self.spe,
                "tp": self.tp,
                "fp": self.fp,
                "tn": self.tn,
                "fn": self.fn,
            }
        )


def random_dag(q: int, p: float, rng: np.random.Generator) -> Dag:
    """
    Each pair of vertices is joined with probability p, the edge pointing
    from the higher to the lower label.
    """
    if not 0 < p < 1:
        raise ValidationError(f"edge probability must lie in (0, 1), got {p}")
    adj = np.tril(rng.uniform(size=(q, q)) < p, k=-1)
    return Dag(q, adjacency=adj)


def random_cholesky(dag: Dag, coeff_range, rng: np.random.Generator) -> CholeskyFactor:
    lo, hi = coeff_range
    L = np.eye(dag.q)
    for u, v in dag.edges:
        L[u, v] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
    return CholeskyFactor(np.ones(dag.q), L)


def sample_sem(
    dag: Dag,
    chol: CholeskyFactor,
    n: int,
    rng: np.random.Generator,
    intervention: Dict[int, float] = None,
) -> np.ndarray:
    """
    n draws of the structural equation model, solved node by node in
    topological order. Intervened vertices are held at their assigned value
    and their own equation is dropped.
    """
    intervention = intervention or {}
    X = np.zeros((n, dag.q))
    for j in dag.topological_order():
        if j in intervention:
            X[:, j] = intervention[j]
            continue
        pa = dag.parents(j)
        X[:, j] = -X[:, pa] @ chol.L[pa, j] + np.sqrt(chol.sigma2[j]) * rng.standard_normal(n)
    return X


def true_effects(truth: SimulationTruth, s: int, x_values) -> np.ndarray:
    params = post_intervention(truth.sigma, s, truth.dag.parents(s))
    return causal_effect(params, truth.theta0, x_values)


def generate_dataset(
    dag: Dag, cfg: SimConfig, rng: np.random.Generator
) -> Tuple[Dataset, SimulationTruth]:
    chol = random_cholesky(dag, cfg.coeff_range, rng)
    sigma = sigma_from_cholesky(dag, chol)
    for attempt in range(MAX_RETRIES):
        X = sample_sem(dag, chol, cfg.n, rng)
        y = (X[:, RESPONSE] > cfg.theta0_true).astype(int)
        if 0 < y.sum() < cfg.n:
            break
        logger.debug("redrawing data with a single response class (attempt %d)", attempt + 1)
    else:
        raise ProprietyError(
            f"every response fell in one class across {MAX_RETRIES} redraws"
        )
    data = Dataset(y, X[:, 1:])
    truth = SimulationTruth(dag, chol, sigma, cfg.theta0_true, X[:, RESPONSE].copy())
    for s in range(1, dag.q):
        truth.effects[s] = true_effects(truth, s, data.X[:, s - 1])
    return data, truth


def _scored_pairs(truth: Dag, summary: PosteriorSummary, mode: ScoringMode):
    q = truth.q
    if mode == ScoringMode.skeleton:
        iu = np.triu_indices(q, k=1)
        scores = (summary.edge_probs + summary.edge_probs.T)[iu]
        labels = (truth.adj | truth.adj.T)[iu]
        return scores, labels
    # ordered pairs a graph could hold; the response never has children
    possible = ~np.eye(q, dtype=bool)
    possible[RESPONSE] = False
    return summary.edge_probs[possible], truth.adj[possible]


def structure_metrics(
    truth: Dag,
    summary: PosteriorSummary,
    k_grid: Sequence[float] = None,
    mode=ScoringMode.directed,
) -> EvalReport:
    if truth.q != summary.q:
        raise ValidationError(f"true graph has {truth.q} vertices, summary has {summary.q}")
    mode = ScoringMode(mode)
    if k_grid is None:
        k_grid = np.linspace(0.0, 1.0, 101)
    k = np.asarray(k_grid, dtype=float)
    scores, labels = _scored_pairs(truth, summary, mode)
    selected = scores[None, :] >= k[:, None]
    tp = (selected & labels).sum(axis=1)
    fp = (selected & ~labels).sum(axis=1)
    fn = (~selected & labels).sum(axis=1)
    tn = (~selected & ~labels).sum(axis=1)
    # with no true edges (or no absent ones) the corresponding rate is perfect
    with np.errstate(invalid="ignore", divide="ignore"):
        sen = np.where(tp + fn > 0, tp / (tp + fn), 1.0)
        spe = np.where(tn + fp > 0, tn / (tn + fp), 1.0)
    return EvalReport(k, sen, spe, tp, fp, tn, fn, roc_auc(1 - spe, sen))


def roc_auc(fpr, tpr) -> float:
    """Trapezoidal area under the curve closed at (0, 0) and (1, 1)."""
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    order = np.lexsort((tpr, fpr))
    return float(metrics.auc(fpr[order], tpr[order]))


def predictor_recovery(truth: Dag, summary: PosteriorSummary, k_star: float = 0.5) -> float:
    if truth.q < 2:
        raise ValidationError("predictor recovery needs at least one covariate")
    selected = summary.edge_probs[1:, RESPONSE] >= k_star
    return float(np.mean(selected == truth.adj[1:, RESPONSE]))


def mae(true_effects, bma_effects) -> float:
    true_effects = np.asarray(true_effects, dtype=float)
    bma_effects = np.asarray(bma_effects, dtype=float)
    if true_effects.shape != bma_effects.shape:
        raise ValidationError(
            f"effect vectors differ in length: {true_effects.shape} vs {bma_effects.shape}"
        )
    return float(np.mean(np.abs(true_effects - bma_effects)))


def naive_baseline(
    data: Dataset,
    hp: Hyperparameters,
    config: ChainConfig,
    nodes=None,
    level: float = 0.95,
    rng: np.random.Generator = None,
) -> Dict[int, CausalEffectTable]:
    """
    Effects under the fixed star graph in which every covariate is a parent
    of the response and no other edge exists.
    """
    config = replace(config, fixed_dag=make_dag("naive", data.q))
    chain = run_chain(data, hp, config, rng)
    return observed_effects(chain, data, nodes, level)


@dataclass
class DiagnosticReport:
    max_abs_diff: Dict[int, float]
    pairs: pd.DataFrame

    def to_csv(self, path):
        self.pairs.to_csv(path, index=False)


def two_chain_diagnostic(
    data: Dataset,
    hp: Hyperparameters,
    config: ChainConfig,
    T1: int,
    T2: int,
    nodes=None,
    seeds: Tuple[int, int] = None,
) -> DiagnosticReport:
    """
    Runs two independent chains of lengths T1 and T2 and compares their BMA
    causal effects node by node. Both chains keep `config.burn_in`, capped
    one short of their length. By default the chains use streams spawned
    from `config.seed`; pass `seeds` to fix each chain's seed.
    """
    if min(T1, T2) < 2:
        raise ValidationError("each diagnostic chain needs at least two iterations")
    if seeds is None:
        rngs = spawn_rngs(config.seed, 2)
    else:
        rngs = [np.random.default_rng(s) for s in seeds]
    tables = []
    for T, rng in zip((T1, T2), rngs):
        chain_config = replace(config, iterations=T, burn_in=min(config.burn_in, T - 1))
        chain = run_chain(data, hp, chain_config, rng)
        tables.append(observed_effects(chain, data, nodes))
    first, second = tables
    frames = []
    max_abs_diff = {}
    for s in first:
        a, b = first[s].bma, second[s].bma
        max_abs_diff[s] = float(np.max(np.abs(a - b)))
        frames.append(
            pd.DataFrame({"s": s + 1, "x_tilde": first[s].x_values, "chain1": a, "chain2": b})
        )
    logger.info("largest BMA difference between chains: %.4f", max(max_abs_diff.values()))
    return DiagnosticReport(max_abs_diff, pd.concat(frames, ignore_index=True))


def aggregate_roc(reports: List[EvalReport]) -> Tuple[pd.DataFrame, float]:
    """
    Per-threshold mean ROC point across replicates with a 5th to 95th
    percentile band, and the AUC of the averaged curve.
    """
    k = reports[0].k
    if any(len(r.k) != len(k) or not np.allclose(r.k, k) for r in reports):
        raise ValidationError("reports must share one threshold grid")
    fpr = np.array([1 - r.spe for r in reports])
    sen = np.array([r.sen for r in reports])
    frame = pd.DataFrame(
        {
            "k": k,
            "fpr_mean": fpr.mean(axis=0),
            "sen_mean": sen.mean(axis=0),
            "fpr_lo": np.percentile(fpr, 5, axis=0),
            "fpr_hi": np.percentile(fpr, 95, axis=0),
            "sen_lo": np.percentile(sen, 5, axis=0),
            "sen_hi": np.percentile(sen, 95, axis=0),
        }
    )
    return frame, roc_auc(frame["fpr_mean"].to_numpy(), frame["sen_mean"].to_numpy())


def benchmark_timing(
    grid: Sequence[Tuple[int, int]], iterations: int = 200, seed: int = None
) -> pd.DataFrame:
    """
    Mean wall-clock seconds per sweep for each (q, n) in `grid` on simulated
    data.
    """
    rows = []
    for (q, n), rng in zip(grid, spawn_rngs(seed, len(grid))):
        cfg = SimConfig(q=q, n=n).validate()
        data, _ = generate_dataset(random_dag(q, cfg.edge_prob, rng), cfg, rng)
        config = ChainConfig(iterations=iterations, burn_in=0)
        start = time.perf_counter()
        chain = run_chain(data, Hyperparameters.default(q, n), config, rng)
        elapsed = time.perf_counter() - start
        rows.append(
            {"q": q, "n": n, "seconds_per_iteration": float(np.mean(chain.timings)), "total": elapsed}
        )
    return pd.DataFrame(rows)


def write_fixture(directory, data: Dataset, truth: SimulationTruth):
    os.makedirs(directory, exist_ok=True)
    truth.dag.to_adjacency_csv(os.path.join(directory, "truth_dag.csv"))
    data.to_csv(os.path.join(directory, "data.csv"))
    truth.effects_frame(data).to_csv(os.path.join(directory, "true_effects.csv"), index=False)


def read_fixture(directory) -> Tuple[Dag, Dataset, pd.DataFrame]:
    for name in ("truth_dag.csv", "data.csv", "true_effects.csv"):
        if not os.path.exists(os.path.join(directory, name)):
            raise ValidationError(f"fixture {directory} lacks {name}")
    dag = Dag.from_adjacency_csv(os.path.join(directory, "truth_dag.csv"))
    data = Dataset.from_csv(os.path.join(directory, "data.csv"))
    effects = pd.read_csv(os.path.join(directory, "true_effects.csv"))
    if dag.q != data.q:
        raise ValidationError(f"true graph has {dag.q} vertices, data has {data.q}")
    return dag, data, effects
