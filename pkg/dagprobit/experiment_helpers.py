import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from dagprobit.causal import edge_probs, observed_effects
from dagprobit.graphs.dag import Dag
from dagprobit.graphs.graph_structures import DagStructure, make_dag
from dagprobit.models.prior import Hyperparameters
from dagprobit.samplers.chain import ChainConfig
from dagprobit.samplers.mcmc import run_chain
from dagprobit.simulate import (
    EvalReport,
    SimConfig,
    generate_dataset,
    mae,
    naive_baseline,
    predictor_recovery,
    random_dag,
    structure_metrics,
)
from dagprobit.utils import spawn_seeds

logger = logging.getLogger(__name__)


@dataclass
class ReplicateResult:
    rep: int
    report: EvalReport
    mae_by_node: Dict[int, float]
    naive_mae_by_node: Dict[int, float] = field(default_factory=dict)

    @property
    def median_mae(self) -> float:
        return float(np.median(list(self.mae_by_node.values())))

    @property
    def naive_median_mae(self) -> Optional[float]:
        if not self.naive_mae_by_node:
            return None
        return float(np.median(list(self.naive_mae_by_node.values())))


def truth_dag(sim: SimConfig, rng: np.random.Generator, structure=None) -> Dag:
    if structure is None:
        return random_dag(sim.q, sim.edge_prob, rng)
    return make_dag(structure, sim.q)


def run_replicate(task) -> ReplicateResult:
    """
    Simulates one dataset, fits it and scores structure and effect
    recovery against the truth.
    """
    rep, sim, chain_config, seed_seq, naive, structure = task
    rng = np.random.default_rng(seed_seq)
    dag = truth_dag(sim, rng, structure)
    data, truth = generate_dataset(dag, sim, rng)
    hp = Hyperparameters.default(sim.q, sim.n)

    chain = run_chain(data, hp, chain_config, rng)
    summary = edge_probs(chain)
    report = structure_metrics(dag, summary)
    report.p_star = predictor_recovery(dag, summary)
    tables = observed_effects(chain, data)
    report.mae = {s: mae(truth.effects[s], tables[s].bma) for s in tables}
    result = ReplicateResult(rep, report, dict(report.mae))

    if naive:
        naive_tables = naive_baseline(data, hp, chain_config, rng=rng)
        result.naive_mae_by_node = {
            s: mae(truth.effects[s], naive_tables[s].bma) for s in naive_tables
        }
    logger.info(
        "replicate %d: AUC %.3f, p* %.3f, median MAE %.4f",
        rep,
        report.auc,
        report.p_star,
        result.median_mae,
    )
    return result


def run_replicates(
    sim: SimConfig,
    chain_config: ChainConfig,
    jobs: int = 1,
    naive: bool = False,
    structure: DagStructure = None,
) -> List[ReplicateResult]:
    """
    Runs `sim.reps` independent replicates, spread over `jobs` worker
    processes. Replicate i uses the i-th seed spawned from `sim.seed`, so
    results do not depend on `jobs`.
    """
    sim.validate()
    tasks = [
        (rep, sim, chain_config, seed, naive, structure)
        for rep, seed in enumerate(spawn_seeds(sim.seed, sim.reps))
    ]
    if jobs > 1:
        with Pool(jobs) as pool:
            return pool.map(run_replicate, tasks)
    return [run_replicate(task) for task in tasks]


def get_scores(results: List[ReplicateResult]) -> pd.DataFrame:
    rows = []
    for r in results:
        row = {
            "rep": r.rep,
            "auc": r.report.auc,
            "p_star": r.report.p_star,
            "median_mae": r.median_mae,
        }
        if r.naive_mae_by_node:
            row["naive_median_mae"] = r.naive_median_mae
        rows.append(row)
    return pd.DataFrame(rows)
