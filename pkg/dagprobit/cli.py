import argparse
import enum
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from multiprocessing import Pool
from typing import List, Optional

import numpy as np
import pandas as pd

from dagprobit.causal import (
    bma_effects,
    edge_probs,
    effects_frame,
    observed_effects,
)
from dagprobit.errors import DagProbitError, ValidationError
from dagprobit.graphs.dag import Dag
from dagprobit.models.prior import Hyperparameters
from dagprobit.samplers.chain import ChainConfig, ChainOutput, Dataset
from dagprobit.samplers.mcmc import run_chain
from dagprobit.simulate import (
    ScoringMode,
    SimConfig,
    aggregate_roc,
    generate_dataset,
    mae,
    predictor_recovery,
    random_dag,
    read_fixture,
    structure_metrics,
    two_chain_diagnostic,
    write_fixture,
)
from dagprobit.utils import configure_logging, spawn_rngs

logger = logging.getLogger(__name__)


class ScaleMode(enum.Enum):
    quick = "quick"
    full = "full"


SCALE_DEFAULTS = {
    ScaleMode.quick: {"q": 10, "n": 200, "reps": 10, "fit_iterations": 10000},
    ScaleMode.full: {"q": 40, "n": 100, "reps": 40, "fit_iterations": 120000},
}


@dataclass
class RunConfig:
    """
    Settings of a fit. Every key is optional in the JSON file; unset
    hyperparameters fall back to `Hyperparameters.default`.
    """

    iterations: Optional[int] = None
    burn_in: Optional[int] = None
    thin: int = 1
    seed: Optional[int] = None
    a: Optional[float] = None
    g: Optional[float] = None
    pi: Optional[float] = None
    sigma0_sq: float = 0.25
    standardize: bool = False
    fixed_dag: Optional[str] = None
    max_edges: Optional[int] = None
    scale: ScaleMode = ScaleMode.quick
    output_dir: Optional[str] = None
    progress: bool = False

    def __post_init__(self):
        self.scale = ScaleMode(self.scale)

    @property
    def total_iterations(self) -> int:
        if self.iterations is not None:
            return self.iterations
        return SCALE_DEFAULTS[self.scale]["fit_iterations"]

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                values = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read config {path}: {e}")
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def override(self, **values) -> "RunConfig":
        for key, value in values.items():
            if value is not None:
                setattr(self, key, value)
        self.__post_init__()
        return self

    def hyperparameters(self, q: int, n: int) -> Hyperparameters:
        hp = Hyperparameters.default(q, n)
        for key in ("a", "g", "pi", "sigma0_sq"):
            value = getattr(self, key)
            if value is not None:
                setattr(hp, key, value)
        return hp.validate(q)

    def chain_config(self, q: int) -> ChainConfig:
        fixed = None
        if self.fixed_dag is not None:
            fixed = Dag.from_edge_list(self.fixed_dag, q)
        return ChainConfig(
            iterations=self.total_iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=self.seed,
            fixed_dag=fixed,
            max_edges=self.max_edges,
            progress=self.progress,
        ).validate(q)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale"] = self.scale.value
        d["iterations"] = self.total_iterations
        return d


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)


def cmd_simulate(args) -> int:
    scale = ScaleMode.full if args.full else ScaleMode.quick
    defaults = SCALE_DEFAULTS[scale]
    cfg = SimConfig(
        q=args.q if args.q is not None else defaults["q"],
        n=args.n if args.n is not None else defaults["n"],
        reps=args.reps if args.reps is not None else defaults["reps"],
        edge_prob=args.edge_prob,
        theta0_true=args.theta0,
        seed=args.seed,
    ).validate()
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "sim_config.json"), cfg.to_dict())
    for rep, rng in enumerate(spawn_rngs(cfg.seed, cfg.reps)):
        dag = random_dag(cfg.q, cfg.edge_prob, rng)
        data, truth = generate_dataset(dag, cfg, rng)
        write_fixture(os.path.join(args.out, f"rep_{rep:03d}"), data, truth)
    logger.info("wrote %d replicate fixtures to %s", cfg.reps, args.out)
    return 0


def _run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.override(
        iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        seed=args.seed,
        a=args.a,
        g=args.g,
        pi=args.pi,
        sigma0_sq=args.sigma0_sq,
        standardize=args.standardize or None,
        fixed_dag=args.fixed_dag,
        max_edges=args.max_edges,
        scale=ScaleMode.full if args.full else None,
        output_dir=args.out,
        progress=args.progress or None,
    )


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    data = Dataset.from_csv(args.data)
    if cfg.standardize:
        data = data.standardize()
    hp = cfg.hyperparameters(data.q, data.n)
    chain = run_chain(data, hp, cfg.chain_config(data.q))
    chain.config["run"] = cfg.to_dict()
    chain.save(args.out)
    data.to_csv(os.path.join(args.out, "data.csv"))
    edge_probs(chain).to_csv(os.path.join(args.out, "edge_probs.csv"))
    return 0


def parse_grid(spec: str) -> np.ndarray:
    """`lo:hi:count` to an evenly spaced grid."""
    try:
        lo, hi, count = spec.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise ValidationError(f"grid must look like lo:hi:count, got {spec!r}")


def cmd_effects(args) -> int:
    chain = ChainOutput.load(args.run_dir)
    data = Dataset.from_csv(os.path.join(args.run_dir, "data.csv"))
    nodes = args.nodes or list(range(2, chain.q + 1))
    for s in nodes:
        if not 2 <= s <= chain.q:
            raise ValidationError(f"unknown node {s}: covariates are numbered 2..{chain.q}")
    grid = parse_grid(args.grid) if args.grid else None
    tables = [
        bma_effects(chain, s - 1, data.X[:, s - 2] if grid is None else grid, args.level)
        for s in nodes
    ]
    out = args.out or os.path.join(args.run_dir, "causal_effects.csv")
    effects_frame(tables).to_csv(out, index=False)
    return 0


def _evaluate_pair(task):
    truth_dir, run_dir, mode = task
    dag, data, true_effects = read_fixture(truth_dir)
    chain = ChainOutput.load(run_dir)
    if chain.q != dag.q:
        raise ValidationError(f"{run_dir} has {chain.q} vertices, {truth_dir} has {dag.q}")
    summary = edge_probs(chain)
    report = structure_metrics(dag, summary, mode=mode)
    report.p_star = predictor_recovery(dag, summary)
    tables = observed_effects(chain, data)
    for s, table in tables.items():
        beta_true = true_effects.loc[true_effects["s"] == s + 1, "beta_true"].to_numpy()
        report.mae[s] = mae(beta_true, table.bma)
    return report


def cmd_evaluate(args) -> int:
    if len(args.truth) != len(args.runs):
        raise ValidationError("give one run directory per truth directory")
    tasks = [(t, r, ScoringMode(args.mode)) for t, r in zip(args.truth, args.runs)]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            reports = pool.map(_evaluate_pair, tasks)
    else:
        reports = [_evaluate_pair(task) for task in tasks]

    os.makedirs(args.out, exist_ok=True)
    roc, mean_auc = aggregate_roc(reports)
    roc.to_csv(os.path.join(args.out, "roc.csv"), index=False)
    _write_json(
        os.path.join(args.out, "auc.json"),
        {"auc": [r.auc for r in reports], "auc_of_mean_curve": mean_auc},
    )
    _write_json(os.path.join(args.out, "pstar.json"), {"p_star": [r.p_star for r in reports]})
    pd.DataFrame(
        [
            {"rep": i, "s": s + 1, "mae": value}
            for i, r in enumerate(reports)
            for s, value in sorted(r.mae.items())
        ]
    ).to_csv(os.path.join(args.out, "mae.csv"), index=False)
    return 0


def cmd_diagnose(args) -> int:
    cfg = _run_config(args)
    data = Dataset.from_csv(args.data)
    if cfg.standardize:
        data = data.standardize()
    hp = cfg.hyperparameters(data.q, data.n)
    report = two_chain_diagnostic(
        data, hp, cfg.chain_config(data.q), args.t1, args.t2, seeds=args.seeds
    )
    os.makedirs(args.out, exist_ok=True)
    report.to_csv(os.path.join(args.out, "diagnostic_pairs.csv"))
    _write_json(
        os.path.join(args.out, "diagnostic.json"),
        {"max_abs_diff": {str(s + 1): v for s, v in report.max_abs_diff.items()}},
    )
    return 0


def _add_run_arguments(parser):
    parser.add_argument("--config", help="JSON run configuration; flags override it")
    parser.add_argument("--iterations", "-T", type=int)
    parser.add_argument("--burn-in", type=int)
    parser.add_argument("--thin", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--a", type=float)
    parser.add_argument("--g", type=float)
    parser.add_argument("--pi", type=float)
    parser.add_argument("--sigma0-sq", type=float)
    parser.add_argument("--standardize", action="store_true")
    parser.add_argument("--fixed-dag", help="edge list holding the DAG to keep fixed")
    parser.add_argument("--max-edges", type=int)
    parser.add_argument(
        "--full", action="store_true", help="full-scale chain length and graph size"
    )
    parser.add_argument("--progress", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagprobit",
        description="Structure learning and causal effect estimation for DAG-probit models.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic replicate fixtures")
    p.add_argument("--q", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--edge-prob", type=float)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--full", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler on a CSV dataset")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    _add_run_arguments(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("effects", help="BMA causal effects from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--nodes", type=int, nargs="+")
    p.add_argument("--grid", help="lo:hi:count; default is the observed values")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("evaluate", help="score runs against simulated truth")
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--mode", choices=[m.value for m in ScoringMode], default="directed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="two-chain convergence check")
    p.add_argument("data")
    p.add_argument("--t1", type=int, required=True)
    p.add_argument("--t2", type=int, required=True)
    p.add_argument("--seeds", type=int, nargs=2)
    p.add_argument("--out", required=True)
    _add_run_arguments(p)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv: List[str] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except DagProbitError as e:
        print(f"dagprobit: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
