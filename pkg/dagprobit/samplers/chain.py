import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from dagprobit.errors import DataValidationError, ProprietyError, ValidationError
from dagprobit.graphs.dag import Dag
from dagprobit.models.gauss import CholeskyFactor

logger = logging.getLogger(__name__)

RESPONSE_COLUMN = "y"


@dataclass
class Dataset:
    """
    Binary response `y` (length n) together with the observed covariates
    X_2, ..., X_q as the columns of `X`. `latent` optionally supplies the
    response column itself, which turns the model into a fully observed
    Gaussian DAG model.
    """

    y: np.ndarray
    X: np.ndarray
    latent: Optional[np.ndarray] = None
    names: Optional[List[str]] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise DataValidationError(f"covariates must be a matrix, got shape {self.X.shape}")
        self.y = np.asarray(self.y)
        if self.y.shape != (self.X.shape[0],):
            raise DataValidationError(
                f"response has {self.y.size} entries but covariates have {self.X.shape[0]} rows"
            )
        if self.names is None:
            self.names = [f"X{j}" for j in range(2, self.q + 1)]
        if len(self.names) != self.X.shape[1]:
            raise DataValidationError("one name per covariate column is required")
        bad = np.flatnonzero(~np.isin(self.y, (0, 1)))
        if bad.size:
            raise DataValidationError(
                f"response must be 0/1, got {self.y[bad[0]]!r}",
                row=int(bad[0]) + 1,
                column=RESPONSE_COLUMN,
            )
        self.y = self.y.astype(int)
        bad = np.argwhere(~np.isfinite(self.X))
        if bad.size:
            i, j = bad[0]
            raise DataValidationError(
                "missing or non-finite covariate value", row=int(i) + 1, column=self.names[j]
            )
        if self.latent is not None:
            self.latent = np.asarray(self.latent, dtype=float)
            if self.latent.shape != self.y.shape:
                raise DataValidationError("latent column must have one value per observation")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1] + 1

    def check_propriety(self):
        if self.n == 0 or self.y.min() == self.y.max():
            raise ProprietyError()

    def standardize(self) -> "Dataset":
        sd = self.X.std(axis=0)
        if self.n and np.any(sd == 0):
            j = int(np.flatnonzero(sd == 0)[0])
            raise DataValidationError("constant column cannot be standardized", column=self.names[j])
        X = (self.X - self.X.mean(axis=0)) / sd if self.n else self.X.copy()
        return Dataset(self.y.copy(), X, self.latent, list(self.names))

    def augmented(self, x1: np.ndarray) -> np.ndarray:
        """n x q matrix whose first column holds the response."""
        return np.column_stack([x1, self.X])

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Dataset":
        if len(frame.columns) < 2 or frame.columns[0] != RESPONSE_COLUMN:
            raise DataValidationError(
                f"first column must be named '{RESPONSE_COLUMN}' and be followed by covariates",
                column=str(frame.columns[0]) if len(frame.columns) else None,
            )
        numeric = frame.apply(pd.to_numeric, errors="coerce")
        bad = np.argwhere(numeric.isna().to_numpy())
        if bad.size:
            i, j = bad[0]
            raise DataValidationError(
                f"cannot parse {frame.iat[i, j]!r} as a number",
                row=int(i) + 1,
                column=str(frame.columns[j]),
            )
        values = numeric.to_numpy(dtype=float)
        return cls(values[:, 0], values[:, 1:], names=[str(c) for c in frame.columns[1:]])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        try:
            frame = pd.read_csv(path)
        except OSError as e:
            raise DataValidationError(f"cannot read {path}: {e}")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataValidationError(f"malformed CSV {path}: {e}")
        return cls.from_frame(frame)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=self.names)
        frame.insert(0, RESPONSE_COLUMN, self.y)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


@dataclass
class McmcState:
    """
    Current point of the chain. Thresholds below and above theta0 are -inf
    and +inf, so y = 1 exactly when x1 > theta0.
    """

    dag: Dag
    chol: CholeskyFactor
    theta0: float
    x1: np.ndarray

    def check_thresholds(self, y: np.ndarray) -> bool:
        return bool(np.all((self.x1 > self.theta0) == (y == 1)))


@dataclass
class ChainConfig:
    iterations: int
    burn_in: Optional[int] = None
    thin: int = 1
    seed: Optional[int] = None
    fixed_dag: Optional[Dag] = None
    max_edges: Optional[int] = None
    update_latent: bool = True
    update_threshold: bool = True
    theta0_init: float = 0.0
    progress: bool = False

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 5

    def validate(self, q: int) -> "ChainConfig":
        if not self.iterations > self.burn_in >= 0:
            raise ValidationError(
                f"need iterations > burn_in >= 0, got {self.iterations} and {self.burn_in}"
            )
        if self.thin < 1:
            raise ValidationError(f"thin must be at least 1, got {self.thin}")
        if self.fixed_dag is not None and self.fixed_dag.q != q:
            raise ValidationError(f"fixed DAG has {self.fixed_dag.q} vertices, data has {q}")
        if self.max_edges is not None and self.max_edges < 0:
            raise ValidationError("max_edges must be non-negative")
        if self.update_threshold and not self.update_latent:
            raise ValidationError("the threshold can only be updated together with the latent response")
        return self

    def recorded(self, t: int) -> bool:
        return t >= self.burn_in and (t - self.burn_in) % self.thin == 0

    def n_recorded(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_dag"] = (
            None if self.fixed_dag is None else [[u + 1, v + 1] for u, v in self.fixed_dag.edges]
        )
        return d


@dataclass
class ChainOutput:
    """
    Stored sample path. Coefficients of sample t are kept as a flat vector
    aligned with `dag_samples[t].edges`.
    """

    q: int
    dag_samples: List[Dag] = field(default_factory=list)
    sigma2_samples: List[np.ndarray] = field(default_factory=list)
    coeff_samples: List[np.ndarray] = field(default_factory=list)
    theta0_trace: List[float] = field(default_factory=list)
    counters: Dict[str, int] = field(
        default_factory=lambda: {
            "dag_proposed": 0,
            "dag_accepted": 0,
            "theta0_proposed": 0,
            "theta0_accepted": 0,
        }
    )
    timings: List[float] = field(default_factory=list)
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.dag_samples)

    def record(self, dag: Dag, chol: CholeskyFactor, theta0: float):
        self.dag_samples.append(dag)
        self.sigma2_samples.append(chol.sigma2.copy())
        self.coeff_samples.append(np.array([chol.L[u, v] for u, v in dag.edges]))
        self.theta0_trace.append(float(theta0))

    def cholesky(self, t: int) -> CholeskyFactor:
        dag = self.dag_samples[t]
        L = np.eye(self.q)
        for (u, v), c in zip(dag.edges, self.coeff_samples[t]):
            L[u, v] = c
        return CholeskyFactor(np.asarray(self.sigma2_samples[t], dtype=float), L)

    def accept_rates(self) -> Dict[str, float]:
        c = self.counters
        rates = {}
        for move in ("dag", "theta0"):
            proposed = c[f"{move}_proposed"]
            rates[move] = c[f"{move}_accepted"] / proposed if proposed else float("nan")
        return rates

    @classmethod
    def concatenate(cls, chains: List["ChainOutput"]) -> "ChainOutput":
        out = cls(chains[0].q, seed=chains[0].seed, config=dict(chains[0].config))
        for chain in chains:
            out.dag_samples += chain.dag_samples
            out.sigma2_samples += chain.sigma2_samples
            out.coeff_samples += chain.coeff_samples
            out.theta0_trace += chain.theta0_trace
            out.timings += chain.timings
            for key, value in chain.counters.items():
                out.counters[key] += value
        return out

    def save(self, run_dir):
        os.makedirs(run_dir, exist_ok=True)
        pd.DataFrame(
            {"iteration": np.arange(len(self)), "theta0": self.theta0_trace}
        ).to_csv(os.path.join(run_dir, "theta0_trace.csv"), index=False)

        with open(os.path.join(run_dir, "dag_samples.jsonl"), "w") as f:
            previous = set()
            for t, dag in enumerate(self.dag_samples):
                current = set(dag.edges)
                if t == 0:
                    record = {"t": 0, "q": self.q, "edges": _one_based(current)}
                else:
                    record = {
                        "t": t,
                        "add": _one_based(current - previous),
                        "remove": _one_based(previous - current),
                    }
                f.write(json.dumps(record) + "\n")
                previous = current

        with open(os.path.join(run_dir, "accept_rates.json"), "w") as f:
            json.dump({**self.counters, "rates": self.accept_rates()}, f, indent=2)
        with open(os.path.join(run_dir, "config_echo.json"), "w") as f:
            json.dump({"seed": self.seed, **self.config}, f, indent=2)

        lengths = [len(c) for c in self.coeff_samples]
        np.savez(
            os.path.join(run_dir, "chol_samples.npz"),
            sigma2=np.array(self.sigma2_samples).reshape(len(self), self.q),
            coeff_values=np.concatenate(self.coeff_samples) if lengths else np.zeros(0),
            coeff_offsets=np.concatenate([[0], np.cumsum(lengths)]).astype(int),
            timings=np.asarray(self.timings, dtype=float),
        )
        logger.info("wrote %d samples to %s", len(self), run_dir)

    @classmethod
    def load(cls, run_dir) -> "ChainOutput":
        path = os.path.join(run_dir, "dag_samples.jsonl")
        if not os.path.exists(path):
            raise ValidationError(f"{run_dir} is not a complete run directory")
        dags = []
        with open(path) as f:
            edges = set()
            q = None
            for line in f:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if "q" in record:
                    q = record["q"]
                    edges = set(_zero_based(record["edges"]))
                else:
                    edges = (edges - set(_zero_based(record["remove"]))) | set(
                        _zero_based(record["add"])
                    )
                dags.append(Dag(q, sorted(edges), check=False))
        if q is None:
            raise ValidationError(f"{path} holds no samples")

        theta0 = pd.read_csv(os.path.join(run_dir, "theta0_trace.csv"))["theta0"]
        with open(os.path.join(run_dir, "accept_rates.json")) as f:
            accept = json.load(f)
        with open(os.path.join(run_dir, "config_echo.json")) as f:
            config = json.load(f)
        arrays = np.load(os.path.join(run_dir, "chol_samples.npz"))
        offsets = arrays["coeff_offsets"]
        values = arrays["coeff_values"]

        out = cls(q, seed=config.pop("seed", None), config=config)
        out.dag_samples = dags
        out.sigma2_samples = list(arrays["sigma2"])
        out.coeff_samples = [values[offsets[t] : offsets[t + 1]] for t in range(len(dags))]
        out.theta0_trace = [float(x) for x in theta0]
        out.timings = [float(x) for x in arrays["timings"]]
        out.counters = {key: int(accept[key]) for key in out.counters}
        return out


def _one_based(edges) -> List[List[int]]:
    return [[u + 1, v + 1] for u, v in sorted(edges)]


def _zero_based(edges):
    return [(u - 1, v - 1) for u, v in edges]
