import numpy as np
import pandas as pd
import pytest
from sklearn import metrics

from dagprobit import simulate
from dagprobit.causal import PosteriorSummary
from dagprobit.errors import ProprietyError, ValidationError
from dagprobit.experiment_helpers import get_scores, run_replicates
from dagprobit.graphs.dag import RESPONSE, Dag
from dagprobit.graphs.graph_structures import DagStructure, make_dag
from dagprobit.models.prior import Hyperparameters
from dagprobit.samplers.chain import ChainConfig
from dagprobit.samplers.mcmc import run_chain
from dagprobit.simulate import (
    ScoringMode,
    SimConfig,
    aggregate_roc,
    benchmark_timing,
    generate_dataset,
    mae,
    naive_baseline,
    predictor_recovery,
    random_dag,
    read_fixture,
    structure_metrics,
    two_chain_diagnostic,
    write_fixture,
)


def small_dataset(seed=0, q=4, n=60):
    rng = np.random.default_rng(seed)
    dag = make_dag("confounded", q)
    return generate_dataset(dag, SimConfig(q=q, n=n), rng)


def test_random_dag_properties():
    rng = np.random.default_rng(0)
    dag = random_dag(30, 0.2, rng)
    dag.check()
    assert not dag.adj[RESPONSE].any()
    assert not np.triu(dag.adj).any()
    assert dag.n_edges / (30 * 29 / 2) == pytest.approx(0.2, abs=0.06)
    with pytest.raises(ValidationError):
        random_dag(5, 0.0, rng)


def test_sim_config_defaults_and_validation():
    assert SimConfig(q=10, n=100).edge_prob == pytest.approx(3 / 18)
    assert SimConfig(q=2, n=100).edge_prob == 0.5
    assert SimConfig(q=4, n=10).to_dict()["coeff_range"] == [1.0, 2.0]
    for bad in (
        SimConfig(q=1, n=10),
        SimConfig(q=4, n=0),
        SimConfig(q=4, n=10, edge_prob=1.5),
        SimConfig(q=4, n=10, coeff_range=(2.0, 1.0)),
    ):
        with pytest.raises(ValidationError):
            bad.validate()


def test_generate_dataset_moments():
    rng = np.random.default_rng(1)
    dag = make_dag("confounded", 4)
    data, truth = generate_dataset(dag, SimConfig(q=4, n=20000), rng)
    assert data.n == 20000 and data.q == 4
    assert data.y.mean() == pytest.approx(0.5, abs=0.02)
    assert np.array_equal(data.y, (truth.latent > truth.theta0).astype(int))
    cov = np.cov(np.column_stack([truth.latent, data.X]).T)
    assert np.allclose(cov, truth.sigma, rtol=0.1, atol=0.05 * np.abs(truth.sigma).max())
    truth.chol.check(dag)
    assert sorted(truth.effects) == [1, 2, 3]
    assert all(len(beta) == data.n for beta in truth.effects.values())


def test_generate_dataset_gives_up_on_one_class():
    rng = np.random.default_rng(2)
    with pytest.raises(ProprietyError):
        generate_dataset(Dag(2), SimConfig(q=2, n=20, theta0_true=50.0), rng)


def test_true_effects_frame():
    data, truth = small_dataset()
    frame = truth.effects_frame(data)
    assert list(frame.columns) == ["s", "x_tilde", "beta_true"]
    assert sorted(frame["s"].unique()) == [2, 3, 4]
    assert len(frame) == 3 * data.n
    assert frame["beta_true"].between(0, 1).all()


def test_perfect_recovery_scores():
    truth = Dag(4, [(1, 0), (2, 1), (3, 0)])
    report = structure_metrics(truth, PosteriorSummary(truth.adj.astype(float)))
    inside = (report.k > 0) & (report.k < 1)
    assert np.all(report.sen[inside] == 1) and np.all(report.spe[inside] == 1)
    assert report.auc == pytest.approx(1.0)
    assert len(report.k) == 101


def test_inverted_and_flat_scores():
    truth = Dag(4, [(1, 0), (2, 1), (3, 0)])
    inverted = 1.0 - truth.adj.astype(float)
    inverted[RESPONSE] = 0
    np.fill_diagonal(inverted, 0)
    assert structure_metrics(truth, PosteriorSummary(inverted)).auc == pytest.approx(0.0)
    flat = PosteriorSummary(np.full((4, 4), 0.5))
    assert structure_metrics(truth, flat).auc == pytest.approx(0.5)


def test_empty_truth_sensitivity():
    report = structure_metrics(Dag(3), PosteriorSummary(np.full((3, 3), 0.3)))
    assert np.all(report.sen == 1)
    assert np.all(report.tp + report.fn == 0)
    # directed pairs whose tail is the response are never scored
    assert np.all(report.tn + report.fp == 4)


def test_auc_matches_roc_and_is_monotone_invariant():
    rng = np.random.default_rng(3)
    truth = random_dag(8, 0.4, rng)
    probs = rng.uniform(size=(8, 8)).round(2)
    probs[RESPONSE] = 0
    np.fill_diagonal(probs, 0)
    report = structure_metrics(truth, PosteriorSummary(probs), k_grid=np.unique(probs))
    possible = ~np.eye(8, dtype=bool)
    possible[RESPONSE] = False
    expected = metrics.roc_auc_score(truth.adj[possible], probs[possible])
    assert report.auc == pytest.approx(expected)
    cubed = probs**3
    other = structure_metrics(truth, PosteriorSummary(cubed), k_grid=np.unique(cubed))
    assert other.auc == pytest.approx(report.auc)
    assert 0 <= report.auc <= 1


def test_skeleton_scoring_ignores_orientation():
    truth = Dag(3, [(2, 1), (1, 0)])
    probs = np.zeros((3, 3))
    probs[1, 0] = 1.0
    probs[1, 2] = 1.0
    summary = PosteriorSummary(probs)
    assert structure_metrics(truth, summary, mode="skeleton").auc == pytest.approx(1.0)
    assert structure_metrics(truth, summary, mode=ScoringMode.directed).auc < 1.0
    with pytest.raises(ValidationError):
        structure_metrics(Dag(4), summary)


def test_predictor_recovery_examples():
    truth = Dag(5, [(1, 0)])
    probs = np.zeros((5, 5))
    probs[2, 0] = 0.9
    assert predictor_recovery(truth, PosteriorSummary(probs)) == pytest.approx(0.5)
    probs[1, 0] = 0.5
    probs[2, 0] = 0.1
    assert predictor_recovery(truth, PosteriorSummary(probs)) == pytest.approx(1.0)
    assert predictor_recovery(truth, PosteriorSummary(probs), k_star=0.6) == pytest.approx(0.75)


def test_mae():
    assert mae([0.1, 0.2], [0.2, 0.0]) == pytest.approx(0.15)
    assert mae([0.3], [0.3]) == 0.0
    with pytest.raises(ValidationError):
        mae([0.1, 0.2], [0.1])


def test_aggregate_roc():
    truth = Dag(4, [(1, 0), (2, 1)])
    perfect = structure_metrics(truth, PosteriorSummary(truth.adj.astype(float)))
    flat = structure_metrics(truth, PosteriorSummary(np.full((4, 4), 0.5)))
    frame, auc = aggregate_roc([perfect, perfect])
    assert auc == pytest.approx(1.0)
    assert list(frame.columns) == [
        "k", "fpr_mean", "sen_mean", "fpr_lo", "fpr_hi", "sen_lo", "sen_hi"
    ]
    frame, auc = aggregate_roc([perfect, flat])
    assert 0.5 < auc < 1.0
    assert np.all(frame["sen_lo"] <= frame["sen_hi"])
    coarse = structure_metrics(truth, PosteriorSummary(truth.adj.astype(float)), k_grid=[0.5])
    with pytest.raises(ValidationError):
        aggregate_roc([perfect, coarse])


def test_roc_frame():
    truth = Dag(3, [(1, 0)])
    frame = structure_metrics(truth, PosteriorSummary(truth.adj.astype(float)), [0.0, 0.5]).roc_frame()
    assert list(frame["fpr"]) == [1.0, 0.0]
    assert list(frame["tp"]) == [1, 1]


def test_naive_baseline():
    data, _ = small_dataset(seed=4)
    hp = Hyperparameters.default(data.q, data.n)
    tables = naive_baseline(data, hp, ChainConfig(60, seed=0), nodes=[1, 3])
    assert sorted(tables) == [1, 3]
    assert tables[1].effects.shape == (48, data.n)


def test_two_chain_diagnostic():
    data, _ = small_dataset(seed=5)
    hp = Hyperparameters.default(data.q, data.n)
    config = ChainConfig(50, seed=3)
    same = two_chain_diagnostic(data, hp, config, 40, 40, seeds=(7, 7))
    assert all(d == 0.0 for d in same.max_abs_diff.values())
    report = two_chain_diagnostic(data, hp, config, 40, 60, nodes=[2])
    assert list(report.max_abs_diff) == [2]
    assert list(report.pairs.columns) == ["s", "x_tilde", "chain1", "chain2"]
    assert (report.pairs["s"] == 3).all()
    with pytest.raises(ValidationError):
        two_chain_diagnostic(data, hp, config, 1, 10)


def test_two_chain_diagnostic_keeps_burn_in(monkeypatch):
    data, _ = small_dataset(seed=5)
    hp = Hyperparameters.default(data.q, data.n)
    burn_ins = []

    def recording_run_chain(data, hp, config, rng):
        burn_ins.append(config.burn_in)
        return run_chain(data, hp, config, rng)

    monkeypatch.setattr(simulate, "run_chain", recording_run_chain)
    two_chain_diagnostic(data, hp, ChainConfig(50, burn_in=30, seed=3), 20, 40)
    assert burn_ins == [19, 30]


def test_fixture_round_trip(tmp_path):
    data, truth = small_dataset(seed=6)
    write_fixture(tmp_path / "rep_000", data, truth)
    dag, loaded, effects = read_fixture(tmp_path / "rep_000")
    assert dag == truth.dag
    assert np.array_equal(loaded.y, data.y)
    assert np.allclose(loaded.X, data.X)
    assert loaded.names == data.names
    assert np.allclose(effects["beta_true"], truth.effects_frame(data)["beta_true"])
    (tmp_path / "rep_000" / "data.csv").unlink()
    with pytest.raises(ValidationError):
        read_fixture(tmp_path / "rep_000")


def test_benchmark_timing():
    frame = benchmark_timing([(3, 20), (4, 30)], iterations=10, seed=0)
    assert list(frame[["q", "n"]].itertuples(index=False, name=None)) == [(3, 20), (4, 30)]
    assert (frame["seconds_per_iteration"] > 0).all()


def test_replicates_do_not_depend_on_jobs():
    sim = SimConfig(q=4, n=40, reps=2, seed=9)
    config = ChainConfig(80)
    serial = get_scores(run_replicates(sim, config, jobs=1))
    parallel = get_scores(run_replicates(sim, config, jobs=2))
    pd.testing.assert_frame_equal(serial, parallel)
    assert list(serial.columns) == ["rep", "auc", "p_star", "median_mae"]
    assert serial["auc"].between(0, 1).all()


def test_replicates_with_naive_arm():
    sim = SimConfig(q=4, n=40, reps=1, seed=1)
    results = run_replicates(sim, ChainConfig(60), naive=True, structure=DagStructure.confounded)
    scores = get_scores(results)
    assert "naive_median_mae" in scores.columns
    assert sorted(results[0].naive_mae_by_node) == [1, 2, 3]


@pytest.mark.slow
@pytest.mark.parametrize("n, auc_floor, p_star_floor", [(100, 0.85, 0.8), (500, 0.90, 0.95)])
def test_scaled_structure_recovery(n, auc_floor, p_star_floor):
    sim = SimConfig(q=10, n=n, reps=10, seed=2024)
    scores = get_scores(run_replicates(sim, ChainConfig(10000), jobs=4))
    assert scores["auc"].mean() >= auc_floor
    assert scores["p_star"].median() >= p_star_floor
    if n == 500:
        assert scores["median_mae"].median() <= 0.05


@pytest.mark.slow
def test_scaled_naive_comparison():
    sim = SimConfig(q=10, n=200, reps=10, seed=7)
    results = run_replicates(
        sim, ChainConfig(10000), jobs=4, naive=True, structure=DagStructure.confounded
    )
    wins = sum(r.median_mae < r.naive_median_mae for r in results)
    assert wins >= 8


@pytest.mark.slow
@pytest.mark.parametrize("sizes", [(100, 200, 500), (10, 20, 40)])
def test_scaled_effect_error_shrinks_with_n(sizes):
    medians = []
    for n in sizes:
        sim = SimConfig(q=10, n=n, reps=10, seed=11)
        scores = get_scores(run_replicates(sim, ChainConfig(10000), jobs=4))
        medians.append(scores["median_mae"].median())
    assert all(later <= earlier for earlier, later in zip(medians, medians[1:]))
