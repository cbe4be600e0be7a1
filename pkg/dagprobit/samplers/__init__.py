from dagprobit.samplers.base_sampler import BaseSampler
from dagprobit.samplers.chain import ChainConfig, ChainOutput, Dataset, McmcState
from dagprobit.samplers.mcmc import (
    DagProbitSampler,
    FixedDagSampler,
    NodeSuffStats,
    dag_move,
    log_dag_acceptance,
    log_marginal_node,
    make_sampler,
    run_chain,
    sample_chol_posterior,
    update_latent,
    update_theta0,
)
