from dagprobit.models.gauss import (
    CholeskyFactor,
    TruncatedNormalSpec,
    cholesky_from_sigma,
    omega_from_cholesky,
    sample_inverse_gamma,
    sample_mvn,
    sample_truncated_normal,
    sigma_from_cholesky,
)
from dagprobit.models.prior import (
    Hyperparameters,
    log_prior_cholesky,
    log_prior_dag,
    node_shape,
    sample_prior_cholesky,
)
