"""Sparse proximal SAGA solvers with a lock-free asynchronous parallel variant.

The library solves composite finite-sum problems
(1/n) sum_i loss(a_i^T x, b_i) + (lambda1/2)||x||^2 + h(x)
for block-separable penalties h, exploiting sparsity in the per-sample
gradients: each stochastic step only touches the partition blocks that
intersect the sampled row's support, reweighted so the update stays
unbiased.  The parallel variant applies the same step from multiple
threads through coordinate-level atomic operations, without any locks.
"""

from .data import (
    BlockPartition,
    CsrMatrix,
    Dataset,
    DeadBlockError,
    ParseError,
    SupportIndex,
    build_support_index,
    parse_libsvm,
    single_block_partition,
    singleton_partition,
    to_libsvm,
)
from .losses import (
    Loss,
    SmoothnessInfo,
    full_objective,
    lipschitz_constant,
    loss_scalar,
    sample_gradient,
    smooth_gradient,
    smooth_value,
)
from .penalties import (
    BoxPenalty,
    GroupL2Penalty,
    L1Penalty,
    Penalty,
    ProxStep,
    ZeroPenalty,
    make_penalty,
    penalty_value,
    prox_block,
    prox_phi,
)
from .saga import (
    GradientMemory,
    SolverConfig,
    Trace,
    dense_saga_step,
    fixed_point_residual,
    resolve_step_size,
    resync_average,
    run_dense,
    run_sequential,
    sparse_gradient_estimate,
    sps_step,
    worker_rng,
)
from .asynchronous import (
    AsyncConfig,
    SharedState,
    atomic_float_add,
    measure_speedup,
    run_async,
    worker_iteration,
)
from .fista import FistaState, fista_step, run_fista
from .problems import gen_disjoint_glm, gen_regularization, gen_sparse_glm, lambda_max
from .diagnostics import (
    StaleOptimumError,
    brute_force_prox,
    dense_gradient_oracle,
    rate_envelope_check,
    reference_optimum,
    suboptimality,
)
from .verify import acceptance_problem, run_checks

__version__ = "0.1.0"
