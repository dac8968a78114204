"""Byzantine-resilient coded computation over the reals.

A master node distributes linearly encoded copies of a data matrix to m
workers so that matrix-vector products (and the optimizers built on them)
come back exactly right even when up to t workers respond with arbitrary
garbage and up to s fail to respond at all. Corrupt workers are localized
through real-valued syndrome decoding, not voting or medians, so the
recovered products are exact to working precision rather than approximate.
"""

from .errors import (
    BudgetExceeded,
    BudgetViolation,
    ConfigError,
    DimensionMismatch,
    InvalidThreshold,
    InvalidWorkerCount,
    PaviseError,
    RankDeficient,
)
from .locator import (
    ErrorLocator,
    NullBasis,
    SupportReport,
    build_locator,
    joint_support,
    null_basis,
    recover_support,
)
from .encoding import (
    BlockGeometry,
    EncodedShare,
    WorkerEncoder,
    append_column,
    append_row,
    encode,
    storage_report,
)
from .multiply import (
    DecodeOutcome,
    WorkerResponse,
    decode,
    decode_systems,
    sparse_product,
    worker_product,
)
from .cluster import (
    ADVERSARY_KINDS,
    Cluster,
    ClusterConfig,
    load_config,
    parse_config,
    replay,
    run_round,
)
from .optim import (
    CdCodebook,
    GlmState,
    ModelSpec,
    cd_iteration,
    coded_gradient,
    coordinate_schedule,
    default_step_size,
    glm_init,
    make_cd_cluster,
    make_mv_cluster,
    make_pgd_cluster,
    make_sgd_cluster,
    objective_value,
    pgd_step,
    prox,
    serial_cd,
    serial_pgd,
    serial_sgd,
    sgd_step,
)
from .experiments import gen_dataset, run_experiment

__version__ = "0.1.0"
