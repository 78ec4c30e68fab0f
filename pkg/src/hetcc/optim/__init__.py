from .base import (
    ContextFormatError,
    EvolutionStrategy,
    StepReport,
    population_size,
    recombination_weights,
)
from .memory import (
    DEFAULT_POOL,
    CommonContext,
    ContextMemory,
    OptimizerId,
    OptimizerPool,
    PoolConfigError,
    checkpoint,
    create_or_restore,
    probe_clone,
)
from .strategies import CMAES, LMMAES, STRATEGIES, CholeskyES, SepCMAES, rank_one_cholesky
