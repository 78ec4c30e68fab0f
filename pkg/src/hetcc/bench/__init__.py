from .assembly import (
    DEFAULT_BOUNDS,
    InstanceConfig,
    InstanceConfigError,
    ProblemInstance,
    build_instance,
    random_rotation,
)
from .functions import (
    COST_CEILING,
    BasicFunctionId,
    clamp_cost,
    eval_basic,
    eval_subproblem,
)
from .io import (
    InstanceFormatError,
    export_instance,
    import_instance,
    load_instance,
    save_instance,
)
from .presets import (
    APPENDIX_DIMS,
    DESK_FUNCTIONS,
    HE_MAPPING,
    appendix_b_configs,
    desk_scale_configs,
    scaled_dims,
)
from .transforms import (
    BenchmarkDomainError,
    TransformChain,
    apply_asy,
    apply_lambda,
    apply_osz,
)
