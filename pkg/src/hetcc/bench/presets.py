"""Named instance families: the 3000-D suite and desk-scale variants of it."""
from __future__ import annotations

from typing import Dict, List

import numpy as np

from .assembly import InstanceConfig
from .functions import BasicFunctionId

APPENDIX_DIMS = [25, 25, 50, 50, 50, 100, 100, 100, 200, 200, 300, 300, 500, 1000]
HE_MAPPING = [6, 2, 3, 1, 6, 7, 6, 7, 3, 4, 2, 5, 3, 2]


def scaled_dims(dims: List[int], scale: int) -> List[int]:
    """Integer-divide every level by ``scale`` (minimum 1).

    The rounding remainder goes to the largest subproblem so the total is
    exactly ``sum(dims) // scale``.
    """
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    out = [max(1, d // scale) for d in dims]
    target = sum(dims) // scale
    largest = max(range(len(out)), key=lambda i: out[i])
    out[largest] += target - sum(out)
    if out[largest] < 1:
        raise ValueError(f"scale {scale} is too large for these dimensions")
    return out


def appendix_b_configs(seed: int = 0, scale: int = 1) -> Dict[str, InstanceConfig]:
    """The 18 preset instances: Ackley_1..5, AttractiveSector_1..5, He_1..8.

    He_1..5 use the fixed heterogeneous mapping at degrees 1..5; He_6..8 use the
    same mapping over the reversed dimension order at degrees 3..5, which puts
    the widest overlaps between the largest subproblems.
    """
    dims = scaled_dims(APPENDIX_DIMS, scale)
    specs = []
    for degree in range(1, 6):
        specs.append((f"Ackley_{degree}", dims, [BasicFunctionId.ACKLEY] * len(dims), degree))
    for degree in range(1, 6):
        specs.append(
            (f"AttractiveSector_{degree}", dims, [BasicFunctionId.ATTRACTIVE_SECTOR] * len(dims), degree)
        )
    for degree in range(1, 6):
        specs.append((f"He_{degree}", dims, HE_MAPPING, degree))
    for i, degree in enumerate(range(3, 6)):
        specs.append((f"He_{6 + i}", dims[::-1], HE_MAPPING, degree))
    return {
        name: InstanceConfig(
            subproblem_dims=list(d), function_map=list(fmap), separability_degree=deg,
            seed=seed * 1000 + idx, name=name,
        )
        for idx, (name, d, fmap, deg) in enumerate(specs)
    }


DESK_LEVELS = (10, 20, 25, 50, 100)
DESK_FUNCTIONS = (
    BasicFunctionId.ELLIPTIC, BasicFunctionId.RASTRIGIN, BasicFunctionId.ACKLEY, BasicFunctionId.SCHWEFEL12,
)


def desk_scale_configs(
    n: int,
    seed: int = 0,
    functions=DESK_FUNCTIONS,
    degrees=(1, 2, 3),
    dim_range=(150, 300),
    levels=DESK_LEVELS,
    prefix: str = "Desk",
) -> Dict[str, InstanceConfig]:
    """``n`` randomly composed instances whose effective dimension lies in ``dim_range``.

    Subproblem sizes are drawn from ``levels`` and functions from ``functions``;
    overlap (degree 3) shortens the effective dimension, which is checked after
    the draw.
    """
    rng = np.random.default_rng(seed)
    out: Dict[str, InstanceConfig] = {}
    lo, hi = dim_range
    while len(out) < n:
        k = int(rng.integers(4, 9))
        dims = [int(d) for d in rng.choice(levels, size=k)]
        degree = int(rng.choice(degrees))
        fmap = [int(f) for f in rng.choice(list(functions), size=k)]
        name = f"{prefix}_{len(out) + 1}"
        cfg = InstanceConfig(dims, fmap, degree, seed=int(rng.integers(2**31)), name=name)
        if lo <= cfg.effective_dim() <= hi:
            out[name] = cfg
    return out
