"""Assembly of heterogeneous composite instances from a configuration."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .functions import BasicFunctionId, clamp_cost, eval_subproblem_raw
from .transforms import TransformChain

OVERLAP_RATIO = {1: 0.0, 2: 0.0, 3: 0.2, 4: 0.4, 5: 0.6}
DEFAULT_BOUNDS = (-100.0, 100.0)


class InstanceConfigError(ValueError):
    pass


@dataclass
class InstanceConfig:
    subproblem_dims: List[int]
    function_map: List[int]
    separability_degree: int = 1
    seed: int = 0
    weights: Optional[List[float]] = None
    bounds: tuple = DEFAULT_BOUNDS
    total_dim: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        self.subproblem_dims = [int(d) for d in self.subproblem_dims]
        self.function_map = [int(BasicFunctionId(f)) for f in self.function_map]
        if self.total_dim is None:
            self.total_dim = sum(self.subproblem_dims)
        self.validate()

    @property
    def n_subproblems(self) -> int:
        return len(self.subproblem_dims)

    @property
    def weight_mode(self) -> str:
        return "seeded-log-uniform" if self.weights is None else "explicit"

    @property
    def overlap_ratio(self) -> float:
        return OVERLAP_RATIO[self.separability_degree]

    def validate(self):
        if not self.subproblem_dims or min(self.subproblem_dims) < 1:
            raise InstanceConfigError("subproblem dimensions must be positive integers")
        if len(self.function_map) != len(self.subproblem_dims):
            raise InstanceConfigError("function_map and subproblem_dims differ in length")
        if self.separability_degree not in OVERLAP_RATIO:
            raise InstanceConfigError(
                f"separability degree must be in 1..5, got {self.separability_degree}"
            )
        if self.total_dim != sum(self.subproblem_dims):
            raise InstanceConfigError(
                f"total_dim {self.total_dim} does not match sum of subproblem dims "
                f"{sum(self.subproblem_dims)}"
            )
        if self.weights is not None:
            if len(self.weights) != len(self.subproblem_dims):
                raise InstanceConfigError("explicit weights must have one entry per subproblem")
            if min(self.weights) <= 0:
                raise InstanceConfigError("weights must be positive")
        lo, hi = self.bounds
        if not lo < hi:
            raise InstanceConfigError("bounds must satisfy lower < upper")

    def overlap_counts(self) -> List[int]:
        ratio = self.overlap_ratio
        dims = self.subproblem_dims
        return [int(np.floor(ratio * min(a, b))) for a, b in zip(dims[:-1], dims[1:])]

    def effective_dim(self) -> int:
        return sum(self.subproblem_dims) - sum(self.overlap_counts())


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform orthogonal matrix from a sign-corrected QR factorisation."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def window_starts(dims: Sequence[int], overlaps: Sequence[int]) -> List[int]:
    starts = [0]
    for d, o in zip(dims[:-1], overlaps):
        starts.append(starts[-1] + d - o)
    return starts


class ProblemInstance:
    """A weighted sum of transformed basic functions over (possibly shared) variable groups.

    Every call to :meth:`evaluate` or :meth:`evaluate_batch` charges one
    function evaluation per point to :attr:`fe_counter`.
    """

    def __init__(self, config: InstanceConfig, weights, x_opt, permutation, rotations):
        self.config = config
        self.weights = np.asarray(weights, dtype=float)
        self.x_opt = np.asarray(x_opt, dtype=float)
        self.permutation = np.asarray(permutation, dtype=np.int64)
        self.overlaps = config.overlap_counts()
        dim = config.effective_dim()
        if self.x_opt.shape != (dim,) or self.permutation.shape != (dim,):
            raise InstanceConfigError("x_opt / permutation do not match the effective dimension")
        if not np.array_equal(np.sort(self.permutation), np.arange(dim)):
            raise InstanceConfigError("permutation is not a bijection")
        if np.any(self.weights <= 0) or len(self.weights) != config.n_subproblems:
            raise InstanceConfigError("weights must be positive, one per subproblem")
        if len(rotations) != config.n_subproblems:
            raise InstanceConfigError("one rotation entry per subproblem is required")
        if config.separability_degree >= 2 and any(r is None for r in rotations):
            raise InstanceConfigError("separability degree >= 2 requires a rotation per subproblem")
        if config.separability_degree < 2 and any(r is not None for r in rotations):
            raise InstanceConfigError("degree 1 instances carry no rotation")

        self.groups: List[np.ndarray] = []
        self.chains: List[TransformChain] = []
        starts = window_starts(config.subproblem_dims, self.overlaps)
        for k, (d, s) in enumerate(zip(config.subproblem_dims, starts)):
            window = self.permutation[s : s + d]
            group = np.sort(window)
            local_perm = np.searchsorted(group, window)
            self.groups.append(group)
            self.chains.append(TransformChain(self.x_opt[group], local_perm, rotations[k]))
        self.function_map = [BasicFunctionId(f) for f in config.function_map]
        self.lower, self.upper = (float(b) for b in config.bounds)

        self._lock = threading.Lock()
        self.fe_counter = 0
        self.n_saturated = 0
        self.n_out_of_bounds = 0

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if k != "_lock"}

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return int(self.x_opt.shape[0])

    @property
    def n_subproblems(self) -> int:
        return len(self.groups)

    @property
    def ground_truth_groups(self) -> List[np.ndarray]:
        return [g.copy() for g in self.groups]

    def charge(self, n: int) -> None:
        with self._lock:
            self.fe_counter += int(n)

    def subproblem_costs(self, X, which=None) -> np.ndarray:
        """Weighted costs ``w_k f_k`` for each row of ``X``; does not charge FEs.

        Returns an array of shape ``(n, len(which))``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        which = range(self.n_subproblems) if which is None else which
        cols = []
        saturated = 0
        for k in which:
            values, sat = eval_subproblem_raw(self.function_map[k], self.chains[k], X[:, self.groups[k]])
            saturated += int(np.count_nonzero(sat))
            cols.append(self.weights[k] * values)
        if saturated:
            with self._lock:
                self.n_saturated += saturated
        return np.stack(cols, axis=1) if cols else np.zeros((X.shape[0], 0))

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        costs = self.subproblem_costs(X)
        total, _ = clamp_cost(np.sum(costs, axis=1))
        oob = np.count_nonzero(np.any((X < self.lower) | (X > self.upper), axis=1))
        with self._lock:
            self.fe_counter += X.shape[0]
            self.n_out_of_bounds += int(oob)
        return total

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("evaluate expects a single vector; use evaluate_batch")
        return float(self.evaluate_batch(x[None, :])[0])

    __call__ = evaluate

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def copy(self) -> "ProblemInstance":
        """Independent instance with the same definition and a fresh FE counter."""
        return ProblemInstance(
            self.config, self.weights, self.x_opt, self.permutation,
            [c.rotation for c in self.chains],
        )


def build_instance(config: InstanceConfig) -> ProblemInstance:
    """Sample permutation, optimum, weights and rotations from ``config.seed``."""
    config.validate()
    dim = config.effective_dim()
    perm_seq, opt_seq, w_seq, rot_seq = np.random.SeedSequence(config.seed).spawn(4)
    permutation = np.random.default_rng(perm_seq).permutation(dim)
    lo, hi = config.bounds
    margin = 0.1 * (hi - lo)
    x_opt = np.random.default_rng(opt_seq).uniform(lo + margin, hi - margin, size=dim)
    if config.weights is None:
        weights = 10.0 ** np.random.default_rng(w_seq).uniform(0.0, 3.0, size=config.n_subproblems)
    else:
        weights = np.asarray(config.weights, dtype=float)
    if config.separability_degree >= 2:
        rngs = [np.random.default_rng(s) for s in rot_seq.spawn(config.n_subproblems)]
        rotations = [random_rotation(d, r) for d, r in zip(config.subproblem_dims, rngs)]
    else:
        rotations = [None] * config.n_subproblems
    return ProblemInstance(config, weights, x_opt, permutation, rotations)
