"""State vector for one decision: problem, population and progress features."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from .decomp import DecompositionResult
from .optim import ContextMemory, probe_clone

COST_FLOOR = 1e-20
N_PROBLEM, N_POP, N_PROGRESS_BASE = 3, 5, 4


def state_size(n_optimizers: int) -> int:
    return N_PROBLEM + N_POP + N_PROGRESS_BASE + 2 * n_optimizers


def dimension_feature(dim: int) -> float:
    return (dim / 500.0) ** 0.4


def problem_features(k: int, decomposition: DecompositionResult) -> np.ndarray:
    dim_k = len(decomposition.groups[k])
    separable = 1.0 if decomposition.dsm.is_fully_separable() else 0.0
    overlap = len(decomposition.shared_variables()) / decomposition.dim
    return np.array([dimension_feature(dim_k), separable, overlap])


def _mean_pairwise(X: np.ndarray) -> float:
    return float(np.mean(pdist(X))) if len(X) >= 2 else 0.0


def population_features(
    costs: Sequence[float], positions: np.ndarray, probe: Optional[np.ndarray], epsilon: float = 1.0
) -> Tuple[np.ndarray, bool]:
    """``[d, d_top - d, ANR, NI, NW]`` and a degeneracy flag.

    ``probe`` holds one row of perturbed costs per sample; with no rows the
    neutral triple (1, 1, 1) is returned for ANR, NI and NW.
    """
    c = np.asarray(costs, dtype=float)
    X = np.asarray(positions, dtype=float)
    n = len(c)
    if n < 2:
        return np.zeros(5), True
    d = _mean_pairwise(X)
    n_top = max(2, math.ceil(0.1 * n))
    top = np.argsort(c, kind="stable")[:n_top]
    d_top = _mean_pairwise(X[top])
    P = np.zeros((0, n)) if probe is None else np.atleast_2d(np.asarray(probe, dtype=float))
    if P.shape[0] == 0:
        return np.array([d, d_top - d, 1.0, 1.0, 1.0]), False
    S = P.shape[0]
    with np.errstate(invalid="ignore"):
        anr = float(np.mean(np.abs(c - P) < epsilon))
    ni = float(np.mean(np.sum(P < c, axis=0) == 0))
    nw = float(np.mean(np.sum(P > c, axis=0) < S))
    return np.array([d, d_top - d, anr, ni, nw]), False


@dataclass
class RunTelemetry:
    """Budget and best-cost history that the progress features read."""

    max_fes: int
    n_optimizers: int
    fes_used: int = 0
    c0_star: float = 1.0
    ct_star: float = 1.0
    c_prev_star: float = 1.0
    sub_best: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    opt_fes: np.ndarray = None
    opt_improve: np.ndarray = None

    def __post_init__(self):
        if self.opt_fes is None:
            self.opt_fes = np.zeros(self.n_optimizers, dtype=np.int64)
        if self.opt_improve is None:
            self.opt_improve = np.zeros(self.n_optimizers)

    def start(self, c0: float) -> None:
        self.c0_star = self.ct_star = self.c_prev_star = max(float(c0), COST_FLOOR)

    def record_step(self, k: int, l: int, fes: int, new_best: float, sub_before: float, sub_after: float):
        new_best = max(float(new_best), COST_FLOOR)
        gain = math.log10(self.ct_star) - math.log10(new_best)
        self.opt_improve[l] += max(gain, 0.0)
        self.opt_fes[l] += int(fes)
        self.c_prev_star, self.ct_star = self.ct_star, min(new_best, self.ct_star)
        self.sub_best[k] = (float(sub_before), float(sub_after))

    def snapshot(self) -> "RunTelemetry":
        return RunTelemetry(
            self.max_fes, self.n_optimizers, self.fes_used, self.c0_star, self.ct_star,
            self.c_prev_star, dict(self.sub_best), self.opt_fes.copy(), self.opt_improve.copy(),
        )


def _ratio8(now: float, before: float) -> float:
    if before <= 0.0 or not math.isfinite(before):
        return 1.0
    return min(now / before, 1.0) ** 8


def progress_features(t: RunTelemetry, k: int) -> np.ndarray:
    ct = max(t.ct_star, COST_FLOOR)
    c0 = max(t.c0_star, COST_FLOOR)
    delta = max(1.5 - ct, 1.5 - c0, 0.0)
    denom = math.log10(c0 + delta)
    norm_cost = (math.log10(ct + delta) / denom) ** 2 if denom > 0 else 0.0
    global_ratio = _ratio8(ct, t.c_prev_star)
    before, after = t.sub_best.get(k, (1.0, 1.0))
    group_ratio = _ratio8(after, before)
    total = int(np.sum(t.opt_fes))
    usage = t.opt_fes / total if total > 0 else np.zeros(t.n_optimizers)
    effect = t.opt_improve / max(math.log10(c0) - math.log10(ct), 0.1)
    head = [min(t.fes_used / t.max_fes, 1.0), min(norm_cost, 1.0), global_ratio, group_ratio]
    return np.concatenate([head, usage, effect])


def probe_population(
    memory: ContextMemory,
    k: int,
    positions: np.ndarray,
    objective: Callable[[np.ndarray], np.ndarray],
    n_samples: int,
    fe_budget: int,
    bounds: Tuple[float, float],
    rng: np.random.Generator,
    allowed: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, bool]:
    """Perturb every individual once per sample with a cloned optimizer's search distribution.

    Returns the ``S x N`` cost matrix and a flag set when the budget cut
    sampling short. Clones are taken from ``memory`` and never written back.
    """
    X = np.asarray(positions, dtype=float)
    n, dims = X.shape
    choices = list(range(memory.pool.size)) if allowed is None else list(allowed)
    rows = []
    for _ in range(n_samples):
        if fe_budget - n * len(rows) < n:
            return np.array(rows).reshape(len(rows), n), True
        l = choices[int(rng.integers(len(choices)))]
        clone = probe_clone(memory, k, l, dims, bounds, rng)
        moved = clone.repair(X + clone.sample_steps(n))
        rows.append(np.asarray(objective(moved), dtype=float))
    return np.array(rows).reshape(len(rows), n), False


def build_state(
    k: int,
    decomposition: DecompositionResult,
    positions: Optional[np.ndarray],
    costs: Optional[np.ndarray],
    probe: Optional[np.ndarray],
    telemetry: RunTelemetry,
) -> np.ndarray:
    if positions is None or costs is None or len(costs) < 2:
        pop = np.zeros(5)
    else:
        pop, _ = population_features(costs, positions, probe)
    state = np.concatenate([problem_features(k, decomposition), pop, progress_features(telemetry, k)])
    return np.nan_to_num(state, nan=0.0, posinf=1e6, neginf=-1e6)
