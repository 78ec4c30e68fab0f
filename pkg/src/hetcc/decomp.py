"""Variable grouping: ground truth from generator metadata, or detected by
pairwise differential probing."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .bench.assembly import ProblemInstance


_UNIT_ROUNDOFF = 2.0**-53


class DecompositionBudgetError(RuntimeError):
    """Raised when the FE budget runs out before all pairs are probed.

    ``pairs`` holds the index pairs probed so far and ``interactions`` the
    subset of them judged interacting.
    """

    def __init__(self, message, pairs, interactions):
        super().__init__(message)
        self.pairs = pairs
        self.interactions = interactions


@dataclass
class DesignStructureMatrix:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=bool)

    @classmethod
    def from_groups(cls, groups, dim: int) -> "DesignStructureMatrix":
        theta = np.eye(dim, dtype=bool)
        for g in groups:
            g = np.asarray(g)
            theta[np.ix_(g, g)] = True
        return cls(theta)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def packed_rows(self) -> np.ndarray:
        return np.packbits(self.theta, axis=1)

    def is_fully_separable(self) -> bool:
        return bool(np.all(self.theta.sum(axis=1) == 1))


@dataclass
class DecompositionResult:
    groups: List[np.ndarray]
    dsm: DesignStructureMatrix
    source: str
    fes: int = 0

    @property
    def dim(self) -> int:
        return self.dsm.dim

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def shared_variables(self) -> np.ndarray:
        """Indices belonging to more than one group."""
        counts = np.zeros(self.dim, dtype=int)
        for g in self.groups:
            counts[g] += 1
        return np.flatnonzero(counts > 1)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "dim": self.dim,
            "fes": self.fes,
            "groups": [g.tolist() for g in self.groups],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecompositionResult":
        groups = [np.asarray(g, dtype=np.int64) for g in doc["groups"]]
        return cls(groups, DesignStructureMatrix.from_groups(groups, doc["dim"]), doc["source"], doc.get("fes", 0))


def ground_truth_decompose(instance: ProblemInstance) -> DecompositionResult:
    groups = instance.ground_truth_groups
    return DecompositionResult(groups, DesignStructureMatrix.from_groups(groups, instance.dim), "ground-truth")


def groups_from_interactions(theta: np.ndarray) -> List[np.ndarray]:
    n, labels = connected_components(csr_matrix(theta), directed=False)
    groups = [np.flatnonzero(labels == c) for c in range(n)]
    return sorted(groups, key=lambda g: g[0])


def differential_grouping_decompose(
    instance: ProblemInstance,
    delta: float = 1.0,
    epsilon_threshold: Optional[float] = None,
    fe_budget: Optional[int] = None,
    batch_size: int = 512,
) -> DecompositionResult:
    """Detect pairwise interactions with the difference-of-differences test.

    Variables ``i`` and ``j`` interact when
    ``|(f(x + d e_i + d e_j) - f(x + d e_j)) - (f(x + d e_i) - f(x))| > eps``
    with ``x`` the lower-bound corner. When ``epsilon_threshold`` is None a
    per-pair floating-point error bound is used,
    ``gamma * max(|f(x)| + |f_ij|, |f_i| + |f_j|)`` with
    ``gamma = k u / (1 - k u)``, ``k = sqrt(D) + 2`` and ``u`` the unit roundoff.
    Groups are the connected components of the interaction graph, so
    overlapping groups are merged.

    Interactions of a subproblem whose whole contribution lies below the
    rounding resolution of the total cost are undetectable by construction.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    dim = instance.dim
    pairs = list(combinations(range(dim), 2))
    needed = 1 + dim + len(pairs)
    budget = needed if fe_budget is None else int(fe_budget)
    if budget < 1 + dim:
        raise DecompositionBudgetError("budget cannot cover the base and single-variable probes", [], [])

    start = instance.fe_counter
    base = np.full(dim, instance.lower)
    singles = base + delta * np.eye(dim)
    values = instance.evaluate_batch(np.vstack([base, singles]))
    f0, fi = values[0], values[1:]
    eps = epsilon_threshold

    # rounding-error bound for four summed evaluations
    k = np.sqrt(dim) + 2.0
    gamma = k * _UNIT_ROUNDOFF / (1.0 - k * _UNIT_ROUNDOFF)

    theta = np.eye(dim, dtype=bool)
    affordable = min(len(pairs), budget - 1 - dim)
    probed, interacting = [], []
    for lo in range(0, affordable, batch_size):
        chunk = pairs[lo : min(lo + batch_size, affordable)]
        idx = np.asarray(chunk)
        points = np.tile(base, (len(chunk), 1))
        rows = np.arange(len(chunk))
        points[rows, idx[:, 0]] += delta
        points[rows, idx[:, 1]] += delta
        fij = instance.evaluate_batch(points)
        diff = np.abs((fij - fi[idx[:, 1]]) - (fi[idx[:, 0]] - f0))
        if eps is None:
            scale = np.maximum(abs(f0) + np.abs(fij), np.abs(fi[idx[:, 0]]) + np.abs(fi[idx[:, 1]]))
            hit = diff > gamma * scale
        else:
            hit = diff > eps
        theta[idx[hit, 0], idx[hit, 1]] = True
        theta[idx[hit, 1], idx[hit, 0]] = True
        probed.extend(chunk)
        interacting.extend(p for p, h in zip(chunk, hit) if h)
    if affordable < len(pairs):
        raise DecompositionBudgetError(
            f"FE budget {budget} exhausted after {len(probed)} of {len(pairs)} pairs",
            probed,
            interacting,
        )
    groups = groups_from_interactions(theta)
    return DecompositionResult(
        groups, DesignStructureMatrix.from_groups(groups, dim), "detected", instance.fe_counter - start
    )
