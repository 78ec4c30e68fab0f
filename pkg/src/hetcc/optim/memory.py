"""Optimizer pool description and the per-subproblem context memory used for warm starts."""
from __future__ import annotations

import hashlib
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .base import EvolutionStrategy
from .strategies import STRATEGIES

log = logging.getLogger(__name__)

DEFAULT_POOL = ("sep-cma", "lm-ma-es", "cma", "chol-r1")


class PoolConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerId:
    index: int  # 1-based, as in the action space
    tier: str


class OptimizerPool:
    """Ordered strategies; the high tier must come first (indices 1..j)."""

    def __init__(self, names: Sequence[str] = DEFAULT_POOL):
        names = list(names)
        if not names:
            raise PoolConfigError("the pool needs at least one optimizer")
        unknown = [n for n in names if n not in STRATEGIES]
        if unknown:
            raise PoolConfigError(f"unknown optimizers: {unknown}; choose from {sorted(STRATEGIES)}")
        tiers = [STRATEGIES[n].tier for n in names]
        if tiers[0] != "high":
            raise PoolConfigError("the first optimizer must be high-tier")
        j = tiers.count("high")
        if tiers != ["high"] * j + ["low"] * (len(tiers) - j):
            raise PoolConfigError("high-tier optimizers must precede low-tier ones")
        self.names = names
        self.n_high = j

    @classmethod
    def parse(cls, spec: str) -> "OptimizerPool":
        return cls([s.strip() for s in spec.split(",") if s.strip()])

    @property
    def size(self) -> int:
        return len(self.names)

    def ids(self) -> List[OptimizerId]:
        return [OptimizerId(i + 1, STRATEGIES[n].tier) for i, n in enumerate(self.names)]

    def strategy(self, l: int):
        """Class for 0-based action index ``l``."""
        return STRATEGIES[self.names[l]]

    def low_tier_mask(self) -> np.ndarray:
        return np.arange(self.size) >= self.n_high

    def __repr__(self):
        return f"OptimizerPool({self.names})"


@dataclass
class CommonContext:
    best_solution: np.ndarray
    best_cost: float
    mean: np.ndarray
    sigma: float


@dataclass
class ContextMemory:
    """Serialized optimizer contexts keyed by (subproblem, action index) plus one
    :class:`CommonContext` per touched subproblem."""

    pool: OptimizerPool
    seed: int = 0
    contexts: Dict[Tuple[int, int], bytes] = field(default_factory=dict)
    common: Dict[int, CommonContext] = field(default_factory=dict)
    fes: Dict[Tuple[int, int], int] = field(default_factory=dict)
    events: List[str] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if k != "_lock"}

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def stream_seed(self, k: int, l: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(int(k), int(l)))

    def digest(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self.contexts):
            h.update(repr(key).encode())
            h.update(self.contexts[key])
        for k in sorted(self.common):
            c = self.common[k]
            h.update(repr(k).encode())
            for a in (c.best_solution, c.mean, np.array([c.best_cost, c.sigma])):
                h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()

    def context_bytes(self) -> int:
        return sum(len(b) for b in self.contexts.values())


def create_or_restore(
    memory: ContextMemory, k: int, l: int, dims: int, bounds: Tuple[float, float]
) -> EvolutionStrategy:
    """Live optimizer for subproblem ``k`` and 0-based action ``l``.

    A stored context is restored exactly. Otherwise the optimizer starts cold
    and takes mean, step size and best solution from the subproblem's common
    record when there is one.
    """
    cls = memory.pool.strategy(l)
    blob = memory.contexts.get((k, l))
    opt = None
    if blob is not None:
        header, _ = EvolutionStrategy.read_header(blob)
        if header["dim"] != dims or header["optimizer"] != cls.name:
            msg = f"context ({k}, {l}) invalidated: stored dim {header['dim']}, requested {dims}"
            log.warning(msg)
            memory.events.append(msg)
            with memory._lock:
                memory.contexts.pop((k, l), None)
        else:
            opt = cls.from_bytes(blob)
    if opt is None:
        opt = cls(dims, bounds[0], bounds[1], seed=memory.stream_seed(k, l))
        common = memory.common.get(k)
        if common is not None and common.mean.shape == (dims,):
            opt.overlay(common.mean, common.sigma, common.best_solution, common.best_cost)
    opt.slot = (k, l)
    return opt


def checkpoint(opt: EvolutionStrategy, memory: ContextMemory, fes_used: int = 0) -> ContextMemory:
    """Store ``opt``'s context and refresh the subproblem's common record."""
    k, l = opt.slot
    blob = opt.to_bytes()
    with memory._lock:
        memory.contexts[(k, l)] = blob
        memory.fes[(k, l)] = memory.fes.get((k, l), 0) + int(fes_used)
        prev = memory.common.get(k)
        if prev is None or opt.best_cost < prev.best_cost:
            best_x, best_cost = opt.best_x.copy(), float(opt.best_cost)
        else:
            best_x, best_cost = prev.best_solution, prev.best_cost
        sigma = opt.sigma if math.isfinite(opt.sigma) and opt.sigma > 0 else (prev.sigma if prev else 1.0)
        memory.common[k] = CommonContext(best_x, best_cost, opt.mean.copy(), float(sigma))
    return memory


def probe_clone(
    memory: ContextMemory, k: int, l: int, dims: int, bounds, rng: np.random.Generator
) -> EvolutionStrategy:
    """Independent copy of the (k, l) optimizer with a fresh random stream; never touches memory."""
    blob = memory.contexts.get((k, l))
    cls = memory.pool.strategy(l)
    if blob is not None and EvolutionStrategy.read_header(blob)[0]["dim"] == dims:
        opt = cls.from_bytes(blob)
    else:
        opt = cls(dims, bounds[0], bounds[1], seed=0)
        common = memory.common.get(k)
        if common is not None and common.mean.shape == (dims,):
            opt.overlay(common.mean, common.sigma, common.best_solution, common.best_cost)
    opt.rng = np.random.Generator(np.random.PCG64(rng.integers(2**63)))
    return opt
