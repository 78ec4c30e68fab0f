"""Shared machinery for the pool's evolution strategies.

Every strategy samples ``x = m + sigma * y`` with ``y`` drawn from its own
search distribution, repairs bound violations, evaluates whole generations
only, and can be frozen into a self-describing binary blob and thawed back
bit-exactly (including its random stream).
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Callable, ClassVar, Dict, Optional, Tuple

import numpy as np

CONTEXT_MAGIC = b"HCTX"
CONTEXT_VERSION = 1

Objective = Callable[[np.ndarray], np.ndarray]


class ContextFormatError(ValueError):
    pass


def population_size(dim: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dim)))


def recombination_weights(lam: int) -> Tuple[int, np.ndarray, float]:
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    return mu, w, float(1.0 / np.sum(w**2))


def expected_norm(dim: int) -> float:
    """E||N(0, I)|| approximation."""
    return math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim))


@dataclass
class StepReport:
    best_solution: np.ndarray
    best_cost: float
    fes_used: int
    population: np.ndarray
    population_costs: np.ndarray
    step_best_solution: np.ndarray
    step_best_cost: float
    generations: int


class EvolutionStrategy:
    """Base class; subclasses define the search distribution and its update."""

    name: ClassVar[str] = ""
    tier: ClassVar[str] = "high"
    # attributes serialized as float64 arrays, in this order
    state_arrays: ClassVar[Tuple[str, ...]] = ()
    state_scalars: ClassVar[Tuple[str, ...]] = ()

    _base_arrays = ("mean", "best_x", "population", "population_costs")
    _base_scalars = ("sigma", "best_cost", "generation")

    def __init__(self, dim: int, lower: float, upper: float, seed=None):
        if dim < 1:
            raise ValueError("dimension must be positive")
        if not upper > lower:
            raise ValueError("upper bound must exceed lower bound")
        self.dim = int(dim)
        self.lower = float(lower)
        self.upper = float(upper)
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.lam = population_size(self.dim)
        self.mu, self.weights, self.mueff = recombination_weights(self.lam)
        self.chi_n = expected_norm(self.dim)
        self.mean = np.full(self.dim, 0.5 * (self.lower + self.upper))
        self.sigma = 0.3 * (self.upper - self.lower)
        self.best_x = self.mean.copy()
        self.best_cost = math.inf
        self.generation = 0
        self.population = np.zeros((0, self.dim))
        self.population_costs = np.zeros(0)
        self._set_constants()
        self._cold_state()

    # -- subclass hooks ------------------------------------------------------
    def _set_constants(self) -> None:
        """Learning rates and other quantities derived from ``dim``."""

    def _cold_state(self) -> None:
        raise NotImplementedError

    def _shape(self, Z: np.ndarray) -> np.ndarray:
        """Map standard normal rows to steps from the search distribution."""
        raise NotImplementedError

    def _whiten(self, Y: np.ndarray) -> Optional[np.ndarray]:
        """Inverse of :meth:`_shape` when it is cheap, else None."""
        return None

    def _update(self, Y: np.ndarray, Z: np.ndarray) -> None:
        """Adapt the distribution from the ``mu`` best steps, best first."""
        raise NotImplementedError

    def _after_load(self) -> None:
        """Recompute caches derived from serialized state."""

    def _degenerate(self) -> bool:
        """Strategy-specific ill-conditioning test."""
        return False

    # -- sampling ------------------------------------------------------------
    def sample_steps(self, n: int) -> np.ndarray:
        """``n`` displacement vectors ``sigma * y`` from the current distribution."""
        return self.sigma * self._shape(self.rng.standard_normal((n, self.dim)))

    def _out_of_bounds(self, X: np.ndarray) -> np.ndarray:
        return np.any((X < self.lower) | (X > self.upper), axis=1)

    def repair(self, X: np.ndarray) -> np.ndarray:
        X = np.where(X < self.lower, 2.0 * self.lower - X, X)
        X = np.where(X > self.upper, 2.0 * self.upper - X, X)
        return np.clip(X, self.lower, self.upper)

    def ask(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        Z = self.rng.standard_normal((self.lam, self.dim))
        Y = self._shape(Z)
        X = self.mean + self.sigma * Y
        bad = self._out_of_bounds(X)
        if bad.any():
            Z[bad] = self.rng.standard_normal((int(bad.sum()), self.dim))
            Y[bad] = self._shape(Z[bad])
            X[bad] = self.mean + self.sigma * Y[bad]
            X = self.repair(X)
        return X, Z, Y

    def tell(self, X: np.ndarray, Z: np.ndarray, costs: np.ndarray) -> None:
        costs = np.where(np.isfinite(costs), costs, np.inf)
        order = np.argsort(costs, kind="stable")
        Y = (X - self.mean) / self.sigma
        Zw = self._whiten(Y)
        if Zw is not None:
            Z = Zw
        sel = order[: self.mu]
        self._update(Y[sel], Z[sel])
        self.generation += 1
        self._guard()
        i = int(order[0])
        if costs[i] < self.best_cost:
            self.best_cost = float(costs[i])
            self.best_x = X[i].copy()
        self.population = X
        self.population_costs = costs

    def _guard(self) -> None:
        span = self.upper - self.lower
        # a single sum is non-finite whenever any entry is (or on overflow, also worth a reset)
        with np.errstate(over="ignore", invalid="ignore"):
            total = sum(float(np.sum(getattr(self, n))) for n in self.state_arrays + ("mean",))
        if not math.isfinite(total) or self._degenerate():
            # no restarts: only the adapted shape is discarded
            if not np.all(np.isfinite(self.mean)):
                self.mean = np.clip(np.nan_to_num(self.mean), self.lower, self.upper)
            self._cold_state()
        if not math.isfinite(self.sigma) or self.sigma <= 0.0:
            self.sigma = 1e-300
        self.sigma = min(max(self.sigma, 1e-300), 1e3 * span)

    # -- budgeted step -------------------------------------------------------
    def step(self, objective: Objective, fe_budget: int) -> StepReport:
        if fe_budget < self.lam:
            raise ValueError(f"budget {fe_budget} is below one generation ({self.lam} evaluations)")
        used = gens = 0
        step_best_cost, step_best_x = math.inf, self.best_x.copy()
        while used + self.lam <= fe_budget:
            X, Z, _ = self.ask()
            costs = np.asarray(objective(X), dtype=float)
            used += self.lam
            gens += 1
            self.tell(X, Z, costs)
            i = int(np.argmin(self.population_costs))
            if self.population_costs[i] < step_best_cost:
                step_best_cost = float(self.population_costs[i])
                step_best_x = X[i].copy()
        return StepReport(
            self.best_x.copy(), self.best_cost, used, self.population.copy(),
            self.population_costs.copy(), step_best_x, step_best_cost, gens,
        )

    # -- warm-start overlay --------------------------------------------------
    def overlay(self, mean: np.ndarray, sigma: float, best_x=None, best_cost=None) -> None:
        self.mean = np.clip(np.asarray(mean, dtype=float).copy(), self.lower, self.upper)
        self.sigma = float(sigma)
        if best_x is not None and best_cost is not None and best_cost < self.best_cost:
            self.best_x = np.asarray(best_x, dtype=float).copy()
            self.best_cost = float(best_cost)

    # -- serialization -------------------------------------------------------
    def _array_names(self):
        return self._base_arrays + self.state_arrays

    def to_bytes(self) -> bytes:
        arrays = [np.ascontiguousarray(getattr(self, n), dtype="<f8") for n in self._array_names()]
        scalars = {n: getattr(self, n) for n in self._base_scalars + self.state_scalars}
        header = {
            "version": CONTEXT_VERSION,
            "optimizer": self.name,
            "dim": self.dim,
            "bounds": [self.lower, self.upper],
            "scalars": scalars,
            "arrays": [[n, list(a.shape)] for n, a in zip(self._array_names(), arrays)],
            "rng": self.rng.bit_generator.state,
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return CONTEXT_MAGIC + struct.pack("<I", len(head)) + head + b"".join(a.tobytes() for a in arrays)

    @staticmethod
    def read_header(blob: bytes) -> Tuple[dict, int]:
        if blob[:4] != CONTEXT_MAGIC:
            raise ContextFormatError("not an optimizer context blob")
        (n,) = struct.unpack("<I", blob[4:8])
        header = json.loads(blob[8 : 8 + n])
        if header.get("version", 0) > CONTEXT_VERSION:
            raise ContextFormatError(f"context version {header['version']} is newer than supported")
        return header, 8 + n

    @classmethod
    def from_bytes(cls, blob: bytes) -> "EvolutionStrategy":
        header, offset = cls.read_header(blob)
        if header["optimizer"] != cls.name:
            raise ContextFormatError(f"blob holds {header['optimizer']}, not {cls.name}")
        obj = cls.__new__(cls)
        obj.dim = int(header["dim"])
        obj.lower, obj.upper = (float(b) for b in header["bounds"])
        obj.lam = population_size(obj.dim)
        obj.mu, obj.weights, obj.mueff = recombination_weights(obj.lam)
        obj.chi_n = expected_norm(obj.dim)
        obj._set_constants()
        for name, value in header["scalars"].items():
            setattr(obj, name, value)
        for name, shape in header["arrays"]:
            count = int(np.prod(shape))
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            setattr(obj, name, data.reshape(shape).astype(np.float64))
            offset += 8 * count
        obj.rng = np.random.Generator(np.random.PCG64())
        obj.rng.bit_generator.state = header["rng"]
        obj._after_load()
        return obj

    def clone(self) -> "EvolutionStrategy":
        return type(self).from_bytes(self.to_bytes())

    def state_size(self) -> int:
        """Number of float64 values held by the adaptive state."""
        return int(sum(np.size(getattr(self, n)) for n in self.state_arrays))
