"""One optimization run: cooperative coevolution over the decomposition, one
optimizer choice per subproblem visit."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..agent import Params, sample_action
from ..bench import COST_CEILING, ProblemInstance
from ..decomp import DecompositionResult
from ..features import RunTelemetry, build_state, dimension_feature, probe_population
from ..optim import ContextMemory, OptimizerPool, checkpoint, create_or_restore, population_size
from .reward import COST_FLOOR, compute_reward


class EpisodeConfigError(ValueError):
    pass


@dataclass
class EpisodeConfig:
    max_fes: int = 100_000
    step_fes: int = 2500
    target_cost: float = 1e-20
    gamma: float = 0.99
    init_pop_size: int = 100
    probe_samples: int = 3

    def validate(self):
        if self.step_fes > self.max_fes:
            raise EpisodeConfigError("step_fes exceeds max_fes")
        if not 0.0 < self.gamma <= 1.0:
            raise EpisodeConfigError("gamma must lie in (0, 1]")
        if self.init_pop_size < 1 or self.init_pop_size >= self.max_fes:
            raise EpisodeConfigError("init_pop_size must be positive and below max_fes")


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    log_prob: float
    value: float
    done: bool


class _LocalObjective:
    """Cost of full points that differ from ``x*`` only on ``Omega_k``.

    Only the additive terms touching ``Omega_k`` are recomputed; the rest is a
    constant. Every row is charged as one function evaluation. The best row
    seen is remembered for write-back when ``track`` is set.
    """

    def __init__(self, env: "CCEnvironment", k: int, track: bool):
        self.env = env
        self.group = env.groups[k]
        self.terms = env.touching[k]
        self.track = track
        self.best_local = math.inf
        self.best_x = None
        self.best_terms = None
        self.fes = 0

    def __call__(self, Xs: np.ndarray) -> np.ndarray:
        env = self.env
        X = np.tile(env.x_star, (len(Xs), 1))
        X[:, self.group] = Xs
        T = env.instance.subproblem_costs(X, self.terms)
        env.instance.charge(len(Xs))
        self.fes += len(Xs)
        local = np.minimum(T.sum(axis=1), COST_CEILING)
        if self.track:
            i = int(np.argmin(local))
            if local[i] < self.best_local:
                self.best_local = float(local[i])
                self.best_x = Xs[i].copy()
                self.best_terms = T[i].copy()
        return local


class CCEnvironment:
    """Owns the instance view, context memory, telemetry and random stream of one run."""

    def __init__(
        self,
        instance: ProblemInstance,
        decomposition: DecompositionResult,
        pool: OptimizerPool,
        config: EpisodeConfig,
        seed: int = 0,
    ):
        config.validate()
        if decomposition.n_groups == 0:
            raise EpisodeConfigError("empty decomposition")
        if decomposition.dim != instance.dim:
            raise EpisodeConfigError("decomposition does not cover the instance")
        self.instance = instance
        self.decomposition = decomposition
        self.pool = pool
        self.config = config
        self.seed = seed
        self.groups = decomposition.groups
        self.low_tier = pool.low_tier_mask()
        inst_groups = [set(g.tolist()) for g in instance.groups]
        self.touching = [
            [j for j, ig in enumerate(inst_groups) if ig.intersection(g.tolist())] for g in self.groups
        ]
        self.bounds = (instance.lower, instance.upper)

    # -- lifecycle -------------------------------------------------------------
    def reset(self) -> np.ndarray:
        cfg = self.config
        self.rng = np.random.default_rng(self.seed)
        self.memory = ContextMemory(self.pool, seed=self.seed)
        self.fe_start = self.instance.fe_counter
        X0 = self.instance.sample_uniform(cfg.init_pop_size, self.rng)
        c = self.instance.evaluate_batch(X0)
        self.init_fes = cfg.init_pop_size
        self.step_fes_total = 0
        self.probe_fes_total = 0
        i = int(np.argmin(c))
        self.x_star = X0[i].copy()
        self.term_cache = self.instance.subproblem_costs(self.x_star[None, :])[0]
        self.c_star = float(c[i])
        self.telemetry = RunTelemetry(cfg.max_fes, self.pool.size)
        self.telemetry.start(self.c_star)
        self.telemetry.fes_used = self.fes_used
        self.k = 0
        self.t = 0
        self.snapshots = {}
        self.history = [(self.fes_used, self.c_star)]
        self.done = self._finished()
        return self.observe()

    @property
    def fes_used(self) -> int:
        return self.instance.fe_counter - self.fe_start

    @property
    def remaining(self) -> int:
        return self.config.max_fes - self.fes_used

    def _finished(self) -> bool:
        return (
            self.c_star < self.config.target_cost
            or self.remaining < population_size(len(self.groups[self.k]))
        )

    def allowed_actions(self, k: Optional[int] = None) -> np.ndarray:
        k = self.k if k is None else k
        if dimension_feature(len(self.groups[k])) > 0.5:
            return np.flatnonzero(~self.low_tier)
        return np.arange(self.pool.size)

    def observe(self) -> np.ndarray:
        snap = self.snapshots.get(self.k)
        pos, costs, probe = snap if snap is not None else (None, None, None)
        return build_state(self.k, self.decomposition, pos, costs, probe, self.telemetry)

    def ledger(self) -> dict:
        return {
            "init": self.init_fes,
            "step": self.step_fes_total,
            "probe": self.probe_fes_total,
            "counter": self.fes_used,
        }

    # -- one decision ------------------------------------------------------------
    def step(self, action: int):
        if self.done:
            raise RuntimeError("episode already finished")
        k = self.k
        if action not in self.allowed_actions(k):
            raise EpisodeConfigError(f"action {action} is masked for subproblem {k}")
        group = self.groups[k]
        before_terms = self.term_cache[self.touching[k]]
        sub_before = float(before_terms.sum())
        c_prev = self.c_star

        opt = create_or_restore(self.memory, k, action, len(group), self.bounds)
        objective = _LocalObjective(self, k, track=True)
        report = opt.step(objective, min(self.config.step_fes, self.remaining))
        checkpoint(opt, self.memory, report.fes_used)
        self.step_fes_total += objective.fes

        if objective.best_local < sub_before:
            self.x_star[group] = objective.best_x
            self.term_cache[self.touching[k]] = objective.best_terms
            self.c_star = min(float(np.minimum(self.term_cache.sum(), COST_CEILING)), self.c_star)
        sub_after = float(self.term_cache[self.touching[k]].sum())

        probe = None
        if self.config.probe_samples > 0:
            probe_obj = _LocalObjective(self, k, track=False)
            probe, _ = probe_population(
                self.memory, k, report.population, probe_obj, self.config.probe_samples,
                self.remaining, self.bounds, self.rng, self.allowed_actions(k),
            )
            self.probe_fes_total += probe_obj.fes
        self.snapshots[k] = (report.population, report.population_costs, probe)

        self.telemetry.fes_used = self.fes_used
        self.telemetry.record_step(k, action, report.fes_used, self.c_star, sub_before, sub_after)
        reward = compute_reward(c_prev, self.c_star, self.telemetry.c0_star)
        self.history.append((self.fes_used, self.c_star))
        self.t += 1
        self.k = (k + 1) % len(self.groups)
        self.done = self._finished()
        return self.observe(), reward, self.done


# -- policies -----------------------------------------------------------------

Policy = Callable[[np.ndarray, CCEnvironment, np.random.Generator], tuple]


def learned_policy(params: Params, greedy: bool = False) -> Policy:
    def act(state, env, rng):
        return sample_action(params, state, env.low_tier, rng, greedy=greedy)

    return act


def random_policy() -> Policy:
    def act(state, env, rng):
        allowed = env.allowed_actions()
        a = int(allowed[rng.integers(len(allowed))])
        return a, -math.log(len(allowed)), 0.0

    return act


def fixed_policy(l: int, pool: OptimizerPool) -> Policy:
    if not 0 <= l < pool.size:
        raise EpisodeConfigError(f"fixed optimizer {l + 1} is outside the pool of {pool.size}")

    def act(state, env, rng):
        allowed = env.allowed_actions()
        return (l if l in allowed else int(allowed[0])), 0.0, 0.0

    return act


@dataclass
class EpisodeResult:
    best_x: np.ndarray
    best_cost: float
    fes: int
    runtime: float
    trajectory: List[Transition] = field(default_factory=list)
    trace: List[dict] = field(default_factory=list)
    history: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)


def run_episode(env: CCEnvironment, policy: Policy, rng: np.random.Generator, collect: bool = False) -> EpisodeResult:
    start = time.perf_counter()
    state = env.reset()
    trajectory, trace = [], []
    while not env.done:
        a, log_prob, value = policy(state, env, rng)
        k, fes_before = env.k, env.fes_used
        next_state, reward, done = env.step(a)
        if collect:
            trajectory.append(Transition(state, a, reward, next_state, log_prob, value, done))
        trace.append({
            "t": env.t - 1, "k": k, "action": a + 1, "reward": reward,
            "fes": env.fes_used, "step_fes": env.fes_used - fes_before, "cost": env.c_star,
            "features": state.tolist(),
        })
        state = next_state
    return EpisodeResult(
        env.x_star.copy(), env.c_star, env.fes_used, time.perf_counter() - start,
        trajectory, trace, list(env.history), env.ledger(),
    )
