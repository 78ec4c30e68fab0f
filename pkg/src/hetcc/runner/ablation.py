"""Head-to-head runs of the learned policy against random and fixed selection."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..agent import Params
from ..bench import ProblemInstance
from ..decomp import DecompositionResult
from ..optim import OptimizerPool
from .episode import (
    CCEnvironment, EpisodeConfig, EpisodeConfigError, EpisodeResult, fixed_policy,
    learned_policy, random_policy, run_episode,
)

WORKERS_ENV = "HETCC_WORKERS"


@dataclass
class NamedProblem:
    name: str
    instance: ProblemInstance
    decomposition: DecompositionResult


def parse_mode(mode: str, pool: OptimizerPool) -> str:
    """Normalize a mode string; ``fixed:<l>`` uses the 1-based pool index."""
    if mode in ("learned", "greedy", "random"):
        return mode
    if mode.startswith("fixed:"):
        try:
            l = int(mode.split(":", 1)[1])
        except ValueError:
            raise EpisodeConfigError(f"bad fixed mode {mode!r}") from None
        if not 1 <= l <= pool.size:
            raise EpisodeConfigError(f"fixed optimizer {l} is outside the pool of {pool.size}")
        return f"fixed:{l}"
    raise EpisodeConfigError(f"unknown mode {mode!r}")


def make_policy(mode: str, pool: OptimizerPool, params: Optional[Params]):
    mode = parse_mode(mode, pool)
    if mode in ("learned", "greedy"):
        if params is None:
            raise EpisodeConfigError(f"mode {mode} needs trained parameters")
        return learned_policy(params, greedy=mode == "greedy")
    if mode == "random":
        return random_policy()
    return fixed_policy(int(mode.split(":")[1]) - 1, pool)


def run_one(problem: NamedProblem, pool: OptimizerPool, config: EpisodeConfig, mode: str,
            params: Optional[Params], seed: int) -> Dict:
    """One episode; every mode sees the same initial sample for a given seed."""
    env = CCEnvironment(problem.instance.copy(), problem.decomposition, pool, config, seed=seed)
    policy = make_policy(mode, pool, params)
    res: EpisodeResult = run_episode(env, policy, np.random.default_rng([seed, 7]))
    led = res.ledger
    return {
        "instance": problem.name,
        "mode": parse_mode(mode, pool),
        "seed": seed,
        "best_cost": res.best_cost,
        "fes": res.fes,
        "runtime": res.runtime,
        "ledger_ok": led["init"] + led["step"] + led["probe"] == led["counter"],
        "ledger": led,
        "trace": res.trace,
        "history": res.history,
    }


def _run_job(args):
    return run_one(*args)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def ablate(
    problems: Sequence[NamedProblem],
    pool: OptimizerPool,
    config: EpisodeConfig,
    params: Optional[Params],
    modes: Sequence[str],
    seeds: Sequence[int],
    workers: Optional[int] = None,
) -> List[Dict]:
    """Run every (problem, mode, seed) combination and return one record per run."""
    if len(set(seeds)) != len(seeds):
        raise EpisodeConfigError("seeds must be distinct")
    modes = [parse_mode(m, pool) for m in modes]
    for m in modes:
        make_policy(m, pool, params)
    jobs = [(p, pool, config, m, params, s) for p in problems for m in modes for s in seeds]
    n = worker_count(workers)
    if n == 1:
        return [run_one(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_run_job, jobs))
