"""PPO training of the meta-agent over a set of problems."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..agent import Adam, Params, PPOHyper, forward_batch, ppo_loss_and_grads, sample_action
from ..bench import ProblemInstance
from ..decomp import DecompositionResult
from ..optim import OptimizerPool
from .episode import CCEnvironment, EpisodeConfig

log = logging.getLogger(__name__)

Problem = Tuple[ProblemInstance, DecompositionResult]


@dataclass
class TrainConfig:
    n_step: int = 10
    k_epoch: int = 12
    learning_rate: float = 1e-5
    lr_decay: float = 0.95
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    gae_lambda: float = 0.95
    grad_norm_clip: float = 0.5
    num_envs: int = 4
    epochs: int = 30
    divergence_threshold: float = 1e6

    def validate(self):
        positive = ("n_step", "k_epoch", "learning_rate", "lr_decay", "value_coef",
                    "grad_norm_clip", "num_envs", "epochs")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be non-negative")


def effective_epochs(k_epoch: int, remaining_fraction: float) -> int:
    return max(1, int(round(k_epoch * remaining_fraction)))


def segment_targets(rewards, values, dones, bootstrap: float, gamma: float, lam: float):
    """n-step returns by backward summation and GAE advantages for one rollout segment."""
    n = len(rewards)
    returns = np.zeros(n)
    adv = np.zeros(n)
    R = bootstrap
    gae = 0.0
    next_value = bootstrap
    for t in reversed(range(n)):
        live = 0.0 if dones[t] else 1.0
        R = rewards[t] + gamma * R * live
        returns[t] = R
        delta = rewards[t] + gamma * next_value * live - values[t]
        gae = delta + gamma * lam * live * gae
        adv[t] = gae
        next_value = values[t]
    return returns, adv


def ppo_update(params: Params, optimizer: Adam, batch: dict, low_tier, cfg: TrainConfig, epochs: int,
               events: list) -> dict:
    hyper = PPOHyper(cfg.clip, cfg.value_coef, cfg.entropy_coef)
    stats = {}
    for _ in range(epochs):
        stats, grads = ppo_loss_and_grads(params, batch, low_tier, hyper)
        if stats["value_loss"] > cfg.divergence_threshold:
            optimizer.lr *= 0.5
            msg = f"value loss {stats['value_loss']:.3g} above threshold; learning rate halved to {optimizer.lr:.3g}"
            log.warning(msg)
            events.append(msg)
        stats["grad_norm"] = optimizer.step(params, grads)
    return stats


def train(
    problems: Sequence[Problem],
    pool: OptimizerPool,
    episode_config: EpisodeConfig,
    config: TrainConfig,
    params: Params,
    rng: np.random.Generator,
    callback=None,
) -> Tuple[Params, List[dict]]:
    """Each iteration runs ``num_envs`` episodes side by side, updating every ``n_step`` decisions."""
    config.validate()
    if not problems:
        raise ValueError("empty training set")
    gamma = episode_config.gamma
    optimizer = Adam(params, lr=config.learning_rate, max_grad_norm=config.grad_norm_clip)
    low_tier = pool.low_tier_mask()
    history, events = [], []
    for it in range(config.epochs):
        envs = []
        for _ in range(config.num_envs):
            inst, decomp = problems[int(rng.integers(len(problems)))]
            env = CCEnvironment(inst.copy(), decomp, pool, episode_config, seed=int(rng.integers(2**31)))
            env.state = env.reset()
            envs.append(env)
        rewards_seen, updates, stats = [], 0, {}
        while any(not e.done for e in envs):
            parts = []
            active = [e for e in envs if not e.done]
            for env in active:
                seg = {"states": [], "actions": [], "log_probs": [], "values": [], "rewards": [], "dones": []}
                for _ in range(config.n_step):
                    if env.done:
                        break
                    a, lp, v = sample_action(params, env.state, low_tier, rng)
                    nxt, r, done = env.step(a)
                    for key, val in zip(("states", "actions", "log_probs", "values", "rewards", "dones"),
                                        (env.state, a, lp, v, r, done)):
                        seg[key].append(val)
                    env.state = nxt
                if not seg["rewards"]:
                    continue
                boot = 0.0 if env.done else float(forward_batch(params, env.state, low_tier).values[0])
                ret, adv = segment_targets(seg["rewards"], seg["values"], seg["dones"], boot, gamma,
                                           config.gae_lambda)
                seg["returns"], seg["advantages"] = ret, adv
                parts.append(seg)
                rewards_seen.extend(seg["rewards"])
            if not parts:
                break
            batch = {
                "states": np.vstack([np.vstack(p["states"]) for p in parts]),
                "actions": np.concatenate([p["actions"] for p in parts]),
                "old_log_probs": np.concatenate([p["log_probs"] for p in parts]),
                "old_values": np.concatenate([p["values"] for p in parts]),
                "returns": np.concatenate([p["returns"] for p in parts]),
                "advantages": np.concatenate([p["advantages"] for p in parts]),
            }
            adv = batch["advantages"]
            if len(adv) > 1 and adv.std() > 0:
                batch["advantages"] = (adv - adv.mean()) / (adv.std() + 1e-8)
            remaining = np.mean([max(e.remaining, 0) / e.config.max_fes for e in active])
            stats = ppo_update(params, optimizer, batch, low_tier, config,
                               effective_epochs(config.k_epoch, remaining), events)
            updates += 1
        record = {
            "iteration": it,
            "updates": updates,
            "mean_reward": float(np.mean(rewards_seen)) if rewards_seen else 0.0,
            "final_costs": [float(e.c_star) for e in envs],
            "learning_rate": optimizer.lr,
            **{k: float(v) for k, v in stats.items()},
        }
        history.append(record)
        log.info("iteration %d: mean reward %.4f, entropy %.4f", it, record["mean_reward"],
                 record.get("entropy", float("nan")))
        if callback is not None:
            callback(record, params)
        optimizer.lr *= config.lr_decay
    if events:
        history.append({"events": events})
    return params, history
