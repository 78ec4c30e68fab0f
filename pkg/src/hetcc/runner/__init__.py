"""Episodes, rewards, PPO training and ablation of the selection policy."""
from .ablation import NamedProblem, ablate, make_policy, parse_mode, run_one, worker_count
from .episode import (
    CCEnvironment, EpisodeConfig, EpisodeConfigError, EpisodeResult, Transition,
    fixed_policy, learned_policy, random_policy, run_episode,
)
from .ppo import TrainConfig, effective_epochs, ppo_update, segment_targets, train
from .report import (
    delta_sum_log10, read_results, significance_mark, summarize, write_convergence,
    write_results, write_summary, write_trace,
)
from .reward import compute_reward

__all__ = [
    "CCEnvironment", "EpisodeConfig", "EpisodeConfigError", "EpisodeResult", "NamedProblem",
    "TrainConfig", "Transition", "ablate", "compute_reward", "delta_sum_log10", "effective_epochs",
    "fixed_policy", "learned_policy", "make_policy", "parse_mode", "ppo_update", "random_policy",
    "read_results", "run_episode", "run_one", "segment_targets", "significance_mark", "summarize",
    "train", "worker_count", "write_convergence", "write_results", "write_summary", "write_trace",
]
