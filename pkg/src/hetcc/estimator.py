"""scikit-learn flavoured front end: ``fit`` trains the selection policy on a set
of problem instances, ``predict``/``predict_proba`` query it on state vectors,
and ``minimize`` runs one cooperative-coevolution episode."""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .agent import forward_batch, init_params, load_params, save_params
from .bench import ProblemInstance
from .decomp import DecompositionResult, differential_grouping_decompose, ground_truth_decompose
from .features import state_size
from .optim import DEFAULT_POOL, OptimizerPool
from .runner import CCEnvironment, EpisodeConfig, EpisodeResult, TrainConfig, make_policy, run_episode, train

ProblemLike = Union[ProblemInstance, Tuple[ProblemInstance, DecompositionResult]]


def decompose(instance: ProblemInstance, method: str = "ground-truth") -> DecompositionResult:
    if method == "ground-truth":
        return ground_truth_decompose(instance)
    if method == "dg":
        return differential_grouping_decompose(instance)
    raise ValueError(f"unknown decomposition method {method!r}")


class HeterogeneousCC(BaseEstimator):
    """Learned optimizer selection for cooperative coevolution.

    Parameters mirror :class:`EpisodeConfig` and :class:`TrainConfig`; ``pool``
    is a comma-separated list of optimizer names, high tier first.
    """

    def __init__(
        self,
        pool: str = ",".join(DEFAULT_POOL),
        max_fes: int = 100_000,
        step_fes: int = 2500,
        init_pop_size: int = 100,
        probe_samples: int = 3,
        gamma: float = 0.99,
        n_step: int = 10,
        k_epoch: int = 12,
        learning_rate: float = 1e-5,
        lr_decay: float = 0.95,
        clip: float = 0.2,
        value_coef: float = 0.5,
        entropy_coef: float = 0.01,
        gae_lambda: float = 0.95,
        grad_norm_clip: float = 0.5,
        num_envs: int = 4,
        epochs: int = 30,
        decomposition: str = "ground-truth",
        random_state=None,
    ):
        self.pool = pool
        self.max_fes = max_fes
        self.step_fes = step_fes
        self.init_pop_size = init_pop_size
        self.probe_samples = probe_samples
        self.gamma = gamma
        self.n_step = n_step
        self.k_epoch = k_epoch
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.clip = clip
        self.value_coef = value_coef
        self.entropy_coef = entropy_coef
        self.gae_lambda = gae_lambda
        self.grad_norm_clip = grad_norm_clip
        self.num_envs = num_envs
        self.epochs = epochs
        self.decomposition = decomposition
        self.random_state = random_state

    # -- config plumbing -----------------------------------------------------
    def episode_config(self, max_fes: Optional[int] = None) -> EpisodeConfig:
        cfg = EpisodeConfig(
            max_fes=int(self.max_fes if max_fes is None else max_fes), step_fes=int(self.step_fes),
            gamma=float(self.gamma), init_pop_size=int(self.init_pop_size), probe_samples=int(self.probe_samples),
        )
        cfg.validate()
        return cfg

    def train_config(self) -> TrainConfig:
        cfg = TrainConfig(
            n_step=self.n_step, k_epoch=self.k_epoch, learning_rate=self.learning_rate,
            lr_decay=self.lr_decay, clip=self.clip, value_coef=self.value_coef,
            entropy_coef=self.entropy_coef, gae_lambda=self.gae_lambda,
            grad_norm_clip=self.grad_norm_clip, num_envs=self.num_envs, epochs=self.epochs,
        )
        cfg.validate()
        return cfg

    def _problems(self, X: Iterable[ProblemLike]) -> List[Tuple[ProblemInstance, DecompositionResult]]:
        out = []
        for item in X:
            if isinstance(item, ProblemInstance):
                out.append((item, decompose(item, self.decomposition)))
            else:
                inst, dec = item
                out.append((inst, dec))
        if not out:
            raise ValueError("no problem instances given")
        return out

    def _seed_rng(self) -> np.random.Generator:
        rs = check_random_state(self.random_state)
        return np.random.default_rng(rs.randint(0, 2**31 - 1))

    # -- estimator API -------------------------------------------------------
    def fit(self, X: Sequence[ProblemLike], y=None, params=None, callback=None):
        """Train the policy on instances (or ``(instance, decomposition)`` pairs)."""
        pool = OptimizerPool.parse(self.pool)
        problems = self._problems(X)
        rng = self._seed_rng()
        start = params if params is not None else init_params(pool.size, rng)
        self.params_, self.history_ = train(
            problems, pool, self.episode_config(), self.train_config(),
            {k: v.copy() for k, v in start.items()}, rng, callback,
        )
        self.pool_ = pool
        self.n_features_in_ = state_size(pool.size)
        return self

    def load(self, path):
        """Adopt a saved checkpoint instead of training."""
        pool = OptimizerPool.parse(self.pool)
        self.params_ = load_params(path, pool.size)
        self.pool_ = pool
        self.history_ = []
        self.n_features_in_ = state_size(pool.size)
        return self

    def save(self, path):
        check_is_fitted(self, "params_")
        return save_params(self.params_, path)

    def predict_proba(self, states) -> np.ndarray:
        check_is_fitted(self, "params_")
        S = check_array(states, ensure_2d=True, dtype=np.float64)
        if S.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} state features, got {S.shape[1]}")
        return forward_batch(self.params_, S, self.pool_.low_tier_mask()).probs

    def predict(self, states) -> np.ndarray:
        """Greedy optimizer choice (0-based pool index) per state row."""
        return np.argmax(self.predict_proba(states), axis=1)

    def minimize(self, problem: ProblemLike, seed: int = 0, mode: str = "learned",
                 max_fes: Optional[int] = None) -> EpisodeResult:
        """One episode on ``problem`` with the given selection mode."""
        inst, dec = self._problems([problem])[0]
        pool = OptimizerPool.parse(self.pool)
        params = getattr(self, "params_", None)
        policy = make_policy(mode, pool, params)
        env = CCEnvironment(inst.copy(), dec, pool, self.episode_config(max_fes), seed=seed)
        return run_episode(env, policy, np.random.default_rng([seed, 7]))

    def score(self, X: Sequence[ProblemLike], y=None, seeds: Sequence[int] = (0,)) -> float:
        """Negative mean log10 final cost of the learned policy (higher is better)."""
        check_is_fitted(self, "params_")
        vals = [
            np.log10(max(self.minimize(p, seed=s).best_cost, 1e-20))
            for p in self._problems(X) for s in seeds
        ]
        return -float(np.mean(vals))
