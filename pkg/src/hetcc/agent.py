"""Actor-critic meta-agent in plain numpy: masked categorical policy over the
optimizer pool, a value head, hand-written PPO gradients and Adam."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .features import state_size

EMBED, HIDDEN = 64, 16
MASK_VALUE = -1e9
MASK_THRESHOLD = 0.5
PARAM_ORDER = ("W_e", "b_e", "W1", "b1", "W2", "b2", "Wc1", "bc1", "Wc2", "bc2")
CHECKPOINT_MAGIC = b"HCAG"
CHECKPOINT_VERSION = 1

Params = Dict[str, np.ndarray]


class AgentContractError(ValueError):
    pass


class NonFiniteLossError(FloatingPointError):
    def __init__(self, index: int):
        super().__init__(f"non-finite loss at batch index {index}")
        self.index = index


def param_shapes(n_actions: int, n_in: Optional[int] = None) -> Dict[str, Tuple[int, ...]]:
    n_in = state_size(n_actions) if n_in is None else n_in
    return {
        "W_e": (EMBED, n_in), "b_e": (EMBED,),
        "W1": (HIDDEN, EMBED), "b1": (HIDDEN,),
        "W2": (n_actions, HIDDEN), "b2": (n_actions,),
        "Wc1": (HIDDEN, EMBED), "bc1": (HIDDEN,),
        "Wc2": (1, HIDDEN), "bc2": (1,),
    }


def _orthogonal(shape, gain, rng):
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


def init_params(n_actions: int, rng: np.random.Generator, n_in: Optional[int] = None) -> Params:
    shapes = param_shapes(n_actions, n_in)
    gains = {"W_e": 1.0, "W1": 1.0, "W2": 0.01, "Wc1": 1.0, "Wc2": 1.0}
    params = {}
    for name in PARAM_ORDER:
        shape = shapes[name]
        params[name] = _orthogonal(shape, gains[name], rng) if len(shape) == 2 else np.zeros(shape)
    return params


def n_actions_of(params: Params) -> int:
    return params["W2"].shape[0]


def action_mask(states: np.ndarray, low_tier: np.ndarray) -> np.ndarray:
    """Additive mask: ``MASK_VALUE`` on low-tier actions where the dimension feature exceeds 0.5."""
    states = np.atleast_2d(states)
    big = states[:, 0] > MASK_THRESHOLD
    return np.where(big[:, None] & low_tier[None, :], MASK_VALUE, 0.0)


@dataclass
class Forward:
    states: np.ndarray
    e: np.ndarray
    h: np.ndarray
    hc: np.ndarray
    logits: np.ndarray
    valid: np.ndarray
    probs: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray


def forward_batch(params: Params, states: np.ndarray, low_tier: np.ndarray) -> Forward:
    S = np.atleast_2d(np.asarray(states, dtype=float))
    if S.shape[1] != params["W_e"].shape[1]:
        raise AgentContractError(f"state has {S.shape[1]} entries, network expects {params['W_e'].shape[1]}")
    if len(low_tier) != n_actions_of(params):
        raise AgentContractError("pool size does not match the actor head")
    if not np.all(np.isfinite(S)):
        raise AgentContractError("state contains non-finite entries")
    e = np.tanh(S @ params["W_e"].T + params["b_e"])
    h = np.tanh(e @ params["W1"].T + params["b1"])
    z = h @ params["W2"].T + params["b2"]
    mask = action_mask(S, np.asarray(low_tier, dtype=bool))
    valid = mask == 0.0
    zt = z + mask
    zt = zt - zt.max(axis=1, keepdims=True)
    ex = np.where(valid, np.exp(zt), 0.0)
    total = ex.sum(axis=1, keepdims=True)
    probs = ex / total
    log_probs = np.where(valid, zt - np.log(total), -np.inf)
    hc = np.tanh(e @ params["Wc1"].T + params["bc1"])
    values = (hc @ params["Wc2"].T + params["bc2"])[:, 0]
    return Forward(S, e, h, hc, zt, valid, probs, log_probs, values)


def forward(params: Params, state: np.ndarray, low_tier: np.ndarray) -> dict:
    out = forward_batch(params, state, low_tier)
    return {"policy": out.probs[0], "value": float(out.values[0]), "embedding": out.e[0]}


def sample_action(params: Params, state, low_tier, rng: np.random.Generator, greedy: bool = False):
    out = forward_batch(params, state, low_tier)
    p = out.probs[0]
    if not out.valid[0].any():
        raise AgentContractError("every action is masked")
    if greedy:
        a = int(np.argmax(p))
    else:
        cdf = np.cumsum(p)
        a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        a = min(a, len(p) - 1)
        while p[a] == 0.0:  # cannot land on a masked action except at float edges
            a -= 1
    return a, float(out.log_probs[0, a]), float(out.values[0])


@dataclass
class PPOHyper:
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    value_clip: Optional[float] = None  # defaults to ``clip``


def ppo_loss_and_grads(params: Params, batch: dict, low_tier, hyper: PPOHyper = PPOHyper()):
    """Loss ``L_policy + a L_V - b H`` averaged over the batch, and its gradient.

    ``batch`` holds arrays ``states, actions, advantages, returns,
    old_log_probs, old_values``.
    """
    f = forward_batch(params, batch["states"], low_tier)
    n = f.states.shape[0]
    rows = np.arange(n)
    a = np.asarray(batch["actions"], dtype=int)
    adv = np.asarray(batch["advantages"], dtype=float)
    ret = np.asarray(batch["returns"], dtype=float)
    old_lp = np.asarray(batch["old_log_probs"], dtype=float)
    old_v = np.asarray(batch["old_values"], dtype=float)
    eps = hyper.clip
    veps = hyper.clip if hyper.value_clip is None else hyper.value_clip

    lp = f.log_probs[rows, a]
    ratio = np.exp(lp - old_lp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    pol = -np.minimum(unclipped, clipped)
    plogp = np.where(f.valid, f.probs * np.where(f.valid, f.log_probs, 0.0), 0.0)
    ent = -plogp.sum(axis=1)
    v_clip = old_v + np.clip(f.values - old_v, -veps, veps)
    l1, l2 = (f.values - ret) ** 2, (v_clip - ret) ** 2
    vloss = np.maximum(l1, l2)

    per_sample = pol + hyper.value_coef * vloss - hyper.entropy_coef * ent
    bad = np.flatnonzero(~np.isfinite(per_sample))
    if bad.size:
        raise NonFiniteLossError(int(bad[0]))

    # d/d logits
    g_lp = np.where(unclipped <= clipped, -adv * ratio, 0.0)
    onehot = np.zeros_like(f.probs)
    onehot[rows, a] = 1.0
    logp0 = np.where(f.valid, f.log_probs, 0.0)
    d_ent = -f.probs * (logp0 + ent[:, None])
    dz = (g_lp[:, None] * (onehot - f.probs) - hyper.entropy_coef * d_ent) / n
    dz = np.where(f.valid, dz, 0.0)

    # d/d value
    use_first = l1 >= l2
    inside = np.abs(f.values - old_v) < veps
    dv = np.where(use_first, 2.0 * (f.values - ret), 2.0 * (v_clip - ret) * inside)
    dv = hyper.value_coef * dv / n

    g = {}
    g["W2"] = dz.T @ f.h
    g["b2"] = dz.sum(axis=0)
    da1 = (dz @ params["W2"]) * (1.0 - f.h**2)
    g["W1"] = da1.T @ f.e
    g["b1"] = da1.sum(axis=0)
    g["Wc2"] = dv[None, :] @ f.hc
    g["bc2"] = np.array([dv.sum()])
    dc1 = (dv[:, None] * params["Wc2"]) * (1.0 - f.hc**2)
    g["Wc1"] = dc1.T @ f.e
    g["bc1"] = dc1.sum(axis=0)
    de = (da1 @ params["W1"] + dc1 @ params["Wc1"]) * (1.0 - f.e**2)
    g["W_e"] = de.T @ f.states
    g["b_e"] = de.sum(axis=0)

    stats = {
        "loss": float(per_sample.mean()),
        "policy_loss": float(pol.mean()),
        "value_loss": float(vloss.mean()),
        "entropy": float(ent.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
    }
    return stats, g


def global_norm(grads: Params) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


class Adam:
    def __init__(self, params: Params, lr: float = 1e-5, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: Optional[float] = 0.5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Params, grads: Params) -> float:
        norm = global_norm(grads)
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k in PARAM_ORDER:
            g = grads[k] * scale
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return norm


# -- checkpoints ---------------------------------------------------------------
# layout: magic "HCAG" | u32 version | u32 L | u32 state size | float64 LE payload
# with the tensors in PARAM_ORDER, each row-major.

def params_to_bytes(params: Params) -> bytes:
    n_actions = n_actions_of(params)
    n_in = params["W_e"].shape[1]
    head = CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, n_actions, n_in)
    return head + b"".join(np.ascontiguousarray(params[k], dtype="<f8").tobytes() for k in PARAM_ORDER)


def params_from_bytes(blob: bytes, n_actions: Optional[int] = None) -> Params:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise AgentContractError("not an agent checkpoint")
    version, L, n_in = struct.unpack("<III", blob[4:16])
    if version > CHECKPOINT_VERSION:
        raise AgentContractError(f"checkpoint version {version} is newer than supported")
    if n_actions is not None and L != n_actions:
        raise AgentContractError(f"checkpoint was trained for a pool of {L}, not {n_actions}")
    shapes = param_shapes(L, n_in)
    expected = 16 + 8 * sum(int(np.prod(s)) for s in shapes.values())
    if len(blob) != expected:
        raise AgentContractError(f"checkpoint payload is {len(blob)} bytes, expected {expected}")
    params, offset = {}, 16
    for k in PARAM_ORDER:
        count = int(np.prod(shapes[k]))
        params[k] = np.frombuffer(blob, "<f8", count, offset).reshape(shapes[k]).astype(np.float64)
        offset += 8 * count
    return params


def save_params(params: Params, path) -> Path:
    path = Path(path)
    path.write_bytes(params_to_bytes(params))
    return path


def load_params(path, n_actions: Optional[int] = None) -> Params:
    return params_from_bytes(Path(path).read_bytes(), n_actions)
