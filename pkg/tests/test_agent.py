import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetcc.agent import (
    PARAM_ORDER,
    Adam,
    AgentContractError,
    NonFiniteLossError,
    PPOHyper,
    forward,
    forward_batch,
    init_params,
    load_params,
    param_shapes,
    params_from_bytes,
    params_to_bytes,
    ppo_loss_and_grads,
    sample_action,
    save_params,
)
from hetcc.features import dimension_feature, state_size

L = 4
LOW = np.array([False, False, True, True])


def random_states(rng, n, dim_feature=None):
    S = rng.normal(size=(n, state_size(L)))
    S[:, 0] = rng.uniform(0.1, 1.5, n) if dim_feature is None else dim_feature
    return S


def random_batch(params, rng, n=8):
    S = random_states(rng, n)
    f = forward_batch(params, S, LOW)
    actions = np.array([rng.choice(np.flatnonzero(f.valid[i])) for i in range(n)])
    lp = f.log_probs[np.arange(n), actions]
    return {
        "states": S,
        "actions": actions,
        "advantages": rng.normal(size=n),
        "returns": f.values + rng.normal(scale=0.5, size=n),
        "old_log_probs": lp + rng.normal(scale=0.3, size=n),
        "old_values": f.values + rng.normal(scale=0.3, size=n),
    }


def numeric_grad(params, batch, hyper, name, h=1e-5):
    g = np.zeros_like(params[name])
    flat = params[name].reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = ppo_loss_and_grads(params, batch, LOW, hyper)[0]["loss"]
        flat[i] = old - h
        down = ppo_loss_and_grads(params, batch, LOW, hyper)[0]["loss"]
        flat[i] = old
        g.reshape(-1)[i] = (up - down) / (2 * h)
    return g


def test_shapes_and_init():
    params = init_params(L, np.random.default_rng(0))
    for k, shape in param_shapes(L).items():
        assert params[k].shape == shape
    assert params["W_e"].shape == (64, 20)
    W = params["W1"]
    np.testing.assert_allclose(W @ W.T, np.eye(16), atol=1e-12)
    assert np.abs(params["W2"]).max() <= 0.01 + 1e-15
    assert not params["b_e"].any()


def test_policy_sums_to_one_and_embedding_bounded():
    rng = np.random.default_rng(1)
    params = init_params(L, rng)
    f = forward_batch(params, random_states(rng, 200), LOW)
    assert np.all(np.abs(f.probs.sum(axis=1) - 1.0) < 1e-12)
    assert np.all(np.abs(f.e) < 1.0)


def test_zero_actor_head_gives_uniform_policy():
    params = init_params(L, np.random.default_rng(2))
    params["W2"][:] = 0.0
    out = forward(params, random_states(np.random.default_rng(0), 1, 0.3)[0], LOW)
    assert np.array_equal(out["policy"], np.full(L, 0.25))


def test_large_subproblem_masks_low_tier_exactly():
    params = init_params(L, np.random.default_rng(3))
    params["b2"][:] = [0.0, 0.0, 50.0, 50.0]
    out = forward(params, random_states(np.random.default_rng(0), 1, dimension_feature(500))[0], LOW)
    assert out["policy"][2] == 0.0 and out["policy"][3] == 0.0
    assert out["policy"].sum() == pytest.approx(1.0, abs=1e-12)


def test_mask_boundary_between_88_and_89():
    assert dimension_feature(88) == pytest.approx(0.49912, abs=5e-6)
    assert dimension_feature(89) == pytest.approx(0.50138, abs=5e-6)
    assert 500 * 0.5**2.5 == pytest.approx(88.388, abs=1e-3)
    params = init_params(L, np.random.default_rng(4))
    s = random_states(np.random.default_rng(1), 1)[0]
    s[0] = dimension_feature(88)
    assert forward(params, s, LOW)["policy"][2:].min() > 0.0
    s[0] = dimension_feature(89)
    assert not forward(params, s, LOW)["policy"][2:].any()


@given(st.floats(-50, 50), st.integers(0, 100))
@settings(max_examples=50, deadline=None)
def test_softmax_shift_invariance(c, seed):
    params = init_params(L, np.random.default_rng(seed))
    s = random_states(np.random.default_rng(seed), 1)[0]
    p = forward(params, s, LOW)["policy"]
    params["b2"] += c
    q = forward(params, s, LOW)["policy"]
    np.testing.assert_allclose(p, q, atol=1e-12)


def test_sampling_reproducible_greedy_and_frequencies():
    params = init_params(L, np.random.default_rng(5))
    params["b2"][:] = [0.3, -0.2, 0.8, 0.0]
    s = random_states(np.random.default_rng(0), 1, 0.2)[0]
    p = forward(params, s, LOW)["policy"]
    a1 = [sample_action(params, s, LOW, np.random.default_rng(7))[0] for _ in range(3)]
    assert len(set(a1)) == 1
    assert sample_action(params, s, LOW, None, greedy=True)[0] == int(np.argmax(p))
    rng = np.random.default_rng(11)
    n = 100_000
    counts = np.bincount([sample_action(params, s, LOW, rng)[0] for _ in range(n)], minlength=L)
    bound = 3 * np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= bound)
    a, lp, _ = sample_action(params, s, LOW, np.random.default_rng(1))
    assert lp == pytest.approx(math.log(p[a]), abs=1e-12)


def test_greedy_ties_break_to_lowest_index():
    params = init_params(L, np.random.default_rng(0))
    params["W2"][:] = 0.0
    s = random_states(np.random.default_rng(0), 1, 0.2)[0]
    assert sample_action(params, s, LOW, None, greedy=True)[0] == 0


def test_contract_errors():
    params = init_params(L, np.random.default_rng(0))
    with pytest.raises(AgentContractError):
        forward(params, np.zeros(5), LOW)
    with pytest.raises(AgentContractError):
        forward(params, np.zeros(20), LOW[:3])


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = init_params(L, rng)
    params["W2"] = rng.normal(scale=0.5, size=params["W2"].shape)
    batch = random_batch(params, rng)
    hyper = PPOHyper()
    _, g = ppo_loss_and_grads(params, batch, LOW, hyper)
    for name in PARAM_ORDER:
        num = numeric_grad(params, batch, hyper, name)
        np.testing.assert_allclose(g[name], num, rtol=1e-4, atol=1e-8, err_msg=name)


def test_zero_advantage_same_policy_gives_zero_policy_gradient():
    rng = np.random.default_rng(0)
    params = init_params(L, rng)
    batch = random_batch(params, rng)
    f = forward_batch(params, batch["states"], LOW)
    batch["old_log_probs"] = f.log_probs[np.arange(8), batch["actions"]]
    batch["advantages"] = np.zeros(8)
    hyper = PPOHyper(value_coef=0.0, entropy_coef=0.0)
    stats, g = ppo_loss_and_grads(params, batch, LOW, hyper)
    assert all(not g[k].any() for k in PARAM_ORDER)
    assert stats["policy_loss"] == 0.0


def test_saturated_clip_blocks_ratio_gradient():
    rng = np.random.default_rng(1)
    params = init_params(L, rng)
    batch = random_batch(params, rng, n=1)
    f = forward_batch(params, batch["states"], LOW)
    lp = f.log_probs[0, batch["actions"][0]]
    batch["old_log_probs"] = np.array([lp - math.log(1.4)])  # ratio 1 + 2 eps
    batch["advantages"] = np.array([1.0])
    _, g = ppo_loss_and_grads(params, batch, LOW, PPOHyper(value_coef=0.0, entropy_coef=0.0))
    assert not g["W2"].any() and not g["W_e"].any()


def test_non_finite_loss_reports_index():
    rng = np.random.default_rng(2)
    params = init_params(L, rng)
    batch = random_batch(params, rng)
    batch["returns"][5] = np.inf
    with pytest.raises(NonFiniteLossError) as err:
        ppo_loss_and_grads(params, batch, LOW)
    assert err.value.index == 5


def test_masked_actions_do_not_enter_entropy():
    params = init_params(L, np.random.default_rng(3))
    params["W2"][:] = 0.0
    S = random_states(np.random.default_rng(0), 1, 1.0)
    batch = {"states": S, "actions": [0], "advantages": [0.0], "returns": [0.0],
             "old_log_probs": [math.log(0.5)], "old_values": [0.0]}
    stats, g = ppo_loss_and_grads(params, batch, LOW, PPOHyper(value_coef=0.0))
    assert stats["entropy"] == pytest.approx(math.log(2))
    assert not g["b2"][2:].any()


def test_adam_clips_and_moves_against_gradient():
    params = {k: v.copy() for k, v in init_params(L, np.random.default_rng(0)).items()}
    grads = {k: np.ones_like(v) for k, v in params.items()}
    before = {k: v.copy() for k, v in params.items()}
    opt = Adam(params, lr=1e-3, max_grad_norm=0.5)
    norm = opt.step(params, grads)
    assert norm == pytest.approx(math.sqrt(sum(v.size for v in grads.values())))
    for k in PARAM_ORDER:
        np.testing.assert_allclose(params[k], before[k] - 1e-3, rtol=0, atol=1e-8)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    params = init_params(L, rng)
    path = save_params(params, tmp_path / "agent.bin")
    back = load_params(path, L)
    S = random_states(rng, 50)
    a, b = forward_batch(params, S, LOW), forward_batch(back, S, LOW)
    assert np.array_equal(a.probs, b.probs) and np.array_equal(a.values, b.values)
    assert params_to_bytes(back) == path.read_bytes()
    with pytest.raises(AgentContractError):
        load_params(path, 5)
    with pytest.raises(AgentContractError):
        params_from_bytes(path.read_bytes()[:-8])
