import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import reference_bench as ref
from hetcc.bench import (
    COST_CEILING,
    BasicFunctionId,
    BenchmarkDomainError,
    InstanceConfig,
    InstanceConfigError,
    TransformChain,
    apply_asy,
    apply_lambda,
    apply_osz,
    build_instance,
    eval_basic,
    eval_subproblem,
    random_rotation,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 12), elements=finite)


# -- transformations ------------------------------------------------------

def test_osz_fixed_points():
    assert np.array_equal(apply_osz([0.0, 0.0]), [0.0, 0.0])
    assert apply_osz([1.0])[0] == 1.0


def test_osz_negative_golden():
    # mpmath, 40 digits, c1 = 5.5, c2 = 3.1
    assert apply_osz([-2.0])[0] == pytest.approx(-2.02128350867162803835, rel=1e-14)


def test_osz_rejects_non_finite():
    with pytest.raises(BenchmarkDomainError):
        apply_osz([np.inf])
    with pytest.raises(BenchmarkDomainError):
        apply_osz([np.nan, 1.0])


@given(vectors)
def test_osz_preserves_sign(z):
    assert np.array_equal(np.sign(apply_osz(z)), np.sign(z))


def test_asy_examples():
    assert np.array_equal(apply_asy([-3.0, -1.0]), [-3.0, -1.0])
    assert np.array_equal(apply_asy([1.0, 1.0, 1.0], 0.2), [1.0, 1.0, 1.0])
    assert np.array_equal(apply_asy([4.0]), [4.0])


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 0.0)))
def test_asy_identity_on_nonpositive(z):
    assert np.array_equal(apply_asy(z), z)


def test_lambda_examples():
    np.testing.assert_allclose(apply_lambda([1.0, 1.0], 10.0), [1.0, math.sqrt(10.0)], rtol=0, atol=1e-12)
    assert np.array_equal(apply_lambda([7.0], 10.0), [7.0])
    z = np.array([3.0, -2.0, 5.5])
    assert np.array_equal(apply_lambda(z, 1.0), z)


@pytest.mark.parametrize("dim", [2, 5, 17])
def test_lambda_scales_unit_vectors(dim):
    alpha = 7.0
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        out = apply_lambda(e, alpha)
        assert out[i] == pytest.approx(alpha ** (0.5 * i / (dim - 1)), rel=1e-15)
        assert np.count_nonzero(out) == 1


# -- basic functions ------------------------------------------------------

def test_basic_function_examples():
    assert eval_basic(BasicFunctionId.ACKLEY, np.zeros(10)) == pytest.approx(0.0, abs=1e-15)
    assert eval_basic(BasicFunctionId.SCHWEFEL12, [1.0, 1.0]) == 5.0
    assert eval_basic(BasicFunctionId.ATTRACTIVE_SECTOR, [-2.0]) == 1604.0
    assert eval_basic(BasicFunctionId.ELLIPTIC, [1.0, 1.0]) == 1000001.0


@pytest.mark.parametrize("fn", list(BasicFunctionId))
def test_basic_zero_at_origin(fn):
    assert eval_basic(fn, np.zeros(6)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("v", [-0.75, 0.25, 1.5, -2.5])
def test_katsuura_half_integers(v):
    got = eval_basic(BasicFunctionId.KATSUURA, [v])
    assert got == pytest.approx(ref.katsuura([v]), rel=1e-14)


def test_overflow_clamps_to_ceiling():
    z = np.full(4, 1e200)
    assert eval_basic(BasicFunctionId.ATTRACTIVE_SECTOR, z) == COST_CEILING


@pytest.mark.parametrize("fn", list(BasicFunctionId))
def test_batch_matches_single(fn):
    rng = np.random.default_rng(int(fn))
    Z = rng.normal(size=(5, 7))
    batch = eval_basic(fn, Z)
    for row, value in zip(Z, batch):
        assert eval_basic(fn, row) == value


# -- subproblem evaluation ------------------------------------------------

def _chain(dim, seed, rotated):
    rng = np.random.default_rng(seed)
    rot = random_rotation(dim, rng) if rotated else None
    return TransformChain(rng.uniform(-80, 80, dim), rng.permutation(dim), rot)


@pytest.mark.parametrize("fn", list(BasicFunctionId))
@pytest.mark.parametrize("rotated", [False, True])
def test_subproblem_zero_at_shift(fn, rotated):
    chain = _chain(9, int(fn), rotated)
    assert eval_subproblem(fn, chain, chain.shift_vector) == pytest.approx(0.0, abs=1e-9)


def test_identity_chain_sphere_matches_reference():
    chain = TransformChain.identity(2)
    x = [3.0, 4.0]
    assert eval_subproblem(BasicFunctionId.SPHERE, chain, x) == pytest.approx(
        ref.subproblem(1, x, [0.0, 0.0], [0, 1]), rel=1e-13
    )


def test_rotation_preserves_norm_with_bare_sphere():
    dim = 8
    rng = np.random.default_rng(3)
    shift = rng.normal(size=dim)
    bare = dict(use_osz=False, use_asy=False, use_lambda=False)
    plain = TransformChain(shift, np.arange(dim), **bare)
    rotated = TransformChain(shift, np.arange(dim), random_rotation(dim, rng), **bare)
    x = rng.normal(size=dim) * 10
    assert eval_subproblem(1, rotated, x) == pytest.approx(eval_subproblem(1, plain, x), rel=1e-12)


def test_subproblem_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_subproblem(1, TransformChain.identity(3), np.zeros(4))


def test_chain_rejects_bad_rotation_and_permutation():
    with pytest.raises(ValueError):
        TransformChain(np.zeros(2), [0, 0])
    with pytest.raises(ValueError):
        TransformChain(np.zeros(2), [0, 1], np.array([[1.0, 0.1], [0.0, 1.0]]))


@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_subproblem_is_pure(fn, seed):
    chain = _chain(5, seed, seed % 2 == 0)
    x = np.random.default_rng(seed).uniform(-100, 100, 5)
    a = eval_subproblem(fn, chain, x)
    b = eval_subproblem(fn, chain, x.copy())
    assert a == b or (np.isnan(a) and np.isnan(b))


# -- assembly -------------------------------------------------------------

def test_config_validation():
    with pytest.raises(InstanceConfigError):
        InstanceConfig([10, 10], [1], 1)
    with pytest.raises(InstanceConfigError):
        InstanceConfig([10, 10], [1, 2], 6)
    with pytest.raises(InstanceConfigError):
        InstanceConfig([10, 10], [1, 2], 1, total_dim=25)


def test_overlap_arithmetic():
    cfg = InstanceConfig([25, 50], [1, 4], 3)
    assert cfg.overlap_counts() == [5]
    assert cfg.effective_dim() == 70


def test_instance_is_seed_deterministic():
    cfg = InstanceConfig([10, 20, 5], [1, 4, 6], 2, seed=42)
    a, b = build_instance(cfg), build_instance(cfg)
    np.testing.assert_array_equal(a.x_opt, b.x_opt)
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(a.permutation, b.permutation)
    X = np.random.default_rng(0).uniform(-100, 100, (20, a.dim))
    np.testing.assert_array_equal(a.evaluate_batch(X), b.evaluate_batch(X))


def test_x_opt_in_inner_region_and_weights_in_range():
    inst = build_instance(InstanceConfig([50] * 6, [1] * 6, 1, seed=9))
    assert np.all(np.abs(inst.x_opt) <= 80.0)
    assert np.all((inst.weights >= 1.0) & (inst.weights <= 1e3))


@pytest.mark.parametrize("degree", [3, 4])
def test_overlap_groups_share_expected_counts(degree):
    dims = [25, 50, 30, 40]
    inst = build_instance(InstanceConfig(dims, [1, 2, 3, 4], degree, seed=5))
    ratio = {3: 0.2, 4: 0.4}[degree]
    groups = [set(g.tolist()) for g in inst.groups]
    for k in range(len(dims) - 1):
        assert len(groups[k] & groups[k + 1]) == math.floor(ratio * min(dims[k], dims[k + 1]))
    for i in range(len(dims)):
        for j in range(i + 2, len(dims)):
            assert not groups[i] & groups[j]
    assert set().union(*groups) == set(range(inst.dim))
    assert inst.dim == sum(dims) - sum(inst.overlaps)


def test_disjoint_groups_for_low_degree():
    inst = build_instance(InstanceConfig([7, 9, 4], [5, 6, 7], 2, seed=1))
    seen = np.concatenate(inst.groups)
    assert sorted(seen.tolist()) == list(range(20))


def test_evaluate_at_optimum_and_counter():
    inst = build_instance(InstanceConfig([10, 15, 5], [4, 6, 7], 4, seed=3))
    before = inst.fe_counter
    assert inst.evaluate(inst.x_opt) == pytest.approx(0.0, abs=1e-9 * inst.weights.sum())
    inst.evaluate_batch(np.zeros((7, inst.dim)))
    assert inst.fe_counter - before == 8


def test_single_subproblem_matches_eval_subproblem():
    inst = build_instance(InstanceConfig([6], [1], 1, seed=11))
    x = np.random.default_rng(0).uniform(-100, 100, 6)
    expected = inst.weights[0] * eval_subproblem(1, inst.chains[0], x[inst.groups[0]])
    assert inst.evaluate(x) == expected


def test_two_subproblem_sum_matches_reference_summation():
    inst = build_instance(InstanceConfig([4, 3], [3, 5], 2, seed=21))
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.uniform(-100, 100, inst.dim)
        total = 0.0
        for k, fn in enumerate([3, 5]):
            g = inst.groups[k]
            c = inst.chains[k]
            total += inst.weights[k] * ref.subproblem(
                fn, x[g].tolist(), c.shift_vector.tolist(), c.permutation.tolist(), c.rotation.tolist()
            )
        assert inst.evaluate(x) == pytest.approx(total, rel=1e-10)


def test_out_of_bounds_is_flagged_not_projected():
    inst = build_instance(InstanceConfig([3], [1], 1, seed=0))
    x = np.full(3, 150.0)
    value = inst.evaluate(x)
    assert inst.n_out_of_bounds == 1
    assert value == inst.weights[0] * eval_subproblem(1, inst.chains[0], x[inst.groups[0]])
