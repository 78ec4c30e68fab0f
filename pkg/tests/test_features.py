import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetcc.bench import InstanceConfig, build_instance
from hetcc.decomp import DecompositionResult, DesignStructureMatrix, ground_truth_decompose
from hetcc.features import (
    RunTelemetry,
    build_state,
    dimension_feature,
    population_features,
    probe_population,
    problem_features,
    progress_features,
    state_size,
)
from hetcc.optim import ContextMemory, OptimizerPool, checkpoint, create_or_restore


def _decomp(groups, dim):
    groups = [np.asarray(g) for g in groups]
    return DecompositionResult(groups, DesignStructureMatrix.from_groups(groups, dim), "test")


def test_dimension_feature_values():
    assert dimension_feature(500) == 1.0
    # 2 ** 0.4 to 16 digits (mpmath)
    assert dimension_feature(1000) == pytest.approx(1.319507910772894, rel=1e-14)


@given(st.integers(1, 5000), st.integers(1, 5000))
def test_dimension_feature_is_monotone(a, b):
    if a < b:
        assert dimension_feature(a) < dimension_feature(b)


def test_problem_features_separable_and_overlap():
    sep = _decomp([[i] for i in range(4)], 4)
    assert problem_features(0, sep)[1:].tolist() == [1.0, 0.0]
    overlapped = _decomp([[0, 1, 2], [2, 3, 4], [5]], 6)
    f = problem_features(1, overlapped)
    assert f[0] == pytest.approx((3 / 500) ** 0.4)
    assert f[1] == 0.0
    assert f[2] == pytest.approx(1 / 6)


def test_population_features_identical_individuals():
    X = np.ones((6, 3))
    f, flag = population_features(np.arange(6.0), X, None)
    assert not flag
    assert f[0] == 0.0 and f[1] == 0.0
    assert f[2:].tolist() == [1.0, 1.0, 1.0]


def test_population_features_unchanged_probe():
    c = np.array([3.0, 8.0, 1.0])
    f, _ = population_features(c, np.eye(3), np.vstack([c, c]))
    assert f[2:].tolist() == [1.0, 1.0, 1.0]


def test_population_features_hand_enumerated():
    f, _ = population_features([10.0, 20.0], np.array([[0.0], [1.0]]), np.array([[5.0, 30.0]]))
    assert f[2] == 0.0
    assert f[3] == 0.5
    assert f[4] == 0.5


def test_dispersion_matches_definition():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(25, 4))
    c = rng.normal(size=25)
    total = sum(np.linalg.norm(X[i] - X[j]) for i in range(25) for j in range(25) if i != j)
    d = total / (25 * 24)
    top = np.argsort(c)[:3]  # ceil(2.5)
    dt = sum(np.linalg.norm(X[i] - X[j]) for i in top for j in top if i != j) / 6
    f, _ = population_features(c, X, None)
    assert f[0] == pytest.approx(d, rel=1e-12)
    assert f[1] == pytest.approx(dt - d, rel=1e-12)


def test_small_population_keeps_two_elites_and_degenerate_case():
    f, _ = population_features([1.0, 2.0, 3.0], np.array([[0.0], [2.0], [5.0]]), None)
    assert f[1] == pytest.approx(2.0 - 10.0 / 3.0)
    f, flag = population_features([1.0], np.zeros((1, 2)), None)
    assert flag and not f.any()


@given(
    arrays(np.float64, st.integers(2, 12), elements=st.floats(-1e3, 1e3)),
    st.integers(1, 4),
    st.integers(0, 1000),
)
@settings(max_examples=60, deadline=None)
def test_probe_ratios_in_unit_interval(c, S, seed):
    rng = np.random.default_rng(seed)
    P = c + rng.normal(scale=2.0, size=(S, len(c)))
    f, _ = population_features(c, rng.normal(size=(len(c), 3)), P)
    assert np.all((f[2:] >= 0) & (f[2:] <= 1))


def _telemetry(L=4):
    t = RunTelemetry(max_fes=1000, n_optimizers=L)
    t.start(1e10)
    return t


def test_progress_normalized_cost_example():
    t = _telemetry()
    t.ct_star = 1e5
    assert progress_features(t, 0)[1] == pytest.approx(0.25, rel=1e-14)


def test_progress_ratios_and_unused_optimizers():
    t = _telemetry()
    f = progress_features(t, 0)
    assert f[0] == 0.0 and f[2] == 1.0 and f[3] == 1.0
    assert not f[4:].any()
    t.fes_used = 400
    t.record_step(2, 1, 300, 1e9, 50.0, 25.0)
    f = progress_features(t, 2)
    assert f[0] == 0.4
    assert f[2] == pytest.approx(0.1**8)
    assert f[3] == pytest.approx(0.5**8)
    assert f[4:8].tolist() == [0.0, 1.0, 0.0, 0.0]
    assert f[8:].tolist() == [0.0, 1.0, 0.0, 0.0]


def test_progress_zero_previous_cost_and_solved_run():
    t = _telemetry()
    t.sub_best[0] = (0.0, 0.0)
    t.record_step(1, 0, 10, 1e-30, 1.0, 0.0)
    f = progress_features(t, 0)
    assert np.all(np.isfinite(f))
    assert f[3] == 1.0


@given(st.lists(st.floats(1e-25, 1e12), min_size=1, max_size=20), st.floats(1.0, 1e30))
@settings(max_examples=60)
def test_progress_features_finite_and_bounded(costs, c0):
    t = RunTelemetry(max_fes=10_000, n_optimizers=3)
    t.start(c0)
    for i, c in enumerate(costs):
        t.fes_used += 100
        before = t.ct_star
        t.record_step(i % 2, i % 3, 100, min(c, before), before, min(c, before))
        f = progress_features(t, i % 2)
        assert np.all(np.isfinite(f))
        assert 0.0 <= f[1] <= 1.0
        assert 0.0 <= f[2] <= 1.0 and 0.0 <= f[3] <= 1.0
        # r**8 is representable (hence positive) for r above ~1e-38
        if t.ct_star / t.c_prev_star > 1e-38:
            assert f[2] > 0.0


def test_probe_keeps_memory_and_is_reproducible():
    inst = build_instance(InstanceConfig([5, 5], [3, 4], 2, seed=1))
    decomp = ground_truth_decompose(inst)
    mem = ContextMemory(OptimizerPool(), seed=0)
    g = decomp.groups[0]

    def objective(Xs):
        X = np.tile(inst.x_opt, (len(Xs), 1))
        X[:, g] = Xs
        return inst.evaluate_batch(X)

    opt = create_or_restore(mem, 0, 0, 5, (inst.lower, inst.upper))
    report = opt.step(objective, 100)
    checkpoint(opt, mem)
    digest = mem.digest()
    before = inst.fe_counter
    P1, cut = probe_population(mem, 0, report.population, objective, 3, 10_000, (inst.lower, inst.upper),
                               np.random.default_rng(4))
    assert not cut and P1.shape == (3, opt.lam)
    assert inst.fe_counter - before == 3 * opt.lam
    assert mem.digest() == digest
    P2, _ = probe_population(mem, 0, report.population, objective, 3, 10_000, (inst.lower, inst.upper),
                             np.random.default_rng(4))
    assert np.array_equal(P1, P2)
    P3, cut = probe_population(mem, 0, report.population, objective, 3, 2 * opt.lam + 1,
                               (inst.lower, inst.upper), np.random.default_rng(4))
    assert cut and P3.shape[0] == 2

    state = build_state(0, decomp, report.population, report.population_costs, P1, _telemetry())
    assert state.shape == (state_size(4),) == (20,)
    assert np.all(np.isfinite(state))
