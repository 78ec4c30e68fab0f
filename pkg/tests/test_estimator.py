import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hetcc.bench import InstanceConfig, build_instance
from hetcc.estimator import HeterogeneousCC


def _instances():
    return [build_instance(InstanceConfig([6, 6], [1, 2], 2, seed=s)) for s in range(2)]


def _small(**kw):
    base = dict(max_fes=1500, step_fes=300, init_pop_size=20, epochs=1, num_envs=1, random_state=0)
    base.update(kw)
    return HeterogeneousCC(**base)


def test_params_roundtrip_and_clone():
    est = _small(learning_rate=1e-3)
    assert est.get_params()["learning_rate"] == 1e-3
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(epochs=3)
    assert est.epochs == 3


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        _small().predict(np.zeros((1, 20)))


def test_fit_predict_minimize(tmp_path):
    est = _small().fit(_instances())
    assert est.n_features_in_ == 20
    proba = est.predict_proba(np.zeros((3, 20)))
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert est.predict(np.zeros((3, 20))).shape == (3,)
    with pytest.raises(ValueError):
        est.predict_proba(np.zeros((3, 5)))
    res = est.minimize(_instances()[0], seed=1)
    assert res.ledger["init"] + res.ledger["step"] + res.ledger["probe"] == res.ledger["counter"]
    assert np.isfinite(est.score(_instances()[:1]))

    est.save(tmp_path / "a.hcag")
    other = _small().load(tmp_path / "a.hcag")
    np.testing.assert_array_equal(other.predict_proba(np.ones((2, 20))), est.predict_proba(np.ones((2, 20))))


def test_fit_is_reproducible():
    a = _small().fit(_instances())
    b = _small().fit(_instances())
    for k in a.params_:
        np.testing.assert_array_equal(a.params_[k], b.params_[k])


def test_baseline_modes_need_no_training():
    res = _small().minimize(_instances()[0], mode="random")
    assert res.best_cost >= 0
    with pytest.raises(ValueError):
        _small().minimize(_instances()[0], mode="learned")
