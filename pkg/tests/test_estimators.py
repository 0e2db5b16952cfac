import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fedsim import CollaborationOptimizer, CsbmParams, UniFilterClassifier, generate_csbm

from conftest import random_graph


@pytest.fixture(scope="module")
def csbm():
    return generate_csbm(CsbmParams(n=200, c=2, d=8, p_in=0.05, p_out=0.005, mu=2.0, seed=1))


def test_params_roundtrip():
    est = UniFilterClassifier(K=2, tau=0.3, hhat=0.7)
    params = est.get_params()
    assert params["K"] == 2 and params["tau"] == 0.3 and params["hhat"] == 0.7
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(epochs=7)
    assert est.epochs == 7


def test_unfitted_raises(csbm):
    with pytest.raises(NotFittedError):
        UniFilterClassifier().predict(csbm)
    with pytest.raises(NotFittedError):
        CollaborationOptimizer().transform(np.ones((2, 2)))


def test_rejects_arrays():
    with pytest.raises(TypeError):
        UniFilterClassifier().fit(np.ones((3, 3)))


def test_fit_predict(csbm):
    est = UniFilterClassifier(K=3, epochs=100, lr=0.1).fit(csbm)
    pred = est.predict(csbm)
    assert pred.shape == (200,) and set(np.unique(pred)) <= {0, 1}
    proba = est.predict_proba(csbm)
    np.testing.assert_allclose(proba.sum(1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(np.argmax(proba, 1), pred)
    assert est.score(csbm) > 0.7
    assert est.score(csbm, csbm.labels) == pytest.approx(np.mean(pred == csbm.labels))


def test_predict_on_new_graph(csbm):
    est = UniFilterClassifier(K=2, epochs=5, hhat=0.5).fit(csbm)
    other = random_graph(0, 20, 8, c=2)
    assert est.predict(other).shape == (20,)


def test_fit_is_deterministic(csbm):
    a = UniFilterClassifier(K=2, epochs=10).fit(csbm)
    b = clone(a).fit(csbm)
    assert a.model_ == b.model_


def test_collaboration_optimizer_identical_clients():
    P = np.tile([0.2, 0.8], (3, 1))
    est = CollaborationOptimizer(gamma=0.1).fit(P, P)
    np.testing.assert_allclose(est.W_, 1 / 3, atol=1e-15)
    assert est.n_features_in_ == 2 and len(est.objective_) == 5


def test_collaboration_optimizer_fit_transform(rng):
    P, Q, theta = rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), rng.normal(size=(4, 6))
    est = CollaborationOptimizer(gamma=0.5, terms="q")
    out = est.fit_transform(P, Q, theta)
    np.testing.assert_allclose(out, est.W_ @ theta)
    np.testing.assert_allclose(est.W_.sum(1), 1.0, atol=1e-10)
