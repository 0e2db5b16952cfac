import numpy as np
import pytest

from fedsim import (CollabGraphView, CsbmParams, LocalModel, adjusted_homophily, build_bases,
                    frequency_component, generate_csbm, heterogeneity, make_graph, ratios,
                    similarity_matrix, spectral_profile, train_local)
from fedsim.analysis import ratio_report
from fedsim.basis import SignatureBundle
from fedsim.exceptions import DegenerateInputError
from fedsim.model import TrainConfig, init_model


def bundle(p):
    p = np.asarray(p, dtype=float)
    return SignatureBundle(p=(p,), q=(p,), t=1)


def double_sum(theta, W):
    A = (W + W.T) / 2
    np.fill_diagonal(A, 0)
    M = len(theta)
    return sum(A[i, j] * np.sum((theta[i] - theta[j]) ** 2) for i in range(M) for j in range(M))


def test_equal_parameters_have_no_variation():
    view = CollabGraphView(np.ones((4, 3)), np.full((4, 4), 0.25))
    assert frequency_component(view) == 0 and heterogeneity(view) == 0


def test_two_client_example():
    view = CollabGraphView(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert frequency_component(view) == pytest.approx(1.0)
    assert heterogeneity(view) == pytest.approx(4.0)


@pytest.mark.parametrize("seed", range(50))
def test_heterogeneity_is_four_f(seed):
    rng = np.random.default_rng(seed)
    M, D = rng.integers(1, 20), rng.integers(1, 10)
    W = rng.dirichlet(np.ones(M), M)
    view = CollabGraphView(rng.normal(size=(M, D)), W)
    f, H = frequency_component(view), heterogeneity(view)
    assert abs(H - 4 * f) <= 1e-9 * (1 + abs(H))
    assert abs(f - double_sum(view.theta, W) / 4) <= 1e-9 * (1 + abs(f))


def test_similarity_cases():
    S = similarity_matrix([bundle([1, 0]), bundle([1, 0]), bundle([0, 1]), bundle([-1, 0])])
    assert S[0, 1] == 1.0 and S[0, 2] == 0.5 and S[0, 3] == 0.0
    np.testing.assert_array_equal(np.diag(S), 1.0)
    np.testing.assert_array_equal(S, S.T)


def test_similarity_zero_signature():
    S = similarity_matrix([bundle([0, 0]), bundle([1, 2])])
    assert S[0, 1] == 0.5


@pytest.mark.parametrize("seed", range(10))
def test_similarity_range(seed):
    rng = np.random.default_rng(seed)
    S = similarity_matrix([bundle(rng.normal(size=5)) for _ in range(6)])
    assert S.min() >= 0 and S.max() <= 1
    np.testing.assert_array_equal(S, S.T)
    r_s, r_c = ratios(S)
    assert r_s + r_c == 1


def test_ratios_examples():
    assert ratios(np.ones((4, 4))) == (1.0, 0.0)
    assert ratios(np.eye(3)) == (0.0, 1.0)
    S = np.eye(3)
    S[0, 1] = S[1, 0] = 0.9
    S[0, 2] = S[2, 0] = 0.2
    S[1, 2] = S[2, 1] = 0.3
    r_s, r_c = ratios(S)
    assert r_s == pytest.approx(1 / 3) and r_c == pytest.approx(2 / 3)
    assert ratios(S, edges=[(0, 1)]) == (1.0, 0.0)


def test_ratios_need_pairs():
    with pytest.raises(DegenerateInputError):
        ratios(np.ones((1, 1)))


def test_ratio_report_identical():
    rep = ratio_report([bundle([1, 2])] * 3)
    assert rep["r_c"] == 0.0 and rep["r_s"] == 1.0


def cycle4(X):
    return make_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)], X, [0, 1, 0, 1])


def test_profile_constant_signal_is_lowest_frequency():
    g = cycle4(np.ones((4, 1)))
    prof = spectral_profile(LocalModel(np.array([1.0, 0.0]), np.eye(1), tau=1.0), g, build_bases(g, 1, 0.5))
    assert prof.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
    assert prof.magnitudes[0] == pytest.approx(1.0, abs=1e-12)
    assert prof.magnitudes.sum() == pytest.approx(1.0, abs=1e-9)


def test_profile_high_pass_on_single_edge():
    g = make_graph(2, [(0, 1)], [[1.0], [0.0]], [0, 1])
    # (I - P) expanded: coefficients (1, -1)
    prof = spectral_profile(LocalModel(np.array([1.0, -1.0]), np.eye(1), tau=1.0), g, build_bases(g, 1, 0.5))
    np.testing.assert_allclose(prof.eigenvalues, [0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(prof.magnitudes, [0.0, 1.0], atol=1e-12)


def test_profile_zero_signal():
    g = cycle4(np.ones((4, 1)))
    with pytest.raises(DegenerateInputError):
        spectral_profile(LocalModel(np.zeros(2), np.eye(1)), g, build_bases(g, 1, 0.5))


def test_profile_csv_header():
    g = cycle4(np.arange(4.0)[:, None])
    prof = spectral_profile(LocalModel(np.array([1.0, 0.5]), np.eye(1), tau=1.0), g, build_bases(g, 1, 0.5))
    lines = prof.to_csv().splitlines()
    assert lines[0] == "lambda,magnitude" and len(lines) == 5
    assert np.all(np.diff(prof.eigenvalues) >= 0) and prof.eigenvalues.max() <= 2 + 1e-9


def test_trained_filter_on_homophilous_graph_is_low_pass():
    shares = []
    for seed in range(3):
        g = generate_csbm(CsbmParams(n=300, c=2, d=16, p_in=0.05, p_out=0.005, seed=seed))
        assert adjusted_homophily(g) > 0.5
        bases = build_bases(g, 4)
        m = train_local(init_model(4, 16, 2, seed=seed), bases, g.labels, g.masks,
                        TrainConfig(epochs=50, lr=0.05, seed=seed))
        shares.append(spectral_profile(m, g, bases).low_frequency_share())
    assert np.mean(shares) >= 0.5
