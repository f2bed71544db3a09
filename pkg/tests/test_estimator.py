import math

import numpy as np
import pytest

from nvsc.estimator import NeuralConfig, NeuralState, activations, adapt_step, adaptation_rate, estimate
from oracles import weighted_sum


def _cfg(m=4, n=3, K_eta=1.0, **kw):
    return NeuralConfig.evenly_spaced(m, n, -1.0, 1.0, K_eta, **kw)


def test_zero_state_zero_centers_gives_zero_features():
    cfg = NeuralConfig(m=3, n=2, centers=np.zeros(3), scales=np.ones(3), K_eta=np.ones(2))
    assert not activations(cfg, np.zeros(2)).any()


def test_features_saturate():
    cfg = _cfg()
    np.testing.assert_allclose(activations(cfg, np.full(3, 1e6)), 1.0)


def test_unit_feature_value():
    cfg = NeuralConfig(m=1, n=1, centers=np.zeros(1), scales=np.ones(1), K_eta=np.ones(1))
    assert activations(cfg, np.array([1.0]))[0, 0] == pytest.approx(0.7615941559557649, abs=1e-15)


def test_zero_weights_estimate_zero():
    cfg = _cfg()
    assert estimate(NeuralState.zeros(cfg), activations(cfg, np.array([0.3, -0.2, 5.0]))) == 0.0


def test_single_neuron_estimate():
    assert estimate(NeuralState(np.array([[2.0]])), np.array([[0.5]])) == 1.0


def test_estimate_matches_double_loop():
    rng = np.random.default_rng(5)
    eta, phi = rng.normal(size=(3, 7)), rng.normal(size=(3, 7))
    assert estimate(NeuralState(eta), phi) == pytest.approx(weighted_sum(eta.tolist(), phi.tolist()), rel=1e-13)


def test_estimate_shape_mismatch():
    with pytest.raises(ValueError):
        estimate(NeuralState(np.zeros((2, 3))), np.zeros((3, 2)))


def test_zero_error_zero_rate():
    cfg = _cfg()
    st = NeuralState(np.ones((3, 4)))
    rate = adaptation_rate(st, cfg, activations(cfg, np.ones(3)), np.zeros(3), np.eye(3), np.array([0, 0, 1.0]))
    assert not rate.any()


def test_frozen_step_returns_identical_weights():
    cfg = _cfg()
    st = NeuralState(np.arange(12.0).reshape(3, 4))
    out = adapt_step(st, cfg, activations(cfg, np.ones(3)), np.ones(3), np.eye(3), np.array([0, 0, 1.0]), 0.1,
                     frozen=True)
    np.testing.assert_array_equal(out.eta_hat, st.eta_hat)


def test_scalar_rate():
    cfg = NeuralConfig(m=1, n=1, centers=np.zeros(1), scales=np.ones(1), K_eta=np.array([2.0]))
    rate = adaptation_rate(NeuralState(np.zeros((1, 1))), cfg, np.array([[1.0]]), np.array([4.0]), np.eye(1),
                           np.array([1.0]))
    assert rate[0, 0] == 2.0


def test_step_rejects_nonpositive_dt():
    cfg = _cfg()
    with pytest.raises(ValueError):
        adapt_step(NeuralState.zeros(cfg), cfg, np.zeros((3, 4)), np.zeros(3), np.eye(3), np.zeros(3), 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(m=0)
    with pytest.raises(ValueError):
        NeuralConfig(m=2, n=1, centers=np.zeros(2), scales=np.array([1.0, 0.0]), K_eta=np.ones(1))
    with pytest.raises(ValueError):
        NeuralConfig(m=2, n=1, centers=np.zeros(2), scales=np.ones(2), K_eta=np.zeros(1))
    with pytest.warns(UserWarning):
        _cfg(K_eta=10.0, K_eta_star=1.0)


def test_literal_layout_duplicates_features():
    cfg = _cfg(m=5, literal=True)
    phi = activations(cfg, np.array([0.4, -1.0, 2.0]))
    np.testing.assert_array_equal(phi, np.repeat(phi[:, :1], 5, axis=1))
    assert phi[0, 0] == pytest.approx(math.tanh(0.4))
