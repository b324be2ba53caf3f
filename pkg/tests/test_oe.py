import numpy as np
import pytest
from scipy.signal import lfilter

from _fixtures import random_fixtures
from qident.errors import ConfigError, DimensionError
from qident.gauss import make_rng
from qident.oe import (DurbinEstimator, OeModel, build_gamma_matrix, build_regressor, dm_update,
                       impulse_response, recover, stationary_output_variance)
from qident.quantizer import Quantizer, rho

EX2 = OeModel([0.2], [[1.0], [-0.2], [0.6]])
EX2_H = [1.0, -0.4, 0.68, -0.136, 0.0272, -0.00544]


def test_example2_impulse_response():
    np.testing.assert_allclose(impulse_response(EX2, 6)[:, 0], EX2_H, atol=1e-15)
    np.testing.assert_array_equal(EX2.theta_star, [0.2, 1.0, -0.2, 0.6])


def test_fir_impulse_response():
    m = OeModel([], [[1.0, 2.0], [0.5, -1.0]])
    h = impulse_response(m, 5)
    np.testing.assert_array_equal(h[:2], m.b)
    np.testing.assert_array_equal(h[2:], 0.0)


def test_impulse_response_geometric_decay():
    m = OeModel([-0.5, 0.3], [[1.0], [0.4]])
    h = np.abs(impulse_response(m, 80)[:, 0])
    i = np.arange(2, 80)
    # fit log|h_i| <= log C + i log r on the recursion output
    r = m.poles_modulus().max()
    C = np.max(h[i] / r ** i)
    assert r < 1 and np.isfinite(C)
    assert np.all(h[i] <= C * r ** i * (1 + 1e-12))


def test_model_guards():
    with pytest.raises(ConfigError, match="unstable"):
        OeModel([-1.0], [[1.0]])
    with pytest.raises(ConfigError, match="unstable"):
        OeModel([0.0, 1.2], [[1.0]])
    with pytest.raises(ConfigError):
        OeModel([0.2, 0.0], [[1.0]])
    with pytest.raises(ConfigError):
        OeModel([0.2], [[1.0], [0.0]])


def test_coprime_detection():
    # B(q) = 1 + 0.5 q^-1 and A(q) = 1 + 0.5 q^-1 share a factor
    assert not OeModel([0.5], [[1.0], [0.5]]).is_coprime()
    assert OeModel([0.5], [[1.0], [0.6]]).is_coprime()
    assert EX2.is_coprime()


def test_stationary_variance_example2():
    h = impulse_response(EX2, 200)[:, 0]
    assert stationary_output_variance(EX2, [[1.0]], 1.0) == pytest.approx(np.sum(h ** 2) + 1, rel=1e-14)
    assert stationary_output_variance(EX2, [[1.0]], 1.0) == pytest.approx(2.6416666666666666, rel=1e-12)


def test_gamma_matrix_example2():
    h = impulse_response(EX2, 8)
    np.testing.assert_allclose(build_gamma_matrix(h, 1, 2, 3), [[0.68]], atol=1e-15)
    np.testing.assert_allclose(build_gamma_matrix(h, 1, 2, 4), [[0.68], [-0.136]], atol=1e-15)


def test_gamma_matrix_layout_multi_input():
    h = np.arange(1, 13, dtype=float).reshape(6, 2)  # h_i = [2i+1, 2i+2]
    G = build_gamma_matrix(h, 2, 1, 4)
    # rows: [h_1, h_0], [h_2, h_1], [h_3, h_2] stacked per component
    expect = np.array([[3, 1], [4, 2], [5, 3], [6, 4], [7, 5], [8, 6]], dtype=float)
    np.testing.assert_array_equal(G, expect)


def test_gamma_matrix_errors():
    h = impulse_response(EX2, 8)
    with pytest.raises(DimensionError):
        build_gamma_matrix(h, 1, 2, 2)
    with pytest.raises(DimensionError):
        build_gamma_matrix(h[:3], 1, 2, 4)


def test_gamma_rank_equals_n_a():
    for m in random_fixtures(1, 10):
        kappa = m.n_a + m.n_b + 2
        G = build_gamma_matrix(impulse_response(m, kappa + 1), m.n_a, m.n_b, kappa)
        assert np.linalg.matrix_rank(G) == m.n_a


def test_recover_example2_by_hand():
    h = impulse_response(EX2, 4)
    th = recover(h, 1, 2, 3)
    a1 = -(-0.136) / 0.68
    np.testing.assert_allclose(th, [a1, 1.0, -0.4 + a1, 0.68 + a1 * -0.4], atol=1e-15)
    np.testing.assert_allclose(th, [0.2, 1.0, -0.2, 0.6], atol=1e-15)


def test_recover_fir():
    m = OeModel([], [[1.0], [0.3], [-0.7]])
    np.testing.assert_array_equal(recover(impulse_response(m, 5), 0, 2, 4), [1.0, 0.3, -0.7])


def test_recover_zero_sequence():
    np.testing.assert_array_equal(recover(np.zeros((8, 1)), 2, 2, 6), np.zeros(5))


def test_recover_nonfinite_input_is_gated():
    h = impulse_response(EX2, 7)
    h[3] = np.nan
    th = recover(h, 1, 2, 6)
    assert th[0] == 0.0


def test_recover_round_trip_and_residual():
    for m in random_fixtures(2, 20):
        for extra in (0, 1, 2, 5):
            kappa = m.n_a + m.n_b + extra
            h = impulse_response(m, kappa + 1)
            th = recover(h, m.n_a, m.n_b, kappa)
            np.testing.assert_allclose(th, m.theta_star, rtol=0, atol=1e-12)
            G = build_gamma_matrix(h, m.n_a, m.n_b, kappa)
            rhs = h[m.n_b + 1:kappa + 1].ravel()
            assert np.linalg.norm(G @ th[:m.n_a] + rhs) <= 1e-12


def test_recover_batched():
    ms = random_fixtures(3, 12)
    ms = [m for m in ms if (m.n_a, m.n_b, m.n) == (ms[0].n_a, ms[0].n_b, ms[0].n)] or ms[:1]
    m0 = ms[0]
    kappa = m0.n_a + m0.n_b + 1
    hs = np.stack([impulse_response(m, kappa + 1) for m in ms])
    th = recover(hs, m0.n_a, m0.n_b, kappa)
    for i, m in enumerate(ms):
        np.testing.assert_allclose(th[i], m.theta_star, atol=1e-12)


def test_from_theta_star():
    m = random_fixtures(4, 1)[0]
    np.testing.assert_array_equal(m.from_theta_star(m.theta_star).theta_star, m.theta_star)


def test_regressor_shift_register():
    est = DurbinEstimator(Quantizer([1.0]), 1, 1, kappa=2)
    np.testing.assert_array_equal(build_regressor(est, [3.0]), [3, 0, 0])
    est = DurbinEstimator(Quantizer([1.0]), 1, 1, kappa=2)
    for v in (1.0, 2.0):
        est.build_regressor([v])
    np.testing.assert_array_equal(est.build_regressor([3.0]), [3, 2, 1])


def test_regressor_multi_input():
    est = DurbinEstimator(Quantizer([1.0]), 1, 1, n=2, kappa=2)
    est.build_regressor([1.0, 10.0])
    np.testing.assert_array_equal(est.build_regressor([2.0, 20.0]), [2, 20, 1, 10, 0, 0])


def test_regressor_second_moment():
    est = DurbinEstimator(Quantizer([1.0]), 1, 1, kappa=3)
    phi = make_rng(8).standard_normal(100_000)
    acc = np.zeros((4, 4))
    for x in phi:
        r = est.build_regressor([x])
        acc += np.outer(r, r)
    np.testing.assert_allclose(acc / phi.size, np.eye(4), atol=0.05)


def test_kappa_guard():
    with pytest.raises(DimensionError):
        DurbinEstimator(Quantizer([1.5]), 1, 2, kappa=2)
    assert DurbinEstimator(Quantizer([1.5]), 1, 2).kappa == 6


def test_exact_impulse_response_injected():
    est = DurbinEstimator(Quantizer([1.5]), 1, 2, kappa=6)
    h = impulse_response(EX2, 7)
    # inject gamma = rho(delta) h at the current delta estimate
    est.wls.gamma_hat = rho(est.spec, est.delta_hat) * h.ravel()
    np.testing.assert_allclose(est.theta_star_hat, EX2.theta_star, atol=1e-12)


def test_durbin_converges_on_example2():
    spec = Quantizer([1.5])
    rng = make_rng(21)
    T = 20_000
    phi = rng.standard_normal(T)
    y = lfilter([1.0, -0.2, 0.6], [1.0, 0.2], phi) + rng.standard_normal(T)
    s = spec(y)
    est = DurbinEstimator(spec, 1, 2, kappa=6, batch_shape=(1,))
    for t in range(T):
        dm_update(est, phi[t:t + 1, None], s[t:t + 1])
    assert np.linalg.norm(est.theta_star_hat[0] - EX2.theta_star) <= 0.15
    assert abs(est.delta_hat[0] - np.sqrt(2.6416666666666666)) <= 0.05
