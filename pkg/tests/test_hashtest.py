import math

import numpy as np
import pytest

from polarwz.errors import InvalidArgumentError, TestDegenerateError
from polarwz.hashtest import (ACK_FACTOR, Feedback, HashParams, QuantizedHash, choose_hash_params,
                              closeness_statistic, closeness_test, dequantize, make_hash, pack_hash,
                              projection_matrix, quantize, quantize_index, simulate_test, unpack_hash)


def test_choose_params_unit_variance():
    p = choose_hash_params(4096, 1.0, 1.0, 100)
    assert p.t_range == pytest.approx(4 * 64)
    assert p.q == math.ceil(1 + 4 * math.sqrt(6)) == 11


def test_choose_params_invariant():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(2 ** rng.integers(4, 15))
        d = rng.uniform(0.01, 5)
        p = choose_hash_params(n, d, rng.uniform(0.1, 50), 10)
        assert p.q >= 2 and p.separable(n, d)
    for n, d, s in ((4096, 1.0, 4.0), (256, 0.3, 2.0), (8192, 2.0, 16.0)):
        p = choose_hash_params(n, d, s, 10)
        assert 6 * p.t_range**2 / (p.q - 1) ** 2 <= n * d * (1 + 1e-12)
        assert 6 * p.t_range**2 / (p.q - 2) ** 2 > n * d


def test_quantize_examples():
    p = HashParams(m=1, q=5, t_range=2.0, seed_r=0)
    assert quantize(0.4, p) == (2, 0.0)
    assert quantize(2.5, p) is None
    assert quantize(-2.0, p) == (0, -2.0)
    assert quantize(2.0, p) == (4, 2.0)
    assert quantize(-2.0001, p) is None


def test_quantization_error_bound():
    p = HashParams(m=1, q=7, t_range=3.0, seed_r=0)
    v = np.random.default_rng(1).uniform(-3, 3, 10_000)
    err = np.abs(dequantize(quantize_index(v, p), p) - v)
    assert err.max() <= 2 * p.t_range / (p.q - 1)


def test_overflow_rate_at_four_sigma():
    n, sigma_x2 = 64, 2.0
    p0 = choose_hash_params(n, 1.0, sigma_x2, 20_000)
    x = np.random.default_rng(2).normal(size=n)
    x *= math.sqrt(n * sigma_x2) / np.linalg.norm(x)
    over = 0
    for seed in range(50):
        p = HashParams(p0.m, p0.q, p0.t_range, seed)
        over += int((~make_hash(x, p).valid).sum())
    assert over / (50 * p0.m) <= 1e-4


def test_make_hash_zero_and_determinism():
    p = choose_hash_params(128, 1.0, 1.0, 64)
    h = make_hash(np.zeros(128), p)
    assert np.all(h.values == quantize(0.0, p)[0])
    x = np.random.default_rng(3).normal(size=128)
    np.testing.assert_array_equal(make_hash(x, p).values, make_hash(x, p).values)
    assert h.m == 64


def test_projection_variance():
    x = np.random.default_rng(4).normal(size=64)
    vals = []
    for seed in range(200):
        p = HashParams(m=50, q=11, t_range=100.0, seed_r=seed)
        vals.append(projection_matrix(p, 64).T @ x)
    assert np.var(np.concatenate(vals)) == pytest.approx(x @ x, rel=0.03)


def test_zero_statistic_gives_ack():
    n = 256
    p = choose_hash_params(n, 1.0, 1.0, 32)
    R = projection_matrix(p, n)
    h = make_hash(np.random.default_rng(5).normal(size=n), p, R)
    levels = dequantize(h.values, p)
    x_hat = np.linalg.lstsq(R.T, levels, rcond=None)[0]
    assert closeness_statistic(h, R.T @ x_hat, p) == pytest.approx(0.0, abs=1e-12)
    assert closeness_test(h, x_hat, p, 1.0, R) is Feedback.ACK


def test_all_overflow_is_degenerate():
    p = HashParams(m=4, q=5, t_range=1.0, seed_r=0)
    h = QuantizedHash(np.full(4, 5), 5)
    with pytest.raises(TestDegenerateError):
        closeness_statistic(h, np.zeros(4), p)


def test_hash_length_mismatch():
    p = HashParams(m=4, q=5, t_range=1.0, seed_r=0)
    with pytest.raises(InvalidArgumentError):
        closeness_test(QuantizedHash(np.zeros(3, int), 5), np.zeros(8), p, 1.0)


def test_pack_round_trip():
    p = HashParams(m=37, q=20, t_range=1.0, seed_r=0)
    vals = np.random.default_rng(6).integers(0, 21, 37)
    data = pack_hash(QuantizedHash(vals, 20), p)
    assert len(data) == math.ceil(37 * 5 / 8)
    np.testing.assert_array_equal(unpack_hash(data, p).values, vals)
    assert p.bits == 37 * 5


def test_statistic_mean_within_quantization_band():
    # fixed (x, x_hat); average over fresh projection matrices
    n, delta = 1024, 1.0
    rng = np.random.default_rng(7)
    x = rng.normal(0, 2.0, n)
    x_hat = x + rng.normal(0, 1.0, n)
    d = float(np.sum((x - x_hat) ** 2))
    p0 = choose_hash_params(n, delta, 4.0, 64)
    gam = []
    for seed in range(300):
        p = HashParams(p0.m, p0.q, p0.t_range, seed)
        R = projection_matrix(p, n)
        gam.append(closeness_statistic(make_hash(x, p, R), R.T @ x_hat, p))
    mean = np.mean(gam)
    sem = np.std(gam) / math.sqrt(len(gam))
    assert d - 4 * sem <= mean <= d + n * delta + 4 * sem


def test_separation_at_m_2048():
    rng = np.random.default_rng(8)
    assert simulate_test(4096, 1.0, 4.0, 2048, 1.0, 1000, rng).mean() >= 0.999
    assert simulate_test(4096, 1.0, 4.0, 2048, 8.0, 1000, rng).mean() <= 0.001
    assert ACK_FACTOR == 2.84
