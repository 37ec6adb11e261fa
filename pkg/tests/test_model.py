import math

import numpy as np
import pytest

from polarwz.errors import InvalidArgumentError, InvalidParameterError
from polarwz.model import (GuessSchedule, SourceParams, make_schedule, mi_decomposition, mmse_gain,
                           mmse_reconstruct, part_rate, residual_variance, round_params, sample_source,
                           scaled_side_info)
from polarwz.verify import covariance_gain, random_setup


def test_source_params_validation():
    SourceParams(4.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        SourceParams(4.0, 4.0, 1.0)
    with pytest.raises(InvalidParameterError):
        SourceParams(4.0, 1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        SourceParams(4.0, -1.0, 1.0)


def test_covariance_matrix():
    np.testing.assert_allclose(SourceParams(4.0, 1.0, 0.5).covariance, [[4, 3], [3, 3]])


@pytest.mark.parametrize("lo,hi,grid", [(2, 8, [2, 4, 8]), (2, 2, [2]), (2, 7, [2, 4, 8])])
def test_make_schedule_grids(lo, hi, grid):
    s = make_schedule(lo, hi, 0.5)
    np.testing.assert_allclose(s.sigma2, grid)
    assert s.r == len(grid) - 1


def test_make_schedule_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        make_schedule(2, 1, 0.5)
    with pytest.raises(InvalidParameterError):
        make_schedule(2, 8, 0.0)


def test_schedule_omega_and_covering_round():
    s = GuessSchedule((2.0, 4.0, 8.0))
    assert s.omega == pytest.approx(0.5)
    assert s.first_covering_round(2.2) == 1
    assert s.first_covering_round(4.0) == 1
    assert s.first_covering_round(6.5) == 2
    assert s.first_covering_round(9.0) is None
    with pytest.raises(InvalidParameterError):
        GuessSchedule((2.0, 2.0))


def test_round_params_substitution():
    sched = GuessSchedule((1.5, 2.0))
    rp = round_params(1, sched, SourceParams(4.0, 0.0, 1.0))
    assert rp.delta_k == pytest.approx(2.0)
    assert rp.alpha_k == pytest.approx(2 / 3)
    assert rp.var_t == pytest.approx(4 / 3)
    assert rp.ybar_scale == pytest.approx(2.0)


def test_round_params_poles():
    src = SourceParams(4.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        round_params(1, GuessSchedule((0.5, 1.0)), src)
    with pytest.raises(InvalidParameterError):
        round_params(1, GuessSchedule((2.0, 4.0)), src)


def test_zprime_variance_substitution():
    rp = round_params(1, GuessSchedule((0.75, 1.0)), SourceParams(2.0, 0.0, 0.5))
    assert rp.var_zprime == pytest.approx(2.0)


def test_part_variances_telescope():
    rng = np.random.default_rng(1)
    for _ in range(200):
        src, sched = random_setup(rng)
        total = sum(round_params(k, sched, src).var_part for k in range(1, sched.r + 1))
        assert total + residual_variance(sched.r, sched, src) == pytest.approx(src.sigma_x2, rel=1e-12)
        for k in range(1, sched.r + 1):
            rp = round_params(k, sched, src)
            assert rp.delta_k > src.delta and 0 < rp.alpha_k < 1 and rp.var_part > 0
            assert rp.var_t == pytest.approx(rp.alpha_k * rp.delta_k, rel=1e-14)


def test_sample_source_determinism_and_limit():
    src = SourceParams(4.0, 1.0, 0.5)
    a = sample_source(100, src, 5)
    b = sample_source(100, src, 5)
    np.testing.assert_array_equal(a[0], b[0])
    x, y = sample_source(100, SourceParams(4.0, 0.0, 0.5), 5)
    np.testing.assert_array_equal(x, y)


def test_sample_source_covariance():
    src = SourceParams(4.0, 1.0, 0.5)
    x, y = sample_source(1_000_000, src, 11)
    emp = np.cov(np.vstack([x, y]))
    assert np.max(np.abs(emp - src.covariance)) <= 0.02


def test_scaled_side_info():
    src = SourceParams(4.0, 1.0, 1.0)
    rp = round_params(1, GuessSchedule((1.5, 2.0)), src)
    np.testing.assert_allclose(scaled_side_info(np.array([1.0, -1.0]), src, rp), [2.0, -2.0])
    np.testing.assert_array_equal(scaled_side_info(np.zeros(3), src, rp), 0.0)


def test_scaled_side_info_variance_at_matched_guess():
    src = SourceParams(4.0, 2.0, 1.0)
    rp = round_params(1, GuessSchedule((1.5, 2.0)), src)
    _, y = sample_source(400_000, src, 3)
    ybar = scaled_side_info(y, src, rp)
    assert ybar.var() == pytest.approx(src.sigma_x2 + rp.var_zprime, rel=0.01)


def test_mmse_reconstruct_examples():
    src = SourceParams(2.0, 0.0, 0.5)
    rp = round_params(1, GuessSchedule((0.75, 1.0)), src)
    assert mmse_reconstruct(np.array([0.0]), np.array([1.0]), src, rp)[0] == pytest.approx(0.25)
    a = np.array([0.3, -1.2])
    np.testing.assert_allclose(mmse_reconstruct(a, a, src, rp), a)
    with pytest.raises(InvalidArgumentError):
        mmse_reconstruct(np.zeros(2), np.zeros(3), src, rp)


def test_mmse_gain_matches_covariance_regression():
    rng = np.random.default_rng(2)
    for _ in range(200):
        src, sched = random_setup(rng)
        k = int(rng.integers(1, sched.r + 1))
        assert mmse_gain(src, round_params(k, sched, src)) == pytest.approx(
            covariance_gain(k, sched, src), abs=1e-9)


def test_mi_decomposition_examples():
    src = SourceParams(8.0, 0.0, 1.0)
    lhs, rhs = mi_decomposition(1, GuessSchedule((1.5, 2.0, 4.0)), src)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        mi_decomposition(3, GuessSchedule((1.5, 2.0, 4.0)), src)


def test_mi_decomposition_random_draws():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        src, sched = random_setup(rng)
        k = int(rng.integers(1, sched.r + 1))
        lhs, rhs = mi_decomposition(k, sched, src)
        assert abs(lhs - rhs) <= 1e-9
        assert lhs == pytest.approx(0.5 * math.log2(sched.sigma2[k] / src.delta), abs=1e-9)


def test_part_rates_sum_to_total():
    rng = np.random.default_rng(4)
    for _ in range(100):
        src, sched = random_setup(rng)
        k = sched.r
        total = sum(part_rate(j, sched, src, guess=k) for j in range(1, k + 1))
        assert total == pytest.approx(mi_decomposition(k, sched, src)[0], abs=1e-9)
