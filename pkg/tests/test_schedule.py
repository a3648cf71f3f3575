import numpy as np
import pytest

from midms.grids import LatentGrid
from midms.rng import Rng
from midms.schedule import (
    NoiseSchedule,
    alpha_bar_at,
    forward_diffuse,
    linear_beta_schedule,
    make_subsequence,
    start_index_from_fraction,
)


def test_linear_schedule_endpoints():
    s = linear_beta_schedule(1000, 1e-4, 0.02)
    assert s.betas[0] == pytest.approx(1e-4)
    assert s.betas[-1] == pytest.approx(0.02)
    assert s.t_train == 1000


def test_single_step_schedule():
    s = linear_beta_schedule(1, 0.5, 0.5)
    assert np.allclose(s.betas, [0.5])
    assert np.allclose(s.alpha_bars, [0.5])


def test_two_step_cumulative_product():
    s = linear_beta_schedule(2, 0.1, 0.3)
    # 0.9, then 0.9 * 0.7
    assert np.allclose(s.alpha_bars, [0.9, 0.63])


def test_schedule_bounds_rejected():
    with pytest.raises(ValueError):
        linear_beta_schedule(10, 0.0, 0.5)
    with pytest.raises(ValueError):
        linear_beta_schedule(10, 0.5, 0.1)
    with pytest.raises(ValueError):
        linear_beta_schedule(0, 0.1, 0.2)


def test_alpha_bars_strictly_decreasing():
    s = linear_beta_schedule(1000, 1e-4, 0.02)
    assert np.all(np.diff(s.alpha_bars) < 0.0)
    assert np.all(s.alpha_bars > 0.0)


def test_noise_schedule_validates():
    with pytest.raises(ValueError):
        NoiseSchedule(betas=np.array([0.1, 0.2]), alpha_bars=np.array([0.5, 0.5]))


def test_alpha_bar_at_zero_is_one():
    s = linear_beta_schedule(2, 0.1, 0.3)
    assert alpha_bar_at(s, 0) == 1.0
    assert alpha_bar_at(s, 2) == pytest.approx(0.63)
    with pytest.raises(ValueError):
        alpha_bar_at(s, 3)


def test_alpha_bar_monotone():
    s = linear_beta_schedule(100, 1e-3, 0.05)
    vals = [alpha_bar_at(s, t) for t in range(101)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_subsequence_quarters():
    assert list(make_subsequence(1000, 4).taus) == [250, 500, 750, 1000]


def test_subsequence_identity():
    assert list(make_subsequence(8, 8).taus) == [1, 2, 3, 4, 5, 6, 7, 8]


def test_subsequence_sixteen_of_thousand():
    expected = [63, 125, 188, 250, 313, 375, 438, 500,
                563, 625, 688, 750, 813, 875, 938, 1000]
    assert list(make_subsequence(1000, 16).taus) == expected


def test_subsequence_too_long_rejected():
    with pytest.raises(ValueError):
        make_subsequence(10, 11)


def test_tau_accessor():
    sub = make_subsequence(1000, 16)
    assert sub.tau(0) == 0
    assert sub.tau(1) == 63
    assert sub.tau(16) == 1000
    with pytest.raises(ValueError):
        sub.tau(17)


def test_forward_diffuse_zero_noise():
    s = linear_beta_schedule(10, 0.01, 0.1)
    x0 = LatentGrid(np.full((1, 2, 2), 2.0))
    eps = LatentGrid(np.zeros((1, 2, 2)))
    out = forward_diffuse(x0, 5, eps, s)
    assert np.allclose(out.data, np.sqrt(alpha_bar_at(s, 5)) * 2.0)


def test_forward_diffuse_t0_identity():
    s = linear_beta_schedule(10, 0.01, 0.1)
    x0 = LatentGrid(Rng(0).gaussians(4).reshape(1, 2, 2))
    eps = LatentGrid(Rng(1).gaussians(4).reshape(1, 2, 2))
    assert np.array_equal(forward_diffuse(x0, 0, eps, s).data, x0.data)


def test_forward_diffuse_shape_mismatch():
    s = linear_beta_schedule(10, 0.01, 0.1)
    with pytest.raises(ValueError):
        forward_diffuse(LatentGrid.zeros(1, 2, 2), 3, LatentGrid.zeros(1, 3, 3), s)


def test_forward_diffuse_variance_monte_carlo():
    # constant x0, one big batch of noise: per-element variance of x_t
    # estimates 1 - abar_t
    s = linear_beta_schedule(1000, 1e-4, 0.02)
    t = 400
    n = 100000
    eps = LatentGrid(Rng(9).gaussians(n).reshape(1, 100, 1000))
    x0 = LatentGrid.full(1, 100, 1000, 1.5)
    xt = forward_diffuse(x0, t, eps, s)
    target = 1.0 - alpha_bar_at(s, t)
    assert abs(float(np.var(xt.data)) - target) < 0.02 * target
    # and the mean is sqrt(abar)*x0
    assert abs(float(np.mean(xt.data)) - np.sqrt(alpha_bar_at(s, t)) * 1.5) < 0.01


def test_forward_diffuse_linearity():
    s = linear_beta_schedule(10, 0.01, 0.1)
    x = LatentGrid(Rng(2).gaussians(8).reshape(2, 2, 2))
    e = LatentGrid(Rng(3).gaussians(8).reshape(2, 2, 2))
    lhs = forward_diffuse(LatentGrid(2.0 * x.data), 4, LatentGrid(2.0 * e.data), s)
    rhs = forward_diffuse(x, 4, e, s)
    assert np.allclose(lhs.data, 2.0 * rhs.data)


def test_start_index_hand_values():
    assert start_index_from_fraction(0.25, 200) == 50
    assert start_index_from_fraction(0.25, 16) == 4
    assert start_index_from_fraction(1.0, 10) == 10


def test_start_index_clamps():
    assert start_index_from_fraction(0.001, 16) == 1
    with pytest.raises(ValueError):
        start_index_from_fraction(0.0, 16)
    with pytest.raises(ValueError):
        start_index_from_fraction(1.5, 16)
