import math

import numpy as np
import pytest
from sklearn.base import clone

from rue_bai._validation import InsufficientDataError
from rue_bai.core import GAUSSIAN, NoiseSpec, PriorSpec, SufficientStats, draw_rewards, make_instance
from rue_bai.estimator import (
    DEFAULT_FLOOR,
    RandomEffectEstimator,
    estimate_variances,
    misorder_bound,
    posterior,
    posterior_from_variances,
)


def test_hand_case():
    stats = SufficientStats([1, 1], [1.0, 0.0], [1.0, 0.0])
    post = posterior(stats, PriorSpec(0.0, 1.0), NoiseSpec(1.0))
    np.testing.assert_allclose(post.weights, [0.5, 0.5], atol=1e-15)
    assert post.pooled_mean == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(post.means, [0.75, 0.25], atol=1e-12)
    np.testing.assert_allclose(post.variances, [0.75, 0.75], atol=1e-12)


def test_constant_data_fixed_point():
    T = np.array([3, 7, 1, 12])
    stats = SufficientStats(T, 0.3 * T, 0.09 * T)
    post = posterior_from_variances(stats, 0.7, 2.0)
    np.testing.assert_allclose(post.means, 0.3, atol=1e-14)


def test_no_shrinkage_limit():
    stats = SufficientStats([10, 10], [3.0, 7.0], [2.0, 6.0])
    post = posterior_from_variances(stats, 1e12, 1.0)
    np.testing.assert_allclose(post.means, [0.3, 0.7], rtol=1e-9)


def test_zero_pulls_rejected():
    with pytest.raises(InsufficientDataError):
        posterior_from_variances(SufficientStats([1, 0], [1.0, 0.0], [1.0, 0.0]), 1.0, 1.0)


def test_variance_hand_case():
    est = estimate_variances(SufficientStats.from_rewards([[0, 1], [0, 1]]))
    assert est.sigma_sq_hat == pytest.approx(0.5)
    assert est.sigma0_sq_hat == DEFAULT_FLOOR


def test_identical_rewards_floor():
    est = estimate_variances(SufficientStats.from_rewards([[0.4] * 3, [0.4] * 5]))
    assert est.sigma_sq_hat == DEFAULT_FLOOR
    assert est.sigma0_sq_hat == DEFAULT_FLOOR


def test_variance_needs_two_pulls():
    with pytest.raises(InsufficientDataError):
        estimate_variances(SufficientStats.from_rewards([[0.1], [0.2, 0.3]]))


def test_moment_estimator_oracle():
    # Direct quadratic forms from raw rewards, unequal pull counts.
    rng = np.random.default_rng(3)
    rewards = [rng.normal(m, 1.0, size=n) for m, n in [(0.0, 4), (1.0, 9), (-0.5, 6)]]
    est = estimate_variances(SufficientStats.from_rewards(rewards), floor=1e-300)
    n = np.array([r.size for r in rewards])
    N = n.sum()
    s2 = sum(((r - r.mean()) ** 2).sum() for r in rewards) / (N - len(rewards))
    grand = np.concatenate(rewards).mean()
    u = np.array([r.mean() for r in rewards]) - grand
    n_star = N - (n**2).sum() / N
    s02 = ((n * u**2).sum() - (len(rewards) - 1) * s2) / n_star
    assert est.sigma_sq_hat == pytest.approx(s2, rel=1e-12)
    assert est.sigma0_sq_hat == pytest.approx(s02, rel=1e-10)


def test_moment_estimates_consistent():
    s_hat, s0_hat = [], []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        inst = make_instance(rng.normal(0.0, 0.5, size=20), GAUSSIAN, sigma_sq=1.0)
        est = estimate_variances(SufficientStats.from_rewards(draw_rewards(inst, 500, rng)))
        s_hat.append(est.sigma_sq_hat)
        s0_hat.append(est.sigma0_sq_hat)
    assert abs(np.median(s_hat) - 1.0) <= 0.05
    assert abs(np.median(s0_hat) - 0.25) <= 0.15


def test_misorder_bound_values():
    assert misorder_bound(100.0, 0.01, 0.01) < 1e-300
    assert misorder_bound(0.0, 0.5, 0.5) == 2.0
    assert misorder_bound(0.4, 0.01, 0.01) == pytest.approx(2 * math.exp(-2), rel=1e-12)
    assert misorder_bound(0.4, 0.01, 0.01) == pytest.approx(0.2707, abs=1e-4)
    with pytest.raises(ValueError):
        misorder_bound(0.1, 0.0, 0.1)


def test_upper_sandwich_and_convexity():
    rng = np.random.default_rng(5)
    for _ in range(500):
        K = int(rng.integers(2, 30))
        T = rng.integers(1, 60, size=K)
        sums = rng.normal(size=K) * T
        s0, s = rng.uniform(0.01, 10.0, size=2)
        post = posterior_from_variances(SufficientStats(T, sums, sums**2), s0, s)
        base = s0 * s / (T * s0 + s)
        assert np.all(post.variances <= (1 + s / (K * s0)) * base * (1 + 1e-12))
        assert np.all(post.variances >= base * (1 - 1e-12))
        own = sums / T
        lo, hi = np.minimum(own, post.pooled_mean), np.maximum(own, post.pooled_mean)
        assert np.all((post.means >= lo - 1e-12) & (post.means <= hi + 1e-12))
        assert np.all((post.weights > 0) & (post.weights < 1))


def test_weight_monotone_in_pulls():
    a = posterior_from_variances(SufficientStats([2, 5], [1.0, 2.0], [1.0, 2.0]), 1.0, 1.0)
    b = posterior_from_variances(SufficientStats([3, 5], [1.0, 2.0], [1.0, 2.0]), 1.0, 1.0)
    assert b.weights[0] > a.weights[0]
    assert b.weights[0] / 3 < a.weights[0] / 2


def test_estimator_api():
    stats = SufficientStats.from_rewards([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    est = RandomEffectEstimator(sigma0_sq=1.0, sigma_sq=1.0).fit(stats)
    assert est.predict() == 0
    assert est.variance_estimate_ is None
    ref = posterior_from_variances(stats, 1.0, 1.0)
    np.testing.assert_array_equal(est.means_, ref.means)
    np.testing.assert_allclose(est.upper_confidence_bounds(100), ref.means + np.sqrt(2 * ref.variances * math.log(100)))
    plug_in = clone(RandomEffectEstimator()).fit(stats)
    assert plug_in.sigma_sq_ == estimate_variances(stats).sigma_sq_hat
    assert RandomEffectEstimator(floor=1e-6).get_params()["floor"] == 1e-6
