import numpy as np
import pytest

from rue_bai.core import (
    BERNOULLI,
    GAUSSIAN,
    NoiseSpec,
    PriorSpec,
    SufficientStats,
    draw_rewards,
    make_instance,
    sample_reward,
    update_stats,
)
from rue_bai._validation import InvalidInstanceError


def test_prior_and_noise_validation():
    with pytest.raises(ValueError):
        PriorSpec(0.0, 0.0)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, 1.5)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, 0.0)
    noise = NoiseSpec(0.5, 0.25)
    assert noise.sigma_sq == 2.0
    assert NoiseSpec(1.0, 1.0).sigma_sq == 1.0
    assert NoiseSpec.from_sigma_sq(3.0, 0.5).nu_sq == 1.5


def test_f1_instance():
    inst = make_instance([0.5] + [0.45] * 19, BERNOULLI)
    assert inst.best_arm == 0
    assert inst.delta_min == pytest.approx(0.05, abs=1e-15)
    assert inst.K == 20


def test_tie_goes_to_lowest_index():
    inst = make_instance([0.3, 0.3], GAUSSIAN)
    assert inst.best_arm == 0
    assert inst.delta_min == 0.0


def test_gaps_by_subtraction():
    inst = make_instance([0.25, 0.49, 0.5])
    assert inst.best_arm == 2
    np.testing.assert_allclose(inst.gaps, [0.25, 0.01, 0.01], atol=1e-15)
    assert inst.gaps[inst.best_arm] == min(np.delete(inst.gaps, inst.best_arm))


@pytest.mark.parametrize("means", [[], [0.5]])
def test_too_few_arms(means):
    with pytest.raises(InvalidInstanceError):
        make_instance(means)


def test_bernoulli_range():
    with pytest.raises(ValueError):
        make_instance([0.5, 1.2], BERNOULLI)


def test_instance_is_read_only():
    inst = make_instance([0.1, 0.2])
    with pytest.raises(ValueError):
        inst.means[0] = 1.0


def test_degenerate_bernoulli():
    inst = make_instance([1.0, 0.0], BERNOULLI)
    rng = np.random.default_rng(0)
    assert all(sample_reward(inst, 0, rng) == 1.0 for _ in range(100))
    assert all(sample_reward(inst, 1, rng) == 0.0 for _ in range(100))


def test_sample_reward_arm_range():
    inst = make_instance([0.1, 0.2])
    with pytest.raises(IndexError):
        sample_reward(inst, 2, np.random.default_rng(0))


def test_bernoulli_mean_concentrates():
    inst = make_instance([0.5, 0.1], BERNOULLI)
    table = draw_rewards(inst, 1_000_000, np.random.default_rng(1))
    assert set(np.unique(table)) <= {0.0, 1.0}
    assert abs(table[0].mean() - 0.5) <= 0.002


def test_gaussian_variance_concentrates():
    inst = make_instance([0.0, 1.0], GAUSSIAN, sigma_sq=1.0)
    table = draw_rewards(inst, 1_000_000, np.random.default_rng(2))
    assert abs(table[0].var() - 1.0) <= 0.01


def test_update_stats():
    stats = update_stats(SufficientStats.empty(3), 0, 1.0)
    np.testing.assert_array_equal(stats.pulls, [1, 0, 0])
    np.testing.assert_array_equal(stats.reward_sums, [1.0, 0, 0])
    assert stats.round == 1
    stats = update_stats(update_stats(SufficientStats.empty(2), 1, 0.2), 1, 0.4)
    assert stats.reward_sums[1] == pytest.approx(0.6)
    assert stats.reward_sq_sums[1] == pytest.approx(0.2)
    assert stats.round == stats.pulls.sum() == 2


def test_update_stats_does_not_mutate():
    stats = SufficientStats.empty(2)
    update_stats(stats, 0, 1.0)
    assert stats.round == 0


def test_stats_invariants():
    with pytest.raises(ValueError):
        SufficientStats([0, 1], [1.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        SufficientStats([-1, 1], [0.0, 0.0], [0.0, 0.0])


def test_from_rewards_matches_updates():
    rewards = [[0.1, 0.5], [1.0], [0.0, 0.2, 0.3]]
    stats = SufficientStats.empty(3)
    for arm, seq in enumerate(rewards):
        for r in seq:
            stats = update_stats(stats, arm, r)
    assert stats == SufficientStats.from_rewards(rewards)
