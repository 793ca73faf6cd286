import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rue_bai.core import SufficientStats, make_instance, update_stats
from rue_bai.estimator import posterior_from_variances
from rue_bai.policies import run_rue, run_sh, run_sr, run_ucbe, run_uniform, sh_schedule, sr_schedule

means_st = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=12)


@given(means_st)
def test_best_arm_gap_is_min_gap(means):
    inst = make_instance(means)
    others = np.delete(inst.gaps, inst.best_arm)
    assert inst.gaps[inst.best_arm] == others.min()
    assert np.all(inst.gaps >= 0)
    assert inst.means[inst.best_arm] == max(means)
    assert inst.best_arm == means.index(max(means))


@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from([0.0, 0.25, 0.5, 1.0, -2.0])), max_size=30),
       st.randoms(use_true_random=False))
def test_update_order_insensitive(updates, rnd):
    shuffled = list(updates)
    rnd.shuffle(shuffled)
    a = b = SufficientStats.empty(4)
    for arm, r in updates:
        a = update_stats(a, arm, r)
    for arm, r in shuffled:
        b = update_stats(b, arm, r)
    assert a == b
    assert a.round == len(updates)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1), st.floats(0.01, 10), st.floats(0.01, 10))
def test_posterior_convex_and_positive(K, seed, s0, s):
    rng = np.random.default_rng(seed)
    T = rng.integers(1, 50, size=K)
    sums = rng.normal(size=K) * T
    post = posterior_from_variances(SufficientStats(T, sums, sums**2), s0, s)
    own = sums / T
    lo = np.minimum(own, post.pooled_mean) - 1e-9
    hi = np.maximum(own, post.pooled_mean) + 1e-9
    assert np.all((post.means >= lo) & (post.means <= hi))
    assert np.all(post.variances > 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 400), st.integers(0, 2**32 - 1))
def test_policies_spend_exact_budget(K, extra, seed):
    rng = np.random.default_rng(seed)
    n = 2 * K + extra
    table = rng.random((K, n))
    for rec in (run_rue(table, n), run_ucbe(table, n, 1.0), run_sr(table, n), run_uniform(table, n)):
        assert rec.final_stats.round == n
        assert 0 <= rec.chosen_arm < K
    if all(per_arm > 0 for _, per_arm in sh_schedule(n, K)):
        assert run_sh(table, n).final_stats.round == n


@given(st.integers(2, 60), st.integers(0, 5000))
def test_schedules_within_budget(K, extra):
    n = K + extra
    sr = sr_schedule(n, K)
    assert sum(sr) + sr[-1] <= n
    assert sr == sorted(sr)
    assert sum(s * p for s, p in sh_schedule(n, K)) <= n
