"""Compiled inner loops.

Everything here works on plain float/int arrays so that one replication of an
adaptive policy runs without touching the interpreter. The public wrappers
live in :mod:`rue_bai.estimator` and :mod:`rue_bai.policies`.
"""

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def variance_estimates(pulls, sums, sq_sums, floor):
    """Method-of-moments estimates (sigma_sq_hat, sigma0_sq_hat).

    Within-arm pooled variance for the noise; between-arm quadratic form
    with n_* normalisation, minus its noise contribution, for the prior.
    Both are clamped below at ``floor``.
    """
    K = pulls.shape[0]
    total_pulls = 0.0
    total_sum = 0.0
    sum_sq_pulls = 0.0
    within = 0.0
    for k in range(K):
        T = float(pulls[k])
        mean = sums[k] / T
        within += sq_sums[k] - T * mean * mean
        total_pulls += T
        total_sum += sums[k]
        sum_sq_pulls += T * T
    within_dof = total_pulls - K
    sigma_sq = max(within / within_dof, 0.0)

    grand = total_sum / total_pulls
    between = 0.0
    for k in range(K):
        T = float(pulls[k])
        u = sums[k] / T - grand
        between += T * u * u
    n_star = total_pulls - sum_sq_pulls / total_pulls
    sigma0_sq = (between - (K - 1) * sigma_sq) / n_star
    return max(sigma_sq, floor), max(sigma0_sq, floor)


@njit(**_JIT)
def posterior_into(pulls, sums, sigma0_sq, sigma_sq, means, variances, weights):
    """Fill posterior means, variances and shrinkage weights; return the pooled mean."""
    K = pulls.shape[0]
    pool_weight = 0.0
    pool_sum = 0.0
    for k in range(K):
        T = float(pulls[k])
        denom = T * sigma0_sq + sigma_sq
        weights[k] = T * sigma0_sq / denom
        one_minus_w = sigma_sq / denom
        pool_weight += one_minus_w * T
        pool_sum += one_minus_w * sums[k]
    pooled = pool_sum / pool_weight
    for k in range(K):
        T = float(pulls[k])
        w = weights[k]
        one_minus_w = sigma_sq / (T * sigma0_sq + sigma_sq)
        means[k] = one_minus_w * pooled + w * (sums[k] / T)
        variances[k] = w * sigma_sq / T + one_minus_w * one_minus_w * sigma_sq / pool_weight
    return pooled


@njit(**_JIT)
def _argmax(values):
    best = 0
    for k in range(1, values.shape[0]):
        if values[k] > values[best]:
            best = k
    return best


@njit(**_JIT)
def rue_run(table, budget, known, sigma0_sq, sigma_sq, floor, record_trace, true_means, eta):
    """One run of random-effect UCB exploration on a reward table.

    Returns (pulls, sums, sq_sums, trace, chosen_arm, event_held). When
    ``true_means`` is non-empty, ``event_held`` reports whether every posterior
    mean from round 2K+1 on stayed within ``eta`` times its confidence width
    of the true mean.
    """
    K = table.shape[0]
    width = table.shape[1]
    pulls = np.zeros(K, np.int64)
    sums = np.zeros(K)
    sq_sums = np.zeros(K)
    trace = np.empty(budget if record_trace else 0, np.int64)
    means = np.empty(K)
    variances = np.empty(K)
    weights = np.empty(K)
    log_n = math.log(budget)
    monitor = true_means.shape[0] == K
    event_held = True

    t = 0
    for _ in range(2):
        for k in range(K):
            r = table[k, pulls[k]]
            pulls[k] += 1
            sums[k] += r
            sq_sums[k] += r * r
            if record_trace:
                trace[t] = k
            t += 1

    s0, s = sigma0_sq, sigma_sq
    ucb = np.empty(K)
    while True:
        if not known:
            s, s0 = variance_estimates(pulls, sums, sq_sums, floor)
        posterior_into(pulls, sums, s0, s, means, variances, weights)
        if monitor and t > 2 * K:
            for k in range(K):
                if abs(true_means[k] - means[k]) > eta * math.sqrt(2.0 * variances[k] * log_n):
                    event_held = False
        if t == budget:
            break
        for k in range(K):
            ucb[k] = means[k] + math.sqrt(2.0 * variances[k] * log_n)
        arm = _argmax(ucb)
        if pulls[arm] >= width:
            raise ValueError("reward table exhausted")
        r = table[arm, pulls[arm]]
        pulls[arm] += 1
        sums[arm] += r
        sq_sums[arm] += r * r
        if record_trace:
            trace[t] = arm
        t += 1
    return pulls, sums, sq_sums, trace, _argmax(means), event_held


@njit(**_JIT)
def ucbe_run(table, budget, a, record_trace):
    """One run of UCB-E: index = empirical mean + sqrt(a / pulls)."""
    K = table.shape[0]
    width = table.shape[1]
    pulls = np.zeros(K, np.int64)
    sums = np.zeros(K)
    sq_sums = np.zeros(K)
    trace = np.empty(budget if record_trace else 0, np.int64)
    index = np.empty(K)
    t = 0
    for k in range(K):
        r = table[k, 0]
        pulls[k] = 1
        sums[k] = r
        sq_sums[k] = r * r
        if record_trace:
            trace[t] = k
        t += 1
    while t < budget:
        for k in range(K):
            index[k] = sums[k] / pulls[k] + math.sqrt(a / pulls[k])
        arm = _argmax(index)
        if pulls[arm] >= width:
            raise ValueError("reward table exhausted")
        r = table[arm, pulls[arm]]
        pulls[arm] += 1
        sums[arm] += r
        sq_sums[arm] += r * r
        if record_trace:
            trace[t] = arm
        t += 1
    for k in range(K):
        index[k] = sums[k] / pulls[k]
    return pulls, sums, sq_sums, trace, _argmax(index)
