"""Fixed-budget best-arm identification policies.

Every policy reads rewards from a (K, width) table whose row k lists arm k's
successive rewards; passing a :class:`~rue_bai.core.BanditInstance` instead
draws that table from ``random_state`` first. A run is therefore a pure
function of (table, configuration).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import (
    BudgetError,
    check_budget,
    check_positive,
    check_random_state,
    check_reward_table,
)
from .core import BanditInstance, NoiseSpec, PriorSpec, SufficientStats, draw_rewards
from .estimator import DEFAULT_FLOOR

KNOWN = "known"
ESTIMATED = "estimated"


@dataclass(frozen=True)
class Recommendation:
    chosen_arm: int
    final_stats: SufficientStats
    trace: np.ndarray | None = None


def _reward_table(env, budget, random_state):
    if isinstance(env, BanditInstance):
        return draw_rewards(env, budget, check_random_state(random_state))
    return check_reward_table(env)


def _recommendation(pulls, sums, sq_sums, trace, chosen, record_trace):
    stats = SufficientStats(pulls, sums, sq_sums)
    trace = np.asarray(trace, dtype=np.int64) if record_trace else None
    return Recommendation(int(chosen), stats, trace)


def _n_arms(env):
    return env.n_arms if isinstance(env, BanditInstance) else np.shape(env)[0]


# ---------------------------------------------------------------------------
# Random-effect UCB exploration


def _resolve_variances(variance_mode, prior, noise):
    if variance_mode == KNOWN:
        if not isinstance(prior, PriorSpec) or not isinstance(noise, NoiseSpec):
            raise ValueError("known variance mode needs a PriorSpec and a NoiseSpec")
        return True, prior.sigma0_sq, noise.sigma_sq
    if variance_mode == ESTIMATED:
        return False, 1.0, 1.0
    raise ValueError(f"variance_mode must be {KNOWN!r} or {ESTIMATED!r}, got {variance_mode!r}")


def run_rue(
    env,
    budget,
    *,
    variance_mode=ESTIMATED,
    prior=None,
    noise=None,
    floor=DEFAULT_FLOOR,
    random_state=None,
    record_trace=False,
):
    """Random-effect UCB exploration.

    Pulls every arm twice, then each round pulls the arm maximising
    ``posterior_mean + sqrt(2 * posterior_variance * log(budget))`` computed
    from the data so far, and finally recommends the largest posterior mean.
    In ``"estimated"`` mode both variances are re-estimated by moments before
    every round.
    """
    K = _n_arms(env)
    budget = check_budget(budget, K, minimum_per_arm=2, policy="RUE")
    known, sigma0_sq, sigma_sq = _resolve_variances(variance_mode, prior, noise)
    floor = check_positive(floor, "floor")
    table = _reward_table(env, budget, random_state)
    pulls, sums, sq_sums, trace, chosen, _ = _kernels.rue_run(
        table, budget, known, sigma0_sq, sigma_sq, floor, record_trace, np.empty(0), 0.0
    )
    return _recommendation(pulls, sums, sq_sums, trace, chosen, record_trace)


@dataclass(frozen=True)
class PullCountCheck:
    """Outcome of one monitored RUE run.

    ``event_held`` is True when every confidence interval held from round
    2K+1 on; ``bounds`` holds the per-arm pull-count ceiling implied by that
    event (``inf`` for the best arm, which it does not constrain).
    """

    event_held: bool
    pulls: np.ndarray
    bounds: np.ndarray

    @property
    def bound_holds(self):
        return bool(np.all(self.pulls <= self.bounds))

    @property
    def implication_holds(self):
        return (not self.event_held) or self.bound_holds


def check_pull_count_bound(instance, budget, prior, noise, random_state=None):
    """Run RUE with known variances and test the pull-count ceiling.

    On the event that all confidence intervals hold (checked against the true
    means), every suboptimal arm satisfies
    ``T_k <= 2 + 2 * (1 + eta)^2 * beta * sigma_sq * log(n) / gap_k^2``.
    """
    from .theory import theorem_constants

    budget = check_budget(budget, instance.n_arms, minimum_per_arm=2, policy="RUE")
    consts = theorem_constants(instance.n_arms, prior, noise)
    table = draw_rewards(instance, budget, check_random_state(random_state))
    pulls, _, _, _, _, event_held = _kernels.rue_run(
        table,
        budget,
        True,
        prior.sigma0_sq,
        noise.sigma_sq,
        DEFAULT_FLOOR,
        False,
        np.ascontiguousarray(instance.means, dtype=np.float64),
        consts.eta,
    )
    gaps = instance.gaps.copy()
    with np.errstate(divide="ignore"):
        bounds = 2.0 + 2.0 * (1.0 + consts.eta) ** 2 * consts.beta * noise.sigma_sq * math.log(budget) / gaps**2
    bounds[instance.best_arm] = np.inf
    return PullCountCheck(bool(event_held), pulls, bounds)


# ---------------------------------------------------------------------------
# UCB-E


def ucbe_index(stats, a):
    """Empirical mean plus ``sqrt(a / pulls)`` for every arm."""
    a = check_positive(a, "a")
    return stats.reward_sums / stats.pulls + np.sqrt(a / stats.pulls)


def run_ucbe(env, budget, a, *, random_state=None, record_trace=False):
    """UCB-E with exploration parameter ``a``.

    The usual choice ``a = 2 * budget / H`` needs the true complexity H, so
    the caller supplies it.
    """
    K = _n_arms(env)
    budget = check_budget(budget, K, policy="UCBE")
    a = check_positive(a, "a")
    table = _reward_table(env, budget, random_state)
    pulls, sums, sq_sums, trace, chosen = _kernels.ucbe_run(table, budget, a, record_trace)
    return _recommendation(pulls, sums, sq_sums, trace, chosen, record_trace)


# ---------------------------------------------------------------------------
# Phase-based baselines


class _Ledger:
    """Pull bookkeeping on a reward table via prefix sums."""

    def __init__(self, table, budget, record_trace):
        K, width = table.shape
        zeros = np.zeros((K, 1))
        self.csum = np.hstack([zeros, np.cumsum(table, axis=1)])
        self.csum_sq = np.hstack([zeros, np.cumsum(table * table, axis=1)])
        self.width = width
        self.counts = np.zeros(K, dtype=np.int64)
        self.budget = budget
        self.used = 0
        self.trace = [] if record_trace else None

    @property
    def remaining(self):
        return self.budget - self.used

    def pull(self, arm, times):
        times = min(int(times), self.remaining)
        if times <= 0:
            return 0
        if self.counts[arm] + times > self.width:
            raise ValueError("reward table exhausted")
        self.counts[arm] += times
        self.used += times
        if self.trace is not None:
            self.trace.extend([arm] * times)
        return times

    def window_mean(self, arm, start):
        end = self.counts[arm]
        return (self.csum[arm, end] - self.csum[arm, start]) / (end - start)

    def mean(self, arm):
        return self.window_mean(arm, 0)

    def spend_residual(self, arms):
        arms = sorted(arms)
        i = 0
        while self.remaining > 0:
            self.pull(arms[i % len(arms)], 1)
            i += 1

    def stats(self):
        idx = np.arange(self.counts.shape[0])
        return SufficientStats(
            self.counts.copy(), self.csum[idx, self.counts], self.csum_sq[idx, self.counts]
        )


def sr_log_bar(K):
    return Fraction(1, 2) + sum(Fraction(1, i) for i in range(2, K + 1))


def sr_schedule(budget, K):
    """Cumulative per-arm pull targets of the K-1 successive-rejects phases."""
    log_bar = sr_log_bar(K)
    return [
        max(1, math.ceil(Fraction(budget - K) / (log_bar * (K + 1 - j))))
        for j in range(1, K)
    ]


def run_sr(env, budget, *, random_state=None, record_trace=False):
    """Successive rejects.

    Phase j raises every surviving arm to ``sr_schedule(budget, K)[j-1]``
    pulls and then drops the survivor with the lowest empirical mean (ties
    drop the highest index). Leftover budget goes to the last survivor.
    """
    K = _n_arms(env)
    budget = check_budget(budget, K, policy="SR")
    table = _reward_table(env, budget, random_state)
    ledger = _Ledger(table, budget, record_trace)
    alive = list(range(K))
    for target in sr_schedule(budget, K):
        for k in alive:
            ledger.pull(k, target - ledger.counts[k])
        means = [ledger.mean(k) for k in alive]
        worst = min(range(len(alive)), key=lambda i: (means[i], -alive[i]))
        alive.pop(worst)
    ledger.spend_residual(alive)
    return Recommendation(alive[0], ledger.stats(), np.asarray(ledger.trace) if record_trace else None)


def sh_schedule(budget, K):
    """List of (survivors, pulls per survivor) for each sequential-halving phase."""
    rounds = max(1, (K - 1).bit_length())
    schedule = []
    survivors = K
    for _ in range(rounds):
        schedule.append((survivors, budget // (survivors * rounds)))
        survivors = (survivors + 1) // 2
    return schedule


def run_sh(env, budget, *, random_state=None, record_trace=False):
    """Sequential halving.

    ``ceil(log2 K)`` phases; each pulls every survivor
    ``budget // (survivors * ceil(log2 K))`` times and keeps the better half
    (rounded up) by the phase's own empirical means, ties to the lowest index.
    """
    K = _n_arms(env)
    budget = check_budget(budget, K, policy="SH")
    schedule = sh_schedule(budget, K)
    if any(per_arm == 0 for _, per_arm in schedule):
        raise BudgetError(f"SH budget {budget} leaves a phase with zero pulls per arm for K={K}")
    table = _reward_table(env, budget, random_state)
    ledger = _Ledger(table, budget, record_trace)
    alive = list(range(K))
    for _, per_arm in schedule:
        starts = {k: int(ledger.counts[k]) for k in alive}
        for k in alive:
            ledger.pull(k, per_arm)
        ranked = sorted(alive, key=lambda k: (-ledger.window_mean(k, starts[k]), k))
        alive = sorted(ranked[: (len(alive) + 1) // 2])
    ledger.spend_residual(alive)
    return Recommendation(alive[0], ledger.stats(), np.asarray(ledger.trace) if record_trace else None)


def run_uniform(env, budget, *, random_state=None, record_trace=False):
    """Round-robin allocation, then the best empirical mean."""
    K = _n_arms(env)
    budget = check_budget(budget, K, policy="Uniform")
    table = _reward_table(env, budget, random_state)
    ledger = _Ledger(table, budget, record_trace=False)
    for k in range(K):
        ledger.pull(k, budget // K + (1 if k < budget % K else 0))
    stats = ledger.stats()
    chosen = int(np.argmax(stats.reward_sums / stats.pulls))
    trace = np.arange(budget, dtype=np.int64) % K if record_trace else None
    return Recommendation(chosen, stats, trace)


# ---------------------------------------------------------------------------
# Estimator-style wrappers


class BasePolicy(BaseEstimator):
    """Common ``fit`` plumbing.

    ``fit(env, random_state)`` runs the policy once and stores
    ``recommendation_``, ``best_arm_``, ``stats_`` and ``trace_``.
    """

    label = "policy"

    def _run(self, env, random_state):
        raise NotImplementedError

    def fit(self, env, random_state=None):
        rec = self._run(env, random_state)
        self.recommendation_ = rec
        self.best_arm_ = rec.chosen_arm
        self.stats_ = rec.final_stats
        self.trace_ = rec.trace
        self.n_arms_ = rec.final_stats.n_arms
        return self

    def fit_predict(self, env, random_state=None):
        return self.fit(env, random_state).best_arm_

    def predict(self):
        check_is_fitted(self, "recommendation_")
        return self.best_arm_

    def validate_budget(self, n_arms):
        """Raise :class:`BudgetError` if ``self.budget`` cannot run on ``n_arms`` arms."""
        check_budget(self.budget, n_arms, policy=self.label)


class RUE(BasePolicy):
    """Random-effect UCB exploration; see :func:`run_rue`."""

    label = "RUE"

    def __init__(
        self,
        budget=1000,
        variance_mode=ESTIMATED,
        prior=None,
        noise=None,
        floor=DEFAULT_FLOOR,
        record_trace=False,
    ):
        self.budget = budget
        self.variance_mode = variance_mode
        self.prior = prior
        self.noise = noise
        self.floor = floor
        self.record_trace = record_trace

    def validate_budget(self, n_arms):
        check_budget(self.budget, n_arms, minimum_per_arm=2, policy=self.label)

    def _run(self, env, random_state):
        return run_rue(
            env,
            self.budget,
            variance_mode=self.variance_mode,
            prior=self.prior,
            noise=self.noise,
            floor=self.floor,
            random_state=random_state,
            record_trace=self.record_trace,
        )


class UCBE(BasePolicy):
    """UCB-E; ``a`` must be set before fitting, e.g. to ``2 * budget / H``."""

    label = "UCBE"

    def __init__(self, budget=1000, a=None, record_trace=False):
        self.budget = budget
        self.a = a
        self.record_trace = record_trace

    def _run(self, env, random_state):
        if self.a is None:
            raise ValueError("UCBE needs its exploration parameter a")
        return run_ucbe(env, self.budget, self.a, random_state=random_state, record_trace=self.record_trace)


class SuccessiveRejects(BasePolicy):
    label = "SR"

    def __init__(self, budget=1000, record_trace=False):
        self.budget = budget
        self.record_trace = record_trace

    def _run(self, env, random_state):
        return run_sr(env, self.budget, random_state=random_state, record_trace=self.record_trace)


class SequentialHalving(BasePolicy):
    label = "SH"

    def __init__(self, budget=1000, record_trace=False):
        self.budget = budget
        self.record_trace = record_trace

    def validate_budget(self, n_arms):
        budget = check_budget(self.budget, n_arms, policy=self.label)
        if any(per_arm == 0 for _, per_arm in sh_schedule(budget, n_arms)):
            raise BudgetError(f"SH budget {budget} leaves a phase with zero pulls per arm for K={n_arms}")

    def _run(self, env, random_state):
        return run_sh(env, self.budget, random_state=random_state, record_trace=self.record_trace)


class UniformAllocation(BasePolicy):
    label = "Uniform"

    def __init__(self, budget=1000, record_trace=False):
        self.budget = budget
        self.record_trace = record_trace

    def _run(self, env, random_state):
        return run_uniform(env, self.budget, random_state=random_state, record_trace=self.record_trace)
