"""Input validation helpers shared by the estimators and policies."""

import numbers

import numpy as np


class InvalidInstanceError(ValueError):
    """Bandit instance cannot be built from the given means."""


class InsufficientDataError(ValueError):
    """Sufficient statistics do not carry enough pulls for the requested estimate."""


class BudgetError(ValueError):
    """Budget is too small for the policy's schedule."""


def check_random_state(seed):
    """Turn ``seed`` into a ``np.random.Generator``.

    ``None`` gives fresh OS entropy, an int or ``SeedSequence`` seeds a new
    generator, and an existing generator is passed through untouched.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"{seed!r} cannot be used to seed a numpy.random.Generator")


def check_positive(value, name, *, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_budget(budget, n_arms, *, minimum_per_arm=1, policy="policy"):
    if not isinstance(budget, numbers.Integral) or isinstance(budget, bool):
        raise BudgetError(f"budget must be an integer, got {budget!r}")
    budget = int(budget)
    if budget < minimum_per_arm * n_arms:
        raise BudgetError(
            f"{policy} needs budget >= {minimum_per_arm * n_arms} for K={n_arms} arms, got {budget}"
        )
    return budget


def check_reward_table(table):
    """Validate a pre-drawn reward table of shape (K, width).

    Row k holds the successive rewards of arm k; a policy reads row k left to
    right, so column j is the reward of the (j+1)-th pull of arm k.
    """
    table = np.ascontiguousarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 2:
        raise InvalidInstanceError(f"reward table must have shape (K>=2, width), got {table.shape}")
    if not np.all(np.isfinite(table)):
        raise ValueError("reward table contains non-finite values")
    return table


def check_arm(arm, n_arms):
    if not isinstance(arm, numbers.Integral) or not 0 <= arm < n_arms:
        raise IndexError(f"arm index {arm!r} out of range for K={n_arms}")
    return int(arm)
