"""Domain types: bandit instances, the Bayesian model parameters and
per-arm sufficient statistics."""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import (
    InvalidInstanceError,
    check_arm,
    check_positive,
)

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
REWARD_KINDS = (GAUSSIAN, BERNOULLI)


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _decimal(x):
    # Means are usually typed as decimals (0.45, 0.3); going through repr keeps
    # 0.5 - 0.45 == 1/20 exactly instead of 0.04999999999999999.
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior on the arm means, ``mu_k ~ N(mu0, sigma0_sq)``."""

    mu0: float = 0.0
    sigma0_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mu0", float(self.mu0))
        object.__setattr__(self, "sigma0_sq", check_positive(self.sigma0_sq, "sigma0_sq"))


@dataclass(frozen=True)
class NoiseSpec:
    """Reward noise model.

    ``nu_sq`` is the sub-Gaussian proxy variance of the real noise and
    ``delta`` in (0, 1] inflates it into the working Gaussian likelihood
    variance ``sigma_sq = nu_sq / delta``.
    """

    nu_sq: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nu_sq", check_positive(self.nu_sq, "nu_sq"))
        delta = check_positive(self.delta, "delta")
        if delta > 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        object.__setattr__(self, "delta", delta)

    @property
    def sigma_sq(self):
        return self.nu_sq / self.delta

    @classmethod
    def from_sigma_sq(cls, sigma_sq, delta=1.0):
        """Build the spec from the working variance instead of the proxy variance."""
        sigma_sq = check_positive(sigma_sq, "sigma_sq")
        return cls(nu_sq=sigma_sq * delta, delta=delta)


@dataclass(frozen=True)
class GapProfile:
    """Suboptimality gaps; the best arm's entry holds the minimum gap."""

    gaps: np.ndarray
    delta_min: float


@dataclass(frozen=True)
class BanditInstance:
    """A K-armed bandit with fixed means.

    Build through :func:`make_instance`, which validates the means and fills
    in ``best_arm`` and the gap profile.
    """

    means: np.ndarray
    reward_kind: str
    sigma_sq: float
    best_arm: int
    profile: GapProfile = field(repr=False)

    @property
    def n_arms(self):
        return self.means.shape[0]

    K = n_arms

    @property
    def best_mean(self):
        return float(self.means[self.best_arm])

    @property
    def gaps(self):
        return self.profile.gaps

    @property
    def delta_min(self):
        return self.profile.delta_min

    def simple_regret(self, arm):
        return self.best_mean - float(self.means[arm])

    def noise_variances(self):
        """Per-arm reward variance of the simulator."""
        if self.reward_kind == BERNOULLI:
            return self.means * (1.0 - self.means)
        return np.full(self.n_arms, self.sigma_sq)


def gap_profile(means):
    means = np.asarray(means, dtype=np.float64)
    best = int(np.argmax(means))
    exact = [_decimal(m) for m in means]
    gaps = [exact[best] - m for m in exact]
    others = [g for k, g in enumerate(gaps) if k != best]
    delta_min = min(others)
    gaps[best] = delta_min
    return GapProfile(gaps=_frozen([float(g) for g in gaps], np.float64), delta_min=float(delta_min))


def make_instance(means, reward_kind=GAUSSIAN, sigma_sq=1.0):
    """Validate arm means and build a :class:`BanditInstance`.

    Ties for the best arm go to the lowest index. ``sigma_sq`` is the
    Gaussian reward variance and is ignored for Bernoulli rewards.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 1 or means.shape[0] < 2:
        raise InvalidInstanceError(f"need a 1-d vector of at least 2 arm means, got shape {means.shape}")
    if not np.all(np.isfinite(means)):
        raise InvalidInstanceError("arm means must be finite")
    if reward_kind not in REWARD_KINDS:
        raise ValueError(f"reward_kind must be one of {REWARD_KINDS}, got {reward_kind!r}")
    if reward_kind == BERNOULLI and (means.min() < 0.0 or means.max() > 1.0):
        raise ValueError("Bernoulli arm means must lie in [0, 1]")
    sigma_sq = check_positive(sigma_sq, "sigma_sq")
    return BanditInstance(
        means=_frozen(means, np.float64),
        reward_kind=reward_kind,
        sigma_sq=sigma_sq,
        best_arm=int(np.argmax(means)),
        profile=gap_profile(means),
    )


def sample_reward(instance, arm, rng):
    """Draw one reward of ``arm``."""
    arm = check_arm(arm, instance.n_arms)
    mu = instance.means[arm]
    if instance.reward_kind == BERNOULLI:
        return float(rng.random() < mu)
    return float(mu + np.sqrt(instance.sigma_sq) * rng.standard_normal())


def draw_rewards(instance, width, rng):
    """Pre-draw a (K, width) reward table.

    Row k lists the rewards arm k returns on its 1st, 2nd, ... pull. Policies
    consume rows left to right, which is distributionally identical to
    sampling on demand and makes a run a pure function of the table.
    """
    shape = (instance.n_arms, int(width))
    mu = instance.means[:, None]
    if instance.reward_kind == BERNOULLI:
        return (rng.random(shape) < mu).astype(np.float64)
    return mu + np.sqrt(instance.sigma_sq) * rng.standard_normal(shape)


@dataclass(frozen=True)
class SufficientStats:
    """Per-arm pull counts, reward sums and squared-reward sums."""

    pulls: np.ndarray
    reward_sums: np.ndarray
    reward_sq_sums: np.ndarray

    def __post_init__(self):
        pulls = _frozen(self.pulls, np.int64)
        sums = _frozen(self.reward_sums, np.float64)
        sq_sums = _frozen(self.reward_sq_sums, np.float64)
        if not (pulls.ndim == sums.ndim == sq_sums.ndim == 1 and pulls.shape == sums.shape == sq_sums.shape):
            raise ValueError("pulls, reward_sums and reward_sq_sums must be 1-d arrays of equal length")
        if np.any(pulls < 0):
            raise ValueError("pull counts must be non-negative")
        unpulled = pulls == 0
        if np.any(sums[unpulled] != 0) or np.any(sq_sums[unpulled] != 0):
            raise ValueError("arms with zero pulls must have zero reward sums")
        object.__setattr__(self, "pulls", pulls)
        object.__setattr__(self, "reward_sums", sums)
        object.__setattr__(self, "reward_sq_sums", sq_sums)

    @classmethod
    def empty(cls, n_arms):
        return cls(np.zeros(n_arms, np.int64), np.zeros(n_arms), np.zeros(n_arms))

    @classmethod
    def from_rewards(cls, rewards):
        """Build from one reward sequence per arm."""
        rewards = [np.asarray(r, dtype=np.float64) for r in rewards]
        return cls(
            np.array([r.size for r in rewards], dtype=np.int64),
            np.array([r.sum() for r in rewards]),
            np.array([(r * r).sum() for r in rewards]),
        )

    @property
    def n_arms(self):
        return self.pulls.shape[0]

    @property
    def round(self):
        return int(self.pulls.sum())

    def sample_means(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pulls > 0, self.reward_sums / np.maximum(self.pulls, 1), np.nan)

    def __eq__(self, other):
        if not isinstance(other, SufficientStats):
            return NotImplemented
        return (
            np.array_equal(self.pulls, other.pulls)
            and np.array_equal(self.reward_sums, other.reward_sums)
            and np.array_equal(self.reward_sq_sums, other.reward_sq_sums)
        )

    __hash__ = None


def update_stats(stats, arm, reward):
    """Return a copy of ``stats`` with one more pull of ``arm``."""
    arm = check_arm(arm, stats.n_arms)
    pulls = stats.pulls.copy()
    sums = stats.reward_sums.copy()
    sq_sums = stats.reward_sq_sums.copy()
    pulls[arm] += 1
    sums[arm] += reward
    sq_sums[arm] += reward * reward
    return SufficientStats(pulls, sums, sq_sums)
