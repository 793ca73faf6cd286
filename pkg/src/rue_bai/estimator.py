"""Random-effect posterior for arm means and moment estimates of its variances.

Under the working model ``mu_k ~ N(mu0, sigma0_sq)`` and Gaussian rewards with
variance ``sigma_sq``, each arm's posterior mean shrinks its sample mean
toward a precision-weighted pooled mean, and the posterior variance carries
the extra uncertainty of that pooled mean.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import InsufficientDataError, check_positive
from .core import NoiseSpec, PriorSpec, SufficientStats

DEFAULT_FLOOR = 1e-8


@dataclass(frozen=True)
class PosteriorState:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    pooled_mean: float

    def upper_confidence_bounds(self, budget):
        """``mean + sqrt(2 * variance * log(budget))`` for every arm."""
        return self.means + np.sqrt(2.0 * self.variances * np.log(budget))


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_sq_hat: float
    sigma0_sq_hat: float
    floor: float = DEFAULT_FLOOR


def _arrays(stats):
    if not isinstance(stats, SufficientStats):
        raise TypeError(f"expected SufficientStats, got {type(stats).__name__}")
    return (
        np.ascontiguousarray(stats.pulls, dtype=np.int64),
        np.ascontiguousarray(stats.reward_sums, dtype=np.float64),
        np.ascontiguousarray(stats.reward_sq_sums, dtype=np.float64),
    )


def posterior_from_variances(stats, sigma0_sq, sigma_sq):
    pulls, sums, _ = _arrays(stats)
    if np.any(pulls < 1):
        raise InsufficientDataError("posterior needs at least one pull of every arm")
    sigma0_sq = check_positive(sigma0_sq, "sigma0_sq")
    sigma_sq = check_positive(sigma_sq, "sigma_sq")
    K = pulls.shape[0]
    means, variances, weights = np.empty(K), np.empty(K), np.empty(K)
    pooled = _kernels.posterior_into(pulls, sums, sigma0_sq, sigma_sq, means, variances, weights)
    return PosteriorState(means, variances, weights, float(pooled))


def posterior(stats, prior, noise):
    """Posterior means and variances of all arm means given ``stats``.

    ``prior`` supplies sigma0_sq and ``noise`` the working variance sigma_sq.
    The prior mean is not used: the pooled mean is estimated from the data.
    """
    if not isinstance(prior, PriorSpec) or not isinstance(noise, NoiseSpec):
        raise TypeError("posterior expects a PriorSpec and a NoiseSpec")
    return posterior_from_variances(stats, prior.sigma0_sq, noise.sigma_sq)


def estimate_variances(stats, floor=DEFAULT_FLOOR):
    """Method-of-moments estimates of the noise and prior variances.

    Every arm needs at least two pulls for the within-arm variance.
    """
    pulls, sums, sq_sums = _arrays(stats)
    if np.any(pulls < 2):
        raise InsufficientDataError("variance estimation needs at least two pulls of every arm")
    floor = check_positive(floor, "floor")
    sigma_sq, sigma0_sq = _kernels.variance_estimates(pulls, sums, sq_sums, floor)
    return VarianceEstimate(float(sigma_sq), float(sigma0_sq), floor)


def misorder_bound(gap, tau_k_sq, tau_star_sq):
    """Upper bound on the chance a suboptimal arm's posterior mean beats the best arm's."""
    gap = check_positive(gap, "gap", allow_zero=True)
    tau_k_sq = check_positive(tau_k_sq, "tau_k_sq")
    tau_star_sq = check_positive(tau_star_sq, "tau_star_sq")
    g2 = gap * gap / 8.0
    return float(np.exp(-g2 / tau_k_sq) + np.exp(-g2 / tau_star_sq))


class RandomEffectEstimator(BaseEstimator):
    """Shrinkage estimator of arm means from sufficient statistics.

    Parameters
    ----------
    sigma0_sq, sigma_sq : float or None
        Prior and noise variances. When both are given they are used as is;
        otherwise both are estimated by moments on each call to :meth:`fit`.
    floor : float
        Lower clamp for the moment estimates.

    Attributes
    ----------
    posterior_ : PosteriorState
    sigma0_sq_, sigma_sq_ : float
        Variances actually used.
    means_, variances_ : ndarray
    """

    def __init__(self, sigma0_sq=None, sigma_sq=None, floor=DEFAULT_FLOOR):
        self.sigma0_sq = sigma0_sq
        self.sigma_sq = sigma_sq
        self.floor = floor

    def fit(self, stats, y=None):
        if self.sigma0_sq is not None and self.sigma_sq is not None:
            sigma0_sq, sigma_sq = self.sigma0_sq, self.sigma_sq
            self.variance_estimate_ = None
        else:
            est = estimate_variances(stats, self.floor)
            sigma0_sq, sigma_sq = est.sigma0_sq_hat, est.sigma_sq_hat
            self.variance_estimate_ = est
        self.posterior_ = posterior_from_variances(stats, sigma0_sq, sigma_sq)
        self.sigma0_sq_ = float(sigma0_sq)
        self.sigma_sq_ = float(sigma_sq)
        self.means_ = self.posterior_.means
        self.variances_ = self.posterior_.variances
        return self

    def predict(self, stats=None):
        """Index of the arm with the largest posterior mean (lowest index on ties)."""
        if stats is not None:
            self.fit(stats)
        check_is_fitted(self, "posterior_")
        return int(np.argmax(self.means_))

    def upper_confidence_bounds(self, budget):
        check_is_fitted(self, "posterior_")
        return self.posterior_.upper_confidence_bounds(budget)
