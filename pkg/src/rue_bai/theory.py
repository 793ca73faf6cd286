"""Closed-form complexity measures and error bounds.

Covers the gap-based complexity H used by UCB-E, the prior-gap bound for
Gaussian arm means, the failure-probability and simple-regret bounds of
random-effect UCB exploration with their constants, and the small-gap and
two-arm full-information arithmetic.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from ._validation import check_positive
from .core import NoiseSpec, _decimal

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class InfiniteComplexityError(ValueError):
    """A zero gap makes the complexity H infinite."""


def complexity_H(profile):
    """``sum_k gap_k^-2`` with the best arm counted at the minimum gap.

    Accepts a :class:`GapProfile`, a bandit instance or a plain gap vector.
    Summed in exact rational arithmetic over the gaps' decimal values, so
    decimal recipes such as 0.5 vs 0.45 give round numbers.
    """
    gaps = getattr(profile, "gaps", profile)
    gaps = np.asarray(gaps, dtype=np.float64)
    if np.any(gaps <= 0):
        raise InfiniteComplexityError("complexity H needs every gap to be positive")
    total = sum((1 / _decimal(g) ** 2 for g in gaps), Fraction(0))
    return float(total)


def _c_K_inner(K):
    return K / (4.0 * _SQRT_2PI * math.log(K))


def c_K_in_domain(K):
    """True when the constant's inner logarithm is positive (K >= 40 or so)."""
    if K < 2:
        raise ValueError(f"c_K needs K >= 2, got {K}")
    return _c_K_inner(K) > 1.0


def c_K(K):
    """Constant of the prior-gap bound ``Pr(top gap <= d) <= c_K * d / sigma0``.

    For small K the inner logarithm is not positive and the closed form is
    undefined; the additive constant ``2/sqrt(2 pi)`` is returned instead and
    :func:`c_K_in_domain` reports False.
    """
    tail = 2.0 / _SQRT_2PI
    if not c_K_in_domain(K):
        return tail
    log_k = math.log(K)
    return 4.0 * math.sqrt(2.0) * log_k * math.sqrt(math.log(_c_K_inner(K))) + tail


def gap_probability_bound(delta, sigma0, K):
    """``min(1, c_K * delta / sigma0)``."""
    delta = check_positive(delta, "delta", allow_zero=True)
    sigma0 = check_positive(sigma0, "sigma0")
    return min(1.0, c_K(K) * delta / sigma0)


@dataclass(frozen=True)
class ComplexityReport:
    H: float
    H_b: float
    rho: float
    eta: float
    beta: float
    beta1: float
    m: float
    gamma: float
    kappa: float
    c_K: float
    c_K_in_domain: bool


def theorem_constants(K, prior, noise, gaps=None):
    """All constants of the failure-probability and regret bounds.

    ``H`` is filled in only when ``gaps`` is given and all are positive.
    """
    if K < 2:
        raise ValueError(f"need K >= 2, got {K}")
    s0 = prior.sigma0_sq
    s = noise.sigma_sq
    rho = math.sqrt((K * (s0 + s) + s / s0) / (K * (s0 + s) + s0))
    eta = 1.0 / (1.0 + 4.0 * rho)
    beta = 1.0 + s / (K * s0)
    beta1 = 1.0 + s0 / (K * (s0 + s))
    m = beta1 * eta**2 * s0 / s
    ck = c_K(K)
    gamma = 2.0 * eta * (2.0 + 4.0 * rho) * ck
    kappa = 4.0 * eta * (2.0 + 4.0 * rho) * ck * math.sqrt(math.log(K))
    H = math.nan
    if gaps is not None:
        try:
            H = complexity_H(gaps)
        except InfiniteComplexityError:
            H = math.inf
    return ComplexityReport(
        H=H,
        H_b=bayes_complexity(K, prior, noise),
        rho=rho,
        eta=eta,
        beta=beta,
        beta1=beta1,
        m=m,
        gamma=gamma,
        kappa=kappa,
        c_K=ck,
        c_K_in_domain=c_K_in_domain(K),
    )


def bayes_complexity(K, prior, noise):
    """``H_b = (K + sigma_sq / sigma0_sq) * sigma_sq``."""
    s = noise.sigma_sq
    return (K + s / prior.sigma0_sq) * s


def tuned_delta(K, prior, sigma_sq):
    """Likelihood-inflation choice that makes the last bound term O(K/n).

    Solves ``delta = sigma_sq * m / (2 * (2 sigma0_sq + sigma_sq))`` where m
    is evaluated at the given working variance.
    """
    consts = theorem_constants(K, prior, NoiseSpec.from_sigma_sq(sigma_sq))
    s0 = prior.sigma0_sq
    return sigma_sq * consts.m / (2.0 * (2.0 * s0 + sigma_sq))


def tuned_noise(K, prior, sigma_sq):
    """NoiseSpec with working variance ``sigma_sq`` and the tuned delta."""
    return NoiseSpec.from_sigma_sq(sigma_sq, tuned_delta(K, prior, sigma_sq))


def _check_theorem_budget(n, K, strict):
    floor = 4 * (K - 1)
    if K < 2:
        raise ValueError(f"need K >= 2, got {K}")
    if n < floor or (strict and n == floor):
        op = ">" if strict else ">="
        raise ValueError(f"bound needs n {op} 4(K-1) = {floor}, got n={n}")


def _tail_terms(n, K, consts, prior, noise):
    s0, s = prior.sigma0_sq, noise.sigma_sq
    exponent = s * consts.m / (noise.delta * (2.0 * s0 + s))
    return K * n ** (-consts.m * K + 1.0) + K * n ** (-exponent + 1.0)


def _leading_terms(n, K, H_b, scale):
    log_n = math.log(n)
    first = math.sqrt(scale * H_b * (K - 1) * log_n / (n * K))
    rest = n - 4 * (K - 1)
    second = math.inf if rest == 0 else math.sqrt(scale * H_b * log_n / (K * rest))
    return first + second


def theorem2_bound(n, K, prior, noise):
    """Bayesian failure-probability bound of random-effect UCB exploration.

    Raw value; it exceeds 1 for small budgets and is not clamped here.
    """
    _check_theorem_budget(n, K, strict=False)
    consts = theorem_constants(K, prior, noise)
    lead = consts.gamma * _leading_terms(n, K, consts.H_b, 1.0)
    return lead + _tail_terms(n, K, consts, prior, noise)


def theorem3_bound(n, K, prior, noise):
    """Simple Bayes regret bound of random-effect UCB exploration."""
    _check_theorem_budget(n, K, strict=True)
    consts = theorem_constants(K, prior, noise)
    lead = consts.kappa * _leading_terms(n, K, consts.H_b, 2.0)
    spread = 2.0 * math.sqrt(prior.sigma0_sq) * math.sqrt(2.0 * math.log(K))
    return lead + spread * _tail_terms(n, K, consts, prior, noise)


def clamp_probability(value):
    return min(1.0, max(0.0, value))


# ---------------------------------------------------------------------------
# Gap-based bounds and the small-gap regime


def ucbe_upper_bound(n, K, H):
    """UCB-E error bound ``2 n K exp(-(n - K) / (18 H))``."""
    H = check_positive(H, "H")
    return 2.0 * n * K * math.exp(-(n - K) / (18.0 * H))


def ucbe_lower_bound_interval(n, K, H, p):
    """Bernoulli lower bound ``exp(-5 n / (p (1-p) H2))`` at both ends of
    ``H <= H2 <= log(2K) H``; the o(1) term is dropped.

    Returns (value at H2 = H, value at H2 = log(2K) H).
    """
    H = check_positive(H, "H")
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must lie in (0, 1/2), got {p}")
    scale = 5.0 * n / (p * (1.0 - p))
    return math.exp(-scale / H), math.exp(-scale / (math.log(2 * K) * H))


def small_gap_threshold(n, variant="upper"):
    """Minimum-gap level below which exponential bounds turn polynomial.

    ``"upper"``: ``sqrt(54 log(n) / n)`` (UCB-E upper bound);
    ``"lower"``: ``sqrt(log(n) / (32 n))`` (Bernoulli lower bound).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if variant == "upper":
        return math.sqrt(54.0 * math.log(n) / n)
    if variant == "lower":
        return math.sqrt(math.log(n) / (32.0 * n))
    raise ValueError(f"variant must be 'upper' or 'lower', got {variant!r}")


def full_info_error_exact(n, gap, sigma_sq):
    """Two arms, n pulls each: ``Pr(N(0, 2 sigma_sq / n) >= gap)``."""
    gap = check_positive(gap, "gap", allow_zero=True)
    sigma_sq = check_positive(sigma_sq, "sigma_sq")
    return float(norm.sf(gap * math.sqrt(n / (2.0 * sigma_sq))))


def full_info_lower_in_domain(n, gap, sigma_sq):
    return n * gap * gap / (2.0 * sigma_sq) > 1.0


def full_info_error_lower(n, gap, sigma_sq):
    """Mills-ratio lower bound on :func:`full_info_error_exact`.

    ``(x^-1/2 - x^-3/2) exp(-x/2) / sqrt(2 pi)`` with ``x = n gap^2 / (2 sigma_sq)``.
    Returns 0 where the bracket is not positive (the bound is vacuous there).
    """
    gap = check_positive(gap, "gap", allow_zero=True)
    sigma_sq = check_positive(sigma_sq, "sigma_sq")
    x = n * gap * gap / (2.0 * sigma_sq)
    if x <= 1.0:
        return 0.0
    return (x**-0.5 - x**-1.5) * math.exp(-x / 2.0) / _SQRT_2PI

