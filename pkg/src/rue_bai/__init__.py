"""Fixed-budget best-arm identification with random-effect UCB exploration."""

from .core import (
    BERNOULLI,
    GAUSSIAN,
    BanditInstance,
    GapProfile,
    NoiseSpec,
    PriorSpec,
    SufficientStats,
    draw_rewards,
    gap_profile,
    make_instance,
    sample_reward,
    update_stats,
)
from .estimator import (
    PosteriorState,
    RandomEffectEstimator,
    VarianceEstimate,
    estimate_variances,
    misorder_bound,
    posterior,
)
from .policies import (
    ESTIMATED,
    KNOWN,
    RUE,
    UCBE,
    SequentialHalving,
    SuccessiveRejects,
    UniformAllocation,
    run_rue,
    run_sh,
    run_sr,
    run_ucbe,
    run_uniform,
)
from .theory import complexity_H

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "ESTIMATED",
    "GAUSSIAN",
    "KNOWN",
    "RUE",
    "UCBE",
    "BanditInstance",
    "GapProfile",
    "NoiseSpec",
    "PosteriorState",
    "PriorSpec",
    "RandomEffectEstimator",
    "SequentialHalving",
    "SuccessiveRejects",
    "SufficientStats",
    "UniformAllocation",
    "VarianceEstimate",
    "complexity_H",
    "draw_rewards",
    "estimate_variances",
    "gap_profile",
    "make_instance",
    "misorder_bound",
    "posterior",
    "run_rue",
    "run_sh",
    "run_sr",
    "run_ucbe",
    "run_uniform",
    "sample_reward",
    "update_stats",
]
