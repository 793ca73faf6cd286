"""Benchmark setups and the seeded Monte Carlo engine.

Every (instance, policy, budget, replication) cell draws its rewards from a
child stream derived only from ``base_seed`` and the cell's identity, so a
cell's outcome does not depend on which other cells run, in what order, or
on how many worker threads are used.
"""

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from ._validation import BudgetError, check_random_state
from .core import BERNOULLI, GAUSSIAN, NoiseSpec, PriorSpec, draw_rewards, make_instance
from .policies import (
    KNOWN,
    RUE,
    UCBE,
    SequentialHalving,
    SuccessiveRejects,
    UniformAllocation,
)
from .theory import InfiniteComplexityError, complexity_H

FIXED_SETUPS = ("F1", "F2", "F3", "F4", "F5", "F6")
RANDOM_SETUPS = ("R1", "R2", "R3")
SETUPS = FIXED_SETUPS + RANDOM_SETUPS + ("Custom",)
SYMBOLIC_BUDGETS = ("H/2", "H", "2H")
DEFAULT_RANDOM_DRAWS = 50
DEFAULT_REPLICATIONS = 1000
_CHUNK = 50


@dataclass(frozen=True)
class SetupSpec:
    """Which benchmark to build.

    ``reward_kind`` and ``instance_draws`` default per family: Bernoulli and
    one instance for F1-F6, Gaussian (R1) or Bernoulli (R2, R3) and 50 draws
    for the random setups. ``sigma_sq`` is the Gaussian reward variance.
    """

    name: str
    K: int = 20
    reward_kind: str | None = None
    explicit_means: tuple | None = None
    instance_draws: int | None = None
    sigma_sq: float = 1.0

    def __post_init__(self):
        if self.name not in SETUPS:
            raise ValueError(f"unknown setup {self.name!r}; expected one of {SETUPS}")
        if self.name == "Custom":
            if self.explicit_means is None:
                raise ValueError("Custom setup needs explicit_means")
            object.__setattr__(self, "explicit_means", tuple(float(m) for m in self.explicit_means))
            object.__setattr__(self, "K", len(self.explicit_means))
        if self.K < 2:
            raise ValueError(f"need K >= 2 arms, got {self.K}")
        if self.reward_kind is None:
            kind = GAUSSIAN if self.name in ("R1", "Custom") else BERNOULLI
            object.__setattr__(self, "reward_kind", kind)
        if self.instance_draws is None:
            draws = DEFAULT_RANDOM_DRAWS if self.name in RANDOM_SETUPS else 1
            object.__setattr__(self, "instance_draws", draws)
        if self.name not in RANDOM_SETUPS and self.instance_draws != 1:
            raise ValueError("fixed setups have exactly one instance")

    @property
    def is_random(self):
        return self.name in RANDOM_SETUPS


def fixed_means(name, K):
    """Arm means of the fixed benchmarks; arm 0 is best with mean 0.5."""
    means = np.empty(K)
    means[0] = 0.5
    k = np.arange(1, K + 1)  # 1-based arm numbers
    if name == "F1":
        means[1:] = 0.45
    elif name == "F2":
        means[1:] = np.where(k[1:] <= 8, 0.45, 0.3)
    elif name == "F3":
        means[1:] = np.select([k[1:] <= 5, k[1:] <= 13], [0.48, 0.4], 0.3)
    elif name == "F4":
        means[1:] = np.linspace(0.5 - 1 / (5 * K), 0.25, K - 1)
    elif name == "F5":
        means[1:] = 0.5 - np.geomspace(1 / (5 * K), 0.25, K - 1)
    elif name == "F6":
        means[1:] = 0.45
        means[1] = 0.5 - 1 / (10 * K)
    else:
        raise ValueError(f"{name!r} is not a fixed setup")
    return means


def generate_setup(spec, random_state=None):
    """Build the list of bandit instances described by ``spec``.

    Random setups draw every mean i.i.d. from U(0, 0.5); each of the
    ``instance_draws`` mean vectors becomes one instance.
    """
    if spec.name == "Custom":
        return [make_instance(spec.explicit_means, spec.reward_kind, spec.sigma_sq)]
    if spec.name in FIXED_SETUPS:
        return [make_instance(fixed_means(spec.name, spec.K), spec.reward_kind, spec.sigma_sq)]
    rng = check_random_state(random_state)
    draws = rng.uniform(0.0, 0.5, size=(spec.instance_draws, spec.K))
    return [make_instance(m, spec.reward_kind, spec.sigma_sq) for m in draws]


# ---------------------------------------------------------------------------
# Seeds


def label_key(label):
    return zlib.crc32(label.encode())


def cell_seed(base_seed, instance_idx, policy_label, budget, replication):
    """Child seed of one replication.

    ``SeedSequence`` hashes (base_seed, instance index, policy label, budget,
    replication) into the stream state; labels enter through CRC-32 so the
    mapping is stable across processes and releases.
    """
    return np.random.SeedSequence(
        base_seed, spawn_key=(int(instance_idx), label_key(policy_label), int(budget), int(replication))
    )


def setup_seed(base_seed, spec):
    # R1 and R2 share their mean draws; R3 draws independently.
    family = "R3" if spec.name == "R3" else "R1"
    return np.random.SeedSequence(base_seed, spawn_key=(label_key("setup"), label_key(family)))


# ---------------------------------------------------------------------------
# Budgets and policy configuration


def resolve_budget(token, H):
    """Turn ``"H/2"``, ``"H"``, ``"2H"`` or an integer into a budget.

    Symbolic budgets follow ceil(H/2), ceil(H) and 2 ceil(H).
    """
    if isinstance(token, (int, np.integer)) and not isinstance(token, bool):
        return int(token)
    text = str(token).strip().replace(" ", "")
    if text.isdigit():
        return int(text)
    if text not in SYMBOLIC_BUDGETS:
        raise ValueError(f"budget must be an integer or one of {SYMBOLIC_BUDGETS}, got {token!r}")
    if not math.isfinite(H):
        raise InfiniteComplexityError(f"symbolic budget {text!r} needs a finite H")
    if text == "H/2":
        return math.ceil(H / 2)
    if text == "H":
        return math.ceil(H)
    return 2 * math.ceil(H)


def instance_variances(instance):
    """Plug-in prior and noise specs from the true instance.

    Prior variance is the population variance of the true means; noise
    variance is the mean per-arm reward variance.
    """
    sigma0_sq = max(float(np.var(instance.means)), 1e-8)
    sigma_sq = max(float(np.mean(instance.noise_variances())), 1e-8)
    return PriorSpec(float(np.mean(instance.means)), sigma0_sq), NoiseSpec.from_sigma_sq(sigma_sq)


def make_policy(name):
    """Policy from its CLI name: RUE, RUE-known, UCBE, SR, SH or Uniform."""
    factories = {
        "RUE": lambda: RUE(),
        "RUE-known": lambda: RUE(variance_mode=KNOWN),
        "UCBE": lambda: UCBE(),
        "SR": lambda: SuccessiveRejects(),
        "SH": lambda: SequentialHalving(),
        "Uniform": lambda: UniformAllocation(),
    }
    if name not in factories:
        raise ValueError(f"unknown policy {name!r}; expected one of {sorted(factories)}")
    return factories[name]()


def configure_policy(policy, instance, budget, H, ucbe_scale=2.0):
    """Clone ``policy`` for one cell: set the budget, UCB-E's ``a = scale * n / H``
    and, for known-variance RUE without explicit specs, the instance's variances."""
    policy = clone(policy).set_params(budget=budget)
    if isinstance(policy, UCBE) and policy.a is None:
        if not math.isfinite(H):
            raise InfiniteComplexityError("UCBE's exploration parameter needs a finite H")
        policy.set_params(a=ucbe_scale * budget / H)
    if isinstance(policy, RUE) and policy.variance_mode == KNOWN and policy.prior is None:
        prior, noise = instance_variances(instance)
        policy.set_params(prior=prior, noise=noise)
    policy.validate_budget(instance.n_arms)
    return policy


# ---------------------------------------------------------------------------
# Results


@dataclass
class CellResult:
    setup: str
    instance_idx: int
    policy: str
    budget: int | None
    budget_token: str
    replications: int
    errors: int
    error_prob: float
    stderr: float
    mean_simple_regret: float
    base_seed: int
    status: str = "ok"
    chosen_arms: np.ndarray | None = field(default=None, repr=False)
    traces: list | None = field(default=None, repr=False)

    @property
    def ok(self):
        return self.status == "ok"

    @classmethod
    def skipped(cls, setup, instance_idx, policy, budget, token, base_seed, reason, status="skipped"):
        nan = math.nan
        return cls(setup, instance_idx, policy, budget, str(token), 0, 0, nan, nan, nan, base_seed, f"{status}: {reason}")


@dataclass
class ExperimentResult:
    setup: SetupSpec
    instances: list
    complexities: list
    cells: list
    base_seed: int
    replications: int

    @property
    def failed(self):
        return any(c.status.startswith("failed") for c in self.cells)

    def cell(self, policy, budget_token, instance_idx=0):
        for c in self.cells:
            if c.policy == policy and c.budget_token == str(budget_token) and c.instance_idx == instance_idx:
                return c
        raise KeyError((policy, budget_token, instance_idx))

    def pooled(self, policy, budget_token):
        """Replication-weighted error probability and its standard error over
        all instances of one (policy, budget) pair."""
        cells = [c for c in self.cells if c.policy == policy and c.budget_token == str(budget_token) and c.ok]
        if not cells:
            raise KeyError((policy, budget_token))
        reps = sum(c.replications for c in cells)
        p = sum(c.errors for c in cells) / reps
        return p, math.sqrt(p * (1 - p) / reps), reps


def _summarise(errors, regrets):
    R = errors.shape[0]
    n_err = int(errors.sum())
    p = n_err / R
    return n_err, p, math.sqrt(p * (1 - p) / R), math.fsum(regrets) / R


def _run_chunk(policy, instance, label, instance_idx, base_seed, reps, record_trace):
    chosen = np.empty(len(reps), dtype=np.int64)
    traces = [] if record_trace else None
    if record_trace:
        policy = clone(policy).set_params(record_trace=True)
    for i, r in enumerate(reps):
        rng = np.random.default_rng(cell_seed(base_seed, instance_idx, label, policy.budget, r))
        table = draw_rewards(instance, policy.budget, rng)
        rec = policy._run(table, None)
        chosen[i] = rec.chosen_arm
        if record_trace:
            traces.append(rec.trace)
    return chosen, traces


def run_experiment(
    setup,
    policies,
    budgets,
    replications=DEFAULT_REPLICATIONS,
    base_seed=0,
    n_jobs=1,
    instances=None,
    record_trace=False,
    ucbe_scale=2.0,
):
    """Monte Carlo estimate of error probability and simple regret.

    ``policies`` maps unique labels to unfitted policy estimators; labels
    enter the seed derivation, so reordering the mapping changes nothing.
    ``budgets`` mixes integers and the tokens ``"H/2"``, ``"H"``, ``"2H"``.
    A budget a policy cannot run with yields a skipped cell; any other
    exception marks the cell as failed.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    if base_seed < 0:
        raise ValueError("base_seed must be non-negative")
    if isinstance(policies, (list, tuple)):
        policies = {name: make_policy(name) for name in policies}
    if instances is None:
        instances = generate_setup(setup, np.random.default_rng(setup_seed(base_seed, setup)))
    complexities = []
    for inst in instances:
        try:
            complexities.append(complexity_H(inst.profile))
        except InfiniteComplexityError:
            complexities.append(math.inf)

    planned = []  # (cell header, configured policy or None)
    for i, inst in enumerate(instances):
        H = complexities[i]
        for label in sorted(policies):
            for token in budgets:
                header = (setup.name, i, label, str(token))
                try:
                    b = resolve_budget(token, H)
                    pol = configure_policy(policies[label], inst, b, H, ucbe_scale)
                except (BudgetError, InfiniteComplexityError) as exc:
                    b = None if not isinstance(exc, BudgetError) else resolve_budget(token, H)
                    planned.append((header, b, None, str(exc)))
                    continue
                planned.append((header, b, pol, None))

    jobs = []
    for c, (header, b, pol, _) in enumerate(planned):
        if pol is None:
            continue
        _, i, label, _ = header
        for start in range(0, replications, _CHUNK):
            reps = range(start, min(start + _CHUNK, replications))
            jobs.append((c, start, delayed(_run_chunk)(pol, instances[i], label, i, base_seed, reps, record_trace)))

    outputs = Parallel(n_jobs=n_jobs, prefer="threads")(
        _guard(job) for _, _, job in jobs
    )
    by_cell = {}
    for (c, start, _), out in zip(jobs, outputs):
        by_cell.setdefault(c, []).append((start, out))

    cells = []
    for c, (header, b, pol, reason) in enumerate(planned):
        name, i, label, token = header
        if pol is None:
            cells.append(CellResult.skipped(name, i, label, b, token, base_seed, reason))
            continue
        parts = sorted(by_cell[c], key=lambda item: item[0])
        failures = [out for _, out in parts if isinstance(out, BaseException)]
        if failures:
            cells.append(CellResult.skipped(name, i, label, b, token, base_seed, repr(failures[0]), "failed"))
            continue
        chosen = np.concatenate([out[0] for _, out in parts])
        inst = instances[i]
        errors = chosen != inst.best_arm
        regrets = inst.best_mean - inst.means[chosen]
        n_err, p, se, regret = _summarise(errors, regrets)
        traces = [t for _, out in parts for t in out[1]] if record_trace else None
        cells.append(
            CellResult(name, i, label, b, token, replications, n_err, p, se, regret, base_seed,
                       chosen_arms=chosen, traces=traces)
        )
    return ExperimentResult(setup, list(instances), complexities, cells, base_seed, replications)


def _guard(job):
    func, args, kwargs = job

    def call(*a, **kw):
        try:
            return func(*a, **kw)
        except Exception as exc:  # reported per cell, not raised
            return exc

    return delayed(call)(*args, **kwargs)


# ---------------------------------------------------------------------------
# Oracles and post-processing


def gap_oracle(K, sigma0, alpha, samples, random_state=None, chunk=65536):
    """Empirical ``Pr(X_(1) - X_(2) <= alpha)`` for K i.i.d. N(0, sigma0^2) draws."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if K < 2:
        raise ValueError("need K >= 2")
    rng = check_random_state(random_state)
    hits = 0
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        x = sigma0 * rng.standard_normal((size, K))
        top = np.partition(x, K - 2, axis=1)[:, K - 2:]
        hits += int(np.count_nonzero(top[:, 1] - top[:, 0] <= alpha))
        remaining -= size
    return hits / samples


@dataclass(frozen=True)
class RelativeCell:
    setup: str
    instance_idx: int
    budget_token: str
    difference: float
    ratio: float
    ratio_defined: bool


def aggregate_relative(result, baseline, target):
    """Per cell, ``baseline_error - target_error`` and ``target_error / baseline_error``."""
    labels = {c.policy for c in result.cells}
    for name in (baseline, target):
        if name not in labels:
            raise KeyError(f"policy {name!r} not in results")
    base = {(c.instance_idx, c.budget_token): c for c in result.cells if c.policy == baseline and c.ok}
    out = []
    for c in result.cells:
        if c.policy != target or not c.ok:
            continue
        b = base.get((c.instance_idx, c.budget_token))
        if b is None:
            continue
        defined = b.error_prob > 0
        ratio = c.error_prob / b.error_prob if defined else math.nan
        out.append(RelativeCell(c.setup, c.instance_idx, c.budget_token, b.error_prob - c.error_prob, ratio, defined))
    return out


__all__ = [
    "CellResult",
    "ExperimentResult",
    "RelativeCell",
    "SetupSpec",
    "aggregate_relative",
    "cell_seed",
    "configure_policy",
    "fixed_means",
    "gap_oracle",
    "generate_setup",
    "instance_variances",
    "make_policy",
    "resolve_budget",
    "run_experiment",
]
