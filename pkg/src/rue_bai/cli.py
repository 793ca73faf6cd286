"""Command-line front end.

Subcommands:

    rue-bai run CONFIG.yaml        Monte Carlo experiment -> cells.csv, meta.json
    rue-bai theory --K 40 ...      bound table -> theory.csv
    rue-bai oracle --K 40 ...      prior-gap oracle vs bound -> oracle.csv
    rue-bai plot-data A.csv B.csv  pool cells files -> plot_data.csv

Global flags ``--seed``, ``--threads`` and ``--output-dir`` go before the
subcommand. Exit status is 0 on success, 1 on a configuration error and 2
when an experiment cell crashed.

Run configs are YAML mappings with these keys (only ``setup``, ``policies``
and ``budgets`` are required)::

    setup: F2              # F1..F6, R1..R3 or Custom
    K: 20
    reward_kind: bernoulli # optional; defaults per setup
    means: [0.5, 0.4]      # Custom only
    instance_draws: 50     # random setups only
    sigma_sq: 1.0          # Gaussian reward variance
    policies: [RUE, SH, SR, UCBE, Uniform]
    budgets: [H/2, H, 2H, 5000]
    replications: 1000
    base_seed: 0
    variance_mode: estimated   # or known: applies to the RUE policy
    output_dir: out
    emit_trace: false
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import NoiseSpec, PriorSpec
from .experiments import (
    DEFAULT_REPLICATIONS,
    SetupSpec,
    gap_oracle,
    make_policy,
    resolve_budget,
    run_experiment,
)
from .theory import (
    bayes_complexity,
    c_K,
    c_K_in_domain,
    clamp_probability,
    full_info_error_exact,
    full_info_error_lower,
    full_info_lower_in_domain,
    gap_probability_bound,
    small_gap_threshold,
    theorem2_bound,
    theorem3_bound,
    ucbe_upper_bound,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

CELL_COLUMNS = [
    "setup",
    "instance_idx",
    "policy",
    "budget",
    "replications",
    "errors",
    "error_prob",
    "stderr",
    "mean_simple_regret",
    "base_seed",
    "budget_token",
    "status",
]

CONFIG_KEYS = {
    "setup",
    "K",
    "reward_kind",
    "means",
    "instance_draws",
    "sigma_sq",
    "policies",
    "budgets",
    "replications",
    "base_seed",
    "variance_mode",
    "output_dir",
    "emit_trace",
}


class ConfigError(Exception):
    pass


def fmt(value):
    """Fixed 17-significant-digit text for floats; plain text otherwise."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# run


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        config = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{path}: {where}: {problem}") from None
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be a mapping of named fields")
    unknown = sorted(set(config) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s): {', '.join(map(str, unknown))}")
    for key in ("setup", "policies", "budgets"):
        if key not in config:
            raise ConfigError(f"{path}: missing required field {key!r}")
    return config


def _field(config, key, kind, default):
    value = config.get(key, default)
    if value is None:
        return None
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"field {key!r}: expected an integer, got {value!r}")
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field {key!r}: expected a number, got {value!r}")
        return float(value)
    if kind is list and not isinstance(value, list):
        raise ConfigError(f"field {key!r}: expected a list, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"field {key!r}: expected text, got {value!r}")
    if kind is bool and not isinstance(value, bool):
        raise ConfigError(f"field {key!r}: expected true or false, got {value!r}")
    return value


def build_run(config, seed_override=None):
    """Validate a parsed config into (SetupSpec, policies, budgets, options)."""
    try:
        spec = SetupSpec(
            name=_field(config, "setup", str, None),
            K=_field(config, "K", int, 20),
            reward_kind=_field(config, "reward_kind", str, None),
            explicit_means=_field(config, "means", list, None),
            instance_draws=_field(config, "instance_draws", int, None),
            sigma_sq=_field(config, "sigma_sq", float, 1.0),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"setup fields: {exc}") from None

    mode = _field(config, "variance_mode", str, "estimated")
    if mode not in ("estimated", "known"):
        raise ConfigError(f"field 'variance_mode': expected 'estimated' or 'known', got {mode!r}")
    labels = _field(config, "policies", list, None)
    if not labels:
        raise ConfigError("field 'policies': need at least one policy")
    if len(set(labels)) != len(labels):
        raise ConfigError("field 'policies': duplicate policy names")
    policies = {}
    for name in labels:
        try:
            policy = make_policy(str(name))
        except ValueError as exc:
            raise ConfigError(f"field 'policies': {exc}") from None
        if str(name) == "RUE" and mode == "known":
            policy.set_params(variance_mode="known")
        policies[str(name)] = policy

    budgets = _field(config, "budgets", list, None)
    if not budgets:
        raise ConfigError("field 'budgets': need at least one budget")
    for token in budgets:
        try:
            resolve_budget(token, 1.0)
        except ValueError as exc:
            raise ConfigError(f"field 'budgets': {exc}") from None

    replications = _field(config, "replications", int, DEFAULT_REPLICATIONS)
    base_seed = _field(config, "base_seed", int, 0)
    if seed_override is not None:
        base_seed = seed_override
    if replications < 1:
        raise ConfigError("field 'replications': must be at least 1")
    if base_seed < 0:
        raise ConfigError("field 'base_seed': must be non-negative")
    options = {
        "replications": replications,
        "base_seed": base_seed,
        "variance_mode": mode,
        "output_dir": _field(config, "output_dir", str, None),
        "emit_trace": _field(config, "emit_trace", bool, False),
    }
    return spec, policies, [b if isinstance(b, int) else str(b) for b in budgets], options


def cell_rows(result):
    for c in result.cells:
        yield {
            "setup": c.setup,
            "instance_idx": c.instance_idx,
            "policy": c.policy,
            "budget": c.budget,
            "replications": c.replications,
            "errors": c.errors,
            "error_prob": c.error_prob,
            "stderr": c.stderr,
            "mean_simple_regret": c.mean_simple_regret,
            "base_seed": c.base_seed,
            "budget_token": c.budget_token,
            "status": c.status,
        }


def write_meta(path, spec, policies, budgets, options, result):
    instances = []
    for i, (inst, H) in enumerate(zip(result.instances, result.complexities)):
        resolved = {}
        for token in budgets:
            try:
                resolved[str(token)] = resolve_budget(token, H)
            except ValueError:
                resolved[str(token)] = None
        instances.append(
            {
                "instance_idx": i,
                "means": [float(m) for m in inst.means],
                "best_arm": inst.best_arm,
                "H": H if math.isfinite(H) else None,
                "budgets": resolved,
            }
        )
    finite_H = [H for H in result.complexities if math.isfinite(H)]
    meta = {
        "version": __version__,
        "config": {
            "setup": spec.name,
            "K": spec.K,
            "reward_kind": spec.reward_kind,
            "means": list(spec.explicit_means) if spec.explicit_means else None,
            "instance_draws": spec.instance_draws,
            "sigma_sq": spec.sigma_sq,
            "policies": {label: policies[label].get_params() for label in sorted(policies)},
            "budgets": [str(b) for b in budgets],
            **{k: v for k, v in options.items() if k != "output_dir"},
        },
        "median_H": float(np.median(finite_H)) if finite_H else None,
        "instances": instances,
        "notes": [
            "UCBE uses a = 2 n / H computed from the true means, which a real learner cannot know.",
            "Symbolic budgets resolve per instance: H/2 -> ceil(H/2), H -> ceil(H), 2H -> 2 ceil(H).",
        ],
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (PriorSpec, NoiseSpec)):
        return {k: getattr(value, k) for k in value.__dataclass_fields__}
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def write_traces(path, result):
    with open(path, "w") as fh:
        fh.write("setup,instance_idx,policy,budget,replication,arms\n")
        for c in result.cells:
            for r, trace in enumerate(c.traces or []):
                arms = " ".join(map(str, trace.tolist()))
                fh.write(f"{c.setup},{c.instance_idx},{c.policy},{c.budget},{r},{arms}\n")


def cmd_run(args):
    config = load_config(args.config)
    spec, policies, budgets, options = build_run(config, args.seed)
    out = Path(args.output_dir or options["output_dir"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    result = run_experiment(
        spec,
        policies,
        budgets,
        replications=options["replications"],
        base_seed=options["base_seed"],
        n_jobs=args.threads,
        record_trace=options["emit_trace"],
    )
    write_csv(out / "cells.csv", CELL_COLUMNS, cell_rows(result))
    write_meta(out / "meta.json", spec, policies, budgets, options, result)
    if options["emit_trace"]:
        write_traces(out / "traces.csv", result)
    for c in result.cells:
        if not c.ok:
            print(f"{c.policy} budget={c.budget_token} instance={c.instance_idx}: {c.status}", file=sys.stderr)
    return EXIT_RUNTIME if result.failed else EXIT_OK


# ---------------------------------------------------------------------------
# theory


THEORY_COLUMNS = [
    "n",
    "K",
    "sigma0_sq",
    "sigma_sq",
    "H_b",
    "c_K",
    "c_K_in_domain",
    "theorem2_bound",
    "theorem2_clamped",
    "theorem2_in_domain",
    "theorem3_bound",
    "theorem3_in_domain",
    "H",
    "ucbe_upper_bound",
    "ucbe_upper_clamped",
    "small_gap_threshold",
    "small_gap_threshold_lower",
    "gap",
    "full_info_error_exact",
    "full_info_error_lower",
    "full_info_lower_in_domain",
]


def _budgets(args):
    if args.n:
        return args.n
    if args.n_step < 1:
        raise ConfigError("--n-step must be positive")
    return list(range(args.n_min, args.n_max + 1, args.n_step))


def theory_rows(K, ns, prior, noise, H=None, gap=None):
    nan = math.nan
    H_b = bayes_complexity(K, prior, noise)
    ck, ck_ok = c_K(K), c_K_in_domain(K)
    for n in ns:
        row = {"n": n, "K": K, "sigma0_sq": prior.sigma0_sq, "sigma_sq": noise.sigma_sq}
        row.update(H_b=H_b, c_K=ck, c_K_in_domain=ck_ok, H=H if H is not None else nan, gap=gap if gap is not None else nan)
        t2_ok = n > 4 * (K - 1)
        row["theorem2_in_domain"] = t2_ok
        row["theorem2_bound"] = theorem2_bound(n, K, prior, noise) if t2_ok else nan
        row["theorem2_clamped"] = clamp_probability(row["theorem2_bound"]) if t2_ok else nan
        row["theorem3_in_domain"] = t2_ok
        row["theorem3_bound"] = theorem3_bound(n, K, prior, noise) if t2_ok else nan
        if H is not None:
            row["ucbe_upper_bound"] = ucbe_upper_bound(n, K, H)
            row["ucbe_upper_clamped"] = clamp_probability(row["ucbe_upper_bound"])
        else:
            row["ucbe_upper_bound"] = row["ucbe_upper_clamped"] = nan
        row["small_gap_threshold"] = small_gap_threshold(n) if n >= 2 else nan
        row["small_gap_threshold_lower"] = small_gap_threshold(n, "lower") if n >= 2 else nan
        if gap is not None:
            row["full_info_error_exact"] = full_info_error_exact(n, gap, noise.sigma_sq)
            row["full_info_error_lower"] = full_info_error_lower(n, gap, noise.sigma_sq)
            row["full_info_lower_in_domain"] = full_info_lower_in_domain(n, gap, noise.sigma_sq)
        else:
            row["full_info_error_exact"] = row["full_info_error_lower"] = nan
            row["full_info_lower_in_domain"] = False
        yield row


def cmd_theory(args):
    if args.K < 2:
        raise ConfigError("--K must be at least 2")
    try:
        prior = PriorSpec(0.0, args.sigma0_sq)
        noise = NoiseSpec(args.sigma_sq * args.delta, args.delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ns = _budgets(args)
    if any(n < 1 for n in ns):
        raise ConfigError("budgets must be positive")
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / args.out, THEORY_COLUMNS, theory_rows(args.K, ns, prior, noise, args.H, args.gap))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


ORACLE_COLUMNS = ["K", "sigma0", "alpha", "samples", "empirical", "stderr", "bound", "pass"]


def oracle_rows(K, sigma0, alphas, samples, seed):
    for i, alpha in enumerate(alphas):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        p = gap_oracle(K, sigma0, alpha, samples, rng)
        se = math.sqrt(p * (1.0 - p) / samples)
        bound = gap_probability_bound(alpha, sigma0, K)
        yield {
            "K": K,
            "sigma0": sigma0,
            "alpha": alpha,
            "samples": samples,
            "empirical": p,
            "stderr": se,
            "bound": bound,
            "pass": p <= bound + 3.0 * se,
        }


def cmd_oracle(args):
    if args.samples < 1:
        raise ConfigError("--samples must be at least 1")
    if args.K < 2 or args.sigma0 <= 0 or any(a < 0 for a in args.alphas):
        raise ConfigError("need K >= 2, sigma0 > 0 and non-negative alphas")
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    seed = 0 if args.seed is None else args.seed
    write_csv(out / args.out, ORACLE_COLUMNS, oracle_rows(args.K, args.sigma0, args.alphas, args.samples, seed))
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot-data


def read_cells(paths):
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in CELL_COLUMNS if c not in header]
            extra = [c for c in header if c not in CELL_COLUMNS]
            if missing or extra:
                parts = []
                if missing:
                    parts.append(f"missing {', '.join(missing)}")
                if extra:
                    parts.append(f"unexpected {', '.join(extra)}")
                raise ConfigError(f"{path}: schema mismatch: {'; '.join(parts)}")
            rows.extend(reader)
    return rows


def pool_cells(rows):
    """One row per (setup, budget token) with replication-weighted error
    probability and stderr per policy. Skipped and failed cells are ignored."""
    totals = {}
    policies = set()
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["setup"], row["budget_token"])
        reps, errs = totals.setdefault(key, {}).get(row["policy"], (0, 0))
        totals[key][row["policy"]] = (reps + int(row["replications"]), errs + int(row["errors"]))
        policies.add(row["policy"])
    policies = sorted(policies)
    columns = ["setup", "budget"]
    for p in policies:
        columns += [f"{p}_error_prob", f"{p}_stderr"]
    out = []
    for (setup, budget), per_policy in sorted(totals.items(), key=_pool_order):
        row = {"setup": setup, "budget": budget}
        for p in policies:
            reps, errs = per_policy.get(p, (0, 0))
            prob = errs / reps if reps else math.nan
            row[f"{p}_error_prob"] = prob
            row[f"{p}_stderr"] = math.sqrt(prob * (1 - prob) / reps) if reps else math.nan
        out.append(row)
    return columns, out


def _pool_order(item):
    setup, token = item[0]
    symbolic = {"H/2": 0.5, "H": 1.0, "2H": 2.0}
    return (setup, 0, symbolic[token], token) if token in symbolic else (setup, 1, float(token), token)


def cmd_plot_data(args):
    columns, rows = pool_cells(read_cells(args.cells))
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / args.out, columns, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _global_flags(suppress):
    # Subcommands repeat the global flags without defaults so that a flag
    # given before the subcommand is not reset by the subparser.
    def default(value):
        return argparse.SUPPRESS if suppress else value

    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=default(None), help="base seed (overrides the config)")
    flags.add_argument("--threads", type=int, default=default(1), help="worker threads; never changes results")
    flags.add_argument("--output-dir", default=default(None), help="directory for output files")
    return flags


def build_parser():
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="rue-bai", description=__doc__.split("\n")[0], parents=[_global_flags(suppress=False)]
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a Monte Carlo experiment from a YAML config")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)

    theory = sub.add_parser("theory", parents=[common], help="tabulate closed-form bounds over budgets")
    theory.add_argument("--K", type=int, required=True)
    theory.add_argument("--n", type=int, nargs="+", help="explicit budgets")
    theory.add_argument("--n-min", type=int, default=1000)
    theory.add_argument("--n-max", type=int, default=10000)
    theory.add_argument("--n-step", type=int, default=1000)
    theory.add_argument("--sigma0-sq", type=float, default=1.0)
    theory.add_argument("--sigma-sq", type=float, default=1.0, help="working noise variance")
    theory.add_argument("--delta", type=float, default=1.0, help="likelihood inflation in (0, 1]")
    theory.add_argument("--H", type=float, default=None, help="gap complexity for the UCB-E bound")
    theory.add_argument("--gap", type=float, default=None, help="two-arm gap for the full-information columns")
    theory.add_argument("--out", default="theory.csv")
    theory.set_defaults(func=cmd_theory)

    oracle = sub.add_parser("oracle", parents=[common], help="check the prior-gap bound by Monte Carlo")
    oracle.add_argument("--K", type=int, required=True)
    oracle.add_argument("--sigma0", type=float, default=1.0)
    oracle.add_argument("--alphas", type=float, nargs="+", required=True)
    oracle.add_argument("--samples", type=int, default=100_000)
    oracle.add_argument("--out", default="oracle.csv")
    oracle.set_defaults(func=cmd_oracle)

    plot = sub.add_parser("plot-data", parents=[common], help="pool cells.csv files into a figure-ready table")
    plot.add_argument("cells", nargs="+")
    plot.add_argument("--out", default="plot_data.csv")
    plot.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
