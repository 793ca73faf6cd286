import math

import numpy as np
import pytest

from rue_bai.core import BERNOULLI, GAUSSIAN
from rue_bai.experiments import (
    SetupSpec,
    aggregate_relative,
    cell_seed,
    fixed_means,
    generate_setup,
    make_policy,
    resolve_budget,
    run_experiment,
)
from rue_bai.policies import RUE, SequentialHalving, UniformAllocation
from rue_bai.theory import InfiniteComplexityError


def test_fixed_recipes():
    np.testing.assert_array_equal(fixed_means("F1", 20), [0.5] + [0.45] * 19)
    f2 = fixed_means("F2", 20)
    assert list(f2[1:8]) == [0.45] * 7 and list(f2[8:]) == [0.3] * 12
    f3 = fixed_means("F3", 20)
    assert list(f3[1:5]) == [0.48] * 4 and list(f3[5:13]) == [0.4] * 8 and list(f3[13:]) == [0.3] * 7
    f4 = fixed_means("F4", 20)
    assert f4[1] == pytest.approx(0.49) and f4[-1] == pytest.approx(0.25)
    np.testing.assert_allclose(np.diff(f4[1:]), np.diff(f4[1:])[0])
    gaps5 = 0.5 - fixed_means("F5", 20)[1:]
    assert gaps5[0] == pytest.approx(0.01) and gaps5[-1] == pytest.approx(0.25)
    np.testing.assert_allclose(gaps5[1:] / gaps5[:-1], gaps5[1] / gaps5[0])
    f6 = fixed_means("F6", 20)
    assert f6[1] == pytest.approx(0.495) and list(f6[2:]) == [0.45] * 18
    for name in ("F1", "F2", "F3", "F4", "F5", "F6"):
        inst = generate_setup(SetupSpec(name))[0]
        assert inst.best_mean == 0.5 and inst.best_arm == 0
        assert inst.reward_kind == BERNOULLI


def test_setup_spec_validation():
    with pytest.raises(ValueError):
        SetupSpec("F1", K=1)
    with pytest.raises(ValueError):
        SetupSpec("Custom")
    with pytest.raises(ValueError):
        SetupSpec("F2", instance_draws=3)
    assert SetupSpec("R1").reward_kind == GAUSSIAN
    assert SetupSpec("R2").reward_kind == BERNOULLI
    assert SetupSpec("R3").instance_draws == 50
    assert SetupSpec("Custom", explicit_means=[0.1, 0.4]).K == 2


def test_random_setups():
    insts = generate_setup(SetupSpec("R1"), np.random.default_rng(0))
    assert len(insts) == 50
    assert all(np.all((i.means > 0) & (i.means < 0.5)) for i in insts)


def test_r1_r2_share_means_r3_does_not():
    kw = dict(policies=["Uniform"], budgets=[100], replications=1, base_seed=4)
    r1 = run_experiment(SetupSpec("R1", instance_draws=3), **kw)
    r2 = run_experiment(SetupSpec("R2", instance_draws=3), **kw)
    r3 = run_experiment(SetupSpec("R3", instance_draws=3), **kw)
    for a, b, c in zip(r1.instances, r2.instances, r3.instances):
        np.testing.assert_array_equal(a.means, b.means)
        assert not np.array_equal(a.means, c.means)
    # Means uniform on (0, 0.5) with K=20 put the population median of H near
    # 8000; the median of 50 draws spreads roughly over 4000-20000 and more.
    median_H = np.median(run_experiment(SetupSpec("R1"), **kw).complexities)
    assert 2000 < median_H < 50_000


def test_resolve_budget():
    assert resolve_budget("H/2", 3500) == 1750
    assert resolve_budget("H", 3500) == 3500
    assert resolve_budget("2H", 3500) == 7000
    assert resolve_budget("2H", 3500.2) == 7002
    assert resolve_budget(123, 1.0) == 123
    assert resolve_budget("123", 1.0) == 123
    with pytest.raises(InfiniteComplexityError):
        resolve_budget("H", math.inf)
    with pytest.raises(ValueError):
        resolve_budget("3H", 10.0)


def test_deterministic_means_give_zero_error():
    spec = SetupSpec("Custom", explicit_means=[1.0, 0.0], reward_kind=BERNOULLI)
    result = run_experiment(spec, {"Uniform": UniformAllocation()}, [2], replications=1)
    cell = result.cells[0]
    assert cell.error_prob == 0 and cell.errors == 0 and cell.mean_simple_regret == 0


def test_same_seed_bit_identical_and_order_free():
    spec = SetupSpec("F3")
    a = run_experiment(spec, ["RUE", "SH", "UCBE"], ["H/2", 500], replications=20, base_seed=5)
    b = run_experiment(spec, ["UCBE", "RUE", "SH"], [500, "H/2"], replications=20, base_seed=5, n_jobs=3)
    key = lambda c: (c.policy, c.budget_token)
    for x, y in zip(sorted(a.cells, key=key), sorted(b.cells, key=key)):
        assert (x.errors, x.mean_simple_regret) == (y.errors, y.mean_simple_regret)
        np.testing.assert_array_equal(x.chosen_arms, y.chosen_arms)
    c = run_experiment(spec, ["RUE"], [500], replications=20, base_seed=6)
    assert not np.array_equal(c.cell("RUE", 500).chosen_arms, a.cell("RUE", 500).chosen_arms)


def test_cell_seed_depends_on_identity():
    states = {
        tuple(cell_seed(0, *args).generate_state(2))
        for args in [(0, "RUE", 100, 0), (1, "RUE", 100, 0), (0, "SH", 100, 0), (0, "RUE", 101, 0), (0, "RUE", 100, 1)]
    }
    assert len(states) == 5


def test_cell_accounting():
    result = run_experiment(SetupSpec("F2"), ["SR", "Uniform"], [300], replications=37, base_seed=1)
    for c in result.cells:
        assert c.error_prob * c.replications == c.errors
        assert 0 <= c.error_prob <= 1 and c.stderr >= 0 and c.mean_simple_regret >= 0
        assert c.stderr == pytest.approx(math.sqrt(c.error_prob * (1 - c.error_prob) / 37))


def test_invalid_budget_is_skipped():
    result = run_experiment(SetupSpec("F1"), ["RUE", "SH", "Uniform"], [30], replications=3)
    status = {c.policy: c.status for c in result.cells}
    assert status["RUE"].startswith("skipped") and status["SH"].startswith("skipped")
    assert status["Uniform"] == "ok"
    assert not result.failed


def test_symbolic_budget_with_zero_gap_is_skipped():
    spec = SetupSpec("Custom", explicit_means=[0.3, 0.3])
    result = run_experiment(spec, ["Uniform", "UCBE"], ["H", 10], replications=2)
    status = {(c.policy, c.budget_token): c.status for c in result.cells}
    assert status[("Uniform", "H")].startswith("skipped")
    assert status[("UCBE", "10")].startswith("skipped")
    assert status[("Uniform", "10")] == "ok"


def test_crashing_cell_is_reported():
    class Broken(UniformAllocation):
        label = "Broken"

        def _run(self, env, random_state):
            raise RuntimeError("boom")

    result = run_experiment(SetupSpec("F1"), {"Broken": Broken(), "Uniform": UniformAllocation()}, [40], replications=2)
    assert result.failed
    assert result.cell("Broken", 40).status.startswith("failed")


def test_known_mode_gets_instance_variances():
    result = run_experiment(SetupSpec("F2"), {"RUE-known": RUE(variance_mode="known")}, [200], replications=5)
    assert result.cells[0].ok


@pytest.mark.slow
def test_rue_error_decreases_with_budget_on_f2():
    result = run_experiment(SetupSpec("F2"), ["RUE"], [1750, 3500, 7000], replications=1000, base_seed=3)
    errs = [result.cell("RUE", b).error_prob for b in (1750, 3500, 7000)]
    assert errs[0] > errs[1] > errs[2]


def test_aggregate_relative():
    spec = SetupSpec("F2")
    result = run_experiment(spec, {"SH": SequentialHalving(), "SH2": SequentialHalving()}, [400], replications=30)
    # Different labels draw different streams; compare a policy with itself instead.
    same = aggregate_relative(result, "SH", "SH")
    assert all(r.difference == 0 for r in same)
    with pytest.raises(KeyError):
        aggregate_relative(result, "SH", "RUE")
    det = run_experiment(SetupSpec("Custom", explicit_means=[1.0, 0.0], reward_kind=BERNOULLI),
                         ["Uniform", "SR"], [4], replications=3)
    (row,) = aggregate_relative(det, "Uniform", "SR")
    assert not row.ratio_defined and math.isnan(row.ratio) and row.difference == 0


def test_make_policy():
    assert make_policy("RUE").variance_mode == "estimated"
    assert make_policy("RUE-known").variance_mode == "known"
    with pytest.raises(ValueError):
        make_policy("TS")
