import math

import numpy as np
import pytest

from cbmai import harness
from cbmai.catalog import builtin_instance
from cbmai.harness import CellResult, ExperimentSpec, ci95, decay_fit, run_trials
from cbmai.model import AssumptionError, Instance


@pytest.mark.parametrize(
    "errors, trials, expected",
    [(0, 100, (0.0, 0.0)), (50, 100, (0.402, 0.598)), (100, 100, (1.0, 1.0))],
)
def test_ci95_examples(errors, trials, expected):
    assert ci95(errors, trials) == pytest.approx(expected, abs=1e-9)


def test_ci95_is_clamped_and_brackets_rate():
    for errors in range(0, 31):
        low, high = ci95(errors, 30)
        assert 0.0 <= low <= errors / 30 <= high <= 1.0
    with pytest.raises(ValueError):
        ci95(5, 4)


def _cells(rates, budgets=(1000, 2000, 3000)):
    return [CellResult("x", "sfsr-iv", n, 1000, 0, r, 0, 1, 0) for n, r in zip(budgets, rates)]


def test_decay_fit_geometric():
    assert decay_fit(_cells([0.4, 0.2, 0.1])) == pytest.approx(-math.log(2) / 1000)


def test_decay_fit_constant():
    assert decay_fit(_cells([0.3, 0.3, 0.3])) == pytest.approx(0.0, abs=1e-15)


def test_decay_fit_needs_three_points():
    with pytest.raises(ValueError):
        decay_fit(_cells([0.4, 0.2]))
    # zero and one rates carry no slope information
    with pytest.raises(ValueError):
        decay_fit(_cells([0.4, 0.0, 0.2, 1.0], budgets=(1, 2, 3, 4)))


def test_trial_seeds_are_disjoint_across_algorithms():
    seeds = {
        harness.trial_seed(5, algo, t)
        for algo in harness.ALGORITHM_OFFSETS
        for t in range(1000)
    }
    assert len(seeds) == 3000
    assert harness.trial_seed(5, "uslp", 7) == 5 + 2 * 10**7 + 7


def test_spec_validation():
    inst = builtin_instance("E1")
    with pytest.raises(ValueError):
        ExperimentSpec(inst, ("sfsr-iv",), (100,), 0)
    with pytest.raises(ValueError):
        ExperimentSpec(inst, ("sfsr-iv",), (2,), 10)
    with pytest.raises(ValueError):
        ExperimentSpec(inst, ("thompson",), (100,), 10)


def test_run_is_deterministic_and_consistent():
    spec = ExperimentSpec(builtin_instance("E1"), ("sfsr-iv", "sfsr-l", "uslp"), (6, 20), 300, base_seed=3)
    first, second = run_trials(spec), run_trials(spec)
    assert first == second
    for cell in first:
        assert cell.errors <= cell.trials
        assert cell.ci_low <= cell.error_rate <= cell.ci_high
        assert cell.error_rate == cell.errors / cell.trials


def test_parallel_matches_serial():
    spec = ExperimentSpec(builtin_instance("E1"), ("sfsr-iv", "uslp"), (8, 16), 100, base_seed=1)
    assert run_trials(spec, jobs=2) == run_trials(spec)


def test_noise_free_infeasible_instance_never_errs():
    inst = builtin_instance("E2").replace(sigma_r=0.0, sigma_c=0.0)
    cells = run_trials(ExperimentSpec(inst, ("sfsr-iv", "sfsr-l", "uslp"), (10, 1000), 50))
    assert all(c.errors == 0 for c in cells)


def test_refuses_ill_posed_instance():
    tied = Instance([0.5, 0.5, 0.1], [[0.2, 0.2, 0.9]], [1.0], name="tied")
    spec = ExperimentSpec(tied, ("uslp",), (30,), 5)
    with pytest.raises(AssumptionError):
        run_trials(spec)
    assert len(run_trials(spec, force=True)) == 1


def test_csv_round_trip(tmp_path):
    spec = ExperimentSpec(builtin_instance("E1"), ("sfsr-iv", "uslp"), (5, 9), 70, base_seed=4)
    cells = run_trials(spec)
    path = tmp_path / "out.csv"
    harness.write_csv(cells, path)
    assert path.read_text().splitlines()[0] == ",".join(harness.CSV_HEADER)
    assert harness.read_csv(path) == cells


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        harness.read_csv(path)


def test_budget_is_part_of_the_stream():
    a = harness.trial_rng(0, "sfsr-iv", 100, 0).standard_normal(4)
    b = harness.trial_rng(0, "sfsr-iv", 200, 0).standard_normal(4)
    c = harness.trial_rng(0, "sfsr-iv", 100, 0).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)
