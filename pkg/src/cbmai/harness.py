"""Monte Carlo error-rate experiments."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algorithms import ALGORITHMS, run_algorithm
from .model import AssumptionError, Instance, true_optimum

# each algorithm draws from its own block of trial seeds
ALGORITHM_OFFSETS = {"sfsr-iv": 0, "sfsr-l": 1, "uslp": 2}
SEED_STRIDE = 10**7
Z95 = 1.96

CSV_HEADER = ("instance", "algorithm", "budget", "trials", "errors", "error_rate", "ci_low", "ci_high", "base_seed")


@dataclass(frozen=True)
class ExperimentSpec:
    instance: Instance
    algorithms: tuple[str, ...]
    budgets: tuple[int, ...]
    trials: int
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "budgets", tuple(int(n) for n in self.budgets))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        for name in self.algorithms:
            if name not in ALGORITHM_OFFSETS:
                raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
        for n in self.budgets:
            if n <= self.instance.num_unknown:
                raise ValueError(f"budget {n} must exceed K0={self.instance.num_unknown}")


@dataclass(frozen=True)
class CellResult:
    instance: str
    algorithm: str
    budget: int
    trials: int
    errors: int
    error_rate: float
    ci_low: float
    ci_high: float
    base_seed: int


def ci95(errors: int, trials: int) -> tuple[float, float]:
    """Normal-approximation 95% interval for a binomial proportion, clamped to [0, 1]."""
    if trials < 1 or not 0 <= errors <= trials:
        raise ValueError(f"need 0 <= errors <= trials and trials >= 1, got {errors}/{trials}")
    p = errors / trials
    half = Z95 * math.sqrt(p * (1.0 - p) / trials)
    return max(0.0, p - half), min(1.0, p + half)


def trial_seed(base_seed: int, algorithm: str, trial: int) -> int:
    return base_seed + ALGORITHM_OFFSETS[algorithm] * SEED_STRIDE + trial


def trial_rng(base_seed: int, algorithm: str, budget: int, trial: int) -> np.random.Generator:
    # the budget is mixed in so that cells never share a stream
    return np.random.default_rng([trial_seed(base_seed, algorithm, trial), budget])


def _count_errors(instance: Instance, target, algorithm: str, budget: int, base_seed: int, trials: int) -> int:
    errors = 0
    for t in range(trials):
        out = run_algorithm(algorithm, instance, budget, trial_rng(base_seed, algorithm, budget, t))
        if out.support != target:
            errors += 1
    return errors


def _cell(args) -> CellResult:
    instance, target, algorithm, budget, base_seed, trials = args
    errors = _count_errors(instance, target, algorithm, budget, base_seed, trials)
    low, high = ci95(errors, trials)
    return CellResult(instance.name, algorithm, budget, trials, errors, errors / trials, low, high, base_seed)


def run_trials(spec: ExperimentSpec, jobs: int = 1, force: bool = False) -> list[CellResult]:
    """Error rate of every (algorithm, budget) cell.

    A run is correct only if it returns exactly the optimal basis, or the
    infeasibility verdict on an infeasible instance. Results do not depend on
    ``jobs``.
    """
    optimum = true_optimum(spec.instance)
    if optimum.feasible and not optimum.assumption_ok and not force:
        raise AssumptionError(
            f"instance {spec.instance.name!r} fails the uniqueness check ({'; '.join(optimum.notes)}); "
            "pass force=True to run anyway"
        )
    target = optimum.basis
    cells = [
        (spec.instance, target, algo, budget, spec.base_seed, spec.trials)
        for algo in spec.algorithms
        for budget in spec.budgets
    ]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]


def decay_fit(results: Iterable[CellResult]) -> float:
    """Least-squares slope of log(error rate) against budget.

    Cells with error rate 0 or 1 carry no slope information and are skipped.
    """
    points = [(r.budget, r.error_rate) for r in results if 0.0 < r.error_rate < 1.0]
    if len(points) < 3:
        raise ValueError(f"need at least 3 cells with error rate in (0, 1), got {len(points)}")
    budgets, rates = np.array(points, dtype=float).T
    return float(np.polyfit(budgets, np.log(rates), 1)[0])


def write_csv(results: Sequence[CellResult], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in results:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, f) for f in CSV_HEADER)])


def read_csv(path: str | Path) -> list[CellResult]:
    types = {f.name: f.type for f in fields(CellResult)}
    casts = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [CellResult(**{k: casts[types[k]](v) for k, v in row.items()}) for row in reader]
