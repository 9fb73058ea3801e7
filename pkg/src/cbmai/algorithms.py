"""Successive-reject identification (IV and Lagrangian scores) and the USLP baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import lp
from .model import EmpiricalState, Instance, empirical_lp

IV = "iv"
LAGRANGIAN = "lagrangian"
FLAVORS = (IV, LAGRANGIAN)


class BudgetError(ValueError):
    """The budget cannot support the requested sampling schedule."""


@dataclass(frozen=True)
class Schedule:
    rounds: tuple[int, ...]
    cumulative: tuple[int, ...]


def psi(num_unknown: int, num_constraints: int) -> Fraction:
    return sum(
        (Fraction(1, max(2, j - num_constraints)) for j in range(1, num_unknown + 1)),
        Fraction(0),
    )


def pull_schedule(budget: int, num_arms: int, num_unknown: int, num_constraints: int) -> Schedule:
    """Per-round pull counts for successive reject.

    ``n_k = ceil((N - K0) / (psi * (K + 1 - k)))`` for ``k = 1..K-1``,
    evaluated in exact rational arithmetic so the ceiling never misfires.
    """
    if budget <= num_unknown:
        raise BudgetError(f"budget N={budget} must exceed the number of unknown arms K0={num_unknown}")
    scale = psi(num_unknown, num_constraints)
    cumulative = tuple(
        math.ceil(Fraction(budget - num_unknown) / (scale * (num_arms + 1 - k)))
        for k in range(1, num_arms)
    )
    rounds = tuple(n - prev for n, prev in zip(cumulative, (0,) + cumulative[:-1]))
    return Schedule(rounds, cumulative)


def iv_scores(mu: np.ndarray, matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Best feasible-basis value among bases containing each column; -inf if none."""
    table = lp.evaluate_bases(matrix, rhs, mu)
    scores = np.full(matrix.shape[1], -np.inf)
    for j in range(table.combos.shape[1]):
        np.maximum.at(scores, table.combos[:, j], table.values)
    return scores


def lagrangian_scores(mu: np.ndarray, matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Reduced costs under the empirical dual optimum; all -inf if the primal is infeasible."""
    solution = lp.solve_arrays(matrix, rhs, mu)
    if solution is None:
        return np.full(matrix.shape[1], -np.inf)
    _, reduced = lp.dual_from_basis(matrix, mu, solution.basis)
    return reduced


SCORERS = {IV: iv_scores, LAGRANGIAN: lagrangian_scores}


@dataclass(frozen=True, eq=False)
class Identification:
    """Algorithm output: a basis (sorted, may contain slacks) or ``None`` for infeasible."""

    support: tuple[int, ...] | None
    mixture: np.ndarray | None = None
    pulls: int = 0
    rounds: int = 0

    @property
    def infeasible(self) -> bool:
        return self.support is None


def sfsr_run(
    instance: Instance, budget: int, flavor: str = IV, rng: np.random.Generator | None = None
) -> Identification:
    if flavor not in SCORERS:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    score = SCORERS[flavor]
    rng = np.random.default_rng() if rng is None else rng
    k, k0, l = instance.num_arms, instance.num_unknown, instance.num_constraints
    schedule = pull_schedule(budget, k, k0, l)
    state = EmpiricalState.empty(instance)
    remaining = list(range(k + l))
    for round_no, pulls in enumerate(schedule.rounds, start=1):
        for arm in remaining:
            if arm >= k0:
                break
            state.pull(instance, arm, pulls, rng)
        mu, matrix, rhs = empirical_lp(state, instance)
        scores = score(mu[remaining], matrix[:, remaining], rhs)
        if scores.max() == -np.inf:
            return Identification(None, pulls=state.total_pulls, rounds=round_no)
        del remaining[int(np.argmin(scores))]

    mixture = None
    if all(state.pull_counts[a] > 0 for a in remaining if a < k0):
        mu, matrix, rhs = empirical_lp(state, instance)
        sub = matrix[:, remaining]
        if abs(np.linalg.det(sub)) > lp.EPS_SING:
            mixture = np.linalg.solve(sub, rhs)
    return Identification(tuple(remaining), mixture, state.total_pulls, len(schedule.rounds))


def uslp_run(instance: Instance, budget: int, rng: np.random.Generator | None = None) -> Identification:
    """Uniform sampling of the unknown arms, then one empirical LP solve."""
    rng = np.random.default_rng() if rng is None else rng
    per_arm = budget // instance.num_unknown
    if per_arm < 1:
        raise BudgetError(f"budget N={budget} gives zero pulls per unknown arm")
    state = EmpiricalState.empty(instance)
    for arm in range(instance.num_unknown):
        state.pull(instance, arm, per_arm, rng)
    mu, matrix, rhs = empirical_lp(state, instance)
    solution = lp.solve_arrays(matrix, rhs, mu)
    if solution is None:
        return Identification(None, pulls=state.total_pulls)
    return Identification(solution.basis, solution.x[list(solution.basis)], state.total_pulls)


ALGORITHMS = ("sfsr-iv", "sfsr-l", "uslp")


def run_algorithm(name: str, instance: Instance, budget: int, rng: np.random.Generator) -> Identification:
    if name == "sfsr-iv":
        return sfsr_run(instance, budget, IV, rng)
    if name == "sfsr-l":
        return sfsr_run(instance, budget, LAGRANGIAN, rng)
    if name == "uslp":
        return uslp_run(instance, budget, rng)
    raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
