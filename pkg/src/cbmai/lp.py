"""Small dense LP machinery built on exhaustive basis enumeration.

The problems handled here are the standard-form programs

    max  mu^T x   s.t.  A x = b,  x >= 0

where ``A`` has ``L + 1`` rows: one per cost constraint (with a slack column)
plus the simplex row ``1^T p = 1``. With at most a few dozen variables every
basis can be enumerated, which is both the primal solver and the engine behind
the intersection-value scores.

Indices are 0-based throughout: arms are ``0..K-1`` and the slack of
constraint ``l`` is variable ``K + l``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .model import Instance

EPS_SING = 1e-10
EPS_FEAS = 1e-9
EPS_LIN = 1e-9
EPS_VAL = 1e-9

Basis = tuple[int, ...]


class SingularBasisError(ValueError):
    """The basis submatrix is (numerically) singular."""


@dataclass(frozen=True, eq=False)
class StandardLp:
    num_arms: int
    num_constraints: int
    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def num_vars(self) -> int:
        return self.num_arms + self.num_constraints

    @property
    def basis_size(self) -> int:
        return self.num_constraints + 1


class BasisStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    SINGULAR = "singular"


@dataclass(frozen=True, eq=False)
class BasicSolution:
    status: BasisStatus
    values: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.status is BasisStatus.FEASIBLE


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Optimal vertex of a feasible standard-form LP."""

    value: float
    basis: Basis
    x: np.ndarray


def standard_form_arrays(
    rewards: np.ndarray, costs: np.ndarray, cost_bounds: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(mu, A, b)`` for rewards of shape (K,), costs (L, K), bounds (L,)."""
    rewards = np.asarray(rewards, dtype=float)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    num_constraints, num_arms = costs.shape
    mu = np.concatenate([rewards, np.zeros(num_constraints)])
    matrix = np.zeros((num_constraints + 1, num_arms + num_constraints))
    matrix[:num_constraints, :num_arms] = costs
    matrix[:num_constraints, num_arms:] = np.eye(num_constraints)
    matrix[num_constraints, :num_arms] = 1.0
    rhs = np.append(np.asarray(cost_bounds, dtype=float), 1.0)
    return mu, matrix, rhs


def build_standard_form(instance: Instance) -> StandardLp:
    mu, matrix, rhs = standard_form_arrays(
        instance.rewards, instance.costs, instance.cost_bounds
    )
    return StandardLp(instance.num_arms, instance.num_constraints, mu, matrix, rhs)


def as_basis(indices: Sequence[int], size: int | None = None, num_vars: int | None = None) -> Basis:
    basis = tuple(sorted(int(i) for i in indices))
    if len(set(basis)) != len(basis):
        raise ValueError(f"basis has repeated indices: {indices!r}")
    if size is not None and len(basis) != size:
        raise ValueError(f"basis must have exactly {size} members, got {len(basis)}")
    if num_vars is not None and basis and (basis[0] < 0 or basis[-1] >= num_vars):
        raise ValueError(f"basis indices out of range [0, {num_vars}): {basis}")
    return basis


@lru_cache(maxsize=256)
def combinations_array(n: int, k: int) -> np.ndarray:
    """All k-subsets of range(n) in lexicographic order, shape (C(n, k), k)."""
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    combos = combos.reshape(-1, k)
    combos.setflags(write=False)
    return combos


@dataclass(frozen=True, eq=False)
class BasisTable:
    """Every basis of a column set, evaluated in one vectorized pass.

    ``combos`` index into the columns that were passed in, ``values`` is
    ``-inf`` wherever the basis is singular or infeasible.
    """

    combos: np.ndarray
    nonsingular: np.ndarray
    feasible: np.ndarray
    x: np.ndarray
    values: np.ndarray


def evaluate_bases(
    matrix: np.ndarray, rhs: np.ndarray, objective: np.ndarray, combos: np.ndarray | None = None
) -> BasisTable:
    m, n = matrix.shape
    if combos is None:
        combos = combinations_array(n, m)
    # (num_bases, m, m): row i of every basis submatrix
    sub = np.moveaxis(matrix[:, combos], 1, 0)
    det = np.linalg.det(sub)
    nonsingular = np.abs(det) > EPS_SING
    x = np.full(combos.shape, np.nan)
    if nonsingular.any():
        good = sub[nonsingular]
        rhs_stack = np.broadcast_to(rhs, (good.shape[0], m))[..., None]
        x[nonsingular] = np.linalg.solve(good, rhs_stack)[..., 0]
    feasible = nonsingular.copy()
    feasible[nonsingular] = (x[nonsingular] >= -EPS_FEAS).all(axis=1)
    x[feasible] = np.maximum(x[feasible], 0.0)
    values = np.full(combos.shape[0], -np.inf)
    values[feasible] = (objective[combos[feasible]] * x[feasible]).sum(axis=1)
    return BasisTable(combos, nonsingular, feasible, x, values)


def best_basis_index(table: BasisTable) -> int | None:
    """Row of the optimal basis (lexicographically first among value ties)."""
    if not table.feasible.any():
        return None
    best = table.values.max()
    return int(np.flatnonzero(table.values >= best - EPS_VAL)[0])


def basic_solution(lp: StandardLp, basis: Sequence[int]) -> BasicSolution:
    basis = as_basis(basis, lp.basis_size, lp.num_vars)
    sub = lp.matrix[:, basis]
    if abs(np.linalg.det(sub)) <= EPS_SING:
        return BasicSolution(BasisStatus.SINGULAR)
    y = np.linalg.solve(sub, lp.rhs)
    if (y < -EPS_FEAS).any():
        return BasicSolution(BasisStatus.INFEASIBLE, y)
    return BasicSolution(BasisStatus.FEASIBLE, np.maximum(y, 0.0))


def solve_arrays(matrix: np.ndarray, rhs: np.ndarray, objective: np.ndarray) -> LpSolution | None:
    """Enumeration solve on raw arrays; ``None`` means infeasible."""
    table = evaluate_bases(matrix, rhs, objective)
    row = best_basis_index(table)
    if row is None:
        return None
    basis = tuple(int(i) for i in table.combos[row])
    x = np.zeros(matrix.shape[1])
    x[list(basis)] = table.x[row]
    return LpSolution(float(table.values[row]), basis, x)


def solve_primal(lp: StandardLp, objective: np.ndarray | None = None) -> LpSolution | None:
    """Maximize ``objective^T x`` over the feasible set of ``lp``.

    Returns ``None`` when no basis is feasible. Ties within ``EPS_VAL`` go to
    the lexicographically smallest basis.
    """
    objective = lp.objective if objective is None else np.asarray(objective, dtype=float)
    if objective.shape != (lp.num_vars,):
        raise ValueError(f"objective must have length {lp.num_vars}")
    return solve_arrays(lp.matrix, lp.rhs, objective)


def dual_from_basis(
    matrix: np.ndarray, objective: np.ndarray, basis: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    basis = list(basis)
    sub = matrix[:, basis]
    if abs(np.linalg.det(sub)) <= EPS_SING:
        raise SingularBasisError(f"basis {tuple(basis)} is singular")
    duals = np.linalg.solve(sub.T, objective[basis])
    reduced = objective - matrix.T @ duals
    reduced[basis] = 0.0
    return duals, reduced


def dual_certificate(
    lp: StandardLp, objective: np.ndarray, basis: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Dual prices ``lam`` with ``A_B^T lam = mu_B`` and reduced costs ``mu - A^T lam``.

    At the optimal basis of a feasible LP ``lam`` solves the dual
    ``min b^T lam s.t. A^T lam >= mu`` and every reduced cost is <= 0.
    """
    basis = as_basis(basis, lp.basis_size, lp.num_vars)
    return dual_from_basis(lp.matrix, np.asarray(objective, dtype=float), basis)
