"""Problem instances, the Gaussian environment and empirical-mean bookkeeping."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import lp

EPS_SUPP = 1e-7
EPS_UNIQUE = 1e-7


class InstanceError(ValueError):
    """Inconsistent instance data."""


class AssumptionError(ValueError):
    """The instance has no unique, nondegenerate optimum."""


@dataclass(frozen=True, eq=False)
class Instance:
    """True means of a constrained bandit.

    The first ``num_unknown`` arms have unknown means and are the only ones
    ever sampled; the remaining arms enter every LP at their true means.
    """

    rewards: np.ndarray
    costs: np.ndarray
    cost_bounds: np.ndarray
    sigma_r: float = 1.0
    sigma_c: float = 0.5
    num_unknown: int | None = None
    name: str = "instance"

    def __post_init__(self):
        rewards = np.array(self.rewards, dtype=float).reshape(-1)
        costs = np.array(self.costs, dtype=float)
        if costs.ndim == 1:
            costs = costs.reshape(1, -1)
        bounds = np.array(self.cost_bounds, dtype=float).reshape(-1)
        k0 = rewards.size if self.num_unknown is None else int(self.num_unknown)
        for arr in (rewards, costs, bounds):
            arr.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "cost_bounds", bounds)
        object.__setattr__(self, "num_unknown", k0)
        object.__setattr__(self, "sigma_r", float(self.sigma_r))
        object.__setattr__(self, "sigma_c", float(self.sigma_c))
        self._validate()

    def _validate(self):
        k, l = self.num_arms, self.num_constraints
        if k < 1 or l < 1:
            raise InstanceError("need at least one arm and one constraint")
        if self.costs.shape != (l, k):
            raise InstanceError(f"costs must have shape ({l}, {k}), got {self.costs.shape}")
        if not 1 <= self.num_unknown <= k:
            raise InstanceError(f"K0 must lie in [1, {k}], got {self.num_unknown}")
        # zero noise is allowed for deterministic checks
        if self.sigma_r < 0 or self.sigma_c < 0:
            raise InstanceError("standard deviations must be nonnegative")
        for arr in (self.rewards, self.costs, self.cost_bounds):
            if not np.isfinite(arr).all():
                raise InstanceError("means and bounds must be finite")

    @property
    def num_arms(self) -> int:
        return self.rewards.size

    @property
    def num_constraints(self) -> int:
        return self.cost_bounds.size

    K = num_arms
    L = num_constraints

    @property
    def K0(self) -> int:
        return self.num_unknown

    def replace(self, **changes) -> Instance:
        fields = dict(
            rewards=self.rewards,
            costs=self.costs,
            cost_bounds=self.cost_bounds,
            sigma_r=self.sigma_r,
            sigma_c=self.sigma_c,
            num_unknown=self.num_unknown,
            name=self.name,
        )
        fields.update(changes)
        return Instance(**fields)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "K": self.num_arms,
            "K0": self.num_unknown,
            "L": self.num_constraints,
            "r": self.rewards.tolist(),
            "c": self.costs.tolist(),
            "c_bar": self.cost_bounds.tolist(),
            "sigma_r": self.sigma_r,
            "sigma_c": self.sigma_c,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Instance:
        try:
            inst = cls(
                rewards=data["r"],
                costs=data["c"],
                cost_bounds=data["c_bar"],
                sigma_r=data["sigma_r"],
                sigma_c=data["sigma_c"],
                num_unknown=data.get("K0"),
                name=data.get("name", "instance"),
            )
        except KeyError as exc:
            raise InstanceError(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InstanceError):
                raise
            raise InstanceError(str(exc)) from None
        for key, actual in (("K", inst.num_arms), ("L", inst.num_constraints)):
            if key in data and int(data[key]) != actual:
                raise InstanceError(f"declared {key}={data[key]} but data implies {actual}")
        return inst


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")


def load_instance(path: str | Path) -> Instance:
    return Instance.from_dict(json.loads(Path(path).read_text()))


class Observation(NamedTuple):
    reward: float
    costs: np.ndarray


def _check_sampled_arm(instance: Instance, arm: int) -> None:
    if not 0 <= arm < instance.num_unknown:
        raise ValueError(
            f"arm {arm} is not an unknown arm (valid: 0..{instance.num_unknown - 1})"
        )


def sample_pull(instance: Instance, arm: int, rng: np.random.Generator) -> Observation:
    """One pull of an unknown arm: L + 1 standard normals, reward first."""
    _check_sampled_arm(instance, arm)
    z = rng.standard_normal(instance.num_constraints + 1)
    reward = instance.rewards[arm] + instance.sigma_r * z[0]
    costs = instance.costs[:, arm] + instance.sigma_c * z[1:]
    return Observation(float(reward), costs)


def sample_pulls(instance: Instance, arm: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` pulls as rows ``(reward, cost_1, ..., cost_L)``.

    Consumes the random stream exactly like ``count`` calls of ``sample_pull``.
    """
    _check_sampled_arm(instance, arm)
    z = rng.standard_normal((count, instance.num_constraints + 1))
    z[:, 0] = instance.rewards[arm] + instance.sigma_r * z[:, 0]
    z[:, 1:] = instance.costs[:, arm] + instance.sigma_c * z[:, 1:]
    return z


@dataclass
class EmpiricalState:
    pull_counts: np.ndarray
    reward_sums: np.ndarray
    cost_sums: np.ndarray

    @classmethod
    def empty(cls, instance: Instance) -> EmpiricalState:
        k0, l = instance.num_unknown, instance.num_constraints
        return cls(np.zeros(k0, dtype=np.int64), np.zeros(k0), np.zeros((l, k0)))

    @property
    def total_pulls(self) -> int:
        return int(self.pull_counts.sum())

    def record(self, arm: int, obs: Observation) -> None:
        self.pull_counts[arm] += 1
        self.reward_sums[arm] += obs.reward
        self.cost_sums[:, arm] += obs.costs

    def record_batch(self, arm: int, samples: np.ndarray) -> None:
        self.pull_counts[arm] += samples.shape[0]
        self.reward_sums[arm] += samples[:, 0].sum()
        self.cost_sums[:, arm] += samples[:, 1:].sum(axis=0)

    def pull(self, instance: Instance, arm: int, count: int, rng: np.random.Generator) -> None:
        if count > 0:
            self.record_batch(arm, sample_pulls(instance, arm, count, rng))

    def mean_rewards(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.reward_sums / self.pull_counts

    def mean_costs(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.cost_sums / self.pull_counts


def empirical_lp(state: EmpiricalState, instance: Instance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full ``(mu_hat, A_hat, b)``; unpulled unknown arms come out as NaN columns."""
    k0 = instance.num_unknown
    rewards = instance.rewards.copy()
    costs = instance.costs.copy()
    rewards[:k0] = state.mean_rewards()
    costs[:, :k0] = state.mean_costs()
    return lp.standard_form_arrays(rewards, costs, instance.cost_bounds)


def empirical_views(
    state: EmpiricalState, instance: Instance, remaining: Iterable[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical objective and constraint columns restricted to ``remaining``.

    Unknown arms use their running means; known arms and slack columns keep
    their true, structural values.
    """
    remaining = list(remaining)
    k0 = instance.num_unknown
    unpulled = [a for a in remaining if a < k0 and state.pull_counts[a] == 0]
    if unpulled:
        raise ValueError(f"unknown arms {unpulled} have not been pulled")
    mu, matrix, _ = empirical_lp(state, instance)
    return mu[remaining], matrix[:, remaining]


@dataclass(frozen=True, eq=False)
class TrueOptimum:
    """Solution of the true-mean LP; ``basis is None`` means infeasible."""

    basis: lp.Basis | None = None
    x: np.ndarray | None = None
    value: float | None = None
    assumption_ok: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return self.basis is not None

    def arm_support(self, num_arms: int) -> tuple[int, ...]:
        """True arms (not slacks) in the optimal basis."""
        return tuple(i for i in (self.basis or ()) if i < num_arms)


def true_optimum(instance: Instance) -> TrueOptimum:
    std = lp.build_standard_form(instance)
    table = lp.evaluate_bases(std.matrix, std.rhs, std.objective)
    row = lp.best_basis_index(table)
    if row is None:
        return TrueOptimum()
    basis = tuple(int(i) for i in table.combos[row])
    x = np.zeros(std.num_vars)
    x[list(basis)] = table.x[row]
    value = float(table.values[row])

    notes = []
    support_size = int((x > EPS_SUPP).sum())
    if support_size != std.basis_size:
        notes.append(f"optimal solution has {support_size} nonzero coordinates, expected {std.basis_size}")
    rivals = table.feasible & (table.values >= value - EPS_UNIQUE)
    rivals[row] = False
    if rivals.any():
        other = tuple(int(i) for i in table.combos[np.flatnonzero(rivals)[0]])
        notes.append(f"basis {other} attains the optimum within {EPS_UNIQUE}")
    if not table.nonsingular[row]:
        notes.append("optimal basis is singular")
    return TrueOptimum(basis, x, value, not notes, tuple(notes))
