"""Instance hardness: basis/arm value gaps, the infeasibility gap and rate exponents.

All gaps are squared Mahalanobis distances from the true means to the nearest
alternative instance of a given kind. None has a closed form, so each is
estimated by multi-start penalty minimization followed by a constrained
polish. Only polished points that satisfy the defining constraints are
accepted, so every finite estimate comes with a witness instance and is an
upper bound on the true infimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from . import lp
from .model import AssumptionError, Instance, TrueOptimum, true_optimum

TOL_GAP = 1e-3
RESTARTS = 64
PENALTY_ROUNDS = 10
PENALTY_START = 10.0
_POLISH_MARGIN = 0.0
_SINGULAR_PENALTY = 1e12


class GapEstimate(NamedTuple):
    value: float
    rewards: np.ndarray | None
    costs: np.ndarray | None


def _checked_optimum(instance: Instance, optimum: TrueOptimum | None) -> TrueOptimum:
    if instance.sigma_r <= 0 or instance.sigma_c <= 0:
        raise ValueError("gaps need strictly positive noise levels")
    optimum = true_optimum(instance) if optimum is None else optimum
    if not (optimum.feasible and optimum.assumption_ok):
        raise AssumptionError(
            f"instance {instance.name!r} fails the uniqueness check: {optimum.notes or 'infeasible'}"
        )
    return optimum


class _Perturbation:
    """Maps scaled offsets theta (|P| x (L+1)) on arms P to perturbed LP data."""

    def __init__(self, instance: Instance, arms: Sequence[int], with_rewards: bool = True):
        self.instance = instance
        self.arms = list(arms)
        self.with_rewards = with_rewards
        self.width = instance.num_constraints + (1 if with_rewards else 0)
        self.dim = len(self.arms) * self.width

    def means(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inst = self.instance
        t = theta.reshape(len(self.arms), self.width)
        rewards = inst.rewards.copy()
        costs = inst.costs.copy()
        if self.with_rewards:
            rewards[self.arms] += inst.sigma_r * t[:, 0]
            costs[:, self.arms] += inst.sigma_c * t[:, 1:].T
        else:
            costs[:, self.arms] += inst.sigma_c * t.T
        return rewards, costs

    def lp_data(self, theta: np.ndarray):
        rewards, costs = self.means(theta)
        return lp.standard_form_arrays(rewards, costs, self.instance.cost_bounds)


class _BasisTerms(NamedTuple):
    ok: bool
    x: np.ndarray
    value: float
    dx: np.ndarray  # (m, dim)
    dvalue: np.ndarray  # (dim,)


def _basis_terms(pert: _Perturbation, mu, matrix, rhs, basis) -> _BasisTerms:
    m = len(basis)
    sub = matrix[:, basis]
    if abs(np.linalg.det(sub)) <= lp.EPS_SING:
        return _BasisTerms(False, np.zeros(m), 0.0, np.zeros((m, pert.dim)), np.zeros(pert.dim))
    inv = np.linalg.inv(sub)
    x = inv @ rhs
    duals = inv.T @ mu[basis]
    inst = pert.instance
    dx = np.zeros((m, len(pert.arms), pert.width))
    dvalue = np.zeros((len(pert.arms), pert.width))
    offset = 1 if pert.with_rewards else 0
    position = {b: j for j, b in enumerate(basis)}
    for p, arm in enumerate(pert.arms):
        j = position.get(arm)
        if j is None:
            continue
        # d x / d A[l, j] = -inv[:, l] * x[j]
        dx[:, p, offset:] = -inst.sigma_c * inv[:, : inst.num_constraints] * x[j]
        dvalue[p, offset:] = -inst.sigma_c * duals[: inst.num_constraints] * x[j]
        if pert.with_rewards:
            dvalue[p, 0] = inst.sigma_r * x[j]
    return _BasisTerms(True, x, float(mu[basis] @ x), dx.reshape(m, -1), dvalue.reshape(-1))


def _start_points(dim: int, restarts: int, rng: np.random.Generator) -> list[np.ndarray]:
    points = [np.zeros(dim)]
    for _ in range(restarts - 1):
        scale = math.exp(rng.uniform(math.log(0.05), math.log(3.0)))
        points.append(scale * rng.standard_normal(dim))
    return points


def _multistart(
    dim: int,
    penalty: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray | None]],
    restarts: int,
    seed: int,
    polish: Callable[[np.ndarray], np.ndarray | None],
    polish_candidates: int = 8,
) -> tuple[float, np.ndarray | None]:
    """Penalty rounds from every start, then polish the most promising ends.

    ``penalty(theta)`` returns the violations (<= 0 is satisfied) and their
    jacobian, or ``None`` in its place to fall back on finite differences.
    ``polish`` returns a verified witness or ``None``.
    """
    rng = np.random.default_rng(seed)
    has_jac = penalty(np.zeros(dim))[1] is not None
    ends = []
    for start in _start_points(dim, restarts, rng):
        theta = start
        weight = PENALTY_START
        for _ in range(PENALTY_ROUNDS):
            def fun(t, w=weight):
                raw, jac = penalty(t)
                viol = np.maximum(raw, 0.0)
                f = t @ t + w * (viol @ viol)
                if not has_jac:
                    return f
                return f, 2.0 * t + 2.0 * w * (viol @ jac)

            res = minimize(fun, theta, jac=has_jac, method="L-BFGS-B",
                           options={"maxiter": 200})
            theta = res.x
            weight *= 2.0
        viol = np.maximum(penalty(theta)[0], 0.0)
        ends.append((float(theta @ theta + weight * (viol @ viol)), theta))

    ends.sort(key=lambda e: e[0])
    best_value, best_theta = math.inf, None
    for _, theta in ends[:polish_candidates]:
        witness = polish(theta)
        if witness is not None and witness @ witness < best_value:
            best_value, best_theta = float(witness @ witness), witness
    return best_value, best_theta


def _delta_j_problem(instance: Instance, optimum: TrueOptimum, basis: lp.Basis):
    star = list(optimum.basis)
    arms = sorted(a for a in set(basis) | set(star) if a < instance.num_unknown)
    pert = _Perturbation(instance, arms)

    def constraints(theta):
        """(g, dg) with g >= 0 meaning feasible; None when a basis is singular."""
        mu, matrix, rhs = pert.lp_data(theta)
        ti = _basis_terms(pert, mu, matrix, rhs, star)
        tj = _basis_terms(pert, mu, matrix, rhs, list(basis))
        if not (ti.ok and tj.ok):
            return None
        g = np.concatenate([ti.x, tj.x, [tj.value - ti.value]])
        dg = np.vstack([ti.dx, tj.dx, tj.dvalue - ti.dvalue])
        return g, dg

    return pert, constraints


def _polisher(dim, constraints, accept):
    def ineq(t):
        out = constraints(t)
        return np.full(1, np.nan) if out is None else out[0] - _POLISH_MARGIN

    def ineq_jac(t):
        out = constraints(t)
        return np.zeros((1, dim)) if out is None else out[1]

    def polish(theta):
        try:
            res = minimize(lambda t: (t @ t, 2.0 * t), theta, jac=True, method="SLSQP",
                           constraints=[{"type": "ineq", "fun": ineq, "jac": ineq_jac}],
                           options={"maxiter": 500, "ftol": 1e-14})
        except (ValueError, np.linalg.LinAlgError):
            return None
        for cand in (res.x, theta):
            if np.all(np.isfinite(cand)) and accept(cand):
                return cand
        return None

    return polish


def basis_gap(
    instance: Instance,
    basis: Sequence[int],
    restarts: int = RESTARTS,
    seed: int = 0,
    optimum: TrueOptimum | None = None,
) -> GapEstimate:
    """Cheapest perturbation under which ``basis`` catches up with the optimal basis.

    Both bases must stay feasible. Only arms in ``(basis | I*)`` with unknown
    means move. Returns ``inf`` (and no witness) when no restart finds a
    feasible alternative.
    """
    optimum = _checked_optimum(instance, optimum)
    basis = lp.as_basis(basis, instance.num_constraints + 1, instance.num_arms + instance.num_constraints)
    pert, constraints = _delta_j_problem(instance, optimum, basis)

    def accept(theta):
        out = constraints(theta)
        return out is not None and bool((out[0] >= -lp.EPS_FEAS).all())

    zero = np.zeros(pert.dim)
    if accept(zero):
        return GapEstimate(0.0, instance.rewards.copy(), instance.costs.copy())
    if pert.dim == 0:
        return GapEstimate(math.inf, None, None)

    def penalty(theta):
        out = constraints(theta)
        if out is None:
            return np.full(1, _SINGULAR_PENALTY), np.zeros((1, pert.dim))
        return -out[0], -out[1]

    value, theta = _multistart(pert.dim, penalty, restarts, seed,
                               _polisher(pert.dim, constraints, accept))
    if theta is None:
        return GapEstimate(math.inf, None, None)
    return GapEstimate(value, *pert.means(theta))


def estimate_delta_J(instance: Instance, basis: Sequence[int], **kwargs) -> float:
    return basis_gap(instance, basis, **kwargs).value


def estimate_delta_a(instance: Instance, arm: int, **kwargs) -> float:
    size = instance.num_constraints + 1
    n = instance.num_arms + instance.num_constraints
    return min(
        estimate_delta_J(instance, tuple(c), **kwargs)
        for c in lp.combinations_array(n, size)
        if arm in c
    )


def infeasibility_gap(
    instance: Instance, restarts: int = RESTARTS, seed: int = 0, optimum: TrueOptimum | None = None
) -> GapEstimate:
    """Cheapest cost perturbation making the optimal basis singular or infeasible.

    ``x_i <= 0`` and singularity are folded into one smooth condition through
    Cramer's rule: ``det(A_I with column i -> b) * det(A_I) <= 0``.
    """
    optimum = _checked_optimum(instance, optimum)
    star = list(optimum.basis)
    arms = [a for a in star if a < instance.num_unknown]
    if not arms:
        return GapEstimate(math.inf, None, None)
    pert = _Perturbation(instance, arms, with_rewards=False)

    def cramer(theta):
        _, matrix, rhs = pert.lp_data(theta)
        sub = matrix[:, star]
        det = np.linalg.det(sub)
        out = np.empty(len(star))
        for i in range(len(star)):
            replaced = sub.copy()
            replaced[:, i] = rhs
            out[i] = np.linalg.det(replaced) * det
        return out

    def accept(theta):
        _, matrix, rhs = pert.lp_data(theta)
        sub = matrix[:, star]
        if abs(np.linalg.det(sub)) <= lp.EPS_SING:
            return True
        return bool((np.linalg.solve(sub, rhs) <= lp.EPS_FEAS).any())

    best_value, best_theta = math.inf, None
    for i in range(len(star)):
        def penalty(theta, i=i):
            return np.atleast_1d(cramer(theta)[i]), None

        def constraints(theta, i=i):
            # polish wants g >= 0; finite-difference jacobian is enough at this size
            g = -cramer(theta)[i]
            eps = 1e-7
            jac = np.array([
                (-cramer(theta + eps * e)[i] - g) / eps for e in np.eye(pert.dim)
            ]).reshape(1, -1)
            return np.atleast_1d(g), jac

        value, theta = _multistart(pert.dim, penalty, max(1, restarts // len(star)),
                                   seed + i, _polisher(pert.dim, constraints, accept))
        if theta is not None and value < best_value:
            best_value, best_theta = value, theta
    if best_theta is None:
        return GapEstimate(math.inf, None, None)
    return GapEstimate(best_value, *pert.means(best_theta))


def estimate_delta0(instance: Instance, **kwargs) -> float:
    return infeasibility_gap(instance, **kwargs).value


@dataclass
class GapReport:
    delta0_sq: float
    basis_gaps: dict[lp.Basis, float]
    arm_gaps: np.ndarray
    sorted_gaps: np.ndarray
    order: np.ndarray
    num_unknown: int
    num_constraints: int
    n_tilde_coeff: float = field(init=False)

    def __post_init__(self):
        self.n_tilde_coeff = 1.0 / (3.0 * ((self.num_constraints + 1) / 2 + math.log(self.num_unknown)))

    def n_tilde(self, budget: int) -> float:
        return (budget - self.num_unknown) * self.n_tilde_coeff

    def to_dict(self) -> dict:
        return {
            "delta0_sq": json_number(self.delta0_sq),
            "arm_gaps": [json_number(v) for v in self.arm_gaps],
            "sorted_gaps": [json_number(v) for v in self.sorted_gaps],
            "order": [int(i) for i in self.order],
            "basis_gaps": {",".join(map(str, b)): json_number(v) for b, v in self.basis_gaps.items()},
            "n_tilde_coeff": self.n_tilde_coeff,
        }


def json_number(value: float):
    return "inf" if math.isinf(value) else float(value)


def gap_report(
    instance: Instance,
    restarts: int = RESTARTS,
    seed: int = 0,
    progress: Callable[[int, int], None] | None = None,
) -> GapReport:
    """Every basis gap, the per-arm minima and their sorted order (ties by index)."""
    optimum = _checked_optimum(instance, None)
    n = instance.num_arms + instance.num_constraints
    combos = lp.combinations_array(n, instance.num_constraints + 1)
    basis_gaps = {}
    for done, combo in enumerate(combos, start=1):
        basis = tuple(int(i) for i in combo)
        basis_gaps[basis] = estimate_delta_J(instance, basis, restarts=restarts, seed=seed, optimum=optimum)
        if progress is not None:
            progress(done, len(combos))
    arm_gaps = np.full(n, math.inf)
    for basis, value in basis_gaps.items():
        for a in basis:
            arm_gaps[a] = min(arm_gaps[a], value)
    order = np.array(sorted(range(n), key=lambda a: (arm_gaps[a], a)))
    delta0 = estimate_delta0(instance, restarts=restarts, seed=seed, optimum=optimum)
    return GapReport(delta0, basis_gaps, arm_gaps, arm_gaps[order], order,
                     instance.num_unknown, instance.num_constraints)


@dataclass(frozen=True)
class RateBounds:
    sfsr_exponent_coeff: float
    lower_bound_rate: float
    uslp_rate: float

    def to_dict(self) -> dict:
        return {k: json_number(v) for k, v in vars(self).items()}


def rate_bounds(instance: Instance, gaps: GapReport) -> RateBounds:
    """Asymptotic error exponents (per unit budget) implied by the gaps.

    ``lower_bound_rate`` caps the exponent of any consistent algorithm,
    ``uslp_rate`` is the uniform-sampling cap and ``sfsr_exponent_coeff`` the
    guaranteed successive-reject exponent.
    """
    k, l = instance.num_arms, instance.num_constraints
    g = gaps.sorted_gaps
    if g.size != k + l:
        raise ValueError(f"gap report has {g.size} sorted gaps, instance has {k + l} variables")
    second = g[l + 1] if l + 1 < g.size else math.inf
    lower = 0.5 * min(gaps.delta0_sq, second)
    terms = [gaps.delta0_sq / k] + [g[l + i - 1] / i for i in range(2, k + 1)]
    prefactor = 1.0 / (3.0 * ((l + 1) / 2 + math.log(k)))
    return RateBounds(prefactor * min(terms), lower, lower / k)
