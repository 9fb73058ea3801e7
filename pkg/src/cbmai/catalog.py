"""Built-in instances and random instance generators.

The six two-constraint ``D`` instances are fixed 24-arm grids: arm ``i``
sits at cost ``(COST1[i // 4], COST2[i % 4])``. ``E1``/``E2`` are small
synthetic anchors (feasible and infeasible). ``HardCluster`` and
``RandomUniform`` generate 16-arm one-constraint instances.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import Instance, true_optimum

COST1 = (0.4, 0.6, 0.8, 1.0, 1.2, 1.4)
COST2 = (0.7, 0.9, 1.1, 1.3)

# rows follow COST1, columns COST2
_D_REWARDS = {
    "D1P": [
        [0.88, 0.80, 0.82, 0.66],
        [0.72, 1.02, 0.70, 0.54],
        [0.92, 0.74, 0.94, 0.84],
        [0.76, 0.60, 0.56, 0.86],
        [0.98, 0.64, 0.68, 0.78],
        [0.62, 0.96, 0.90, 0.58],
    ],
    "D2P": [
        [0.08, 0.28, -0.02, 0.22],
        [0.20, 0.46, 0.54, 0.40],
        [0.42, 0.52, 0.80, 0.34],
        [0.92, 0.78, 0.96, 0.70],
        [0.94, 0.76, 1.10, 0.86],
        [1.42, 1.16, 1.04, 1.24],
    ],
    "D3P": [
        [1.04, 1.22, 1.28, 1.26],
        [0.98, 1.22, 1.60, 1.54],
        [1.26, 1.40, 1.88, 1.84],
        [1.72, 1.76, 1.64, 1.92],
        [1.78, 1.70, 1.96, 2.08],
        [1.94, 2.30, 2.32, 2.50],
    ],
    "D1I": [
        [0.84, 1.02, 0.74, 0.76],
        [0.84, 0.88, 0.96, 0.90],
        [0.90, 0.98, 0.92, 0.80],
        [0.98, 0.98, 0.90, 0.74],
        [0.94, 0.90, 0.88, 0.72],
        [0.78, 0.82, 0.88, 0.84],
    ],
    "D2I": [
        [0.40, 0.18, 0.28, 0.14],
        [0.44, 0.54, 0.40, 0.32],
        [0.56, 0.52, 0.68, 0.64],
        [0.84, 0.80, 0.82, 0.74],
        [0.94, 1.18, 1.02, 1.12],
        [1.42, 1.16, 1.24, 1.24],
    ],
    "D3I": [
        [0.92, 1.12, 1.32, 1.42],
        [1.14, 1.42, 1.62, 1.68],
        [1.30, 1.70, 1.68, 2.06],
        [1.46, 1.82, 2.02, 2.04],
        [1.84, 2.02, 2.12, 2.24],
        [2.06, 2.28, 2.32, 2.58],
    ],
}

# (c1, c2) of the true arms in each optimal basis
D_SUPPORT_COSTS = {
    "D1P": [(0.6, 0.9)],
    "D2P": [(0.8, 1.1), (1.4, 0.7)],
    "D3P": [(0.8, 1.1), (1.0, 0.7), (1.4, 0.9)],
    "D1I": [(0.4, 0.9)],
    "D2I": [(0.4, 0.7), (1.4, 0.7)],
    "D3I": [(0.8, 0.9), (0.8, 1.3), (1.4, 0.9)],
}

D_NAMES = tuple(_D_REWARDS)
BUILTIN_NAMES = D_NAMES + ("E1", "E2")


def grid_costs() -> np.ndarray:
    """The 2 x 24 cost matrix shared by every grid instance."""
    return np.array([[c1 for c1 in COST1 for _ in COST2], [c2 for _ in COST1 for c2 in COST2]])


def grid_arm(c1: float, c2: float) -> int:
    return COST1.index(c1) * len(COST2) + COST2.index(c2)


def builtin_instance(name: str) -> Instance:
    if name in _D_REWARDS:
        rewards = np.array(_D_REWARDS[name]).reshape(-1)
        return Instance(rewards, grid_costs(), [1.0, 1.0], sigma_r=1.0, sigma_c=0.5, name=name)
    if name == "E1":
        return Instance([1.0, 0.0], [[2.0, 0.0]], [1.0], sigma_r=1.0, sigma_c=0.5, name="E1")
    if name == "E2":
        return Instance([1.0, 0.0], [[2.0, 1.5]], [1.0], sigma_r=1.0, sigma_c=0.5, name="E2")
    raise KeyError(f"unknown instance {name!r}; available: {', '.join(BUILTIN_NAMES)}")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridNoise:
    """Two-constraint 24-arm grid with noisy rewards.

    ``noise`` is ``"permutation"`` (W is a shuffle of 0.00..0.46) or ``"iid"``
    (W uniform on 0.00..0.28); ``rule`` picks ``r = 1 - W``, ``c1 - W`` or
    ``c1 + c2 - W`` and fixes the target support size (1, 2 or 3 arms).
    """

    noise: str = "permutation"
    rule: str = "D1"
    bump: float = 0.02
    max_attempts: int = 1000


@dataclass(frozen=True)
class HardCluster:
    """One-constraint instance where arms 3..K share identical means.

    Arm 1 is cheap and poor, arm 2 is rich and slightly over budget, so the
    optimal mix is {arm 1, arm 2}. The cluster sits at ``cluster_cost`` (just
    inside the bound) and ``cluster_gap`` below the line through arms 1 and 2.
    """

    num_arms: int = 16
    low: tuple[float, float] = (0.2, 0.2)
    high: tuple[float, float] = (1.15, 1.15)
    cluster_cost: float = 0.93
    cluster_gap: float = 0.12
    cost_bound: float = 1.0
    sigma_r: float = 1.0
    sigma_c: float = 0.5


@dataclass(frozen=True)
class RandomUniform:
    num_arms: int = 16
    num_constraints: int = 1
    num_unknown: int | None = None
    reward_range: tuple[float, float] = (0.0, 1.0)
    cost_range: tuple[float, float] = (0.0, 2.0)
    cost_bound: float = 1.0
    sigma_r: float = 1.0
    sigma_c: float = 0.5
    max_attempts: int = 1000


GeneratorSpec = GridNoise | HardCluster | RandomUniform

_KINDS = {"grid_noise": GridNoise, "hard_cluster": HardCluster, "random_uniform": RandomUniform}


def spec_from_dict(data: dict) -> GeneratorSpec:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"generator kind must be one of {sorted(_KINDS)}, got {kind!r}")
    data.pop("seed", None)
    data.pop("name", None)
    for key in ("low", "high", "reward_range", "cost_range"):
        if key in data:
            data[key] = tuple(data[key])
    return _KINDS[kind](**data)


def spec_to_dict(spec: GeneratorSpec) -> dict:
    kind = {v: k for k, v in _KINDS.items()}[type(spec)]
    return {"kind": kind, **asdict(spec)}


_RULE_SIZE = {"D1": 1, "D2": 2, "D3": 3}


def _grid_noise(spec: GridNoise, rng: np.random.Generator, name: str) -> Instance:
    if spec.rule not in _RULE_SIZE:
        raise ValueError(f"rule must be one of {sorted(_RULE_SIZE)}")
    if spec.noise not in ("permutation", "iid"):
        raise ValueError("noise must be 'permutation' or 'iid'")
    costs = grid_costs()
    num_arms = costs.shape[1]
    base = {"D1": np.ones(num_arms), "D2": costs[0], "D3": costs[0] + costs[1]}[spec.rule]
    target = _RULE_SIZE[spec.rule]
    for _ in range(spec.max_attempts):
        if spec.noise == "permutation":
            steps = rng.permutation(num_arms)
        else:
            steps = rng.integers(0, 15, size=num_arms)
        rewards = np.round(base - 0.02 * steps, 10)
        inst = Instance(rewards, costs, [1.0, 1.0], sigma_r=1.0, sigma_c=0.5, name=name)
        opt = true_optimum(inst)
        support = opt.arm_support(num_arms)
        if len(support) != target:
            continue
        bumped = rewards.copy()
        bumped[list(support)] = np.round(bumped[list(support)] + spec.bump, 10)
        inst = inst.replace(rewards=bumped)
        opt = true_optimum(inst)
        if opt.assumption_ok and opt.arm_support(num_arms) == support:
            return inst
    raise GenerationError(f"no instance with a {target}-arm support after {spec.max_attempts} attempts")


def _hard_cluster(spec: HardCluster, name: str) -> Instance:
    if spec.num_arms < 3:
        raise ValueError("HardCluster needs at least 3 arms")
    (c_lo, r_lo), (c_hi, r_hi) = spec.low, spec.high
    if not c_lo < spec.cost_bound < c_hi:
        raise ValueError("need low cost < cost bound < high cost so that arms 1 and 2 mix")
    slope = (r_hi - r_lo) / (c_hi - c_lo)
    cluster_reward = r_lo + slope * (spec.cluster_cost - c_lo) - spec.cluster_gap
    k = spec.num_arms
    rewards = np.array([r_lo, r_hi] + [cluster_reward] * (k - 2))
    costs = np.array([[c_lo, c_hi] + [spec.cluster_cost] * (k - 2)])
    return Instance(rewards, costs, [spec.cost_bound], spec.sigma_r, spec.sigma_c, name=name)


def _random_uniform(spec: RandomUniform, rng: np.random.Generator, name: str) -> Instance:
    k, l = spec.num_arms, spec.num_constraints
    for _ in range(spec.max_attempts):
        rewards = rng.uniform(*spec.reward_range, size=k)
        costs = rng.uniform(*spec.cost_range, size=(l, k))
        inst = Instance(
            rewards, costs, [spec.cost_bound] * l, spec.sigma_r, spec.sigma_c,
            num_unknown=spec.num_unknown, name=name,
        )
        if true_optimum(inst).assumption_ok:
            return inst
    raise GenerationError(f"no instance satisfying the uniqueness check after {spec.max_attempts} attempts")


def generate(spec: GeneratorSpec, rng: np.random.Generator | None = None, name: str | None = None) -> Instance:
    rng = np.random.default_rng() if rng is None else rng
    if isinstance(spec, GridNoise):
        return _grid_noise(spec, rng, name or f"{spec.rule}{'P' if spec.noise == 'permutation' else 'I'}-gen")
    if isinstance(spec, HardCluster):
        return _hard_cluster(spec, name or f"hard-cluster-{spec.num_arms}")
    if isinstance(spec, RandomUniform):
        return _random_uniform(spec, rng, name or f"uniform-{spec.num_arms}x{spec.num_constraints}")
    raise TypeError(f"unsupported generator spec {type(spec).__name__}")
