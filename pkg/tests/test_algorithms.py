import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbmai import algorithms as alg
from cbmai import lp, model
from cbmai.catalog import builtin_instance
from cbmai.harness import ExperimentSpec, run_trials
from cbmai.model import EmpiricalState, Instance, empirical_lp, true_optimum

from oracles import one_constraint_iv


def noise_free(name):
    return builtin_instance(name).replace(sigma_r=0.0, sigma_c=0.0)


def test_psi_and_schedule_sixteen_arms():
    assert float(alg.psi(16, 1)) == pytest.approx(3.318229, abs=1e-6)
    assert alg.psi(16, 1) == Fraction(3, 2) + sum(Fraction(1, m) for m in range(3, 16))
    sched = alg.pull_schedule(1000, 16, 16, 1)
    assert len(sched.rounds) == 15
    assert sched.cumulative[0] == 19
    assert sched.cumulative[1] == 20
    assert sched.rounds[1] == 1
    assert sched.cumulative[14] == 149


@pytest.mark.parametrize("budget", [2, 3, 10, 1001])
def test_schedule_two_arms_one_unknown(budget):
    sched = alg.pull_schedule(budget, 2, 1, 1)
    assert sched.rounds == (budget - 1,)


def test_schedule_needs_budget_above_k0():
    with pytest.raises(alg.BudgetError):
        alg.pull_schedule(5, 6, 5, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 40), st.integers(1, 4), st.data())
def test_schedule_is_monotone_and_within_budget(k, l, data):
    k0 = data.draw(st.integers(1, k))
    budget = data.draw(st.integers(k0 + 1, 10**6))
    sched = alg.pull_schedule(budget, k, k0, l)
    assert all(t >= 0 for t in sched.rounds)
    assert list(sched.cumulative) == sorted(sched.cumulative)
    # worst case: the unknown arms are the last ones standing
    alive = [min(k0, k + l - r) for r in range(k - 1)]
    assert sum(a * t for a, t in zip(alive, sched.rounds)) <= budget


def test_iv_scores_e1():
    std = lp.build_standard_form(builtin_instance("E1"))
    np.testing.assert_allclose(alg.iv_scores(std.objective, std.matrix, std.rhs), [0.5, 0.5, 0.0])


def test_lagrangian_scores_e1():
    std = lp.build_standard_form(builtin_instance("E1"))
    np.testing.assert_allclose(alg.lagrangian_scores(std.objective, std.matrix, std.rhs), [0.0, 0.0, -0.5])


@pytest.mark.parametrize("scorer", [alg.iv_scores, alg.lagrangian_scores])
def test_scores_infeasible_e2(scorer):
    std = lp.build_standard_form(builtin_instance("E2"))
    assert np.all(scorer(std.objective, std.matrix, std.rhs) == -np.inf)


def test_iv_scores_five_arm_picture():
    # five arms in the (cost, reward) plane with the bound at cost 1
    costs = [0.0, 1.8, 0.8, 1.3, 2.0]
    rewards = [1.7, 2.6, 0.5, 2.1, 1.2]
    std = lp.build_standard_form(Instance(rewards, [costs], [1.0]))
    scores = alg.iv_scores(std.objective, std.matrix, std.rhs)
    np.testing.assert_allclose(scores, one_constraint_iv(rewards, costs, 1.0), atol=1e-12)
    # arms 1 and 2 mix best; arm 3 only reaches the line through arm 4
    assert scores[0] == scores[1] == pytest.approx(2.2)
    assert scores[2] == pytest.approx(0.5 + 1.6 * 0.2 / 0.5)
    assert scores[3] == pytest.approx(1.7 + 0.4 / 1.3)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_iv_scores_match_segment_geometry(k, seed):
    rng = np.random.default_rng(seed)
    rewards, costs = rng.uniform(-1, 2, k), rng.uniform(0, 2, k)
    std = lp.build_standard_form(Instance(rewards, [costs], [1.0]))
    np.testing.assert_allclose(
        alg.iv_scores(std.objective, std.matrix, std.rhs), one_constraint_iv(rewards, costs, 1.0), atol=1e-9
    )


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_score_coherence(k, l, seed):
    rng = np.random.default_rng(seed)
    inst = Instance(rng.uniform(0, 1, k), rng.uniform(0, 2, (l, k)), rng.uniform(0.4, 1.2, l))
    state = EmpiricalState.empty(inst)
    for arm in range(k):
        state.pull(inst, arm, int(rng.integers(1, 5)), rng)
    mu, matrix, rhs = empirical_lp(state, inst)
    keep = sorted(rng.choice(k + l, size=int(rng.integers(l + 1, k + l + 1)), replace=False))
    iv = alg.iv_scores(mu[keep], matrix[:, keep], rhs)
    lag = alg.lagrangian_scores(mu[keep], matrix[:, keep], rhs)
    sol = lp.solve_arrays(matrix[:, keep], rhs, mu[keep])
    if sol is None:
        assert np.all(iv == -np.inf) and np.all(lag == -np.inf)
    else:
        assert iv.max() == pytest.approx(sol.value, abs=1e-12)
        np.testing.assert_array_equal(lag[list(sol.basis)], 0.0)


@pytest.mark.parametrize("algorithm", alg.ALGORITHMS)
@pytest.mark.parametrize("budget", [3, 50, 10_000])
def test_noise_free_e1(algorithm, budget):
    out = alg.run_algorithm(algorithm, noise_free("E1"), budget, np.random.default_rng(0))
    assert out.support == (0, 1)
    np.testing.assert_allclose(out.mixture, [0.5, 0.5])


@pytest.mark.parametrize("algorithm", alg.ALGORITHMS)
def test_noise_free_e2(algorithm):
    out = alg.run_algorithm(algorithm, noise_free("E2"), 100, np.random.default_rng(0))
    assert out.infeasible
    if algorithm != "uslp":
        assert out.rounds == 1


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        alg.run_algorithm("greedy", builtin_instance("E1"), 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        alg.sfsr_run(builtin_instance("E1"), 10, "ucb", np.random.default_rng(0))


def test_uslp_budget_error():
    with pytest.raises(alg.BudgetError):
        alg.uslp_run(builtin_instance("D1P"), 10, np.random.default_rng(0))


@pytest.mark.parametrize("flavor", alg.FLAVORS)
def test_round_structure_and_pulled_arms(monkeypatch, flavor):
    inst = builtin_instance("D2P").replace(num_unknown=15)
    sizes, pulled = [], []
    scorer = alg.SCORERS[flavor]
    real_pulls = model.sample_pulls

    def spy_scores(mu, matrix, rhs):
        sizes.append(len(mu))
        return scorer(mu, matrix, rhs)

    def spy_pulls(instance, arm, count, rng):
        pulled.append(arm)
        return real_pulls(instance, arm, count, rng)

    monkeypatch.setitem(alg.SCORERS, flavor, spy_scores)
    monkeypatch.setattr(model, "sample_pulls", spy_pulls)
    out = alg.sfsr_run(inst, 50_000, flavor, np.random.default_rng(1))
    k, l = inst.K, inst.L
    assert not out.infeasible
    assert out.rounds == k - 1
    assert sizes == [k + l - r for r in range(k - 1)]
    assert len(out.support) == l + 1
    assert out.support == tuple(sorted(out.support))
    assert set(pulled) <= set(range(inst.K0))
    assert out.pulls <= 50_000


@pytest.mark.parametrize("flavor", alg.FLAVORS)
@pytest.mark.parametrize("name", ["E1", "D2P"])
def test_mixture_satisfies_simplex_row(flavor, name):
    # the last row of A_hat is structural (ones on arms, zeros on slacks),
    # so any solution of A_hat_X x = b puts total mass 1 on the true arms
    inst = builtin_instance(name)
    seen = 0
    for seed in range(10):
        out = alg.sfsr_run(inst, 2000, flavor, np.random.default_rng(seed))
        if out.mixture is None:
            continue
        seen += 1
        arms = [i for i, a in enumerate(out.support) if a < inst.K]
        assert out.mixture.shape == (inst.L + 1,)
        assert out.mixture[arms].sum() == pytest.approx(1.0, abs=lp.EPS_LIN)
    assert seen > 0


@settings(max_examples=150, deadline=None)
@given(st.integers(3, 10), st.integers(1, 3), st.data())
def test_pulls_never_exceed_budget(k, l, data):
    k0 = data.draw(st.integers(1, k))
    budget = data.draw(st.integers(k0 + 1, 20_000))
    seed = data.draw(st.integers(0, 2**32 - 1))
    flavor = data.draw(st.sampled_from(alg.FLAVORS))
    rng = np.random.default_rng(seed)
    inst = Instance(rng.uniform(0, 1, k), rng.uniform(0, 2, (l, k)), np.ones(l), num_unknown=k0)
    out = alg.sfsr_run(inst, budget, flavor, rng)
    assert out.pulls <= budget
    if budget >= k0:
        assert alg.uslp_run(inst, budget, rng).pulls <= budget


def test_d3p_large_budget_recovers_support():
    inst = builtin_instance("D3P")
    target = true_optimum(inst).basis
    hits = sum(
        alg.sfsr_run(inst, 200_000, alg.IV, np.random.default_rng(seed)).support == target
        for seed in range(200)
    )
    assert hits / 200 >= 0.95


def _one_sided_z(worse, better):
    pooled = (worse.errors + better.errors) / (worse.trials + better.trials)
    se = math.sqrt(pooled * (1 - pooled) * (1 / worse.trials + 1 / better.trials))
    return (worse.error_rate - better.error_rate) / se


def test_consistency_on_e1():
    inst = builtin_instance("E1")
    # E1 is easy: by N=250 no run out of 2000 errs, so the decrease is
    # measured where errors are still visible and the large budgets are
    # checked for not getting worse
    small, large = run_trials(ExperimentSpec(inst, ("sfsr-iv",), (10, 100), 2000, base_seed=11))
    assert _one_sided_z(small, large) > 2.326
    mid, far = run_trials(ExperimentSpec(inst, ("sfsr-iv",), (250, 4000), 2000, base_seed=11))
    assert far.error_rate <= mid.error_rate
