import math

import numpy as np
import pytest

from causal_cvar.bandit import (
    ArmState,
    BanditConfig,
    clipped_index,
    cvar_regret,
    exploration_radius,
    optimistic_cdf,
    prune_arms,
    regret_identity,
    run_episode,
    select_action,
    pull_count_bound,
    true_arm_statistics,
    ucb1_index,
)
from causal_cvar.cvar import CvarInterval, cvar_of_cdf
from causal_cvar.model import BINARY_SUPPORT, EmpiricalCDF, RewardSupport

T1_BOUNDS = [CvarInterval(0.0, 0.3882666666666667), CvarInterval(0.2922, 0.4522)]


def test_exploration_radius():
    assert exploration_radius(100, 1) == pytest.approx(2.2253, abs=1e-4)
    assert exploration_radius(100, 50) == pytest.approx(0.3147, abs=1e-4)
    with pytest.raises(ValueError):
        exploration_radius(100, 0)


def test_optimistic_cdf_moves_mass_to_top():
    F = EmpiricalCDF(BINARY_SUPPORT, np.array([3, 1]))
    G = optimistic_cdf(F, 0.25, 1.0)
    assert G(0.0) == 0.5 and G(1.0) == 1.0
    assert cvar_of_cdf(G, 0.75) == pytest.approx(1.0 / 3.0, abs=1e-12)
    # a radius above every CDF value gives the most optimistic law
    assert cvar_of_cdf(optimistic_cdf(F, 1.0, 1.0), 0.75) == 1.0


def test_optimistic_cdf_upper_above_support():
    s = RewardSupport((0.0, 0.5), 1.0)
    F = EmpiricalCDF(s, np.array([1, 1]))
    G = optimistic_cdf(F, 0.1, 1.0)
    np.testing.assert_allclose(G.points, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(G.values, [0.4, 0.9, 1.0])


def test_clipped_index():
    arm = ArmState(EmpiricalCDF(BINARY_SUPPORT, np.array([3, 1])), CvarInterval(0.0, 0.3))
    assert clipped_index(arm, 0.25, 0.75, 1.0) == 0.3
    arm.bounds = CvarInterval(0.0, 0.9)
    assert clipped_index(arm, 0.25, 0.75, 1.0) == pytest.approx(1.0 / 3.0)
    assert arm.pulls == 4


def test_select_action_ties():
    assert select_action([0.4, 0.7, 0.7]) == 1
    assert select_action({2: 0.5, 0: 0.5}) == 0
    with pytest.raises(ValueError):
        select_action([])


def test_prune_arms():
    b = [CvarInterval(0.8, 0.9), CvarInterval(0.3, 0.85), CvarInterval(0.0, 0.79)]
    assert prune_arms(b) == [0, 1]
    assert prune_arms(T1_BOUNDS) == [0, 1]
    with pytest.raises(ValueError):
        prune_arms([])


def test_ucb1_index():
    arm = ArmState(EmpiricalCDF(BINARY_SUPPORT, np.array([1, 3])))
    assert ucb1_index(arm, 10) == pytest.approx(0.75 + math.sqrt(2 * math.log(10) / 4))
    with pytest.raises(ValueError):
        ucb1_index(ArmState(EmpiricalCDF(BINARY_SUPPORT)), 3)


def test_cvar_regret_and_identity():
    true = np.array([0.2, 0.5, 0.45])
    arms = np.array([0, 1, 2, 2, 0])
    np.testing.assert_allclose(cvar_regret(arms, true), [0.3, 0.3, 0.35, 0.4, 0.7], atol=1e-15)
    assert regret_identity(np.array([2, 1, 2]), true) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(ValueError):
        cvar_regret(np.array([3]), true)
    with pytest.raises(ValueError):
        cvar_regret(arms, true, num_arms=2)


def test_true_statistics(t1_model):
    cv, mu = true_arm_statistics(t1_model, 0.75)
    np.testing.assert_allclose(cv, [0.24266666666666667, 0.328], atol=1e-12)
    np.testing.assert_allclose(mu, [0.432, 0.496], atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        BanditConfig(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        BanditConfig(0.5, 1.0, 10, policy="thompson")
    with pytest.raises(ValueError):
        BanditConfig(0.5, 1.0, 10, tie_rule="random")
    with pytest.raises(ValueError):
        BanditConfig(0.5, 1.0, 0)


def test_episode_shapes_and_determinism(t1_model):
    cfg = BanditConfig(0.75, 1.0, 300, "clipped")
    a = run_episode(t1_model, cfg, T1_BOUNDS, np.random.default_rng(5))
    b = run_episode(t1_model, cfg, T1_BOUNDS, np.random.default_rng(5))
    np.testing.assert_array_equal(a.arms, b.arms)
    np.testing.assert_array_equal(a.cum_cvar_regret, b.cum_cvar_regret)
    assert a.horizon == 300 and a.pulls.sum() == 300
    assert a.steps[0] == -1 and a.steps[1] == 0 and a.steps[-1] == 298
    assert list(a.arms[:2]) == [0, 1]
    assert a.index.shape == (298, 2)
    assert np.all(a.index <= np.array([T1_BOUNDS[0].upper, T1_BOUNDS[1].upper]) + 1e-15)


def test_episode_requires_bounds(t1_model):
    with pytest.raises(ValueError):
        run_episode(t1_model, BanditConfig(0.75, 1.0, 100, "clipped"), None, np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_episode(t1_model, BanditConfig(0.75, 1.0, 1, "unclipped"), None, np.random.default_rng(0))


def _replay(trace, support, policy, bounds, alpha, upper, horizon):
    """Recompute every index with the scalar reference functions."""
    K = trace.pulls.size
    arms = {x: ArmState(EmpiricalCDF(support), bounds[x] if bounds else CvarInterval(-math.inf, math.inf))
            for x in trace.kept}
    n_init = trace.kept.size
    for t in range(n_init):
        arms[int(trace.arms[t])].cdf.update(int(trace.levels[t]))
    ref = np.full((horizon - n_init, K), np.nan)
    for s in range(horizon - n_init):
        t = n_init + s
        for x, st in arms.items():
            if policy == "ucb1":
                ref[s, x] = ucb1_index(st, t)
            else:
                ref[s, x] = clipped_index(st, exploration_radius(horizon, st.pulls), alpha, upper)
        chosen = select_action({x: ref[s, x] for x in arms})
        assert chosen == trace.arms[t]
        arms[chosen].cdf.update(int(trace.levels[t]))
    return ref


@pytest.mark.parametrize("policy", ["clipped", "unclipped", "ucb1"])
def test_kernel_matches_reference(t1_model, policy):
    n = 400
    tr = run_episode(t1_model, BanditConfig(0.75, 1.0, n, policy),
                     T1_BOUNDS if policy == "clipped" else None, np.random.default_rng(11))
    ref = _replay(tr, t1_model.support, policy, T1_BOUNDS if policy == "clipped" else None, 0.75, 1.0, n)
    np.testing.assert_allclose(tr.index, ref, atol=1e-12, equal_nan=True)


def test_pruned_arm_never_played():
    from causal_cvar.model import ConfoundedModel
    law = np.array([[[0.1, 0.9]], [[0.8, 0.2]]])
    model = ConfoundedModel(np.array([1.0]), np.array([[0.5], [0.5]]), law)
    bounds = [CvarInterval(0.8, 0.9), CvarInterval(0.0, 0.1)]
    tr = run_episode(model, BanditConfig(0.75, 1.0, 200), bounds, np.random.default_rng(0))
    assert tr.pulls[1] == 0
    assert list(tr.kept) == [0]
    assert tr.steps[0] == 0


def test_pull_bound_classes():
    true = np.array([0.8667, 0.3333, 0.0])
    b = [CvarInterval(0.8, 0.9), CvarInterval(0.3, 0.9), CvarInterval(0.0, 0.1)]
    assert pull_count_bound(b, true, 2, 2000, 0.75, 1.0) == ("C1", 0.0)
    assert pull_count_bound(b, true, 0, 2000, 0.75, 1.0)[0] == "optimal"
    cond, bound = pull_count_bound(b, true, 1, 2000, 0.75, 1.0)
    gap = 0.8667 - 0.3333
    assert cond == "C3"
    assert bound == pytest.approx(3 + 4 * math.log(math.sqrt(2) * 2000) / (0.75**2 * gap**2))
    b2 = [CvarInterval(0.8, 0.95), CvarInterval(0.2, 0.85)]
    assert pull_count_bound(b2, true[:2], 1, 2000, 0.75, 1.0) == ("C2", 1.0)


def test_trace_csv(tmp_path, t1_model):
    tr = run_episode(t1_model, BanditConfig(0.75, 1.0, 20, "ucb1"), None, np.random.default_rng(2))
    p = tmp_path / "trace.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "step,arm,reward,cum_cvar_regret,cum_mean_regret"
    assert len(lines) == 21
    assert lines[1].startswith("-1,0,")
    assert "np.float64" not in p.read_text()
