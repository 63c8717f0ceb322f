import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_cvar import harness
from causal_cvar.causal_bounds import ProbabilityInterval
from causal_cvar.cvar import (
    CvarInterval,
    EmptyFeasibleSetError,
    OutcomeIntervalSet,
    StepCDF,
    cvar_bounds_binary,
    cvar_bounds_dominance,
    cvar_bounds_general,
    cvar_discrete,
    cvar_grid_oracle,
    cvar_interval,
    cvar_of_cdf,
)
from causal_cvar.model import BINARY_SUPPORT, DiscreteDistribution, RewardSupport, ValidationError

THREE = RewardSupport((0.0, 0.5, 1.0), 1.0)


def test_three_level_example():
    d = DiscreteDistribution(THREE, np.array([0.2, 0.3, 0.5]))
    assert cvar_discrete(d, 0.4) == pytest.approx(0.25, abs=1e-12)
    assert cvar_of_cdf(StepCDF.from_distribution(d), 0.4) == pytest.approx(0.25, abs=1e-12)


def test_two_context_truths(t1_model):
    from causal_cvar.model import interventional_distribution
    cv = [cvar_discrete(interventional_distribution(t1_model, x), 0.75) for x in range(2)]
    assert cv[0] == pytest.approx(0.24266666666666667, abs=1e-12)
    assert cv[1] == pytest.approx(0.328, abs=1e-12)


def test_alpha_edges():
    d = DiscreteDistribution(THREE, np.array([0.2, 0.3, 0.5]))
    assert cvar_discrete(d, 1.0) == pytest.approx(d.mean(), abs=1e-15)
    assert cvar_discrete(d, 0.2) == 0.0
    assert cvar_discrete(d, 1e-9) == 0.0
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            cvar_discrete(d, bad)


def test_point_mass():
    d = DiscreteDistribution(THREE, np.array([0.0, 1.0, 0.0]))
    for a in (0.1, 0.5, 1.0):
        assert cvar_discrete(d, a) == 0.5


def test_step_cdf_validation():
    with pytest.raises(ValidationError):
        StepCDF(np.array([0.0, 0.0]), np.array([0.5, 1.0]))
    with pytest.raises(ValidationError):
        StepCDF(np.array([0.0, 1.0]), np.array([0.6, 0.5]))
    with pytest.raises(ValidationError):
        cvar_of_cdf(StepCDF(np.array([0.0, 1.0]), np.array([0.2, 0.9])), 0.5)


def test_interval_example_all_methods():
    ois = OutcomeIntervalSet(THREE, [0.1, 0.2, 0.4], [0.3, 0.4, 0.6])
    iv = cvar_interval(ois, 0.4)
    assert (iv.lower, iv.upper) == pytest.approx((0.125, 0.375), abs=1e-12)
    dom = cvar_bounds_dominance(ois, 0.4)
    assert (dom.lower, dom.upper) == pytest.approx((0.125, 0.375), abs=1e-12)
    gmin, gmax, n = cvar_grid_oracle(ois, 0.4, 1e-3)
    assert (gmin, gmax) == pytest.approx((0.125, 0.375), abs=1e-12)
    assert n > 0


def test_binary_closed_form_two_context():
    iv = cvar_bounds_binary(ProbabilityInterval(0.46915, 0.58915), 0.75)
    assert (iv.lower, iv.upper) == pytest.approx((0.2922, 0.45220), abs=1e-12)
    iv0 = cvar_bounds_binary(ProbabilityInterval(0.2212, 0.5412), 0.75)
    assert iv0.lower == 0.0
    assert iv0.upper == pytest.approx(0.38826666666666665, abs=1e-12)


def test_binary_needs_two_levels():
    with pytest.raises(ValidationError):
        cvar_bounds_binary(ProbabilityInterval(0.2, 0.3), 0.5, THREE)


def test_empty_feasible_set():
    with pytest.raises(EmptyFeasibleSetError):
        OutcomeIntervalSet(THREE, [0.5, 0.4, 0.3], [0.6, 0.5, 0.4])
    with pytest.raises(EmptyFeasibleSetError):
        OutcomeIntervalSet(THREE, [0.0, 0.1, 0.1], [0.2, 0.2, 0.2])


def test_general_sense_check():
    ois = OutcomeIntervalSet(BINARY_SUPPORT, [0.3, 0.3], [0.7, 0.7])
    with pytest.raises(ValueError):
        cvar_bounds_general(ois, 0.5, "median")


def test_degenerate_interval_is_point():
    p = np.array([0.2, 0.3, 0.5])
    ois = OutcomeIntervalSet(THREE, p, p)
    iv = cvar_interval(ois, 0.4)
    assert iv.lower == pytest.approx(0.25, abs=1e-12) and iv.upper == pytest.approx(0.25, abs=1e-12)


def test_cvar_interval_validation():
    with pytest.raises(ValidationError):
        CvarInterval(0.5, 0.4)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_branch_formula_matches_cdf_form(seed, alpha):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 6))
    y = np.sort(rng.choice(np.arange(101), size=m, replace=False)) / 100.0
    d = DiscreteDistribution(RewardSupport(tuple(y), 1.0), rng.dirichlet(np.ones(m)))
    a = cvar_discrete(d, alpha)
    b = cvar_of_cdf(StepCDF.from_distribution(d), alpha)
    assert a == pytest.approx(b, abs=1e-12)
    assert y[0] - 1e-12 <= a <= d.mean() + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_general_matches_dominance_and_contains_truth(seed, alpha):
    rng = np.random.default_rng(seed)
    ois, p = harness.random_outcome_intervals(rng, max_outcomes=5)
    iv = cvar_interval(ois, alpha)
    dom = cvar_bounds_dominance(ois, alpha)
    assert iv.lower == pytest.approx(dom.lower, abs=1e-9)
    assert iv.upper == pytest.approx(dom.upper, abs=1e-9)
    truth = cvar_discrete(DiscreteDistribution(ois.support, p), alpha)
    assert iv.contains(truth, 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_general_matches_grid(seed, alpha):
    rng = np.random.default_rng(seed)
    ois, _ = harness.random_outcome_intervals(rng, max_outcomes=4)
    iv = cvar_interval(ois, alpha)
    gmin, gmax, _ = cvar_grid_oracle(ois, alpha, 5e-3)
    # every grid point is feasible, so it must lie inside the exact interval
    assert iv.lower <= gmin + 1e-12 and gmax <= iv.upper + 1e-12
    assert abs(iv.lower - gmin) <= 1e-3 and abs(iv.upper - gmax) <= 1e-3
