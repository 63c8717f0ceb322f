import numpy as np
import pytest

from causal_cvar.model import (
    BINARY_SUPPORT,
    ConfoundedModel,
    DiscreteDistribution,
    EmpiricalCDF,
    InsufficientDataError,
    JointActionRewardTable,
    ObservationalDataset,
    RewardSupport,
    ValidationError,
    cdf_evaluate,
    exact_joint_table,
    interventional_distribution,
    joint_table,
    sample_expert,
    sample_expert_step,
)


def test_two_context_exact_joint(t1_model):
    jt = exact_joint_table(t1_model)
    np.testing.assert_allclose(jt.probs, [[0.2124, 0.1476], [0.2988, 0.3412]], atol=1e-12)
    assert jt.p_x(1) == pytest.approx(0.64, abs=1e-12)
    assert jt.p_xy(1, 1) == pytest.approx(0.3412, abs=1e-12)
    np.testing.assert_allclose(jt.arm_marginals, [0.36, 0.64], atol=1e-12)


def test_two_context_interventional(t1_model):
    d0 = interventional_distribution(t1_model, 0)
    d1 = interventional_distribution(t1_model, 1)
    assert d0.probs[1] == pytest.approx(0.432, abs=1e-12)
    assert d1.probs[1] == pytest.approx(0.496, abs=1e-12)
    assert d1.mean() == pytest.approx(0.496, abs=1e-12)


def test_backdoor_differs_from_conditional(t1_model):
    # the expert's conditional P(y=1|x=1) is inflated by confounding
    jt = exact_joint_table(t1_model)
    cond = jt.p_xy(1, 1) / jt.p_x(1)
    assert cond == pytest.approx(0.533125, abs=1e-12)
    assert cond > interventional_distribution(t1_model, 1).probs[1]


def test_support_validation():
    with pytest.raises(ValidationError):
        RewardSupport((1.0, 0.0), 1.0)
    with pytest.raises(ValidationError):
        RewardSupport((0.0, 2.0), 1.0)
    with pytest.raises(ValidationError):
        RewardSupport((-0.5, 1.0), 1.0)
    s = RewardSupport((0.0, 0.5, 1.0), 1.0)
    assert s.index_of(0.5) == 1
    with pytest.raises(ValidationError):
        s.index_of(0.25)


def test_model_validation():
    with pytest.raises(ValidationError):
        ConfoundedModel([0.5, 0.6], [[0.5, 0.5], [0.5, 0.5]], np.full((2, 2, 2), 0.5))
    with pytest.raises(ValidationError):
        ConfoundedModel([0.5, 0.5], [[0.6, 0.5], [0.5, 0.5]], np.full((2, 2, 2), 0.5))
    with pytest.raises(ValidationError):
        ConfoundedModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], np.full((2, 2, 3), 0.5))


def test_distribution_validation():
    with pytest.raises(ValidationError):
        DiscreteDistribution(BINARY_SUPPORT, np.array([0.3, 0.3]))
    with pytest.raises(ValidationError):
        DiscreteDistribution(BINARY_SUPPORT, np.array([1.1, -0.1]))


def test_sampler_frequencies(t1_model):
    c, x, j = sample_expert(t1_model, 200_000, np.random.default_rng(3))
    assert np.mean(c == 1) == pytest.approx(0.12, abs=4e-3)
    freq = np.zeros((2, 2))
    np.add.at(freq, (x, j), 1.0)
    np.testing.assert_allclose(freq / freq.sum(), exact_joint_table(t1_model).probs, atol=4e-3)


def test_sampler_deterministic(t1_model):
    a = sample_expert(t1_model, 1000, np.random.default_rng(9))
    b = sample_expert(t1_model, 1000, np.random.default_rng(9))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


def test_single_step(t1_model):
    c, x, y = sample_expert_step(t1_model, np.random.default_rng(0))
    assert c in (0, 1) and x in (0, 1) and y in (0.0, 1.0)


def test_empty_dataset_rejected(t1_model):
    with pytest.raises(InsufficientDataError):
        sample_expert(t1_model, 0, np.random.default_rng(0))
    empty = ObservationalDataset(np.array([], dtype=int), np.array([], dtype=int), 2)
    with pytest.raises(InsufficientDataError):
        joint_table(empty)


def test_dataset_csv_roundtrip(tmp_path):
    ds = ObservationalDataset.from_records([(0, 1.0), (1, 0.0), (1, 1.0), (0, 0.0)], 2)
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    raw = path.read_bytes()
    assert raw.startswith(b"t,x,y\n0,0,1.0\n") and b"\r" not in raw
    back = ObservationalDataset.from_csv(path, 2)
    assert back.records() == ds.records()
    np.testing.assert_allclose(joint_table(back).probs, [[0.25, 0.25], [0.25, 0.25]])


def test_dataset_csv_bad_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n0,0,1\n")
    with pytest.raises(ValidationError):
        ObservationalDataset.from_csv(path, 2)


def test_dataset_range_checks():
    with pytest.raises(ValidationError):
        ObservationalDataset(np.array([2]), np.array([0]), 2)
    with pytest.raises(ValidationError):
        ObservationalDataset.from_records([(0, 0.5)], 2)


def test_joint_table_shape_check():
    with pytest.raises(ValidationError):
        JointActionRewardTable(np.array([[0.5, 0.5, 0.0]]))


def test_empirical_cdf():
    F = EmpiricalCDF.from_values(BINARY_SUPPORT, [0.0, 1.0, 1.0, 1.0])
    assert F.total == 4
    np.testing.assert_allclose(F.levels_cdf(), [0.25, 1.0])
    assert cdf_evaluate(F, 0.5) == 0.25
    assert cdf_evaluate(F, -0.1) == 0.0
    assert F.mean() == 0.75
    with pytest.raises(InsufficientDataError):
        EmpiricalCDF(BINARY_SUPPORT).levels_cdf()
