"""Probabilistic domain types: reward supports, confounded expert models,
observational logs and empirical CDFs.

Arms, contexts and reward levels are all 0-based integer indices. Reward
*values* live in :class:`RewardSupport`.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PROB_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when a probability object fails its invariants."""


class InsufficientDataError(ValueError):
    """Raised when an estimate is requested from an empty sample."""


def _check_probs(p: np.ndarray, what: str, axis=None) -> None:
    if np.any(~np.isfinite(p)) or np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
        raise ValidationError(f"{what}: entries must lie in [0, 1]")
    s = p.sum(axis=axis)
    if np.any(np.abs(s - 1.0) > PROB_TOL):
        raise ValidationError(f"{what}: probabilities must sum to 1 (got {s})")


@dataclass(frozen=True)
class RewardSupport:
    """Ordered reward levels ``y_0 < ... < y_n`` inside ``[0, upper_bound]``."""

    values: tuple[float, ...]
    upper_bound: float

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "upper_bound", float(self.upper_bound))
        if not vals:
            raise ValidationError("reward support must be non-empty")
        if not self.upper_bound > 0:
            raise ValidationError("reward upper bound U must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("reward levels must be strictly increasing")
        if vals[0] < 0 or vals[-1] > self.upper_bound:
            raise ValidationError("reward levels must lie in [0, U]")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def index_of(self, y: float) -> int:
        """Level index of reward value ``y`` (exact match within 1e-12)."""
        arr = self.array
        j = int(np.argmin(np.abs(arr - y)))
        if abs(arr[j] - y) > 1e-12:
            raise ValidationError(f"reward {y!r} is not in the declared support")
        return j


BINARY_SUPPORT = RewardSupport((0.0, 1.0), 1.0)


@dataclass(frozen=True)
class DiscreteDistribution:
    support: RewardSupport
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (len(self.support),):
            raise ValidationError("probs must align with the support")
        _check_probs(p, "DiscreteDistribution")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def mean(self) -> float:
        return float(np.dot(self.support.array, self.probs))

    def cdf(self) -> np.ndarray:
        """CDF evaluated at each support level."""
        return np.minimum(np.cumsum(self.probs), 1.0)


@dataclass(frozen=True)
class ConfoundedModel:
    """Ground-truth expert model: ``P(c)``, ``P(x|c)`` and ``P(y|x,c)``.

    ``policy`` has shape ``(K, |C|)`` with ``policy[x, c] = P(x|c)``;
    ``reward_law`` has shape ``(K, |C|, L)`` with ``reward_law[x, c, j] =
    P(y_j|x, c)``.
    """

    context_marginal: np.ndarray
    policy: np.ndarray
    reward_law: np.ndarray
    support: RewardSupport = BINARY_SUPPORT

    def __post_init__(self):
        pc = np.array(self.context_marginal, dtype=float)
        pol = np.array(self.policy, dtype=float)
        law = np.array(self.reward_law, dtype=float)
        if pc.ndim != 1 or pc.size == 0:
            raise ValidationError("context_marginal must be a non-empty vector")
        if pol.ndim != 2 or pol.shape[1] != pc.size or pol.shape[0] < 1:
            raise ValidationError("policy must have shape (K, |C|)")
        if law.shape != (pol.shape[0], pc.size, len(self.support)):
            raise ValidationError("reward_law must have shape (K, |C|, L)")
        _check_probs(pc, "context_marginal")
        _check_probs(pol, "policy P(x|c)", axis=0)
        _check_probs(law, "reward_law P(y|x,c)", axis=2)
        for name, arr in (("context_marginal", pc), ("policy", pol), ("reward_law", law)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_arms(self) -> int:
        return self.policy.shape[0]

    @property
    def num_contexts(self) -> int:
        return self.context_marginal.size

    def arm_context_joint(self) -> np.ndarray:
        """``P(x, c)`` as a ``(K, |C|)`` array."""
        return self.policy * self.context_marginal[None, :]


def two_context_model() -> ConfoundedModel:
    """Two-strategy emotion-regulation example with ``P(C=1) = 0.12``.

    Context index 0 is ``C=0`` (stationary), index 1 is ``C=1`` (moving).
    The policy table is read as ``P(X|C)``; its columns sum to one.
    """
    pc = [0.88, 0.12]
    # rows: x=0 (S2), x=1 (S1); cols: c=0, c=1
    policy = [[0.3, 0.8], [0.7, 0.2]]
    p_eff = np.array([[0.45, 0.3], [0.55, 0.1]])
    law = np.stack([1.0 - p_eff, p_eff], axis=-1)
    return ConfoundedModel(pc, policy, law, BINARY_SUPPORT)


def sample_expert_step(model: ConfoundedModel, rng: np.random.Generator) -> tuple[int, int, float]:
    """Draw one ``(context, action, reward)`` triple from the expert."""
    c = int(rng.choice(model.num_contexts, p=model.context_marginal))
    x = int(rng.choice(model.num_arms, p=model.policy[:, c]))
    j = int(rng.choice(len(model.support), p=model.reward_law[x, c]))
    return c, x, model.support.values[j]


def sample_expert(model: ConfoundedModel, size: int, rng: np.random.Generator):
    """Vectorised batch of expert draws; returns ``(contexts, arms, level_idx)``.

    Uses inverse-CDF sampling so a single uniform triple per record drives
    each draw.
    """
    if size <= 0:
        raise InsufficientDataError("dataset size must be positive")
    u = rng.random((3, size))
    c = np.searchsorted(np.cumsum(model.context_marginal), u[0], side="right")
    c = np.minimum(c, model.num_contexts - 1)
    pol_cdf = np.cumsum(model.policy, axis=0)  # (K, C)
    x = (u[1][:, None] >= pol_cdf[:, c].T).sum(axis=1)
    x = np.minimum(x, model.num_arms - 1)
    law_cdf = np.cumsum(model.reward_law, axis=2)  # (K, C, L)
    j = (u[2][:, None] >= law_cdf[x, c]).sum(axis=1)
    j = np.minimum(j, len(model.support) - 1)
    return c, x, j


def interventional_distribution(model: ConfoundedModel, arm: int) -> DiscreteDistribution:
    """Back-door adjusted ``P(Y|do(x)) = sum_c P(Y|x,c) P(c)``."""
    probs = model.context_marginal @ model.reward_law[arm]
    return DiscreteDistribution(model.support, probs / probs.sum())


@dataclass(frozen=True)
class ObservationalDataset:
    """Expert log of ``(arm, reward level)`` pairs with contexts dropped."""

    arms: np.ndarray
    levels: np.ndarray
    num_arms: int
    support: RewardSupport = BINARY_SUPPORT

    def __post_init__(self):
        arms = np.asarray(self.arms, dtype=np.int64)
        levels = np.asarray(self.levels, dtype=np.int64)
        if arms.shape != levels.shape or arms.ndim != 1:
            raise ValidationError("arms and levels must be equal-length vectors")
        if arms.size and (arms.min() < 0 or arms.max() >= self.num_arms):
            raise ValidationError("action index out of range")
        if levels.size and (levels.min() < 0 or levels.max() >= len(self.support)):
            raise ValidationError("reward level out of range")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return self.arms.size

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, float]], num_arms: int,
                     support: RewardSupport = BINARY_SUPPORT) -> "ObservationalDataset":
        recs = list(records)
        arms = [int(x) for x, _ in recs]
        levels = [support.index_of(float(y)) for _, y in recs]
        return cls(np.array(arms, dtype=np.int64), np.array(levels, dtype=np.int64), num_arms, support)

    def records(self) -> list[tuple[int, float]]:
        vals = self.support.values
        return [(int(x), vals[j]) for x, j in zip(self.arms, self.levels)]

    def to_csv(self, path: str | os.PathLike) -> None:
        """Write the ``t,x,y`` CSV (UTF-8, LF line endings)."""
        vals = self.support.values
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,x,y\n")
            rows = (f"{t},{x},{vals[j]!r}\n" for t, (x, j) in enumerate(zip(self.arms, self.levels)))
            fh.writelines(rows)

    @classmethod
    def from_csv(cls, path: str | os.PathLike, num_arms: int,
                 support: RewardSupport = BINARY_SUPPORT) -> "ObservationalDataset":
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != ["t", "x", "y"]:
            raise ValidationError(f"dataset header must be 't,x,y', got {header}")
        recs = [(int(row[1]), float(row[2])) for row in reader if row]
        return cls.from_records(recs, num_arms, support)


@dataclass(frozen=True)
class JointActionRewardTable:
    """``P(x, y)`` over arms and reward levels, shape ``(K, L)``."""

    probs: np.ndarray
    support: RewardSupport = BINARY_SUPPORT

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[1] != len(self.support):
            raise ValidationError("joint table must have shape (K, L)")
        _check_probs(p, "JointActionRewardTable")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def num_arms(self) -> int:
        return self.probs.shape[0]

    @property
    def arm_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def p_xy(self, arm: int, level: int) -> float:
        return float(self.probs[arm, level])

    def p_x(self, arm: int) -> float:
        return float(self.probs[arm].sum())


def joint_table(dataset: ObservationalDataset) -> JointActionRewardTable:
    """Empirical ``P(x, y)`` frequencies."""
    n = len(dataset)
    if n == 0:
        raise InsufficientDataError("cannot estimate P(x, y) from an empty dataset")
    L = len(dataset.support)
    counts = np.bincount(dataset.arms * L + dataset.levels, minlength=dataset.num_arms * L)
    return JointActionRewardTable(counts.reshape(dataset.num_arms, L) / n, dataset.support)


def exact_joint_table(model: ConfoundedModel) -> JointActionRewardTable:
    """Noise-free ``P(x, y) = sum_c P(c) P(x|c) P(y|x,c)``."""
    p = np.einsum("c,xc,xcy->xy", model.context_marginal, model.policy, model.reward_law)
    return JointActionRewardTable(p, model.support)


@dataclass
class EmpiricalCDF:
    """Running per-level counts; the CDF is a right-continuous step function."""

    support: RewardSupport
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(len(self.support), dtype=np.int64)
        else:
            self.counts = np.array(self.counts, dtype=np.int64)
            if self.counts.shape != (len(self.support),) or np.any(self.counts < 0):
                raise ValidationError("counts must be non-negative and aligned with the support")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def update(self, level: int) -> None:
        self.counts[level] += 1

    def add_value(self, y: float) -> None:
        self.update(self.support.index_of(y))

    @classmethod
    def from_values(cls, support: RewardSupport, values: Sequence[float]) -> "EmpiricalCDF":
        F = cls(support)
        for v in values:
            F.add_value(v)
        return F

    def levels_cdf(self) -> np.ndarray:
        """CDF at each support level."""
        if self.total == 0:
            raise InsufficientDataError("empirical CDF has no samples")
        return np.cumsum(self.counts) / self.total

    def mean(self) -> float:
        if self.total == 0:
            raise InsufficientDataError("empirical CDF has no samples")
        return float(np.dot(self.counts, self.support.array) / self.total)


def cdf_evaluate(F: EmpiricalCDF, y: float) -> float:
    """Fraction of samples ``<= y``."""
    if F.total == 0:
        raise InsufficientDataError("empirical CDF has no samples")
    k = int(np.searchsorted(F.support.array, y, side="right"))
    return float(F.counts[:k].sum() / F.total)
