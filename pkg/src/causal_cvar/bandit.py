"""Causal-bound clipped CVaR-UCB and its baselines.

Three policies share one code path:

``clipped``
    prune arms with ``h_x < max_x l_x``, then play the DKW-optimistic CVaR
    index clipped at ``h_x``;
``unclipped``
    the same index with ``h_x = +inf`` and no pruning;
``ucb1``
    empirical mean plus ``sqrt(2 ln t / T_x)``.

``horizon`` is the total number of pulls, initialisation included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels as K
from .cvar import CvarInterval, StepCDF, _check_alpha, cvar_discrete, cvar_of_cdf
from .model import ConfoundedModel, EmpiricalCDF, RewardSupport, interventional_distribution

POLICIES = ("clipped", "unclipped", "ucb1")
_POLICY_CODE = {"clipped": 0, "unclipped": 0, "ucb1": 1}


@dataclass
class ArmState:
    cdf: EmpiricalCDF
    bounds: CvarInterval = field(default_factory=lambda: CvarInterval(-math.inf, math.inf))
    pruned: bool = False

    @property
    def pulls(self) -> int:
        return self.cdf.total


@dataclass(frozen=True)
class BanditConfig:
    alpha: float
    reward_upper: float
    horizon: int
    policy: str = "clipped"
    tie_rule: str = "lowest-index"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.tie_rule != "lowest-index":
            raise ValueError("only the lowest-index tie rule is supported")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not self.reward_upper > 0:
            raise ValueError("reward_upper must be positive")


@dataclass
class RegretTrace:
    policy: str
    arms: np.ndarray
    levels: np.ndarray
    rewards: np.ndarray
    steps: np.ndarray
    kept: np.ndarray
    pulls: np.ndarray
    true_cvars: np.ndarray
    true_means: np.ndarray
    cum_cvar_regret: np.ndarray
    cum_mean_regret: np.ndarray
    index: np.ndarray

    @property
    def horizon(self) -> int:
        return self.arms.size

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("step,arm,reward,cum_cvar_regret,cum_mean_regret\n")
            rows = zip(self.steps.tolist(), self.arms.tolist(), self.rewards.tolist(),
                       self.cum_cvar_regret.tolist(), self.cum_mean_regret.tolist())
            fh.writelines(f"{s},{x},{r!r},{cr!r},{mr!r}\n" for s, x, r, cr, mr in rows)


def prune_arms(bounds: Sequence[CvarInterval]) -> list[int]:
    """Arms whose causal upper bound reaches the best causal lower bound."""
    if len(bounds) == 0:
        raise ValueError("need at least one arm")
    l_max = max(b.lower for b in bounds)
    return [x for x, b in enumerate(bounds) if b.upper >= l_max]


def exploration_radius(horizon: int, pulls: int) -> float:
    """DKW radius ``sqrt(ln(2 n^2) / (2 T_x))``."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if pulls < 1:
        raise ValueError("radius undefined before the first pull")
    return math.sqrt(math.log(2.0 * horizon**2) / (2.0 * pulls))


def optimistic_cdf(F: EmpiricalCDF, eps: float, upper: float) -> StepCDF:
    """``max(F - eps, 0)`` on ``[0, U)``, 1 at ``U``: the removed mass moves to ``U``."""
    y = F.support.array
    Fh = F.levels_cdf()
    below = y < upper
    vals = np.maximum(Fh[below] - eps, 0.0)
    return StepCDF(np.append(y[below], upper), np.append(vals, 1.0))


def clipped_index(arm: ArmState, eps: float, alpha: float, upper: float) -> float:
    """``min(CVaR(optimistic CDF), h_x)``; ``h_x = inf`` gives the plain CVaR-UCB."""
    return min(cvar_of_cdf(optimistic_cdf(arm.cdf, eps, upper), alpha), arm.bounds.upper)


def select_action(indices: dict[int, float] | Sequence[float]) -> int:
    """Argmax with ties to the lowest arm index."""
    items = sorted(indices.items()) if isinstance(indices, dict) else list(enumerate(indices))
    if not items:
        raise ValueError("no arms to select from")
    best_x, best_v = items[0]
    for x, v in items[1:]:
        if v > best_v:
            best_x, best_v = x, v
    return best_x


def ucb1_index(arm: ArmState, t: int) -> float:
    if arm.pulls < 1:
        raise ValueError("UCB1 index undefined before the first pull")
    return arm.cdf.mean() + math.sqrt(2.0 * math.log(t) / arm.pulls)


def true_arm_statistics(model: ConfoundedModel, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Interventional CVaR and mean of every arm."""
    dists = [interventional_distribution(model, x) for x in range(model.num_arms)]
    return (np.array([cvar_discrete(d, alpha) for d in dists]),
            np.array([d.mean() for d in dists]))


def cvar_regret(arms: np.ndarray, true_cvars: np.ndarray, num_arms: int | None = None) -> np.ndarray:
    """Cumulative CVaR regret along a played arm sequence."""
    true_cvars = np.asarray(true_cvars, dtype=float)
    if num_arms is not None and true_cvars.size != num_arms:
        raise ValueError("need one true CVaR per arm")
    arms = np.asarray(arms, dtype=np.int64)
    if arms.size and arms.max() >= true_cvars.size:
        raise ValueError("arm index outside the true-CVaR table")
    gaps = true_cvars.max() - true_cvars
    return K.compensated_cumsum(gaps[arms].astype(float))


def regret_identity(pulls: np.ndarray, true_values: np.ndarray) -> float:
    """``sum_x gap_x T_x(n)``, summed exactly in arm-index order."""
    gaps = np.max(true_values) - np.asarray(true_values, dtype=float)
    return math.fsum(float(g) * int(t) for g, t in zip(gaps, pulls))


def run_episode(model: ConfoundedModel, config: BanditConfig, bounds: Sequence[CvarInterval] | None,
                rng: np.random.Generator) -> RegretTrace:
    """Play one episode; rewards come from ``P(Y|do(x))``.

    Initialisation pulls each kept arm once in index order (steps
    ``-|K'|+1 .. 0``); the remaining ``horizon - |K'|`` rounds are steps
    ``1 .. n-|K'|``.
    """
    alpha = config.alpha
    num_arms = model.num_arms
    support: RewardSupport = model.support
    if config.policy == "clipped":
        if bounds is None or len(bounds) != num_arms:
            raise ValueError("clipped policy needs one CvarInterval per arm")
        kept = np.array(prune_arms(bounds), dtype=np.int64)
        clip = np.array([b.upper for b in bounds], dtype=float)
    else:
        kept = np.arange(num_arms, dtype=np.int64)
        clip = np.full(num_arms, np.inf)
    if config.horizon < kept.size:
        raise ValueError("horizon must cover one initialisation pull per kept arm")
    level_cdf = np.stack([np.cumsum(interventional_distribution(model, x).probs)
                          for x in range(num_arms)])
    uniforms = rng.random(config.horizon)
    y = support.array
    arms, levels, index = K.run_bandit(level_cdf, y, float(config.reward_upper), float(alpha),
                                       int(config.horizon), kept, clip,
                                       _POLICY_CODE[config.policy], uniforms)
    arms = np.asarray(arms)
    levels = np.asarray(levels)
    true_cvars, true_means = true_arm_statistics(model, alpha)
    n_init = kept.size
    steps = np.arange(config.horizon) - n_init + 1
    pulls = np.bincount(arms, minlength=num_arms)
    return RegretTrace(
        policy=config.policy, arms=arms, levels=levels, rewards=y[levels], steps=steps,
        kept=kept, pulls=pulls, true_cvars=true_cvars, true_means=true_means,
        cum_cvar_regret=cvar_regret(arms, true_cvars),
        cum_mean_regret=cvar_regret(arms, true_means),
        index=np.asarray(index),
    )


def pull_count_bound(bounds: Sequence[CvarInterval], true_cvars, arm: int, horizon: int,
                       alpha: float, upper: float) -> tuple[str, float]:
    """Predicted ceiling on ``E[T_x(n)]`` for a suboptimal arm.

    ``C1`` (``h_x < l_max``): 0. ``C2`` (``l_max <= h_x < mu*``): 1.
    ``C3``: ``3 + 4 ln(sqrt(2) n) U^2 / (alpha^2 gap^2)``.
    """
    true_cvars = np.asarray(true_cvars, dtype=float)
    mu = float(true_cvars.max())
    gap = mu - float(true_cvars[arm])
    if gap <= 0:
        return "optimal", math.inf
    l_max = max(b.lower for b in bounds)
    h = bounds[arm].upper
    if h < l_max:
        return "C1", 0.0
    if h < mu:
        return "C2", 1.0
    return "C3", 3.0 + 4.0 * math.log(math.sqrt(2.0) * horizon) * upper**2 / (alpha**2 * gap**2)
