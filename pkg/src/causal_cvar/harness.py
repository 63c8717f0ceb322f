"""End-to-end pipeline: expert data, causal CVaR bounds, bandit experiments
and solver-versus-oracle diagnostics.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bandit import POLICIES, BanditConfig, RegretTrace, run_episode, pull_count_bound
from .causal_bounds import (
    BoundProblem,
    ProbabilityInterval,
    UnidentifiableArmError,
    do_interval,
    grid_bound_problem,
    solve_bound_problem,
    tian_pearl_bounds,
)
from .cvar import (
    CvarInterval,
    OutcomeIntervalSet,
    cvar_bounds_binary,
    cvar_grid_oracle,
    cvar_interval,
)
from .model import (
    ConfoundedModel,
    JointActionRewardTable,
    ObservationalDataset,
    RewardSupport,
    ValidationError,
    exact_joint_table,
    joint_table,
    sample_expert,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ORACLE_GAP_LIMIT = 1e-3


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    model: ConfoundedModel
    alpha: float = 0.75
    horizon: int = 5000
    seeds: list[int] = field(default_factory=lambda: list(range(15)))
    n_samples: int = 1_000_000
    exact_joint: bool = True
    dataset: str | None = None
    data_seed: int = 0
    policies: list[str] = field(default_factory=lambda: list(POLICIES))
    cvar_bounds: list[CvarInterval] | None = None
    workers: int = 1
    oracle_resolution: float | None = None
    oracle_cvar_step: float = 1e-3
    arm_labels: list[str] | None = None
    context_labels: list[str] | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ConfigError(f"unknown policies {bad}")
        if self.cvar_bounds is not None and len(self.cvar_bounds) != self.model.num_arms:
            raise ConfigError("cvar_bounds needs one [l, h] pair per arm")


def _table(obj: dict, rows: list[str], cols: list[str], what: str) -> np.ndarray:
    if obj.get("row_labels") != rows or obj.get("col_labels") != cols:
        raise ConfigError(f"{what}: labels must be rows={rows}, cols={cols}")
    vals = np.asarray(obj["values"], dtype=float)
    if vals.shape != (len(rows), len(cols)):
        raise ConfigError(f"{what}: values must be {len(rows)}x{len(cols)}")
    return vals


def config_from_dict(doc: dict[str, Any], base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    """Parse a schema-version-1 config document."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    try:
        m = doc["model"]
        contexts = [str(c) for c in m["contexts"]]
        arms = [str(a) for a in m["arms"]]
        levels = [float(v) for v in m["reward_support"]]
        support = RewardSupport(tuple(levels), float(m["reward_upper"]))
        level_labels = [repr(v) for v in levels]
        pc = np.array([float(m["context_marginal"][c]) for c in contexts])
        policy = _table(m["policy"], arms, contexts, "policy")
        law = np.stack([_table(m["reward_law"][a], contexts, level_labels, f"reward_law[{a}]") for a in arms])
        model = ConfoundedModel(pc, policy, law, support)
        expert = doc.get("expert", {})
        dataset = expert.get("dataset")
        if dataset is not None:
            dataset = str(Path(base_dir) / dataset)
        bounds = doc.get("cvar_bounds")
        if bounds is not None:
            bounds = [CvarInterval(float(lo), float(hi)) for lo, hi in bounds]
        oracle = doc.get("oracle", {})
        return ExperimentConfig(
            model=model,
            alpha=float(doc.get("alpha", 0.75)),
            horizon=int(doc.get("horizon", 5000)),
            seeds=[int(s) for s in doc.get("seeds", range(15))],
            n_samples=int(expert.get("n_samples", 1_000_000)),
            exact_joint=bool(expert.get("exact_joint", True)),
            dataset=dataset,
            data_seed=int(expert.get("seed", 0)),
            policies=list(doc.get("policies", POLICIES)),
            cvar_bounds=bounds,
            workers=int(doc.get("workers", 1)),
            oracle_resolution=oracle.get("resolution"),
            oracle_cvar_step=float(oracle.get("cvar_step", 1e-3)),
            arm_labels=arms,
            context_labels=contexts,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    cfg = config_from_dict(doc, Path(path).parent)
    if cfg.dataset is not None and not Path(cfg.dataset).exists():
        raise ConfigError(f"dataset file {cfg.dataset} does not exist")
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    model = cfg.model
    arms = cfg.arm_labels or [f"X={x}" for x in range(model.num_arms)]
    contexts = cfg.context_labels or [f"C={c}" for c in range(model.num_contexts)]
    levels = list(model.support.values)
    level_labels = [repr(v) for v in levels]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "contexts": contexts,
            "arms": arms,
            "reward_support": levels,
            "reward_upper": model.support.upper_bound,
            "context_marginal": dict(zip(contexts, model.context_marginal.tolist())),
            "policy": {"row_labels": arms, "col_labels": contexts, "values": model.policy.tolist()},
            "reward_law": {
                a: {"row_labels": contexts, "col_labels": level_labels, "values": model.reward_law[x].tolist()}
                for x, a in enumerate(arms)
            },
        },
        "alpha": cfg.alpha,
        "horizon": cfg.horizon,
        "seeds": list(cfg.seeds),
        "expert": {"n_samples": cfg.n_samples, "exact_joint": cfg.exact_joint, "seed": cfg.data_seed},
        "policies": list(cfg.policies),
        "workers": cfg.workers,
    }
    if cfg.cvar_bounds is not None:
        doc["cvar_bounds"] = [[b.lower, b.upper] for b in cfg.cvar_bounds]
    return doc


def two_context_config(**overrides) -> ExperimentConfig:
    from .model import two_context_model

    kw = dict(model=two_context_model(), arm_labels=["X=0", "X=1"], context_labels=["C=0", "C=1"])
    kw.update(overrides)
    return ExperimentConfig(**kw)


def generate_expert_dataset(cfg: ExperimentConfig, seed: int, path: str | os.PathLike | None = None,
                            n: int | None = None) -> ObservationalDataset:
    """Sample ``n`` expert records, drop the contexts, optionally write CSV."""
    n = cfg.n_samples if n is None else n
    if n <= 0:
        raise ConfigError("expert dataset size must be positive")
    rng = np.random.default_rng(seed)
    _, arms, levels = sample_expert(cfg.model, n, rng)
    ds = ObservationalDataset(arms, levels, cfg.model.num_arms, cfg.model.support)
    if path is not None:
        ds.to_csv(path)
    return ds


@dataclass
class BoundsReport:
    alpha: float
    cvar_intervals: list[CvarInterval]
    prob_intervals: list[list[ProbabilityInterval]]
    document: dict[str, Any]


def _vec(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


def bounds_pipeline(joint: JointActionRewardTable, context_marginal, alpha: float,
                    arm_labels: list[str] | None = None, **solver_kw) -> BoundsReport:
    """``P(x,y)`` and ``P(c)`` to per-arm probability and CVaR intervals."""
    support = joint.support
    L = len(support)
    arms_doc = []
    cvars, probs = [], []
    for x in range(joint.num_arms):
        level_docs, ivs = [], []
        for j in range(L):
            tp = tian_pearl_bounds(joint, x, j)
            entry = {"level": support.values[j], "tian_pearl": [tp.lower, tp.upper]}
            try:
                iv, lo, hi = do_interval(joint, context_marginal, x, j, **solver_kw)
                entry["bounds"] = [iv.lower, iv.upper]
                entry["min"] = {"value": lo.value, "certified": lo.bound, "a": _vec(lo.a), "b": _vec(lo.b),
                                "nodes": lo.nodes, "iterations": lo.iterations, "gap": lo.gap,
                                "converged": lo.converged}
                entry["max"] = {"value": hi.value, "certified": hi.bound, "a": _vec(hi.a), "b": _vec(hi.b),
                                "nodes": hi.nodes, "iterations": hi.iterations, "gap": hi.gap,
                                "converged": hi.converged}
            except UnidentifiableArmError:
                iv = ProbabilityInterval(0.0, 1.0)
                entry["bounds"] = [0.0, 1.0]
                entry["note"] = "arm unobserved; vacuous interval"
            ivs.append(iv)
            level_docs.append(entry)
        if L == 2:
            # both levels bound P(y_1): directly and through 1 - P(y_0)
            lo = max(ivs[1].lower, 1.0 - ivs[0].upper)
            p1 = ProbabilityInterval(lo, max(min(ivs[1].upper, 1.0 - ivs[0].lower), lo))
            civ = cvar_bounds_binary(p1, alpha, support)
            method = "binary-closed-form"
        else:
            civ = cvar_interval(OutcomeIntervalSet.from_intervals(support, ivs), alpha)
            method = "branch-enumeration"
        cvars.append(civ)
        probs.append(ivs)
        arms_doc.append({
            "arm": x,
            "label": arm_labels[x] if arm_labels else f"X={x}",
            "levels": level_docs,
            "cvar": {"alpha": alpha, "interval": [civ.lower, civ.upper], "method": method},
        })
    doc = {"alpha": alpha, "context_marginal": _vec(context_marginal),
           "joint": joint.probs.tolist(), "support": list(support.values), "arms": arms_doc}
    return BoundsReport(alpha, cvars, probs, doc)


def joint_for(cfg: ExperimentConfig, exact: bool | None = None, seed: int | None = None) -> JointActionRewardTable:
    exact = cfg.exact_joint if exact is None else exact
    if exact:
        return exact_joint_table(cfg.model)
    if cfg.dataset is not None:
        ds = ObservationalDataset.from_csv(cfg.dataset, cfg.model.num_arms, cfg.model.support)
    else:
        ds = generate_expert_dataset(cfg, cfg.data_seed if seed is None else seed)
    return joint_table(ds)


def config_bounds(cfg: ExperimentConfig) -> list[CvarInterval]:
    if cfg.cvar_bounds is not None:
        return list(cfg.cvar_bounds)
    rep = bounds_pipeline(joint_for(cfg), cfg.model.context_marginal, cfg.alpha, cfg.arm_labels)
    return rep.cvar_intervals


def _episode_job(args):
    model, alpha, horizon, policy, bounds, seed = args
    bc = BanditConfig(alpha, model.support.upper_bound, horizon, policy)
    return run_episode(model, bc, bounds, np.random.default_rng(seed))


@dataclass
class ExperimentResults:
    bounds: list[CvarInterval]
    traces: dict[tuple[str, int], RegretTrace]
    aggregate: dict[str, dict[str, np.ndarray]]
    summary: dict[str, Any]


def _std(a: np.ndarray) -> np.ndarray:
    return a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1:])


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   workers: int | None = None) -> ExperimentResults:
    """All policies over all seeds; optional CSV/JSON output under ``out_dir``."""
    bounds = config_bounds(cfg)
    jobs = [(cfg.model, cfg.alpha, cfg.horizon, pol, bounds, seed)
            for pol in cfg.policies for seed in cfg.seeds]
    workers = cfg.workers if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = [_episode_job(j) for j in jobs]
    traces = {(j[3], j[5]): tr for j, tr in zip(jobs, results)}

    aggregate: dict[str, dict[str, np.ndarray]] = {}
    summary: dict[str, Any] = {
        "alpha": cfg.alpha, "horizon": cfg.horizon, "seeds": list(cfg.seeds),
        "bounds": [[b.lower, b.upper] for b in bounds], "policies": {},
    }
    for pol in cfg.policies:
        tr = [traces[(pol, s)] for s in cfg.seeds]
        cv = np.stack([t.cum_cvar_regret for t in tr])
        mr = np.stack([t.cum_mean_regret for t in tr])
        aggregate[pol] = {"mean_cvar": cv.mean(axis=0), "std_cvar": _std(cv),
                          "mean_mean": mr.mean(axis=0), "std_mean": _std(mr)}
        pulls = np.stack([t.pulls for t in tr])
        true_cvars = tr[0].true_cvars
        entry = {
            "final_cvar_regret_mean": float(cv[:, -1].mean()),
            "final_cvar_regret_std": float(_std(cv[:, -1:])[0]),
            "final_mean_regret_mean": float(mr[:, -1].mean()),
            "final_mean_regret_std": float(_std(mr[:, -1:])[0]),
            "final_cvar_regret_per_seed": cv[:, -1].tolist(),
            "final_mean_regret_per_seed": mr[:, -1].tolist(),
            "pulls_per_seed": pulls.tolist(),
            "mean_pulls": pulls.mean(axis=0).tolist(),
            "kept_arms": tr[0].kept.tolist(),
            "true_cvars": true_cvars.tolist(),
            "true_means": tr[0].true_means.tolist(),
        }
        if pol == "clipped":
            preds = []
            for x in range(cfg.model.num_arms):
                cond, bound = pull_count_bound(bounds, true_cvars, x, cfg.horizon, cfg.alpha,
                                                 cfg.model.support.upper_bound)
                preds.append({"arm": x, "condition": cond,
                              "pull_bound": None if not np.isfinite(bound) else bound})
            entry["pull_predictions"] = preds
        summary["policies"][pol] = entry

    if out_dir is not None:
        write_experiment(out_dir, cfg, traces, aggregate, summary)
    return ExperimentResults(bounds, traces, aggregate, summary)


def write_experiment(out_dir, cfg: ExperimentConfig, traces, aggregate, summary) -> None:
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for (pol, seed), tr in sorted(traces.items()):
        tr.to_csv(out / "traces" / f"{pol}_seed{seed}.csv")
    with open(out / "aggregate.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("step,policy,mean_cum_cvar_regret,std_cum_cvar_regret,mean_cum_mean_regret,std_cum_mean_regret\n")
        for pol in cfg.policies:
            a = aggregate[pol]
            cols = zip(a["mean_cvar"].tolist(), a["std_cvar"].tolist(),
                       a["mean_mean"].tolist(), a["std_mean"].tolist())
            fh.writelines(f"{i},{pol},{mc!r},{sc!r},{mm!r},{sm!r}\n"
                          for i, (mc, sc, mm, sm) in enumerate(cols, start=1))
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)


def _default_resolution(num_contexts: int) -> float:
    return 1e-4 if num_contexts <= 3 else 2e-3


def oracle_problem_gaps(prob: BoundProblem, resolution: float) -> dict[str, Any]:
    """Solver versus grid oracle for both senses of one bound program."""
    out = {}
    for sense in ("min", "max"):
        sol = solve_bound_problem(prob, sense)
        orc = grid_bound_problem(prob, sense, resolution)
        out[sense] = {"solver": sol.value, "certified": sol.bound, "oracle": orc.value,
                      "gap": abs(sol.value - orc.value), "oracle_points": orc.points}
    return out


def oracle_check(cfg: ExperimentConfig, random_instances: int = 0, seed: int = 0,
                 resolution: float | None = None) -> dict[str, Any]:
    """Cross-check both solvers against brute force; ``passed`` iff every gap <= 1e-3."""
    C = cfg.model.num_contexts
    if C > 4:
        raise ConfigError("grid oracle is limited to |C| <= 4")
    res = resolution or cfg.oracle_resolution or _default_resolution(C)
    joint = exact_joint_table(cfg.model)
    pc = cfg.model.context_marginal
    report: dict[str, Any] = {"resolution": res, "cvar_step": cfg.oracle_cvar_step, "instances": []}
    gaps = []
    rep = bounds_pipeline(joint, pc, cfg.alpha)
    for x in range(joint.num_arms):
        for j in range(len(joint.support)):
            prob = BoundProblem(pc, joint.p_x(x), joint.p_xy(x, j))
            try:
                prob.check_feasible()
            except UnidentifiableArmError:
                continue
            g = oracle_problem_gaps(prob, res)
            gaps += [g["min"]["gap"], g["max"]["gap"]]
            report["instances"].append({"kind": "do-bounds", "arm": x, "level": j, **g})
        ois = OutcomeIntervalSet.from_intervals(joint.support, rep.prob_intervals[x])
        civ = cvar_interval(ois, cfg.alpha)
        gmin, gmax, npts = cvar_grid_oracle(ois, cfg.alpha, cfg.oracle_cvar_step)
        cg = max(abs(civ.lower - gmin), abs(civ.upper - gmax))
        gaps.append(cg)
        report["instances"].append({"kind": "cvar-bounds", "arm": x, "solver": [civ.lower, civ.upper],
                                    "oracle": [gmin, gmax], "gap": cg, "oracle_points": npts})
    if random_instances:
        rgaps = random_oracle_sweep(random_instances, seed, max_contexts=3,
                                    resolution=res, cvar_step=cfg.oracle_cvar_step)
        report["random"] = rgaps
        gaps += rgaps["do_gaps"] + rgaps["cvar_gaps"]
    report["max_gap"] = float(max(gaps)) if gaps else 0.0
    report["passed"] = bool(report["max_gap"] <= ORACLE_GAP_LIMIT)
    return report


def random_model(rng: np.random.Generator, max_contexts: int = 4, max_arms: int = 3,
                 support: RewardSupport | None = None) -> ConfoundedModel:
    """Random confounded model with Dirichlet context, policy and reward laws."""
    from .model import BINARY_SUPPORT

    support = support or BINARY_SUPPORT
    C = int(rng.integers(1, max_contexts + 1))
    K = int(rng.integers(2, max_arms + 1))
    pc = rng.dirichlet(np.ones(C))
    policy = rng.dirichlet(np.ones(K), size=C).T
    law = rng.dirichlet(np.ones(len(support)), size=(K, C))
    return ConfoundedModel(pc, policy, law, support)


def random_bound_problem(rng: np.random.Generator, max_contexts: int = 3) -> BoundProblem:
    """Bound program for the top reward level of arm 0 in a random model."""
    model = random_model(rng, max_contexts)
    joint = exact_joint_table(model)
    return BoundProblem(model.context_marginal, joint.p_x(0), joint.p_xy(0, 1))


def random_outcome_intervals(rng: np.random.Generator, max_outcomes: int = 4,
                             max_width: float = 0.3) -> tuple[OutcomeIntervalSet, np.ndarray]:
    """Random interval set around a random distribution (which it contains)."""
    m = int(rng.integers(2, max_outcomes + 1))
    levels = np.sort(rng.choice(np.arange(0, 21), size=m, replace=False)) / 20.0
    support = RewardSupport(tuple(levels), 1.0)
    p = rng.dirichlet(np.ones(m))
    lo = np.clip(p - rng.random(m) * max_width / 2, 0, 1)
    hi = np.clip(p + rng.random(m) * max_width / 2, 0, 1)
    return OutcomeIntervalSet(support, lo, hi), p


def random_oracle_sweep(n: int, seed: int = 0, max_contexts: int = 3, resolution: float = 1e-4,
                        cvar_step: float = 1e-3) -> dict[str, Any]:
    rng = np.random.default_rng(seed)
    do_gaps, cvar_gaps = [], []
    for _ in range(n):
        prob = random_bound_problem(rng, max_contexts)
        g = oracle_problem_gaps(prob, resolution)
        do_gaps += [g["min"]["gap"], g["max"]["gap"]]
        ois, _ = random_outcome_intervals(rng)
        alpha = float(rng.uniform(0.05, 1.0))
        civ = cvar_interval(ois, alpha)
        gmin, gmax, _ = cvar_grid_oracle(ois, alpha, cvar_step)
        cvar_gaps.append(max(abs(civ.lower - gmin), abs(civ.upper - gmax)))
    return {"n": n, "do_gaps": do_gaps, "cvar_gaps": cvar_gaps,
            "max_do_gap": max(do_gaps), "max_cvar_gap": max(cvar_gaps)}
