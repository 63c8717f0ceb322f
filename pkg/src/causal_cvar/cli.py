"""Command-line entry point: ``causal-cvar {gen-data,bounds,simulate,oracle-check}``.

Exit codes: 0 success, 1 validation failure, 2 oracle gap above tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness as H
from .causal_bounds import InconsistentInputsError
from .cvar import EmptyFeasibleSetError
from .model import InsufficientDataError, ValidationError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ORACLE_GAP = 2

log = logging.getLogger("causal_cvar")


def _dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")


def _cmd_gen_data(args, cfg: H.ExperimentConfig) -> int:
    out = Path(args.out or "expert.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    seed = cfg.data_seed if args.seed is None else args.seed
    ds = H.generate_expert_dataset(cfg, seed, out, n=args.n)
    log.info("wrote %d records to %s", len(ds), out)
    return EXIT_OK


def _cmd_bounds(args, cfg: H.ExperimentConfig) -> int:
    if args.dataset:
        cfg.dataset = args.dataset
    exact = args.exact_joint if args.exact_joint is not None else (cfg.exact_joint and not args.dataset)
    joint = H.joint_for(cfg, exact=exact, seed=args.seed)
    rep = H.bounds_pipeline(joint, cfg.model.context_marginal, cfg.alpha, cfg.arm_labels)
    doc = dict(rep.document, exact_joint=bool(exact))
    _dump(doc, Path(args.out) if args.out else None)
    return EXIT_OK


def _cmd_simulate(args, cfg: H.ExperimentConfig) -> int:
    if args.exact_joint is not None:
        cfg.exact_joint = args.exact_joint
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.horizon is not None:
        cfg.horizon = args.horizon
    out = Path(args.out or "results")
    res = H.run_experiment(cfg, out, workers=args.workers)
    for pol, s in res.summary["policies"].items():
        log.info("%s: final CVaR regret %.4f +/- %.4f", pol, s["final_cvar_regret_mean"],
                 s["final_cvar_regret_std"])
    return EXIT_OK


def _cmd_oracle_check(args, cfg: H.ExperimentConfig) -> int:
    rep = H.oracle_check(cfg, random_instances=args.random, seed=args.seed or 0,
                         resolution=args.resolution)
    _dump(rep, Path(args.out) if args.out else None)
    if not rep["passed"]:
        log.error("oracle gap %.3g exceeds %.0e", rep["max_gap"], H.ORACLE_GAP_LIMIT)
        return EXIT_ORACLE_GAP
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causal-cvar", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config (schema_version 1); defaults to the two-context example model")
        sp.add_argument("--out", help="output file or directory")
        sp.add_argument("--seed", type=int, default=None)
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--exact-joint", dest="exact_joint", action="store_true", default=None,
                       help="use the model's exact P(x,y) instead of a sampled dataset")
        g.add_argument("--sampled-joint", dest="exact_joint", action="store_false")

    sp = sub.add_parser("gen-data", help="sample an expert dataset (t,x,y CSV)")
    common(sp)
    sp.add_argument("--n", type=int, default=None, help="number of records (default from config)")
    sp.set_defaults(func=_cmd_gen_data)

    sp = sub.add_parser("bounds", help="causal probability and CVaR bounds report")
    common(sp)
    sp.add_argument("--dataset", help="t,x,y CSV to estimate P(x,y) from")
    sp.set_defaults(func=_cmd_bounds)

    sp = sub.add_parser("simulate", help="run the bandit experiment")
    common(sp)
    sp.add_argument("--horizon", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("oracle-check", help="compare solvers with brute-force oracles")
    common(sp)
    sp.add_argument("--random", type=int, default=0, help="extra random instances")
    sp.add_argument("--resolution", type=float, default=None)
    sp.set_defaults(func=_cmd_oracle_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = H.load_config(args.config) if args.config else H.two_context_config()
        return args.func(args, cfg)
    except (H.ConfigError, ValidationError, InsufficientDataError, InconsistentInputsError,
            EmptyFeasibleSetError, json.JSONDecodeError, OSError, ValueError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
