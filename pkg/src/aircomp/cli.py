"""Command-line interface.

Exit codes: 0 on success, 2 on instance/spec validation errors, 3 on a
numerical anomaly in the structured search.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .model import ProblemInstance, floor_with_repair, validate_instance
from .upper_solver import NumericalAnomalyError, solve_global
from .verification import grid_oracle
from .experiments import (
    POLICIES,
    SweepSpec,
    generate_instance,
    rows_to_csv,
    run_policy,
    run_sweep,
)
from .fl_sim import make_task, train

EXIT_VALIDATION = 2
EXIT_ANOMALY = 3


def _load_instance(path: str) -> ProblemInstance:
    inst = ProblemInstance.from_json(Path(path).read_text())
    problem = validate_instance(inst)
    if problem is not None:
        print(f"invalid instance: {problem}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    return inst


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    if args.policy == "PROPOSED":
        sol = solve_global(inst)
        out = sol.to_dict()
        if args.round == "floor":
            out["S"] = list(floor_with_repair(sol.S, inst))
    else:
        alloc = run_policy(inst, args.policy)
        out = alloc.to_dict()
        if args.round == "floor":
            out["S"] = list(floor_with_repair(alloc.S, inst))
    print(json.dumps(out, indent=2))
    return 0


def cmd_sweep(args) -> int:
    try:
        spec = SweepSpec.from_json(Path(args.spec).read_text())
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid sweep spec: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        spec.seed = args.seed
    rows = run_sweep(spec, timing=args.timing, jobs=args.jobs)
    Path(args.out).write_text(rows_to_csv(rows), encoding="utf-8", newline="\n")
    return 0


def cmd_oracle(args) -> int:
    lines = ["instance_id,oracle,solver_mse,oracle_mse,rel_gap,pass"]
    for path in sorted(Path(args.instances).glob("*.json")):
        inst = _load_instance(str(path))
        sol = solve_global(inst)
        rep = grid_oracle(inst, n_points=args.points, solver_value=sol.mse)
        rel = rep.gap / rep.best_value if rep.best_value else 0.0
        lines.append(
            f"{path.stem},{rep.oracle},{sol.mse!r},{rep.best_value!r},"
            f"{rel!r},{str(rep.passed).lower()}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        print(text, end="")
    return 0


def cmd_gen_instance(args) -> int:
    inst = generate_instance(
        K=args.k, seed=args.seed, h_mean=args.h_mean,
        S_T=args.st, sigma2=args.sigma2, b_max=args.b_max,
    )
    Path(args.out).write_text(inst.to_json() + "\n", encoding="utf-8")
    return 0


def cmd_train(args) -> int:
    inst = _load_instance(args.instance)
    task = make_task(inst, n_features=args.features, seed=args.seed)
    run = train(inst, args.policy, task, T=args.rounds, eta=args.eta,
                seed=args.seed, c_mode=args.c_mode)
    lines = ["round,loss,grad_norm,realized_sq_err"]
    for t in range(run.rounds):
        lines.append(
            f"{t},{run.losses[t + 1]!r},{run.grad_norms[t]!r},"
            f"{run.realized_sq_err[t]!r}"
        )
    lines.append(
        f"summary,{run.losses[-1]!r},{float(np.mean(run.grad_norms))!r},"
        f"{float(np.mean(run.realized_sq_err))!r}"
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="aircomp",
        description="MSE-minimizing gain and data-size allocation for "
                    "over-the-air federated aggregation",
    )
    p.add_argument("--seed", type=int, default=None, help="override RNG seed")
    p.add_argument("--tol", type=float, default=None,
                   help="override the grid-oracle pass tolerance")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one instance")
    ps.add_argument("--instance", required=True)
    ps.add_argument("--policy", choices=POLICIES, default="PROPOSED")
    ps.add_argument("--round", choices=["continuous", "floor"], default="continuous")
    ps.set_defaults(fn=cmd_solve)

    pw = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    pw.add_argument("--spec", required=True)
    pw.add_argument("--out", required=True)
    pw.add_argument("--timing", action="store_true",
                    help="record wall times (forfeits byte-identical output)")
    pw.add_argument("--jobs", type=int, default=1)
    pw.set_defaults(fn=cmd_sweep)

    po = sub.add_parser("oracle", help="grid-oracle reports for a directory of instances")
    po.add_argument("--instances", required=True)
    po.add_argument("--out", default=None)
    po.add_argument("--points", type=int, default=100_000)
    po.set_defaults(fn=cmd_oracle)

    pg = sub.add_parser("gen-instance", help="write a random instance file")
    pg.add_argument("--k", type=int, required=True)
    pg.add_argument("--seed", type=int, required=True)
    pg.add_argument("--h-mean", type=float, default=None)
    pg.add_argument("--st", type=float, default=None)
    pg.add_argument("--sigma2", type=float, default=1.0)
    pg.add_argument("--b-max", type=float, default=None)
    pg.add_argument("--out", required=True)
    pg.set_defaults(fn=cmd_gen_instance)

    pt = sub.add_parser("train", help="federated training on a synthetic task")
    pt.add_argument("--instance", required=True)
    pt.add_argument("--policy", choices=POLICIES, default="PROPOSED")
    pt.add_argument("--rounds", type=int, default=200)
    pt.add_argument("--eta", type=float, default=0.05)
    pt.add_argument("--features", type=int, default=10)
    pt.add_argument("--c-mode", choices=["unit", "empirical"], default="unit")
    pt.add_argument("--out", default=None)
    pt.set_defaults(fn=cmd_train)
    return p


def main(argv=None) -> int:
    from .experiments import PAPER_B_MAX, PAPER_H_MEAN

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-instance":
        if args.h_mean is None:
            args.h_mean = PAPER_H_MEAN
        if args.b_max is None:
            args.b_max = PAPER_B_MAX
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = 0
    try:
        return args.fn(args)
    except NumericalAnomalyError as exc:
        print(f"numerical anomaly: {exc}", file=sys.stderr)
        return EXIT_ANOMALY


if __name__ == "__main__":
    raise SystemExit(main())
