"""Command-line front end.

Subcommands:
  run     closed-loop experiment from a config file (plus flag overrides)
  ablate  spline-kind x executor study on one task
  bench   planning-step wall-time benchmark
  export  regenerate CSV/JSON artifacts from a raw .npz bundle
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .env import make_env
from .harness import (
    ExperimentConfig,
    ablation_table,
    export,
    load_config,
    load_raw,
    run,
    run_ablation,
)
from .planner import (
    PlannerConfig,
    execute_prefix,
    initial_trajectory,
    plan_step,
    shift_trajectory,
)
from .splines import SplineKind


def _base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    planner_updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seeds"] = (args.seed,)
    if getattr(args, "task", None):
        updates["task"] = args.task
    if getattr(args, "env", None):
        updates["env_name"] = args.env
    if getattr(args, "executor", None):
        updates["executor"] = args.executor
    if getattr(args, "delay_mode", None):
        updates["delay_mode"] = args.delay_mode
    if getattr(args, "delay_steps", None) is not None:
        updates["delay_steps"] = args.delay_steps
    if getattr(args, "duration", None) is not None:
        updates["duration"] = args.duration
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "spline", None):
        planner_updates["spline"] = SplineKind.parse(args.spline)
    if planner_updates:
        updates["planner"] = replace(cfg.planner, **planner_updates)
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _base_config(args)
    logs = run(cfg)
    for log in logs:
        s = log.summary
        status = "ok" if s["success"] else f"FAILED at step {s['fail_step']}"
        print(
            f"seed {s['seed']}: {status}, steps={s['steps']}, "
            f"total_cost={s['total_cost']:.2f}, "
            f"max_height={s['max_base_height']:.3f}, "
            f"mean_vx={s['mean_forward_velocity']:.3f}"
        )
    if cfg.out_dir:
        print(f"artifacts written to {cfg.out_dir}")
    return 0 if all(log.summary["success"] for log in logs) else 1


def _cmd_ablate(args) -> int:
    cfg = _base_config(args)
    results = run_ablation(cfg)
    print(ablation_table(results))
    if cfg.out_dir:
        print(f"artifacts written to {cfg.out_dir}")
    return 0


def _cmd_bench(args) -> int:
    pconf = PlannerConfig(
        horizon_steps=args.horizon,
        node_count=args.nodes,
        iterations=args.iterations,
        samples=args.samples,
        workers=args.workers,
        seed=0,
    )
    env = make_env(args.env)
    cfg = ExperimentConfig(env_name=args.env, task=args.task, planner=pconf)
    spec = cfg.cost_spec()
    state = env.initial_state()
    best = initial_trajectory(env, pconf, state)
    gains = env.resolve_gains(None, None, None)
    warmup = 2
    wall_ms = []
    for step in range(warmup + args.calls):
        shifted = shift_trajectory(best, 1)
        t0 = time.perf_counter()
        _, new_best, _ = plan_step(
            state, shifted, env, spec, pconf, step_index=step + 1
        )
        elapsed = (time.perf_counter() - t0) * 1e3
        if step >= warmup:
            wall_ms.append(elapsed)
        state, failed = execute_prefix(state, best, 1, env, gains)
        best = new_best
        if failed:
            print("benchmark rollout failed; timings cover the completed calls")
            break
    report = {
        "env": args.env,
        "task": args.task,
        "samples": pconf.samples,
        "iterations": pconf.iterations,
        "node_count": pconf.node_count,
        "horizon_steps": pconf.horizon_steps,
        "workers": pconf.workers,
        "calls": len(wall_ms),
        "mean_ms": float(np.mean(wall_ms)),
        "median_ms": float(np.median(wall_ms)),
        "p90_ms": float(np.percentile(wall_ms, 90)),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"benchmark written to {args.out}")
    return 0


def _cmd_export(args) -> int:
    bundle = load_raw(args.raw)
    os.makedirs(args.out, exist_ok=True)
    summaries = []
    for seed in sorted(bundle):
        data = bundle[seed]
        columns = [c for c in data if not c.startswith("__")]
        steps_path = os.path.join(args.out, f"{args.label}_seed{seed}_steps.csv")
        with open(steps_path, "w") as fh:
            fh.write(",".join(columns) + "\n")
            matrix = np.column_stack([data[c] for c in columns])
            for row in matrix:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        contacts = data.get("__contacts__")
        if contacts is not None:
            contact_path = os.path.join(
                args.out, f"{args.label}_seed{seed}_contacts.csv"
            )
            with open(contact_path, "w") as fh:
                fh.write(
                    ",".join(f"contact_{i}" for i in range(contacts.shape[1])) + "\n"
                )
                for row in contacts:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
        if "__summary__" in data:
            summaries.append(json.loads(str(data["__summary__"].item())))
    if summaries:
        with open(os.path.join(args.out, f"{args.label}_summary.json"), "w") as fh:
            json.dump(summaries, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(f"exported {len(bundle)} seed(s) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinempc",
        description="Sampling-based spline MPC for planar legged robots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a closed-loop experiment")
    p_run.add_argument("--config", help="experiment config file")
    p_run.add_argument("--seed", type=int, help="single seed override")
    p_run.add_argument("--task", help="task preset name")
    p_run.add_argument("--env", help="environment name")
    p_run.add_argument("--spline", help="hermite | cubic | quadratic")
    p_run.add_argument("--executor", choices=("best_trajectory", "nominal_only"))
    p_run.add_argument("--delay-mode", dest="delay_mode",
                       choices=("fixed", "measured"))
    p_run.add_argument("--delay-steps", dest="delay_steps", type=int)
    p_run.add_argument("--duration", type=float)
    p_run.add_argument("--out", help="artifact output directory")
    p_run.set_defaults(func=_cmd_run)

    p_abl = sub.add_parser("ablate", help="spline x executor ablation study")
    p_abl.add_argument("--config", help="experiment config file")
    p_abl.add_argument("--task", help="task preset name")
    p_abl.add_argument("--env", help="environment name")
    p_abl.add_argument("--duration", type=float)
    p_abl.add_argument("--out", help="artifact output directory")
    p_abl.set_defaults(func=_cmd_ablate)

    p_bench = sub.add_parser("bench", help="planning-step timing benchmark")
    p_bench.add_argument("--env", default="planar_quadruped")
    p_bench.add_argument("--task", default="walking")
    p_bench.add_argument("--calls", type=int, default=20)
    p_bench.add_argument("--samples", type=int, default=30)
    p_bench.add_argument("--iterations", type=int, default=3)
    p_bench.add_argument("--nodes", type=int, default=4)
    p_bench.add_argument("--horizon", type=int, default=45)
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--out", help="write the JSON report here")
    p_bench.set_defaults(func=_cmd_bench)

    p_exp = sub.add_parser("export", help="regenerate artifacts from a raw bundle")
    p_exp.add_argument("--raw", required=True, help="path to a <prefix>_raw.npz")
    p_exp.add_argument("--out", required=True, help="artifact output directory")
    p_exp.add_argument("--label", default="export")
    p_exp.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
