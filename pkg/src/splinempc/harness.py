"""Closed-loop experiment harness.

Runs the planner against an environment with planning delay, logs per-step
records, and aggregates multi-seed / multi-variant studies. Delay semantics:
with a delay of e control steps the robot keeps executing the previously
planned best trajectory while the new plan is computed from the predicted
state, so every executed command comes from a plan that was started at least
e steps earlier. e = 0 means plan-then-act within the same step.

Summaries hold only deterministic quantities; wall-clock timings are kept in
a separate structure so exported summary files are byte-identical across
machines and worker counts.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .costs import CostSpec, resolve, running_cost, task_presets
from .env import make_env
from .planner import (
    PlannerConfig,
    PlanningFailure,
    execute_prefix,
    initial_trajectory,
    plan_step,
    predict_state,
    shift_trajectory,
)
from .splines import SplineKind

_DELAY_MODES = ("fixed", "measured")
_EXECUTORS = ("best_trajectory", "nominal_only")


@dataclass
class ExperimentConfig:
    """One closed-loop experiment: environment, task, planner, schedule."""

    env_name: str = "planar_hopper"
    task: str = "standing"
    duration: float = 2.0
    seeds: tuple = (0,)
    executor: str = "best_trajectory"
    delay_mode: str = "fixed"
    delay_steps: int = 1
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    cost_overrides: dict = field(default_factory=dict)
    env_overrides: dict = field(default_factory=dict)
    disturbances: tuple = ()
    out_dir: str = None
    label: str = "run"
    record_predictions: bool = False

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if int(round(self.duration / self.planner.control_dt)) < 1:
            raise ValueError("duration must cover at least one control step")
        if self.executor not in _EXECUTORS:
            raise ValueError(f"executor must be one of {_EXECUTORS}")
        if self.delay_mode not in _DELAY_MODES:
            raise ValueError(f"delay_mode must be one of {_DELAY_MODES}")
        if self.delay_steps < 0:
            raise ValueError("delay_steps must be >= 0")
        if self.delay_steps >= self.planner.horizon_steps:
            raise ValueError("delay_steps must be below the horizon")
        if self.task not in task_presets():
            raise ValueError(f"unknown task preset: {self.task!r}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        dist = []
        for when, imp in self.disturbances:
            dist.append((float(when), np.asarray(imp, dtype=np.float64).ravel()))
        self.disturbances = tuple(sorted(dist, key=lambda p: p[0]))

    def cost_spec(self) -> CostSpec:
        spec = task_presets()[self.task]
        if self.cost_overrides:
            spec = replace(spec, **self.cost_overrides)
        return spec


@dataclass
class RunLog:
    """Everything recorded from one seed's closed-loop run."""

    seed: int
    columns: tuple
    records: dict
    contact_matrix: np.ndarray
    summary: dict
    timing: dict
    predictions: list = field(default_factory=list)


def _state_columns(env) -> list:
    names = []
    if env.nb == 3:
        names += ["base_x", "base_z", "base_pitch"]
    names += [f"q_{i}" for i in range(env.spec.control_dim)]
    if env.nb == 3:
        names += ["base_vx", "base_vz", "base_wy"]
    names += [f"dq_{i}" for i in range(env.spec.control_dim)]
    return names


_TERM_KEYS = ("height", "orientation", "posture", "contact_velocity", "contact_force")


def _run_single(env, cost_spec: CostSpec, pconf: PlannerConfig,
                exp: ExperimentConfig) -> RunLog:
    rspec = resolve(cost_spec, env.spec)
    gains = env.resolve_gains(pconf.kp, pconf.kd, pconf.torque_limits)
    dt = pconf.control_dt
    state = env.initial_state()
    best = initial_trajectory(env, pconf, state)
    total_steps = int(round(exp.duration / dt))
    d = env.spec.control_dim

    columns = (
        ["step", "time"]
        + _state_columns(env)
        + [f"cmd_q_{i}" for i in range(d)]
        + [f"cmd_dq_{i}" for i in range(d)]
        + [f"tau_{i}" for i in range(d)]
        + ["cost"]
        + [f"cost_{k}" for k in _TERM_KEYS]
    )
    rows = []
    contact_rows = []
    walls = []
    plan_costs = []
    no_improvement = 0
    cycles = 0
    predictions = []
    disturbances = list(exp.disturbances)
    dptr = 0
    failed = False

    def pre_step(j, st):
        nonlocal dptr
        bv, jv = st.base_velocity, st.joint_velocities
        hit = False
        while dptr < len(disturbances) and disturbances[dptr][0] < st.time + dt - 1e-12:
            imp = disturbances[dptr][1]
            if imp.shape[0] == bv.shape[0]:
                bv = bv + imp
            elif imp.shape[0] == bv.shape[0] + jv.shape[0]:
                bv = bv + imp[: bv.shape[0]]
                jv = jv + imp[bv.shape[0]:]
            else:
                raise ValueError("disturbance impulse length does not match velocities")
            dptr += 1
            hit = True
        if hit:
            st = type(st)(
                base_pose=st.base_pose.copy(),
                joint_positions=st.joint_positions.copy(),
                base_velocity=bv,
                joint_velocities=jv,
                time=st.time,
            )
        return st

    def make_logger(base_step):
        def on_step(j, cmd, tau, st, contact, fl):
            row = [float(base_step + j), st.time]
            row.extend(env.state_to_vector(st).tolist())
            row.extend(np.asarray(cmd[0], dtype=np.float64).tolist())
            row.extend(np.asarray(cmd[1], dtype=np.float64).tolist())
            row.extend(np.asarray(tau, dtype=np.float64).tolist())
            total, terms = running_cost(st, contact, rspec)
            row.append(total)
            row.extend(terms[k] for k in _TERM_KEYS)
            rows.append(row)
            contact_rows.append(np.asarray(contact.normal_force, dtype=np.float64).copy())
        return on_step

    step = 0
    e = exp.delay_steps if exp.delay_mode == "fixed" else 1
    while step < total_steps and not failed:
        try:
            if e == 0:
                cmd, new_best, diag = plan_step(
                    state, best, env, rspec, pconf,
                    step_index=step, executor=exp.executor,
                )
                state, failed = execute_prefix(
                    state, new_best, 1, env, gains,
                    on_step=make_logger(step), pre_step=pre_step,
                )
                step += 1
                best = shift_trajectory(new_best, 1)
            else:
                e_run = min(e, total_steps - step)
                predicted = predict_state(state, best, e * dt, env, gains)
                shifted = shift_trajectory(best, e)
                cmd, new_best, diag = plan_step(
                    predicted, shifted, env, rspec, pconf,
                    step_index=step + e, executor=exp.executor,
                )
                state, failed = execute_prefix(
                    state, best, e_run, env, gains,
                    on_step=make_logger(step), pre_step=pre_step,
                )
                if exp.record_predictions and e_run == e and not failed:
                    predictions.append(
                        (env.state_to_vector(predicted), env.state_to_vector(state))
                    )
                step += e_run
                best = new_best
        except PlanningFailure:
            failed = True
            break
        cycles += 1
        walls.append(diag.wall_time_ms)
        plan_costs.append(diag.final_cost)
        no_improvement += int(not diag.improvement)
        if exp.delay_mode == "measured":
            e = int(math.ceil(diag.wall_time_ms / 1e3 / dt))
            e = min(max(e, 1), pconf.horizon_steps - 1)

    arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(columns))
    records = {name: arr[:, c].copy() for c, name in enumerate(columns)}
    contact_matrix = (
        np.stack(contact_rows)
        if contact_rows
        else np.empty((0, env.spec.n_contacts))
    )
    executed = len(rows)
    if env.nb == 3 and executed:
        max_height = float(records["base_z"].max())
        final_x = float(records["base_x"][-1])
        mean_vx = final_x / (executed * dt)
    else:
        max_height, final_x, mean_vx = 0.0, 0.0, 0.0
    flight_steps = 0
    if contact_matrix.shape[1]:
        streak = 0
        for airborne in (contact_matrix.max(axis=1) == 0.0):
            streak = streak + 1 if airborne else 0
            flight_steps = max(flight_steps, streak)
    summary = {
        "seed": pconf.seed,
        "env": exp.env_name,
        "task": exp.task,
        "spline": SplineKind.parse(pconf.spline).value,
        "executor": exp.executor,
        "delay_mode": exp.delay_mode,
        "delay_steps": exp.delay_steps,
        "steps": executed,
        "duration": executed * dt,
        "success": bool(not failed),
        "fail_step": (int(records["step"][-1]) if failed and executed else None),
        "total_cost": float(arr[:, columns.index("cost")].sum()) if executed else 0.0,
        "mean_running_cost": (
            float(arr[:, columns.index("cost")].mean()) if executed else 0.0
        ),
        "max_base_height": max_height,
        "final_base_x": final_x,
        "mean_forward_velocity": mean_vx,
        # longest run of control steps with every foot off the ground
        "flight_steps": flight_steps,
        "planning_cycles": cycles,
        # Mean attained objective of the planner's chosen trajectory per
        # cycle (terminal term included): the parameterization-quality
        # scalar the ablation ranks on, independent of what the executed
        # running cost happens to integrate.
        "mean_plan_cost": float(np.mean(plan_costs)) if plan_costs else 0.0,
        "improvement_failure_fraction": (no_improvement / cycles) if cycles else 0.0,
    }
    timing = {
        "wall_time_ms": walls,
        "mean_ms": float(np.mean(walls)) if walls else 0.0,
        "median_ms": float(np.median(walls)) if walls else 0.0,
    }
    return RunLog(
        seed=pconf.seed,
        columns=tuple(columns),
        records=records,
        contact_matrix=contact_matrix,
        summary=summary,
        timing=timing,
        predictions=predictions,
    )


def run(config: ExperimentConfig) -> list:
    """Run one experiment for every configured seed; export if out_dir set."""
    logs = []
    for seed in config.seeds:
        env = make_env(config.env_name, **config.env_overrides)
        pconf = replace(config.planner, seed=seed)
        logs.append(_run_single(env, config.cost_spec(), pconf, config))
    if config.out_dir:
        export(logs, config.out_dir, config.label)
    return logs


def _write_csv(path: str, header, matrix) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def export(logs, out_dir: str, prefix: str = "run") -> list:
    """Write per-seed CSVs, a summary JSON, a timing JSON, and a raw bundle.

    The summary JSON contains deterministic fields only. Returns the list of
    paths written.
    """
    if not logs:
        raise ValueError("nothing to export")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    raw = {}
    for log in logs:
        matrix = np.column_stack([log.records[c] for c in log.columns]) \
            if log.records[log.columns[0]].size else np.empty((0, len(log.columns)))
        steps_path = os.path.join(out_dir, f"{prefix}_seed{log.seed}_steps.csv")
        _write_csv(steps_path, log.columns, matrix)
        paths.append(steps_path)
        nc = log.contact_matrix.shape[1]
        contact_path = os.path.join(out_dir, f"{prefix}_seed{log.seed}_contacts.csv")
        _write_csv(contact_path, [f"contact_{i}" for i in range(nc)], log.contact_matrix)
        paths.append(contact_path)
        for c in log.columns:
            raw[f"seed{log.seed}/{c}"] = log.records[c]
        raw[f"seed{log.seed}/__contacts__"] = log.contact_matrix
        raw[f"seed{log.seed}/__summary__"] = np.array(
            json.dumps(log.summary, sort_keys=True)
        )
        if log.predictions:
            raw[f"seed{log.seed}/__predicted__"] = np.stack(
                [p for p, _ in log.predictions]
            )
            raw[f"seed{log.seed}/__actual__"] = np.stack(
                [a for _, a in log.predictions]
            )
    summary_path = os.path.join(out_dir, f"{prefix}_summary.json")
    with open(summary_path, "w") as fh:
        json.dump([log.summary for log in logs], fh, sort_keys=True, indent=2)
        fh.write("\n")
    paths.append(summary_path)
    timing_path = os.path.join(out_dir, f"{prefix}_timing.json")
    with open(timing_path, "w") as fh:
        json.dump({str(log.seed): log.timing for log in logs}, fh, sort_keys=True,
                  indent=2)
        fh.write("\n")
    paths.append(timing_path)
    raw_path = os.path.join(out_dir, f"{prefix}_raw.npz")
    np.savez(raw_path, **raw)
    paths.append(raw_path)
    return paths


def load_raw(path: str) -> dict:
    """Read a raw bundle back as {seed: {column: array, ...}, ...}."""
    out = {}
    with np.load(path, allow_pickle=False) as bundle:
        for key in bundle.files:
            head, _, col = key.partition("/")
            seed = int(head[4:])
            out.setdefault(seed, {})[col] = bundle[key]
    return out


SPLINE_VARIANTS = (SplineKind.HERMITE, SplineKind.CUBIC, SplineKind.QUADRATIC)


def _aggregate(logs) -> dict:
    total = len(logs)
    ok = [log.summary for log in logs if log.summary["success"]]
    costs = [s["total_cost"] for s in ok]
    plan_costs = [s["mean_plan_cost"] for s in ok]
    heights = [s["max_base_height"] for s in ok]
    return {
        "seeds": total,
        "successes": len(ok),
        "cost_mean": float(np.mean(costs)) if costs else None,
        "cost_std": float(np.std(costs)) if costs else None,
        "plan_cost_mean": float(np.mean(plan_costs)) if plan_costs else None,
        "plan_cost_std": float(np.std(plan_costs)) if plan_costs else None,
        "max_height_mean": float(np.mean(heights)) if heights else None,
        "max_height_std": float(np.std(heights)) if heights else None,
        "improvement_failure_fraction": float(
            np.mean([log.summary["improvement_failure_fraction"] for log in logs])
        ),
        "per_seed_cost": {
            str(log.summary["seed"]): (
                log.summary["total_cost"] if log.summary["success"] else None
            )
            for log in logs
        },
    }


def ablation_table(results: dict) -> str:
    lines = [
        f"{'variant':<32}{'success':>9}{'plan cost':>14}{'run cost':>14}"
        f"{'no-improve %':>14}"
    ]
    for name in sorted(results):
        agg = results[name]
        plan = "n/a" if agg["plan_cost_mean"] is None else f"{agg['plan_cost_mean']:.1f}"
        cost = "n/a" if agg["cost_mean"] is None else f"{agg['cost_mean']:.1f}"
        lines.append(
            f"{name:<32}{agg['successes']:>6}/{agg['seeds']:<2}{plan:>14}{cost:>14}"
            f"{100.0 * agg['improvement_failure_fraction']:>13.1f}%"
        )
    return "\n".join(lines)


def run_ablation(config: ExperimentConfig) -> dict:
    """Cross spline kinds with executors; aggregate per-variant statistics.

    Returns {variant_name: aggregate}. Variant runs reuse the experiment's
    seeds; per-run exports are suppressed, only the aggregate files are
    written when out_dir is set.
    """
    results = {}
    for kind in SPLINE_VARIANTS:
        for executor in _EXECUTORS:
            name = f"{kind.value}.{executor}"
            variant = replace(
                config,
                planner=replace(config.planner, spline=kind),
                executor=executor,
                out_dir=None,
                label=name,
            )
            results[name] = _aggregate(run(variant))
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(os.path.join(config.out_dir, "ablation_summary.json"), "w") as fh:
            json.dump(results, fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(config.out_dir, "ablation_table.txt"), "w") as fh:
            fh.write(ablation_table(results) + "\n")
    return results


_PLANNER_KEYS = {f.name for f in fields(PlannerConfig)}
_COST_KEYS = {f.name for f in fields(CostSpec)} - {"name"}
_EXP_KEYS = {
    "task", "duration", "seeds", "executor", "out", "label", "record_predictions",
}


def _parse_value(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    parts = text.split()
    if len(parts) > 1:
        try:
            return [_parse_number(p) for p in parts]
        except ValueError:
            return text
    try:
        return _parse_number(text)
    except ValueError:
        return text


def _parse_number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_config(text: str) -> ExperimentConfig:
    """Build an ExperimentConfig from flat `key = value` lines.

    `#` starts a comment; keys are dotted (env.*, planner.*, cost.*,
    delay.*, disturbance.<n>.*) or plain (task, duration, seeds, executor,
    out, label, record_predictions). Unknown keys raise ValueError.
    """
    data = {}
    for lineno, rawline in enumerate(text.splitlines(), 1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ValueError(f"line {lineno}: empty key or value")
        if key in data:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        data[key] = value

    env_name = "planar_hopper"
    exp = {}
    planner_kwargs = {}
    cost_over = {}
    env_over = {}
    delay = {}
    dist = {}
    for key, rawval in data.items():
        val = _parse_value(rawval)
        if key == "env.name":
            env_name = str(val)
        elif key.startswith("env."):
            env_over[key[4:]] = val
        elif key.startswith("planner."):
            name = key[8:]
            if name not in _PLANNER_KEYS:
                raise ValueError(f"unknown planner key: {name!r}")
            planner_kwargs[name] = val
        elif key.startswith("cost."):
            name = key[5:]
            if name not in _COST_KEYS:
                raise ValueError(f"unknown cost key: {name!r}")
            if name == "height_schedule":
                flat = np.atleast_1d(np.asarray(val, dtype=np.float64))
                if flat.size % 2:
                    raise ValueError("height_schedule needs time/height pairs")
                val = tuple(
                    (float(flat[2 * i]), float(flat[2 * i + 1]))
                    for i in range(flat.size // 2)
                )
            cost_over[name] = val
        elif key.startswith("delay."):
            name = key[6:]
            if name not in ("mode", "steps"):
                raise ValueError(f"unknown delay key: {name!r}")
            delay[name] = val
        elif key.startswith("disturbance."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in ("time", "impulse"):
                raise ValueError(f"bad disturbance key: {key!r}")
            dist.setdefault(parts[1], {})[parts[2]] = val
        elif key in _EXP_KEYS:
            exp[key] = val
        else:
            raise ValueError(f"unknown config key: {key!r}")

    disturbances = []
    for idx, entry in dist.items():
        if "time" not in entry or "impulse" not in entry:
            raise ValueError(f"disturbance {idx} needs both time and impulse")
        imp = np.atleast_1d(np.asarray(entry["impulse"], dtype=np.float64))
        disturbances.append((float(entry["time"]), imp))

    seeds = exp.get("seeds", [0])
    if isinstance(seeds, (int, float)):
        seeds = [int(seeds)]
    return ExperimentConfig(
        env_name=env_name,
        task=str(exp.get("task", "standing")),
        duration=float(exp.get("duration", 2.0)),
        seeds=tuple(int(s) for s in seeds),
        executor=str(exp.get("executor", "best_trajectory")),
        delay_mode=str(delay.get("mode", "fixed")),
        delay_steps=int(delay.get("steps", 1)),
        planner=PlannerConfig(**planner_kwargs),
        cost_overrides=cost_over,
        env_overrides=env_over,
        disturbances=tuple(disturbances),
        out_dir=exp.get("out"),
        label=str(exp.get("label", "run")),
        record_predictions=bool(exp.get("record_predictions", False)),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
