"""Sampling-based spline MPC planner.

Each control step runs a small number of annealed sampling iterations. The
planner keeps two trajectories between control steps:

* the nominal, updated every iteration as the exponentially weighted average
  of the sampled candidates (a mixture no rollout has tested as a whole),
* the best, the lowest-cost trajectory that has itself been fully simulated.

Executed commands always come from a fully simulated trajectory: on each
control step the shifted previous best is re-simulated from the (predicted)
current state, candidates compete against it, and with the default executor
the first command of the final best is returned. The nominal_only executor
returns the first command of the final nominal instead, which ablates the
best-trajectory mechanism.

Sampling noise is deterministic: candidate n of iteration i at control step
t draws from a counter-based generator keyed on (seed, t, i, n), so results
do not depend on evaluation order or on the rollout worker count. Sample 0
is always the unperturbed nominal and consumes no draws.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .costs import CostSpec, resolve
from .env import EnvState, pd_torque
from .schedule import NoiseSchedule, build_schedule
from .splines import (
    DenseTrajectory,
    SplineKind,
    SplineTrajectory,
    clamp_velocities,
    dense_batch,
    resample_nodes,
)


class PlanningFailure(RuntimeError):
    """Raised when every rollout of a sampling step failed."""


@dataclass
class PlannerConfig:
    """Planner knobs. Defaults give a 0.9 s horizon at 50 Hz with 4 nodes.

    scale_q / scale_v are base noise standard deviations (rad, rad/s) per
    channel (scalars broadcast); the schedule multiplies them per iteration
    and node. kp / kd / torque_limits default to the environment's values
    when left as None. workers only affects rollout scheduling, never
    results.
    """

    horizon_steps: int = 45
    control_dt: float = 0.02
    node_count: int = 4
    iterations: int = 3
    samples: int = 30
    temperature: float = 0.1
    beta1: float = 1.0
    beta2: float = 1.0
    scale_q: float = 0.3
    scale_v: float = 2.0
    kp: object = None
    kd: object = None
    torque_limits: object = None
    seed: int = 0
    spline: SplineKind = SplineKind.HERMITE
    workers: int = 1

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if self.horizon_steps < self.node_count:
            raise ValueError("horizon_steps must be >= node_count")
        if self.samples < 2:
            raise ValueError("samples must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.control_dt <= 0.0:
            raise ValueError("control_dt must be positive")
        if self.beta1 <= 0.0 or self.beta2 <= 0.0:
            raise ValueError("beta1 and beta2 must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.spline = SplineKind.parse(self.spline)

    @property
    def node_spacing(self) -> float:
        return (self.horizon_steps - 1) * self.control_dt / (self.node_count - 1)

    def node_times(self) -> np.ndarray:
        return np.linspace(
            0.0, (self.horizon_steps - 1) * self.control_dt, self.node_count
        )


@dataclass
class PlanDiagnostics:
    """Bookkeeping for one plan_step call."""

    best_costs: np.ndarray = field(default_factory=lambda: np.empty(0))
    nominal_costs: np.ndarray = field(default_factory=lambda: np.empty(0))
    warm_start_cost: float = math.inf
    improvement: bool = False
    best_source: object = "warm_start"
    failed_rollouts: int = 0
    wall_time_ms: float = 0.0

    @property
    def final_cost(self) -> float:
        """Cost of the best fully simulated trajectory after all iterations."""
        return float(self.best_costs[-1]) if self.best_costs.size else self.warm_start_cost


def compute_weights(costs, temperature: float) -> np.ndarray:
    """Exponential weights on min-max normalized costs.

    Costs of +inf (failed rollouts) are excluded from the normalization and
    get weight exactly 0. Degenerate spread (max == min) yields uniform
    weights over the finite entries. All costs infinite raises
    PlanningFailure; NaN or -inf raises ValueError.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    if np.any(np.isnan(costs)) or np.any(np.isneginf(costs)):
        raise ValueError("costs must be finite or +inf")
    finite = np.isfinite(costs)
    if not finite.any():
        raise PlanningFailure("every rollout failed")
    smin = costs[finite].min()
    smax = costs[finite].max()
    if smax == smin:
        weights = finite / finite.sum()
        return weights.astype(np.float64)
    normalized = np.where(finite, (costs - smin) / (smax - smin), np.inf)
    weights = np.where(finite, np.exp(-normalized / temperature), 0.0)
    return weights / weights.sum()


def update_nominal(positions, velocities, weights):
    """Elementwise convex combination of dense candidate grids.

    positions / velocities are (N, H, d), weights (N,) summing to one.
    """
    weights = np.asarray(weights, dtype=np.float64)
    pos = np.einsum("n,nhd->hd", weights, np.asarray(positions, dtype=np.float64))
    vel = np.einsum("n,nhd->hd", weights, np.asarray(velocities, dtype=np.float64))
    return pos, vel


def update_best(current_best, candidates, nominal_result=None):
    """Fold rolled-out candidates into the running best (trajectory, cost).

    current_best is a (DenseTrajectory, cost) pair or None; candidates an
    iterable of such pairs (include the nominal's rollout as a candidate, or
    pass it separately as nominal_result). Ties keep the incumbent. The
    returned trajectory is one of the input objects, never a mixture.
    """
    best = current_best
    pool = list(candidates)
    if nominal_result is not None:
        pool.append(nominal_result)
    for pair in pool:
        traj, cost = pair[0], float(pair[1])
        if best is None or cost < best[1]:
            best = (traj, cost)
    if best is None:
        raise ValueError("update_best needs at least one candidate")
    return best


def shift_trajectory(dense: DenseTrajectory, executed_steps: int) -> DenseTrajectory:
    """Drop the first executed_steps rows and pad by repeating the last row."""
    if executed_steps < 0:
        raise ValueError("executed_steps must be >= 0")
    if executed_steps >= dense.steps:
        raise ValueError("cannot shift past the end of the trajectory")
    if executed_steps == 0:
        return dense.copy()
    pad_pos = np.repeat(dense.positions[-1:], executed_steps, axis=0)
    pad_vel = np.repeat(dense.velocities[-1:], executed_steps, axis=0)
    return DenseTrajectory(
        np.concatenate([dense.positions[executed_steps:], pad_pos]),
        np.concatenate([dense.velocities[executed_steps:], pad_vel]),
        dense.dt,
    )


def execute_prefix(state: EnvState, dense: DenseTrajectory, steps: int, env,
                   gains=None, on_step=None, pre_step=None):
    """Run the first `steps` commands of a dense trajectory through the env.

    The shared execution path for state prediction and the closed-loop
    harness, so predicted and actually reached states are bit-identical in
    the absence of disturbances. pre_step(j, state) -> state may replace the
    state before the torque computation (disturbance injection); on_step is
    called after each step. Stops early on failure. Returns
    (final_state, failed).
    """
    kp, kd, lim = env.resolve_gains(*(gains or (None, None, None)))
    current = state
    for j in range(steps):
        if pre_step is not None:
            current = pre_step(j, current)
        tau = pd_torque(dense.command(j), current, kp, kd, lim)
        current, contact, failed = env.step(current, tau, dense.dt)
        if on_step is not None:
            on_step(j, dense.command(j), tau, current, contact, failed)
        if failed:
            return current, True
    return current, False


def predict_state(state: EnvState, best: DenseTrajectory, planning_delay: float,
                  env, gains=None) -> EnvState:
    """Simulate the prefix of the best trajectory over the planning delay.

    The planner plans for the state the robot will have reached once the
    plan is ready; floor(planning_delay / dt) commands of the current best
    are assumed to execute meanwhile.
    """
    if planning_delay < 0.0:
        raise ValueError("planning delay must be >= 0")
    steps = int(math.floor(planning_delay / best.dt + 1e-9))
    if steps > best.steps:
        raise ValueError("planning delay exceeds the trajectory span")
    if steps == 0:
        return EnvState(
            base_pose=state.base_pose.copy(),
            joint_positions=state.joint_positions.copy(),
            base_velocity=state.base_velocity.copy(),
            joint_velocities=state.joint_velocities.copy(),
            time=state.time,
        )
    final, _ = execute_prefix(state, best, steps, env, gains)
    return final


def initial_trajectory(env, config: PlannerConfig, state: EnvState = None) -> DenseTrajectory:
    """Constant default-posture hold: node positions at q0, velocities zero."""
    q0 = state.joint_positions if state is not None else env.spec.q0
    pos = np.tile(q0, (config.horizon_steps, 1)).astype(np.float64)
    vel = np.zeros_like(pos)
    return DenseTrajectory(pos, vel, config.control_dt)


def sample_control_points(
    nominal: SplineTrajectory,
    schedule: NoiseSchedule,
    iteration: int,
    sample_index: int,
    rng_root: int,
    *,
    step_index: int = 0,
    scale_q=0.3,
    scale_v=2.0,
    bounds=None,
) -> SplineTrajectory:
    """Perturb the nominal's nodes for one candidate.

    Sample 0 is the nominal itself (no RNG consumed). Other samples draw
    node position and velocity noise from a generator keyed on
    (rng_root, step_index, iteration, sample_index), scale it by the
    schedule multiplier for (iteration, node), clip positions into bounds,
    and clamp velocities with the overshoot bound.
    """
    if sample_index == 0:
        return nominal
    if not 1 <= iteration <= schedule.iterations:
        raise IndexError(f"iteration {iteration} outside 1..{schedule.iterations}")
    gen = np.random.Generator(
        np.random.Philox(
            np.random.SeedSequence((int(rng_root), int(step_index),
                                    int(iteration), int(sample_index)))
        )
    )
    k, d = nominal.positions.shape
    eps = gen.standard_normal((k, 2, d))
    factors = schedule.row(iteration)[:, None]
    positions = nominal.positions + factors * np.asarray(scale_q) * eps[:, 0]
    velocities = nominal.velocities + factors * np.asarray(scale_v) * eps[:, 1]
    if bounds is not None:
        positions, velocities = clamp_velocities(
            positions, velocities, bounds, nominal.spacing
        )
    return SplineTrajectory(nominal.times, positions, velocities, kind=nominal.kind)


def _as_pairs(batch, dt):
    """View batch rollout slots as (DenseTrajectory, cost) pairs (test aid)."""
    return [
        (DenseTrajectory(batch[0][n], batch[1][n], dt), float(batch[2][n]))
        for n in range(batch[2].shape[0])
    ]


def plan_step(
    state: EnvState,
    prev_best: DenseTrajectory,
    env,
    cost_spec: CostSpec,
    config: PlannerConfig,
    noise_schedule: NoiseSchedule = None,
    *,
    step_index: int = 0,
    executor: str = "best_trajectory",
):
    """One full planning cycle from a (predicted) state.

    prev_best must already be shifted to start at `state`. Returns
    (command, trajectory, diagnostics) where command is the (positions,
    velocities) pair for the next control step and trajectory is what the
    caller should warm-start from next cycle (the best trajectory, or the
    final nominal under the nominal_only executor).

    The candidate loop is equivalent to folding update_best over every
    rolled-out candidate, seeded with the re-simulated previous best.
    """
    t_begin = time.perf_counter()
    if executor not in ("best_trajectory", "nominal_only"):
        raise ValueError("executor must be 'best_trajectory' or 'nominal_only'")
    horizon = config.horizon_steps
    dt = config.control_dt
    if prev_best.steps != horizon:
        raise ValueError("prev_best horizon does not match the planner config")
    if prev_best.dim != env.spec.control_dim:
        raise ValueError("prev_best channels do not match the environment")
    spec = resolve(cost_spec, env.spec)
    gains = env.resolve_gains(config.kp, config.kd, config.torque_limits)
    if config.iterations >= 1 and noise_schedule is None:
        noise_schedule = build_schedule(
            config.iterations, config.node_count, config.beta1, config.beta2
        )
    node_times = config.node_times()
    spacing = config.node_spacing
    bounds = env.spec.joint_bounds
    n_samples = config.samples
    kdim = config.node_count
    d = env.spec.control_dim

    # The shifted previous best is re-simulated from the current state so its
    # stored cost is commensurate with this cycle's candidates.
    warm = env.rollout_batch(
        state, prev_best.positions[None], prev_best.velocities[None],
        spec, dt, gains=gains, workers=1,
    )
    warm_cost = float(warm.costs[0])
    best_traj = prev_best
    best_cost = warm_cost
    best_source = "warm_start"
    improvement = False
    failed_rollouts = int(warm.fail_steps[0] >= 0)

    nominal = prev_best
    best_costs = np.empty(config.iterations)
    nominal_costs = np.empty(config.iterations)
    row_at = 0

    for i in range(config.iterations, 0, -1):
        nodes = resample_nodes(nominal, node_times, kind=config.spline)
        node_pos, node_vel = clamp_velocities(
            nodes.positions, nodes.velocities, bounds, spacing
        )
        factors = noise_schedule.row(i)[:, None]
        q_batch = np.empty((n_samples, kdim, d))
        v_batch = np.empty((n_samples, kdim, d))
        q_batch[0] = node_pos
        v_batch[0] = node_vel
        for n in range(1, n_samples):
            gen = np.random.Generator(
                np.random.Philox(
                    np.random.SeedSequence(
                        (int(config.seed), int(step_index), int(i), int(n))
                    )
                )
            )
            eps = gen.standard_normal((kdim, 2, d))
            qn = node_pos + factors * np.asarray(config.scale_q) * eps[:, 0]
            vn = node_vel + factors * np.asarray(config.scale_v) * eps[:, 1]
            q_batch[n], v_batch[n] = clamp_velocities(qn, vn, bounds, spacing)

        pos_batch, vel_batch = dense_batch(
            config.spline, node_times, q_batch, v_batch, horizon, dt
        )
        batch = env.rollout_batch(
            state, pos_batch, vel_batch, spec, dt,
            gains=gains, workers=config.workers,
        )
        failed_rollouts += int(np.sum(batch.fail_steps >= 0))
        nominal_costs[row_at] = batch.costs[0]

        finite = np.isfinite(batch.costs)
        if finite.any():
            weights = compute_weights(batch.costs, config.temperature)
            npos, nvel = update_nominal(pos_batch, vel_batch, weights)
            nominal = DenseTrajectory(npos, nvel, dt)
            n_min = int(np.argmin(batch.costs))
            if batch.costs[n_min] < best_cost:
                best_cost = float(batch.costs[n_min])
                best_traj = DenseTrajectory(
                    pos_batch[n_min].copy(), vel_batch[n_min].copy(), dt
                )
                best_source = (i, n_min)
                improvement = True
        best_costs[row_at] = best_cost
        row_at += 1

    if not math.isfinite(best_cost):
        # No candidate (and not even the warm start) survived to the horizon
        # end, so there is no fully simulated trajectory to execute from.
        raise PlanningFailure(
            f"no rollout reached the horizon at control step {step_index}"
        )
    chosen = nominal if executor == "nominal_only" else best_traj
    command = (chosen.positions[0].copy(), chosen.velocities[0].copy())
    diag = PlanDiagnostics(
        best_costs=best_costs,
        nominal_costs=nominal_costs,
        warm_start_cost=warm_cost,
        improvement=improvement,
        best_source=best_source,
        failed_rollouts=failed_rollouts,
        wall_time_ms=(time.perf_counter() - t_begin) * 1e3,
    )
    return command, chosen, diag
