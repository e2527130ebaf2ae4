"""Sampling-based spline MPC for planar legged robots.

A reference-free predictive controller: joint trajectories are low-
dimensional splines over both positions and velocities, candidates are
sampled with an annealed noise schedule, and the executed command always
comes from the lowest-cost trajectory that was itself fully simulated.
"""

from __future__ import annotations

from .costs import (
    CostSpec,
    height_target,
    resolve,
    running_cost,
    task_presets,
    terminal_cost,
)
from .env import (
    COST_TERM_NAMES,
    BatchRollouts,
    ContactInfo,
    DoubleIntegratorEnv,
    EnvSpec,
    EnvState,
    PlanarLeggedEnv,
    RolloutResult,
    double_integrator,
    make_env,
    pd_torque,
    planar_hopper,
    planar_quadruped,
)
from .harness import (
    ExperimentConfig,
    RunLog,
    ablation_table,
    export,
    load_config,
    load_raw,
    parse_config,
    run,
    run_ablation,
)
from .planner import (
    PlanDiagnostics,
    PlannerConfig,
    PlanningFailure,
    compute_weights,
    execute_prefix,
    initial_trajectory,
    plan_step,
    predict_state,
    sample_control_points,
    shift_trajectory,
    update_best,
    update_nominal,
)
from .schedule import NoiseSchedule, build_schedule, sigma
from .splines import (
    DenseTrajectory,
    JointBounds,
    SplineKind,
    SplineNode,
    SplineTrajectory,
    clamp_node_velocity,
    clamp_velocities,
    dense_batch,
    evaluate,
    hermite_basis,
    resample_nodes,
    to_dense,
)

__version__ = "0.1.0"

__all__ = [
    "BatchRollouts",
    "COST_TERM_NAMES",
    "ContactInfo",
    "CostSpec",
    "DenseTrajectory",
    "DoubleIntegratorEnv",
    "EnvSpec",
    "EnvState",
    "ExperimentConfig",
    "JointBounds",
    "NoiseSchedule",
    "PlanarLeggedEnv",
    "PlanDiagnostics",
    "PlannerConfig",
    "PlanningFailure",
    "RolloutResult",
    "RunLog",
    "SplineKind",
    "SplineNode",
    "SplineTrajectory",
    "ablation_table",
    "build_schedule",
    "clamp_node_velocity",
    "clamp_velocities",
    "compute_weights",
    "dense_batch",
    "double_integrator",
    "evaluate",
    "execute_prefix",
    "export",
    "height_target",
    "hermite_basis",
    "initial_trajectory",
    "load_config",
    "load_raw",
    "make_env",
    "parse_config",
    "pd_torque",
    "plan_step",
    "planar_hopper",
    "planar_quadruped",
    "predict_state",
    "resample_nodes",
    "resolve",
    "run",
    "run_ablation",
    "running_cost",
    "sample_control_points",
    "shift_trajectory",
    "sigma",
    "task_presets",
    "terminal_cost",
    "to_dense",
    "update_best",
    "update_nominal",
]
