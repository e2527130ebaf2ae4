"""Task objectives for the planar locomotion environments.

The running cost per control step combines base height tracking, pitch
tracking, posture regularization, contact slip, and contact force deviation
from the nominal support load:

    c = w_h |z - z_des(t)| + w_orient (pitch - pitch_des)^2
        + w_q ||q - q0||^2 + w_c_vel sum(slip) + w_c_force ||f - f0||_1

The terminal cost pulls the final base position toward the start position
advanced by the commanded planar velocity over the horizon:

    c_T = w_terminal ( |x_H - (x_0 + v_des H dt)| + |z_H - z_des(t_H)| )

plus an optional terminal pitch objective weighted by w_orient (used by the
flip preset). The commanded height z_des(t) is a step schedule in absolute
time so a height jump command enters the horizon through the terminal cost
before the current time reaches the step.

Environments without a floating base (the double integrator) only use the
posture term; every other term reads as zero.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class CostSpec:
    """Weights and targets for one task. Unset targets (None) are filled
    from the environment by resolve()."""

    w_h: float = 0.0
    w_orient: float = 0.0
    w_q: float = 0.0
    w_c_vel: float = 0.0
    w_c_force: float = 0.0
    w_terminal: float = 0.0
    p_des_z: float | None = None
    pitch_des: float = 0.0
    q0: np.ndarray | None = None
    f0: np.ndarray | None = None
    v_des_x: float = 0.0
    height_schedule: tuple[tuple[float, float], ...] | None = None
    terminal_pitch_des: float | None = None
    name: str = ""

    def __post_init__(self) -> None:
        for w in (self.w_h, self.w_orient, self.w_q, self.w_c_vel,
                  self.w_c_force, self.w_terminal):
            if w < 0.0:
                raise ValueError("cost weights must be non-negative")
        if self.q0 is not None:
            self.q0 = np.atleast_1d(np.asarray(self.q0, dtype=np.float64))
        if self.f0 is not None:
            self.f0 = np.atleast_1d(np.asarray(self.f0, dtype=np.float64))
        if self.height_schedule is not None:
            sched = tuple(
                (float(t), float(z)) for t, z in self.height_schedule
            )
            times = [t for t, _ in sched]
            if sorted(times) != times:
                raise ValueError("height schedule times must be ascending")
            self.height_schedule = sched

    @property
    def weights(self) -> np.ndarray:
        """Weight vector in kernel term order (height, orient, posture,
        contact velocity, contact force, terminal)."""
        return np.array(
            [self.w_h, self.w_orient, self.w_q, self.w_c_vel,
             self.w_c_force, self.w_terminal],
            dtype=np.float64,
        )


def height_target(spec: CostSpec, t: float) -> float:
    """Commanded base height at absolute time t (step schedule lookup)."""
    if spec.p_des_z is None:
        raise ValueError("cost spec has no height target; resolve() it first")
    z = float(spec.p_des_z)
    if spec.height_schedule:
        for t_step, z_step in spec.height_schedule:
            if t >= t_step:
                z = z_step
    return z


def resolve(spec: CostSpec, env_spec) -> CostSpec:
    """Fill unset targets (q0, f0, p_des_z) from an environment spec."""
    q0 = spec.q0 if spec.q0 is not None else np.asarray(env_spec.q0, dtype=np.float64).copy()
    f0 = spec.f0 if spec.f0 is not None else np.asarray(env_spec.f0, dtype=np.float64).copy()
    p_des_z = spec.p_des_z if spec.p_des_z is not None else float(env_spec.stand_height)
    if q0.shape[0] != env_spec.control_dim:
        raise ValueError("cost q0 dimension does not match the environment")
    if f0.shape[0] != env_spec.n_contacts:
        raise ValueError("cost f0 length does not match the contact count")
    return dataclasses.replace(spec, q0=q0, f0=f0, p_des_z=p_des_z)


def running_cost(state, contacts, spec: CostSpec):
    """Reference implementation of the per-step cost.

    state is an EnvState, contacts the matching ContactInfo (substep
    averages). Returns (total, terms) with terms keyed by name. The compiled
    rollout kernels accumulate the same formulas.
    """
    if spec.q0 is None:
        raise ValueError("cost spec is unresolved; call resolve() first")
    terms = {
        "height": 0.0,
        "orientation": 0.0,
        "posture": 0.0,
        "contact_velocity": 0.0,
        "contact_force": 0.0,
    }
    if state.base_pose.shape[0] > 0:
        z_tgt = height_target(spec, state.time)
        terms["height"] = spec.w_h * abs(float(state.base_pose[1]) - z_tgt)
        dpitch = float(state.base_pose[2]) - spec.pitch_des
        terms["orientation"] = spec.w_orient * dpitch * dpitch
    dq = state.joint_positions - spec.q0
    terms["posture"] = spec.w_q * float(np.dot(dq, dq))
    if contacts is not None and contacts.normal_force.shape[0] > 0:
        terms["contact_velocity"] = spec.w_c_vel * float(
            np.sum(contacts.point_speed)
        )
        terms["contact_force"] = spec.w_c_force * float(
            np.sum(
                np.abs(contacts.tangential_force)
                + np.abs(contacts.normal_force - spec.f0)
            )
        )
    return sum(terms.values()), terms


def terminal_cost(final_state, start_state, horizon_duration: float, spec: CostSpec) -> float:
    """Terminal pull toward the commanded displacement and height."""
    if final_state.base_pose.shape[0] == 0:
        return 0.0
    tx = float(start_state.base_pose[0]) + spec.v_des_x * horizon_duration
    tz = height_target(spec, float(final_state.time))
    cost = spec.w_terminal * (
        abs(float(final_state.base_pose[0]) - tx)
        + abs(float(final_state.base_pose[1]) - tz)
    )
    if spec.terminal_pitch_des is not None:
        dpitch = float(final_state.base_pose[2]) - spec.terminal_pitch_des
        cost += spec.w_orient * dpitch * dpitch
    return cost


def task_presets() -> dict[str, CostSpec]:
    """Named task objectives with the stock weight table.

    Targets left as None (posture, nominal forces, base height) are filled
    per environment by resolve(). The jumping preset installs a commanded
    height step from 0.325 m to 0.7 m at t = 2 s; scale both values when the
    environment geometry differs. The flip preset is experimental: a single
    commanded 180 degree pitch at the horizon end.
    """
    return {
        "walking": CostSpec(
            w_h=1e2, w_orient=10.0, w_q=0.0, w_c_vel=0.5, w_c_force=5e-2,
            w_terminal=2.5e3, v_des_x=0.5, name="walking",
        ),
        "standing": CostSpec(
            w_h=1e2, w_orient=10.0, w_q=0.0, w_c_vel=0.5, w_c_force=5e-2,
            w_terminal=2.5e3, v_des_x=0.0, name="standing",
        ),
        "jumping": CostSpec(
            w_h=1.0, w_orient=0.5, w_q=0.3, w_c_vel=1.0, w_c_force=5e-4,
            w_terminal=2e3, p_des_z=0.325,
            height_schedule=((2.0, 0.7),), name="jumping",
        ),
        "handstand": CostSpec(
            w_h=50.0, w_orient=10.0, w_q=0.3, w_c_vel=1.0, w_c_force=5e-4,
            w_terminal=0.0, pitch_des=math.pi / 4.0, name="handstand",
        ),
        "backflip_analogue": CostSpec(
            w_h=1.0, w_orient=0.5, w_q=0.3, w_c_vel=1.0, w_c_force=5e-4,
            w_terminal=2e3, terminal_pitch_des=math.pi, name="backflip_analogue",
        ),
    }
