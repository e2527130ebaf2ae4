"""Planar locomotion environments with compliant point-foot contact.

Three built-in environments:

* ``double_integrator``: one force-controlled channel, no base, no contact.
  Smoke-test environment for the planner.
* ``planar_hopper``: floating base (x, z, pitch) with one two-link leg and a
  single point foot.
* ``planar_quadruped``: floating base with two two-link legs (front and
  rear), two point feet. A sagittal stand-in for a quadruped, with each
  visible leg standing in for a lateral pair.

Dynamics model: rigid base under gravity and contact wrenches; massless legs
with motor rotor inertia on each joint, back-driven by the contact force
through the leg Jacobian transpose (see _kernels for the contact law and
integrator). States are immutable snapshots; step() returns a new state.

The same compiled kernels serve single steps, single rollouts, and batched
rollouts, so closed-loop execution, state prediction, and planner rollouts
are bit-identical given identical inputs, for any rollout worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .costs import CostSpec, resolve
from .splines import DenseTrajectory, JointBounds

from numba import config as _numba_config
from numba import set_num_threads as _set_num_threads

COST_TERM_NAMES = (
    "height",
    "orientation",
    "posture",
    "contact_velocity",
    "contact_force",
    "terminal",
)


@dataclass
class EnvState:
    """Snapshot of the simulation state.

    base_pose is (x, z, pitch) for floating-base environments and empty for
    the double integrator; velocities mirror the layout.
    """

    base_pose: np.ndarray
    joint_positions: np.ndarray
    base_velocity: np.ndarray
    joint_velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.base_pose = np.asarray(self.base_pose, dtype=np.float64).reshape(-1)
        self.joint_positions = np.asarray(self.joint_positions, dtype=np.float64).reshape(-1)
        self.base_velocity = np.asarray(self.base_velocity, dtype=np.float64).reshape(-1)
        self.joint_velocities = np.asarray(self.joint_velocities, dtype=np.float64).reshape(-1)
        if self.base_pose.shape != self.base_velocity.shape:
            raise ValueError("base pose and base velocity must have equal shape")
        if self.joint_positions.shape != self.joint_velocities.shape:
            raise ValueError("joint positions and velocities must have equal shape")
        self.time = float(self.time)


@dataclass
class ContactInfo:
    """Per-foot contact summary for one control step (substep averages).

    point_speed is the substep-averaged |v_x| + |v_z| of the foot while in
    contact (zero for airborne feet); forces are zero when not in contact.
    """

    in_contact: np.ndarray
    normal_force: np.ndarray
    tangential_force: np.ndarray
    point_speed: np.ndarray


@dataclass
class EnvSpec:
    """Environment description: morphology, actuation, contact, limits."""

    name: str
    control_dim: int
    n_contacts: int
    joint_bounds: JointBounds
    q0: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    torque_limits: np.ndarray
    joint_inertia: np.ndarray
    joint_damping: np.ndarray
    mass: float = 1.0
    inertia: float = 0.1
    gravity: float = 9.81
    ground_z: float = 0.0
    contact_kn: float = 1e4
    contact_cn: float = 1e2
    contact_ct: float = 3e2
    contact_mu: float = 0.8
    fail_height: float = -np.inf
    dt_sim: float = 0.002
    hip_offsets: np.ndarray = None
    link_lengths: np.ndarray = None
    stand_height: float = 0.0
    f0: np.ndarray = None

    def __post_init__(self) -> None:
        d = self.control_dim
        for name in ("q0", "kp", "kd", "torque_limits", "joint_inertia", "joint_damping"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim == 0:
                arr = np.full(d, float(arr))
            if arr.shape != (d,):
                raise ValueError(f"{name} must broadcast to shape ({d},)")
            setattr(self, name, arr)
        if self.joint_bounds.dim != d:
            raise ValueError("joint bounds dimension mismatch")
        if self.dt_sim <= 0.0:
            raise ValueError("dt_sim must be positive")
        if self.hip_offsets is not None:
            self.hip_offsets = np.asarray(self.hip_offsets, dtype=np.float64).reshape(-1, 2)
        if self.link_lengths is not None:
            self.link_lengths = np.asarray(self.link_lengths, dtype=np.float64).reshape(-1, 2)
        if self.f0 is None:
            self.f0 = np.zeros(self.n_contacts)
        else:
            self.f0 = np.asarray(self.f0, dtype=np.float64).reshape(-1)


def pd_torque(command, state: EnvState, kp, kd, torque_limits) -> np.ndarray:
    """PD control law on joint targets, clipped to the torque limits.

    command is a (positions, velocities) pair of (d,) arrays.
    """
    q_des, v_des = command
    kp = np.asarray(kp, dtype=np.float64)
    kd = np.asarray(kd, dtype=np.float64)
    lim = np.asarray(torque_limits, dtype=np.float64)
    tau = kp * (np.asarray(q_des) - state.joint_positions) + kd * (
        np.asarray(v_des) - state.joint_velocities
    )
    return np.clip(tau, -lim, lim)


@dataclass
class BatchRollouts:
    """Stacked outputs of a rollout batch (slot n belongs to candidate n)."""

    costs: np.ndarray
    cost_terms: np.ndarray
    state_vectors: np.ndarray
    contacts: np.ndarray
    fail_steps: np.ndarray


@dataclass(eq=False)
class RolloutResult:
    """Outcome of simulating one dense trajectory from a start state."""

    cost: float
    cost_terms: dict
    state_vectors: np.ndarray
    contacts: np.ndarray
    failed: bool
    fail_step: int
    dense: DenseTrajectory
    start_time: float = 0.0
    _env: object = field(default=None, repr=False)

    @property
    def states(self) -> list:
        """Materialize the visited states (H+1 of them) as EnvState objects."""
        dt = self.dense.dt
        return [
            self._env.state_from_vector(self.state_vectors[h], self.start_time + h * dt)
            for h in range(self.state_vectors.shape[0])
        ]


def _resolve_workers(workers: int) -> int:
    return max(1, min(int(workers), int(_numba_config.NUMBA_NUM_THREADS)))


class _BaseEnv:
    """Shared plumbing for the built-in environments."""

    spec: EnvSpec
    nb: int

    @property
    def control_dim(self) -> int:
        return self.spec.control_dim

    @property
    def n_contacts(self) -> int:
        return self.spec.n_contacts

    @property
    def nq(self) -> int:
        return self.nb + self.spec.control_dim

    def state_to_vector(self, state: EnvState) -> np.ndarray:
        return np.concatenate(
            [state.base_pose, state.joint_positions,
             state.base_velocity, state.joint_velocities]
        )

    def state_from_vector(self, vec: np.ndarray, time: float = 0.0) -> EnvState:
        nq = self.nq
        nb = self.nb
        return EnvState(
            base_pose=vec[:nb].copy(),
            joint_positions=vec[nb:nq].copy(),
            base_velocity=vec[nq:nq + nb].copy(),
            joint_velocities=vec[nq + nb:].copy(),
            time=time,
        )

    def resolve_gains(self, kp=None, kd=None, torque_limits=None):
        d = self.spec.control_dim

        def _fill(value, default):
            if value is None:
                return default
            arr = np.asarray(value, dtype=np.float64)
            return np.full(d, float(arr)) if arr.ndim == 0 else arr

        return (
            _fill(kp, self.spec.kp),
            _fill(kd, self.spec.kd),
            _fill(torque_limits, self.spec.torque_limits),
        )

    def _substeps(self, dt: float) -> int:
        if dt <= 0.0:
            raise ValueError("step dt must be positive")
        return max(1, int(round(dt / self.spec.dt_sim)))

    def _check_state(self, state: EnvState) -> None:
        if state.base_pose.shape[0] != self.nb:
            raise ValueError("state base dimension does not match environment")
        if state.joint_positions.shape[0] != self.spec.control_dim:
            raise ValueError("state joint dimension does not match environment")

    def _check_targets(self, positions: np.ndarray) -> None:
        if positions.shape[-1] != self.spec.control_dim:
            raise ValueError("dense trajectory channel count does not match environment")

    def rollout(self, start: EnvState, dense: DenseTrajectory, cost_spec: CostSpec,
                gains=None) -> RolloutResult:
        """Simulate the dense targets under PD control and accumulate cost."""
        batch = self.rollout_batch(
            start, dense.positions[None], dense.velocities[None],
            cost_spec, dense.dt, gains=gains, workers=1,
        )
        terms = {
            name: float(batch.cost_terms[0, t])
            for t, name in enumerate(COST_TERM_NAMES)
        }
        fail_step = int(batch.fail_steps[0])
        return RolloutResult(
            cost=float(batch.costs[0]),
            cost_terms=terms,
            state_vectors=batch.state_vectors[0],
            contacts=batch.contacts[0],
            failed=fail_step >= 0,
            fail_step=fail_step,
            dense=dense,
            start_time=start.time,
            _env=self,
        )


class PlanarLeggedEnv(_BaseEnv):
    """Floating-base planar robot with massless two-link legs."""

    nb = 3

    def __init__(self, spec: EnvSpec):
        if spec.hip_offsets is None or spec.link_lengths is None:
            raise ValueError("legged environment needs hip offsets and link lengths")
        self.spec = spec
        n_legs = spec.hip_offsets.shape[0]
        if spec.control_dim != 2 * n_legs or spec.n_contacts != n_legs:
            raise ValueError("legged environment expects two joints and one foot per leg")
        par = np.empty(_k.PAR_LEG0 + _k.PAR_LEG_STRIDE * n_legs)
        par[_k.PAR_MASS] = spec.mass
        par[_k.PAR_INERTIA] = spec.inertia
        par[_k.PAR_GRAVITY] = spec.gravity
        par[_k.PAR_GROUND] = spec.ground_z
        par[_k.PAR_KN] = spec.contact_kn
        par[_k.PAR_CN] = spec.contact_cn
        par[_k.PAR_CT] = spec.contact_ct
        par[_k.PAR_MU] = spec.contact_mu
        par[_k.PAR_FAIL_Z] = spec.fail_height
        par[_k.PAR_NLEGS] = float(n_legs)
        for leg in range(n_legs):
            base = _k.PAR_LEG0 + _k.PAR_LEG_STRIDE * leg
            par[base + 0] = spec.hip_offsets[leg, 0]
            par[base + 1] = spec.hip_offsets[leg, 1]
            par[base + 2] = spec.link_lengths[leg, 0]
            par[base + 3] = spec.link_lengths[leg, 1]
        self._par = par
        self.n_legs = n_legs

    def foot_positions(self, state: EnvState) -> np.ndarray:
        """World (x, z) of each foot."""
        x, z, th = state.base_pose
        c, s = np.cos(th), np.sin(th)
        out = np.empty((self.n_legs, 2))
        for leg in range(self.n_legs):
            hx, hz = self.spec.hip_offsets[leg]
            l1, l2 = self.spec.link_lengths[leg]
            a1 = state.joint_positions[2 * leg]
            a2 = a1 + state.joint_positions[2 * leg + 1]
            fxb = hx + l1 * np.sin(a1) + l2 * np.sin(a2)
            fzb = hz - l1 * np.cos(a1) - l2 * np.cos(a2)
            out[leg, 0] = x + c * fxb - s * fzb
            out[leg, 1] = z + s * fxb + c * fzb
        return out

    def initial_state(self) -> EnvState:
        """Default posture, feet exactly on the ground, at rest."""
        return EnvState(
            base_pose=np.array([0.0, self.spec.stand_height, 0.0]),
            joint_positions=self.spec.q0.copy(),
            base_velocity=np.zeros(3),
            joint_velocities=np.zeros(self.spec.control_dim),
            time=0.0,
        )

    def step(self, state: EnvState, torque: np.ndarray, dt: float):
        """Advance one control step under constant torque.

        Returns (new_state, ContactInfo, failed). The torque is clipped to
        the spec limits.
        """
        self._check_state(state)
        nsub = self._substeps(dt)
        qp = np.concatenate([state.base_pose, state.joint_positions])
        qv = np.concatenate([state.base_velocity, state.joint_velocities])
        tau = np.clip(
            np.asarray(torque, dtype=np.float64),
            -self.spec.torque_limits, self.spec.torque_limits,
        )
        favg = np.empty((self.n_legs, 2))
        slip = np.empty(self.n_legs)
        cflag = np.empty(self.n_legs, dtype=np.uint8)
        fail = _k._planar_step(
            self._par, self.spec.joint_inertia, self.spec.joint_damping,
            qp, qv, tau, float(dt), nsub, favg, slip, cflag,
        )
        new_state = EnvState(
            base_pose=qp[:3], joint_positions=qp[3:],
            base_velocity=qv[:3], joint_velocities=qv[3:],
            time=state.time + dt,
        )
        info = ContactInfo(
            in_contact=cflag.astype(bool),
            normal_force=favg[:, 1].copy(),
            tangential_force=favg[:, 0].copy(),
            point_speed=slip.copy(),
        )
        return new_state, info, bool(fail)

    def rollout_batch(self, start: EnvState, pos_batch: np.ndarray,
                      vel_batch: np.ndarray, cost_spec: CostSpec, dt: float,
                      gains=None, workers: int = 1) -> BatchRollouts:
        """Roll out N dense trajectories from one start state.

        Candidate slots are independent, so the output is bit-identical for
        any worker count.
        """
        self._check_state(start)
        self._check_targets(pos_batch)
        spec = resolve(cost_spec, self.spec)
        kp, kd, lim = self.resolve_gains(*(gains or (None, None, None)))
        n, horizon, _ = pos_batch.shape
        nsub = self._substeps(dt)
        qp = np.concatenate([start.base_pose, start.joint_positions])
        qv = np.concatenate([start.base_velocity, start.joint_velocities])
        if spec.height_schedule:
            sched_t = np.array([t for t, _ in spec.height_schedule])
            sched_z = np.array([z for _, z in spec.height_schedule])
        else:
            sched_t = np.empty(0)
            sched_z = np.empty(0)
        term_on = 1 if spec.terminal_pitch_des is not None else 0
        term_val = float(spec.terminal_pitch_des or 0.0)

        costs = np.empty(n)
        terms = np.empty((n, _k.NUM_COST_TERMS))
        states = np.empty((n, horizon + 1, 2 * self.nq))
        contacts = np.empty((n, horizon, self.n_legs), dtype=np.uint8)
        fails = np.empty(n, dtype=np.int64)

        _set_num_threads(_resolve_workers(workers))
        _k._planar_rollout_batch(
            self._par, self.spec.joint_inertia, self.spec.joint_damping,
            kp, kd, lim, qp, qv, float(start.time),
            np.ascontiguousarray(pos_batch), np.ascontiguousarray(vel_batch),
            float(dt), nsub,
            spec.weights, spec.q0, spec.f0, float(spec.pitch_des),
            float(spec.p_des_z), float(spec.v_des_x),
            sched_t, sched_z, term_on, term_val,
            costs, states, contacts, terms, fails,
        )
        return BatchRollouts(costs, terms, states, contacts, fails)


class DoubleIntegratorEnv(_BaseEnv):
    """Force-controlled point mass on a line. No base, no contact, no gravity."""

    nb = 0

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.n_legs = 0

    def initial_state(self) -> EnvState:
        return EnvState(
            base_pose=np.empty(0),
            joint_positions=self.spec.q0.copy(),
            base_velocity=np.empty(0),
            joint_velocities=np.zeros(1),
            time=0.0,
        )

    def step(self, state: EnvState, torque: np.ndarray, dt: float):
        self._check_state(state)
        nsub = self._substeps(dt)
        qp = state.joint_positions.copy()
        qv = state.joint_velocities.copy()
        tau = np.clip(
            np.asarray(torque, dtype=np.float64),
            -self.spec.torque_limits, self.spec.torque_limits,
        )
        fail = _k._di_step(self.spec.mass, qp, qv, tau, float(dt), nsub)
        new_state = EnvState(
            base_pose=np.empty(0), joint_positions=qp,
            base_velocity=np.empty(0), joint_velocities=qv,
            time=state.time + dt,
        )
        info = ContactInfo(
            in_contact=np.empty(0, dtype=bool),
            normal_force=np.empty(0),
            tangential_force=np.empty(0),
            point_speed=np.empty(0),
        )
        return new_state, info, bool(fail)

    def rollout_batch(self, start: EnvState, pos_batch: np.ndarray,
                      vel_batch: np.ndarray, cost_spec: CostSpec, dt: float,
                      gains=None, workers: int = 1) -> BatchRollouts:
        self._check_state(start)
        self._check_targets(pos_batch)
        spec = resolve(cost_spec, self.spec)
        kp, kd, lim = self.resolve_gains(*(gains or (None, None, None)))
        n, horizon, _ = pos_batch.shape
        nsub = self._substeps(dt)
        costs = np.empty(n)
        terms = np.empty((n, _k.NUM_COST_TERMS))
        states = np.empty((n, horizon + 1, 2))
        contacts = np.empty((n, horizon, 0), dtype=np.uint8)
        fails = np.empty(n, dtype=np.int64)
        _set_num_threads(_resolve_workers(workers))
        _k._di_rollout_batch(
            self.spec.mass, kp, kd, lim,
            start.joint_positions, start.joint_velocities,
            np.ascontiguousarray(pos_batch), np.ascontiguousarray(vel_batch),
            float(dt), nsub, spec.weights, spec.q0,
            costs, states, terms, fails,
        )
        return BatchRollouts(costs, terms, states, contacts, fails)


def double_integrator(**overrides) -> DoubleIntegratorEnv:
    """Unit point mass; PD gains give a well-damped ~3 rad/s tracking loop."""
    defaults = dict(
        name="double_integrator",
        control_dim=1,
        n_contacts=0,
        joint_bounds=JointBounds(np.array([-50.0]), np.array([50.0])),
        q0=np.array([0.0]),
        kp=np.array([8.0]),
        kd=np.array([4.0]),
        torque_limits=np.array([20.0]),
        joint_inertia=np.array([1.0]),
        joint_damping=np.array([0.0]),
        mass=1.0,
        inertia=0.0,
        gravity=0.0,
        fail_height=-np.inf,
        dt_sim=0.002,
        stand_height=0.0,
    )
    defaults.update(overrides)
    defaults["mass"] = float(defaults["mass"])
    return DoubleIntegratorEnv(EnvSpec(**defaults))


def _finish_legged(defaults: dict, overrides: dict) -> PlanarLeggedEnv:
    defaults.update(overrides)
    spec = EnvSpec(**defaults)
    # Standing height: base placed so the lowest foot touches the ground in
    # the default posture.
    drop = np.inf
    for leg in range(spec.hip_offsets.shape[0]):
        a1 = spec.q0[2 * leg]
        a2 = a1 + spec.q0[2 * leg + 1]
        l1, l2 = spec.link_lengths[leg]
        fzb = spec.hip_offsets[leg, 1] - l1 * np.cos(a1) - l2 * np.cos(a2)
        drop = min(drop, fzb)
    spec.stand_height = float(spec.ground_z - drop)
    n_legs = spec.hip_offsets.shape[0]
    spec.f0 = np.full(n_legs, spec.mass * spec.gravity / n_legs)
    return PlanarLeggedEnv(spec)


def planar_hopper(**overrides) -> PlanarLeggedEnv:
    """One-legged planar hopper, leg geometry sized like a small quadruped's."""
    defaults = dict(
        name="planar_hopper",
        control_dim=2,
        n_contacts=1,
        joint_bounds=JointBounds(np.array([-1.2, -2.4]), np.array([1.2, -0.15])),
        q0=np.array([0.5, -1.0]),
        kp=np.array([90.0, 90.0]),
        kd=np.array([2.0, 2.0]),
        # One leg does the work of four: a hopper needs a power-dense knee
        # to lift its own stand height, so the limit sits well above the
        # quadruped's per-joint budget.
        torque_limits=np.array([60.0, 60.0]),
        joint_inertia=np.array([0.08, 0.08]),
        joint_damping=np.array([0.1, 0.1]),
        mass=5.0,
        inertia=0.05,
        contact_mu=0.9,
        fail_height=0.12,
        hip_offsets=np.array([[0.0, -0.05]]),
        link_lengths=np.array([[0.213, 0.213]]),
    )
    return _finish_legged(defaults, overrides)


def planar_quadruped(**overrides) -> PlanarLeggedEnv:
    """Sagittal quadruped stand-in: rigid trunk, front and rear leg pairs."""
    defaults = dict(
        name="planar_quadruped",
        control_dim=4,
        n_contacts=2,
        joint_bounds=JointBounds(
            np.array([-1.3, -2.4, -1.3, -2.4]),
            np.array([1.3, -0.15, 1.3, -0.15]),
        ),
        q0=np.array([0.4, -0.8, 0.4, -0.8]),
        kp=np.array([100.0, 100.0, 100.0, 100.0]),
        kd=np.array([2.0, 2.0, 2.0, 2.0]),
        torque_limits=np.array([28.0, 28.0, 28.0, 28.0]),
        joint_inertia=np.array([0.08, 0.08, 0.08, 0.08]),
        joint_damping=np.array([0.1, 0.1, 0.1, 0.1]),
        mass=10.0,
        inertia=0.25,
        contact_mu=0.9,
        fail_height=0.10,
        hip_offsets=np.array([[0.25, -0.03], [-0.25, -0.03]]),
        link_lengths=np.array([[0.16, 0.16], [0.16, 0.16]]),
    )
    return _finish_legged(defaults, overrides)


_BUILDERS = {
    "double_integrator": double_integrator,
    "planar_hopper": planar_hopper,
    "planar_quadruped": planar_quadruped,
}


def make_env(name: str, **overrides):
    """Build a built-in environment by name, applying spec overrides."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; expected one of {sorted(_BUILDERS)}"
        ) from None
    return builder(**overrides)
