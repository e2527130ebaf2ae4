"""Compiled stepping and rollout kernels for the planar environments.

The planar legged model: the base is a rigid body in the sagittal plane
(x, z, pitch) under gravity plus contact wrenches at the feet. Legs are
massless two-link chains; each joint is a motor rotor integrator that is
back-driven by the contact force through the leg Jacobian transpose. The
actuation reaction torque on the base is neglected (massless-link
approximation), which keeps the model energy-consistent: contact power
f . v_foot splits exactly between the base wrench term and the
Jacobian-transpose joint term.

Contact is a compliant spring-damper: normal force
max(0, kn * penetration - cn * normal_velocity) while penetrating, plus
tangential viscous friction -ct * v_t capped at mu times the normal force.

Integration is semi-implicit Euler (velocities first, then positions) at
dt / nsub. Torque is held constant across the substeps of one control step.

State vectors are [x, z, pitch, q_0..q_{d-1}] with matching velocities; the
double integrator uses the one-channel form [q].

Parameter array layout (PAR_* indices below): base mass, base inertia,
gravity, ground height, contact gains, failure height, leg count, then four
scalars per leg (hip offset x, hip offset z, thigh length, shank length).

Everything here is deterministic: no RNG, no reductions across parallel
rollout slots, so results are bit-identical for any worker count.
"""

import math
import os

# The sandbox may expose a single core; the rollout worker knob still has to
# accept up to 8 workers, so raise the numba ceiling before it initializes.
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np
from numba import njit, prange

PAR_MASS = 0
PAR_INERTIA = 1
PAR_GRAVITY = 2
PAR_GROUND = 3
PAR_KN = 4
PAR_CN = 5
PAR_CT = 6
PAR_MU = 7
PAR_FAIL_Z = 8
PAR_NLEGS = 9
PAR_LEG0 = 10
PAR_LEG_STRIDE = 4

NUM_COST_TERMS = 6
TERM_HEIGHT = 0
TERM_ORIENT = 1
TERM_POSTURE = 2
TERM_CONTACT_VEL = 3
TERM_CONTACT_FORCE = 4
TERM_TERMINAL = 5


@njit(cache=True)
def _height_target(sched_t, sched_z, default_z, t):
    z = default_z
    for idx in range(sched_t.shape[0]):
        if t >= sched_t[idx]:
            z = sched_z[idx]
    return z


@njit(cache=True)
def _planar_step(
    par,
    joint_inertia,
    joint_damping,
    qpos,
    qvel,
    tau,
    dt,
    nsub,
    force_avg,
    slip_accum,
    contact_flag,
):
    """One control step with constant torque. Mutates qpos/qvel in place.

    force_avg (n_legs, 2) receives substep-averaged (tangential, normal)
    force per foot; slip_accum (n_legs,) the averaged |v_t| + |v_n| of feet
    while in contact; contact_flag (n_legs,) is set to 1 if the foot touched
    at any substep. Returns 1 on failure (base under the failure height or
    non-finite state), else 0.
    """
    nlegs = int(par[PAR_NLEGS])
    g = par[PAR_GRAVITY]
    m = par[PAR_MASS]
    iy = par[PAR_INERTIA]
    ground = par[PAR_GROUND]
    kn = par[PAR_KN]
    cn = par[PAR_CN]
    ct = par[PAR_CT]
    mu = par[PAR_MU]
    fail_z = par[PAR_FAIL_Z]
    d = 2 * nlegs
    h = dt / nsub
    inv_nsub = 1.0 / nsub

    for leg in range(nlegs):
        force_avg[leg, 0] = 0.0
        force_avg[leg, 1] = 0.0
        slip_accum[leg] = 0.0
        contact_flag[leg] = 0

    for _ in range(nsub):
        x = qpos[0]
        z = qpos[1]
        th = qpos[2]
        vx = qvel[0]
        vz = qvel[1]
        w = qvel[2]
        c = math.cos(th)
        s = math.sin(th)

        fx_sum = 0.0
        fz_sum = 0.0
        tq_sum = 0.0

        for leg in range(nlegs):
            base = PAR_LEG0 + PAR_LEG_STRIDE * leg
            hx = par[base + 0]
            hz = par[base + 1]
            l1 = par[base + 2]
            l2 = par[base + 3]
            j0 = 3 + 2 * leg
            a1 = qpos[j0]
            a2 = a1 + qpos[j0 + 1]
            s1 = math.sin(a1)
            c1 = math.cos(a1)
            s2 = math.sin(a2)
            c2 = math.cos(a2)

            # Foot position relative to the base origin, body frame. Joint
            # angle zero points the link straight down.
            fxb = hx + l1 * s1 + l2 * s2
            fzb = hz - l1 * c1 - l2 * c2
            rwx = c * fxb - s * fzb
            rwz = s * fxb + c * fzb
            pfz = z + rwz

            pen = ground - pfz
            if pen > 0.0:
                # Body-frame Jacobian of the foot w.r.t. the two leg joints.
                j11 = l1 * c1 + l2 * c2
                j12 = l2 * c2
                j21 = l1 * s1 + l2 * s2
                j22 = l2 * s2
                dq1 = qvel[j0]
                dq2 = qvel[j0 + 1]
                vqx = j11 * dq1 + j12 * dq2
                vqz = j21 * dq1 + j22 * dq2
                vfx = vx - w * rwz + c * vqx - s * vqz
                vfz = vz + w * rwx + s * vqx + c * vqz

                fn = kn * pen - cn * vfz
                if fn < 0.0:
                    fn = 0.0
                ftan = -ct * vfx
                cap = mu * fn
                if ftan > cap:
                    ftan = cap
                elif ftan < -cap:
                    ftan = -cap

                fx_sum += ftan
                fz_sum += fn
                tq_sum += rwx * fn - rwz * ftan

                # World-frame Jacobian transpose maps the force back onto
                # the leg joints.
                jw11 = c * j11 - s * j21
                jw12 = c * j12 - s * j22
                jw21 = s * j11 + c * j21
                jw22 = s * j12 + c * j22
                qvel[j0] += (
                    (jw11 * ftan + jw21 * fn) / joint_inertia[j0 - 3]
                ) * h
                qvel[j0 + 1] += (
                    (jw12 * ftan + jw22 * fn) / joint_inertia[j0 - 2]
                ) * h

                force_avg[leg, 0] += ftan * inv_nsub
                force_avg[leg, 1] += fn * inv_nsub
                slip_accum[leg] += (abs(vfx) + abs(vfz)) * inv_nsub
                contact_flag[leg] = 1

        qvel[0] += (fx_sum / m) * h
        qvel[1] += (fz_sum / m - g) * h
        qvel[2] += (tq_sum / iy) * h
        for j in range(d):
            qvel[3 + j] += (
                (tau[j] - joint_damping[j] * qvel[3 + j]) / joint_inertia[j]
            ) * h

        for idx in range(3 + d):
            qpos[idx] += qvel[idx] * h

        if qpos[1] < fail_z:
            return 1

    for idx in range(3 + d):
        if not math.isfinite(qpos[idx]) or not math.isfinite(qvel[idx]):
            return 1
    return 0


@njit(cache=True)
def _planar_rollout(
    par,
    joint_inertia,
    joint_damping,
    kp,
    kd,
    tau_limit,
    qpos0,
    qvel0,
    t0,
    pos_targets,
    vel_targets,
    dt,
    nsub,
    weights,
    q_ref,
    f_ref,
    pitch_des,
    default_z,
    vdes_x,
    sched_t,
    sched_z,
    term_pitch_on,
    term_pitch,
    states_out,
    contact_out,
    terms_out,
):
    """Closed PD rollout of one dense trajectory. Returns (cost, fail_step).

    fail_step is -1 on success, else the control step where integration
    failed (cost is +inf in that case; accumulated terms are kept).
    """
    nlegs = int(par[PAR_NLEGS])
    d = 2 * nlegs
    nq = 3 + d
    horizon = pos_targets.shape[0]

    qp = qpos0.copy()
    qv = qvel0.copy()
    tau = np.empty(d)
    favg = np.empty((nlegs, 2))
    slip = np.empty(nlegs)
    cflag = np.empty(nlegs, dtype=np.uint8)

    for idx in range(nq):
        states_out[0, idx] = qp[idx]
        states_out[0, nq + idx] = qv[idx]

    for t in range(NUM_COST_TERMS):
        terms_out[t] = 0.0

    x_start = qp[0]
    fail_step = -1

    for step in range(horizon):
        for j in range(d):
            u = kp[j] * (pos_targets[step, j] - qp[3 + j]) + kd[j] * (
                vel_targets[step, j] - qv[3 + j]
            )
            if u > tau_limit[j]:
                u = tau_limit[j]
            elif u < -tau_limit[j]:
                u = -tau_limit[j]
            tau[j] = u

        fail = _planar_step(
            par, joint_inertia, joint_damping, qp, qv, tau, dt, nsub,
            favg, slip, cflag,
        )

        for idx in range(nq):
            states_out[step + 1, idx] = qp[idx]
            states_out[step + 1, nq + idx] = qv[idx]
        for leg in range(nlegs):
            contact_out[step, leg] = cflag[leg]

        if fail == 1:
            fail_step = step
            break

        t_now = t0 + (step + 1) * dt
        z_tgt = _height_target(sched_t, sched_z, default_z, t_now)
        terms_out[TERM_HEIGHT] += weights[TERM_HEIGHT] * abs(qp[1] - z_tgt)
        dpitch = qp[2] - pitch_des
        terms_out[TERM_ORIENT] += weights[TERM_ORIENT] * dpitch * dpitch
        acc = 0.0
        for j in range(d):
            dq = qp[3 + j] - q_ref[j]
            acc += dq * dq
        terms_out[TERM_POSTURE] += weights[TERM_POSTURE] * acc
        acc = 0.0
        for leg in range(nlegs):
            acc += slip[leg]
        terms_out[TERM_CONTACT_VEL] += weights[TERM_CONTACT_VEL] * acc
        acc = 0.0
        for leg in range(nlegs):
            acc += abs(favg[leg, 0]) + abs(favg[leg, 1] - f_ref[leg])
        terms_out[TERM_CONTACT_FORCE] += weights[TERM_CONTACT_FORCE] * acc

    if fail_step >= 0:
        # Freeze the remaining log rows at the failure state so downstream
        # consumers always see full-length arrays.
        for rest in range(fail_step + 2, horizon + 1):
            for col in range(2 * nq):
                states_out[rest, col] = states_out[fail_step + 1, col]
        for rest in range(fail_step + 1, horizon):
            for leg in range(nlegs):
                contact_out[rest, leg] = 0
        return np.inf, fail_step

    t_end = t0 + horizon * dt
    tx = x_start + vdes_x * horizon * dt
    tz = _height_target(sched_t, sched_z, default_z, t_end)
    term = weights[TERM_TERMINAL] * (abs(qp[0] - tx) + abs(qp[1] - tz))
    if term_pitch_on == 1:
        dpitch = qp[2] - term_pitch
        term += weights[TERM_ORIENT] * dpitch * dpitch
    terms_out[TERM_TERMINAL] = term

    cost = 0.0
    for t in range(NUM_COST_TERMS):
        cost += terms_out[t]
    return cost, fail_step


@njit(cache=True, parallel=True)
def _planar_rollout_batch(
    par,
    joint_inertia,
    joint_damping,
    kp,
    kd,
    tau_limit,
    qpos0,
    qvel0,
    t0,
    pos_batch,
    vel_batch,
    dt,
    nsub,
    weights,
    q_ref,
    f_ref,
    pitch_des,
    default_z,
    vdes_x,
    sched_t,
    sched_z,
    term_pitch_on,
    term_pitch,
    costs_out,
    states_out,
    contact_out,
    terms_out,
    fails_out,
):
    """Roll out a batch of dense trajectories from a shared start state.

    Each slot writes only its own output rows, so the result is independent
    of how the parallel scheduler partitions the batch.
    """
    n = pos_batch.shape[0]
    for cand in prange(n):
        cost, fail_step = _planar_rollout(
            par, joint_inertia, joint_damping, kp, kd, tau_limit,
            qpos0, qvel0, t0, pos_batch[cand], vel_batch[cand], dt, nsub,
            weights, q_ref, f_ref, pitch_des, default_z, vdes_x,
            sched_t, sched_z, term_pitch_on, term_pitch,
            states_out[cand], contact_out[cand], terms_out[cand],
        )
        costs_out[cand] = cost
        fails_out[cand] = fail_step


@njit(cache=True)
def _di_step(mass, qpos, qvel, tau, dt, nsub):
    """Double integrator control step: mass * accel = torque. No gravity."""
    h = dt / nsub
    for _ in range(nsub):
        qvel[0] += (tau[0] / mass) * h
        qpos[0] += qvel[0] * h
    if not math.isfinite(qpos[0]) or not math.isfinite(qvel[0]):
        return 1
    return 0


@njit(cache=True)
def _di_rollout(
    mass,
    kp,
    kd,
    tau_limit,
    qpos0,
    qvel0,
    pos_targets,
    vel_targets,
    dt,
    nsub,
    weights,
    q_ref,
    states_out,
    terms_out,
):
    """PD rollout for the double integrator. Only the posture term applies."""
    horizon = pos_targets.shape[0]
    qp = qpos0.copy()
    qv = qvel0.copy()
    tau = np.empty(1)

    states_out[0, 0] = qp[0]
    states_out[0, 1] = qv[0]
    for t in range(NUM_COST_TERMS):
        terms_out[t] = 0.0

    fail_step = -1
    for step in range(horizon):
        u = kp[0] * (pos_targets[step, 0] - qp[0]) + kd[0] * (
            vel_targets[step, 0] - qv[0]
        )
        if u > tau_limit[0]:
            u = tau_limit[0]
        elif u < -tau_limit[0]:
            u = -tau_limit[0]
        tau[0] = u
        fail = _di_step(mass, qp, qv, tau, dt, nsub)
        states_out[step + 1, 0] = qp[0]
        states_out[step + 1, 1] = qv[0]
        if fail == 1:
            fail_step = step
            break
        dq = qp[0] - q_ref[0]
        terms_out[TERM_POSTURE] += weights[TERM_POSTURE] * dq * dq

    if fail_step >= 0:
        for rest in range(fail_step + 2, horizon + 1):
            states_out[rest, 0] = states_out[fail_step + 1, 0]
            states_out[rest, 1] = states_out[fail_step + 1, 1]
        return np.inf, fail_step
    return terms_out[TERM_POSTURE], fail_step


@njit(cache=True, parallel=True)
def _di_rollout_batch(
    mass,
    kp,
    kd,
    tau_limit,
    qpos0,
    qvel0,
    pos_batch,
    vel_batch,
    dt,
    nsub,
    weights,
    q_ref,
    costs_out,
    states_out,
    terms_out,
    fails_out,
):
    n = pos_batch.shape[0]
    for cand in prange(n):
        cost, fail_step = _di_rollout(
            mass, kp, kd, tau_limit, qpos0, qvel0,
            pos_batch[cand], vel_batch[cand], dt, nsub, weights, q_ref,
            states_out[cand], terms_out[cand],
        )
        costs_out[cand] = cost
        fails_out[cand] = fail_step
