"""Spline parameterizations for sampled joint trajectories.

The planner searches over trajectories described by a handful of nodes, each
holding a joint position and a joint velocity, and reconstructs dense
position/velocity targets from them. Three interpolation kinds are provided:

* ``HERMITE``: piecewise cubic Hermite segments driven by both the node
  positions and the node velocities (the dual-space parameterization the
  planner samples in).
* ``CUBIC``: a natural cubic spline through node positions only (zero second
  derivative at both ends).
* ``QUADRATIC``: a C1 piecewise quadratic through node positions only,
  propagated left to right from the slope of the parabola through the first
  three nodes.

The position-only kinds carry node velocities but ignore them; the velocity
they report is the analytic derivative of the interpolant. They exist as
ablation baselines for the Hermite kind.

Node grids are uniformly spaced in time. A node velocity bound keeps Hermite
segments inside the joint range: with tangents scaled by the segment
duration, capping |v| at min(upper - q, q - lower) / (spacing / 2) suppresses
overshoot past the joint limits (verified empirically in the test suite, not
proved).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


class SplineKind(enum.Enum):
    HERMITE = "hermite"
    CUBIC = "cubic"
    QUADRATIC = "quadratic"

    @classmethod
    def parse(cls, name: "str | SplineKind") -> "SplineKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown spline kind {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


@dataclass
class JointBounds:
    """Per-channel joint position limits, lower[j] < upper[j]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("joint bounds must be 1-D arrays of equal length")
        if np.any(self.upper < self.lower):
            raise ValueError("joint bounds require lower <= upper")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass
class SplineNode:
    """A single control point: joint position, joint velocity, time."""

    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.position = np.atleast_1d(np.asarray(self.position, dtype=np.float64))
        self.velocity = np.atleast_1d(np.asarray(self.velocity, dtype=np.float64))
        if self.position.shape != self.velocity.shape:
            raise ValueError("node position and velocity must have equal shape")


@dataclass(eq=False)
class SplineTrajectory:
    """K >= 2 nodes on a uniform time grid plus an interpolation kind.

    positions and velocities are (K, d) arrays; 1-D inputs are promoted to a
    single channel. Position-only kinds keep the velocity rows (the sampler
    still perturbs them so random streams stay aligned across kinds) but do
    not use them for interpolation.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    kind: SplineKind = SplineKind.HERMITE
    _interp: object = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if self.velocities.ndim == 1:
            self.velocities = self.velocities[:, None]
        self.kind = SplineKind.parse(self.kind)
        if self.times.ndim != 1 or self.times.shape[0] < 2:
            raise ValueError("a spline trajectory needs at least two nodes")
        k = self.times.shape[0]
        if self.positions.shape[0] != k or self.velocities.shape[0] != k:
            raise ValueError("node count mismatch between times and values")
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have equal shape")
        gaps = np.diff(self.times)
        if np.any(gaps <= 0.0):
            raise ValueError("node times must be strictly increasing")
        if not np.allclose(gaps, gaps[0], rtol=1e-9, atol=1e-12 * max(1.0, self.span)):
            raise ValueError("node times must be uniformly spaced")

    @property
    def node_count(self) -> int:
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    def nodes(self) -> list[SplineNode]:
        return [
            SplineNode(self.positions[k].copy(), self.velocities[k].copy(), float(self.times[k]))
            for k in range(self.node_count)
        ]


@dataclass(eq=False)
class DenseTrajectory:
    """Per-control-step targets: (H, d) positions and velocities, grid dt."""

    positions: np.ndarray
    velocities: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if self.velocities.ndim == 1:
            self.velocities = self.velocities[:, None]
        if self.positions.shape != self.velocities.shape or self.positions.ndim != 2:
            raise ValueError("dense positions/velocities must be equal-shape (H, d)")
        if self.positions.shape[0] < 1:
            raise ValueError("dense trajectory must contain at least one step")
        self.dt = float(self.dt)
        if self.dt <= 0.0:
            raise ValueError("dense trajectory dt must be positive")

    @property
    def steps(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def command(self, h: int) -> tuple[np.ndarray, np.ndarray]:
        """PD target pair (position, velocity) for control step h."""
        return self.positions[h], self.velocities[h]

    def copy(self) -> "DenseTrajectory":
        return DenseTrajectory(self.positions.copy(), self.velocities.copy(), self.dt)


def hermite_basis(s):
    """Cubic Hermite basis values and first derivatives at s in [0, 1].

    Returns (h, dh) with last-axis order (h00, h10, h01, h11): weights for
    the left position, left tangent, right position, right tangent. Tangents
    are node velocities premultiplied by the segment duration, so a segment
    evaluates as q(s) = h00 q0 + h10 (v0 T) + h01 q1 + h11 (v1 T) where T is
    the segment duration. dh is the derivative with respect to s.

    Accepts scalars or arrays. Raises ValueError for s outside [0, 1].
    """
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr < 0.0) or np.any(s_arr > 1.0):
        raise ValueError("hermite_basis requires s in [0, 1]")
    s2 = s_arr * s_arr
    s3 = s2 * s_arr
    h = np.stack(
        [
            2.0 * s3 - 3.0 * s2 + 1.0,
            s3 - 2.0 * s2 + s_arr,
            -2.0 * s3 + 3.0 * s2,
            s3 - s2,
        ],
        axis=-1,
    )
    dh = np.stack(
        [
            6.0 * s2 - 6.0 * s_arr,
            3.0 * s2 - 4.0 * s_arr + 1.0,
            -6.0 * s2 + 6.0 * s_arr,
            3.0 * s2 - 2.0 * s_arr,
        ],
        axis=-1,
    )
    return h, dh


def _check_domain(traj: SplineTrajectory, t: np.ndarray) -> None:
    tol = 1e-9 * max(1.0, traj.span)
    if np.any(t < traj.times[0] - tol) or np.any(t > traj.times[-1] + tol):
        raise ValueError(
            f"evaluation time outside node span "
            f"[{traj.times[0]}, {traj.times[-1]}]"
        )


def _segments(traj: SplineTrajectory, t: np.ndarray):
    """Segment index and local coordinate for each time (t already checked)."""
    idx = np.searchsorted(traj.times, t, side="right") - 1
    idx = np.clip(idx, 0, traj.node_count - 2)
    seg_t0 = traj.times[idx]
    seg_dt = traj.times[idx + 1] - seg_t0
    s = np.clip((t - seg_t0) / seg_dt, 0.0, 1.0)
    return idx, s, seg_dt


def _hermite_eval(traj: SplineTrajectory, t: np.ndarray):
    idx, s, seg_dt = _segments(traj, t)
    h, dh = hermite_basis(s)
    q0 = traj.positions[idx]
    q1 = traj.positions[idx + 1]
    # Tangents in normalized segment coordinates are velocity * duration.
    m0 = traj.velocities[idx] * seg_dt[..., None]
    m1 = traj.velocities[idx + 1] * seg_dt[..., None]
    pos = (
        h[..., 0, None] * q0
        + h[..., 1, None] * m0
        + h[..., 2, None] * q1
        + h[..., 3, None] * m1
    )
    vel = (
        dh[..., 0, None] * q0
        + dh[..., 1, None] * m0
        + dh[..., 2, None] * q1
        + dh[..., 3, None] * m1
    ) / seg_dt[..., None]
    return pos, vel


def _quadratic_coeffs(traj: SplineTrajectory):
    """Per-segment (slope, curvature) for the left-to-right C1 quadratic.

    The first slope comes from the parabola through nodes 0..2 evaluated at
    the first node; each segment then matches value and slope on the left
    and the node value on the right, which fixes the curvature and the next
    slope. Two nodes degenerate to the connecting line.
    """
    q = traj.positions
    k, d = q.shape
    gap = traj.spacing
    slopes = np.empty((k - 1, d))
    curvs = np.empty((k - 1, d))
    if k == 2:
        s = (q[1] - q[0]) / gap
    else:
        s = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * gap)
    for seg in range(k - 1):
        c = (q[seg + 1] - q[seg] - s * gap) / (gap * gap)
        slopes[seg] = s
        curvs[seg] = c
        s = s + 2.0 * c * gap
    return slopes, curvs


def _quadratic_eval(traj: SplineTrajectory, t: np.ndarray):
    if traj._interp is None:
        traj._interp = _quadratic_coeffs(traj)
    slopes, curvs = traj._interp
    idx, s, seg_dt = _segments(traj, t)
    u = (s * seg_dt)[..., None]
    q0 = traj.positions[idx]
    pos = q0 + slopes[idx] * u + curvs[idx] * u * u
    vel = slopes[idx] + 2.0 * curvs[idx] * u
    return pos, vel


def _cubic_eval(traj: SplineTrajectory, t: np.ndarray):
    if traj._interp is None:
        traj._interp = CubicSpline(
            traj.times, traj.positions, axis=0, bc_type="natural"
        )
    spl = traj._interp
    tc = np.clip(t, traj.times[0], traj.times[-1])
    return spl(tc), spl(tc, 1)


def evaluate(traj: SplineTrajectory, t):
    """Interpolated (position, velocity) at time t.

    t may be a scalar (returns two (d,) arrays) or an array of shape (T,)
    (returns two (T, d) arrays). Times must lie within the node span.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    _check_domain(traj, t_arr)
    if traj.kind is SplineKind.HERMITE:
        pos, vel = _hermite_eval(traj, t_arr)
    elif traj.kind is SplineKind.QUADRATIC:
        pos, vel = _quadratic_eval(traj, t_arr)
    else:
        pos, vel = _cubic_eval(traj, t_arr)
    if scalar:
        return pos[0], vel[0]
    return pos, vel


def to_dense(traj: SplineTrajectory, horizon_steps: int, dt: float) -> DenseTrajectory:
    """Sample the spline on the control grid: times t0 + h dt, h = 0..H-1.

    The node span must cover (H-1) dt.
    """
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t = traj.times[0] + dt * np.arange(horizon_steps)
    pos, vel = evaluate(traj, t)
    return DenseTrajectory(pos, vel, dt)


def clamp_velocities(
    positions: np.ndarray,
    velocities: np.ndarray,
    bounds: JointBounds,
    node_spacing: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Array form of the node velocity bound.

    Positions are clipped into the joint range first; each velocity is then
    clamped to |v| <= min(upper - q, q - lower) / (spacing / 2), preserving
    sign. Zero-width bounds force zero velocity. Works on (d,) or (K, d)
    arrays.
    """
    if node_spacing <= 0.0:
        raise ValueError("node spacing must be positive")
    q = np.clip(np.asarray(positions, dtype=np.float64), bounds.lower, bounds.upper)
    margin = np.minimum(bounds.upper - q, q - bounds.lower)
    cap = margin / (node_spacing / 2.0)
    v = np.clip(np.asarray(velocities, dtype=np.float64), -cap, cap)
    return q, v


def clamp_node_velocity(
    node: SplineNode, bounds: JointBounds, node_spacing: float
) -> SplineNode:
    """Return a copy of the node with the velocity bound applied.

    See clamp_velocities for the rule. Positions already inside the bounds
    come back unchanged; out-of-range positions are clipped first.
    """
    q, v = clamp_velocities(node.position, node.velocity, bounds, node_spacing)
    return SplineNode(q, v, node.time)


def _batch_segments(node_times: np.ndarray, eval_times: np.ndarray):
    idx = np.searchsorted(node_times, eval_times, side="right") - 1
    idx = np.clip(idx, 0, node_times.shape[0] - 2)
    seg_t0 = node_times[idx]
    seg_dt = node_times[idx + 1] - seg_t0
    s = np.clip((eval_times - seg_t0) / seg_dt, 0.0, 1.0)
    return idx, s, seg_dt


def _natural_second_derivatives(positions: np.ndarray, gap: float) -> np.ndarray:
    """Knot second derivatives of the natural cubic, batched.

    positions is (N, K, d); returns (N, K, d) with zero first and last rows.
    Interior rows solve the standard tridiagonal system
    M[k-1] + 4 M[k] + M[k+1] = 6 (q[k-1] - 2 q[k] + q[k+1]) / gap^2.
    """
    n, k, d = positions.shape
    m = np.zeros((n, k, d))
    if k > 2:
        a = np.zeros((k - 2, k - 2))
        np.fill_diagonal(a, 4.0)
        np.fill_diagonal(a[1:], 1.0)
        np.fill_diagonal(a[:, 1:], 1.0)
        rhs = (
            6.0
            / (gap * gap)
            * (positions[:, :-2] - 2.0 * positions[:, 1:-1] + positions[:, 2:])
        )
        m[:, 1:-1] = np.einsum("ij,njd->nid", np.linalg.inv(a), rhs)
    return m


def dense_batch(
    kind: "SplineKind | str",
    node_times: np.ndarray,
    positions: np.ndarray,
    velocities: np.ndarray,
    horizon_steps: int,
    dt: float,
):
    """Vectorized to_dense over N node sets sharing one uniform time grid.

    positions / velocities are (N, K, d). Returns (N, H, d) position and
    velocity arrays that match evaluate()/to_dense row for row (the cubic
    kind solves the same natural spline system, so agreement is to floating
    point noise rather than bit-exact).
    """
    kind = SplineKind.parse(kind)
    node_times = np.asarray(node_times, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    velocities = np.asarray(velocities, dtype=np.float64)
    if positions.ndim != 3 or positions.shape != velocities.shape:
        raise ValueError("batch positions/velocities must be equal-shape (N, K, d)")
    if node_times.shape[0] != positions.shape[1]:
        raise ValueError("node count mismatch between times and values")
    if horizon_steps < 1 or dt <= 0.0:
        raise ValueError("horizon_steps must be >= 1 and dt positive")
    span = float(node_times[-1] - node_times[0])
    if (horizon_steps - 1) * dt > span + 1e-9 * max(1.0, span):
        raise ValueError("node span does not cover the dense horizon")
    eval_times = node_times[0] + dt * np.arange(horizon_steps)
    idx, s, seg_dt = _batch_segments(node_times, eval_times)
    gap = float(node_times[1] - node_times[0])

    if kind is SplineKind.HERMITE:
        h, dh = hermite_basis(s)
        m0 = velocities[:, idx] * seg_dt[None, :, None]
        m1 = velocities[:, idx + 1] * seg_dt[None, :, None]
        q0 = positions[:, idx]
        q1 = positions[:, idx + 1]
        b = h[None, :, :, None]
        db = dh[None, :, :, None]
        pos = b[:, :, 0] * q0 + b[:, :, 1] * m0 + b[:, :, 2] * q1 + b[:, :, 3] * m1
        vel = (
            db[:, :, 0] * q0 + db[:, :, 1] * m0 + db[:, :, 2] * q1 + db[:, :, 3] * m1
        ) / seg_dt[None, :, None]
        return pos, vel

    if kind is SplineKind.QUADRATIC:
        n, k, d = positions.shape
        slopes = np.empty((n, k - 1, d))
        curvs = np.empty((n, k - 1, d))
        if k == 2:
            sl = (positions[:, 1] - positions[:, 0]) / gap
        else:
            sl = (
                -3.0 * positions[:, 0] + 4.0 * positions[:, 1] - positions[:, 2]
            ) / (2.0 * gap)
        for seg in range(k - 1):
            c = (positions[:, seg + 1] - positions[:, seg] - sl * gap) / (gap * gap)
            slopes[:, seg] = sl
            curvs[:, seg] = c
            sl = sl + 2.0 * c * gap
        u = (s * seg_dt)[None, :, None]
        pos = positions[:, idx] + slopes[:, idx] * u + curvs[:, idx] * u * u
        vel = slopes[:, idx] + 2.0 * curvs[:, idx] * u
        return pos, vel

    # Natural cubic through the positions.
    m = _natural_second_derivatives(positions, gap)
    u = (s * seg_dt)[None, :, None]
    rem = gap - u
    qk = positions[:, idx]
    qk1 = positions[:, idx + 1]
    mk = m[:, idx]
    mk1 = m[:, idx + 1]
    pos = (
        (mk * rem**3 + mk1 * u**3) / (6.0 * gap)
        + (qk / gap - mk * gap / 6.0) * rem
        + (qk1 / gap - mk1 * gap / 6.0) * u
    )
    vel = (
        (-mk * rem**2 + mk1 * u**2) / (2.0 * gap)
        + (qk1 - qk) / gap
        - (mk1 - mk) * gap / 6.0
    )
    return pos, vel


def resample_nodes(
    dense: DenseTrajectory,
    node_times: np.ndarray,
    kind: "SplineKind | str" = SplineKind.HERMITE,
) -> SplineTrajectory:
    """Extract spline nodes from a dense trajectory at the given times.

    Times are relative to the first dense row (row h sits at h dt). Each
    node copies the nearest dense row; a time exactly between two rows takes
    the earlier one. Node times must lie within the dense span.
    """
    node_times = np.asarray(node_times, dtype=np.float64)
    if dense.steps < 1:
        raise ValueError("cannot resample an empty dense trajectory")
    span = (dense.steps - 1) * dense.dt
    tol = 1e-9 * max(1.0, span)
    if np.any(node_times < -tol) or np.any(node_times > span + tol):
        raise ValueError("node times outside dense trajectory span")
    frac = node_times / dense.dt
    idx = np.ceil(frac - 0.5).astype(np.int64)
    idx = np.clip(idx, 0, dense.steps - 1)
    return SplineTrajectory(
        node_times,
        dense.positions[idx].copy(),
        dense.velocities[idx].copy(),
        kind=kind,
    )
