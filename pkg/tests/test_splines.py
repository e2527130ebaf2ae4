"""Spline interpolation unit tests.

Expected values are frozen from hand arithmetic (noted inline) so the
implementation is checked against an independent derivation, not itself.
"""

from __future__ import annotations

import numpy as np
import pytest

from splinempc.splines import (
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


def _traj(times, positions, velocities=None, kind=SplineKind.HERMITE):
    positions = np.asarray(positions, dtype=np.float64)
    if velocities is None:
        velocities = np.zeros_like(positions)
    return SplineTrajectory(np.asarray(times, dtype=np.float64), positions,
                            np.asarray(velocities, dtype=np.float64), kind=kind)


class TestHermiteBasis:
    def test_endpoint_values(self):
        h, dh = hermite_basis(np.array([0.0, 1.0]))
        # value blend picks the left endpoint at s=0, right at s=1
        assert np.array_equal(h[0], [1.0, 0.0, 0.0, 0.0])
        assert np.array_equal(h[1], [0.0, 0.0, 1.0, 0.0])
        # slope blend picks the left tangent at s=0, right at s=1
        assert np.array_equal(dh[0], [0.0, 1.0, 0.0, 0.0])
        assert np.array_equal(dh[1], [0.0, 0.0, 0.0, 1.0])

    def test_midpoint_values(self):
        # 2(1/8)-3(1/4)+1 = 1/2; 1/8-2(1/4)+1/2 = 1/8; symmetric pair mirrors
        h, _ = hermite_basis(np.array([0.5]))
        assert np.allclose(h[0], [0.5, 0.125, 0.5, -0.125], atol=1e-15)

    def test_value_blend_partition_of_unity(self):
        s = np.linspace(0.0, 1.0, 101)
        h, dh = hermite_basis(s)
        assert np.allclose(h[:, 0] + h[:, 2], 1.0, atol=1e-14)
        assert np.allclose(dh[:, 0] + dh[:, 2], 0.0, atol=1e-14)

    def test_rejects_outside_unit_interval(self):
        with pytest.raises(ValueError):
            hermite_basis(np.array([-0.01]))
        with pytest.raises(ValueError):
            hermite_basis(np.array([1.01]))


class TestHermiteEvaluation:
    def test_two_node_midpoint(self):
        # q: 0 -> 1 over 1 s with zero node velocities:
        # pos(0.5) = h01(0.5) = 0.5, vel(0.5) = dh01(0.5)/dt = 1.5
        traj = _traj([0.0, 1.0], [[0.0], [1.0]])
        pos, vel = evaluate(traj, 0.5)
        assert pos[0] == pytest.approx(0.5, abs=1e-15)
        assert vel[0] == pytest.approx(1.5, abs=1e-15)

    def test_node_interpolation_is_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            k = int(rng.integers(2, 9))
            d = int(rng.integers(1, 5))
            times = rng.uniform(0.1, 1.0) + np.arange(k) * rng.uniform(0.05, 0.4)
            traj = _traj(times, rng.normal(size=(k, d)),
                         rng.normal(size=(k, d)))
            pos, vel = evaluate(traj, traj.times)
            assert np.max(np.abs(pos - traj.positions)) <= 1e-9
            assert np.max(np.abs(vel - traj.velocities)) <= 1e-9

    def test_linear_data_reproduced_exactly_with_matching_tangents(self):
        # nodes on q = 3t - 1 with v = 3 everywhere: the cubic degenerates
        times = np.array([0.0, 0.5, 1.0, 1.5])
        q = (3.0 * times - 1.0)[:, None]
        v = np.full_like(q, 3.0)
        traj = _traj(times, q, v)
        t = np.linspace(0.0, 1.5, 37)
        pos, vel = evaluate(traj, t)
        assert np.allclose(pos[:, 0], 3.0 * t - 1.0, atol=1e-13)
        assert np.allclose(vel[:, 0], 3.0, atol=1e-12)

    def test_constant_data_stays_constant(self):
        traj = _traj([0.0, 0.2, 0.4], np.full((3, 2), 1.25))
        t = np.linspace(0.0, 0.4, 21)
        pos, vel = evaluate(traj, t)
        assert np.allclose(pos, 1.25, atol=1e-14)
        assert np.allclose(vel, 0.0, atol=1e-12)

    def test_rejects_time_outside_span(self):
        traj = _traj([0.0, 1.0], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            evaluate(traj, -0.1)
        with pytest.raises(ValueError):
            evaluate(traj, 1.1)


class TestBaselines:
    def test_quadratic_passes_through_nodes(self):
        rng = np.random.default_rng(5)
        times = np.linspace(0.0, 1.2, 5)
        traj = _traj(times, rng.normal(size=(5, 3)), kind=SplineKind.QUADRATIC)
        pos, _ = evaluate(traj, times)
        assert np.max(np.abs(pos - traj.positions)) <= 1e-9

    def test_quadratic_is_c1_at_interior_nodes(self):
        rng = np.random.default_rng(6)
        times = np.linspace(0.0, 1.0, 6)
        traj = _traj(times, rng.normal(size=(6, 1)), kind=SplineKind.QUADRATIC)
        eps = 1e-7
        for tk in times[1:-1]:
            _, v_left = evaluate(traj, tk - eps)
            _, v_right = evaluate(traj, tk + eps)
            assert abs(v_left[0] - v_right[0]) < 1e-4

    def test_quadratic_two_nodes_is_linear(self):
        traj = _traj([0.0, 1.0], [[1.0], [3.0]], kind=SplineKind.QUADRATIC)
        pos, vel = evaluate(traj, 0.25)
        assert pos[0] == pytest.approx(1.5, abs=1e-12)
        assert vel[0] == pytest.approx(2.0, abs=1e-12)

    def test_cubic_passes_through_nodes(self):
        rng = np.random.default_rng(7)
        times = np.linspace(0.0, 2.0, 7)
        traj = _traj(times, rng.normal(size=(7, 2)), kind=SplineKind.CUBIC)
        pos, _ = evaluate(traj, times)
        assert np.max(np.abs(pos - traj.positions)) <= 1e-9

    def test_cubic_natural_end_conditions(self):
        # second derivative vanishes at both ends for the natural spline
        rng = np.random.default_rng(8)
        times = np.linspace(0.0, 1.0, 6)
        traj = _traj(times, rng.normal(size=(6, 1)), kind=SplineKind.CUBIC)
        eps = 1e-5
        for t0, t1 in ((0.0, eps), (1.0 - eps, 1.0)):
            _, v0 = evaluate(traj, t0)
            _, v1 = evaluate(traj, t1)
            assert abs(v1[0] - v0[0]) / eps < 1e-2

    def test_baseline_velocities_are_position_derived(self):
        # node velocities are carried but must not change the curve
        rng = np.random.default_rng(9)
        times = np.linspace(0.0, 1.0, 5)
        q = rng.normal(size=(5, 1))
        for kind in (SplineKind.QUADRATIC, SplineKind.CUBIC):
            a = _traj(times, q, np.zeros((5, 1)), kind=kind)
            b = _traj(times, q, rng.normal(size=(5, 1)), kind=kind)
            t = np.linspace(0.0, 1.0, 41)
            pa, va = evaluate(a, t)
            pb, vb = evaluate(b, t)
            assert np.array_equal(pa, pb)
            assert np.array_equal(va, vb)


class TestOvershootContainment:
    def _max_excess(self, traj, lo, hi, t):
        pos, _ = evaluate(traj, t)
        return float(np.maximum(pos - hi, lo - pos).max())

    def test_zero_velocity_nodes_near_bound_do_not_overshoot(self):
        # nodes pinned at the bound with v = 0: Hermite stays inside, the
        # position-only baselines swing past
        rng = np.random.default_rng(21)
        lo, hi = -1.0, 1.0
        times = np.linspace(0.0, 1.0, 6)
        t = np.linspace(0.0, 1.0, 301)
        worse_cubic = 0
        worse_quad = 0
        for _ in range(40):
            q = rng.uniform(lo, hi, size=(6, 1))
            q[rng.integers(1, 5)] = hi  # interior node parked on the bound
            q[rng.integers(1, 5)] = lo
            h = self._max_excess(_traj(times, q), lo, hi, t)
            c = self._max_excess(_traj(times, q, kind=SplineKind.CUBIC), lo, hi, t)
            s = self._max_excess(_traj(times, q, kind=SplineKind.QUADRATIC), lo, hi, t)
            assert h <= 1e-12
            worse_cubic += c > 1e-6
            worse_quad += s > 1e-6
        assert worse_cubic >= 30
        assert worse_quad >= 30

    def test_midpoint_noise_amplification(self):
        # zero-tangent Hermite mid-segment value is the node mean, so its
        # variance under iid node noise is sigma^2/2; the interpolating
        # baselines amplify beyond that
        rng = np.random.default_rng(22)
        times = np.linspace(0.0, 1.0, 6)
        mid = 0.5 * (times[2] + times[3])
        samples = {kind: [] for kind in SplineKind}
        for _ in range(400):
            q = rng.normal(size=(6, 1))
            for kind in SplineKind:
                pos, _ = evaluate(_traj(times, q, kind=kind), mid)
                samples[kind].append(pos[0])
        var = {kind: np.var(samples[kind]) for kind in SplineKind}
        assert var[SplineKind.HERMITE] == pytest.approx(0.5, rel=0.15)
        assert var[SplineKind.CUBIC] > var[SplineKind.HERMITE]


class TestVelocityClamp:
    def test_cap_formula_at_center(self):
        # bounds [-1, 1], spacing 0.4: cap at q=0 is min(1, 1)/0.2 = 5
        bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
        q = np.zeros((1, 1))
        v = np.array([[7.0]])
        qc, vc = clamp_velocities(q, v, bounds, 0.4)
        assert vc[0, 0] == pytest.approx(5.0, abs=1e-15)
        qc, vc = clamp_velocities(q, -v, bounds, 0.4)
        assert vc[0, 0] == pytest.approx(-5.0, abs=1e-15)

    def test_cap_shrinks_near_bound(self):
        # at q = 0.9 the headroom is 0.1 so the cap is 0.1/0.2 = 0.5
        bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
        qc, vc = clamp_velocities(np.array([[0.9]]), np.array([[3.0]]), bounds, 0.4)
        assert vc[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_positions_clipped_before_capping(self):
        bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
        qc, vc = clamp_velocities(np.array([[1.7]]), np.array([[2.0]]), bounds, 0.4)
        assert qc[0, 0] == 1.0
        assert vc[0, 0] == 0.0  # zero headroom at the bound

    def test_small_velocities_pass_through(self):
        rng = np.random.default_rng(31)
        bounds = JointBounds(-np.ones(3), np.ones(3))
        q = rng.uniform(-0.5, 0.5, size=(4, 3))
        v = rng.uniform(-1.0, 1.0, size=(4, 3))
        qc, vc = clamp_velocities(q, v, bounds, 0.4)  # cap >= 0.5/0.2 = 2.5
        assert np.array_equal(q, qc)
        assert np.array_equal(v, vc)

    def test_zero_spacing_rejected(self):
        bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            clamp_velocities(np.zeros((1, 1)), np.zeros((1, 1)), bounds, 0.0)

    def test_node_wrapper(self):
        bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
        node = SplineNode(np.array([0.0]), np.array([9.0]), 0.3)
        out = clamp_node_velocity(node, bounds, 0.4)
        assert out.velocity[0] == pytest.approx(5.0, abs=1e-15)
        assert out.time == node.time

    def test_clamped_spline_stays_in_bounds(self):
        # containment across full segments, every kind of random node set
        rng = np.random.default_rng(32)
        bounds = JointBounds(np.array([-1.0, -2.0]), np.array([1.0, 0.5]))
        times = np.linspace(0.0, 0.9, 4)
        t = np.linspace(0.0, 0.9, 181)
        for _ in range(50):
            q = rng.normal(scale=1.5, size=(4, 2))
            v = rng.normal(scale=20.0, size=(4, 2))
            qc, vc = clamp_velocities(q, v, bounds, times[1] - times[0])
            pos, _ = evaluate(_traj(times, qc, vc), t)
            assert np.all(pos <= bounds.upper + 1e-12)
            assert np.all(pos >= bounds.lower - 1e-12)


class TestDenseConversions:
    def test_to_dense_matches_evaluate(self):
        rng = np.random.default_rng(41)
        times = np.linspace(0.0, 0.88, 5)
        traj = _traj(times, rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        dense = to_dense(traj, 45, 0.02)
        t = times[0] + np.arange(45) * 0.02
        pos, vel = evaluate(traj, t)
        assert np.array_equal(dense.positions, pos)
        assert np.array_equal(dense.velocities, vel)

    def test_to_dense_rejects_short_span(self):
        traj = _traj([0.0, 0.5], [[0.0], [1.0]])
        with pytest.raises(ValueError):
            to_dense(traj, 45, 0.02)  # needs 0.88 s, span is 0.5 s

    @pytest.mark.parametrize("kind", list(SplineKind))
    def test_dense_batch_matches_scalar_path(self, kind):
        rng = np.random.default_rng(42)
        k, d, n, horizon, dt = 5, 3, 7, 40, 0.02
        times = np.linspace(0.0, (horizon - 1) * dt, k)
        qb = rng.normal(size=(n, k, d))
        vb = rng.normal(size=(n, k, d))
        pos, vel = dense_batch(kind, times, qb, vb, horizon, dt)
        for j in range(n):
            dense = to_dense(_traj(times, qb[j], vb[j], kind=kind), horizon, dt)
            assert np.max(np.abs(pos[j] - dense.positions)) <= 1e-9
            assert np.max(np.abs(vel[j] - dense.velocities)) <= 1e-9

    def test_resample_recovers_node_rows(self):
        rng = np.random.default_rng(43)
        times = np.linspace(0.0, 0.88, 5)
        traj = _traj(times, rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        dense = to_dense(traj, 45, 0.02)
        out = resample_nodes(dense, times)
        # node times land exactly on grid points here, so rows match exactly
        assert np.array_equal(out.positions, traj.positions)
        assert np.array_equal(out.velocities, traj.velocities)

    def test_resample_rounds_to_nearest_row_ties_earlier(self):
        dense = DenseTrajectory(
            np.arange(5, dtype=np.float64)[:, None], np.zeros((5, 1)), 0.1
        )
        # 0.05 is exactly between rows 0 and 1 and must round down
        out = resample_nodes(dense, np.array([0.05, 0.22, 0.39]))
        assert out.positions[:, 0].tolist() == [0.0, 2.0, 4.0]

    def test_resample_rejects_times_outside_span(self):
        dense = DenseTrajectory(np.zeros((5, 1)), np.zeros((5, 1)), 0.1)
        with pytest.raises(ValueError):
            resample_nodes(dense, np.array([0.0, 0.45]))


class TestValidation:
    def test_monotone_uniform_times_required(self):
        with pytest.raises(ValueError):
            _traj([0.0, 0.1, 0.15], np.zeros((3, 1)))
        with pytest.raises(ValueError):
            _traj([0.0, -0.1], np.zeros((2, 1)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SplineTrajectory(
                np.array([0.0, 1.0]), np.zeros((2, 2)), np.zeros((2, 3))
            )

    def test_single_node_rejected(self):
        with pytest.raises(ValueError):
            _traj([0.0], np.zeros((1, 1)))

    def test_one_dimensional_positions_promoted(self):
        traj = SplineTrajectory(
            np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([0.0, 0.0])
        )
        assert traj.positions.shape == (2, 1)

    def test_kind_parse(self):
        assert SplineKind.parse("hermite") is SplineKind.HERMITE
        assert SplineKind.parse(SplineKind.CUBIC) is SplineKind.CUBIC
        with pytest.raises(ValueError):
            SplineKind.parse("quintic")
