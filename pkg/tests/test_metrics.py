import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from socialsat import metrics


def canonical_pose():
    """Upright user facing the robot: x to their left, y down, z toward the robot."""
    p = np.zeros((33, 3))
    p[0] = (0.0, -0.12, 0.05)  # nose
    p[7] = (0.04, -0.12, 0.0)  # left ear
    p[8] = (-0.04, -0.12, 0.0)
    p[11] = (0.08, 0.0, 0.0)  # shoulders
    p[12] = (-0.08, 0.0, 0.0)
    p[13] = (0.08, 0.13, 0.0)  # elbows straight down
    p[14] = (-0.08, 0.13, 0.0)
    p[23] = (0.05, 0.25, 0.0)  # hips
    p[24] = (-0.05, 0.25, 0.0)
    for i in range(33):
        if not p[i].any():
            p[i] = (0.0, 0.1, 0.0)
    return p


def rot_y(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), 0, math.sin(a)], [0, 1, 0], [-math.sin(a), 0, math.cos(a)]])


def roll(deg):
    """Rotation in the image plane that raises +x points (y is down)."""
    a = math.radians(deg)
    return np.array([[math.cos(a), math.sin(a), 0], [-math.sin(a), math.cos(a), 0], [0, 0, 1]])


class TestHead:
    def test_canonical_pose_is_level(self):
        h, p, t = metrics.head_orientation(canonical_pose())
        assert (h, p, t) == (0.0, 0.0, 0.0)

    def test_heading_follows_vertical_rotation(self):
        pose = canonical_pose() @ rot_y(25).T
        h, p, t = metrics.head_orientation(pose)
        assert abs(h - 25) <= 1e-6 and abs(p) <= 1e-6 and abs(t) <= 1e-6

    def test_tilt_from_roll(self):
        pose = canonical_pose()
        head = [0, 7, 8]
        pose[head] = pose[head] @ roll(10).T
        _, _, t = metrics.head_orientation(pose)
        assert abs(t - 10) <= 1e-6

    def test_looking_down_is_positive_pitch(self):
        pose = canonical_pose()
        pose[0, 1] += 0.02  # nose lower than the ears
        assert metrics.head_orientation(pose)[1] > 0

    def test_missing_ear_gives_nan(self):
        valid = np.ones(33, bool)
        valid[7] = False
        assert all(np.isnan(v) for v in metrics.head_orientation(canonical_pose(), valid))

    @given(st.floats(-179, 179), st.floats(-30, 30), st.floats(-20, 20))
    def test_heading_equivariance(self, theta, pitch_deg, roll_deg):
        pose = canonical_pose()
        a = math.radians(pitch_deg)
        pitch_m = np.array([[1, 0, 0], [0, math.cos(a), math.sin(a)], [0, -math.sin(a), math.cos(a)]])
        pose = pose @ (pitch_m @ roll(roll_deg)).T
        h0, p0, t0 = metrics.head_orientation(pose)
        h1, p1, t1 = metrics.head_orientation(pose @ rot_y(theta).T)
        dh = (h1 - h0 - theta + 180) % 360 - 180
        assert abs(dh) <= 1e-6
        assert abs(p1 - p0) <= 1e-6
        assert abs(t1 - t0) <= 1e-6
        th0 = metrics.trunk_orientation(pose)
        th1 = metrics.trunk_orientation(pose @ rot_y(theta).T)
        assert abs((th1[0] - th0[0] - theta + 180) % 360 - 180) <= 1e-6
        assert abs(th1[1] - th0[1]) <= 1e-6 and abs(th1[2] - th0[2]) <= 1e-6


class TestTrunk:
    def test_upright_is_zero(self):
        h, p, t = metrics.trunk_orientation(canonical_pose())
        assert abs(h) <= 1e-12 and abs(p) <= 1e-12 and abs(t) <= 1e-12

    def test_forward_lean(self):
        pose = canonical_pose()
        length = 0.25
        pose[[11, 12], 2] += math.tan(math.radians(15)) * length
        assert abs(metrics.trunk_orientation(pose)[1] - 15) <= 1e-6

    def test_right_shoulder_lowered(self):
        pose = canonical_pose()
        pose[12, 1] += 0.16 * math.tan(math.radians(5))
        assert abs(metrics.trunk_orientation(pose)[2] + 5) <= 1e-6

    def test_missing_hip_gives_nan(self):
        valid = np.ones(33, bool)
        valid[24] = False
        assert all(np.isnan(v) for v in metrics.trunk_orientation(canonical_pose(), valid))


class TestDimensions:
    def test_single_point_has_zero_extent(self):
        assert metrics.body_dimensions(np.full((33, 3), 0.4)) == (0.0, 0.0, 0.0)

    def test_two_landmarks(self):
        p = np.zeros((33, 3))
        p[0, 0], p[1, 0] = 0.2, 0.7
        valid = np.zeros(33, bool)
        valid[:2] = True
        w, h, d = metrics.body_dimensions(p, valid)
        assert abs(w - 0.5) <= 1e-15 and h == 0 and d == 0

    def test_fewer_than_two_valid_is_missing(self):
        valid = np.zeros(33, bool)
        valid[3] = True
        assert np.isnan(metrics.body_dimensions(np.zeros((33, 3)), valid)[0])

    @given(st.integers(0, 2**31))
    def test_matches_brute_force_scan(self, seed):
        p = np.random.default_rng(seed).random((33, 3))
        dims = metrics.body_dimensions(p)
        for axis in range(3):
            lo = hi = p[0, axis]
            for i in range(33):
                lo, hi = min(lo, p[i, axis]), max(hi, p[i, axis])
            assert dims[axis] == hi - lo


class TestVelocity:
    def test_static_pose(self):
        seq = np.repeat(canonical_pose()[None], 10, axis=0)
        for v in metrics.body_velocity(seq):
            assert np.all(v == 0)

    def test_constant_drift(self):
        seq = np.repeat(canonical_pose()[None], 10, axis=0)
        seq[..., 0] += 0.01 * np.arange(10)[:, None]
        vx, vy, vz = metrics.body_velocity(seq)
        np.testing.assert_allclose(vx, 0.3, atol=1e-12)

    def test_sinusoid_matches_finite_difference_oracle(self):
        t = np.arange(60)
        seq = np.repeat(canonical_pose()[None], 60, axis=0)
        seq[..., 1] += 0.05 * np.sin(2 * np.pi * t / 20)[:, None]
        _, vy, _ = metrics.body_velocity(seq)
        c = [float(np.mean(frame[:, 1])) for frame in seq]
        oracle = [(c[1] - c[0]) * 30] + [(c[i + 1] - c[i - 1]) * 15 for i in range(1, 59)] + [(c[59] - c[58]) * 30]
        np.testing.assert_allclose(vy, oracle, atol=1e-9, rtol=0)

    def test_missing_centroid_propagates(self):
        seq = np.repeat(canonical_pose()[None], 5, axis=0)
        valid = np.ones((5, 33), bool)
        valid[2] = False
        vx, _, _ = metrics.body_velocity(seq, valid)
        assert np.isnan(vx[[1, 3]]).all() and np.isfinite(vx[[0, 4]]).all()


class TestHeadPosition:
    def test_coincident(self):
        p = canonical_pose()
        p[0] = 0.5 * (p[11] + p[12])
        assert metrics.head_position(p) == (0.0, 0.0)

    def test_above_and_forward(self):
        p = canonical_pose()
        p[0] = 0.5 * (p[11] + p[12]) + np.array([0.0, -0.1, 0.05])
        v, s = metrics.head_position(p)
        assert abs(v + 0.1) <= 1e-12 and abs(s - 0.05) <= 1e-12

    def test_missing_shoulder(self):
        valid = np.ones(33, bool)
        valid[11] = False
        assert all(np.isnan(v) for v in metrics.head_position(canonical_pose(), valid))


class TestArm:
    def test_hanging_arms(self):
        assert abs(metrics.arm_opening(canonical_pose())) <= 1e-6

    def test_horizontal_arms(self):
        p = canonical_pose()
        p[11] = (0.08, 0.0, 0.0)
        p[12] = (-0.08, 0.0, 0.0)
        p[23] = (0.08, 0.25, 0.0)
        p[24] = (-0.08, 0.25, 0.0)
        p[13] = (0.21, 0.0, 0.0)
        p[14] = (-0.21, 0.0, 0.0)
        assert abs(metrics.arm_opening(p) - 90) <= 1e-6

    def test_one_side_missing(self):
        p = canonical_pose()
        p[13] = (0.08 + 0.13, 0.0, 0.0)  # left arm horizontal
        valid = np.ones(33, bool)
        valid[14] = False
        assert abs(metrics.arm_opening(p, valid) - 90) <= 1e-6


class TestDistance:
    def test_hand_value(self):
        assert abs(metrics.estimate_distance(30.0, 600.0) - 234.0) <= 1e-12

    def test_inverse_proportional(self):
        assert metrics.estimate_distance(40.0, 600.0) == pytest.approx(metrics.estimate_distance(20.0, 600.0) / 2)

    @pytest.mark.parametrize("iris,focal", [(0.0, 600.0), (-3.0, 600.0), (20.0, 0.0), (np.nan, 600.0)])
    def test_invalid_inputs_missing(self, iris, focal):
        assert np.isnan(metrics.estimate_distance(iris, focal))


@given(st.integers(0, 2**31), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_body_channels_translation_invariant(seed, dx, dy, dz):
    r = np.random.default_rng(seed)
    seq = np.repeat(canonical_pose()[None], 6, axis=0) + r.normal(0, 0.01, (6, 33, 3))
    moved = seq + np.array([dx, dy, dz])
    fns = (metrics.head_orientation, metrics.trunk_orientation, metrics.body_dimensions,
           metrics.body_velocity, metrics.head_position)
    for fn in fns:
        for a, b in zip(fn(seq), fn(moved)):
            np.testing.assert_allclose(a, b, atol=1e-9, rtol=0)
    np.testing.assert_allclose(metrics.arm_opening(seq), metrics.arm_opening(moved), atol=1e-9)


@given(st.integers(0, 2**31))
def test_angle_and_extent_ranges(seed):
    p = np.random.default_rng(seed).normal(size=(5, 33, 3))
    for fn in (metrics.head_orientation, metrics.trunk_orientation):
        for a in fn(p):
            assert np.all((a > -180) & (a <= 180))
    for d in metrics.body_dimensions(p):
        assert np.all(d >= 0)
