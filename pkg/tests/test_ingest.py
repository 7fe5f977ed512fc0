import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from socialsat.ingest import (
    FRAME_MS,
    N_LANDMARKS,
    CalibrationError,
    CameraCalibration,
    CameraFrame,
    CameraTrack,
    StreamFormatError,
    dump_calibration,
    format_landmark_records,
    fuse_poses,
    load_calibration,
    parse_landmark_stream,
    parse_landmark_tracks,
    resample_to_30fps,
    rotate_camera_frame,
)


def _record(sid="s1", cam="front", t=0.0, n=N_LANDMARKS, value=0.5, iris=None):
    vals = ",".join(f"{value},{value},{value},0.9" for _ in range(n))
    tail = "" if iris is None else f",{iris}"
    return f"{sid},{cam},{t},{vals}{tail}"


def _track(ts, lm, cam="front", sid="s1", iris=None):
    ts = np.asarray(ts, dtype=float)
    iris = np.full(len(ts), np.nan) if iris is None else np.asarray(iris, dtype=float)
    return CameraTrack(sid, cam, ts, np.asarray(lm, dtype=float), iris)


def _rot_y(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), 0, math.sin(a)], [0, 1, 0], [-math.sin(a), 0, math.cos(a)]])


class TestParse:
    def test_two_valid_lines_give_two_frames(self):
        text = _record(t=0.0) + "\n" + _record(t=33.3, iris=12.5) + "\n"
        frames = parse_landmark_stream(text)
        assert len(frames) == 2
        assert all(isinstance(f, CameraFrame) for f in frames)
        assert frames[0].iris_diameter_px is None
        assert frames[1].iris_diameter_px == 12.5
        assert frames[1].landmarks.shape == (33, 4)

    def test_wrong_landmark_count_names_the_line(self):
        text = _record(t=0.0) + "\n" + _record(t=33.3, n=32) + "\n"
        with pytest.raises(StreamFormatError) as err:
            parse_landmark_stream(text)
        assert err.value.line == 2
        assert "line 2" in str(err.value)

    def test_empty_input_gives_no_frames(self):
        assert parse_landmark_stream("") == []
        assert parse_landmark_stream(io.BytesIO(b"")) == []

    def test_non_monotone_timestamps_rejected(self):
        text = "\n".join([_record(t=10.0), _record(t=5.0)])
        with pytest.raises(StreamFormatError) as err:
            parse_landmark_stream(text)
        assert err.value.line == 2

    def test_monotonicity_is_per_camera(self):
        text = "\n".join([_record(t=10.0), _record(cam="left", t=5.0), _record(t=20.0)])
        assert len(parse_landmark_stream(text)) == 3

    def test_visibility_out_of_range_rejected(self):
        bad = _record().replace(",0.9", ",1.5", 1)
        with pytest.raises(StreamFormatError):
            parse_landmark_stream(bad)

    def test_non_numeric_field_rejected(self):
        bad = _record().replace("0.5", "abc", 1)
        with pytest.raises(StreamFormatError):
            parse_landmark_stream(bad)

    def test_unknown_camera_rejected(self):
        with pytest.raises(StreamFormatError):
            parse_landmark_stream(_record(cam="top"))

    def test_comments_and_blank_lines_ignored(self):
        text = "# header\n\n" + _record() + "\n"
        assert len(parse_landmark_stream(text)) == 1

    def test_format_round_trip(self, rng):
        lm = np.concatenate([rng.random((4, 33, 3)), rng.random((4, 33, 1))], axis=-1)
        track = _track(np.arange(4) * 40.0, lm, iris=[10.0, np.nan, 11.0, 12.0])
        back = parse_landmark_tracks(format_landmark_records(track))[("s1", "front")]
        np.testing.assert_allclose(back.landmarks, lm, atol=5e-7)
        np.testing.assert_array_equal(np.isnan(back.iris), np.isnan(track.iris))
        np.testing.assert_array_equal(back.timestamps, track.timestamps)


class TestResample:
    def test_60fps_second_gives_31_frames(self):
        ts = np.arange(61) * (1000 / 60)
        lm = np.zeros((61, 33, 4))
        out = resample_to_30fps(_track(ts, lm))
        assert len(out) == 31
        np.testing.assert_allclose(out.timestamps, np.arange(31) * FRAME_MS)

    def test_grid_input_is_identity(self, rng):
        ts = np.arange(20) * FRAME_MS
        lm = rng.random((20, 33, 4))
        out = resample_to_30fps(_track(ts, lm))
        np.testing.assert_allclose(out.landmarks, lm, atol=1e-12, rtol=0)

    def test_hand_evaluated_interpolation(self):
        lm = np.zeros((2, 33, 4))
        lm[1, :, 0] = 0.3
        out = resample_to_30fps(_track([0.0, 100.0], lm))
        assert len(out) == 4
        assert abs(out.landmarks[1, 0, 0] - 0.1) <= 1e-9

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            resample_to_30fps(_track([0.0], np.zeros((1, 33, 4))))

    def test_accepts_frame_sequences(self):
        lm = np.zeros((2, 33, 4))
        frames = _track([0.0, 100.0], lm).frames()
        assert len(resample_to_30fps(frames)) == 4

    @given(st.lists(st.floats(1.0, 80.0), min_size=2, max_size=25), st.integers(0, 2**31))
    def test_output_on_grid_and_within_input_span(self, steps, seed):
        ts = np.cumsum([0.0] + steps)
        lm = np.random.default_rng(seed).random((len(ts), 33, 4))
        out = resample_to_30fps(_track(ts, lm))
        k = out.timestamps / FRAME_MS
        np.testing.assert_allclose(k, np.round(k), atol=1e-9)
        assert out.timestamps[0] >= ts[0] - 1e-6 and out.timestamps[-1] <= ts[-1] + 1e-6
        # linear interpolation stays inside the data range
        assert out.landmarks.min() >= lm.min() - 1e-12 and out.landmarks.max() <= lm.max() + 1e-12


class TestRotate:
    def test_identity_rotation_is_identity(self, rng):
        lm = rng.random((3, 33, 4))
        out = rotate_camera_frame(_track([0, 1, 2], lm), CameraCalibration("front", np.eye(3)))
        np.testing.assert_array_equal(out.landmarks, lm)

    def test_two_quarter_turns_equal_half_turn(self, rng):
        lm = rng.random((3, 33, 4))
        t = _track([0, 1, 2], lm)
        twice = rotate_camera_frame(rotate_camera_frame(t, CameraCalibration("front", _rot_y(90))),
                                    CameraCalibration("front", _rot_y(90)))
        once = rotate_camera_frame(t, CameraCalibration("front", _rot_y(180)))
        np.testing.assert_allclose(twice.landmarks, once.landmarks, atol=1e-12)

    def test_visibility_untouched_and_distances_preserved(self, rng):
        lm = rng.random((2, 33, 4))
        out = rotate_camera_frame(_track([0, 1], lm), CameraCalibration("front", _rot_y(37)))
        np.testing.assert_array_equal(out.landmarks[..., 3], lm[..., 3])
        d0 = np.linalg.norm(lm[0, :, None, :3] - lm[0, None, :, :3], axis=-1)
        d1 = np.linalg.norm(out.landmarks[0, :, None, :3] - out.landmarks[0, None, :, :3], axis=-1)
        np.testing.assert_allclose(d0, d1, atol=1e-9)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(CalibrationError):
            CameraCalibration("front", np.diag([1.0, 2.0, 1.0]))
        with pytest.raises(CalibrationError):
            CameraCalibration("front", np.diag([1.0, 1.0, -1.0]))

    def test_camera_mismatch_rejected(self):
        with pytest.raises(CalibrationError):
            rotate_camera_frame(_track([0, 1], np.zeros((2, 33, 4)), cam="left"), CameraCalibration("front", np.eye(3)))

    def test_calibration_file_round_trip(self, tmp_path):
        cal = {"front": CameraCalibration("front", _rot_y(0), 600.0), "left": CameraCalibration("left", _rot_y(30))}
        p = tmp_path / "cal.json"
        p.write_text(dump_calibration(cal))
        back = load_calibration(p)
        assert back["front"].focal_px == 600.0 and back["left"].focal_px is None
        np.testing.assert_allclose(back["left"].rotation, _rot_y(30))


def _grid_track(cam, pos, vis):
    n = pos.shape[0]
    lm = np.concatenate([pos, vis[..., None]], axis=-1)
    return _track(np.arange(n) * FRAME_MS, lm, cam=cam)


class TestFuse:
    def test_single_track_passthrough(self, rng):
        pos = rng.random((5, 33, 3))
        fused = fuse_poses([_grid_track("front", pos, np.full((5, 33), 0.9))])
        np.testing.assert_array_equal(fused.positions, pos)
        assert fused.valid.all()

    def test_identical_observations_equal_weights(self, rng):
        pos = rng.random((4, 33, 3))
        vis = np.full((4, 33), 0.5)
        fused = fuse_poses([_grid_track("front", pos, vis), _grid_track("left", pos, vis)])
        np.testing.assert_allclose(fused.positions, pos, atol=1e-15)

    def test_zero_visibility_camera_excluded(self, rng):
        a, b = rng.random((3, 33, 3)), rng.random((3, 33, 3))
        fused = fuse_poses([_grid_track("front", a, np.ones((3, 33))), _grid_track("left", b, np.zeros((3, 33)))])
        np.testing.assert_array_equal(fused.positions, a)

    def test_low_visibility_everywhere_is_invalid(self, rng):
        fused = fuse_poses([_grid_track("front", rng.random((3, 33, 3)), np.full((3, 33), 0.2))])
        assert not fused.valid.any()
        assert np.isnan(fused.positions).all()

    def test_outlier_camera_dropped(self):
        a = np.zeros((2, 33, 3))
        b = np.zeros((2, 33, 3))
        c = np.zeros((2, 33, 3))
        c[..., 0] = 1.0  # far from the other two
        vis = np.full((2, 33), 0.9)
        fused = fuse_poses([_grid_track("front", a, vis), _grid_track("left", b, vis), _grid_track("right", c, vis)])
        # centroid at x=1/3 is farther than 0.15 from every observation
        assert not fused.valid.any()
        # centroid at x=0.4/3: the agreeing pair survives, the third camera does not
        c[..., 0] = 0.4
        fused = fuse_poses([_grid_track("front", a, vis), _grid_track("left", b, vis), _grid_track("right", c, vis)])
        np.testing.assert_allclose(fused.positions[..., 0], 0.0)

    def test_zero_tracks_rejected(self):
        with pytest.raises(ValueError):
            fuse_poses([])

    def test_shorter_track_padded_as_invalid(self, rng):
        a = rng.random((6, 33, 3))
        t_front = _grid_track("front", a, np.full((6, 33), 0.9))
        short = _track(np.arange(2, 4) * FRAME_MS, np.concatenate([a[2:4], np.full((2, 33, 1), 0.9)], -1), cam="left")
        fused = fuse_poses([t_front, short])
        assert len(fused) == 6
        np.testing.assert_allclose(fused.positions, a, atol=1e-15)

    @given(st.integers(0, 2**31), st.permutations([0, 1, 2]))
    def test_permutation_invariant_and_inside_hull(self, seed, order):
        r = np.random.default_rng(seed)
        cams = ("front", "left", "right")
        base = r.random((4, 33, 3))
        tracks = [_grid_track(c, base + r.normal(0, 0.05, base.shape), r.random((4, 33))) for c in cams]
        ref = fuse_poses(tracks)
        perm = fuse_poses([tracks[i] for i in order])
        np.testing.assert_array_equal(ref.positions, perm.positions)
        stack = np.stack([t.landmarks[..., :3] for t in tracks])
        ok = ref.valid
        lo, hi = stack.min(axis=0), stack.max(axis=0)
        assert np.all(ref.positions[ok] >= lo[ok] - 1e-12)
        assert np.all(ref.positions[ok] <= hi[ok] + 1e-12)
