"""Pose representation, geometric primitives, and rig I/O."""

import json
import math

import numpy as np
import pytest

from camweight import (
    CameraRig,
    DegenerateLookAtError,
    Pose,
    angle_between,
    camera_center,
    center_distance,
    load_rig,
    look_at,
    pose_norm_distance,
    save_rig,
    view_direction,
)
from camweight.pose import rig_from_dict, rig_to_dict


def rotation_x(theta: float) -> np.ndarray:
    m = np.eye(4)
    m[1, 1] = math.cos(theta)
    m[1, 2] = -math.sin(theta)
    m[2, 1] = math.sin(theta)
    m[2, 2] = math.cos(theta)
    return m


def rotation_z(theta: float) -> np.ndarray:
    m = np.eye(4)
    m[0, 0] = math.cos(theta)
    m[0, 1] = -math.sin(theta)
    m[1, 0] = math.sin(theta)
    m[1, 1] = math.cos(theta)
    return m


class TestPoseValidation:
    def test_identity_is_valid(self):
        Pose(np.eye(4))

    def test_bad_bottom_row_rejected(self):
        m = np.eye(4)
        m[3, 0] = 1e-12
        with pytest.raises(ValueError, match="bottom row"):
            Pose(m)

    def test_non_orthonormal_rejected(self):
        m = np.eye(4)
        m[0, 0] = 1.1
        with pytest.raises(ValueError, match="orthonormal"):
            Pose(m)

    def test_reflection_rejected(self):
        m = np.eye(4)
        m[0, 0] = -1.0  # det -1, still orthonormal
        with pytest.raises(ValueError, match="determinant"):
            Pose(m)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError, match="4x4"):
            Pose(np.eye(3))

    def test_matrix_is_immutable(self):
        p = Pose(np.eye(4))
        with pytest.raises(ValueError):
            p.matrix[0, 0] = 2.0

    def test_rig_needs_a_source(self):
        with pytest.raises(ValueError, match="source"):
            CameraRig(Pose.identity(), ())


class TestCameraCenter:
    def test_identity(self):
        assert np.array_equal(camera_center(Pose.identity()), [0, 0, 0])

    def test_translation_readoff(self):
        m = np.eye(4)
        m[:3, 3] = [1, 2, 3]
        assert np.array_equal(camera_center(Pose(m)), [1, 2, 3])

    def test_look_at_roundtrip(self):
        p = look_at((0, 0, 4), (0, 0, 0))
        np.testing.assert_allclose(camera_center(p), [0, 0, 4], atol=1e-12)


class TestViewDirection:
    def test_identity_looks_down_negative_z(self):
        np.testing.assert_allclose(view_direction(Pose.identity()), [0, 0, -1], atol=1e-12)

    def test_rotation_pi_about_x(self):
        # R @ (0,0,-1) for a pi rotation about x flips to (0,0,1)
        np.testing.assert_allclose(view_direction(Pose(rotation_x(math.pi))), [0, 0, 1], atol=1e-12)

    def test_look_at_direction(self):
        p = look_at((0, 0, 4), (0, 0, 0))
        np.testing.assert_allclose(view_direction(p), [0, 0, -1], atol=1e-12)

    def test_unit_norm_for_random_poses(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            eye = rng.normal(size=3) * 3
            if np.linalg.norm(eye) < 1e-3:
                continue
            p = look_at(eye, rng.normal(size=3) * 0.1)
            assert abs(np.linalg.norm(view_direction(p)) - 1.0) < 1e-9


class TestAngleBetween:
    def test_same_pose_is_zero(self):
        p = look_at((1, 2, 3), (0, 0, 0))
        assert angle_between(p, p) == 0.0

    def test_antipodal_axes(self):
        a = Pose.identity()
        b = Pose(rotation_x(math.pi))
        assert angle_between(a, b) == pytest.approx(math.pi, abs=1e-12)

    def test_quarter_turn(self):
        # axes (0,0,-1) vs (1,0,-1)/sqrt(2): dot = 1/sqrt(2), angle pi/4
        a = Pose.identity()
        b = look_at((0, 0, 0), (1, 0, -1))
        assert angle_between(a, b) == pytest.approx(math.pi / 4, abs=1e-9)

    def test_symmetry(self):
        a = look_at((3, 1, 0), (0, 0, 0))
        b = look_at((0, 2, 3), (0, 0, 0))
        assert angle_between(a, b) == pytest.approx(angle_between(b, a), abs=0)


class TestPoseNormDistance:
    def test_identical_poses(self):
        p = look_at((1, 1, 1), (0, 0, 0))
        assert pose_norm_distance(p, p, "l1") == 0.0
        assert pose_norm_distance(p, p, "fro") == 0.0

    def test_single_entry_difference(self):
        a = Pose(np.eye(4))
        m = np.eye(4)
        m[0, 3] = 1.0
        b = Pose(m)
        assert pose_norm_distance(a, b, "l1") == pytest.approx(1.0)
        assert pose_norm_distance(a, b, "fro") == pytest.approx(1.0)

    def test_rotation_plus_translation(self):
        # identity vs quarter turn about z translated by (1,1,0):
        # rotation block difference has four unit entries, translation two
        a = Pose(np.eye(4))
        m = rotation_z(math.pi / 2)
        m[:3, 3] = [1, 1, 0]
        b = Pose(m)
        assert pose_norm_distance(a, b, "l1") == pytest.approx(6.0, abs=1e-12)
        assert pose_norm_distance(a, b, "fro") == pytest.approx(math.sqrt(6.0), abs=1e-12)

    def test_symmetry(self):
        a = look_at((2, 0, 1), (0, 0, 0))
        b = look_at((0, 1, 2), (0, 0, 0))
        for kind in ("l1", "fro"):
            assert pose_norm_distance(a, b, kind) == pose_norm_distance(b, a, kind)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="norm kind"):
            pose_norm_distance(Pose.identity(), Pose.identity(), "l2")


class TestCenterDistance:
    def test_coincident(self):
        p = look_at((1, 0, 2), (0, 0, 0))
        assert center_distance(p, p) == 0.0

    def test_three_four_five(self):
        a = Pose.identity()
        m = np.eye(4)
        m[:3, 3] = [3, 4, 0]
        assert center_distance(a, Pose(m)) == pytest.approx(5.0)

    def test_unit_sphere_quarter_chord(self):
        a = look_at((1, 0, 0), (0, 0, 0))
        b = look_at((0, 0, 1), (0, 0, 0))
        assert center_distance(a, b) == pytest.approx(math.sqrt(2.0), abs=1e-12)


class TestLookAt:
    def test_canonical_pose(self):
        p = look_at((0, 0, 4), (0, 0, 0), (0, 1, 0))
        np.testing.assert_allclose(camera_center(p), [0, 0, 4])
        np.testing.assert_allclose(view_direction(p), [0, 0, -1], atol=1e-12)

    def test_from_positive_x(self):
        p = look_at((4, 0, 0), (0, 0, 0))
        np.testing.assert_allclose(view_direction(p), [-1, 0, 0], atol=1e-12)

    def test_direction_matches_gaze_for_random_inputs(self):
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 100:
            eye = rng.uniform(-5, 5, size=3)
            center = rng.uniform(-5, 5, size=3)
            gaze = center - eye
            if np.linalg.norm(gaze) < 1e-6:
                continue
            gaze = gaze / np.linalg.norm(gaze)
            if abs(gaze[1]) > 0.999:  # nearly parallel to the default up
                continue
            p = look_at(eye, center)
            np.testing.assert_allclose(view_direction(p), gaze, atol=1e-9)
            checked += 1

    def test_output_always_passes_pose_invariants(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            eye = rng.uniform(-3, 3, size=3)
            if np.linalg.norm(eye) < 1e-3 or abs(eye[1] / np.linalg.norm(eye)) > 0.99:
                continue
            look_at(eye, (0, 0, 0))  # Pose.__post_init__ enforces the invariants

    def test_degenerate_eye_equals_center(self):
        with pytest.raises(DegenerateLookAtError):
            look_at((1, 1, 1), (1, 1, 1))

    def test_degenerate_up_parallel_to_gaze(self):
        with pytest.raises(DegenerateLookAtError):
            look_at((0, 4, 0), (0, 0, 0), up=(0, 1, 0))


class TestRigJson:
    def test_roundtrip(self, tmp_path):
        rig = CameraRig(
            look_at((0, 0, 4), (0, 0, 0)),
            (look_at((4, 0, 0), (0, 0, 0)), look_at((0, 1, 4), (0, 0, 0))),
        )
        path = tmp_path / "rig.json"
        save_rig(path, rig)
        loaded = load_rig(path)
        np.testing.assert_array_equal(loaded.target.matrix, rig.target.matrix)
        assert loaded.num_sources == 2
        for a, b in zip(loaded.sources, rig.sources):
            np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_missing_keys_rejected(self):
        with pytest.raises(ValueError, match="target"):
            rig_from_dict({"sources": []})

    def test_empty_sources_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            rig_from_dict({"target": np.eye(4).tolist(), "sources": []})

    def test_invalid_pose_rejected(self, tmp_path):
        obj = rig_to_dict(CameraRig(Pose.identity(), (Pose.identity(),)))
        obj["sources"][0][3][0] = 0.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(obj))
        with pytest.raises(ValueError, match="bottom row"):
            load_rig(path)
