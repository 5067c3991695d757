"""Rigid camera poses and the geometric primitives consumed by view weighting.

Convention: camera-to-world matrices, right-handed, y up, with the camera
looking along its local -z axis. Every module that touches poses (weighting,
embedding, rendering, rig I/O) relies on this convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateLookAtError

_BOTTOM_ROW = np.array([0.0, 0.0, 0.0, 1.0])
_ORTHONORMALITY_TOL = 1e-6


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform.

    Attributes:
        matrix: (4, 4) float64 array. Upper-left 3x3 is a proper rotation,
            the top of the fourth column is the camera center in world
            units, and the bottom row is exactly (0, 0, 0, 1).
    """

    matrix: NDArray[np.float64]

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"pose matrix must be 4x4, got {m.shape}")
        if not np.array_equal(m[3], _BOTTOM_ROW):
            raise ValueError("pose bottom row must be exactly (0, 0, 0, 1)")
        r = m[:3, :3]
        if np.linalg.norm(r.T @ r - np.eye(3)) >= _ORTHONORMALITY_TOL:
            raise ValueError("rotation block is not orthonormal")
        if np.linalg.det(r) <= 0.0:
            raise ValueError("rotation block must have positive determinant")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rotation(self) -> NDArray[np.float64]:
        """The 3x3 rotation block."""
        return self.matrix[:3, :3]

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(4))


@dataclass(frozen=True)
class CameraRig:
    """A target pose together with the ordered source poses to weight.

    Attributes:
        target: pose of the view to synthesize.
        sources: S >= 1 poses of the input views, order preserved.
    """

    target: Pose
    sources: tuple[Pose, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))
        if len(self.sources) < 1:
            raise ValueError("rig needs at least one source pose")

    @property
    def num_sources(self) -> int:
        return len(self.sources)


def camera_center(p: Pose) -> NDArray[np.float64]:
    """World-space camera position (top of the translation column)."""
    return p.matrix[:3, 3].copy()


def view_direction(p: Pose) -> NDArray[np.float64]:
    """Unit world-space vector along the camera's principal view axis (-z)."""
    d = -p.matrix[:3, 2]
    return d / np.linalg.norm(d)


def angle_between(a: Pose, b: Pose) -> float:
    """Angle in [0, pi] between the principal view axes of two poses.

    The dot product is clamped to [-1, 1] so coincident or antipodal axes
    cannot produce NaN through floating-point drift.
    """
    dot = float(np.dot(view_direction(a), view_direction(b)))
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


def pose_norm_distance(a: Pose, b: Pose, kind: str) -> float:
    """Entrywise L1 or Frobenius distance between two 4x4 pose matrices.

    The constant bottom rows cancel, so the full-matrix norm equals the
    3x4 norm; the full matrix is used to keep the definition uniform.

    Args:
        kind: "l1" or "fro".
    """
    diff = a.matrix - b.matrix
    if kind == "l1":
        return float(np.sum(np.abs(diff)))
    if kind == "fro":
        return float(np.linalg.norm(diff))
    raise ValueError(f"unknown norm kind {kind!r} (expected 'l1' or 'fro')")


def center_distance(a: Pose, b: Pose) -> float:
    """Euclidean distance between the two camera centers."""
    return float(np.linalg.norm(camera_center(a) - camera_center(b)))


def look_at(eye, center, up=(0.0, 1.0, 0.0)) -> Pose:
    """Build a pose at `eye` looking toward `center`.

    Args:
        eye: camera position, length-3.
        center: point the camera looks at; must differ from `eye`.
        up: world up hint; must not be parallel to the gaze.

    Raises:
        DegenerateLookAtError: if `eye == center` or `up` is parallel
            to the gaze direction.
    """
    eye = np.asarray(eye, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)

    forward = center - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise DegenerateLookAtError("eye and center coincide")
    forward = forward / norm

    right = np.cross(forward, up)
    right_norm = np.linalg.norm(right)
    if right_norm < 1e-12:
        raise DegenerateLookAtError("up vector is parallel to the gaze direction")
    right = right / right_norm

    true_up = np.cross(right, forward)

    m = np.eye(4)
    m[:3, 0] = right
    m[:3, 1] = true_up
    m[:3, 2] = -forward  # camera looks along local -z
    m[:3, 3] = eye
    return Pose(m)


def rig_to_dict(rig: CameraRig) -> dict:
    """Plain-JSON form of a rig: nested row-major 4x4 arrays."""
    return {
        "target": rig.target.matrix.tolist(),
        "sources": [p.matrix.tolist() for p in rig.sources],
    }


def rig_from_dict(obj: dict) -> CameraRig:
    """Parse a rig from its JSON object form, validating every pose."""
    if not isinstance(obj, dict) or "target" not in obj or "sources" not in obj:
        raise ValueError("rig object must have 'target' and 'sources' keys")
    target = Pose(np.asarray(obj["target"], dtype=np.float64))
    sources = obj["sources"]
    if not isinstance(sources, list) or len(sources) == 0:
        raise ValueError("'sources' must be a non-empty list of 4x4 matrices")
    return CameraRig(target, tuple(Pose(np.asarray(s, dtype=np.float64)) for s in sources))


def load_rig(path) -> CameraRig:
    with open(path, "r", encoding="utf-8") as fh:
        return rig_from_dict(json.load(fh))


def save_rig(path, rig: CameraRig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rig_to_dict(rig), fh)
