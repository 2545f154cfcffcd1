"""Rigid-body poses and the block shape model.

A :class:`Pose` is an SE(3) transform stored as position + unit quaternion
(scalar-first ``w, x, y, z``). Quaternions are canonicalized so equal
rotations compare equal. Serialized form is seven numbers
``[px, py, pz, qw, qx, qy, qz]``.

Blocks are identical cuboids. Body axes are ordered by size: ``x`` is the
long axis, ``y`` the medium axis (the front-face normal), ``z`` the short
axis. World ``+z`` is up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

UP = np.array([0.0, 0.0, 1.0])


class GeometryError(ValueError):
    pass


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(3).copy()
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite position {a!r}")
    return a


def _as_quat(q) -> np.ndarray:
    a = np.asarray(q, dtype=np.float64).reshape(4).copy()
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite quaternion {a!r}")
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > 1e-9:
        if n < 1e-9:
            raise GeometryError("zero-norm quaternion")
        a = a / n
    return kernels.quat_canonical(a)


@dataclass(frozen=True)
class Pose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0])
    )

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        object.__setattr__(self, "orientation", _as_quat(self.orientation))
        self.position.flags.writeable = False
        self.orientation.flags.writeable = False

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float) -> "Pose":
        return cls(np.array([x, y, z], dtype=np.float64))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float, position=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(_as_vec3(position), kernels.axis_angle_quat(_as_vec3(axis), float(angle_rad)))

    def compose(self, other: "Pose") -> "Pose":
        p, q = kernels.compose(self.position, self.orientation, other.position, other.orientation)
        return Pose(p, q)

    def inverse(self) -> "Pose":
        qc = kernels.quat_conj(self.orientation)
        return Pose(-kernels.quat_rotate(qc, self.position), qc)

    def rotate(self, v) -> np.ndarray:
        return kernels.quat_rotate(self.orientation, _as_vec3(v))

    def rotation_matrix(self) -> np.ndarray:
        return kernels.quat_to_mat(self.orientation)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation])

    def to_list(self) -> list[float]:
        return [float(v) for v in self.to_array()]

    @classmethod
    def from_array(cls, a) -> "Pose":
        a = np.asarray(a, dtype=np.float64).reshape(7)
        return cls(a[:3], a[3:])

    def approx_equal(self, other: "Pose", lin_tol: float = 1e-9, ang_tol_deg: float = 1e-7) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= lin_tol
            and geodesic_angle_deg(self, other) <= ang_tol_deg
        )

    def __repr__(self):  # compact, round-trips through from_array
        vals = ", ".join(f"{v:.6g}" for v in self.to_array())
        return f"Pose([{vals}])"


def relative_pose(parent: Pose, child: Pose) -> Pose:
    """Child pose expressed in the parent frame: parent^-1 * child."""
    p, q = kernels.relative(parent.position, parent.orientation, child.position, child.orientation)
    return Pose(p, q)


def geodesic_angle_deg(a: Pose, b: Pose) -> float:
    return math.degrees(kernels.quat_angle_rad(a.orientation, b.orientation))


@dataclass(frozen=True)
class BlockShape:
    """Half-extents of the cuboid, strictly ordered long > medium > short."""

    half_extents: tuple[float, float, float] = (0.045, 0.015, 0.0075)

    def __post_init__(self):
        hx, hy, hz = self.half_extents
        if not (hx > hy > hz > 0.0):
            raise GeometryError(
                f"half extents must be strictly ordered long > medium > short, got {self.half_extents}"
            )

    @property
    def half_long(self) -> float:
        return self.half_extents[0]

    @property
    def half_medium(self) -> float:
        return self.half_extents[1]

    @property
    def half_short(self) -> float:
        return self.half_extents[2]

    @property
    def extents_array(self) -> np.ndarray:
        return np.array(self.half_extents, dtype=np.float64)

    def vertical_extent(self, pose: Pose) -> float:
        """Half-height of the box's world-z bounding interval."""
        return float(kernels.vertical_extent(pose.orientation, self.extents_array))

    def top_z(self, pose: Pose) -> float:
        return float(pose.position[2]) + self.vertical_extent(pose)

    def bottom_z(self, pose: Pose) -> float:
        return float(pose.position[2]) - self.vertical_extent(pose)
