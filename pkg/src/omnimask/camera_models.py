"""Camera projection models for dual-fisheye 360 capture rigs.

Every model maps between continuous pixel coordinates and unit viewing
directions. Shared conventions:

* right-handed frames; a camera looks along ``-z``
* ``+y`` is down in image space, so row ``v`` grows with ``y``
* pixel centers sit at half-integer coordinates: texel ``(i, j)`` is
  centered at ``(i + 0.5, j + 0.5)``; a point is inside the image iff
  ``0 <= u <= W`` and ``0 <= v <= H``
* latitude ``phi = arcsin(-y)``, longitude ``lam = atan2(x, -z)``, with
  ``lam`` canonicalized to 0 at the poles and to ``(-pi, pi]`` elsewhere
* the equirectangular (omni) column runs opposite to longitude:
  ``u = (1 - lam/pi) * W/2`` and ``v = (1 - 2*phi/pi) * H/2``

All functions are vectorized over leading axes and operate in float64.
Directions are arrays of shape ``(..., 3)``; rotations are 3x3 matrices
applied as ``d_camera = R @ d_world`` (world-to-camera).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

HALF_PI = 0.5 * math.pi


class ProjectionKind(enum.Enum):
    EQUIRECTANGULAR = "equirectangular"
    EQUIDISTANT_FISHEYE = "equidistant_fisheye"
    PINHOLE = "pinhole"
    CUBEMAP_FACE = "cubemap_face"


FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")

# Face axes in cubemap-frame coordinates, in tie-break priority order.
FACE_AXES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)


@dataclass(frozen=True)
class CameraModel:
    """A projection with resolution and field-of-view parameters.

    ``fov`` is the total field of view for fisheye models, the horizontal
    field of view for pinhole models, fixed at pi/2 for cubemap faces, and
    absent for equirectangular models.
    """

    kind: ProjectionKind
    width: int
    height: int
    fov: Optional[float] = None
    face_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if self.kind is ProjectionKind.EQUIRECTANGULAR:
            if self.width != 2 * self.height:
                raise ValueError(
                    f"equirectangular models require W = 2H, got {self.width}x{self.height}"
                )
            if self.fov is not None:
                raise ValueError("equirectangular models take no fov")
        elif self.kind is ProjectionKind.EQUIDISTANT_FISHEYE:
            if self.width != self.height:
                raise ValueError("fisheye models must be square")
            if self.fov is None or not 0.0 < self.fov < 2.0 * math.pi:
                raise ValueError(f"fisheye fov must be in (0, 2*pi), got {self.fov}")
        elif self.kind is ProjectionKind.PINHOLE:
            if self.fov is None or not 0.0 < self.fov < math.pi:
                raise ValueError(f"pinhole fov must be in (0, pi), got {self.fov}")
        elif self.kind is ProjectionKind.CUBEMAP_FACE:
            if self.width != self.height:
                raise ValueError("cubemap faces must be square")
            if self.fov != HALF_PI:
                raise ValueError("cubemap faces have a fixed pi/2 fov")
            if self.face_index is None or not 0 <= self.face_index < 6:
                raise ValueError(f"face_index must be in 0..5, got {self.face_index}")
        if self.face_index is not None and self.kind is not ProjectionKind.CUBEMAP_FACE:
            raise ValueError("face_index is only valid for cubemap faces")

    @classmethod
    def equirectangular(cls, width: int, height: int) -> "CameraModel":
        return cls(ProjectionKind.EQUIRECTANGULAR, width, height)

    @classmethod
    def fisheye(cls, size: int, fov: float) -> "CameraModel":
        return cls(ProjectionKind.EQUIDISTANT_FISHEYE, size, size, fov)

    @classmethod
    def pinhole(cls, width: int, height: int, fov: float) -> "CameraModel":
        return cls(ProjectionKind.PINHOLE, width, height, fov)

    @classmethod
    def cubemap_face(cls, size: int, face_index: int) -> "CameraModel":
        return cls(ProjectionKind.CUBEMAP_FACE, size, size, HALF_PI, face_index)

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def focal_px(self) -> float:
        """Focal length in pixels for pinhole-like models."""
        if self.kind not in (ProjectionKind.PINHOLE, ProjectionKind.CUBEMAP_FACE):
            raise ValueError(f"{self.kind.value} models have no focal length")
        return (self.width / 2.0) / math.tan(self.fov / 2.0)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "width": self.width, "height": self.height}
        if self.fov is not None:
            out["fov"] = self.fov
        if self.face_index is not None:
            out["face_index"] = self.face_index
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CameraModel":
        return cls(
            ProjectionKind(data["kind"]),
            int(data["width"]),
            int(data["height"]),
            data.get("fov"),
            data.get("face_index"),
        )


def normalize(v: np.ndarray) -> np.ndarray:
    """Scale vectors to unit norm along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def validate_rotation(r: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Check that ``r`` is a proper orthonormal 3x3 rotation."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.allclose(r.T @ r, np.eye(3), atol=tol):
        raise ValueError("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("rotation has negative determinant (improper)")
    return r


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` radians about a unit ``axis``."""
    x, y, z = normalize(np.asarray(axis, dtype=np.float64))
    c, s = math.cos(angle), math.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def look_at_rotation(target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation whose optical axis points at ``target``.

    Maps ``target`` to the forward axis ``(0, 0, -1)``. Roll is fixed so
    that the vertical reference ``(0, -1, 0)`` maps into the image's
    vertical plane (zero x component), keeping upright content upright;
    for targets parallel to the vertical axis the secondary reference
    ``(0, 0, -1)`` breaks the tie. ``target = (0, 0, -1)`` yields the
    identity; ``target = (0, 0, 1)`` yields a half-turn about the
    vertical axis.
    """
    t = normalize(np.asarray(target, dtype=np.float64))
    if t.shape != (3,):
        raise ValueError("target must be a single direction")
    cam_z = -t
    ref = np.array([0.0, -1.0, 0.0])
    cam_x = np.cross(cam_z, ref)
    n = np.linalg.norm(cam_x)
    if n < 1e-9:
        cam_x = np.cross(cam_z, np.array([0.0, 0.0, -1.0]))
        n = np.linalg.norm(cam_x)
    cam_x = cam_x / n
    cam_y = np.cross(cam_z, cam_x)
    return np.stack([cam_x, cam_y, cam_z])


def rotate(r: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Apply a 3x3 rotation to directions of shape ``(..., 3)``."""
    return np.asarray(d, dtype=np.float64) @ np.asarray(r, dtype=np.float64).T


def dir_to_spherical(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Latitude/longitude of unit directions.

    ``phi = arcsin(-y)`` in [-pi/2, pi/2]; ``lam = atan2(x, -z)`` in
    (-pi, pi], with ``lam = 0`` at the poles.
    """
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    phi = np.arcsin(np.clip(-y, -1.0, 1.0))
    lam = np.arctan2(x, -z)
    lam = np.where((x == 0.0) & (z == 0.0), 0.0, lam)
    lam = np.where(lam == -math.pi, math.pi, lam)
    return phi, lam


def spherical_to_dir(phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Unit direction from latitude/longitude (inverse of dir_to_spherical)."""
    phi = np.asarray(phi, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    cp = np.cos(phi)
    return np.stack([cp * np.sin(lam), -np.sin(phi), -cp * np.cos(lam)], axis=-1)


def omni_project(d: np.ndarray, model: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Project unit directions into an equirectangular image.

    Returns continuous ``(u, v)`` with ``u in [0, W)`` and ``v in [0, H]``.
    """
    if model.kind is not ProjectionKind.EQUIRECTANGULAR:
        raise ValueError(f"omni_project requires an equirectangular model, got {model.kind.value}")
    phi, lam = dir_to_spherical(d)
    u = (1.0 - lam / math.pi) * (model.width / 2.0)
    v = (1.0 - 2.0 * phi / math.pi) * (model.height / 2.0)
    return u, v


def omni_unproject(
    u: np.ndarray, v: np.ndarray, model: CameraModel, check: bool = True
) -> np.ndarray:
    """Unit direction of equirectangular pixel coordinates."""
    if model.kind is not ProjectionKind.EQUIRECTANGULAR:
        raise ValueError(f"omni_unproject requires an equirectangular model, got {model.kind.value}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if check and (
        np.any(u < 0.0) or np.any(u > model.width) or np.any(v < 0.0) or np.any(v > model.height)
    ):
        raise ValueError("pixel coordinates outside the image")
    lam = math.pi * (1.0 - 2.0 * u / model.width)
    phi = HALF_PI * (1.0 - 2.0 * v / model.height)
    return spherical_to_dir(phi, lam)


def fisheye_project(
    d: np.ndarray, model: CameraModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equidistant fisheye projection.

    Image radius grows linearly with the angle off the optical axis:
    ``r = theta / (fov/2) * (W/2)``. Returns ``(u, v, inside)`` where
    ``inside`` is False (and u, v are NaN) beyond the field of view.
    """
    if model.kind is not ProjectionKind.EQUIDISTANT_FISHEYE:
        raise ValueError(f"fisheye_project requires a fisheye model, got {model.kind.value}")
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    half_fov = model.fov / 2.0
    theta = np.arccos(np.clip(-z, -1.0, 1.0))
    inside = theta <= half_fov
    rho = np.hypot(x, y)
    safe = np.where(rho > 0.0, rho, 1.0)
    r = theta / half_fov * (model.width / 2.0)
    u = model.width / 2.0 + r * np.where(rho > 0.0, x / safe, 0.0)
    v = model.height / 2.0 + r * np.where(rho > 0.0, y / safe, 0.0)
    u = np.where(inside, u, np.nan)
    v = np.where(inside, v, np.nan)
    return u, v, inside


def fisheye_unproject(
    u: np.ndarray, v: np.ndarray, model: CameraModel
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse equidistant fisheye mapping.

    Returns ``(d, inside)``; ``inside`` is False outside the image circle
    (radius W/2), where the returned direction extrapolates the model.
    """
    if model.kind is not ProjectionKind.EQUIDISTANT_FISHEYE:
        raise ValueError(f"fisheye_unproject requires a fisheye model, got {model.kind.value}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dx = u - model.width / 2.0
    dy = v - model.height / 2.0
    r = np.hypot(dx, dy)
    inside = r <= model.width / 2.0
    theta = r / (model.width / 2.0) * (model.fov / 2.0)
    safe = np.where(r > 0.0, r, 1.0)
    st = np.sin(theta)
    d = np.stack(
        [
            st * np.where(r > 0.0, dx / safe, 0.0),
            st * np.where(r > 0.0, dy / safe, 0.0),
            -np.cos(theta),
        ],
        axis=-1,
    )
    return d, inside


def pinhole_project(
    d: np.ndarray, model: CameraModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Perspective projection with the principal point at the image center.

    Directions behind the camera or outside the frame are flagged outside
    (u, v set to NaN).
    """
    if model.kind not in (ProjectionKind.PINHOLE, ProjectionKind.CUBEMAP_FACE):
        raise ValueError(f"pinhole_project requires a pinhole model, got {model.kind.value}")
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    f = model.focal_px
    front = z < 0.0
    depth = np.where(front, -z, 1.0)
    u = model.width / 2.0 + f * x / depth
    v = model.height / 2.0 + f * y / depth
    inside = front & (u >= 0.0) & (u <= model.width) & (v >= 0.0) & (v <= model.height)
    u = np.where(inside, u, np.nan)
    v = np.where(inside, v, np.nan)
    return u, v, inside


def pinhole_unproject(u: np.ndarray, v: np.ndarray, model: CameraModel) -> np.ndarray:
    """Unit direction of pinhole pixel coordinates (total inside the image)."""
    if model.kind not in (ProjectionKind.PINHOLE, ProjectionKind.CUBEMAP_FACE):
        raise ValueError(f"pinhole_unproject requires a pinhole model, got {model.kind.value}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    f = model.focal_px
    x = (u - model.width / 2.0) / f
    y = (v - model.height / 2.0) / f
    return normalize(np.stack([x, y, -np.ones_like(x)], axis=-1))


def cubemap_face_for(d: np.ndarray) -> np.ndarray:
    """Index of the cubemap face owning each direction.

    Selection is by dominant signed axis; exact ties resolve in the fixed
    priority order +x, -x, +y, -y, +z, -z.
    """
    d = np.asarray(d, dtype=np.float64)
    scores = d @ FACE_AXES.T
    return np.argmax(scores, axis=-1)


def _face_rotations() -> np.ndarray:
    return np.stack([look_at_rotation(a) for a in FACE_AXES])


FACE_ROTATIONS = _face_rotations()


def cubemap_face_project(
    d: np.ndarray, model: CameraModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project cubemap-frame directions into one face's image plane."""
    if model.kind is not ProjectionKind.CUBEMAP_FACE:
        raise ValueError(f"cubemap_face_project requires a face model, got {model.kind.value}")
    d_face = rotate(FACE_ROTATIONS[model.face_index], d)
    return pinhole_project(d_face, model)


def cubemap_face_unproject(u: np.ndarray, v: np.ndarray, model: CameraModel) -> np.ndarray:
    """Cubemap-frame direction of one face's pixel coordinates."""
    if model.kind is not ProjectionKind.CUBEMAP_FACE:
        raise ValueError(f"cubemap_face_unproject requires a face model, got {model.kind.value}")
    d_face = pinhole_unproject(u, v, model)
    return rotate(FACE_ROTATIONS[model.face_index].T, d_face)


def cubemap_project(
    d: np.ndarray, face_size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project directions onto the full cubemap: ``(face_index, u, v)``."""
    d = np.asarray(d, dtype=np.float64)
    faces = cubemap_face_for(d)
    d_face = np.einsum("...ij,...j->...i", FACE_ROTATIONS[faces], d)
    model = CameraModel.cubemap_face(face_size, 0)
    u, v, inside = pinhole_project(d_face, model)
    # The owning face always contains its direction; clamp fp spill at seams.
    u = np.clip(np.nan_to_num(u, nan=0.0), 0.0, face_size)
    v = np.clip(np.nan_to_num(v, nan=0.0), 0.0, face_size)
    del inside
    return faces, u, v


def project(d: np.ndarray, model: CameraModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dispatch to the model's projection; returns ``(u, v, inside)``."""
    if model.kind is ProjectionKind.EQUIRECTANGULAR:
        u, v = omni_project(d, model)
        return u, v, np.ones(u.shape, dtype=bool)
    if model.kind is ProjectionKind.EQUIDISTANT_FISHEYE:
        return fisheye_project(d, model)
    if model.kind is ProjectionKind.PINHOLE:
        return pinhole_project(d, model)
    return cubemap_face_project(d, model)


def unproject(
    u: np.ndarray, v: np.ndarray, model: CameraModel, check: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to the model's unprojection; returns ``(d, inside)``."""
    if model.kind is ProjectionKind.EQUIRECTANGULAR:
        d = omni_unproject(u, v, model, check=check)
        return d, np.ones(d.shape[:-1], dtype=bool)
    if model.kind is ProjectionKind.EQUIDISTANT_FISHEYE:
        return fisheye_unproject(u, v, model)
    if model.kind is ProjectionKind.PINHOLE:
        d = pinhole_unproject(u, v, model)
        return d, np.ones(d.shape[:-1], dtype=bool)
    d = cubemap_face_unproject(u, v, model)
    return d, np.ones(d.shape[:-1], dtype=bool)


# The front physical fisheye looks at the antipode of the omni reference
# axis: its frame is the world frame yawed by half a turn.
FRONT_FRAME_OFFSET = look_at_rotation(np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True, eq=False)
class RigExtrinsics:
    """Rotations of the physical fisheyes relative to the stitched omni frame.

    ``r_rear`` maps world (omni) directions into the rear camera's
    reference frame; the rear camera is the reference and looks along the
    omni forward axis when ``r_rear`` is the identity. ``r_front`` is the
    same correction for the front camera, applied before the built-in
    half-turn that points the front camera at the omni antipode.
    """

    r_front: np.ndarray
    r_rear: np.ndarray

    def __post_init__(self) -> None:
        validate_rotation(self.r_front)
        validate_rotation(self.r_rear)

    @classmethod
    def identity(cls) -> "RigExtrinsics":
        return cls(np.eye(3), np.eye(3))

    def camera_from_world(self, which: str) -> np.ndarray:
        """World-to-camera rotation for ``which`` in {"front", "rear"}."""
        if which == "rear":
            return self.r_rear
        if which == "front":
            return FRONT_FRAME_OFFSET @ self.r_front
        raise ValueError(f"camera must be 'front' or 'rear', got {which!r}")

    def to_json(self) -> dict:
        return {"r_front": self.r_front.tolist(), "r_rear": self.r_rear.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "RigExtrinsics":
        return cls(np.asarray(data["r_front"], float), np.asarray(data["r_rear"], float))


def fisheye_world_project(
    d_world: np.ndarray, rig: RigExtrinsics, which: str, model: CameraModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project world directions into a physical fisheye camera.

    Rotates into the chosen camera's frame (front cameras include the
    half-turn offset) and applies the equidistant projection. Returns
    ``(u, v, inside)``.
    """
    d_cam = rotate(rig.camera_from_world(which), d_world)
    return fisheye_project(d_cam, model)
