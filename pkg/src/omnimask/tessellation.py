"""Overlapping virtual pinhole views that jointly cover the sphere.

The canonical 16-view layout: 8 equatorial views at 45-degree longitude
steps, 4 views pitched +45 degrees at longitudes 0/90/180/270, and 4
views pitched -45 degrees at longitudes 45/135/225/315. The staggered
bands keep the covering-view multiplicity as even as possible, which
matters because the direction-fusion estimator counts a pixel once per
covering view: an asymmetric layout (for example pole views plus a
partial bottom band) biases fused directions by several degrees on wide
masks. View 0 faces the omni forward axis (0, 0, -1) with zero roll. A
6-view cube layout is also available. Both tile the sphere exactly at
90-degree fov (seams touch) and overlap for anything wider.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import camera_models as cm
from .camera_models import CameraModel
from .errors import CoverageError


@dataclass(frozen=True)
class ViewSet:
    """Ordered list of (world-to-camera rotation, camera model) views."""

    rotations: np.ndarray  # (N, 3, 3)
    model: CameraModel

    @property
    def count(self) -> int:
        return self.rotations.shape[0]

    def view(self, index: int) -> tuple[np.ndarray, CameraModel]:
        return self.rotations[index], self.model

    def axes(self) -> np.ndarray:
        """World-frame optical axis of every view, shape (N, 3)."""
        forward = np.array([0.0, 0.0, -1.0])
        return np.einsum("nji,j->ni", self.rotations, forward)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "rotations": self.rotations.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ViewSet":
        return cls(
            np.asarray(data["rotations"], dtype=np.float64),
            CameraModel.from_json(data["model"]),
        )


# (latitude, longitude) of each view axis, degrees, in view order.
_LAYOUT_16 = (
    [(0.0, 45.0 * k) for k in range(8)]
    + [(45.0, 90.0 * k) for k in range(4)]
    + [(-45.0, 45.0 + 90.0 * k) for k in range(4)]
)


def tessellate(count: int = 16, fov: float = math.pi / 2, view_size: int = 512) -> ViewSet:
    """Build a deterministic full-coverage view set.

    Layouts exist for ``count`` 16 (canonical) and 6 (cube); other counts,
    or a fov narrower than 90 degrees, cannot cover the sphere with these
    layouts and are rejected.
    """
    if fov < math.pi / 2:
        raise CoverageError(
            f"fov {math.degrees(fov):.1f} deg < 90 deg cannot cover the sphere "
            f"with the fixed {count}-view layout"
        )
    if count == 16:
        axes = cm.spherical_to_dir(
            np.deg2rad([p for p, _ in _LAYOUT_16]), np.deg2rad([l for _, l in _LAYOUT_16])
        )
    elif count == 6:
        axes = cm.FACE_AXES
    else:
        raise CoverageError(
            f"no deterministic coverage layout for count={count}; supported counts: 6, 16"
        )
    rotations = np.stack([cm.look_at_rotation(a) for a in axes])
    model = CameraModel.pinhole(view_size, view_size, fov)
    return ViewSet(rotations, model)


def covering_views(viewset: ViewSet, dirs: np.ndarray) -> np.ndarray:
    """Boolean matrix (n_dirs, n_views): direction inside view frustum."""
    dirs = np.asarray(dirs, dtype=np.float64)
    inside = np.empty((dirs.shape[0], viewset.count), dtype=bool)
    for k in range(viewset.count):
        d_cam = cm.rotate(viewset.rotations[k], dirs)
        _, _, ok = cm.pinhole_project(d_cam, viewset.model)
        inside[:, k] = ok
    return inside


def coverage_report(
    viewset: ViewSet, n_samples: int = 1_000_000, seed: int = 0
) -> tuple[int, float]:
    """Monte-Carlo coverage check over uniform random directions.

    Returns ``(uncovered_count, mean_multiplicity)`` where multiplicity is
    the number of views covering a direction.
    """
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_samples, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    mult = covering_views(viewset, dirs).sum(axis=1)
    return int((mult == 0).sum()), float(mult.mean())
