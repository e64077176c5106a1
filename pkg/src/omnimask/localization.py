"""Locating the camera operator on the viewing sphere.

Per-view person masks are reduced to (center of mass, area) statistics;
the per-view centroids are fused by an area-weighted average in world
coordinates. The area threshold exists because small false-positive masks
would otherwise skew the fused direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import camera_models as cm
from .camera_models import CameraModel
from .errors import CapturerNotFound


@dataclass(frozen=True)
class ViewMaskStat:
    """Summary of one view's person mask.

    ``centroid_dir`` is the normalized mean of the world-frame viewing
    directions of all set pixels; it is None when the mask is empty
    (``area_px == 0``), and such stats are excluded from fusion.
    """

    view_index: int
    centroid_dir: Optional[np.ndarray]
    area_px: int


def mask_stats(
    mask: np.ndarray, rotation: np.ndarray, model: CameraModel, view_index: int = 0
) -> ViewMaskStat:
    """Center of mass (as a world direction) and pixel area of a view mask."""
    mask = np.asarray(mask)
    if mask.shape != (model.height, model.width):
        raise ValueError(
            f"mask shape {mask.shape} does not match view size {model.height}x{model.width}"
        )
    js, is_ = np.nonzero(mask)
    area = int(js.size)
    if area == 0:
        return ViewMaskStat(view_index, None, 0)
    d_cam, _ = cm.unproject(is_ + 0.5, js + 0.5, model, check=False)
    d_world = cm.rotate(np.asarray(rotation).T, d_cam)
    centroid = cm.normalize(d_world.mean(axis=0))
    return ViewMaskStat(view_index, centroid, area)


def fuse_direction(stats: Sequence[ViewMaskStat], min_area_px: int) -> np.ndarray:
    """Area-weighted average of per-view centroid directions.

    Stats below the area threshold are dropped. Raises CapturerNotFound
    when nothing passes, or when the passing centroids cancel out exactly.
    """
    total = np.zeros(3)
    n_used = 0
    for stat in stats:
        if stat.area_px >= min_area_px and stat.area_px > 0:
            total += stat.area_px * stat.centroid_dir
            n_used += 1
    if n_used == 0:
        raise CapturerNotFound(
            f"no view mask passed the area threshold of {min_area_px} px "
            f"({len(stats)} stats considered)"
        )
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise CapturerNotFound("view centroids cancel out; no dominant direction")
    return total / norm


def centering_rotation(target: np.ndarray) -> np.ndarray:
    """Rotation that re-orients the sphere so ``target`` is centered.

    Maps ``target`` onto the rear-reference forward axis (0, 0, -1) with
    roll fixed so the subject stays upright; the antipode falls back to a
    half-turn about the vertical axis.
    """
    return cm.look_at_rotation(target)
