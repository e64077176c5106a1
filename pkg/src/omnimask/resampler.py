"""Image and mask resampling between camera models.

An output buffer is produced by, per output pixel center, unprojecting in
the destination model, rotating into the source frame, projecting into
the source model, and sampling. Images use bilinear or nearest
interpolation; masks always use nearest so they stay binary. Pixels whose
ray leaves the source model's domain receive the fill value.

Equirectangular sources wrap horizontally (longitude is periodic) and
clamp vertically, so there is no seam at the +-pi meridian. All sampling
is bounds-checked; the kernels never read outside the source buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import _kernels
from . import camera_models as cm
from .camera_models import CameraModel, ProjectionKind

IMAGE_DTYPES = (np.uint8, np.float32)


@dataclass(frozen=True, eq=False)
class ResampleSpec:
    """Source/destination models plus the frame rotation between them.

    ``rotation`` maps destination-frame directions into the source frame.
    """

    src_model: CameraModel
    dst_model: CameraModel
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    interpolation: str = "bilinear"
    fill: float = 0.0

    def __post_init__(self) -> None:
        cm.validate_rotation(self.rotation)
        if self.interpolation not in ("bilinear", "nearest"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")


def _descriptor(model: CameraModel) -> tuple[int, int, int, float]:
    if model.kind is ProjectionKind.EQUIRECTANGULAR:
        return (_kernels.EQUIRECT, model.width, model.height, 0.0)
    if model.kind is ProjectionKind.EQUIDISTANT_FISHEYE:
        return (_kernels.FISHEYE, model.width, model.height, model.fov)
    return (_kernels.PINHOLE, model.width, model.height, model.focal_px)


def _fold_spec(spec: ResampleSpec) -> tuple[tuple, tuple, np.ndarray]:
    """Reduce cubemap faces to pinholes by folding the face rotations."""
    rot = np.asarray(spec.rotation, dtype=np.float64)
    if spec.dst_model.kind is ProjectionKind.CUBEMAP_FACE:
        rot = rot @ cm.FACE_ROTATIONS[spec.dst_model.face_index].T
    if spec.src_model.kind is ProjectionKind.CUBEMAP_FACE:
        rot = cm.FACE_ROTATIONS[spec.src_model.face_index] @ rot
    return _descriptor(spec.src_model), _descriptor(spec.dst_model), rot


def _check_image(src: np.ndarray, model: CameraModel) -> np.ndarray:
    src = np.asarray(src)
    if src.dtype not in IMAGE_DTYPES:
        raise TypeError(f"image dtype must be uint8 or float32, got {src.dtype}")
    if src.ndim == 2:
        src = src[:, :, None]
    if src.ndim != 3 or src.shape[2] not in (1, 3, 4):
        raise ValueError(f"image must be HxW or HxWxC with C in (1, 3, 4), got {src.shape}")
    if src.shape[0] != model.height or src.shape[1] != model.width:
        raise ValueError(
            f"image shape {src.shape[:2]} does not match model size "
            f"{model.height}x{model.width}"
        )
    return src


def resample_image(src: np.ndarray, spec: ResampleSpec, threads: int = 0) -> np.ndarray:
    """Resample an image into the destination model's grid.

    Deterministic: identical inputs yield bit-identical outputs.
    """
    squeeze = np.asarray(src).ndim == 2
    src3 = _check_image(src, spec.src_model)
    src_desc, dst_desc, rot = _fold_spec(spec)
    out = _kernels.resample(
        src3, src_desc, dst_desc, rot, spec.interpolation == "bilinear", spec.fill, threads
    )
    return out[:, :, 0] if squeeze else out


def resample_mask(src: np.ndarray, spec: ResampleSpec, threads: int = 0) -> np.ndarray:
    """Resample a binary mask (always nearest, fill 0)."""
    src = np.asarray(src)
    if src.dtype != np.bool_:
        raise TypeError(f"mask dtype must be bool, got {src.dtype}")
    if src.shape != (spec.src_model.height, spec.src_model.width):
        raise ValueError(
            f"mask shape {src.shape} does not match model size "
            f"{spec.src_model.height}x{spec.src_model.width}"
        )
    src_desc, dst_desc, rot = _fold_spec(spec)
    out = _kernels.resample(
        src.astype(np.uint8)[:, :, None], src_desc, dst_desc, rot, False, 0.0, threads
    )
    return out[:, :, 0] > 0


def compute_source_map(spec: ResampleSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-destination-pixel source coordinates ``(u, v, valid)``.

    Computed through the camera-model layer (not the kernels), so it
    doubles as an independent cross-check of the resampling path.
    """
    w, h = spec.dst_model.size
    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    d, ok_dst = cm.unproject(uu, vv, spec.dst_model, check=False)
    d_src = cm.rotate(spec.rotation, d)
    us, vs, ok_src = cm.project(d_src, spec.src_model)
    return us, vs, ok_dst & ok_src


def dilate_mask(mask: np.ndarray, radius_px: int) -> np.ndarray:
    """Morphological dilation with a square (Chebyshev) element.

    ``radius_px`` of 0 returns an unchanged copy; radius r grows every set
    pixel into a (2r+1) x (2r+1) block clipped at the borders.
    """
    if radius_px < 0:
        raise ValueError(f"dilation radius must be >= 0, got {radius_px}")
    mask = np.asarray(mask)
    if mask.dtype != np.bool_:
        raise TypeError(f"mask dtype must be bool, got {mask.dtype}")
    if radius_px == 0:
        return mask.copy()
    size = 2 * radius_px + 1
    return ndimage.maximum_filter(mask.astype(np.uint8), size=size, mode="constant", cval=0) > 0


def boundary_mask(model: CameraModel, margin_px: int) -> np.ndarray:
    """Valid-region mask of a raw fisheye: the centered disk of radius
    ``W/2 - margin_px``. The black boundary ring and corners are 0."""
    if model.kind is not ProjectionKind.EQUIDISTANT_FISHEYE:
        raise ValueError("boundary_mask applies to fisheye models")
    if margin_px < 0:
        raise ValueError(f"margin must be >= 0, got {margin_px}")
    w, h = model.size
    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    r = np.hypot(uu - w / 2.0, vv - h / 2.0)
    return r <= w / 2.0 - margin_px


def to_cubemap(
    src: np.ndarray,
    src_model: CameraModel,
    face_size: int,
    rotation: Optional[np.ndarray] = None,
    interpolation: str = "bilinear",
    fill: float = 0.0,
    threads: int = 0,
) -> list[np.ndarray]:
    """Render the six cubemap faces (order: +x -x +y -y +z -z) from a
    source image. ``rotation`` maps cubemap-frame directions into the
    source frame (identity by default)."""
    rot = np.eye(3) if rotation is None else rotation
    faces = []
    for idx in range(6):
        spec = ResampleSpec(
            src_model, CameraModel.cubemap_face(face_size, idx), rot, interpolation, fill
        )
        faces.append(resample_image(src, spec, threads))
    return faces


def from_cubemap(
    faces: list[np.ndarray],
    dst_model: CameraModel,
    rotation: Optional[np.ndarray] = None,
    interpolation: str = "bilinear",
    fill: float = 0.0,
    threads: int = 0,
) -> np.ndarray:
    """Resample an image out of six cubemap faces.

    Each destination pixel samples the face owning its direction
    (dominant-axis selection). ``rotation`` maps destination-frame
    directions into the cubemap frame.
    """
    if len(faces) != 6:
        raise ValueError(f"expected 6 faces, got {len(faces)}")
    face_size = faces[0].shape[0]
    rot = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)

    w, h = dst_model.size
    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    d, _ = cm.unproject(uu, vv, dst_model, check=False)
    sel = cm.cubemap_face_for(cm.rotate(rot, d))

    out = None
    for idx in range(6):
        spec = ResampleSpec(
            CameraModel.cubemap_face(face_size, idx), dst_model, rot, interpolation, fill
        )
        face_out = resample_image(faces[idx], spec, threads)
        if out is None:
            out = face_out.copy()
        pick = sel == idx
        out[pick] = face_out[pick]
    return out
