"""Analytic ground-truth scenes for validating the geometry pipeline.

A scene is a closed-form color field on the sphere: a seeded random
polynomial in (x, y, z) of total degree <= 4 (the span of spherical
harmonics up to degree 4), optionally overridden inside a moving
spherical cap that stands in for the camera operator. Because the field
is closed-form, every camera model has an exact reference rasterization
and an exact cap membership mask, which power the derived-value tests
and the end-to-end acceptance runs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import camera_models as cm
from . import imgio
from .camera_models import CameraModel, RigExtrinsics

TEXTURE_DEGREE = 4

# All monomial exponents (i, j, k) with i + j + k <= degree, fixed order.
_EXPONENTS = np.array(
    [
        (i, j, k)
        for i, j, k in itertools.product(range(TEXTURE_DEGREE + 1), repeat=3)
        if i + j + k <= TEXTURE_DEGREE
    ],
    dtype=np.int64,
)


def _fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * k / n)
    golden = math.pi * (1.0 + math.sqrt(5.0))
    theta = golden * k
    return np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=-1
    )


@dataclass(frozen=True)
class BlobTrack:
    """A spherical-cap 'operator' at infinity, wandering near a base direction."""

    base_dir: np.ndarray
    radius: float  # angular radius, radians, in (0, pi/2)
    color: tuple[float, float, float] = (0.85, 0.15, 0.1)
    wander: float = 0.0  # max angular offset from base_dir, radians
    period: int = 40  # frames per wander cycle

    def __post_init__(self) -> None:
        if not 0.0 < self.radius < math.pi / 2:
            raise ValueError(f"blob radius must be in (0, pi/2), got {self.radius}")
        object.__setattr__(self, "base_dir", cm.normalize(np.asarray(self.base_dir, float)))

    def center(self, frame: int) -> np.ndarray:
        """Cap center at a given frame (smooth deterministic wander)."""
        if self.wander == 0.0:
            return self.base_dir
        r = cm.look_at_rotation(self.base_dir)
        e1, e2 = r[0], r[1]
        t = 2.0 * math.pi * frame / self.period
        alpha = self.wander * math.sin(t)
        beta = t * 0.5
        return (
            math.cos(alpha) * self.base_dir
            + math.sin(alpha) * (math.cos(beta) * e1 + math.sin(beta) * e2)
        )

    def to_json(self) -> dict:
        return {
            "base_dir": self.base_dir.tolist(),
            "radius": self.radius,
            "color": list(self.color),
            "wander": self.wander,
            "period": self.period,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BlobTrack":
        return cls(
            np.asarray(data["base_dir"], float),
            float(data["radius"]),
            tuple(data["color"]),
            float(data["wander"]),
            int(data["period"]),
        )


class SphericalScene:
    """Closed-form sphere texture plus an optional operator blob."""

    def __init__(self, seed: int, blob: Optional[BlobTrack] = None):
        self.seed = seed
        self.blob = blob
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal((3, len(_EXPONENTS)))
        # Rescale each channel so the texture spans [0.05, 0.95] without
        # clipping (clipping would break the band limit).
        probe = self._raw_eval(coeffs, _fibonacci_sphere(8192))
        lo = probe.min(axis=0)
        hi = probe.max(axis=0)
        scale = 0.9 / np.maximum(hi - lo, 1e-12)
        self._scale = scale
        self._offset = 0.05 - lo * scale
        self._coeffs = coeffs

    @staticmethod
    def _raw_eval(coeffs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        shape = dirs.shape[:-1]
        flat = dirs.reshape(-1, 3)
        x, y, z = flat[:, 0], flat[:, 1], flat[:, 2]
        # Power tables and a preallocated basis beat np.power + np.stack
        # by an order of magnitude here.
        pows = []
        for comp in (x, y, z):
            table = [np.ones_like(comp)]
            for _ in range(TEXTURE_DEGREE):
                table.append(table[-1] * comp)
            pows.append(table)
        basis = np.empty((len(_EXPONENTS), flat.shape[0]))
        tmp = np.empty(flat.shape[0])
        for m, (i, j, k) in enumerate(_EXPONENTS):
            np.multiply(pows[0][i], pows[1][j], out=tmp)
            np.multiply(tmp, pows[2][k], out=basis[m])
        return (coeffs @ basis).T.reshape(shape + (3,))

    def texture(self, dirs: np.ndarray) -> np.ndarray:
        """Color field in [0, 1], shape (..., 3)."""
        return self._raw_eval(self._coeffs, np.asarray(dirs, float)) * self._scale + self._offset

    def color_at(self, dirs: np.ndarray, frame: int = 0) -> np.ndarray:
        """Texture with the blob cap composited on top."""
        colors = self.texture(dirs)
        if self.blob is not None:
            center = self.blob.center(frame)
            inside = np.asarray(dirs, float) @ center >= math.cos(self.blob.radius)
            colors = np.where(inside[..., None], np.asarray(self.blob.color), colors)
        return colors

    def to_json(self) -> dict:
        out = {"seed": self.seed, "degree": TEXTURE_DEGREE}
        if self.blob is not None:
            out["blob"] = self.blob.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SphericalScene":
        blob = BlobTrack.from_json(data["blob"]) if "blob" in data else None
        return cls(int(data["seed"]), blob)


def render(
    scene: SphericalScene,
    model: CameraModel,
    rotation: Optional[np.ndarray] = None,
    frame: int = 0,
    supersample: int = 2,
    dtype=np.float32,
) -> np.ndarray:
    """Reference rasterization of the scene into a camera model.

    ``rotation`` is world-to-camera. Each pixel averages a supersample x
    supersample grid of field evaluations (band-limiting); pixels outside
    the model's domain are black.
    """
    rot = np.eye(3) if rotation is None else np.asarray(rotation, float)
    w, h = model.size
    acc = np.zeros((h, w, 3))
    offsets = (np.arange(supersample) + 0.5) / supersample
    for dv in offsets:
        for du in offsets:
            uu, vv = np.meshgrid(np.arange(w) + du, np.arange(h) + dv)
            d_cam, ok = cm.unproject(uu, vv, model, check=False)
            d_world = cm.rotate(rot.T, d_cam)
            colors = scene.color_at(d_world, frame)
            acc += np.where(ok[..., None], colors, 0.0)
    acc /= supersample * supersample
    if dtype == np.uint8:
        return imgio.to_uint8(acc)
    return acc.astype(dtype)


def blob_mask(
    scene: SphericalScene,
    model: CameraModel,
    rotation: Optional[np.ndarray] = None,
    frame: int = 0,
) -> np.ndarray:
    """Exact cap membership test at every pixel center."""
    if scene.blob is None:
        raise ValueError("scene has no blob")
    rot = np.eye(3) if rotation is None else np.asarray(rotation, float)
    w, h = model.size
    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    d_cam, ok = cm.unproject(uu, vv, model, check=False)
    d_world = cm.rotate(rot.T, d_cam)
    center = scene.blob.center(frame)
    return ok & (d_world @ center >= math.cos(scene.blob.radius))


def emit_capture(
    scene: SphericalScene,
    out_dir,
    n_frames: int,
    size: int = 720,
    fov_deg: float = 200.0,
    rig: Optional[RigExtrinsics] = None,
    fps: float = 5.0,
) -> dict:
    """Write a dual-fisheye capture directory rendered from the scene.

    Layout: ``front/%06d.png``, ``rear/%06d.png``, ``capture.json`` (rig,
    fov, fps), and ``scene.json`` (the scene spec, consumed by the oracle
    adapter).
    """
    out_dir = Path(out_dir)
    rig = rig or RigExtrinsics.identity()
    model = CameraModel.fisheye(size, math.radians(fov_deg))
    # The texture is static; only the blob moves. Evaluate the supersampled
    # texture once per eye and composite the per-frame cap on top.
    offsets = (np.arange(2) + 0.5) / 2
    for eye in ("front", "rear"):
        rot = rig.camera_from_world(eye)
        dirs = []
        valid = []
        for dv in offsets:
            for du in offsets:
                uu, vv = np.meshgrid(np.arange(size) + du, np.arange(size) + dv)
                d_cam, ok = cm.unproject(uu, vv, model, check=False)
                dirs.append(cm.rotate(rot.T, d_cam))
                valid.append(ok)
        dirs = np.stack(dirs)
        valid = np.stack(valid)
        tex = np.where(valid[..., None], scene.texture(dirs), 0.0)
        for frame in range(n_frames):
            colors = tex
            if scene.blob is not None:
                center = scene.blob.center(frame)
                inside = valid & (dirs @ center >= math.cos(scene.blob.radius))
                colors = np.where(inside[..., None], np.asarray(scene.blob.color), tex)
            imgio.save_image(
                out_dir / eye / f"{frame:06d}.png", imgio.to_uint8(colors.mean(axis=0))
            )
    meta = {
        "fps": fps,
        "fisheye_fov_deg": fov_deg,
        "size": size,
        "frames": n_frames,
        "rig": rig.to_json(),
    }
    (out_dir / "capture.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    (out_dir / "scene.json").write_text(json.dumps(scene.to_json(), indent=2, sort_keys=True))
    return meta


def load_scene(path) -> SphericalScene:
    return SphericalScene.from_json(json.loads(Path(path).read_text()))
