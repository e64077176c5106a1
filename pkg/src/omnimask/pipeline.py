"""Capturer-masking pipeline over dual-fisheye captures.

Stages: stitch a working omni panorama per frame (for masking only; the
exported RGB stays raw), locate the operator via overlapping pinhole
views and a person-detecting adapter, synthesize operator-centered
180-degree fisheye frames, run the adapter's temporal track session with
a center-point prompt, dilate, and back-project the masks onto the raw
front/rear fisheye grids. Exports images plus valid-pixel masks in the
convention downstream calibration/reconstruction tools consume
(mask file = image name + ".png", 8-bit, 255 = use pixel).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import __version__, _kernels
from . import camera_models as cm
from . import imgio
from .adapter_client import TRACK_LOST, AdapterClient
from .camera_models import CameraModel, RigExtrinsics
from .errors import AdapterError, CapturerNotFound, OmnimaskError
from .localization import centering_rotation, fuse_direction, mask_stats
from .resampler import ResampleSpec, boundary_mask, dilate_mask, resample_image, resample_mask
from .tessellation import tessellate

SYNTHETIC_FISHEYE_FOV = math.pi  # operator-centered frames are 180 degrees
REFERENCE_WIDTH = 2880  # full-resolution raw fisheye width
REFERENCE_BOUNDARY_MARGIN = 20  # px at REFERENCE_WIDTH

ProgressFn = Optional[Callable[[dict], None]]


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline parameters.

    ``boundary_margin_px`` is in working-resolution pixels; when None it
    defaults to 20 px at 2880-wide frames, scaled proportionally.
    """

    downsample_factor: int = 4
    dilation_px: int = 4
    synthetic_fisheye_size: int = 720
    fisheye_fov_deg: float = 200.0
    boundary_margin_px: Optional[int] = None
    localization_stride: int = 10
    per_frame_localization: bool = False
    detection_view_count: int = 16
    detection_view_size: int = 512
    min_area_frac: float = 0.001
    seam_band_deg: float = 5.0
    adapter_cmd: tuple[str, ...] = ()
    threads: int = 0

    def __post_init__(self) -> None:
        if self.downsample_factor < 1:
            raise ValueError("downsample_factor must be >= 1")
        if self.dilation_px < 0:
            raise ValueError("dilation_px must be >= 0")
        if self.localization_stride < 1:
            raise ValueError("localization_stride must be >= 1")

    def margin_for(self, working_width: int) -> int:
        if self.boundary_margin_px is not None:
            return self.boundary_margin_px
        return max(1, round(working_width * REFERENCE_BOUNDARY_MARGIN / REFERENCE_WIDTH))

    def to_json(self) -> dict:
        out = {
            "downsample_factor": self.downsample_factor,
            "dilation_px": self.dilation_px,
            "synthetic_fisheye_size": self.synthetic_fisheye_size,
            "fisheye_fov_deg": self.fisheye_fov_deg,
            "boundary_margin_px": self.boundary_margin_px,
            "localization_stride": self.localization_stride,
            "per_frame_localization": self.per_frame_localization,
            "detection_view_count": self.detection_view_count,
            "detection_view_size": self.detection_view_size,
            "min_area_frac": self.min_area_frac,
            "seam_band_deg": self.seam_band_deg,
            "adapter_cmd": list(self.adapter_cmd),
            "threads": self.threads,
        }
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PipelineConfig":
        kwargs = dict(data)
        if "adapter_cmd" in kwargs:
            kwargs["adapter_cmd"] = tuple(kwargs["adapter_cmd"])
        return cls(**kwargs)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply non-None overrides (flags beat config beats defaults)."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        if "adapter_cmd" in clean:
            clean["adapter_cmd"] = tuple(clean["adapter_cmd"])
        return replace(self, **clean)


@dataclass(frozen=True)
class FrameRecord:
    """One capture frame: paired front/rear image files."""

    frame_id: int
    front_path: Path
    rear_path: Path
    omni_path: Optional[Path] = None
    timestamp: float = 0.0


def load_capture(capture_dir) -> tuple[list[FrameRecord], dict]:
    """Scan a capture directory (front/NNNNNN.png + rear/NNNNNN.png).

    Returns the ordered frame records and the capture metadata from
    capture.json (empty dict when absent).
    """
    capture_dir = Path(capture_dir)
    if not capture_dir.is_dir():
        raise OmnimaskError(f"capture directory not found: {capture_dir}")
    meta = {}
    meta_path = capture_dir / "capture.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    fps = float(meta.get("fps", 5.0))
    front_dir = capture_dir / "front"
    rear_dir = capture_dir / "rear"
    if not front_dir.is_dir() or not rear_dir.is_dir():
        raise OmnimaskError(f"capture at {capture_dir} needs front/ and rear/ subdirectories")
    frames = []
    for front in sorted(front_dir.glob("*.png")):
        try:
            frame_id = int(front.stem)
        except ValueError as exc:
            raise OmnimaskError(f"frame files must be named by frame index: {front}") from exc
        rear = rear_dir / front.name
        if not rear.exists():
            raise OmnimaskError(f"missing rear frame for {front}")
        frames.append(FrameRecord(frame_id, front, rear, timestamp=frame_id / fps))
    if not frames:
        raise OmnimaskError(f"no frames found under {front_dir}")
    ids = [f.frame_id for f in frames]
    if len(set(ids)) != len(ids) or ids != sorted(ids):
        raise OmnimaskError("frame ids must be unique and ordered")
    return frames, meta


def load_rig(meta: dict, rig_path=None) -> RigExtrinsics:
    """Extrinsics from an explicit config file, else capture metadata,
    else the identity rig."""
    if rig_path is not None:
        return RigExtrinsics.from_json(json.loads(Path(rig_path).read_text()))
    if "rig" in meta:
        return RigExtrinsics.from_json(meta["rig"])
    return RigExtrinsics.identity()


class StitchGeometry:
    """Precomputed per-pixel resample specs and blend weights for stitching.

    Each omni pixel samples the fisheye with the smaller camera-frame
    incidence angle; the two are feathered over the overlap band.
    """

    def __init__(
        self,
        raw_model: CameraModel,
        omni_model: CameraModel,
        rig: RigExtrinsics,
        band_deg: float,
    ):
        self.raw_model = raw_model
        self.omni_model = omni_model
        self.spec_front = ResampleSpec(
            raw_model, omni_model, rig.camera_from_world("front"), "bilinear", 0.0
        )
        self.spec_rear = ResampleSpec(
            raw_model, omni_model, rig.camera_from_world("rear"), "bilinear", 0.0
        )
        w, h = omni_model.size
        uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        d_world = cm.omni_unproject(uu, vv, omni_model, check=False)
        half_fov = raw_model.fov / 2.0
        theta = {}
        for eye in ("front", "rear"):
            d_cam = cm.rotate(rig.camera_from_world(eye), d_world)
            theta[eye] = np.arccos(np.clip(-d_cam[..., 2], -1.0, 1.0))
        valid_f = theta["front"] <= half_fov
        valid_r = theta["rear"] <= half_fov
        band = math.radians(band_deg)
        feather = np.clip(0.5 + (theta["front"] - theta["rear"]) / band, 0.0, 1.0)
        self.rear_weight = np.where(
            valid_f & valid_r, feather, np.where(valid_r, 1.0, 0.0)
        )

    def stitch(self, front: np.ndarray, rear: np.ndarray, threads: int = 0) -> np.ndarray:
        if front.shape != rear.shape:
            raise OmnimaskError(f"front/rear sizes differ: {front.shape} vs {rear.shape}")
        of = resample_image(front, self.spec_front, threads).astype(np.float64)
        orr = resample_image(rear, self.spec_rear, threads).astype(np.float64)
        w = self.rear_weight if of.ndim == 2 else self.rear_weight[..., None]
        blended = w * orr + (1.0 - w) * of
        if front.dtype == np.uint8:
            return np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)
        return blended.astype(front.dtype)


def stitch_omni(
    front: np.ndarray,
    rear: np.ndarray,
    rig: RigExtrinsics,
    dst_model: CameraModel,
    fisheye_fov: float,
    band_deg: float = 5.0,
    threads: int = 0,
) -> np.ndarray:
    """One-shot stitch of a fisheye pair into an equirectangular panorama."""
    raw_model = CameraModel.fisheye(front.shape[1], fisheye_fov)
    geom = StitchGeometry(raw_model, dst_model, rig, band_deg)
    return geom.stitch(front, rear, threads)


class _CaptureContext:
    """Shared per-capture state: working models and cached stitch geometry."""

    def __init__(self, frames: Sequence[FrameRecord], cfg: PipelineConfig, rig: RigExtrinsics):
        self.cfg = cfg
        self.rig = rig
        probe = imgio.load_image(frames[0].front_path)
        raw_size = probe.shape[0]
        if probe.shape[0] != probe.shape[1]:
            raise OmnimaskError(f"fisheye frames must be square, got {probe.shape[:2]}")
        if raw_size % cfg.downsample_factor:
            raise OmnimaskError(
                f"frame size {raw_size} not divisible by downsample factor "
                f"{cfg.downsample_factor}"
            )
        self.working_size = raw_size // cfg.downsample_factor
        self.raw_model = CameraModel.fisheye(self.working_size, math.radians(cfg.fisheye_fov_deg))
        self.omni_model = CameraModel.equirectangular(2 * self.working_size, self.working_size)
        self.geometry = StitchGeometry(self.raw_model, self.omni_model, rig, cfg.seam_band_deg)

    def load_working(self, record: FrameRecord) -> tuple[np.ndarray, np.ndarray]:
        front = imgio.box_downsample(imgio.load_image(record.front_path), self.cfg.downsample_factor)
        rear = imgio.box_downsample(imgio.load_image(record.rear_path), self.cfg.downsample_factor)
        return front, rear

    def stitched(self, record: FrameRecord) -> np.ndarray:
        front, rear = self.load_working(record)
        return self.geometry.stitch(front, rear, self.cfg.threads)


def _write_frame_for_adapter(
    path: Path, image: np.ndarray, model: CameraModel, rotation: np.ndarray, frame_id: int
) -> None:
    """Write an adapter input image plus its geometry sidecar."""
    imgio.save_image(path, image)
    sidecar = {
        "frame": frame_id,
        "model": model.to_json(),
        "rotation": np.asarray(rotation).tolist(),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def _detect_with_retry(client: AdapterClient, path, frame_id: int):
    try:
        return client.detect_person(path)
    except AdapterError:
        try:
            return client.detect_person(path)
        except AdapterError as exc:
            raise AdapterError(f"frame {frame_id}: detection failed after retry: {exc}") from exc


def run_localization(
    frames: Sequence[FrameRecord],
    cfg: PipelineConfig,
    rig: RigExtrinsics,
    client: AdapterClient,
    workdir,
    progress: ProgressFn = None,
) -> Union[np.ndarray, dict[int, np.ndarray]]:
    """Fuse per-view person masks into the operator's world direction.

    Every ``localization_stride``-th frame is stitched, rendered into the
    overlapping pinhole views, and sent to the adapter; per-view stats are
    area-fused per frame and the per-frame directions averaged. Frames
    with no passing detection are skipped. With per-frame mode on, returns
    a frame_id -> direction mapping instead of the averaged direction.
    """
    ctx = _CaptureContext(frames, cfg, rig)
    views = tessellate(cfg.detection_view_count, math.pi / 2, cfg.detection_view_size)
    min_area = max(1, int(cfg.min_area_frac * views.model.width * views.model.height))
    workdir = Path(workdir)

    per_frame: dict[int, np.ndarray] = {}
    detection_counts: list[tuple[int, int]] = []
    for record in frames[:: cfg.localization_stride]:
        omni = ctx.stitched(record)
        stats = []
        n_detected = 0
        for k in range(views.count):
            rotation, model = views.view(k)
            spec = ResampleSpec(ctx.omni_model, model, rotation.T, "bilinear", 0.0)
            view_img = resample_image(omni, spec, cfg.threads)
            path = workdir / "views" / f"frame{record.frame_id:06d}_view{k:02d}.png"
            _write_frame_for_adapter(path, view_img, model, rotation, record.frame_id)
            mask = _detect_with_retry(client, path, record.frame_id)
            if mask is not None:
                if mask.shape != (model.height, model.width):
                    raise AdapterError(
                        f"adapter mask shape {mask.shape} does not match view "
                        f"{model.height}x{model.width}"
                    )
                n_detected += 1
                stats.append(mask_stats(mask, rotation, model, k))
        detection_counts.append((record.frame_id, n_detected))
        try:
            per_frame[record.frame_id] = fuse_direction(stats, min_area)
        except CapturerNotFound:
            continue
        if progress:
            progress(
                {
                    "event": "localized",
                    "frame": record.frame_id,
                    "views_with_detection": n_detected,
                    "direction": per_frame[record.frame_id].tolist(),
                }
            )
    if not per_frame:
        counts = ", ".join(f"frame {fid}: {n} views" for fid, n in detection_counts)
        raise CapturerNotFound(f"capturer not found in any sampled frame ({counts})")
    if cfg.per_frame_localization:
        return per_frame
    return cm.normalize(np.mean(list(per_frame.values()), axis=0))


def _direction_for_frame(direction, frame_id: int) -> np.ndarray:
    if isinstance(direction, dict):
        if frame_id in direction:
            return direction[frame_id]
        nearest = min(direction, key=lambda fid: abs(fid - frame_id))
        return direction[nearest]
    return direction


def run_masking(
    frames: Sequence[FrameRecord],
    direction,
    cfg: PipelineConfig,
    rig: RigExtrinsics,
    client: AdapterClient,
    workdir,
    progress: ProgressFn = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Track the operator in centered synthetic fisheyes and back-project.

    Returns per-frame (front, rear) capturer masks aligned to the working
    raw fisheye grids (1 = capturer pixel). The adapter session is prompted
    once at the exact synthetic-frame center and restarted on track loss.
    """
    ctx = _CaptureContext(frames, cfg, rig)
    synth_model = CameraModel.fisheye(cfg.synthetic_fisheye_size, SYNTHETIC_FISHEYE_FOV)
    center = (synth_model.width / 2.0, synth_model.height / 2.0)
    workdir = Path(workdir)

    results: list[tuple[np.ndarray, np.ndarray]] = []
    session = None
    session_seq = 0
    for record in frames:
        omni = ctx.stitched(record)
        r_center = centering_rotation(_direction_for_frame(direction, record.frame_id))
        spec = ResampleSpec(ctx.omni_model, synth_model, r_center.T, "bilinear", 0.0)
        synth = resample_image(omni, spec, cfg.threads)
        path = workdir / "synth" / f"frame{record.frame_id:06d}.png"
        _write_frame_for_adapter(path, synth, synth_model, r_center, record.frame_id)

        def _step():
            nonlocal session, session_seq
            if session is None:
                sid = f"track{session_seq:03d}"
                result = client.track_begin(sid, path, center)
                # Only adopt the session once the begin call succeeded.
                session = sid
                session_seq += 1
                return result
            return client.track_next(session, path)

        try:
            try:
                response = _step()
            except AdapterError:
                response = _step()
            if response is TRACK_LOST:
                # Reprompt at the center on this frame.
                session = None
                response = _step()
        except AdapterError as exc:
            raise AdapterError(
                f"frame {record.frame_id}: track session failed after retry: {exc}"
            ) from exc
        if response is TRACK_LOST or response is None:
            synth_mask = np.zeros((synth_model.height, synth_model.width), dtype=bool)
        else:
            synth_mask = response
        if synth_mask.shape != (synth_model.height, synth_model.width):
            raise AdapterError(
                f"frame {record.frame_id}: adapter mask shape {synth_mask.shape} does not "
                f"match synthetic frame {synth_model.height}x{synth_model.width}"
            )
        synth_mask = dilate_mask(synth_mask, cfg.dilation_px)

        eye_masks = []
        for eye in ("front", "rear"):
            rot = r_center @ rig.camera_from_world(eye).T
            back_spec = ResampleSpec(synth_model, ctx.raw_model, rot, "nearest", 0.0)
            eye_masks.append(resample_mask(synth_mask, back_spec, cfg.threads))
        results.append((eye_masks[0], eye_masks[1]))
        if progress:
            progress(
                {
                    "event": "masked",
                    "frame": record.frame_id,
                    "synth_area_px": int(synth_mask.sum()),
                    "front_area_px": int(eye_masks[0].sum()),
                    "rear_area_px": int(eye_masks[1].sum()),
                }
            )
    if session is not None:
        client.track_end(session)
    if len(results) != len(frames):
        raise AdapterError(f"mask/frame count mismatch: {len(results)} vs {len(frames)}")
    return results


def compose_final_masks(
    capturer: np.ndarray, model: CameraModel, cfg: PipelineConfig
) -> np.ndarray:
    """Valid-pixel mask: inside the fisheye boundary AND not the capturer."""
    return boundary_mask(model, cfg.margin_for(model.width)) & ~capturer


def export_dataset(
    frames: Sequence[FrameRecord],
    masks: Sequence[tuple[np.ndarray, np.ndarray]],
    cfg: PipelineConfig,
    rig: RigExtrinsics,
    out_dir,
    direction=None,
    progress: ProgressFn = None,
) -> dict:
    """Write the downsampled images, valid-pixel masks, and manifest.

    Masks follow the external-tool convention: ``masks/<image name>.png``
    with 255 = use pixel. Re-runs are byte-identical.
    """
    if len(masks) != len(frames):
        raise OmnimaskError(f"got {len(masks)} masks for {len(frames)} frames")
    ctx = _CaptureContext(frames, cfg, rig)
    out_dir = Path(out_dir)
    manifest_frames = []
    for record, (front_mask, rear_mask) in zip(frames, masks):
        front, rear = ctx.load_working(record)
        entry = {"frame_id": record.frame_id, "timestamp": record.timestamp}
        for eye, image, capturer in (("front", front, front_mask), ("rear", rear, rear_mask)):
            name = f"{eye}_{record.frame_id:06d}.png"
            valid = compose_final_masks(capturer, ctx.raw_model, cfg)
            try:
                imgio.save_image(out_dir / "images" / name, image)
                imgio.save_mask(out_dir / "masks" / (name + ".png"), valid)
            except OSError as exc:
                raise OmnimaskError(f"failed writing {out_dir / 'images' / name}: {exc}") from exc
            entry[f"image_{eye}"] = f"images/{name}"
            entry[f"mask_{eye}"] = f"masks/{name}.png"
            entry[f"capturer_area_{eye}"] = int(capturer.sum())
        manifest_frames.append(entry)
        if progress:
            progress({"event": "exported", "frame": record.frame_id})

    import PIL
    import scipy

    manifest = {
        "config": cfg.to_json(),
        "rig": rig.to_json(),
        "fused_direction": (
            None
            if direction is None
            else (
                {str(k): v.tolist() for k, v in direction.items()}
                if isinstance(direction, dict)
                else np.asarray(direction).tolist()
            )
        ),
        "working_size": ctx.working_size,
        "frames": manifest_frames,
        "versions": {
            "omnimask": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pillow": PIL.__version__,
            "kernel_backend": _kernels.backend_name(),
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def run_pipeline(
    capture_dir,
    out_dir,
    cfg: PipelineConfig,
    rig_path=None,
    direction=None,
    progress: ProgressFn = None,
) -> dict:
    """Full capture-to-dataset run; returns the manifest."""
    frames, meta = load_capture(capture_dir)
    rig = load_rig(meta, rig_path)
    if "fisheye_fov_deg" in meta and meta["fisheye_fov_deg"] != cfg.fisheye_fov_deg:
        cfg = cfg.with_overrides(fisheye_fov_deg=float(meta["fisheye_fov_deg"]))
    if not cfg.adapter_cmd:
        raise OmnimaskError("pipeline requires an adapter command (adapter_cmd)")
    out_dir = Path(out_dir)
    workdir = out_dir / "work"
    with AdapterClient(cfg.adapter_cmd) as client:
        if direction is None:
            direction = run_localization(frames, cfg, rig, client, workdir, progress)
        masks = run_masking(frames, direction, cfg, rig, client, workdir, progress)
    return export_dataset(frames, masks, cfg, rig, out_dir, direction, progress)
