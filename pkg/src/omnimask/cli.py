"""Command-line entry point exposing every pipeline stage.

Exit codes: 0 on success, 1 on domain errors (e.g. capturer not found),
2 on usage errors. Configuration precedence: flags > config file >
defaults; commands that produce a dataset echo the fully resolved
configuration into their manifest (or a run.json next to the outputs).
"""

from __future__ import annotations

import functools
import json
import math
import shlex
import sys
from pathlib import Path

import click
import numpy as np

from . import camera_models as cm
from . import imgio, oracle_adapter, pipeline, resampler, synthetic_oracle, tessellation
from .adapter_client import AdapterClient
from .camera_models import CameraModel
from .errors import OmnimaskError
from .pipeline import PipelineConfig


def domain_errors(fn):
    """Map domain exceptions to exit code 1 with the message on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OmnimaskError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def parse_model(text: str) -> CameraModel:
    """Parse a model spec: ``equirect:WxH``, ``fisheye:SIZE@FOVDEG``,
    ``pinhole:WxH@FOVDEG``, ``cubeface:SIZE#FACE``."""
    try:
        kind, _, rest = text.partition(":")
        if kind in ("equirect", "equirectangular"):
            w, h = rest.split("x")
            return CameraModel.equirectangular(int(w), int(h))
        if kind == "fisheye":
            size, _, fov = rest.partition("@")
            return CameraModel.fisheye(int(size), math.radians(float(fov or 180.0)))
        if kind == "pinhole":
            size, _, fov = rest.partition("@")
            w, h = size.split("x")
            return CameraModel.pinhole(int(w), int(h), math.radians(float(fov or 90.0)))
        if kind == "cubeface":
            size, _, face = rest.partition("#")
            return CameraModel.cubemap_face(int(size), int(face or 0))
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"bad model spec {text!r}: {exc}") from exc
    raise click.UsageError(
        f"unknown model kind in {text!r}; use equirect:WxH, fisheye:SIZE@FOV, "
        f"pinhole:WxH@FOV, cubeface:SIZE#FACE, or (convert only) cubemap:SIZE"
    )


def parse_direction(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError("need three components")
        return cm.normalize(np.array(parts))
    except ValueError as exc:
        raise click.UsageError(f"bad direction {text!r}: {exc}") from exc


def load_config(config_path, **flag_overrides) -> PipelineConfig:
    cfg = PipelineConfig()
    if config_path:
        cfg = PipelineConfig.from_json(json.loads(Path(config_path).read_text()))
    return cfg.with_overrides(**flag_overrides)


def write_run_manifest(out_dir: Path, command: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "config": config}
    (out_dir / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def progress_printer(enabled: bool):
    if not enabled:
        return None

    def emit(record: dict) -> None:
        click.echo(json.dumps(record, sort_keys=True))

    return emit


def _rotation_flags(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Output-view orientation in the source frame (dst-to-src rotation)."""
    axis = cm.spherical_to_dir(math.radians(pitch), math.radians(yaw))
    r = cm.look_at_rotation(axis)
    if roll:
        r = cm.rotation_about(np.array([0.0, 0.0, -1.0]), math.radians(roll)) @ r
    return r.T


@click.group()
def main() -> None:
    """Dual-fisheye 360 geometry toolkit and capturer-mask pipeline."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--from", "src_spec", required=True, help="source model spec")
@click.option("--to", "dst_spec", required=True, help="destination model spec")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--yaw", default=0.0, help="output view yaw, degrees")
@click.option("--pitch", default=0.0, help="output view pitch, degrees")
@click.option("--roll", default=0.0, help="output view roll, degrees")
@click.option("--interp", default="bilinear", type=click.Choice(["bilinear", "nearest"]))
@click.option("--threads", default=0)
@domain_errors
def convert(input_path, src_spec, dst_spec, out_path, yaw, pitch, roll, interp, threads):
    """Reproject an image between camera models.

    A destination spec of cubemap:SIZE writes six face files into --out.
    """
    src_model = parse_model(src_spec)
    image = imgio.load_image(input_path)
    rot = _rotation_flags(yaw, pitch, roll)
    if dst_spec.startswith("cubemap:"):
        size = int(dst_spec.split(":", 1)[1])
        faces = resampler.to_cubemap(image, src_model, size, rot, interp, threads=threads)
        out_dir = Path(out_path)
        for name, face in zip(cm.FACE_NAMES, faces):
            imgio.save_image(out_dir / f"face_{name}.png", face)
        write_run_manifest(
            out_dir,
            "convert",
            {"from": src_spec, "to": dst_spec, "yaw": yaw, "pitch": pitch, "roll": roll,
             "interp": interp},
        )
    else:
        dst_model = parse_model(dst_spec)
        spec = resampler.ResampleSpec(src_model, dst_model, rot, interp)
        imgio.save_image(out_path, resampler.resample_image(image, spec, threads))


@main.command("boundary-mask")
@click.option("--size", required=True, type=int, help="fisheye image size, px")
@click.option("--fov-deg", default=200.0)
@click.option("--margin", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@domain_errors
def boundary_mask_cmd(size, fov_deg, margin, out_path):
    """Write the valid-region mask of a raw fisheye (255 = valid)."""
    model = CameraModel.fisheye(size, math.radians(fov_deg))
    try:
        mask = resampler.boundary_mask(model, margin)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    imgio.save_mask(out_path, mask)


@main.command("tessellate")
@click.option("--count", default=16, type=int)
@click.option("--fov-deg", default=90.0)
@click.option("--view-size", default=512, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--verify", default=0, type=int, help="Monte-Carlo coverage sample count")
@domain_errors
def tessellate_cmd(count, fov_deg, view_size, out_path, verify):
    """Emit the overlapping pinhole view set as a JSON document."""
    views = tessellation.tessellate(count, math.radians(fov_deg), view_size)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(json.dumps(views.to_json(), indent=2, sort_keys=True))
    if verify:
        uncovered, multiplicity = tessellation.coverage_report(views, verify)
        click.echo(f"uncovered: {uncovered}/{verify}, mean multiplicity: {multiplicity:.2f}")
        if uncovered:
            raise OmnimaskError(f"{uncovered} of {verify} directions uncovered")


@main.command()
@click.option("--capture", "capture_dir", required=True, type=click.Path(exists=True))
@click.option("--adapter", "adapter_cmd", required=True, help="adapter command line")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--downsample", type=int)
@click.option("--stride", type=int)
@click.option("--threads", type=int)
@click.option("--rig", "rig_path", type=click.Path(exists=True))
@click.option("--progress", is_flag=True)
@domain_errors
def localize(capture_dir, adapter_cmd, out_path, config_path, downsample, stride, threads,
             rig_path, progress):
    """Estimate the capturer's world direction from a capture."""
    cfg = load_config(
        config_path,
        downsample_factor=downsample,
        localization_stride=stride,
        threads=threads,
        adapter_cmd=shlex.split(adapter_cmd),
    )
    frames, meta = pipeline.load_capture(capture_dir)
    rig = pipeline.load_rig(meta, rig_path)
    if "fisheye_fov_deg" in meta:
        cfg = cfg.with_overrides(fisheye_fov_deg=float(meta["fisheye_fov_deg"]))
    out = Path(out_path)
    with AdapterClient(cfg.adapter_cmd) as client:
        direction = pipeline.run_localization(
            frames, cfg, rig, client, out.parent / "work", progress_printer(progress)
        )
    payload = {
        "config": cfg.to_json(),
        "direction": (
            {str(k): v.tolist() for k, v in direction.items()}
            if isinstance(direction, dict)
            else direction.tolist()
        ),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True))
    click.echo(json.dumps(payload["direction"]))


@main.command("synth-fisheye")
@click.option("--capture", "capture_dir", required=True, type=click.Path(exists=True))
@click.option("--direction", "direction_text", required=True, help="x,y,z world direction")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--downsample", type=int)
@click.option("--size", "synth_size", type=int)
@click.option("--threads", type=int)
@click.option("--rig", "rig_path", type=click.Path(exists=True))
@domain_errors
def synth_fisheye(capture_dir, direction_text, out_dir, config_path, downsample, synth_size,
                  threads, rig_path):
    """Render the capturer-centered 180-degree fisheye sequence."""
    cfg = load_config(
        config_path,
        downsample_factor=downsample,
        synthetic_fisheye_size=synth_size,
        threads=threads,
    )
    direction = parse_direction(direction_text)
    frames, meta = pipeline.load_capture(capture_dir)
    rig = pipeline.load_rig(meta, rig_path)
    if "fisheye_fov_deg" in meta:
        cfg = cfg.with_overrides(fisheye_fov_deg=float(meta["fisheye_fov_deg"]))
    ctx = pipeline._CaptureContext(frames, cfg, rig)
    synth_model = CameraModel.fisheye(cfg.synthetic_fisheye_size, pipeline.SYNTHETIC_FISHEYE_FOV)
    r_center = cm.look_at_rotation(direction)
    out = Path(out_dir)
    for record in frames:
        omni = ctx.stitched(record)
        spec = resampler.ResampleSpec(ctx.omni_model, synth_model, r_center.T, "bilinear", 0.0)
        synth = resampler.resample_image(omni, spec, cfg.threads)
        pipeline._write_frame_for_adapter(
            out / f"frame{record.frame_id:06d}.png", synth, synth_model, r_center,
            record.frame_id,
        )
    write_run_manifest(out, "synth-fisheye", {**cfg.to_json(), "direction": direction.tolist()})


@main.command()
@click.option("--capture", "capture_dir", required=True, type=click.Path(exists=True))
@click.option("--masks", "masks_dir", required=True, type=click.Path(exists=True),
              help="directory of synthetic-fisheye masks frameNNNNNN.png")
@click.option("--direction", "direction_text", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--downsample", type=int)
@click.option("--dilation", type=int)
@click.option("--threads", type=int)
@click.option("--rig", "rig_path", type=click.Path(exists=True))
@domain_errors
def backproject(capture_dir, masks_dir, direction_text, out_dir, config_path, downsample,
                dilation, threads, rig_path):
    """Map synthetic-fisheye capturer masks back onto the raw fisheyes."""
    cfg = load_config(
        config_path, downsample_factor=downsample, dilation_px=dilation, threads=threads
    )
    direction = parse_direction(direction_text)
    frames, meta = pipeline.load_capture(capture_dir)
    rig = pipeline.load_rig(meta, rig_path)
    if "fisheye_fov_deg" in meta:
        cfg = cfg.with_overrides(fisheye_fov_deg=float(meta["fisheye_fov_deg"]))
    ctx = pipeline._CaptureContext(frames, cfg, rig)
    r_center = cm.look_at_rotation(direction)
    out = Path(out_dir)
    for record in frames:
        mask_path = Path(masks_dir) / f"frame{record.frame_id:06d}.png"
        if not mask_path.exists():
            raise OmnimaskError(f"missing mask {mask_path}")
        synth_mask = imgio.load_mask(mask_path)
        synth_model = CameraModel.fisheye(synth_mask.shape[0], pipeline.SYNTHETIC_FISHEYE_FOV)
        synth_mask = resampler.dilate_mask(synth_mask, cfg.dilation_px)
        for eye in ("front", "rear"):
            rot = r_center @ rig.camera_from_world(eye).T
            spec = resampler.ResampleSpec(synth_model, ctx.raw_model, rot, "nearest", 0.0)
            eye_mask = resampler.resample_mask(synth_mask, spec, cfg.threads)
            imgio.save_mask(out / f"{eye}_{record.frame_id:06d}.png", eye_mask)
    write_run_manifest(out, "backproject", {**cfg.to_json(), "direction": direction.tolist()})


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--radius", default=4, type=int)
@domain_errors
def dilate(input_path, out_path, radius):
    """Dilate a binary mask with a square element of the given radius."""
    mask = imgio.load_mask(input_path)
    try:
        imgio.save_mask(out_path, resampler.dilate_mask(mask, radius))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


@main.command("pipeline")
@click.option("--capture", "capture_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--adapter", "adapter_cmd", required=True, help="adapter command line")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--downsample", type=int)
@click.option("--dilation", type=int)
@click.option("--stride", type=int)
@click.option("--threads", type=int)
@click.option("--direction", "direction_text", help="skip localization, use x,y,z")
@click.option("--rig", "rig_path", type=click.Path(exists=True))
@click.option("--progress", is_flag=True)
@domain_errors
def pipeline_cmd(capture_dir, out_dir, adapter_cmd, config_path, downsample, dilation, stride,
                 threads, direction_text, rig_path, progress):
    """Run the full capture-to-dataset masking pipeline."""
    cfg = load_config(
        config_path,
        downsample_factor=downsample,
        dilation_px=dilation,
        localization_stride=stride,
        threads=threads,
        adapter_cmd=shlex.split(adapter_cmd),
    )
    direction = parse_direction(direction_text) if direction_text else None
    pipeline.run_pipeline(
        capture_dir, out_dir, cfg, rig_path, direction, progress_printer(progress)
    )
    click.echo(f"exported dataset to {out_dir}")


@main.command()
@click.option("--capture", "capture_dir", required=True, type=click.Path(exists=True))
@click.option("--masks", "masks_dir", required=True, type=click.Path(exists=True),
              help="directory of raw-domain capturer masks {eye}_NNNNNN.png")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--downsample", type=int)
@click.option("--rig", "rig_path", type=click.Path(exists=True))
@domain_errors
def export(capture_dir, masks_dir, out_dir, config_path, downsample, rig_path):
    """Compose boundary+capturer masks and write the dataset."""
    cfg = load_config(config_path, downsample_factor=downsample)
    frames, meta = pipeline.load_capture(capture_dir)
    rig = pipeline.load_rig(meta, rig_path)
    if "fisheye_fov_deg" in meta:
        cfg = cfg.with_overrides(fisheye_fov_deg=float(meta["fisheye_fov_deg"]))
    masks = []
    for record in frames:
        pair = []
        for eye in ("front", "rear"):
            path = Path(masks_dir) / f"{eye}_{record.frame_id:06d}.png"
            if not path.exists():
                raise OmnimaskError(f"missing capturer mask {path}")
            pair.append(imgio.load_mask(path))
        masks.append(tuple(pair))
    pipeline.export_dataset(frames, masks, cfg, rig, out_dir)
    click.echo(f"exported dataset to {out_dir}")


@main.group()
def oracle() -> None:
    """Synthetic ground-truth scenes (captures and the oracle adapter)."""


@oracle.command("capture")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--frames", default=60, type=int)
@click.option("--size", default=720, type=int)
@click.option("--fov-deg", default=200.0)
@click.option("--seed", default=0, type=int)
@click.option("--blob-radius-deg", default=15.0)
@click.option("--blob-dir", default="0.2,0.8,-0.5", help="x,y,z or 'random'")
@click.option("--wander-deg", default=4.0)
@click.option("--period", default=30, type=int)
@click.option("--fps", default=5.0)
@domain_errors
def oracle_capture(out_dir, frames, size, fov_deg, seed, blob_radius_deg, blob_dir,
                   wander_deg, period, fps):
    """Render a dual-fisheye capture of a seeded synthetic scene."""
    if blob_dir == "random":
        rng = np.random.default_rng(seed)
        base = cm.normalize(rng.standard_normal(3))
    else:
        base = parse_direction(blob_dir)
    blob = synthetic_oracle.BlobTrack(
        base, math.radians(blob_radius_deg), wander=math.radians(wander_deg), period=period
    )
    scene = synthetic_oracle.SphericalScene(seed, blob)
    synthetic_oracle.emit_capture(scene, out_dir, frames, size, fov_deg, fps=fps)
    click.echo(f"wrote {frames}-frame oracle capture to {out_dir}")


@oracle.command("adapter")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--inline-masks", is_flag=True, help="answer with run-length payloads")
def oracle_adapter_cmd(scene_path, inline_masks):
    """Serve the adapter wire protocol from a scene's analytic masks."""
    scene = synthetic_oracle.load_scene(scene_path)
    oracle_adapter.serve(scene, sys.stdin, sys.stdout, inline_masks)


if __name__ == "__main__":
    main()
