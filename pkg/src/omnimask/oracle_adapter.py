"""Adapter serving exact analytic masks from a synthetic scene.

Interchangeable with the ML-backed adapter: same wire protocol, no models.
The pipeline writes a ``<image>.meta.json`` sidecar next to every frame it
submits (camera model, world-to-camera rotation, frame index); this
adapter answers from the scene's closed-form cap membership instead of
looking at pixels, which makes it an exact oracle for the geometry.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from . import protocol, synthetic_oracle
from .camera_models import CameraModel
from .synthetic_oracle import SphericalScene

CAPABILITIES = ["detect", "track"]


def _sidecar_mask(scene: SphericalScene, image_path: str) -> np.ndarray:
    meta_path = Path(str(image_path) + ".meta.json")
    if not meta_path.exists():
        raise FileNotFoundError(f"no geometry sidecar at {meta_path}")
    meta = json.loads(meta_path.read_text())
    model = CameraModel.from_json(meta["model"])
    rotation = np.asarray(meta["rotation"], dtype=np.float64)
    return synthetic_oracle.blob_mask(scene, model, rotation, int(meta["frame"]))


def serve(scene: SphericalScene, stdin=None, stdout=None, inline_masks: bool = False) -> None:
    """Run the request loop until the input stream closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    sessions: set[str] = set()

    def reply(record: dict) -> None:
        protocol.write_record(stdout, record)

    while True:
        try:
            request = protocol.read_record(stdin)
        except (ValueError, json.JSONDecodeError) as exc:
            reply({"kind": "error", "message": f"malformed record: {exc}"})
            continue
        if request is None:
            return
        kind = request.get("kind")
        try:
            if kind == "hello":
                reply(
                    {
                        "kind": "hello",
                        "protocol_version": protocol.PROTOCOL_VERSION,
                        "capabilities": CAPABILITIES,
                    }
                )
            elif kind == "detect_person":
                mask = _sidecar_mask(scene, request["image_path"])
                if not mask.any():
                    reply({"kind": "no_detection"})
                else:
                    reply(protocol.mask_response(mask, request["image_path"], inline_masks))
            elif kind == "track_begin":
                session = request["session_id"]
                if "point_prompt" not in request:
                    reply({"kind": "error", "message": "track_begin requires a point_prompt"})
                    continue
                sessions.add(session)
                mask = _sidecar_mask(scene, request["image_path"])
                reply(protocol.mask_response(mask, request["image_path"], inline_masks))
            elif kind == "track_next":
                session = request["session_id"]
                if session not in sessions:
                    reply({"kind": "error", "message": f"unknown session {session!r}"})
                    continue
                mask = _sidecar_mask(scene, request["image_path"])
                reply(protocol.mask_response(mask, request["image_path"], inline_masks))
            elif kind == "track_end":
                session = request.get("session_id")
                if session not in sessions:
                    reply({"kind": "error", "message": f"unknown session {session!r}"})
                    continue
                sessions.discard(session)
                reply({"kind": "ok"})
            else:
                reply({"kind": "error", "message": f"unknown request kind {kind!r}"})
        except (KeyError, FileNotFoundError, ValueError) as exc:
            reply({"kind": "error", "message": str(exc)})
