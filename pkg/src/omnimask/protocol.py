"""Wire protocol for detector/segmenter adapter subprocesses.

One JSON record per line over the adapter's standard streams; exactly one
response per request, in order. Request kinds:

* ``hello {protocol_version}``
* ``detect_person {image_path}``
* ``track_begin {session_id, image_path, point_prompt: {u, v}}``
* ``track_next {session_id, image_path}``
* ``track_end {session_id}``

Response kinds:

* ``hello {protocol_version, capabilities}``
* ``mask {mask_path | rle, area_px}`` (dimensions match the request image)
* ``no_detection``
* ``track_lost``
* ``ok`` (acknowledges ``track_end``)
* ``error {message}`` (the session, if any, is preserved)

Masks travel as 8-bit PNG files by default (written next to the request
image as ``<image_path>.mask.png``); a run-length payload may be inlined
instead: row-major, alternating run lengths starting with a run of zeros.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

PROTOCOL_VERSION = 1

REQUEST_KINDS = {"hello", "detect_person", "track_begin", "track_next", "track_end"}
RESPONSE_KINDS = {"hello", "mask", "no_detection", "track_lost", "ok", "error"}


def write_record(stream, record: dict) -> None:
    stream.write(json.dumps(record, sort_keys=True) + "\n")
    stream.flush()


def read_record(stream) -> dict | None:
    """Read the next record; None at end of stream.

    Raises ValueError on a non-JSON or non-object line.
    """
    while True:
        line = stream.readline()
        if line == "":
            return None
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        if not isinstance(record, dict):
            raise ValueError("protocol records must be JSON objects")
        return record


def mask_to_rle(mask: np.ndarray) -> dict:
    """Run-length encode a boolean mask (row-major, zeros first)."""
    mask = np.asarray(mask)
    h, w = mask.shape
    flat = mask.reshape(-1)
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        counts = [0] + counts
    return {"size": [int(h), int(w)], "counts": counts}


def rle_to_mask(payload: dict) -> np.ndarray:
    h, w = payload["size"]
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for count in payload["counts"]:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    if pos != h * w:
        raise ValueError(f"run lengths cover {pos} of {h * w} pixels")
    return flat.reshape(h, w)


def mask_response(mask: np.ndarray, image_path: str, inline: bool = False) -> dict:
    """Build a mask response, writing the sidecar PNG unless inlined."""
    from . import imgio

    area = int(np.count_nonzero(mask))
    if inline:
        return {"kind": "mask", "rle": mask_to_rle(mask), "area_px": area}
    mask_path = str(image_path) + ".mask.png"
    imgio.save_mask(mask_path, mask)
    return {"kind": "mask", "mask_path": mask_path, "area_px": area}


def load_mask_payload(response: dict) -> np.ndarray:
    """Decode a mask response produced by ``mask_response``."""
    if "rle" in response:
        return rle_to_mask(response["rle"])
    path = Path(response["mask_path"])
    from . import imgio

    return imgio.load_mask(path)
