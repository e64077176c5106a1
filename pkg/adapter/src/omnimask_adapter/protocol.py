"""Wire protocol codec (version 1).

One JSON object per line over standard streams, exactly one response per
request, in order. See the omnimask toolkit README for the full record
reference; this module is a standalone implementation of the same
contract so the adapter has no dependency on the pipeline package.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

PROTOCOL_VERSION = 1


def write_record(stream, record: dict) -> None:
    stream.write(json.dumps(record, sort_keys=True) + "\n")
    stream.flush()


def read_record(stream) -> dict | None:
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
    """Row-major run lengths, alternating and starting with zeros."""
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


def save_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, np.uint8(255), np.uint8(0))).save(path)


def load_image(path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image not found: {p}")
    with Image.open(p) as im:
        return np.array(im.convert("RGB"))


def mask_response(mask: np.ndarray, image_path: str, inline: bool) -> dict:
    area = int(np.count_nonzero(mask))
    if inline:
        return {"kind": "mask", "rle": mask_to_rle(mask), "area_px": area}
    mask_path = str(image_path) + ".mask.png"
    save_mask_png(mask_path, mask)
    return {"kind": "mask", "mask_path": mask_path, "area_px": area}
