"""Resampling kernel backends.

The compiled (Cython + OpenMP) kernel is preferred; the pure-numpy
implementation is the fallback when the extension is unavailable or when
``OMNIMASK_PURE_PYTHON=1`` is set. Both expose the same ``resample``
contract and evaluate the same formulas in the same order; outputs match
up to one-ulp differences in the trig libraries, which bilinear absorbs
into at most one gray level and which can flip a nearest-neighbor pick
only when a sampling position lands exactly on a texel boundary. Each
backend is bit-deterministic with itself regardless of thread count.

Model descriptors are ``(kind, width, height, param)`` tuples with kind
codes EQUIRECT=0, FISHEYE=1 (param: total fov), PINHOLE=2 (param: focal
length in pixels). Cubemap faces are folded into PINHOLE descriptors by
the resampler before reaching a backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import _resample_np

EQUIRECT = _resample_np.EQUIRECT
FISHEYE = _resample_np.FISHEYE
PINHOLE = _resample_np.PINHOLE

_compiled = None
if os.environ.get("OMNIMASK_PURE_PYTHON", "") != "1":
    try:
        from . import _resample as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None


def backend_name() -> str:
    return "compiled" if _compiled is not None else "numpy"


def resample(src, src_desc, dst_desc, rot, bilinear, fill, threads=0):
    """Resample a (H, W, C) uint8/float32 buffer between camera models.

    ``rot`` maps destination-frame directions into the source frame.
    Returns a new (dh, dw, C) buffer of the source dtype.
    """
    src = np.ascontiguousarray(src)
    rot = np.ascontiguousarray(rot, dtype=np.float64)
    if _compiled is None:
        return _resample_np.resample(src, src_desc, dst_desc, rot, bilinear, fill, threads)
    dw, dh = dst_desc[1], dst_desc[2]
    out = np.empty((dh, dw, src.shape[2]), dtype=src.dtype)
    _compiled.resample_into(
        src,
        out,
        int(src_desc[0]),
        float(src_desc[1]),
        float(src_desc[2]),
        float(src_desc[3]),
        int(dst_desc[0]),
        float(dst_desc[1]),
        float(dst_desc[2]),
        float(dst_desc[3]),
        rot,
        bool(bilinear),
        float(fill),
        int(threads),
    )
    return out
