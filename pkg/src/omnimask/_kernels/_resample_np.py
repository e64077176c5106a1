"""Pure-numpy resampling backend.

Mirrors the compiled kernel operation for operation (same formulas, same
evaluation order, float64 throughout) so the two backends produce
matching outputs. Model descriptors are ``(kind, width, height, param)``
tuples where ``param`` is the total fov for fisheye models and the focal
length in pixels for pinhole models.
"""

from __future__ import annotations

import math

import numpy as np

EQUIRECT = 0
FISHEYE = 1
PINHOLE = 2

BACKEND_NAME = "numpy"


def _unproject(desc, u, v):
    kind, w, h, p = desc
    if kind == EQUIRECT:
        lam = math.pi * (1.0 - 2.0 * u / w)
        phi = (math.pi / 2.0) * (1.0 - 2.0 * v / h)
        cp = np.cos(phi)
        d = np.stack([cp * np.sin(lam), -np.sin(phi), -cp * np.cos(lam)], axis=-1)
        return d, np.ones(u.shape, dtype=bool)
    if kind == FISHEYE:
        dx = u - w * 0.5
        dy = v - h * 0.5
        r = np.hypot(dx, dy)
        valid = r <= w * 0.5
        theta = r / (w * 0.5) * (p * 0.5)
        st = np.sin(theta)
        safe = np.where(r > 0.0, r, 1.0)
        d = np.stack(
            [
                st * np.where(r > 0.0, dx / safe, 0.0),
                st * np.where(r > 0.0, dy / safe, 0.0),
                -np.cos(theta),
            ],
            axis=-1,
        )
        return d, valid
    x = (u - w * 0.5) / p
    y = (v - h * 0.5) / p
    n = np.sqrt(x * x + y * y + 1.0)
    d = np.stack([x / n, y / n, -1.0 / n], axis=-1)
    return d, np.ones(u.shape, dtype=bool)


def _project(desc, d):
    kind, w, h, p = desc
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    if kind == EQUIRECT:
        phi = np.arcsin(np.clip(-y, -1.0, 1.0))
        lam = np.arctan2(x, -z)
        lam = np.where((x == 0.0) & (z == 0.0), 0.0, lam)
        u = (1.0 - lam / math.pi) * (w * 0.5)
        v = (1.0 - 2.0 * phi / math.pi) * (h * 0.5)
        return u, v, np.ones(u.shape, dtype=bool)
    if kind == FISHEYE:
        theta = np.arccos(np.clip(-z, -1.0, 1.0))
        valid = theta <= p * 0.5
        rho = np.hypot(x, y)
        safe = np.where(rho > 0.0, rho, 1.0)
        r = theta / (p * 0.5) * (w * 0.5)
        u = w * 0.5 + r * np.where(rho > 0.0, x / safe, 0.0)
        v = h * 0.5 + r * np.where(rho > 0.0, y / safe, 0.0)
        return u, v, valid
    front = z < 0.0
    depth = np.where(front, -z, 1.0)
    u = w * 0.5 + p * x / depth
    v = h * 0.5 + p * y / depth
    valid = front & (u >= 0.0) & (u <= w) & (v >= 0.0) & (v <= h)
    return u, v, valid


def resample(src, src_desc, dst_desc, rot, bilinear, fill, threads):
    """Resample ``src`` (H, W, C) into the destination model's grid.

    ``threads`` is accepted for signature parity and ignored.
    """
    del threads
    sh, sw = src.shape[0], src.shape[1]
    nch = src.shape[2]
    dw, dh = dst_desc[1], dst_desc[2]
    wrap_u = src_desc[0] == EQUIRECT

    uu, vv = np.meshgrid(
        np.arange(dw, dtype=np.float64) + 0.5,
        np.arange(dh, dtype=np.float64) + 0.5,
    )
    d, ok_dst = _unproject(dst_desc, uu, vv)
    d = d @ np.asarray(rot, dtype=np.float64).T
    us, vs, ok_src = _project(src_desc, d)
    ok = ok_dst & ok_src
    us = np.where(ok, us, 0.0)
    vs = np.where(ok, vs, 0.0)

    if src.dtype == np.uint8:
        fill_val = min(max(int(math.floor(fill + 0.5)), 0), 255)
    else:
        fill_val = fill
    out = np.full((dh, dw, nch), fill_val, dtype=src.dtype)

    if bilinear:
        x = us - 0.5
        y = vs - 0.5
        i0 = np.floor(x)
        fx = (x - i0)[..., None]
        j0 = np.floor(y)
        fy = (y - j0)[..., None]
        i0 = i0.astype(np.int64)
        i1 = i0 + 1
        j0 = j0.astype(np.int64)
        j1 = np.clip(j0 + 1, 0, sh - 1)
        j0 = np.clip(j0, 0, sh - 1)
        if wrap_u:
            i0 %= sw
            i1 %= sw
        else:
            i0 = np.clip(i0, 0, sw - 1)
            i1 = np.clip(i1, 0, sw - 1)
        s = src.astype(np.float64, copy=False)
        acc = (1.0 - fx) * (1.0 - fy) * s[j0, i0]
        acc += fx * (1.0 - fy) * s[j0, i1]
        acc += (1.0 - fx) * fy * s[j1, i0]
        acc += fx * fy * s[j1, i1]
        if src.dtype == np.uint8:
            vals = np.clip(np.floor(acc + 0.5), 0.0, 255.0).astype(np.uint8)
        else:
            vals = acc.astype(src.dtype)
    else:
        i = np.floor(us).astype(np.int64)
        j = np.clip(np.floor(vs).astype(np.int64), 0, sh - 1)
        if wrap_u:
            i %= sw
        else:
            i = np.clip(i, 0, sw - 1)
        vals = src[j, i]

    out[ok] = vals[ok]
    return out


def backend_name():
    return BACKEND_NAME
