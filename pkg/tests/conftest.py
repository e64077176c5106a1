"""Shared fixtures and oracles for the test suite."""

from __future__ import annotations

import math
import sys

import numpy as np
import pytest

from omnimask import camera_models as cm


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; optionally over a pixel mask."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    err = (a - b) ** 2
    if mask is not None:
        err = err[mask]
    return 10.0 * math.log10(peak**2 / err.mean())


def angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    return math.degrees(math.acos(np.clip(np.dot(a, b), -1.0, 1.0)))


def random_directions(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def random_rotations(n: int, seed: int = 0) -> np.ndarray:
    """Uniform-ish random rotations built from random axes and angles."""
    rng = np.random.default_rng(seed)
    out = np.empty((n, 3, 3))
    for i in range(n):
        axis = cm.normalize(rng.standard_normal(3))
        out[i] = cm.rotation_about(axis, rng.uniform(0.0, 2.0 * math.pi))
    return out


def oracle_adapter_argv(scene_path) -> tuple[str, ...]:
    return (
        sys.executable,
        "-m",
        "omnimask.cli",
        "oracle",
        "adapter",
        "--scene",
        str(scene_path),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
