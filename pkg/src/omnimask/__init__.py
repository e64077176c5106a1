"""omnimask: dual-fisheye 360 camera geometry and capturer-mask pipeline."""

from ._kernels import backend_name
from .camera_models import CameraModel, ProjectionKind, RigExtrinsics
from .errors import AdapterError, CapturerNotFound, CoverageError, OmnimaskError
from .resampler import ResampleSpec, boundary_mask, dilate_mask, resample_image, resample_mask

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "CameraModel",
    "CapturerNotFound",
    "CoverageError",
    "OmnimaskError",
    "ProjectionKind",
    "ResampleSpec",
    "RigExtrinsics",
    "backend_name",
    "boundary_mask",
    "dilate_mask",
    "resample_image",
    "resample_mask",
    "__version__",
]
