"""Scale-adaptive Gaussian splatting: training-free anti-aliasing for 3DGS checkpoints."""

from .core import (
    ActivatedGaussian,
    BlendMode,
    CameraModel,
    FilterMode,
    Gaussian3D,
    GaussianCloud,
    ImageBuffer,
    RenderSettings,
    TrainingCameraSet,
    activate,
)
from .errors import SplatError
from .filters import ScaleRatio, compute_scale_ratio, fixed_dilation, scale_adaptive
from .projection import Splat2D, project
from .rasterizer import render, render_frame

__all__ = [
    "ActivatedGaussian", "BlendMode", "CameraModel", "FilterMode", "Gaussian3D", "GaussianCloud",
    "ImageBuffer", "RenderSettings", "TrainingCameraSet", "activate", "SplatError", "ScaleRatio",
    "compute_scale_ratio", "fixed_dilation", "scale_adaptive", "Splat2D", "project", "render",
    "render_frame",
]
__version__ = "0.1.0"
