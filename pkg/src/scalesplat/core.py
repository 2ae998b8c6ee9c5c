"""Domain types shared across the renderer: primitives, cameras, settings, images."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import EmptyCloudError, NonFiniteError

NEAR_PLANE = 0.01


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def sh_coeff_count(degree: int) -> int:
    return (degree + 1) ** 2


def sh_degree_from_count(count: int) -> int:
    for d in range(4):
        if sh_coeff_count(d) == count:
            return d
    raise ValueError(f"{count} SH coefficients per channel does not match any degree 0..3")


@dataclass(frozen=True)
class Gaussian3D:
    """One checkpoint primitive, kept in raw (pre-activation) form.

    ``sh`` has shape ``(K, 3)`` with ``K = (degree + 1)**2``; row 0 is the DC term.
    """

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray  # (w, x, y, z), not necessarily normalized
    opacity_logit: float
    sh: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "log_scale", _frozen(self.log_scale))
        object.__setattr__(self, "rotation", _frozen(self.rotation))
        object.__setattr__(self, "opacity_logit", float(self.opacity_logit))
        object.__setattr__(self, "sh", _frozen(np.reshape(self.sh, (-1, 3))))


@dataclass(frozen=True)
class ActivatedGaussian:
    mean: np.ndarray
    scales: np.ndarray
    rotation: np.ndarray
    opacity: float
    sh: np.ndarray

    @property
    def sh_degree(self) -> int:
        return sh_degree_from_count(len(self.sh))


def normalize_quaternion(q):
    """Unit quaternions; an all-zero quaternion maps to the identity rotation."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    zero = n == 0.0
    identity = np.zeros_like(q)
    identity[..., 0] = 1.0
    with np.errstate(invalid="ignore"):
        return np.where(zero, identity, q / np.where(zero, 1.0, n))


def activate(g: Gaussian3D) -> ActivatedGaussian:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        scales = np.exp(g.log_scale)
        rot = normalize_quaternion(g.rotation)
    opacity = float(sigmoid(g.opacity_logit))
    values = np.concatenate([g.mean, scales, rot, [opacity], g.sh.ravel()])
    if not np.all(np.isfinite(values)) or np.any(scales <= 0) or not 0.0 < opacity < 1.0:
        raise NonFiniteError("activated Gaussian has non-finite or out-of-range values")
    return ActivatedGaussian(g.mean, scales, rot, opacity, g.sh)


def quaternion_to_matrix(q):
    """Rotation matrices for unit quaternions ``(w, x, y, z)``; works on ``(..., 4)``."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.stack(
        [
            1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
        ],
        axis=-1,
    )
    return R.reshape(q.shape[:-1] + (3, 3))


def covariance3d(scales, rotation):
    """World covariance ``R diag(s^2) R^T``; broadcasts over leading axes."""
    R = quaternion_to_matrix(normalize_quaternion(rotation))
    s2 = np.asarray(scales, dtype=np.float64) ** 2
    M = R * s2[..., None, :]
    cov = M @ np.swapaxes(R, -1, -2)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    if not np.all(np.isfinite(cov)):
        raise NonFiniteError("covariance has non-finite entries")
    return cov


@dataclass(frozen=True)
class GaussianCloud:
    """Structure-of-arrays container for N primitives in raw checkpoint form.

    Arrays: ``means (N,3)``, ``log_scales (N,3)``, ``rotations (N,4)``,
    ``opacity_logits (N,)``, ``sh (N,K,3)``.
    """

    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh: np.ndarray

    def __post_init__(self):
        n = len(self.means)
        sh = np.asarray(self.sh, dtype=np.float64)
        if sh.ndim == 2:
            sh = sh[:, None, :]
        object.__setattr__(self, "means", _frozen(np.reshape(self.means, (n, 3))))
        object.__setattr__(self, "log_scales", _frozen(np.reshape(self.log_scales, (n, 3))))
        object.__setattr__(self, "rotations", _frozen(np.reshape(self.rotations, (n, 4))))
        object.__setattr__(self, "opacity_logits", _frozen(np.reshape(self.opacity_logits, (n,))))
        if sh.ndim != 3 or sh.shape[0] != n or sh.shape[2] != 3:
            raise ValueError(f"sh must have shape (N, K, 3) with N={n}, got {sh.shape}")
        object.__setattr__(self, "sh", _frozen(sh))
        sh_degree_from_count(self.sh.shape[1])

    @classmethod
    def from_gaussians(cls, gaussians: Sequence[Gaussian3D]) -> "GaussianCloud":
        if len(gaussians) == 0:
            return cls.empty()
        counts = {len(g.sh) for g in gaussians}
        if len(counts) != 1:
            raise ValueError("all primitives must share one SH degree")
        return cls(
            means=np.stack([g.mean for g in gaussians]),
            log_scales=np.stack([g.log_scale for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            opacity_logits=np.array([g.opacity_logit for g in gaussians]),
            sh=np.stack([g.sh for g in gaussians]),
        )

    @classmethod
    def empty(cls, sh_degree: int = 0) -> "GaussianCloud":
        k = sh_coeff_count(sh_degree)
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros(0), np.zeros((0, k, 3)))

    @property
    def sh_degree(self) -> int:
        return sh_degree_from_count(self.sh.shape[1])

    @property
    def gaussians(self) -> list[Gaussian3D]:
        return [self[i] for i in range(len(self))]

    def __len__(self) -> int:
        return len(self.means)

    def __getitem__(self, i: int) -> Gaussian3D:
        return Gaussian3D(self.means[i], self.log_scales[i], self.rotations[i],
                          self.opacity_logits[i], self.sh[i])

    def activated_arrays(self):
        """Return ``(means, scales, unit_rotations, opacities)`` for the whole cloud."""
        if len(self) == 0:
            raise EmptyCloudError("cloud has no primitives")
        scales = np.exp(self.log_scales)
        rots = normalize_quaternion(self.rotations)
        opac = sigmoid(self.opacity_logits)
        if not (np.all(np.isfinite(scales)) and np.all(np.isfinite(rots))
                and np.all(np.isfinite(self.means)) and np.all(np.isfinite(opac))):
            raise NonFiniteError("cloud contains non-finite parameters")
        return self.means, scales, rots, opac


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera, OpenCV axes (x right, y down, z forward).

    Pixel ``(col, row)`` covers ``[col, col+1) x [row, row+1)``, so its center
    sits at ``col + 0.5``.  World points map as ``x_cam = R @ x + t``.
    """

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    rotation_w2c: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation_w2c: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(np.reshape(self.rotation_w2c, (3, 3)))
        t = _frozen(np.reshape(self.translation_w2c, (3,)))
        object.__setattr__(self, "rotation_w2c", R)
        object.__setattr__(self, "translation_w2c", t)
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("camera width/height must be >= 1")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
            raise ValueError("rotation_w2c must be a proper orthonormal matrix")
        if not (np.all(np.isfinite(t)) and np.isfinite([self.cx, self.cy]).all()):
            raise ValueError("camera has non-finite parameters")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def center(self) -> np.ndarray:
        return -self.rotation_w2c.T @ self.translation_w2c

    @property
    def forward(self) -> np.ndarray:
        """Optical axis direction in world coordinates."""
        return self.rotation_w2c[2].copy()

    def world_to_camera(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation_w2c.T + self.translation_w2c

    def scaled(self, factor: float) -> "CameraModel":
        """Same pose, resolution multiplied by ``factor`` (intrinsics follow)."""
        w = max(1, int(round(self.width * factor)))
        h = max(1, int(round(self.height * factor)))
        sx, sy = w / self.width, h / self.height
        return replace(self, width=w, height=h, fx=self.fx * sx, fy=self.fy * sy,
                       cx=self.cx * sx, cy=self.cy * sy)

    @classmethod
    def look_at(cls, eye, target, width: int, height: int, focal: float,
                up=(0.0, -1.0, 0.0)) -> "CameraModel":
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        z /= np.linalg.norm(z)
        up = np.asarray(up, dtype=np.float64)
        x = np.cross(up, z)
        if np.linalg.norm(x) < 1e-9:
            x = np.cross([1.0, 0.0, 0.0], z)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        return cls(width, height, focal, focal, width / 2.0, height / 2.0, R, -R @ eye)


@dataclass(frozen=True)
class TrainingCameraSet:
    cameras: tuple[CameraModel, ...]
    train_width: int
    train_height: int

    def __post_init__(self):
        cams = tuple(self.cameras)
        if not cams:
            raise ValueError("training camera set is empty")
        for c in cams:
            if (c.width, c.height) != (self.train_width, self.train_height):
                raise ValueError("training cameras must share the training resolution")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)


class FilterMode(str, enum.Enum):
    NONE = "none"
    FIXED_DILATION = "dilate"
    SCALE_ADAPTIVE = "sa"


class BlendMode(str, enum.Enum):
    POINT = "point"
    SUPERSAMPLE = "ss"
    INTEGRATE = "int"


@dataclass(frozen=True)
class RenderSettings:
    """Render configuration.

    ``compensate`` multiplies opacity by the determinant ratio stored on each
    filtered splat, making the filter mass-preserving.  It is off by default:
    the filtered primitive keeps unit peak, which is how checkpoints trained
    with the fixed dilation expect to be evaluated.
    """

    filter_mode: FilterMode = FilterMode.SCALE_ADAPTIVE
    blend_mode: BlendMode = BlendMode.POINT
    ss_grid: int = 3
    sigma_l: float = 0.3
    tile_size: int = 16
    cutoff_sigmas: float = 3.0
    alpha_min: float = 1.0 / 255.0
    alpha_max: float = 0.99
    t_min: float = 1e-4
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    compensate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "filter_mode", FilterMode(self.filter_mode))
        object.__setattr__(self, "blend_mode", BlendMode(self.blend_mode))
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        if int(self.ss_grid) < 1:
            raise ValueError("ss_grid must be >= 1")
        if not 0.0 < self.alpha_max < 1.0:
            raise ValueError("alpha_max must lie in (0, 1)")
        if self.sigma_l < 0:
            raise ValueError("sigma_l must be non-negative")
        if self.tile_size < 1 or self.cutoff_sigmas <= 0:
            raise ValueError("tile_size and cutoff_sigmas must be positive")
        if len(self.background) != 3:
            raise ValueError("background must be an RGB triple")


@dataclass(frozen=True)
class ImageBuffer:
    """RGB image as an ``(height, width, 3)`` float array, row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("pixels must have shape (height, width, 3)")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color) -> "ImageBuffer":
        return cls(np.broadcast_to(np.asarray(color, dtype=np.float64), (height, width, 3)))

    def finalized(self) -> "ImageBuffer":
        return ImageBuffer(np.clip(self.pixels, 0.0, 1.0))

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> "ImageBuffer":
        return ImageBuffer(self.pixels[y0:y1, x0:x1])
