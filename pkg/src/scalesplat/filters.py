"""Test-time screen-space covariance filters.

Two filters share one shape, ``cov -> cov + v * I``:

* fixed dilation, ``v = sigma_l`` (the constant blur baked in at training time);
* scale-adaptive, ``v = sigma_l * r**2`` where ``r`` is how many more pixels per
  world unit the primitive covers now than it did in its reference training view.

Adding ``v * I`` shifts both eigenvalues by ``v`` and leaves the eigenvectors
alone, so the filtered splat reuses the unfiltered eigen-frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraModel, TrainingCameraSet
from .errors import DegenerateDepthError
from .projection import Splat2D, SplatBatch

_TIE_EPS = 1e-12


@dataclass(frozen=True)
class ScaleRatio:
    r: float
    delta_Rp: float
    delta_Dc: float
    reference_camera_index: int


def _dilate(splat: Splat2D, v: float) -> Splat2D:
    lam_l, lam_s = splat.eigvals
    new_cov = splat.cov_px + v * np.eye(2)
    det0 = max(lam_l * lam_s, 0.0)
    det1 = (lam_l + v) * (lam_s + v)
    comp = np.sqrt(det0 / det1) if det1 > 0 else 1.0
    return splat.with_covariance(new_cov, (lam_l + v, lam_s + v), comp)


def fixed_dilation(splat: Splat2D, sigma_l: float = 0.3) -> Splat2D:
    """Add ``sigma_l * I`` to the pixel covariance.

    ``comp_factor`` is set to ``sqrt(|cov| / |cov + sigma_l I|)``, the peak scaling
    that would keep the splat's integrated mass unchanged.  Whether blending
    applies it is a render setting.
    """
    if sigma_l < 0:
        raise ValueError("sigma_l must be non-negative")
    return _dilate(splat, float(sigma_l))


def scale_adaptive(splat: Splat2D, sigma_l: float, ratio: ScaleRatio | float) -> Splat2D:
    r = ratio.r if isinstance(ratio, ScaleRatio) else float(ratio)
    if sigma_l < 0:
        raise ValueError("sigma_l must be non-negative")
    return _dilate(splat, float(sigma_l) * r * r)


def dilate_batch(batch: SplatBatch, amount) -> SplatBatch:
    """Vectorized filter: ``amount`` is a scalar or per-splat array of added variance."""
    amount = np.broadcast_to(np.asarray(amount, dtype=np.float64), (len(batch),))
    cov = batch.cov.copy()
    cov[:, 0, 0] += amount
    cov[:, 1, 1] += amount
    det0 = np.maximum(batch.cov[:, 0, 0] * batch.cov[:, 1, 1] - batch.cov[:, 0, 1] ** 2, 0.0)
    det1 = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = np.where(det1 > 0, np.sqrt(det0 / det1), 1.0)
    return SplatBatch(batch.index, batch.mean, cov, batch.depth, batch.opacity, batch.color,
                      batch.comp * np.minimum(comp, 1.0))


def select_reference_camera(render_cam: CameraModel, train: TrainingCameraSet) -> int:
    """Training camera whose optical axis best matches the render camera's.

    Ties on the axis cosine go to the nearest camera center, then the lowest index.
    """
    fwd = render_cam.forward
    center = render_cam.center
    best, best_key = 0, None
    for i, cam in enumerate(train.cameras):
        cos = float(np.dot(fwd, cam.forward))
        dist = float(np.linalg.norm(cam.center - center))
        if best_key is None:
            best, best_key = i, (cos, dist)
            continue
        bcos, bdist = best_key
        if cos > bcos + _TIE_EPS or (abs(cos - bcos) <= _TIE_EPS and dist < bdist - _TIE_EPS):
            best, best_key = i, (cos, dist)
    return best


def resolution_ratio(render_cam: CameraModel, train: TrainingCameraSet) -> float:
    aspect_r = render_cam.width / render_cam.height
    aspect_t = train.train_width / train.train_height
    if abs(aspect_r / aspect_t - 1.0) <= 1e-2:
        return render_cam.width / train.train_width
    return float(np.sqrt(render_cam.width * render_cam.height / (train.train_width * train.train_height)))


def _normalized_focal(cam: CameraModel) -> float:
    return cam.fx / cam.width


def compute_scale_ratio(render_cam: CameraModel, train: TrainingCameraSet,
                        gaussian_depth_render: float, gaussian_depth_train: float,
                        reference_index: int | None = None) -> ScaleRatio:
    """``r = delta_Rp / delta_Dc`` for a primitive at the given camera-space depths.

    ``delta_Rp`` is render over training resolution.  ``delta_Dc`` compares
    depth over normalized focal length between the render camera and the
    reference training camera; dividing the two gives the change in pixels
    per world unit at the primitive.
    """
    if not (gaussian_depth_render > 0 and gaussian_depth_train > 0):
        raise DegenerateDepthError("Gaussian depth must be positive in both cameras")
    idx = select_reference_camera(render_cam, train) if reference_index is None else reference_index
    ref = train.cameras[idx]
    delta_rp = resolution_ratio(render_cam, train)
    delta_dc = (gaussian_depth_render / _normalized_focal(render_cam)) / (
        gaussian_depth_train / _normalized_focal(ref))
    return ScaleRatio(delta_rp / delta_dc, delta_rp, delta_dc, idx)


def scale_ratios(render_cam: CameraModel, train: TrainingCameraSet, world_means,
                 depth_render) -> tuple[np.ndarray, int]:
    """Per-primitive ``r`` for a batch; returns ``(r, reference_index)``.

    Primitives at or behind the reference camera's image plane have no
    meaningful training footprint; they fall back to ``delta_Dc = 1``.
    """
    idx = select_reference_camera(render_cam, train)
    ref = train.cameras[idx]
    z_train = ref.world_to_camera(world_means)[:, 2]
    z_render = np.asarray(depth_render, dtype=np.float64)
    delta_rp = resolution_ratio(render_cam, train)
    ok = (z_train > 0) & (z_render > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta_dc = np.where(ok, (z_render / _normalized_focal(render_cam))
                            / (z_train / _normalized_focal(ref)), 1.0)
    return delta_rp / delta_dc, idx
