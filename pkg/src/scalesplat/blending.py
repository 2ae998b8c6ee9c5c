"""Per-pixel opacity evaluation and front-to-back compositing.

Three ways to get a splat's opacity at a pixel:

* point: evaluate the Gaussian at the pixel center;
* super-sample: evaluate at the ``S x S`` sub-pixel centers, each sub-pixel
  keeping its own transmittance, then average the composited colors;
* integrate: average the Gaussian over the pixel square.  The square is
  rotated into the splat's eigen-frame (after shrinking by
  ``1 / (sin t + cos t)`` so the rotated box keeps unit area), where the
  integral factorizes into two 1-D normal CDF differences.

The integrated value is the mean of the unit-peak Gaussian over the pixel,
which is exactly the large-``S`` limit of super-sampling for axis-aligned splats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import BlendMode, RenderSettings
from .errors import SingularCovarianceError, UnsortedInputError
from .projection import Splat2D, SplatBatch, eigen2x2

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PixelRegion:
    center: np.ndarray
    side: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if not self.side > 0:
            raise ValueError("pixel side must be positive")

    @classmethod
    def at(cls, col: int, row: int) -> "PixelRegion":
        return cls(np.array([col + 0.5, row + 0.5]))


def gaussian_cdf(t):
    """Standard normal CDF."""
    out = ndtr(t)
    return float(out) if np.ndim(out) == 0 else out


def cdf_interval(lo, hi):
    """``Phi(hi) - Phi(lo)`` without cancellation in the upper tail."""
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def _conic(cov):
    det = cov[..., 0, 0] * cov[..., 1, 1] - cov[..., 0, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return det, cov[..., 1, 1] / det, -cov[..., 0, 1] / det, cov[..., 0, 0] / det


def _peak(splat: Splat2D, compensate: bool) -> float:
    return splat.opacity * (splat.comp_factor if compensate else 1.0)


def alpha_point(splat: Splat2D, x, alpha_max: float = 0.99, compensate: bool = False) -> float:
    """Opacity of ``splat`` at the point ``x`` (pixel coordinates)."""
    det, ca, cb, cc = _conic(splat.cov_px)
    if not det > 0:
        raise SingularCovarianceError("splat covariance is not invertible")
    dx, dy = np.asarray(x, dtype=np.float64) - splat.mean_px
    power = -0.5 * (ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy)
    return float(min(alpha_max, _peak(splat, compensate) * np.exp(power)))


def pixel_box_bounds(offset, side, v_long, v_short, theta):
    """Bounds of a shrunken, eigen-aligned box from the four scaled pixel corners.

    ``offset`` is the pixel center relative to the splat mean.  Corners are
    scaled about the center by ``1 / (sin theta + cos theta)`` and projected on
    ``v_long`` / ``v_short``.  Returns ``(x_min, x_max, y_min, y_max)``.
    """
    offset = np.asarray(offset, dtype=np.float64)
    half = 0.5 * side / (np.sin(theta) + np.cos(theta))
    corners = offset + half * np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
    px = corners @ np.asarray(v_long, dtype=np.float64)
    py = corners @ np.asarray(v_short, dtype=np.float64)
    return px.min(), px.max(), py.min(), py.max()


def rotated_pixel_bounds(pixel: PixelRegion, splat: Splat2D):
    v_long, v_short = splat.eigvecs
    return pixel_box_bounds(pixel.center - splat.mean_px, pixel.side, v_long, v_short, splat.theta)


def box_mean(bounds, sigma_long, sigma_short, side):
    """Mean of the unit-peak Gaussian ``exp(-x^2/2sl^2 - y^2/2ss^2)`` over an axis box."""
    x0, x1, y0, y1 = bounds
    mass = TWO_PI * sigma_long * sigma_short
    return (mass * cdf_interval(np.divide(x0, sigma_long), np.divide(x1, sigma_long))
            * cdf_interval(np.divide(y0, sigma_short), np.divide(y1, sigma_short)) / (side * side))


def alpha_integrated(splat: Splat2D, pixel: PixelRegion, alpha_max: float = 0.99,
                     compensate: bool = False) -> float:
    lam_l, lam_s = splat.eigvals
    if not (lam_l > 0 and lam_s > 0):
        raise SingularCovarianceError("splat covariance is not positive definite")
    m = box_mean(rotated_pixel_bounds(pixel, splat), np.sqrt(lam_l), np.sqrt(lam_s), pixel.side)
    return float(min(alpha_max, _peak(splat, compensate) * m))


def subpixel_offsets(S: int) -> np.ndarray:
    """Offsets of the ``S x S`` sub-pixel centers from the pixel center, row-major."""
    o = (np.arange(S) + 0.5) / S - 0.5
    gx, gy = np.meshgrid(o, o)
    return np.stack([gx.ravel(), gy.ravel()], axis=-1)


# ---------------------------------------------------------------------------
# vectorized path, shared by the tile rasterizer and blend_tile_pixel


def _point_alphas(batch: SplatBatch, samples, radii, settings: RenderSettings):
    det, ca, cb, cc = _conic(batch.cov)
    dx = samples[None, :, 0] - batch.mean[:, None, 0]
    dy = samples[None, :, 1] - batch.mean[:, None, 1]
    power = -0.5 * (ca[:, None] * dx * dx + 2.0 * cb[:, None] * dx * dy + cc[:, None] * dy * dy)
    peak = batch.opacity * (batch.comp if settings.compensate else 1.0)
    alpha = np.minimum(settings.alpha_max, peak[:, None] * np.exp(power))
    inside = dx * dx + dy * dy <= (radii * radii)[:, None]
    return np.where(inside & (power <= 0.0), alpha, 0.0)


def _integrated_alphas(batch: SplatBatch, centers, radii, settings: RenderSettings, side=1.0):
    lam_l, lam_s, v_long, v_short, _ = eigen2x2(batch.cov)
    sl, ss = np.sqrt(lam_l), np.sqrt(lam_s)
    d = centers[None, :, :] - batch.mean[:, None, :]
    du = np.einsum("npk,nk->np", d, v_long)
    dv = np.einsum("npk,nk->np", d, v_short)
    # the scaled corners always project to half-extent side/2 on both eigen-axes
    h = 0.5 * side
    m = box_mean((du - h, du + h, dv - h, dv + h), sl[:, None], ss[:, None], side)
    peak = batch.opacity * (batch.comp if settings.compensate else 1.0)
    alpha = np.minimum(settings.alpha_max, peak[:, None] * m)
    # keep pixels whose square meets the cutoff disc
    qx = np.maximum(np.abs(d[..., 0]) - h, 0.0)
    qy = np.maximum(np.abs(d[..., 1]) - h, 0.0)
    inside = qx * qx + qy * qy <= (radii * radii)[:, None]
    return np.where(inside, alpha, 0.0)


def composite(alpha, colors, background, settings: RenderSettings):
    """Front-to-back compositing of ``alpha (n_splats, n_samples)``; returns ``(rgb, T)``.

    A sample stops before the splat that would drive its transmittance below
    ``t_min``; contributions below ``alpha_min`` are skipped.
    """
    alpha = np.where(alpha < settings.alpha_min, 0.0, alpha)
    n, m = alpha.shape
    bg = np.asarray(background, dtype=np.float64)
    if n == 0:
        return np.broadcast_to(bg, (m, 3)).copy(), np.ones(m)
    t_after = np.cumprod(1.0 - alpha, axis=0)
    included = t_after >= settings.t_min
    t_before = np.empty_like(t_after)
    t_before[0] = 1.0
    t_before[1:] = t_after[:-1]
    weight = np.where(included, alpha * t_before, 0.0)
    # sequential sum: zero-weight splats leave the result bit-identical
    rgb = np.cumsum(weight[:, :, None] * colors[:, None, :], axis=0)[-1]
    t_final = np.where(included, t_after, 1.0).min(axis=0)
    return rgb + t_final[:, None] * bg, t_final


def shade_pixels(batch: SplatBatch, centers, radii, settings: RenderSettings):
    """RGB for pixels at ``centers (P, 2)`` given depth-sorted splats."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    bg = settings.background
    if settings.blend_mode is BlendMode.INTEGRATE:
        alpha = _integrated_alphas(batch, centers, radii, settings)
        return composite(alpha, batch.color, bg, settings)[0]
    S = 1 if settings.blend_mode is BlendMode.POINT else settings.ss_grid
    offs = subpixel_offsets(S)
    samples = (centers[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    alpha = _point_alphas(batch, samples, radii, settings)
    rgb = composite(alpha, batch.color, bg, settings)[0]
    return rgb.reshape(len(centers), S * S, 3).mean(axis=1)


def blend_tile_pixel(splats, pixel: PixelRegion, settings: RenderSettings,
                     check_order: bool = True) -> np.ndarray:
    """Composite a depth-ordered list of ``Splat2D`` over one pixel."""
    splats = list(splats)
    if check_order and any(a.depth > b.depth for a, b in zip(splats, splats[1:])):
        raise UnsortedInputError("splats must be sorted by ascending depth")
    batch = SplatBatch.from_splats(splats)
    radii = batch.radii(settings.cutoff_sigmas) if len(batch) else np.zeros(0)
    if pixel.side != 1.0:
        raise ValueError("blend_tile_pixel expects unit pixels")
    return shade_pixels(batch, pixel.center[None], radii, settings)[0]
