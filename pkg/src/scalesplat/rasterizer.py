"""Tile-based CPU rasterizer.

Pipeline: activate -> project -> filter -> SH color -> bin into tiles ->
per-tile depth sort -> per-pixel blending.  Tiles are independent and write
disjoint image regions, so worker count never changes the output.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .blending import shade_pixels
from .core import CameraModel, FilterMode, GaussianCloud, ImageBuffer, RenderSettings, TrainingCameraSet
from .errors import EmptyCloudError, MissingTrainingCamerasError
from .filters import dilate_batch, scale_ratios
from .projection import SplatBatch, project_cloud


@dataclass(frozen=True)
class TileBin:
    tile_x: int
    tile_y: int
    indices: np.ndarray  # rows of the splat batch, ascending depth


@dataclass(frozen=True)
class RenderStats:
    splats: int
    culled: int
    seconds: float
    reference_camera: int | None = None


def bin_and_sort(splats, width: int, height: int, tile_size: int = 16,
                 cutoff_sigmas: float = 3.0) -> list[TileBin]:
    """Assign each splat to every tile its cutoff disc touches.

    ``splats`` is a ``SplatBatch`` or a sequence of ``Splat2D``.  Within a
    tile, entries are ordered by depth with ties broken by row index.
    """
    batch = splats if isinstance(splats, SplatBatch) else SplatBatch.from_splats(splats)
    if len(batch) == 0:
        return []
    radii = batch.radii(cutoff_sigmas)
    order = np.lexsort((np.arange(len(batch)), batch.depth))
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i in order:
        mx, my = batch.mean[i]
        r = radii[i]
        tx0 = max(int(np.floor((mx - r) / tile_size)), 0)
        tx1 = min(int(np.floor((mx + r) / tile_size)), tiles_x - 1)
        ty0 = max(int(np.floor((my - r) / tile_size)), 0)
        ty1 = min(int(np.floor((my + r) / tile_size)), tiles_y - 1)
        for ty in range(ty0, ty1 + 1):
            y0, y1 = ty * tile_size, min((ty + 1) * tile_size, height)
            qy = max(y0 - my, 0.0, my - y1)
            for tx in range(tx0, tx1 + 1):
                x0, x1 = tx * tile_size, min((tx + 1) * tile_size, width)
                qx = max(x0 - mx, 0.0, mx - x1)
                if qx * qx + qy * qy <= r * r:
                    buckets.setdefault((tx, ty), []).append(int(i))
    return [TileBin(tx, ty, np.array(idx, dtype=np.int64)) for (tx, ty), idx in sorted(
        buckets.items(), key=lambda kv: (kv[0][1], kv[0][0]))]


def prepare_splats(cloud: GaussianCloud, cam: CameraModel, train: TrainingCameraSet | None,
                   settings: RenderSettings) -> tuple[SplatBatch, int | None]:
    """Project and filter the cloud; drops splats that end up off-screen or degenerate."""
    if len(cloud) == 0:
        raise EmptyCloudError("cloud has no primitives")
    if settings.filter_mode is FilterMode.SCALE_ADAPTIVE and train is None:
        raise MissingTrainingCamerasError("scale-adaptive filtering needs the training cameras")
    batch = project_cloud(cloud, cam)
    ref = None
    if settings.filter_mode is FilterMode.FIXED_DILATION:
        batch = dilate_batch(batch, settings.sigma_l)
    elif settings.filter_mode is FilterMode.SCALE_ADAPTIVE and len(batch):
        r, ref = scale_ratios(cam, train, cloud.means[batch.index], batch.depth)
        batch = dilate_batch(batch, settings.sigma_l * r * r)
    if len(batch) == 0:
        return batch, ref
    c = batch.cov
    det = c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] ** 2
    ok = (det > 0) & (c[:, 0, 0] > 0) & np.all(np.isfinite(c.reshape(-1, 4)), axis=1)
    ok &= np.all(np.isfinite(batch.mean), axis=1)
    batch = batch.subset(ok)
    r = batch.radii(settings.cutoff_sigmas)
    mx, my = batch.mean[:, 0], batch.mean[:, 1]
    onscreen = (mx >= -r) & (mx <= cam.width + r) & (my >= -r) & (my <= cam.height + r)
    return batch.subset(onscreen), ref


def rasterize(batch: SplatBatch, width: int, height: int, settings: RenderSettings,
              workers: int = 1, region: tuple[int, int, int, int] | None = None) -> np.ndarray:
    """Blend a prepared splat batch into an ``(h, w, 3)`` array.

    ``region = (x0, y0, x1, y1)`` renders only that sub-rectangle, with tiles
    anchored at its own origin.
    """
    x0, y0, x1, y1 = region if region is not None else (0, 0, width, height)
    w, h = x1 - x0, y1 - y0
    out = np.empty((h, w, 3))
    out[:] = np.asarray(settings.background, dtype=np.float64)
    if len(batch) == 0:
        return out
    radii = batch.radii(settings.cutoff_sigmas)
    # binning only has to be complete; the widened disc absorbs the shift's rounding
    shifted = SplatBatch(batch.index, batch.mean - np.array([x0, y0], dtype=np.float64),
                         batch.cov, batch.depth, batch.opacity, batch.color, batch.comp)
    bins = bin_and_sort(shifted, w, h, settings.tile_size, settings.cutoff_sigmas * (1 + 1e-9) + 1e-9)
    ts = settings.tile_size

    def work(tb: TileBin):
        px0, py0 = tb.tile_x * ts, tb.tile_y * ts
        px1, py1 = min(px0 + ts, w), min(py0 + ts, h)
        gx, gy = np.meshgrid(np.arange(x0 + px0, x0 + px1) + 0.5, np.arange(y0 + py0, y0 + py1) + 0.5)
        centers = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        sub = batch.subset(tb.indices)
        rgb = shade_pixels(sub, centers, radii[tb.indices], settings)
        out[py0:py1, px0:px1] = rgb.reshape(py1 - py0, px1 - px0, 3)

    if workers <= 1:
        for tb in bins:
            work(tb)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, bins))
    return out


def render_frame(cloud: GaussianCloud, render_cam: CameraModel, train: TrainingCameraSet | None,
                 settings: RenderSettings, workers: int = 1,
                 region: tuple[int, int, int, int] | None = None) -> tuple[ImageBuffer, RenderStats]:
    t0 = time.perf_counter()
    batch, ref = prepare_splats(cloud, render_cam, train, settings)
    pixels = rasterize(batch, render_cam.width, render_cam.height, settings, workers, region)
    stats = RenderStats(len(batch), len(cloud) - len(batch), time.perf_counter() - t0, ref)
    return ImageBuffer(pixels).finalized(), stats


def render(cloud: GaussianCloud, render_cam: CameraModel, train: TrainingCameraSet | None,
           settings: RenderSettings, workers: int = 1,
           region: tuple[int, int, int, int] | None = None) -> ImageBuffer:
    return render_frame(cloud, render_cam, train, settings, workers, region)[0]
