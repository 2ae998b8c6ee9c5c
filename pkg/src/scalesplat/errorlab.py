"""Accuracy study of the rotated-pixel integration shortcut.

Frame: the Gaussian sits at the origin with independent axes ``sigma_x`` and
``sigma_y``; the pixel is a square of side ``l`` centered at ``(x_c, y_c)``,
tilted counter-clockwise by ``theta``.  Three quantities are compared:

* ``oracle_integral``: tensor-product Gauss-Legendre quadrature of the
  normalized density over the tilted square (independent of the shortcut);
* ``approx_integral``: the shortcut, which reuses the renderer's corner
  projection and CDF product;
* ``bounds``: the fixed-slice bracket on the exact integral.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

from .blending import cdf_interval, pixel_box_bounds

_FLOAT32_EXP_LIMIT = 80.0


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class TiltedPixel:
    x_c: float
    y_c: float
    side: float = 1.0
    theta: float = 0.0

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order starting at local (+h, +h)."""
        h = 0.5 * self.side
        local = np.array([[h, h], [-h, h], [-h, -h], [h, -h]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        R = np.array([[c, -s], [s, c]])
        return local @ R.T + np.array([self.x_c, self.y_c])


def oracle_integral(pixel: TiltedPixel, sigma_x: float, sigma_y: float, samples: int = 512) -> float:
    """Integral of the normalized bivariate Gaussian over the tilted square.

    Uses a ``samples x samples`` Gauss-Legendre product rule in the square's
    own coordinates.  The exponent is split as ``row(i) + col(j) + cross(i, j)``
    with a rank-2 cross term, so only that term needs a full grid.
    """
    if not (sigma_x > 0 and sigma_y > 0):
        raise ValueError("sigmas must be positive")
    t, w = _gauss_legendre(samples)
    h = 0.5 * pixel.side
    u = t * h
    wu = w * h
    c, s = math.cos(pixel.theta), math.sin(pixel.theta)
    # x/sx = a_i + b_j, y/sy = d_i + e_j for local coords (u_i, u_j)
    a = (pixel.x_c + c * u) / sigma_x
    b = (-s * u) / sigma_x
    d = (pixel.y_c + s * u) / sigma_y
    e = (c * u) / sigma_y
    wi = wu * np.exp(-0.5 * (a * a + d * d))
    wj = wu * np.exp(-0.5 * (b * b + e * e))
    bound = (np.abs(a).max() * np.abs(b).max() + np.abs(d).max() * np.abs(e).max())
    if bound < _FLOAT32_EXP_LIMIT:
        A = np.stack([a, d], axis=1).astype(np.float32)
        B = np.stack([b, e]).astype(np.float32)
        cross = A @ B
        np.exp(-cross, out=cross)
        total = wi @ cross.astype(np.float64) @ wj
    else:
        cross = np.outer(a, b) + np.outer(d, e)
        total = wi @ np.exp(-cross) @ wj
    return float(total / (2.0 * np.pi * sigma_x * sigma_y))


def approx_integral(pixel: TiltedPixel, sigma_x: float, sigma_y: float) -> float:
    """Shortcut value: shrink, project the corners on the Gaussian axes, multiply CDFs."""
    # work in the pixel's frame, where the pixel is axis-aligned and the
    # Gaussian axes are rotated by -theta
    c, s = math.cos(pixel.theta), math.sin(pixel.theta)
    to_pixel = np.array([[c, s], [-s, c]])
    center = to_pixel @ np.array([pixel.x_c, pixel.y_c])
    if sigma_x == sigma_y:
        # isotropic: every frame is an eigen-frame; take the pixel's, as the renderer does
        ax, ay, rel = np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0
    else:
        ax = to_pixel @ np.array([1.0, 0.0])
        ay = to_pixel @ np.array([0.0, 1.0])
        rel = math.fmod(pixel.theta, 0.5 * math.pi)
    x0, x1, y0, y1 = pixel_box_bounds(center, pixel.side, ax, ay, rel)
    return float(cdf_interval(x0 / sigma_x, x1 / sigma_x) * cdf_interval(y0 / sigma_y, y1 / sigma_y))


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float


def _int_cdf(u):
    """Antiderivative of the standard normal CDF: ``u Phi(u) + phi(u)``."""
    return u * ndtr(u) + np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def normalized_parallelogram(pixel: TiltedPixel, sigma_x: float, sigma_y: float):
    """Corners ``P1..P4`` and edge slope after whitening and un-tilting.

    Whitening maps the square to a parallelogram; a rotation then makes one
    pair of edges horizontal.  Returns ``(x1, x2, y1, x3, x4, y3, k)`` with the
    top edge ``P2(x2,y1)-P1(x1,y1)``, the bottom edge ``P3(x3,y3)-P4(x4,y3)`` and
    ``k`` the slope of the side edges (``inf`` when they are vertical).
    """
    pts = pixel.corners() / np.array([sigma_x, sigma_y])
    edge = pts[0] - pts[1]  # image of the local x edge
    phi = math.atan2(edge[1], edge[0])
    c, s = math.cos(phi), math.sin(phi)
    R = np.array([[c, s], [-s, c]])  # clockwise by phi
    q = pts @ R.T
    if q[:, 1].max() < 0:
        q[:, 1] = -q[:, 1]
    order = np.argsort(q[:, 1])
    bottom, top = q[order[:2]], q[order[2:]]
    y1, y3 = float(top[:, 1].mean()), float(bottom[:, 1].mean())
    x2, x1 = sorted(top[:, 0])
    x3, x4 = sorted(bottom[:, 0])
    dx = x1 - x4
    k = math.inf if abs(dx) < 1e-14 * max(1.0, abs(y1 - y3)) else (y1 - y3) / dx
    return x1, x2, y1, x3, x4, y3, k


def _strip_integral(x1, x2, y1, y3, k) -> float:
    """``int_{y3}^{y1} Phi(R(y)) - Phi(L(y)) dy`` with ``L, R = (y - y1)/k + (x2, x1)``."""
    height = y1 - y3
    shift = 0.0 if math.isinf(k) else (y3 - y1) / k  # horizontal run of a side edge
    # keep the slab on the negative-x side, where Phi and its antiderivative are small
    if x1 + x2 + shift > 0:
        x1, x2, shift = -x2, -x1, -shift
    if abs(shift) < 1e-3:
        t, w = _gauss_legendre(32)
        frac = 0.5 * (t + 1.0)
        vals = cdf_interval(x2 + frac * shift, x1 + frac * shift)
        return float(0.5 * height * (w @ vals))
    # d/dy of the argument is 1/k = -shift/height
    scale = -height / shift
    return float(scale * ((_int_cdf(x1) - _int_cdf(x1 + shift)) - (_int_cdf(x2) - _int_cdf(x2 + shift))))


def bounds(pixel: TiltedPixel, sigma_x: float, sigma_y: float) -> BoundPair:
    """Bracket the pixel integral by freezing the vertical density factor.

    For each horizontal slice the exact inner integral ``Phi(R) - Phi(L)`` is
    kept; the slice weight ``phi(y)`` is replaced by its max (upper) or min
    (lower) over ``[y3, y1]``.  The remaining integral of CDF differences has
    a closed form.
    """
    x1, x2, y1, x3, x4, y3, k = normalized_parallelogram(pixel, sigma_x, sigma_y)
    strip = _strip_integral(x1, x2, y1, y3, k)
    strip = max(strip, 0.0)
    near = max(0.0, y3)
    far = max(y1, abs(y3))
    pdf = lambda y: math.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)  # noqa: E731
    return BoundPair(lower=pdf(far) * strip, upper=pdf(near) * strip)


@dataclass(frozen=True)
class ErrorGridSpec:
    l: float = 1.0
    x_c: float = 0.0
    theta_range: tuple[float, float] = (0.0, math.pi / 4)
    y_c_range: tuple[float, float] = (0.05, 0.25)
    sigma_range: tuple[float, float] = (0.15, 3.77)
    theta_count: int = 6
    y_c_count: int = 6
    sigma_count: int = 30
    oracle_samples: int = 512

    @property
    def theta_values(self) -> np.ndarray:
        return np.linspace(*self.theta_range, self.theta_count)

    @property
    def y_c_values(self) -> np.ndarray:
        return np.linspace(*self.y_c_range, self.y_c_count)

    @property
    def sigma_values(self) -> np.ndarray:
        return np.linspace(*self.sigma_range, self.sigma_count)


def sigmoid_view(err, gain: float = 800.0):
    return 1.0 / (1.0 + np.exp(-gain * np.asarray(err, dtype=np.float64)))


@dataclass
class ErrorGridReport:
    """Sweep results; every array is indexed ``[theta, y_c, sigma_x, sigma_y]``."""

    spec: ErrorGridSpec
    oracle: np.ndarray
    approx: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rel_err: np.ndarray = field(init=False)
    sigmoid: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rel_err = np.abs(self.approx - self.oracle) / np.maximum(self.oracle, 1e-12)
        self.sigmoid = sigmoid_view(self.rel_err)

    @property
    def mean_rel_err(self) -> float:
        return float(self.rel_err.mean())

    @property
    def sandwich_holds(self) -> np.ndarray:
        return (self.lower <= self.oracle) & (self.oracle <= self.upper)

    def rows(self):
        sp = self.spec
        for i, th in enumerate(sp.theta_values):
            for j, yc in enumerate(sp.y_c_values):
                for a, sx in enumerate(sp.sigma_values):
                    for b, sy in enumerate(sp.sigma_values):
                        yield (th, yc, sx, sy, self.oracle[i, j, a, b], self.approx[i, j, a, b],
                               self.rel_err[i, j, a, b], self.sigmoid[i, j, a, b])

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["theta", "y_c", "sigma_x", "sigma_y", "oracle", "approx", "rel_err", "sigmoid"])
            for row in self.rows():
                wr.writerow([f"{v:.10g}" for v in row])
        return path

    def write_heatmaps(self, directory) -> list[Path]:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        sp = self.spec
        extent = [sp.sigma_range[0], sp.sigma_range[1], sp.sigma_range[0], sp.sigma_range[1]]
        paths = []
        for i, th in enumerate(sp.theta_values):
            for j, yc in enumerate(sp.y_c_values):
                fig, ax = plt.subplots(figsize=(3.2, 3.0))
                im = ax.imshow(self.sigmoid[i, j].T, origin="lower", extent=extent, vmin=0.5, vmax=1.0,
                               cmap="magma")
                ax.set_xlabel("sigma_x")
                ax.set_ylabel("sigma_y")
                ax.set_title(f"theta={th:.3f} y_c={yc:.3f}", fontsize=8)
                fig.colorbar(im, ax=ax, fraction=0.046)
                fig.tight_layout()
                p = directory / f"heatmap_t{i}_y{j}.png"
                fig.savefig(p, dpi=80)
                plt.close(fig)
                paths.append(p)
        return paths


def run_sweep(spec: ErrorGridSpec = ErrorGridSpec(), with_bounds: bool = True) -> ErrorGridReport:
    shape = (spec.theta_count, spec.y_c_count, spec.sigma_count, spec.sigma_count)
    oracle = np.empty(shape)
    approx = np.empty(shape)
    lower = np.full(shape, np.nan)
    upper = np.full(shape, np.nan)
    sig = spec.sigma_values
    for i, th in enumerate(spec.theta_values):
        for j, yc in enumerate(spec.y_c_values):
            pix = TiltedPixel(spec.x_c, float(yc), spec.l, float(th))
            for a, sx in enumerate(sig):
                for b, sy in enumerate(sig):
                    oracle[i, j, a, b] = oracle_integral(pix, sx, sy, spec.oracle_samples)
                    approx[i, j, a, b] = approx_integral(pix, sx, sy)
                    if with_bounds:
                        bp = bounds(pix, sx, sy)
                        lower[i, j, a, b], upper[i, j, a, b] = bp.lower, bp.upper
    return ErrorGridReport(spec, oracle, approx, lower, upper)
