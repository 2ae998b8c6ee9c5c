"""World-to-pixel projection of Gaussians (EWA local affine approximation)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import NEAR_PLANE, ActivatedGaussian, CameraModel, GaussianCloud, covariance3d
from .errors import DegenerateError

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
         -0.4570457994644658, 1.445305721320277, -0.5900435899266435)

# tangent-plane clamp, as a multiple of the frustum half-tangent
FRUSTUM_CLAMP = 1.3


def eigen2x2(cov, strict: bool = False):
    """Closed-form eigen-decomposition of symmetric 2x2 matrices.

    Works on ``(..., 2, 2)``. Returns ``(lam_long, lam_short, v_long, v_short, theta)``
    where ``theta`` is the angle of ``v_long`` to the x-axis reduced to
    ``[0, pi/2)``.  An isotropic input yields ``v_long = (1, 0)``, ``theta = 0``.

    With ``strict=True`` a non-positive ``lam_short`` raises ``DegenerateError``.
    """
    cov = np.asarray(cov, dtype=np.float64)
    a, b, c = cov[..., 0, 0], 0.5 * (cov[..., 0, 1] + cov[..., 1, 0]), cov[..., 1, 1]
    mid = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    lam_long = mid + rad
    det = a * c - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_short = np.where(lam_long > 0, det / np.where(lam_long > 0, lam_long, 1.0), mid - rad)
    lam_short = np.minimum(lam_short, lam_long)
    if strict and np.any(~(lam_short > 0)):
        raise DegenerateError("covariance is not positive definite; filter before decomposing")
    phi = 0.5 * np.arctan2(2.0 * b, a - c)
    cos, sin = np.cos(phi), np.sin(phi)
    v_long = np.stack([cos, sin], axis=-1)
    v_short = np.stack([-sin, cos], axis=-1)
    theta = np.mod(phi, 0.5 * np.pi)
    theta = np.where(theta >= 0.5 * np.pi, 0.0, theta)
    if np.ndim(theta) == 0:
        return float(lam_long), float(lam_short), v_long, v_short, float(theta)
    return lam_long, lam_short, v_long, v_short, theta


def sh_basis(dirs, degree: int):
    """Real SH basis in the 3DGS ordering/sign convention, shape ``(..., (degree+1)**2)``."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    out = [np.full(x.shape, SH_C0)]
    if degree > 0:
        out += [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree > 1:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out += [SH_C2[0] * xy, SH_C2[1] * yz, SH_C2[2] * (2 * zz - xx - yy),
                SH_C2[3] * xz, SH_C2[4] * (xx - yy)]
    if degree > 2:
        out += [SH_C3[0] * y * (3 * xx - yy), SH_C3[1] * xy * z,
                SH_C3[2] * y * (4 * zz - xx - yy), SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
                SH_C3[4] * x * (4 * zz - xx - yy), SH_C3[5] * z * (xx - yy),
                SH_C3[6] * x * (xx - 3 * yy)]
    return np.stack(out, axis=-1)


def eval_sh(sh, view_dir, degree: int):
    """RGB from SH coefficients ``(..., K, 3)`` seen along ``view_dir``; +0.5 offset, clamped."""
    sh = np.asarray(sh, dtype=np.float64)
    k = (degree + 1) ** 2
    basis = sh_basis(view_dir, degree)
    rgb = np.einsum("...k,...kc->...c", basis, sh[..., :k, :]) + 0.5
    return np.clip(rgb, 0.0, 1.0)


@dataclass(frozen=True)
class Splat2D:
    mean_px: np.ndarray
    cov_px: np.ndarray
    depth: float
    eigvals: tuple[float, float]
    eigvecs: tuple[np.ndarray, np.ndarray]
    theta: float
    opacity: float
    color: np.ndarray
    comp_factor: float = 1.0

    @classmethod
    def build(cls, mean_px, cov_px, depth, opacity, color, comp_factor=1.0) -> "Splat2D":
        cov = np.asarray(cov_px, dtype=np.float64)
        lam_l, lam_s, v_l, v_s, theta = eigen2x2(cov)
        return cls(np.asarray(mean_px, dtype=np.float64), cov, float(depth), (lam_l, lam_s),
                   (v_l, v_s), theta, float(opacity), np.asarray(color, dtype=np.float64),
                   float(comp_factor))

    @property
    def sigmas(self) -> tuple[float, float]:
        return float(np.sqrt(self.eigvals[0])), float(np.sqrt(self.eigvals[1]))

    def with_covariance(self, cov_px, eigvals, comp_factor) -> "Splat2D":
        return replace(self, cov_px=np.asarray(cov_px, dtype=np.float64),
                       eigvals=(float(eigvals[0]), float(eigvals[1])),
                       comp_factor=float(comp_factor))


def cutoff_radius(splat: Splat2D, k: float = 3.0) -> float:
    return k * float(np.sqrt(splat.eigvals[0]))


def _tangent_limits(cam: CameraModel) -> tuple[float, float]:
    half_x = max(cam.cx, cam.width - cam.cx) / cam.fx
    half_y = max(cam.cy, cam.height - cam.cy) / cam.fy
    return FRUSTUM_CLAMP * half_x, FRUSTUM_CLAMP * half_y


def project_points(means, cov3d, cam: CameraModel):
    """Project world means/covariances; returns ``(mean_px, cov_px, depth)`` without culling."""
    p = cam.world_to_camera(np.asarray(means, dtype=np.float64).reshape(-1, 3))
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    safe_z = np.where(np.abs(z) > 1e-12, z, 1e-12)
    mean_px = np.stack([cam.fx * x / safe_z + cam.cx, cam.fy * y / safe_z + cam.cy], axis=-1)

    limx, limy = _tangent_limits(cam)
    tx = np.clip(x / safe_z, -limx, limx) * safe_z
    ty = np.clip(y / safe_z, -limy, limy) * safe_z
    J = np.zeros((len(z), 2, 3))
    J[:, 0, 0] = cam.fx / safe_z
    J[:, 0, 2] = -cam.fx * tx / safe_z**2
    J[:, 1, 1] = cam.fy / safe_z
    J[:, 1, 2] = -cam.fy * ty / safe_z**2
    T = J @ cam.rotation_w2c
    cov = T @ np.asarray(cov3d, dtype=np.float64).reshape(-1, 3, 3) @ np.swapaxes(T, 1, 2)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    return mean_px, cov, z


def project(g: ActivatedGaussian, cam: CameraModel, cutoff_sigmas: float = 3.0) -> Splat2D | None:
    """Project one activated Gaussian; ``None`` when culled."""
    cov3 = covariance3d(g.scales, g.rotation)
    mean_px, cov, z = project_points(g.mean[None], cov3[None], cam)
    depth = float(z[0])
    if depth <= NEAR_PLANE:
        return None
    view = g.mean - cam.center
    color = eval_sh(g.sh, view / np.linalg.norm(view), g.sh_degree)
    splat = Splat2D.build(mean_px[0], cov[0], depth, g.opacity, color)
    r = cutoff_sigmas * np.sqrt(max(splat.eigvals[0], 0.0))
    mx, my = splat.mean_px
    if mx < -r or mx > cam.width + r or my < -r or my > cam.height + r:
        return None
    return splat


@dataclass
class SplatBatch:
    """Vectorized counterpart of a list of ``Splat2D`` (one row per splat).

    ``index`` maps rows back to the source cloud; rows are kept in cloud order.
    """

    index: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    color: np.ndarray
    comp: np.ndarray

    def __len__(self) -> int:
        return len(self.index)

    def subset(self, mask) -> "SplatBatch":
        return SplatBatch(self.index[mask], self.mean[mask], self.cov[mask], self.depth[mask],
                          self.opacity[mask], self.color[mask], self.comp[mask])

    def eigen(self):
        return eigen2x2(self.cov)

    def radii(self, k: float) -> np.ndarray:
        lam_long = eigen2x2(self.cov)[0]
        return k * np.sqrt(np.maximum(lam_long, 0.0))

    def splat(self, i: int) -> Splat2D:
        return Splat2D.build(self.mean[i], self.cov[i], self.depth[i], self.opacity[i],
                             self.color[i], self.comp[i])

    @classmethod
    def from_splats(cls, splats) -> "SplatBatch":
        splats = list(splats)
        n = len(splats)
        if n == 0:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros((0, 2, 2)),
                       np.zeros(0), np.zeros(0), np.zeros((0, 3)), np.zeros(0))
        return cls(np.arange(n), np.stack([s.mean_px for s in splats]),
                   np.stack([s.cov_px for s in splats]), np.array([s.depth for s in splats]),
                   np.array([s.opacity for s in splats]), np.stack([s.color for s in splats]),
                   np.array([s.comp_factor for s in splats]))


def project_cloud(cloud: GaussianCloud, cam: CameraModel) -> SplatBatch:
    """Project every primitive; drops those at or behind the near plane."""
    means, scales, rots, opac = cloud.activated_arrays()
    cov3 = covariance3d(scales, rots)
    mean_px, cov, z = project_points(means, cov3, cam)
    keep = z > NEAR_PLANE
    idx = np.nonzero(keep)[0]
    view = means[idx] - cam.center
    norms = np.linalg.norm(view, axis=1, keepdims=True)
    color = eval_sh(cloud.sh[idx], view / np.where(norms > 0, norms, 1.0), cloud.sh_degree)
    return SplatBatch(idx, mean_px[idx], cov[idx], z[idx], opac[idx], color, np.ones(len(idx)))
