"""Procedural scenes with known structure.

Every scene lies near the ``z = 0`` plane and is watched by a frontal
camera (index 0) on the ``-z`` axis plus a ring of oblique cameras at the
same distance, all at the training resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CameraModel, GaussianCloud, TrainingCameraSet, logit
from .projection import SH_C0

CHECKER_COLORS = ((0.9, 0.85, 0.2), (0.15, 0.3, 0.85))


@dataclass(frozen=True)
class CheckerWall:
    rows: int = 64
    cols: int = 64
    gaussian_sigma_world: float = 0.02  # about 1.3 px at the default training camera
    spacing: float = 0.0625             # 4 px at the default training camera
    opacity: float = 0.8

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.gaussian_sigma_world <= 0 or self.spacing <= 0 or not 0 < self.opacity < 1:
            raise ValueError("invalid checker wall parameters")


@dataclass(frozen=True)
class SingleSplat:
    sigma_world: float = 0.03
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    opacity: float = 0.8

    def __post_init__(self):
        if self.sigma_world <= 0 or not 0 < self.opacity < 1:
            raise ValueError("invalid single splat parameters")
        if any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ValueError("color must lie in [0, 1]")


@dataclass(frozen=True)
class StarBurst:
    n_arms: int = 12
    falloff: float = 0.85
    per_arm: int = 24
    opacity: float = 0.9

    def __post_init__(self):
        if self.n_arms < 1 or self.per_arm < 1 or not 0 < self.falloff <= 1:
            raise ValueError("invalid star burst parameters")


RECIPES = {"checker": CheckerWall, "single": SingleSplat, "star": StarBurst}


@dataclass(frozen=True)
class SceneRecipe:
    recipe: CheckerWall | SingleSplat | StarBurst = field(default_factory=CheckerWall)
    seed: int = 0
    extent: float = 2.0
    train_resolution: int = 256
    train_focal: float = 256.0
    train_distance: float = 4.0
    n_cameras: int = 8
    ring_angle_deg: float = 25.0

    def __post_init__(self):
        if self.extent <= 0 or self.train_distance <= 0 or self.train_focal <= 0:
            raise ValueError("extent, distance and focal must be positive")
        if self.n_cameras < 1 or self.train_resolution < 1:
            raise ValueError("need at least one camera and a positive resolution")

    @classmethod
    def named(cls, name: str, **kwargs) -> "SceneRecipe":
        if name not in RECIPES:
            raise ValueError(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}")
        return cls(recipe=RECIPES[name](), **kwargs)


def _dc(colors) -> np.ndarray:
    """Degree-0 SH coefficients that evaluate to ``colors``."""
    return (np.asarray(colors, dtype=np.float64) - 0.5) / SH_C0


def _isotropic(means, sigmas, opacities, colors) -> GaussianCloud:
    means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
    n = len(means)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (n,))
    rot = np.zeros((n, 4))
    rot[:, 0] = 1.0
    return GaussianCloud(
        means=means,
        log_scales=np.repeat(np.log(sigmas)[:, None], 3, axis=1),
        rotations=rot,
        opacity_logits=logit(np.broadcast_to(np.asarray(opacities, dtype=np.float64), (n,))),
        sh=_dc(np.broadcast_to(colors, (n, 3)))[:, None, :],
    )


def _checker(p: CheckerWall) -> GaussianCloud:
    ii, jj = np.meshgrid(np.arange(p.rows), np.arange(p.cols), indexing="ij")
    x = (jj.ravel() - (p.cols - 1) / 2.0) * p.spacing
    y = (ii.ravel() - (p.rows - 1) / 2.0) * p.spacing
    means = np.stack([x, y, np.zeros_like(x)], axis=1)
    parity = (ii.ravel() + jj.ravel()) % 2
    colors = np.asarray(CHECKER_COLORS)[parity]
    return _isotropic(means, p.gaussian_sigma_world, p.opacity, colors)


def _single(p: SingleSplat) -> GaussianCloud:
    return _isotropic(np.zeros(3), p.sigma_world, p.opacity, p.color)


def _star(p: StarBurst, rng: np.random.Generator, extent: float) -> GaussianCloud:
    means, sigmas, colors = [], [], []
    base = rng.uniform(0.0, 2 * np.pi)
    for a in range(p.n_arms):
        ang = base + 2 * np.pi * a / p.n_arms + rng.normal(0.0, 0.02)
        hue = rng.uniform(0.2, 1.0, size=3)
        radius = 0.05 * extent
        size = 0.02 * extent
        for _ in range(p.per_arm):
            means.append((radius * np.cos(ang), radius * np.sin(ang), rng.normal(0.0, 0.01 * extent)))
            sigmas.append(size)
            colors.append(hue)
            radius += 1.5 * size
            size *= p.falloff
            if radius > 0.5 * extent:
                break
    return _isotropic(means, sigmas, p.opacity, colors)


def training_cameras(recipe: SceneRecipe) -> TrainingCameraSet:
    """Frontal camera first, then the remaining cameras spread evenly on a cone."""
    res, d = recipe.train_resolution, recipe.train_distance
    cams = [CameraModel.look_at((0.0, 0.0, -d), (0.0, 0.0, 0.0), res, res, recipe.train_focal)]
    tilt = np.deg2rad(recipe.ring_angle_deg)
    ring = recipe.n_cameras - 1
    for k in range(ring):
        phi = 2 * np.pi * k / ring
        eye = d * np.array([np.sin(tilt) * np.cos(phi), np.sin(tilt) * np.sin(phi), -np.cos(tilt)])
        cams.append(CameraModel.look_at(eye, (0.0, 0.0, 0.0), res, res, recipe.train_focal))
    return TrainingCameraSet(tuple(cams), res, res)


def build(recipe: SceneRecipe) -> tuple[GaussianCloud, TrainingCameraSet]:
    rng = np.random.default_rng(recipe.seed)
    p = recipe.recipe
    if isinstance(p, CheckerWall):
        cloud = _checker(p)
    elif isinstance(p, SingleSplat):
        cloud = _single(p)
    elif isinstance(p, StarBurst):
        cloud = _star(p, rng, recipe.extent)
    else:
        raise TypeError(f"unsupported recipe {type(p).__name__}")
    return cloud, training_cameras(recipe)
