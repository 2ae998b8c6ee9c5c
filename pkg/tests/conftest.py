import numpy as np
import pytest
from hypothesis import settings

from scalesplat.core import CameraModel, GaussianCloud, TrainingCameraSet, logit
from scalesplat.projection import SH_C0, Splat2D

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def make_splat(mean=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)), depth=1.0, opacity=0.8,
               color=(1.0, 0.5, 0.25), comp=1.0) -> Splat2D:
    return Splat2D.build(np.asarray(mean, float), np.asarray(cov, float), depth, opacity, color, comp)


def rot2(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def cloud_from(means, sigmas, colors, opacities=0.8) -> GaussianCloud:
    means = np.atleast_2d(np.asarray(means, float))
    n = len(means)
    sig = np.broadcast_to(np.asarray(sigmas, float), (n,))
    rot = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    dc = (np.broadcast_to(np.asarray(colors, float), (n, 3)) - 0.5) / SH_C0
    return GaussianCloud(means, np.repeat(np.log(sig)[:, None], 3, axis=1), rot,
                         logit(np.broadcast_to(np.asarray(opacities, float), (n,))), dc[:, None, :])


@pytest.fixture
def front_camera():
    return CameraModel.look_at((0.0, 0.0, -4.0), (0.0, 0.0, 0.0), 64, 64, 64.0)


@pytest.fixture
def train_set(front_camera):
    return TrainingCameraSet((front_camera,), 64, 64)
