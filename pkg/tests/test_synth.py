import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scalesplat.core import RenderSettings
from scalesplat.projection import SH_C0
from scalesplat.rasterizer import render
from scalesplat.synth import CHECKER_COLORS, CheckerWall, SceneRecipe, SingleSplat, StarBurst, build


def colors_of(cloud):
    return cloud.sh[:, 0, :] * SH_C0 + 0.5


def test_single_splat():
    cloud, train = build(SceneRecipe(recipe=SingleSplat()))
    assert len(cloud) == 1 and np.allclose(cloud.means, 0.0)
    assert np.allclose(colors_of(cloud), 1.0)


def test_checker_alternates():
    cloud, _ = build(SceneRecipe(recipe=CheckerWall(rows=8, cols=8)))
    assert len(cloud) == 64
    cols = colors_of(cloud).reshape(8, 8, 3)
    for i in range(8):
        for j in range(8):
            assert np.allclose(cols[i, j], CHECKER_COLORS[(i + j) % 2])


def test_cameras_frontal_first():
    _, train = build(SceneRecipe())
    assert len(train) == 8
    assert np.allclose(train.cameras[0].center, (0.0, 0.0, -4.0))
    assert np.allclose(train.cameras[0].forward, (0.0, 0.0, 1.0))
    d = [np.linalg.norm(c.center) for c in train.cameras]
    assert np.allclose(d, 4.0)


@given(st.integers(0, 2 ** 31 - 1))
def test_seed_determinism(seed):
    a, _ = build(SceneRecipe(recipe=StarBurst(), seed=seed))
    b, _ = build(SceneRecipe(recipe=StarBurst(), seed=seed))
    assert np.array_equal(a.means, b.means) and np.array_equal(a.sh, b.sh)


def test_rejects_bad_parameters():
    for make in (lambda: CheckerWall(rows=0), lambda: SingleSplat(opacity=1.0),
                 lambda: StarBurst(falloff=0.0), lambda: SceneRecipe(n_cameras=0)):
        with pytest.raises(ValueError):
            make()
    with pytest.raises(ValueError):
        SceneRecipe.named("nope")


def test_checker_render_in_color_hull():
    # over a black background every pixel is a non-negative blend of the two colors
    # whose weights sum to at most one
    cloud, train = build(SceneRecipe(recipe=CheckerWall(rows=8, cols=8), train_resolution=64,
                                     train_focal=64.0))
    img = render(cloud, train.cameras[0], train, RenderSettings(blend_mode="ss"))
    basis = np.asarray(CHECKER_COLORS).T
    w, *_ = np.linalg.lstsq(basis, img.pixels.reshape(-1, 3).T, rcond=None)
    assert np.abs(basis @ w - img.pixels.reshape(-1, 3).T).max() < 1e-9
    assert w.min() > -1e-9 and w.sum(axis=0).max() < 1 + 1e-9
