import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scalesplat.core import ActivatedGaussian, CameraModel, TrainingCameraSet
from scalesplat.errors import DegenerateDepthError
from scalesplat.filters import (
    ScaleRatio,
    compute_scale_ratio,
    dilate_batch,
    fixed_dilation,
    resolution_ratio,
    scale_adaptive,
    scale_ratios,
    select_reference_camera,
)
from scalesplat.projection import SplatBatch, cutoff_radius, project

from conftest import make_splat, rot2

covs = st.tuples(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(-np.pi, np.pi)).map(
    lambda t: rot2(t[2]) @ np.diag(t[:2]) @ rot2(t[2]).T)


class TestFixedDilation:
    def test_unit_covariance(self):
        out = fixed_dilation(make_splat(cov=np.eye(2)), 0.3)
        assert np.allclose(out.cov_px, 1.3 * np.eye(2))
        assert out.comp_factor == pytest.approx(np.sqrt(1 / 1.69))
        assert out.comp_factor == pytest.approx(0.7692, abs=1e-4)

    def test_zero_is_identity(self):
        sp = make_splat(cov=[[2.0, 0.3], [0.3, 1.0]])
        out = fixed_dilation(sp, 0.0)
        assert np.array_equal(out.cov_px, sp.cov_px) and out.comp_factor == 1.0

    def test_point_like_radius(self):
        out = fixed_dilation(make_splat(cov=1e-14 * np.eye(2)), 0.3)
        assert cutoff_radius(out) == pytest.approx(3 * np.sqrt(0.3), abs=1e-6)
        assert cutoff_radius(out) == pytest.approx(1.6432, abs=1e-4)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            fixed_dilation(make_splat(), -0.1)

    @given(covs, st.floats(0.0, 5.0))
    def test_eigenvalue_shift_and_mass(self, cov, v):
        sp = make_splat(mean=(3.0, 4.0), cov=cov)
        out = fixed_dilation(sp, v)
        assert np.allclose(out.eigvals, np.add(sp.eigvals, v), rtol=1e-9)
        assert np.array_equal(out.mean_px, sp.mean_px)
        assert 0.0 < out.comp_factor <= 1.0
        mass_before = 2 * np.pi * np.sqrt(np.linalg.det(cov))
        mass_after = 2 * np.pi * out.comp_factor * np.sqrt(np.linalg.det(out.cov_px))
        assert mass_after == pytest.approx(mass_before, rel=1e-9)


class TestScaleAdaptive:
    def test_reduces_to_fixed_at_unit_ratio(self):
        sp = make_splat(cov=[[2.0, 0.3], [0.3, 1.0]])
        a, b = scale_adaptive(sp, 0.3, 1.0), fixed_dilation(sp, 0.3)
        assert np.array_equal(a.cov_px, b.cov_px) and a.comp_factor == b.comp_factor

    def test_ratio_two(self):
        out = scale_adaptive(make_splat(cov=np.eye(2)), 0.3, ScaleRatio(2.0, 2.0, 1.0, 0))
        assert np.allclose(out.cov_px, 2.2 * np.eye(2))

    def test_half_ratio_radius(self):
        out = scale_adaptive(make_splat(cov=1e-14 * np.eye(2)), 0.3, 0.5)
        assert cutoff_radius(out) == pytest.approx(3 * np.sqrt(0.3 * 0.25), abs=1e-6)

    @given(covs, st.floats(0.01, 10), st.floats(1.001, 3))
    def test_monotone_in_ratio(self, cov, r, grow):
        sp = make_splat(cov=cov)
        lo, hi = scale_adaptive(sp, 0.3, r), scale_adaptive(sp, 0.3, r * grow)
        assert hi.eigvals[0] > lo.eigvals[0] and hi.eigvals[1] > lo.eigvals[1]

    def test_batch_matches_single(self):
        splats = [make_splat(cov=[[2.0, 0.3], [0.3, 1.0]]), make_splat(cov=np.diag([0.2, 0.05]))]
        batch = dilate_batch(SplatBatch.from_splats(splats), np.array([0.3, 1.2]))
        for i, v in enumerate([0.3, 1.2]):
            one = fixed_dilation(splats[i], v)
            assert np.allclose(batch.cov[i], one.cov_px)
            assert batch.comp[i] == pytest.approx(one.comp_factor)


def cam_at(eye, target=(0, 0, 0), size=64, focal=64.0):
    return CameraModel.look_at(eye, target, size, size, focal)


class TestReferenceCamera:
    def test_single(self):
        c = cam_at((0, 0, -4))
        assert select_reference_camera(cam_at((1, 0, -4)), TrainingCameraSet((c,), 64, 64)) == 0

    def test_axis_direction(self):
        back = CameraModel.look_at((0, 0, 4), (0, 0, 0), 64, 64, 64.0)
        front = cam_at((0, 0, -4))
        train = TrainingCameraSet((back, front), 64, 64)
        assert select_reference_camera(cam_at((0, 0, -2)), train) == 1

    def test_tie_break_by_distance_then_index(self):
        render = cam_at((0, 0, -4), (0, 0, 1))
        far = cam_at((2, 0, -4), (2, 0, 1))
        near = cam_at((1, 0, -4), (1, 0, 1))
        assert select_reference_camera(render, TrainingCameraSet((far, near), 64, 64)) == 1
        assert select_reference_camera(render, TrainingCameraSet((near, near), 64, 64)) == 0


class TestScaleRatio:
    def setup_method(self):
        self.cam = cam_at((0, 0, -4))
        self.train = TrainingCameraSet((self.cam,), 64, 64)

    def test_identity(self):
        r = compute_scale_ratio(self.cam, self.train, 4.0, 4.0)
        assert (r.r, r.delta_Rp, r.delta_Dc, r.reference_camera_index) == (1.0, 1.0, 1.0, 0)

    def test_half_resolution(self):
        r = compute_scale_ratio(self.cam.scaled(0.5), self.train, 4.0, 4.0)
        assert (r.delta_Rp, r.delta_Dc, r.r) == (0.5, 1.0, 0.5)

    def test_half_distance_doubles_footprint(self):
        near = cam_at((0, 0, -2))
        r = compute_scale_ratio(near, self.train, 2.0, 4.0)
        assert r.delta_Dc == pytest.approx(0.5) and r.r == pytest.approx(2.0)
        assert r.r == pytest.approx(r.delta_Rp / r.delta_Dc, rel=1e-12)
        # projected footprint oracle: the 3-sigma radius doubles, as does the added blur radius
        g = ActivatedGaussian(np.zeros(3), np.full(3, 0.05), np.array([1.0, 0, 0, 0]), 0.5, np.zeros((1, 3)))
        s_far, s_near = project(g, self.cam), project(g, near)
        assert cutoff_radius(s_near) / cutoff_radius(s_far) == pytest.approx(2.0, rel=1e-6)
        f_far = scale_adaptive(s_far, 0.3, 1.0)
        f_near = scale_adaptive(s_near, 0.3, r)
        assert cutoff_radius(f_near) / cutoff_radius(f_far) == pytest.approx(2.0, rel=1e-6)

    def test_degenerate_depth(self):
        with pytest.raises(DegenerateDepthError):
            compute_scale_ratio(self.cam, self.train, 0.0, 4.0)
        with pytest.raises(DegenerateDepthError):
            compute_scale_ratio(self.cam, self.train, 4.0, -1.0)

    def test_aspect_mismatch_uses_area(self):
        wide = CameraModel(128, 32, 64.0, 64.0, 64.0, 16.0)
        assert resolution_ratio(wide, self.train) == pytest.approx(1.0)

    def test_batch_ratios(self):
        means = np.array([[0, 0, 0], [0.5, 0.2, 1.0], [0, 0, -4.5]])
        render = cam_at((0, 0, -3)).scaled(2.0)
        depth = render.world_to_camera(means)[:, 2]
        r, idx = scale_ratios(render, self.train, means, depth)
        assert idx == 0
        for i in range(2):
            single = compute_scale_ratio(render, self.train, depth[i], self.cam.world_to_camera(means[i])[2])
            assert r[i] == pytest.approx(single.r)
        # behind the reference camera: distance ratio falls back to 1
        assert r[2] == pytest.approx(2.0)
