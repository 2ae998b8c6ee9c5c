"""Acceptance checks.  Each test prints one ``CRITERION n PASS/FAIL`` line."""

import math
import time

import numpy as np
import pytest

from scalesplat.blending import PixelRegion, alpha_integrated
from scalesplat.core import GaussianCloud, RenderSettings
from scalesplat.errorlab import ErrorGridSpec, run_sweep
from scalesplat.errors import PlyError
from scalesplat.filters import fixed_dilation, scale_adaptive
from scalesplat.io import box_downsample, parse_ply, ply_bytes, psnr
from scalesplat.projection import Splat2D, cutoff_radius
from scalesplat.rasterizer import render
from scalesplat.synth import SceneRecipe, SingleSplat, StarBurst, build

from conftest import rot2


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    rep = run_sweep(ErrorGridSpec())
    return rep, time.perf_counter() - t0


def test_criterion_1_error_sweep(sweep, capsys):
    rep, seconds = sweep
    mean = rep.mean_rel_err
    flat = rep.rel_err[0].max()
    ok = 0.003 <= mean <= 0.008 and flat < 1e-5 and seconds < 60
    report(capsys, 1, ok, f"mean rel err {mean:.4%} (band 0.3%..0.8%), max theta=0 err {flat:.2e}, "
                          f"{rep.rel_err.size} cells in {seconds:.1f}s")


def test_criterion_2_integration_limit(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 1000
    sig = np.exp(rng.uniform(np.log(0.3), np.log(30.0), size=(n, 2)))
    aligned = rng.random(n) < 0.3
    phi = np.where(aligned, 0.0, rng.uniform(0.0, np.pi, n))
    # pixel center drawn uniformly inside the 3-sigma ellipse
    rad = 3.0 * np.sqrt(rng.random(n))
    ang = rng.uniform(0.0, 2 * np.pi, n)
    local = np.stack([rad * np.cos(ang) * sig[:, 0], rad * np.sin(ang) * sig[:, 1]], axis=1)
    sizes = (2, 4, 8, 16, 32, 64)
    integ = np.empty(n)
    ss = np.empty((len(sizes), n))
    for i in range(n):
        R = rot2(phi[i])
        cov = R @ np.diag(sig[i] ** 2) @ R.T
        center = np.array([10.5, 20.5])
        splat = Splat2D.build(center - R @ local[i], cov, 1.0, 1.0, (1.0, 1.0, 1.0))
        integ[i] = alpha_integrated(splat, PixelRegion(center), alpha_max=1.0)
        inv = np.linalg.inv(cov)
        for k, S in enumerate(sizes):
            o = (np.arange(S) + 0.5) / S - 0.5
            d = np.stack(np.meshgrid(o, o), axis=-1).reshape(-1, 2) + R @ local[i]
            ss[k, i] = np.exp(-0.5 * np.einsum("pi,ij,pj->p", d, inv, d)).mean()
    seconds = time.perf_counter() - t0
    gap = np.abs(integ - ss).mean(axis=1)
    rel = np.abs(integ - ss[-1]) / ss[-1]
    monotone = bool(np.all(np.diff(gap) < 0))
    ok = monotone and rel[aligned].mean() < 0.01 and rel.mean() < 0.03 and seconds < 10
    report(capsys, 2, ok, f"mean |int - ss| over S={sizes}: {np.array2string(gap, formatter={'float_kind': lambda v: f'{v:.2e}'})}; "
                          f"S=64 rel diff aligned {rel[aligned].mean():.3%} (max {rel[aligned].max():.3%}), "
                          f"overall {rel.mean():.3%}; {seconds:.1f}s")


def test_criterion_3_dilation_constant(capsys):
    point = Splat2D.build(np.zeros(2), 1e-14 * np.eye(2), 1.0, 0.8, (1.0, 1.0, 1.0))
    fixed = cutoff_radius(fixed_dilation(point, 0.3))
    adaptive = cutoff_radius(scale_adaptive(point, 0.3, 0.5))
    want_fixed, want_adaptive = 3 * math.sqrt(0.3), 1.5 * math.sqrt(0.3)
    ok = abs(fixed - want_fixed) < 1e-6 and abs(adaptive - want_adaptive) < 1e-6
    report(capsys, 3, ok, f"fixed radius {fixed:.7f} px (3*sqrt(0.3) = {want_fixed:.7f}), "
                          f"scale-adaptive r=0.5 radius {adaptive:.7f} px (target {want_adaptive:.7f})")


def splat_moments(img):
    """Alpha mass and 3-sigma footprint of a white splat rendered over black."""
    a = img.pixels[..., 0]
    y, x = np.mgrid[0:a.shape[0], 0:a.shape[1]] + 0.5
    m = a.sum()
    mx, my = (a * x).sum() / m, (a * y).sum() / m
    var = (a * ((x - mx) ** 2 + (y - my) ** 2)).sum() / m / 2
    return m, 3 * math.sqrt(var)


def test_criterion_4_scale_consistency(capsys):
    t0 = time.perf_counter()
    cloud, train = build(SceneRecipe(recipe=SingleSplat()))
    cam = train.cameras[0]
    sa = RenderSettings(filter_mode="sa")
    ratio_sa = splat_moments(render(cloud, cam.scaled(0.5), train, sa))[1] / \
        splat_moments(render(cloud, cam, train, sa))[1]
    tiny = SceneRecipe(recipe=SingleSplat(sigma_world=0.00625))
    tiny_cloud, _ = build(tiny)
    unfiltered_half = 3 * 0.00625 * tiny.train_focal * 0.5 / tiny.train_distance
    dil = RenderSettings(filter_mode="dilate")
    ratio_dil = splat_moments(render(tiny_cloud, cam.scaled(0.5), train, dil))[1] / \
        splat_moments(render(tiny_cloud, cam, train, dil))[1]
    seconds = time.perf_counter() - t0
    ok = abs(ratio_sa / 0.5 - 1) <= 0.02 and unfiltered_half <= 1.0 and abs(ratio_dil / 0.5 - 1) > 0.05 \
        and seconds < 5
    report(capsys, 4, ok, f"SA footprint ratio {ratio_sa:.4f}; dilate ratio {ratio_dil:.4f} "
                          f"(unfiltered half-res footprint {unfiltered_half:.2f} px); {seconds:.2f}s")


def test_criterion_5_zoom_out(capsys):
    t0 = time.perf_counter()
    cloud, train = build(SceneRecipe())
    cam = train.cameras[0]
    ref = box_downsample(render(cloud, cam, train, RenderSettings(filter_mode="dilate")), 8)
    low = cam.scaled(0.125)
    db = {f"{f}+{b}": psnr(render(cloud, low, train, RenderSettings(filter_mode=f, blend_mode=b)), ref)
          for f, b in [("sa", "ss"), ("sa", "int"), ("sa", "point"), ("dilate", "point")]}
    seconds = time.perf_counter() - t0
    ok = db["sa+ss"] > db["sa+int"] - 0.5 and db["sa+point"] - db["dilate+point"] >= 2.0 and seconds < 30
    report(capsys, 5, ok, ", ".join(f"{k} {v:.2f} dB" for k, v in db.items()) + f"; {seconds:.1f}s")


def test_criterion_6_zoom_in_mass(capsys):
    cloud, train = build(SceneRecipe(recipe=SingleSplat(sigma_world=0.00625)))
    cam = train.cameras[0]
    ratios = {}
    for mode in ("sa", "dilate"):
        s = RenderSettings(filter_mode=mode)
        m1 = splat_moments(render(cloud, cam, train, s))[0]
        m8 = splat_moments(render(cloud, cam.scaled(8), train, s))[0]
        ratios[mode] = m8 / (64 * m1)
    ok = abs(ratios["sa"] - 1) <= 0.05 and 1 - ratios["dilate"] > 0.15
    report(capsys, 6, ok, f"8x mass / (64 x 1x mass): SA {ratios['sa']:.4f}, dilate {ratios['dilate']:.4f} "
                          f"(deficit {1 - ratios['dilate']:.1%})")


def mutate(good: bytes, rng: np.random.Generator) -> bytes:
    buf = bytearray(good)
    kind = rng.integers(5)
    if kind == 0:
        for _ in range(rng.integers(1, 8)):
            buf[rng.integers(len(buf))] = rng.integers(256)
    elif kind == 1:
        buf = buf[: rng.integers(len(buf))]
    elif kind == 2:
        at = rng.integers(len(buf))
        buf[at:at] = rng.integers(0, 256, size=rng.integers(1, 16), dtype=np.uint8).tobytes()
    elif kind == 3:
        # corrupt the header text specifically
        end = good.index(b"end_header")
        for _ in range(rng.integers(1, 4)):
            buf[rng.integers(end + 10)] = rng.choice(list(b" \n-0123456789abcdefxyz_"))
    else:
        a, b = sorted(rng.integers(len(buf), size=2))
        del buf[a:b]
    return bytes(buf)


def test_criterion_7_determinism_and_fuzz(capsys):
    cloud, train = build(SceneRecipe(recipe=StarBurst(), train_resolution=96, train_focal=96.0))
    identical = True
    for mode in ("point", "ss", "int"):
        s = RenderSettings(blend_mode=mode, tile_size=8)
        ref = render(cloud, train.cameras[2], train, s, workers=1).pixels
        identical &= all(np.array_equal(render(cloud, train.cameras[2], train, s, workers=w).pixels, ref)
                         for w in (2, 8))
    rng = np.random.default_rng(7)
    n = 6
    small = GaussianCloud(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)), rng.normal(size=(n, 4)),
                          rng.normal(size=n), rng.normal(size=(n, 4, 3)))
    good = ply_bytes(small)
    typed = crashes = 0
    for _ in range(10_000):
        try:
            parse_ply(mutate(good, rng))
        except PlyError:
            typed += 1
        except Exception:  # noqa: BLE001
            crashes += 1
    ok = identical and crashes == 0
    report(capsys, 7, ok, f"1/2/8 workers bit-identical: {identical}; 10000 PLY mutations: "
                          f"{typed} typed errors, {crashes} untyped")


def test_criterion_8_bound_sandwich(sweep, capsys):
    rep, _ = sweep
    holds = rep.sandwich_holds
    report(capsys, 8, bool(holds.all()), f"lower <= oracle <= upper on {holds.mean():.2%} of {holds.size} cells")
