import numpy as np
import pytest

from normalrefine.backends import (
    CP2TV, MEAN, MEDIAN, THREE_F2N, BackendChoice, DegenerateNormalError, normals_3f2n, normals_cp2tv,
    orient_normalize,
)
from normalrefine.dp import DpConfig, run_dp
from normalrefine.grid import CameraIntrinsics, DepthGrid, Pixel, invert_depth
from normalrefine.initializer import GradientField
from normalrefine.metrics import aae
from normalrefine.scenes import SceneSpec, analytic_gradient, render


def _grad(zu, zv):
    z = np.zeros_like(zu)
    return GradientField(zu, zv, z, z.copy(), np.ones(zu.shape, bool))


def test_orient_normalize_examples():
    assert orient_normalize((0, 0, 2), (0, 0, 1)) == pytest.approx((0, 0, -1))
    assert orient_normalize((0, 0, -3), (0, 0, 1)) == pytest.approx((0, 0, -1))
    h = np.sqrt(2) / 2
    assert orient_normalize((1, 1, 0), (0, 0, 1)) == pytest.approx((h, h, 0))
    with pytest.raises(DegenerateNormalError):
        orient_normalize((0, 0, 0), (0, 0, 1))


def test_cp2tv_fronto():
    k = CameraIntrinsics(100, 90, 4.5, 3.5)
    depth = DepthGrid(np.full((8, 10), 2.5))
    nm = normals_cp2tv(depth, _grad(np.zeros((8, 10)), np.zeros((8, 10))), k)
    assert nm.mask.all()
    np.testing.assert_allclose(nm.normals, np.broadcast_to([0, 0, -1], (8, 10, 3)), atol=1e-15)


def test_cp2tv_exact_on_tilted_plane_with_analytic_gradients():
    s = render(SceneSpec("tilted-plane", width=40, height=30))
    zu = np.zeros((30, 40))
    zv = np.zeros((30, 40))
    for v in range(30):
        for u in range(40):
            zu[v, u], zv[v, u] = analytic_gradient(s, Pixel(u, v))
    nm = normals_cp2tv(s.depth, _grad(zu, zv), s.intrinsics)
    cos = np.einsum("...i,...i->...", nm.normals, s.gt_normals.normals)
    assert np.max(np.arccos(np.clip(cos, -1, 1))) < 1e-6


def test_cp2tv_sphere_on_axis_points_at_camera():
    k = CameraIntrinsics(120, 120, 20.0, 15.0)
    s = render(SceneSpec("sphere", width=41, height=31, intrinsics=k))
    nm = normals_cp2tv(s.depth, run_dp(s.depth, DpConfig()), k)
    assert nm.normals[15, 20] == pytest.approx((0, 0, -1), abs=1e-9)


def test_3f2n_fronto_uses_flat_convention():
    k = CameraIntrinsics(100, 100, 5, 5)
    depth = DepthGrid(np.full((10, 10), 3.0))
    inv = invert_depth(depth)
    nm = normals_3f2n(inv, run_dp(inv, DpConfig()), depth, k)
    np.testing.assert_array_equal(nm.normals[nm.mask], np.broadcast_to([0.0, 0.0, -1.0], (nm.mask.sum(), 3)))
    assert nm.mask.sum() == 100


def test_3f2n_tilted_plane_accuracy():
    s = render(SceneSpec("tilted-plane"))
    inv = invert_depth(s.depth)
    grad = run_dp(inv, DpConfig())
    nm = normals_3f2n(inv, grad, s.depth, s.intrinsics)
    assert aae(s.gt_normals, nm) < 0.1


def test_3f2n_mean_equals_median_on_plane():
    s = render(SceneSpec("tilted-plane"))
    inv = invert_depth(s.depth)
    grad = run_dp(inv, DpConfig())
    a = normals_3f2n(inv, grad, s.depth, s.intrinsics, MEDIAN)
    b = normals_3f2n(inv, grad, s.depth, s.intrinsics, MEAN)
    assert np.max(np.abs(a.normals - b.normals)) < 1e-9


def test_normals_are_unit_and_camera_facing():
    s = render(SceneSpec("sphere"))
    nm = normals_cp2tv(s.depth, run_dp(s.depth, DpConfig()), s.intrinsics)
    n = nm.normals[nm.mask]
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    ru, rv = s.intrinsics.rays(s.depth.width, s.depth.height)
    rays = np.stack([ru, rv, np.ones_like(ru)], axis=-1)[nm.mask]
    assert np.all(np.einsum("ij,ij->i", n, rays) <= 0)


def test_backend_choice_validation():
    assert BackendChoice().kind == CP2TV
    assert BackendChoice(THREE_F2N, MEAN).phi == MEAN
    with pytest.raises(ValueError):
        BackendChoice("pca")
    with pytest.raises(ValueError):
        BackendChoice(CP2TV, "mode")
