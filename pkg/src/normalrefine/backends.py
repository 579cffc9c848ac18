"""Gradient-to-normal back-ends.

``cp2tv`` crosses the two image-space tangent vectors of the back-projected
surface.  ``3f2n`` reads the normal's x/y components straight off the
inverse-depth gradient and recovers z from the neighbours with a mean or
median filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CameraIntrinsics, DepthGrid, NormalMap, back_project_grid, shifted

THREE_F2N = "3f2n"
CP2TV = "cp2tv"
MEDIAN = "median"
MEAN = "mean"
EPS_Z = 1e-12


class DegenerateNormalError(ValueError):
    pass


@dataclass(frozen=True)
class BackendChoice:
    kind: str = CP2TV
    phi: str = MEDIAN

    def __post_init__(self):
        if self.kind not in (THREE_F2N, CP2TV):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.phi not in (MEDIAN, MEAN):
            raise ValueError(f"unknown central tendency {self.phi!r}")


def orient_normalize(n, p3d):
    """Unit normal flipped, if needed, so that it faces the camera."""
    n = np.asarray(n, dtype=np.float64)
    norm = np.linalg.norm(n)
    if not norm > 0:
        raise DegenerateNormalError("cannot normalise a zero vector")
    n = n / norm
    if np.dot(n, p3d) > 0:
        n = -n
    return n


def orient_normalize_grid(n: np.ndarray, points: np.ndarray, mask: np.ndarray):
    """Vectorised :func:`orient_normalize`; zero or non-finite vectors drop out of the mask."""
    norm = np.linalg.norm(n, axis=-1)
    ok = mask & np.isfinite(norm) & (norm > 0)
    out = np.zeros_like(n)
    out[ok] = n[ok] / norm[ok, None]
    flip = np.einsum("...i,...i->...", out, points) > 0
    out[flip] *= -1
    out[~ok] = 0.0
    return out, ok


def normals_cp2tv(depth: DepthGrid, grad, k: CameraIntrinsics) -> NormalMap:
    """Normals from depth gradients via ``t_u x t_v``."""
    z = np.where(depth.mask, depth.values, np.nan)
    ru, rv = k.rays(depth.width, depth.height)
    zu, zv = grad.zu, grad.zv
    t_u = np.stack([z / k.fu + ru * zu, rv * zu, zu], axis=-1)
    t_v = np.stack([ru * zv, z / k.fv + rv * zv, zv], axis=-1)
    n = np.cross(t_u, t_v)
    mask = grad.mask & depth.mask
    normals, ok = orient_normalize_grid(n, back_project_grid(z, k), mask)
    return NormalMap(normals, ok)


def normals_3f2n(inv_depth: DepthGrid, grad_d, depth: DepthGrid, k: CameraIntrinsics,
                 phi: str = MEDIAN, eps_z: float = EPS_Z) -> NormalMap:
    """Normals from inverse-depth gradients and a neighbourhood filter for ``nz``.

    ``nx = fu * dd/du`` and ``ny = fv * dd/dv``.  The focal scaling only
    matters when ``fu != fv``.  ``nz`` is the mean or median, over valid
    8-neighbours with ``|z_i - z| >= eps_z``, of
    ``-((x_i - x) nx + (y_i - y) ny) / (z_i - z)``.  A pixel whose gradient
    vanishes gets ``(0, 0, -1)``.
    """
    z = np.where(depth.mask, depth.values, np.nan)
    pts = back_project_grid(z, k)
    nx = k.fu * grad_d.zu
    ny = k.fv * grad_d.zv
    ratios = []
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if du == 0 and dv == 0:
                continue
            q = np.stack([shifted(pts[..., c], du, dv, fill=np.nan) for c in range(3)], axis=-1)
            dz = q[..., 2] - pts[..., 2]
            with np.errstate(invalid="ignore", divide="ignore"):
                r = -((q[..., 0] - pts[..., 0]) * nx + (q[..., 1] - pts[..., 1]) * ny) / dz
            r[~(np.abs(dz) >= eps_z)] = np.nan
            ratios.append(r)
    ratios = np.stack(ratios)
    has_any = np.any(np.isfinite(ratios), axis=0)
    # all-NaN columns would warn; they are masked below anyway
    ratios = np.where(has_any[None], ratios, 0.0)
    reduce = np.nanmedian if phi == MEDIAN else np.nanmean
    nz = reduce(ratios, axis=0)
    flat = (nx == 0) & (ny == 0)
    nz = np.where(flat, -1.0, nz)
    n = np.stack([nx, ny, nz], axis=-1)
    mask = grad_d.mask & depth.mask & (has_any | flat)
    normals, ok = orient_normalize_grid(n, pts, mask)
    return NormalMap(normals, ok)
