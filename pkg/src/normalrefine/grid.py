"""Grid containers, the pinhole camera model and pixel/3D conversions.

Arrays are stored row-major as ``(height, width)`` with the origin at the
top-left pixel; ``u`` runs right (columns) and ``v`` runs down (rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEPTH = "depth"
INVERSE_DEPTH = "inverse-depth"


class InvalidDepthError(ValueError):
    pass


class EmptyGridError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fu: float
    fv: float
    cu: float
    cv: float

    def __post_init__(self):
        if not (self.fu > 0 and self.fv > 0):
            raise ValueError(f"focal lengths must be positive, got fu={self.fu}, fv={self.fv}")
        if not (np.isfinite(self.cu) and np.isfinite(self.cv)):
            raise ValueError("principal point must be finite")

    def rays(self, width: int, height: int):
        """Per-pixel viewing rays ``((u-cu)/fu, (v-cv)/fv)`` with unit z."""
        u, v = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
        return (u - self.cu) / self.fu, (v - self.cv) / self.fv


@dataclass(frozen=True)
class Pixel:
    u: int
    v: int


@dataclass
class DepthGrid:
    values: np.ndarray
    mask: np.ndarray = field(default=None)
    kind: str = DEPTH

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"depth values must be 2-D, got shape {self.values.shape}")
        if self.kind not in (DEPTH, INVERSE_DEPTH):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        finite = np.isfinite(self.values)
        if self.mask is None:
            self.mask = finite & (self.values > 0)
        else:
            self.mask = np.asarray(self.mask, dtype=bool) & finite
            if self.mask.shape != self.values.shape:
                raise ValueError("mask shape does not match values")
        if self.kind == DEPTH and np.any(self.values[self.mask] <= 0):
            raise InvalidDepthError("valid depth entries must be positive")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "DepthGrid":
        return DepthGrid(self.values.copy(), self.mask.copy(), self.kind)


@dataclass
class NormalMap:
    normals: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.normals.ndim != 3 or self.normals.shape[2] != 3:
            raise ValueError(f"normals must have shape (H, W, 3), got {self.normals.shape}")
        if self.mask.shape != self.normals.shape[:2]:
            raise ValueError("mask shape does not match normals")

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]


def back_project(p: Pixel, z: float, k: CameraIntrinsics):
    """3D camera-frame point seen at pixel ``p`` with depth ``z``."""
    if not np.isfinite(z) or z <= 0:
        raise InvalidDepthError(f"depth must be finite and positive, got {z}")
    return (z * (p.u - k.cu) / k.fu, z * (p.v - k.cv) / k.fv, float(z))


def project(point, k: CameraIntrinsics):
    """Pixel coordinates ``(u, v)`` of a camera-frame point in front of the camera."""
    x, y, z = point
    if not np.isfinite(z) or z <= 0:
        raise InvalidDepthError(f"point must lie in front of the camera, got z={z}")
    return (k.fu * x / z + k.cu, k.fv * y / z + k.cv)


def back_project_grid(depth: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Vectorised :func:`back_project`; returns an ``(H, W, 3)`` point array."""
    h, w = depth.shape
    ru, rv = k.rays(w, h)
    return np.stack([depth * ru, depth * rv, depth], axis=-1)


def neighbors8(p: Pixel, w: int, h: int) -> list:
    if not (0 <= p.u < w and 0 <= p.v < h):
        raise IndexError(f"pixel {p} outside {w}x{h} grid")
    out = []
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if du == 0 and dv == 0:
                continue
            u, v = p.u + du, p.v + dv
            if 0 <= u < w and 0 <= v < h:
                out.append(Pixel(u, v))
    return out


def invert_depth(g: DepthGrid) -> DepthGrid:
    """Reciprocal of every valid entry; flips the ``kind`` tag."""
    vals = g.values[g.mask]
    if np.any(vals <= 0):
        raise InvalidDepthError("cannot invert non-positive entries")
    out = np.full_like(g.values, np.nan)
    out[g.mask] = 1.0 / vals
    kind = INVERSE_DEPTH if g.kind == DEPTH else DEPTH
    return DepthGrid(out, g.mask.copy(), kind)


def shifted(a: np.ndarray, du: int, dv: int, fill=np.inf) -> np.ndarray:
    """``out[v, u] = a[v + dv, u + du]``, with ``fill`` where that lies off the grid."""
    h, w = a.shape[:2]
    out = np.full_like(a, fill)
    src_v = slice(max(dv, 0), h + min(dv, 0))
    dst_v = slice(max(-dv, 0), h + min(-dv, 0))
    src_u = slice(max(du, 0), w + min(du, 0))
    dst_u = slice(max(-du, 0), w + min(-du, 0))
    out[dst_v, dst_u] = a[src_v, src_u]
    return out


def stencil_mask(mask: np.ndarray) -> np.ndarray:
    """Pixels whose whole 3x3 neighbourhood (clipped to the grid) is valid."""
    out = mask.copy()
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if du or dv:
                out &= shifted(mask, du, dv, fill=True)
    return out
