"""Accuracy metrics, path-discontinuity norms, error-bound checks and noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import DepthGrid, NormalMap, Pixel

PGP_TOLERANCES = (10.0, 20.0, 30.0)
QUAD_SAMPLES = 100


class EmptyEvaluationError(ValueError):
    pass


@dataclass
class MetricReport:
    aae_degrees: float
    pgp: dict
    pixel_count: int
    errors: np.ndarray = field(default=None, repr=False)

    def as_dict(self, prefix=""):
        out = {f"{prefix}aae": self.aae_degrees, f"{prefix}pixels": self.pixel_count}
        for tol, val in self.pgp.items():
            out[f"{prefix}pgp{tol:g}"] = val
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.as_dict().items())


def angular_errors(gt: NormalMap, est: NormalMap, region=None):
    """Per-pixel angle in degrees, NaN outside the joint valid mask."""
    if gt.normals.shape != est.normals.shape:
        raise ValueError(f"shape mismatch {gt.normals.shape} vs {est.normals.shape}")
    joint = gt.mask & est.mask
    if region is not None:
        joint &= region
    n1 = gt.normals
    n2 = est.normals
    # atan2(|a x b|, a . b) is exact for identical vectors and well conditioned
    # near 0 and 180 degrees, where arccos of the cosine is not
    dot = np.einsum("...i,...i->...", n1, n2)
    cross = np.linalg.norm(np.cross(n1, n2), axis=-1)
    err = np.degrees(np.arctan2(cross, dot))
    err[~joint] = np.nan
    return err, joint


def _joint_errors(gt, est, region):
    err, joint = angular_errors(gt, est, region)
    if not joint.any():
        raise EmptyEvaluationError("no jointly valid pixels to evaluate")
    return err[joint]


def aae(gt: NormalMap, est: NormalMap, region=None) -> float:
    # math.fsum keeps the mean independent of summation order
    e = _joint_errors(gt, est, region)
    return math.fsum(e.tolist()) / e.size


def pgp(gt: NormalMap, est: NormalMap, tolerance: float, region=None) -> float:
    e = _joint_errors(gt, est, region)
    return float(np.count_nonzero(e <= tolerance)) / e.size


def car(e1: float, e2: float) -> float:
    """Cross accuracy ratio ``e1 / e2``; above 1 means the second method wins."""
    if e2 == 0:
        return 1.0 if e1 == 0 else math.inf
    return e1 / e2


def evaluate(gt: NormalMap, est: NormalMap, region=None, keep_errors=False) -> MetricReport:
    err, joint = angular_errors(gt, est, region)
    if not joint.any():
        raise EmptyEvaluationError("no jointly valid pixels to evaluate")
    e = err[joint]
    report = MetricReport(
        aae_degrees=math.fsum(e.tolist()) / e.size,
        pgp={t: float(np.count_nonzero(e <= t)) / e.size for t in PGP_TOLERANCES},
        pixel_count=int(e.size),
    )
    if keep_errors:
        report.errors = err
    return report


@dataclass(frozen=True)
class PathSpec:
    pixels: tuple

    def __post_init__(self):
        pix = tuple(p if isinstance(p, Pixel) else Pixel(*p) for p in self.pixels)
        object.__setattr__(self, "pixels", pix)
        for a, b in zip(pix, pix[1:]):
            if abs(a.u - b.u) + abs(a.v - b.v) != 1:
                raise ValueError(f"path step {a} -> {b} is not an axis-aligned unit move")

    def __add__(self, other: "PathSpec") -> "PathSpec":
        if other.pixels[0] != self.pixels[-1]:
            raise ValueError("paths do not join")
        return PathSpec(self.pixels + other.pixels[1:])


def pd_norm(path: PathSpec, zuu: np.ndarray, zvv: np.ndarray) -> float:
    """Discrete path-discontinuity norm.

    Each step adds ``|zuu|`` (u-steps) or ``|zvv|`` (v-steps) sampled at
    the step's destination pixel.
    """
    h, w = zuu.shape
    for p in path.pixels:
        if not (0 <= p.u < w and 0 <= p.v < h):
            raise IndexError(f"path pixel {p} outside {w}x{h} grid")
    total = 0.0
    for a, b in zip(path.pixels, path.pixels[1:]):
        total += abs(zuu[b.v, b.u]) if a.u != b.u else abs(zvv[b.v, b.u])
    return total


def _segment(f, start, stop, n=QUAD_SAMPLES):
    """Gauss-Legendre quadrature of ``f`` over ``[start, stop]`` (signed)."""
    x, wts = np.polynomial.legendre.leggauss(n)
    mid = 0.5 * (start + stop)
    half = 0.5 * (stop - start)
    return half * float(np.sum(wts * f(mid + half * x)))


def check_collinear_bound(scene, pixel, direction, tol=1e-9):
    """Remainder of a one-step first-order transfer vs. the PD norm of that step.

    ``direction`` is an axis-aligned unit offset ``(du, dv)``.  The error
    ``|z(p') - z(p) - s * z_s(p)|`` equals ``|int (s1 - s) z_ss ds|``
    (integral remainder), which is bounded by ``int |z_ss| ds``.
    Returns ``(error, pd_bound, holds)``.
    """
    u0, v0 = pixel
    du, dv = direction
    if abs(du) + abs(dv) != 1:
        raise ValueError("direction must be an axis-aligned unit step")
    if du:
        u1 = u0 + du
        f2 = lambda u: scene.zuu(u, v0 + 0 * u)
        eps = abs(_segment(lambda u: (u1 - u) * f2(u), u0, u1))
        bound = abs(_segment(lambda u: np.abs(f2(u)), u0, u1))
    else:
        v1 = v0 + dv
        f2 = lambda v: scene.zvv(u0 + 0 * v, v)
        eps = abs(_segment(lambda v: (v1 - v) * f2(v), v0, v1))
        bound = abs(_segment(lambda v: np.abs(f2(v)), v0, v1))
    return eps, bound, eps <= bound + tol


def collinear_error_direct(scene, pixel, direction):
    """Closed-form first-order transfer error, from ``z`` and its gradient."""
    u0, v0 = pixel
    du, dv = direction
    g = scene.zu(u0, v0) if du else scene.zv(u0, v0)
    return abs(scene.z(u0 + du, v0 + dv) - scene.z(u0, v0) - (du + dv) * g)


def _loop_remainders(scene, pixel, diagonal):
    u0, v0 = pixel
    u1, v1 = u0 + diagonal[0], v0 + diagonal[1]
    # L1: u-leg at v0 expanded from its start, then v-leg at u1 expanded from its end
    r1 = (_segment(lambda u: (u1 - u) * scene.zuu(u, v0 + 0 * u), u0, u1)
          - _segment(lambda v: (v - v0) * scene.zvv(u1 + 0 * v, v), v0, v1))
    # L2: v-leg at u0 expanded from its start, then u-leg at v1 expanded from its end
    r2 = (_segment(lambda v: (v1 - v) * scene.zvv(u0 + 0 * v, v), v0, v1)
          - _segment(lambda u: (u - u0) * scene.zuu(u, v1 + 0 * u), u0, u1))
    bound = (abs(_segment(lambda u: np.abs(scene.zuu(u, v0 + 0 * u)), u0, u1))
             + abs(_segment(lambda v: np.abs(scene.zvv(u1 + 0 * v, v)), v0, v1))
             + abs(_segment(lambda v: np.abs(scene.zvv(u0 + 0 * v, v)), v0, v1))
             + abs(_segment(lambda u: np.abs(scene.zuu(u, v1 + 0 * u)), u0, u1)))
    return r1, r2, bound


def check_noncollinear_bound(scene, pixel, diagonal, tol=1e-9):
    """Disagreement of the two first-order loop paths to a diagonal neighbour.

    Path L1 goes along u then v and path L2 along v then u.  Each predicts
    ``z(p') - z(p)`` from gradients at the leg ends that the non-collinear
    update uses.  Their difference is bounded by the PD norm of the closed
    loop.  Returns ``(error, pd_bound, holds)``.
    """
    if abs(diagonal[0]) != 1 or abs(diagonal[1]) != 1:
        raise ValueError("diagonal must be (+-1, +-1)")
    r1, r2, bound = _loop_remainders(scene, pixel, diagonal)
    eps = abs(r1 - r2)
    return eps, bound, eps <= bound + tol


def noncollinear_error_direct(scene, pixel, diagonal):
    u0, v0 = pixel
    du, dv = diagonal
    u1, v1 = u0 + du, v0 + dv
    pred1 = du * scene.zu(u0, v0) + dv * scene.zv(u1, v1)
    pred2 = dv * scene.zv(u0, v0) + du * scene.zu(u1, v1)
    return abs(pred1 - pred2)


def add_gaussian_noise(g: DepthGrid, sigma: float, seed: int = 0) -> DepthGrid:
    """Add zero-mean Gaussian noise of *variance* ``sigma`` to every valid pixel.

    Entries that end up non-positive (for depth grids) are masked out.
    """
    if sigma < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma}")
    if sigma == 0:
        return g.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(sigma), size=g.values.shape)
    vals = np.where(g.mask, g.values + noise, np.nan)
    mask = g.mask & np.isfinite(vals)
    if g.kind == "depth":
        mask &= vals > 0
    return DepthGrid(np.where(mask, vals, np.nan), mask, g.kind)
