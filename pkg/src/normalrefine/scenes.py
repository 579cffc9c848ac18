"""Analytic test scenes with exact ground-truth normals.

Scenes are built from planes and spheres and ray-cast per pixel centre.  Each
pixel gets a surface label.  The discontinuity band is every pixel within
Chebyshev distance ``band`` of a pixel with a different label.

Scenes are addressable from strings such as ``"step-edge"`` or
``"ridge:slope=1.2,angle=20"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import CameraIntrinsics, DepthGrid, NormalMap, Pixel, shifted

SCENE_KINDS = ("fronto-plane", "tilted-plane", "step-edge", "ridge", "sphere", "box-corner")

DESK_INTRINSICS = CameraIntrinsics(fu=120.0, fv=120.0, cu=79.5, cv=59.5)
DESK_SIZE = (160, 120)

DEFAULT_PARAMS = {
    "fronto-plane": {"z": 2.0},
    "tilted-plane": {"nx": 0.4, "ny": -0.25, "d": 2.0},
    # two slabs separated by a depth jump; tilt_* slant them about the y axis
    "step-edge": {"z_left": 1.0, "z_right": 2.0, "edge": 80.0, "angle": 0.0,
                  "tilt_left": 0.0, "tilt_right": 0.0},
    # a roof ridge: |w| profile, w the distance to the crease in the x-y plane
    "ridge": {"z": 2.0, "slope": 1.0, "x0": 0.0, "angle": 0.0},
    "sphere": {"radius": 0.8, "z_center": 2.5, "z_back": 4.0},
    "box-corner": {"x_wall": 1.0, "y_floor": 0.8, "z_back": 3.0},
}


class EmptySceneError(ValueError):
    pass


class UndefinedDerivativeError(ValueError):
    pass


@dataclass(frozen=True)
class Plane:
    """Points ``P`` with ``n . P = d`` (``n`` need not be unit length)."""

    n: tuple
    d: float

    def depth(self, ru, rv):
        den = self.n[0] * ru + self.n[1] * rv + self.n[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.d / den
        return np.where(np.isfinite(z) & (z > 0), z, np.nan)

    def normal(self, points):
        n = np.broadcast_to(np.asarray(self.n, dtype=np.float64), points.shape)
        return n / np.linalg.norm(self.n)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def depth(self, ru, rv):
        c = np.asarray(self.center, dtype=np.float64)
        a = ru * ru + rv * rv + 1.0
        b = -2.0 * (ru * c[0] + rv * c[1] + c[2])
        cc = c @ c - self.radius ** 2
        disc = b * b - 4 * a * cc
        with np.errstate(invalid="ignore"):
            z = (-b - np.sqrt(disc)) / (2 * a)
        return np.where((disc >= 0) & (z > 0), z, np.nan)

    def normal(self, points):
        return (points - np.asarray(self.center)) / self.radius


@dataclass(frozen=True)
class SceneSpec:
    kind: str
    params: dict = field(default_factory=dict)
    width: int = DESK_SIZE[0]
    height: int = DESK_SIZE[1]
    intrinsics: CameraIntrinsics = DESK_INTRINSICS

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; choose from {SCENE_KINDS}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        for key, val in self.params.items():
            if not np.isfinite(val):
                raise ValueError(f"parameter {key} must be finite")

    def param(self, key):
        return self.params.get(key, DEFAULT_PARAMS[self.kind][key])

    @property
    def name(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))


@dataclass
class SceneSample:
    depth: DepthGrid
    gt_normals: NormalMap
    intrinsics: CameraIntrinsics
    labels: np.ndarray
    surfaces: list
    spec: SceneSpec = None
    band_radius: int = 2

    def band(self, radius: int = None) -> np.ndarray:
        return discontinuity_band(self.labels, self.band_radius if radius is None else radius)

    @property
    def discontinuity_band(self) -> np.ndarray:
        return self.band()


def parse_scene(text: str, width=None, height=None, intrinsics=None) -> SceneSpec:
    """``"kind"`` or ``"kind:key=val,key=val"`` to a :class:`SceneSpec`."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad scene parameter {item!r}; expected key=value")
        params[key.strip()] = float(val)
    return SceneSpec(kind.strip(), params,
                     width or DESK_SIZE[0], height or DESK_SIZE[1],
                     intrinsics or DESK_INTRINSICS)


def discontinuity_band(labels: np.ndarray, radius: int) -> np.ndarray:
    edge = np.zeros(labels.shape, dtype=bool)
    lab = labels.astype(np.float64)
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if du or dv:
                other = shifted(lab, du, dv, fill=np.nan)
                edge |= np.isfinite(other) & (other != lab)
    # edge pixels sit one step from the other label; grow by the rest of the radius
    band = edge.copy()
    for _ in range(max(radius - 1, 0)):
        grown = band.copy()
        for dv in (-1, 0, 1):
            for du in (-1, 0, 1):
                grown |= shifted(band, du, dv, fill=False)
        band = grown
    return band if radius > 0 else np.zeros_like(edge)


def _surfaces(spec: SceneSpec, ru, rv):
    """Candidate surfaces and the per-pixel label choosing among them."""
    p = spec.param
    k = spec.intrinsics
    h, w = ru.shape
    if spec.kind == "fronto-plane":
        return [Plane((0.0, 0.0, 1.0), p("z"))], np.zeros((h, w), dtype=int)
    if spec.kind == "tilted-plane":
        return [Plane((p("nx"), p("ny"), 1.0), p("d"))], np.zeros((h, w), dtype=int)
    if spec.kind == "step-edge":
        theta = np.deg2rad(p("angle"))
        uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        side = (uu - p("edge")) * np.cos(theta) + (vv - k.cv) * np.sin(theta)
        labels = (side >= 0).astype(int)
        planes = []
        for z0, tilt in ((p("z_left"), p("tilt_left")), (p("z_right"), p("tilt_right"))):
            # z = z0 + tilt * x  ->  -tilt * x + z = z0
            planes.append(Plane((-tilt, 0.0, 1.0), z0))
        return planes, labels
    if spec.kind == "ridge":
        theta = np.deg2rad(p("angle"))
        c, s, slope, z0, x0 = np.cos(theta), np.sin(theta), p("slope"), p("z"), p("x0")
        # z = z0 + slope * |c (x - x0) + s y|
        a = Plane((slope * c, slope * s, 1.0), z0 + slope * c * x0)
        b = Plane((-slope * c, -slope * s, 1.0), z0 - slope * c * x0)
        za, zb = a.depth(ru, rv), b.depth(ru, rv)
        wa = c * (za * ru - x0) + s * za * rv
        labels = np.where(np.isfinite(za) & (wa <= 0), 0, 1)
        return [a, b], labels
    if spec.kind == "sphere":
        sph = Sphere((0.0, 0.0, p("z_center")), p("radius"))
        back = Plane((0.0, 0.0, 1.0), p("z_back"))
        zs = sph.depth(ru, rv)
        return [sph, back], np.where(np.isfinite(zs), 0, 1)
    if spec.kind == "box-corner":
        # camera inside a box looking at the corner of right wall, floor and back wall
        planes = [Plane((1.0, 0.0, 0.0), p("x_wall")),
                  Plane((0.0, 1.0, 0.0), p("y_floor")),
                  Plane((0.0, 0.0, 1.0), p("z_back"))]
        zs = np.stack([pl.depth(ru, rv) for pl in planes])
        zs = np.where(np.isfinite(zs), zs, np.inf)
        return planes, np.argmin(zs, axis=0)
    raise ValueError(spec.kind)


def render(spec: SceneSpec, band_radius: int = 2) -> SceneSample:
    k = spec.intrinsics
    ru, rv = k.rays(spec.width, spec.height)
    surfaces, labels = _surfaces(spec, ru, rv)
    z = np.full(ru.shape, np.nan)
    normals = np.zeros(ru.shape + (3,))
    for i, surf in enumerate(surfaces):
        sel = labels == i
        zi = surf.depth(ru, rv)
        z[sel] = zi[sel]
        pts = np.stack([zi * ru, zi * rv, zi], axis=-1)
        ni = surf.normal(pts)
        normals[sel] = ni[sel]
    mask = np.isfinite(z) & (z > 0)
    if not mask.any():
        raise EmptySceneError(f"scene {spec.name} lies behind the camera everywhere")
    pts = np.stack([z * ru, z * rv, z], axis=-1)
    flip = np.einsum("...i,...i->...", normals, pts) > 0
    normals[flip] *= -1
    normals[~mask] = 0.0
    labels = np.where(mask, labels, -1)
    depth = DepthGrid(np.where(mask, z, np.nan), mask)
    return SceneSample(depth, NormalMap(normals, mask), k, labels, surfaces, spec, band_radius)


def analytic_gradient(sample: SceneSample, p: Pixel):
    """Exact ``(dz/du, dz/dv)`` at a pixel centre.

    The depth gradient of any surface equals that of its tangent plane
    ``n . P = n . P0``, i.e. ``-z^2 (nx / fu, ny / fv) / (n . P0)``.
    """
    if sample.band(1)[p.v, p.u]:
        raise UndefinedDerivativeError(f"pixel {p} touches a discontinuity")
    if not sample.depth.mask[p.v, p.u]:
        raise UndefinedDerivativeError(f"pixel {p} has no depth")
    k = sample.intrinsics
    z = sample.depth.values[p.v, p.u]
    pt = np.array([z * (p.u - k.cu) / k.fu, z * (p.v - k.cv) / k.fv, z])
    n = sample.gt_normals.normals[p.v, p.u]
    den = n @ pt
    return (-z * z * n[0] / (k.fu * den), -z * z * n[1] / (k.fv * den))


# Smooth analytic depth fields in pixel coordinates, for the error-bound checks.

@dataclass(frozen=True)
class SmoothField:
    """``z = c0 + a u + b v + q_uu u^2/2 + q_uv u v + q_vv v^2/2 + sum A sin(k.(u, v) + phase)``."""

    c0: float = 2.0
    a: float = 0.0
    b: float = 0.0
    q_uu: float = 0.0
    q_uv: float = 0.0
    q_vv: float = 0.0
    waves: tuple = ()  # (amplitude, k_u, k_v, phase)

    def _waves(self, u, v, order):
        total = 0.0
        for amp, ku, kv, ph in self.waves:
            arg = ku * u + kv * v + ph
            if order == 0:
                total = total + amp * np.sin(arg)
            elif order in ("u", "v"):
                total = total + amp * (ku if order == "u" else kv) * np.cos(arg)
            else:
                kk = ku * ku if order == "uu" else kv * kv
                total = total - amp * kk * np.sin(arg)
        return total

    def z(self, u, v):
        return (self.c0 + self.a * u + self.b * v + 0.5 * self.q_uu * u * u
                + self.q_uv * u * v + 0.5 * self.q_vv * v * v + self._waves(u, v, 0))

    def zu(self, u, v):
        return self.a + self.q_uu * u + self.q_uv * v + self._waves(u, v, "u")

    def zv(self, u, v):
        return self.b + self.q_uv * u + self.q_vv * v + self._waves(u, v, "v")

    def zuu(self, u, v):
        return self.q_uu + self._waves(u, v, "uu")

    def zvv(self, u, v):
        return self.q_vv + self._waves(u, v, "vv")


def random_smooth_field(rng: np.random.Generator, n_waves: int = 3) -> SmoothField:
    waves = tuple(
        (rng.uniform(0.01, 0.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(0, 2 * np.pi))
        for _ in range(n_waves)
    )
    return SmoothField(
        c0=rng.uniform(1.0, 5.0), a=rng.normal(0, 0.2), b=rng.normal(0, 0.2),
        q_uu=rng.normal(0, 0.05), q_uv=rng.normal(0, 0.05), q_vv=rng.normal(0, 0.05),
        waves=waves,
    )
