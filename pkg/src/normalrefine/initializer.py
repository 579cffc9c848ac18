"""Coarse depth gradients, local smoothness and the initial DP state.

Three fixed kernels are used: forward difference ``[0, -1, 1]``, backward
difference ``[-1, 1, 0]`` and the Laplace kernel ``[-1, 2, -1]``.  Each
pixel picks, per axis, whichever of its three collinear neighbours has the
smallest second derivative and interpolates the two first differences
towards it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DepthGrid, EmptyGridError, Pixel, shifted, stencil_mask

PD = "pd"
TV = "tv"
COST_KINDS = (PD, TV)

# eta candidates in tie-break order: centre, then backward, then forward
ETA_ORDER = (0, -1, 1)

KERNELS = {
    "ffd": np.array([0.0, -1.0, 1.0]),
    "fbd": np.array([-1.0, 1.0, 0.0]),
    "fl": np.array([-1.0, 2.0, -1.0]),
}


@dataclass
class GradientField:
    zu: np.ndarray
    zv: np.ndarray
    zuu: np.ndarray
    zvv: np.ndarray
    mask: np.ndarray

    def copy(self) -> "GradientField":
        return GradientField(self.zu.copy(), self.zv.copy(), self.zuu.copy(),
                             self.zvv.copy(), self.mask.copy())


@dataclass
class InitBundle:
    grad: GradientField
    e_u: np.ndarray
    e_v: np.ndarray
    s_u: np.ndarray  # (H, W, 2) int offsets (du, dv)
    s_v: np.ndarray
    eta_u: np.ndarray
    eta_v: np.ndarray
    # one-sided difference carried for the recursive interpolation, and its order
    t_u: np.ndarray
    t_v: np.ndarray
    n_u: np.ndarray
    n_v: np.ndarray


def _filled(g: DepthGrid) -> np.ndarray:
    # masked entries never reach a valid output (see stencil_mask); any finite value will do
    z = np.where(g.mask, g.values, 0.0)
    return np.nan_to_num(z, nan=0.0, posinf=0.0, neginf=0.0)


ROUNDING_ULPS = 16


def _laplace_1d(z: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    zp = np.pad(z, pad, mode="edge")
    n = z.shape[axis]
    lo = np.take(zp, np.arange(0, n), axis=axis)
    mid = np.take(zp, np.arange(1, n + 1), axis=axis)
    hi = np.take(zp, np.arange(2, n + 2), axis=axis)
    out = -lo + 2.0 * mid - hi
    # affine samples leave a few ulps of cancellation residue; that is not curvature
    floor = ROUNDING_ULPS * np.finfo(np.float64).eps * (np.abs(lo) + 2.0 * np.abs(mid) + np.abs(hi))
    out[np.abs(out) <= floor] = 0.0
    return out


def second_derivatives(g: DepthGrid):
    """Laplace-kernel second differences ``(zuu, zvv)``.

    ``z`` is replicate-padded at the border.  Pixels whose stencil touches an
    invalid pixel are set to ``inf``.
    """
    z = _filled(g)
    zuu = _laplace_1d(z, axis=1)
    zvv = _laplace_1d(z, axis=0)
    valid = stencil_mask(g.mask)
    zuu[~valid] = np.inf
    zvv[~valid] = np.inf
    return zuu, zvv


def _one_sided(z: np.ndarray, axis: int):
    d = np.diff(z, axis=axis)
    n = z.shape[axis]
    if n < 2:
        zero = np.zeros_like(z)
        return zero, zero.copy()
    if axis == 1:
        fwd = np.concatenate([d, d[:, -1:]], axis=1)
        bwd = np.concatenate([d[:, :1], d], axis=1)
    else:
        fwd = np.concatenate([d, d[-1:, :]], axis=0)
        bwd = np.concatenate([d[:1, :], d], axis=0)
    return fwd, bwd


def finite_differences(g: DepthGrid):
    """Forward and backward first differences per axis.

    Returns ``(fwd_u, bwd_u, fwd_v, bwd_v)``.  At a border the missing
    one-sided difference is replaced by the other, so forward equals
    backward there.
    """
    z = _filled(g)
    fwd_u, bwd_u = _one_sided(z, axis=1)
    fwd_v, bwd_v = _one_sided(z, axis=0)
    return fwd_u, bwd_u, fwd_v, bwd_v


def _neighbour_stack(a: np.ndarray, axis: str) -> np.ndarray:
    """``a`` sampled at offsets ``ETA_ORDER`` along ``axis``; off-grid is ``inf``."""
    if axis == "u":
        return np.stack([shifted(a, i, 0) for i in ETA_ORDER])
    return np.stack([shifted(a, 0, j) for j in ETA_ORDER])


def eta_field(zuu: np.ndarray, zvv: np.ndarray):
    """Vectorised :func:`select_eta` over the whole grid."""
    order = np.array(ETA_ORDER)
    eta_u = order[np.argmin(np.abs(_neighbour_stack(zuu, "u")), axis=0)]
    eta_v = order[np.argmin(np.abs(_neighbour_stack(zvv, "v")), axis=0)]
    return eta_u, eta_v


def select_eta(zuu: np.ndarray, zvv: np.ndarray, p: Pixel):
    """Per-axis offset in {-1, 0, 1} of the smoothest collinear neighbour.

    The joint argmin over ``(i, j)`` separates because each term depends on
    one index only.  Ties prefer 0, then -1, then +1.
    """
    h, w = zuu.shape

    def pick(values):
        best, best_off = np.inf, None
        for off, val in values:
            if val is None:
                continue
            if best_off is None or abs(val) < best:
                best, best_off = abs(val), off
        return best_off

    eta_u = pick([(i, zuu[p.v, p.u + i] if 0 <= p.u + i < w else None) for i in ETA_ORDER])
    eta_v = pick([(j, zvv[p.v + j, p.u] if 0 <= p.v + j < h else None) for j in ETA_ORDER])
    return eta_u, eta_v


def cost_fields(g: DepthGrid, zuu: np.ndarray, zvv: np.ndarray, cost_kind: str = PD):
    """Per-pixel, per-axis discontinuity cost fed to the DP.

    ``pd`` uses second-difference magnitudes.  ``tv`` uses the mean absolute
    first difference along the axis instead.
    """
    if cost_kind == PD:
        return np.abs(zuu), np.abs(zvv)
    if cost_kind == TV:
        fwd_u, bwd_u, fwd_v, bwd_v = finite_differences(g)
        cu = 0.5 * (np.abs(fwd_u) + np.abs(bwd_u))
        cv = 0.5 * (np.abs(fwd_v) + np.abs(bwd_v))
        cu[~np.isfinite(zuu)] = np.inf
        cv[~np.isfinite(zvv)] = np.inf
        return cu, cv
    raise ValueError(f"unknown cost kind {cost_kind!r}")


def init_bundle(g: DepthGrid, cost_kind: str = PD) -> InitBundle:
    valid = stencil_mask(g.mask)
    if not valid.any():
        raise EmptyGridError("no pixel has a fully valid 3x3 neighbourhood")
    zuu, zvv = second_derivatives(g)
    fwd_u, bwd_u, fwd_v, bwd_v = finite_differences(g)
    eta_u, eta_v = eta_field(zuu, zvv)

    zu = 0.5 * (1 + eta_u) * fwd_u + 0.5 * (1 - eta_u) * bwd_u
    zv = 0.5 * (1 + eta_v) * fwd_v + 0.5 * (1 - eta_v) * bwd_v

    cu, cv = cost_fields(g, zuu, zvv, cost_kind)
    e_u = np.min(_neighbour_stack(cu, "u"), axis=0)
    e_v = np.min(_neighbour_stack(cv, "v"), axis=0)

    h, w = zuu.shape
    s_u = np.zeros((h, w, 2), dtype=np.int8)
    s_v = np.zeros((h, w, 2), dtype=np.int8)
    s_u[..., 0] = eta_u
    s_v[..., 1] = eta_v

    # first-order run difference: fwd on forward runs, bwd on backward runs,
    # which is exactly the initial gradient either way
    t_u = zu.copy()
    t_v = zv.copy()

    for a in (zu, zv, t_u, t_v):
        a[~valid] = np.nan
    e_u[~valid] = np.inf
    e_v[~valid] = np.inf

    grad = GradientField(zu, zv, zuu, zvv, valid)
    ones = np.ones((h, w), dtype=np.int64)
    return InitBundle(grad, e_u, e_v, s_u, s_v, eta_u, eta_v, t_u, t_v, ones, ones.copy())
