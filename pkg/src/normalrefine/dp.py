"""Multi-directional dynamic programming over per-pixel smoothness energies.

Every sweep reads the previous iteration's buffers and writes fresh ones
(Jacobi style), so results do not depend on traversal order.  Per pixel and
per axis the candidate energies are, in tie-break priority order:

* keep        the pixel's own energy
* parallel    cost of the collinear neighbour, gated by the indicator
* orthogonal  twice the out-and-back path cost through the orthogonal neighbour
* diagonal    orthogonal leg plus the diagonal pixel's parallel leg

The state is the offset of the winning neighbour, and the gradient is then
updated from it (see :mod:`normalrefine.refiner`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import DepthGrid, Pixel, shifted
from .initializer import COST_KINDS, PD, GradientField, cost_fields, init_bundle
from .refiner import DIAGONAL, KEEP, ORTHOGONAL, PARALLEL, update_gradients

INF = np.inf
DEFAULT_TIE_BREAK = (KEEP, PARALLEL, ORTHOGONAL, DIAGONAL)
ALL_STATES_ZERO = "all-states-zero"
CAP = "cap"


@dataclass(frozen=True)
class DpConfig:
    max_iterations: int = 3
    cost_kind: str = PD
    tie_break: tuple = DEFAULT_TIE_BREAK
    convergence: str = ALL_STATES_ZERO

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.cost_kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.cost_kind!r}")
        if sorted(self.tie_break) != sorted(DEFAULT_TIE_BREAK):
            raise ValueError(f"tie_break must order {DEFAULT_TIE_BREAK}")
        if self.convergence not in (ALL_STATES_ZERO, CAP):
            raise ValueError(f"unknown convergence mode {self.convergence!r}")


@dataclass
class DpFields:
    e_u: np.ndarray
    e_v: np.ndarray
    s_u: np.ndarray
    s_v: np.ndarray
    n_u: np.ndarray
    n_v: np.ndarray
    t_u: np.ndarray
    t_v: np.ndarray
    valid: np.ndarray = field(repr=False)

    def copy(self) -> "DpFields":
        return DpFields(*(getattr(self, f).copy() for f in
                          ("e_u", "e_v", "s_u", "s_v", "n_u", "n_v", "t_u", "t_v", "valid")))


@dataclass(frozen=True)
class AxisView:
    """Resolves parallel/orthogonal/diagonal roles for one axis."""

    axis: str

    def par(self, s):
        return (s, 0) if self.axis == "u" else (0, s)

    def orth(self, s):
        return (0, s) if self.axis == "u" else (s, 0)

    def diag(self, a, b):
        """Offset ``a`` steps along the axis and ``b`` across it."""
        return (a, b) if self.axis == "u" else (b, a)

    def energies(self, fields: DpFields):
        return (fields.e_u, fields.e_v) if self.axis == "u" else (fields.e_v, fields.e_u)

    def states(self, fields: DpFields):
        return fields.s_u if self.axis == "u" else fields.s_v

    def second(self, grad: GradientField):
        return (grad.zuu, grad.zvv) if self.axis == "u" else (grad.zvv, grad.zuu)


AXES = (AxisView("u"), AxisView("v"))


def fields_from_init(bundle) -> DpFields:
    return DpFields(bundle.e_u, bundle.e_v, bundle.s_u, bundle.s_v,
                    bundle.n_u, bundle.n_v, bundle.t_u, bundle.t_v,
                    bundle.grad.mask.copy())


def _at(a, u, v):
    h, w = a.shape[:2]
    if 0 <= u < w and 0 <= v < h:
        return a[v, u]
    return None


def indicator(fields: DpFields, grad: GradientField, p: Pixel, pp: Pixel, axis: str) -> float:
    """0 when the collinear extension to ``pp`` is curvature- and state-consistent."""
    view = AxisView(axis)
    zpp, _ = view.second(grad)
    s = view.states(fields)
    sp = _at(s, p.u, p.v)
    sq = _at(s, pp.u, pp.v)
    if sp is None or sq is None:
        return INF
    a = _at(zpp, p.u + int(sp[0]), p.v + int(sp[1]))
    b = _at(zpp, pp.u + int(sp[0]), pp.v + int(sp[1]))
    if a is None or b is None or not (np.isfinite(a) and np.isfinite(b)):
        return INF
    if a * b > 0 and tuple(sp) == tuple(sq):
        return 0.0
    return INF


def candidate_energies(fields: DpFields, grad: GradientField, p: Pixel, axis: str,
                       costs=None, tie_break=DEFAULT_TIE_BREAK):
    """Candidate set for one pixel and axis as ``[(class, offset, energy), ...]``.

    Entries come in tie-break priority order; within a class the negative
    offset comes first.  Off-grid candidates are omitted.  ``costs`` is the
    ``(cost_u, cost_v)`` pair; by default the absolute second differences.
    """
    view = AxisView(axis)
    if costs is None:
        costs = (np.abs(grad.zuu), np.abs(grad.zvv))
    c_par, c_orth = costs if axis == "u" else costs[::-1]
    e_par, e_orth = view.energies(fields)
    u, v = p.u, p.v
    groups = {KEEP: [(KEEP, (0, 0), float(e_par[v, u]))], PARALLEL: [], ORTHOGONAL: [], DIAGONAL: []}
    for s in (-1, 1):
        du, dv = view.par(s)
        c = _at(c_par, u + du, v + dv)
        if c is not None:
            ind = indicator(fields, grad, p, Pixel(u + du, v + dv), axis)
            groups[PARALLEL].append((PARALLEL, (du, dv), c + ind))
    for b in (-1, 1):
        ou, ov = view.orth(b)
        c = _at(c_orth, u + ou, v + ov)
        if c is None:
            continue
        leg = c + e_par[v + ov, u + ou]
        groups[ORTHOGONAL].append((ORTHOGONAL, (ou, ov), 2.0 * leg))
    for a in (-1, 1):
        for b in (-1, 1):
            du, dv = view.diag(a, b)
            ou, ov = view.orth(b)
            c_d = _at(c_par, u + du, v + dv)
            c_o = _at(c_orth, u + ou, v + ov)
            if c_d is None or c_o is None:
                continue
            energy = c_o + e_par[v + ov, u + ou] + c_d + e_orth[v + dv, u + du]
            groups[DIAGONAL].append((DIAGONAL, (du, dv), energy))
    out = []
    for cls in tie_break:
        out.extend(groups[cls])
    return out


def select_state(omega):
    """Minimum-energy candidate; the first in priority order wins ties."""
    if not omega:
        raise ValueError("empty candidate set")
    best = omega[0]
    for cand in omega[1:]:
        if cand[2] < best[2]:
            best = cand
    return best[2], best[1]


def _gather(a, du, dv, fill=np.nan):
    """``a`` sampled at per-pixel offsets ``(du, dv)`` (arrays); off-grid gives ``fill``."""
    h, w = a.shape
    vv, uu = np.mgrid[0:h, 0:w]
    qu = uu + du
    qv = vv + dv
    inside = (qu >= 0) & (qu < w) & (qv >= 0) & (qv < h)
    out = np.full(a.shape, fill, dtype=np.float64)
    out[inside] = a[qv[inside], qu[inside]]
    return out, inside


def _indicator_grid(view: AxisView, fields: DpFields, grad: GradientField, s_par: int):
    zpp, _ = view.second(grad)
    s = view.states(fields)
    su = s[..., 0].astype(np.int64)
    sv = s[..., 1].astype(np.int64)
    du, dv = view.par(s_par)
    a, _ = _gather(zpp, su, sv)
    b, _ = _gather(zpp, su + du, sv + dv)
    same = np.ones(su.shape, dtype=bool)
    for c in (0, 1):
        same &= shifted(s[..., c].astype(np.float64), du, dv, fill=np.nan) == s[..., c]
    ok = np.isfinite(a) & np.isfinite(b) & (a * b > 0) & same
    return np.where(ok, 0.0, INF)


def candidate_grid(view: AxisView, fields: DpFields, grad: GradientField, costs, tie_break=DEFAULT_TIE_BREAK):
    """Whole-grid candidate energies: ``(offsets, stack)`` in priority order."""
    c_par, c_orth = costs if view.axis == "u" else costs[::-1]
    e_par, e_orth = view.energies(fields)
    groups = {KEEP: [((0, 0), e_par)], PARALLEL: [], ORTHOGONAL: [], DIAGONAL: []}
    for s in (-1, 1):
        off = view.par(s)
        groups[PARALLEL].append((off, shifted(c_par, *off) + _indicator_grid(view, fields, grad, s)))
    for b in (-1, 1):
        off = view.orth(b)
        leg = shifted(c_orth, *off) + shifted(e_par, *off)
        groups[ORTHOGONAL].append((off, 2.0 * leg))
    for a in (-1, 1):
        for b in (-1, 1):
            off = view.diag(a, b)
            o_off = view.orth(b)
            energy = (shifted(c_orth, *o_off) + shifted(e_par, *o_off)
                      + shifted(c_par, *off) + shifted(e_orth, *off))
            groups[DIAGONAL].append((off, energy))
    offsets, stack = [], []
    for cls in tie_break:
        for off, energy in groups[cls]:
            offsets.append(off)
            stack.append(energy)
    return np.array(offsets, dtype=np.int8), np.stack(stack)


def _select_grid(view, fields, grad, costs, tie_break):
    offsets, stack = candidate_grid(view, fields, grad, costs, tie_break)
    # argmin returns the first minimum, i.e. the highest-priority candidate
    idx = np.argmin(stack, axis=0)
    energy = np.take_along_axis(stack, idx[None], axis=0)[0]
    states = offsets[idx]
    invalid = ~fields.valid
    energy[invalid] = INF
    states[invalid] = 0
    return energy, states


def _check_dims(fields: DpFields, grad: GradientField, depth: DepthGrid):
    shape = depth.values.shape
    for name, arr in (("e_u", fields.e_u), ("e_v", fields.e_v), ("zu", grad.zu), ("zv", grad.zv)):
        if arr.shape != shape:
            raise ValueError(f"dimension mismatch: {name} has shape {arr.shape}, depth {shape}")


def dp_iterate(fields: DpFields, grad: GradientField, depth: DepthGrid, cfg: DpConfig, costs=None):
    """One Jacobi sweep.  Returns ``(fields, grad, any_state_nonzero)``."""
    _check_dims(fields, grad, depth)
    if costs is None:
        costs = cost_fields(depth, grad.zuu, grad.zvv, cfg.cost_kind)
    e_u, s_u = _select_grid(AXES[0], fields, grad, costs, cfg.tie_break)
    e_v, s_v = _select_grid(AXES[1], fields, grad, costs, cfg.tie_break)

    zu, t_u, n_u = update_gradients(grad, fields.t_u, fields.n_u, s_u, "u")
    zv, t_v, n_v = update_gradients(grad, fields.t_v, fields.n_v, s_v, "v")

    valid = fields.valid
    moved = bool(np.any(s_u[valid] != 0) or np.any(s_v[valid] != 0))
    new_fields = DpFields(e_u, e_v, s_u, s_v, n_u, n_v, t_u, t_v, valid.copy())
    new_grad = replace(grad, zu=zu, zv=zv)
    return new_fields, new_grad, moved


def dp_sweeps(depth: DepthGrid, cfg: DpConfig):
    """Yield ``(k, fields, grad, moved)`` starting with the initial state at ``k = 0``."""
    bundle = init_bundle(depth, cfg.cost_kind)
    fields = fields_from_init(bundle)
    grad = bundle.grad
    costs = cost_fields(depth, grad.zuu, grad.zvv, cfg.cost_kind)
    yield 0, fields, grad, True
    for k in range(1, cfg.max_iterations + 1):
        fields, grad, moved = dp_iterate(fields, grad, depth, cfg, costs)
        yield k, fields, grad, moved
        if not moved and cfg.convergence == ALL_STATES_ZERO:
            return


def run_dp(depth: DepthGrid, cfg: DpConfig = DpConfig()) -> GradientField:
    grad = None
    for _, _, grad, _ in dp_sweeps(depth, cfg):
        pass
    return grad
