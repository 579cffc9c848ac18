"""Depth-gradient updates: recursive polynomial interpolation along a run,
and gradient replacement from orthogonal/diagonal neighbours.

The recursive step works on one-sided difference runs.  A pixel carries its
gradient estimate ``g`` together with the run difference ``t``.  After ``k``
refinements ``t`` is the order-``k`` one-sided difference (taken in the run
direction and sign-folded so forward and backward runs share one formula).
One step combines the pixel's pair with its neighbour's ``t``:

    t' = t_p - t_n
    g' = g_p + t' / (k + 1)

Chained, this reproduces the derivative of the interpolating polynomial
through the ``k + 2`` run samples exactly (Newton forward/backward
difference form), with O(1) work per step.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .grid import Pixel, shifted

KEEP = "keep"
PARALLEL = "parallel"
ORTHOGONAL = "orthogonal"
DIAGONAL = "diagonal"


class DegenerateInputError(ValueError):
    pass


class ContractViolation(RuntimeError):
    pass


def rpi_step(g_p, t_p, t_n, k):
    """One recursive-interpolation refinement of the gradient at a pixel.

    ``g_p`` and ``t_p`` are the pixel's gradient and run difference after
    ``k`` refinements, ``t_n`` the run difference of the next pixel along the
    run at the same order.  Returns the refined ``(g, t)``.  Works on scalars
    and numpy arrays alike.
    """
    t_new = t_p - t_n
    return g_p + t_new / (k + 1), t_new


def rpi_chain(z_run, direction=1):
    """Derivative at ``z_run[0]`` of the polynomial through all samples.

    ``z_run[i]`` is the depth ``i`` pixels away from the target pixel in
    ``direction`` (+1 forward, -1 backward).  Starts from the two-point
    one-sided difference and applies :func:`rpi_step` sweep by sweep, the
    same way the DP refines a run of collinear pixels.
    """
    z = list(z_run)
    if len(z) < 2:
        raise DegenerateInputError("need at least two samples")
    # run-coordinate differences; the sign fold makes backward runs identical
    t = [direction * (z[i + 1] - z[i]) for i in range(len(z) - 1)]
    g = list(t)
    k = 1
    while len(t) > 1:
        nxt = [rpi_step(g[i], t[i], t[i + 1], k) for i in range(len(t) - 1)]
        g = [a for a, _ in nxt]
        t = [b for _, b in nxt]
        k += 1
    return g[0]


def divided_differences(x, y):
    n = len(x)
    if len(set(x)) != n:
        raise DegenerateInputError("duplicate abscissae")
    coef = list(y)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (x[i] - x[i - j])
    return coef


def newton_derivative_oracle(samples, u0):
    """Derivative at ``u0`` of the unique polynomial through ``samples``.

    Pure Python O(n^2) divided differences, so :class:`fractions.Fraction`
    inputs give exact results.  Only for tests and benchmarks.
    """
    x = [s[0] for s in samples]
    y = [s[1] for s in samples]
    if isinstance(u0, int) and all(isinstance(v, (int, Fraction)) for v in x + y):
        x = [Fraction(v) for v in x]
        y = [Fraction(v) for v in y]
    coef = divided_differences(x, y)
    n = len(x) - 1
    p = coef[n]
    dp = 0
    for j in range(n - 1, -1, -1):
        dp = p + (u0 - x[j]) * dp
        p = coef[j] + (u0 - x[j]) * p
    return dp


def state_class(offset, axis: str) -> str:
    du, dv = int(offset[0]), int(offset[1])
    par, orth = (du, dv) if axis == "u" else (dv, du)
    if par == 0 and orth == 0:
        return KEEP
    if orth == 0:
        return PARALLEL
    if par == 0:
        return ORTHOGONAL
    return DIAGONAL


def _along(axis):
    # gradient along the axis, and the one orthogonal to it
    return ("zu", "zv") if axis == "u" else ("zv", "zu")


def update_gradient_at(grad, t, n, state, p: Pixel, axis: str):
    """Updated ``(gradient, run difference, order)`` for one pixel and axis.

    ``grad`` holds the previous-iteration ``zu``/``zv``; ``t`` and ``n`` are
    the run-difference and order arrays for this axis; ``state`` the
    offset ``(du, dv)`` just selected for the pixel.
    """
    par_name, orth_name = _along(axis)
    gp = getattr(grad, par_name)
    go = getattr(grad, orth_name)
    h, w = gp.shape
    du, dv = int(state[0]), int(state[1])
    kind = state_class((du, dv), axis)
    u, v = p.u, p.v
    if kind == KEEP:
        return gp[v, u], t[v, u], n[v, u]
    qu, qv = u + du, v + dv
    if not (0 <= qu < w and 0 <= qv < h):
        raise ContractViolation(f"state {(du, dv)} at {p} points off the grid")
    if kind == PARALLEL:
        g_new, t_new = rpi_step(gp[v, u], t[v, u], t[qv, qu], n[v, u])
        return g_new, t_new, n[v, u] + 1
    if axis == "u":
        ou, ov = u, v + dv
        a, b = du, dv
    else:
        ou, ov = u + du, v
        a, b = dv, du
    if kind == ORTHOGONAL:
        g_new = gp[ov, ou]
    else:
        # loop closure round the unit square: the orthogonal-gradient change
        # between p and the diagonal pixel, signed by the two offsets
        g_new = gp[ov, ou] + (a * b) * (go[v, u] - go[qv, qu])
    return g_new, g_new, 1


def update_gradients(grad, t, n, states, axis: str):
    """Whole-grid :func:`update_gradient_at` for one axis.

    Returns new ``(gradient, t, n)`` arrays.  All reads come from the inputs
    (previous iteration), so the result does not depend on pixel order.
    """
    par_name, orth_name = _along(axis)
    gp = getattr(grad, par_name)
    go = getattr(grad, orth_name)
    du = states[..., 0].astype(np.int64)
    dv = states[..., 1].astype(np.int64)
    par, orth = (du, dv) if axis == "u" else (dv, du)

    g_new = gp.copy()
    t_new = t.copy()
    n_new = n.copy()

    for s in (-1, 1):
        off = (s, 0) if axis == "u" else (0, s)
        sel = (par == s) & (orth == 0)
        if sel.any():
            g_r, t_r = rpi_step(gp, t, shifted(t, *off, fill=np.nan), n)
            g_new[sel] = g_r[sel]
            t_new[sel] = t_r[sel]
            n_new[sel] = n[sel] + 1

    for b in (-1, 1):
        o_off = (0, b) if axis == "u" else (b, 0)
        g_orth = shifted(gp, *o_off, fill=np.nan)
        sel = (par == 0) & (orth == b)
        if sel.any():
            g_new[sel] = g_orth[sel]
            t_new[sel] = g_orth[sel]
            n_new[sel] = 1
        for a in (-1, 1):
            d_off = (a, b) if axis == "u" else (b, a)
            sel = (par == a) & (orth == b)
            if sel.any():
                g_d = g_orth + (a * b) * (go - shifted(go, *d_off, fill=np.nan))
                g_new[sel] = g_d[sel]
                t_new[sel] = g_d[sel]
                n_new[sel] = 1
    return g_new, t_new, n_new
