import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ramp_grid, row_grid
from normalrefine.dp import (
    AXES, CAP, DIAGONAL, KEEP, ORTHOGONAL, PARALLEL, DpConfig, candidate_energies, candidate_grid,
    dp_iterate, dp_sweeps, fields_from_init, indicator, run_dp, select_state,
)
from normalrefine.grid import DepthGrid, Pixel, invert_depth
from normalrefine.initializer import PD, TV, cost_fields, init_bundle
from normalrefine.scenes import SceneSpec, render


def _start(g, cost_kind=PD):
    b = init_bundle(g, cost_kind)
    return fields_from_init(b), b.grad


def test_indicator_cases():
    g = row_grid(1.0 + np.arange(7.0) ** 2)
    fields, grad = _start(g)
    # convex everywhere and all states equal (centre)
    assert indicator(fields, grad, Pixel(3, 2), Pixel(4, 2), "u") == 0.0
    grad.zuu[2, 4] = 2.0  # opposite sign to the -2 at the pixel
    assert indicator(fields, grad, Pixel(3, 2), Pixel(4, 2), "u") == np.inf
    grad.zuu[2, 4] = 0.0  # flat probe: product is not > 0
    assert indicator(fields, grad, Pixel(3, 2), Pixel(4, 2), "u") == np.inf


def test_indicator_needs_matching_states():
    fields, grad = _start(row_grid(1.0 + np.arange(7.0) ** 2))
    fields.s_u[2, 4] = (1, 0)
    assert indicator(fields, grad, Pixel(3, 2), Pixel(4, 2), "u") == np.inf


def test_indicator_off_grid():
    fields, grad = _start(row_grid(1.0 + np.arange(5.0) ** 2))
    assert indicator(fields, grad, Pixel(4, 2), Pixel(5, 2), "u") == np.inf


def test_flat_grid_candidates():
    fields, grad = _start(DepthGrid(np.full((5, 5), 3.0)))
    omega = candidate_energies(fields, grad, Pixel(2, 2), "u")
    assert omega[0] == (KEEP, (0, 0), 0.0)
    assert [e for c, _, e in omega if c == ORTHOGONAL] == [0.0, 0.0]
    assert select_state(omega) == (0.0, (0, 0))


def test_step_row_parallel_costs():
    fields, grad = _start(row_grid([1.0, 1.0, 1.0, 5.0, 5.0, 5.0], rows=3))
    omega = {off: e for c, off, e in candidate_energies(fields, grad, Pixel(1, 1), "u") if c == PARALLEL}
    # |zuu| is 4 just left of the jump, 0 further away; indicators are inf on the flat side
    assert omega[(1, 0)] >= 4.0
    assert abs(grad.zuu[1, 0]) == 0


def test_crease_prefers_orthogonal():
    # a vertical crease at u = 3; E_u at the crease pixel is forced up as if the run had
    # already crossed it, so only the orthogonal neighbours offer a clean path
    u = np.arange(7.0)
    z = np.tile(5.0 + np.abs(u - 3), (7, 1))
    fields, grad = _start(DepthGrid(z))
    fields.e_u[3, 3] = 2.0
    omega = candidate_energies(fields, grad, Pixel(3, 3), "u")
    orth = [e for c, _, e in omega if c == ORTHOGONAL]
    par = [e for c, _, e in omega if c == PARALLEL]
    assert orth == [0.0, 0.0]
    assert min(par) > 0
    # ties inside a class go to the negative offset
    assert select_state(omega) == (0.0, (0, -1))


def test_select_state_examples():
    assert select_state([(KEEP, (0, 0), 0.0), (PARALLEL, (1, 0), 3.0), (ORTHOGONAL, (0, 1), 0.0)]) == (0.0, (0, 0))
    assert select_state([(KEEP, (0, 0), 5.0), (PARALLEL, (-1, 0), 1.0), (PARALLEL, (1, 0), 2.0)]) == (1.0, (-1, 0))
    assert select_state([(KEEP, (0, 0), 2.0), (DIAGONAL, (-1, -1), 1.0), (DIAGONAL, (1, 1), 1.0)]) == (1.0, (-1, -1))
    with pytest.raises(ValueError):
        select_state([])


def test_flat_grid_is_fixed_point():
    g = DepthGrid(np.full((6, 7), 2.0))
    fields, grad = _start(g)
    f2, g2, moved = dp_iterate(fields, grad, g, DpConfig())
    assert not moved
    np.testing.assert_array_equal(f2.e_u, fields.e_u)
    np.testing.assert_array_equal(g2.zu, grad.zu)


def test_tilted_plane_inverse_depth_no_moves():
    sample = render(SceneSpec("tilted-plane"))
    inv = invert_depth(sample.depth)
    fields, grad = _start(inv)
    f2, g2, moved = dp_iterate(fields, grad, inv, DpConfig())
    assert not moved
    np.testing.assert_array_equal(g2.zu, grad.zu)
    ru, _ = sample.intrinsics.rays(inv.width, inv.height)
    # 1/z = (nx ru + ny rv + 1) / d, so d(1/z)/du = nx / (fu d)
    want = 0.4 / (120.0 * 2.0)
    assert np.nanmax(np.abs(g2.zu[1:-1, 1:-1] - want)) < 1e-12


def test_step_edge_moves_in_first_sweep():
    sample = render(SceneSpec("step-edge"))
    fields, grad = _start(sample.depth)
    f2, _, _ = dp_iterate(fields, grad, sample.depth, DpConfig())
    band = sample.band(1)
    changed = (np.any(f2.s_u != fields.s_u, axis=-1) | np.any(f2.s_v != fields.s_v, axis=-1)) & band
    assert changed.any()


def test_cap_zero_returns_initial_gradients():
    g = ramp_grid(a=0.5, b=-0.25)
    b = init_bundle(g)
    out = run_dp(g, DpConfig(max_iterations=0))
    np.testing.assert_array_equal(out.zu, b.grad.zu)
    np.testing.assert_array_equal(out.zv, b.grad.zv)


def test_dimension_mismatch():
    fields, grad = _start(DepthGrid(np.full((4, 4), 1.0)))
    with pytest.raises(ValueError, match="dimension"):
        dp_iterate(fields, grad, DepthGrid(np.full((4, 5), 1.0)), DpConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        DpConfig(max_iterations=-1)
    with pytest.raises(ValueError):
        DpConfig(cost_kind="l1")
    with pytest.raises(ValueError):
        DpConfig(tie_break=(KEEP, KEEP, ORTHOGONAL, DIAGONAL))


def test_cap_mode_runs_all_sweeps():
    g = DepthGrid(np.full((5, 5), 1.0))
    ks = [k for k, *_ in dp_sweeps(g, DpConfig(max_iterations=4, convergence=CAP))]
    assert ks == [0, 1, 2, 3, 4]
    ks = [k for k, *_ in dp_sweeps(g, DpConfig(max_iterations=4))]
    assert ks == [0, 1]


def _per_pixel_sweep(fields, grad, costs):
    h, w = grad.zu.shape
    out = {}
    for view in AXES:
        e = np.empty((h, w))
        s = np.empty((h, w, 2), int)
        for v in range(h):
            for u in range(w):
                if not fields.valid[v, u]:
                    e[v, u], s[v, u] = np.inf, (0, 0)
                    continue
                omega = candidate_energies(fields, grad, Pixel(u, v), view.axis, costs)
                e[v, u], s[v, u] = select_state(omega)
        out[view.axis] = (e, s)
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([PD, TV]))
def test_vectorised_sweep_matches_per_pixel(seed, cost_kind):
    rng = np.random.default_rng(seed)
    h, w = 7, 8
    z = 3.0 + np.cumsum(rng.normal(0, 0.2, (h, w)), axis=1) + np.where(np.arange(w) > 4, 1.0, 0.0)
    if rng.random() < 0.5:
        z[rng.integers(h), rng.integers(w)] = np.nan
    g = DepthGrid(z)
    fields, grad = _start(g, cost_kind)
    costs = cost_fields(g, grad.zuu, grad.zvv, cost_kind)
    cfg = DpConfig(cost_kind=cost_kind)
    for _ in range(3):
        want = _per_pixel_sweep(fields, grad, costs)
        new_fields, new_grad, _ = dp_iterate(fields, grad, g, cfg, costs)
        np.testing.assert_array_equal(new_fields.e_u, want["u"][0])
        np.testing.assert_array_equal(new_fields.e_v, want["v"][0])
        np.testing.assert_array_equal(new_fields.s_u, want["u"][1])
        np.testing.assert_array_equal(new_fields.s_v, want["v"][1])
        fields, grad = new_fields, new_grad


def test_candidate_grid_order():
    fields, grad = _start(DepthGrid(np.full((4, 4), 1.0)))
    offsets, stack = candidate_grid(AXES[0], fields, grad, cost_fields(DepthGrid(np.full((4, 4), 1.0)),
                                                                      grad.zuu, grad.zvv))
    assert offsets.tolist() == [[0, 0], [-1, 0], [1, 0], [0, -1], [0, 1],
                                [-1, -1], [-1, 1], [1, -1], [1, 1]]
    assert stack.shape == (9, 4, 4)
