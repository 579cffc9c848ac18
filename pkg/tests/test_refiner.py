from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normalrefine.grid import Pixel
from normalrefine.initializer import GradientField
from normalrefine.refiner import (
    DIAGONAL, KEEP, ORTHOGONAL, PARALLEL, ContractViolation, DegenerateInputError,
    newton_derivative_oracle, rpi_chain, rpi_step, state_class, update_gradient_at, update_gradients,
)


def test_rpi_step_parabola():
    # z = u^2 sampled at 0, 1, 2: forward differences 1 and 3
    g, t = rpi_step(1.0, 1.0, 3.0, 1)
    assert g == 0.0
    assert t == -2.0


@pytest.mark.parametrize("k", [1, 2, 5])
def test_rpi_step_linear_and_constant_are_fixed(k):
    assert rpi_step(1.0, 0.0, 0.0, k)[0] == 1.0
    assert rpi_step(0.0, 0.0, 0.0, k)[0] == 0.0


def test_oracle_examples():
    assert newton_derivative_oracle([(0, 2), (1, 5), (3, 11)], 7) == 3
    assert newton_derivative_oracle([(0, 0), (1, 1), (2, 4)], 0) == 0
    assert newton_derivative_oracle([(0, 0), (1, 1), (2, 8), (3, 27)], 0) == 0
    assert newton_derivative_oracle([(0, 0), (1, 1), (2, 8), (3, 27)], 2) == 12


def test_oracle_is_exact_on_integers():
    out = newton_derivative_oracle([(0, 1), (1, 2), (2, 5), (3, 7)], 0)
    assert isinstance(out, Fraction)


def test_oracle_rejects_duplicates():
    with pytest.raises(DegenerateInputError):
        newton_derivative_oracle([(0, 1), (0, 2)], 0)


@settings(max_examples=200)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=7), st.integers(2, 9), st.sampled_from([1, -1]))
def test_chain_matches_oracle(coefs, n, direction):
    poly = np.polynomial.Polynomial(coefs)
    us = [direction * i for i in range(n)]
    zs = [float(poly(u)) for u in us]
    got = rpi_chain(zs, direction)
    want = float(newton_derivative_oracle(list(zip(us, [int(round(z)) for z in zs])), 0))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_chain_needs_two_samples():
    with pytest.raises(DegenerateInputError):
        rpi_chain([1.0])


@pytest.mark.parametrize("offset,axis,cls", [
    ((0, 0), "u", KEEP), ((1, 0), "u", PARALLEL), ((0, -1), "u", ORTHOGONAL), ((1, 1), "u", DIAGONAL),
    ((0, 1), "v", PARALLEL), ((-1, 0), "v", ORTHOGONAL), ((-1, 1), "v", DIAGONAL),
])
def test_state_class(offset, axis, cls):
    assert state_class(offset, axis) == cls


def _field(zu, zv):
    z = np.zeros_like(zu)
    return GradientField(zu, zv, z, z.copy(), np.ones(zu.shape, bool))


def test_keep_leaves_value():
    zu = np.arange(9.0).reshape(3, 3)
    g = _field(zu, zu * 2)
    ones = np.ones((3, 3))
    assert update_gradient_at(g, zu, ones, (0, 0), Pixel(1, 1), "u") == (4.0, 4.0, 1.0)


def test_orthogonal_copies_neighbour():
    zu = np.array([[0.5, 0.5, 0.5], [9.0, 9.0, 9.0], [0.5, 0.5, 0.5]])
    g = _field(zu, np.zeros((3, 3)))
    val, t, n = update_gradient_at(g, zu, np.full((3, 3), 2), (0, 1), Pixel(1, 1), "u")
    assert (val, t, n) == (0.5, 0.5, 1)


def test_diagonal_on_constant_gradient_is_fixed():
    g = _field(np.full((3, 3), 0.3), np.full((3, 3), -0.7))
    for diag in [(1, 1), (-1, 1), (1, -1), (-1, -1)]:
        assert update_gradient_at(g, g.zu, np.ones((3, 3)), diag, Pixel(1, 1), "u")[0] == pytest.approx(0.3)
        assert update_gradient_at(g, g.zv, np.ones((3, 3)), diag, Pixel(1, 1), "v")[0] == pytest.approx(-0.7)


@pytest.mark.parametrize("diag", [(1, 1), (-1, 1), (1, -1), (-1, -1)])
def test_diagonal_exact_on_bilinear(diag):
    # z = u v: zu = v, zv = u; the loop closure must recover zu exactly
    v, u = np.mgrid[0:3, 0:3].astype(float)
    g = _field(v.copy(), u.copy())
    val = update_gradient_at(g, g.zu, np.ones((3, 3)), diag, Pixel(1, 1), "u")[0]
    assert val == 1.0
    val = update_gradient_at(g, g.zv, np.ones((3, 3)), diag, Pixel(1, 1), "v")[0]
    assert val == 1.0


def test_off_grid_state_is_a_contract_violation():
    g = _field(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ContractViolation):
        update_gradient_at(g, g.zu, np.ones((2, 2)), (-1, 0), Pixel(0, 0), "u")


@settings(max_examples=60)
@given(st.integers(0, 2 ** 31), st.sampled_from(["u", "v"]))
def test_vectorised_update_matches_per_pixel(seed, axis):
    rng = np.random.default_rng(seed)
    h, w = 5, 6
    g = _field(rng.normal(size=(h, w)), rng.normal(size=(h, w)))
    t = rng.normal(size=(h, w))
    n = rng.integers(1, 4, (h, w))
    states = np.zeros((h, w, 2), np.int8)
    for v in range(h):
        for u in range(w):
            du, dv = rng.integers(-1, 2, 2)
            if 0 <= u + du < w and 0 <= v + dv < h:
                states[v, u] = (du, dv)
    G, T, N = update_gradients(g, t, n, states, axis)
    for v in range(h):
        for u in range(w):
            want = update_gradient_at(g, t, n, states[v, u], Pixel(u, v), axis)
            assert G[v, u] == pytest.approx(want[0], abs=1e-12)
            assert T[v, u] == pytest.approx(want[1], abs=1e-12)
            assert N[v, u] == want[2]
