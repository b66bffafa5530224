import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tttk.eikonal import (
    SWEEP_ORDERINGS,
    ConvergenceError,
    SlownessError,
    SlownessField,
    outside_mask_apply,
    source_cell,
    sweep_solve,
)
from tttk.geometry import BoundaryRing, CartesianGrid
from tttk.measurement import ForwardConfig, forward_measurement


def distance_error(n, value=1.0, angle=0.0):
    g = CartesianGrid(n)
    m = outside_mask_apply(SlownessField.constant(g, value), 100.0 * value)
    u = sweep_solve(m, angle).values
    x, y = g.mesh()
    exact = value * np.hypot(x - np.cos(angle), y - np.sin(angle))
    inside = g.inside_disk()
    return np.max(np.abs(u - exact)[inside]), g.spacing, u


def radial(x, y):
    return 1.0 + 0.5 * (x * x + y * y)


@pytest.mark.parametrize("n", [80, 160])
def test_constant_slowness_is_distance(n):
    err, h, _ = distance_error(n)
    assert err <= 3 * h


def test_solution_scales_with_slowness():
    e1, h, u1 = distance_error(96, 1.0, angle=0.7)
    e2, _, u2 = distance_error(96, 2.0, angle=0.7)
    assert e2 <= 6 * h
    assert np.allclose(u2, 2 * u1, rtol=1e-12, atol=0)


def test_self_convergence_rate_radial():
    # nested grids share the coarse nodes: node i of n maps to node 2i of 2n - 1
    sols = []
    for n in (81, 161, 321):
        g = CartesianGrid(n)
        sols.append(sweep_solve(outside_mask_apply(SlownessField.from_function(g, radial))).values)
    g = CartesianGrid(81)
    x, y = g.mesh()
    mask = np.hypot(x, y) <= 0.95
    d1 = np.max(np.abs(sols[0] - sols[1][::2, ::2])[mask])
    d2 = np.max(np.abs(sols[1][::2, ::2] - sols[2][::4, ::4])[mask])
    rate = np.log2(d1 / d2)
    assert 0.7 <= rate <= 1.3


def test_outside_mask_values():
    g = CartesianGrid(21)
    m = outside_mask_apply(SlownessField.constant(g, 1.0), 100.0)
    assert m.values[-1, -1] == 100.0  # node (1, 1)
    assert m.values[10, 10] == 1.0  # node (0, 0)


def test_outside_mask_rejects_small_exterior():
    g = CartesianGrid(21)
    with pytest.raises(SlownessError):
        outside_mask_apply(SlownessField.constant(g, 1.0), 0.5)
    with pytest.raises(SlownessError):
        outside_mask_apply(SlownessField.constant(g, 1.0), 5.0)


def test_receiver_times_insensitive_to_exterior_slowness():
    grid, ring = CartesianGrid(64), BoundaryRing(16)
    m = SlownessField.from_function(grid, radial)
    a = forward_measurement(m, ForwardConfig(grid, ring, outside_slowness=100.0))
    b = forward_measurement(m, ForwardConfig(grid, ring, outside_slowness=200.0))
    assert np.max(np.abs(a - b)) < 1e-8


def test_rejects_nonpositive_slowness():
    g = CartesianGrid(16)
    with pytest.raises(SlownessError):
        SlownessField(np.zeros((16, 16)), g)
    with pytest.raises(SlownessError):
        SlownessField(np.ones((15, 15)), g)


def test_nonconvergence_reports_residual():
    g = CartesianGrid(64)
    m = outside_mask_apply(SlownessField.from_function(g, radial))
    with pytest.raises(ConvergenceError) as info:
        sweep_solve(m, 0.0, max_sweeps=4)
    assert info.value.residual > 0 and info.value.n_sweeps == 4


def test_source_nodes_fixed_and_nonnegative():
    g = CartesianGrid(40)
    m = outside_mask_apply(SlownessField.from_function(g, radial))
    res = sweep_solve(m, 1.1)
    u = res.values
    xs, ys = np.cos(1.1), np.sin(1.1)
    i, j = source_cell(g, (xs, ys))
    ms = m.values[i : i + 2, j : j + 2].min()
    for a in (i, i + 1):
        for b in (j, j + 1):
            assert u[a, b] == ms * np.hypot(g.nodes[a] - xs, g.nodes[b] - ys)
    assert np.all(u >= 0)


def smooth_medium(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-0.5, 0.5, size=(3, 2))
    a = rng.uniform(-0.4, 0.6, size=3)

    def f(x, y):
        out = np.ones_like(x)
        for (cx, cy), amp in zip(c, a):
            out = out + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 0.08)
        return out

    return f


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * np.pi))
def test_update_history_nonincreasing(seed, angle):
    g = CartesianGrid(48)
    m = outside_mask_apply(SlownessField.from_function(g, smooth_medium(seed)))
    hist = sweep_solve(m, angle).residuals
    finite = [r for r in hist if np.isfinite(r)]
    assert all(b <= a for a, b in zip(finite, finite[1:]))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * np.pi))
def test_causality_bounds(seed, angle):
    g = CartesianGrid(48)
    m = outside_mask_apply(SlownessField.from_function(g, smooth_medium(seed)))
    u = sweep_solve(m, angle).values
    x, y = g.mesh()
    inside = g.inside_disk()
    dist = np.hypot(x - np.cos(angle), y - np.sin(angle))
    lo, hi = m.values[inside].min(), m.values[inside].max()
    assert np.all(u[inside] >= lo * dist[inside] - 1e-12)
    assert np.all(u[inside] <= hi * (np.sqrt(2) * dist[inside] + 2 * g.spacing))


def test_sweep_order_permutation_invariant():
    g = CartesianGrid(64)
    m = outside_mask_apply(SlownessField.from_function(g, smooth_medium(3)))
    a = sweep_solve(m, 2.0).values
    b = sweep_solve(m, 2.0, orderings=SWEEP_ORDERINGS[::-1]).values
    c = sweep_solve(m, 2.0, orderings=SWEEP_ORDERINGS[1:] + SWEEP_ORDERINGS[:1]).values
    assert np.max(np.abs(a - b)) < 1e-8
    assert np.max(np.abs(a - c)) < 1e-8


def test_solve_time_n160():
    import time

    g = CartesianGrid(160)
    m = outside_mask_apply(SlownessField.from_function(g, radial))
    sweep_solve(m)  # compile
    t0 = time.perf_counter()
    sweep_solve(m, 0.3)
    assert time.perf_counter() - t0 < 5.0
