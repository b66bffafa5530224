import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tttk.datagen import DatasetSpec, EllipseSet, sample_ellipses, sample_rng
from tttk.eikonal import ConvergenceError, SlownessField
from tttk.geometry import BoundaryRing, CartesianGrid, PolarGrid, rotate_polar
from tttk.measurement import (
    ForwardConfig,
    Measurement,
    MeasurementError,
    PolarPerturbation,
    add_noise,
    background_traveltimes,
    differential,
    forward_measurement,
    measure,
    shear,
    unshear,
)


def chord_lengths(ring):
    a = ring.angles
    return 2 * np.abs(np.sin((a[None, :] - a[:, None]) / 2))


@pytest.mark.parametrize("n", [64, 96])
def test_constant_medium_gives_chord_lengths(n):
    grid, ring = CartesianGrid(n), BoundaryRing(32)
    U = forward_measurement(SlownessField.constant(grid), ForwardConfig(grid, ring))
    assert np.max(np.abs(U - chord_lengths(ring))) <= 3 * grid.spacing
    # receiver at the source: convex combination of source-cell values m |x - x_s| <= sqrt(2) h
    assert np.max(np.abs(np.diag(U))) <= np.sqrt(2) * grid.spacing


def test_constant_medium_source_frame_path():
    grid, ring = CartesianGrid(96), BoundaryRing(32)
    U = forward_measurement(None, ForwardConfig(grid, ring))
    assert np.max(np.abs(U - chord_lengths(ring))) <= 3 * grid.spacing


def test_reciprocity_constant_medium():
    grid, ring = CartesianGrid(96), BoundaryRing(32)
    cfg = ForwardConfig(grid, ring)
    U = forward_measurement(SlownessField.constant(grid), cfg)
    # reciprocity holds up to the first-order discretisation error of the two solves
    assert np.max(np.abs(U - U.T)) <= 2 * cfg.tol + 2 * grid.spacing


def test_zero_perturbation_gives_zero_data_exactly():
    cfg = ForwardConfig(CartesianGrid(48), BoundaryRing(16))
    meas = measure(None, cfg)
    assert np.all(meas.d == 0.0)
    pg = PolarGrid(16, 8)
    assert np.all(measure(PolarPerturbation(np.zeros(pg.shape), pg), cfg).d == 0.0)


def test_negative_inclusions_give_nonpositive_data():
    cfg = ForwardConfig(CartesianGrid(64), BoundaryRing(32))
    u0 = background_traveltimes(cfg)
    spec = DatasetSpec(kind="negative", n_e=2, n_samples=4)
    for i in range(3):
        ell = sample_ellipses(spec, sample_rng(5, i))
        d = measure(EllipseSet(ell), cfg, u0).d
        assert d.max() <= 10 * cfg.tol
        assert d.min() < 0


def test_differential_basics():
    rng = np.random.default_rng(0)
    u, u0, v = rng.normal(size=(3, 5, 5))
    assert np.all(differential(u0, u0) == 0)
    assert np.allclose(differential(u, u0) + differential(u0, v), differential(u, v), atol=1e-15)
    with pytest.raises(MeasurementError):
        differential(u, u0[:4])


def test_shear_examples():
    D = 10 * np.arange(4)[:, None] + np.arange(4)[None, :]
    S = shear(D)
    assert S[1, 2] == 13
    assert np.array_equal(S[:, 0], np.diag(D))
    assert np.array_equal(unshear(S), D)
    with pytest.raises(MeasurementError):
        shear(np.zeros((3, 4)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_shear_bijection(n, seed):
    D = np.random.default_rng(seed).normal(size=(2, n, n))
    assert np.array_equal(unshear(shear(D)), D)
    assert np.array_equal(shear(unshear(D)), D)


def test_noise_zero_delta_identity():
    rng = np.random.default_rng(0)
    m = Measurement(rng.normal(size=(8, 8)), rng.uniform(size=(8, 8)))
    out = add_noise(m, 0.0, np.random.default_rng(1))
    assert np.array_equal(out.d, m.d)
    with pytest.raises(ValueError):
        add_noise(m, -0.1, np.random.default_rng(1))


def test_noise_reproducible_and_variance():
    ring = BoundaryRing(160)
    u0 = shear(chord_lengths(ring))
    d = -0.05 * np.random.default_rng(3).uniform(size=u0.shape)
    m = Measurement(d, u0)
    a = add_noise(m, 0.02, np.random.default_rng(11))
    b = add_noise(m, 0.02, np.random.default_rng(11))
    assert np.array_equal(a.d, b.d)
    diff = a.d - d
    expected = 0.02**2 * np.mean((d + u0) ** 2)
    assert abs(diff.var() / expected - 1) < 0.1


def test_rotation_equivariance_pipeline():
    pg = PolarGrid(64, 32)
    cfg = ForwardConfig(CartesianGrid(64), BoundaryRing(64))
    t, r = pg.mesh()
    x, y = r * np.cos(t), r * np.sin(t)
    field = -0.3 * np.exp(-((x - 0.3) ** 2 + (y - 0.1) ** 2) / 0.02) + 0.2 * np.exp(-((x + 0.2) ** 2 + (y + 0.4) ** 2) / 0.03)
    u0 = background_traveltimes(cfg)
    k = pg.n_theta // 8
    d = measure(PolarPerturbation(field, pg), cfg, u0).d
    d_rot = measure(PolarPerturbation(rotate_polar(field, k), pg), cfg, u0).d
    assert np.max(np.abs(d_rot - np.roll(d, k, axis=0))) <= 5 * cfg.tol


def test_nonconvergence_names_source():
    cfg = ForwardConfig(CartesianGrid(48), BoundaryRing(8), max_sweeps=4)
    with pytest.raises(ConvergenceError, match="source 0"):
        measure(lambda x, y: 0.3 * np.exp(-(x * x + y * y) / 0.1), cfg)
