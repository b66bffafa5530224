import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tttk.datagen import (
    DatasetError,
    DatasetSpec,
    Ellipse,
    EllipseSet,
    SamplingError,
    generate_dataset,
    load_dataset,
    manifest,
    rasterize,
    sample_ellipses,
    sample_rng,
    save_dataset,
    with_noise,
)
from tttk.geometry import BoundaryRing, CartesianGrid, PolarGrid
from tttk.io import read_json, write_json
from tttk.measurement import ForwardConfig, measure


@pytest.fixture(scope="module")
def small():
    spec = DatasetSpec(kind="negative", n_e=2, n_samples=6, seed=3, n_train=4)
    cfg = ForwardConfig(CartesianGrid(48), BoundaryRing(16))
    return generate_dataset(spec, cfg, PolarGrid(16, 8))


def test_sampling_deterministic():
    spec = DatasetSpec(kind="negative", n_e=2, seed=7)
    assert sample_ellipses(spec, sample_rng(7, 0)) == sample_ellipses(spec, sample_rng(7, 0))
    assert sample_ellipses(spec, sample_rng(7, 0)) != sample_ellipses(spec, sample_rng(7, 1))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["negative", "positive", "mixture"]), st.integers(1, 4), st.integers(0, 2**31))
def test_containment_and_disjointness(kind, n_e, seed):
    ell = sample_ellipses(DatasetSpec(kind=kind, n_e=n_e), np.random.default_rng(seed))
    assert len(ell) == n_e
    for e in ell:
        p = e.boundary()
        assert np.hypot(p[:, 0], p[:, 1]).max() <= 1.0
        assert e.amplitude in (-0.5, 2.0)
    for i in range(n_e):
        for j in range(i + 1, n_e):
            assert not ell[i].intersects(ell[j])


def test_width_distribution_mean():
    spec = DatasetSpec(kind="negative", n_e=1)
    widths = [2 * sample_ellipses(spec, sample_rng(0, i))[0].a for i in range(1000)]
    heights = [2 * sample_ellipses(spec, sample_rng(0, i))[0].b for i in range(1000)]
    assert abs(np.mean(widths) - 0.15) <= 0.01
    assert 0.1 <= min(widths) and max(widths) <= 0.2
    assert 0.05 <= min(heights) and max(heights) <= 0.1


def test_centres_uniform_by_area():
    spec = DatasetSpec(kind="negative", n_e=1)
    r = np.array([np.hypot(e.cx, e.cy) for i in range(2000) for e in sample_ellipses(spec, sample_rng(1, i))])
    # containment trims centres to |c| < 1 - b for some b in [0.025, 0.1]
    lo, hi = 0.25, 0.25 / 0.9**2
    assert lo - 0.02 <= np.mean(r <= 0.5) <= hi + 0.02


def test_mixture_uses_both_kinds():
    spec = DatasetSpec(kind="mixture", n_e=1)
    amps = [sample_ellipses(spec, sample_rng(2, i))[0].amplitude for i in range(400)]
    assert abs(np.mean(np.array(amps) == 2.0) - 0.5) < 0.1


def test_sampling_failure_advises():
    spec = DatasetSpec(kind="positive", n_e=200, max_attempts=50)
    with pytest.raises(SamplingError, match="fewer or smaller"):
        sample_ellipses(spec, np.random.default_rng(0))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        DatasetSpec(n_e=0)
    with pytest.raises(ValueError):
        DatasetSpec(delta=-0.1)
    with pytest.raises(ValueError):
        DatasetSpec(kind="stripes")
    with pytest.raises(ValueError):
        Ellipse(0, 0, 0.1, 0.2, 0, -0.5)
    with pytest.raises(ValueError):
        Ellipse(0, 0, 0.2, 0.1, 0, -1.0)


def test_rasterize_examples():
    pg = PolarGrid(64, 32)
    assert np.all(rasterize([], pg) == 0)
    f = rasterize([Ellipse(0, 0, 0.3, 0.2, 0, -0.5)], pg)
    i = int(np.argmin(np.abs(pg.rho - 0.1)))
    j = int(np.argmin(np.abs(pg.rho - 0.9)))
    assert f[0, i] == -0.5
    assert f[0, j] == 0


@pytest.mark.parametrize("ell", [
    Ellipse(0.0, 0.0, 0.3, 0.2, 0.0, -0.5),
    Ellipse(0.3, -0.2, 0.25, 0.1, 1.1, 2.0),
    Ellipse(-0.5, 0.4, 0.15, 0.12, 2.5, -0.5),
])
def test_rasterized_integral_matches_area(ell):
    pg = PolarGrid(64, 32)
    w = pg.cell_areas()
    integral = np.sum(rasterize([ell], pg) * w)
    exact = ell.amplitude * np.pi * ell.a * ell.b
    assert abs(integral - exact) <= 2 * abs(ell.amplitude) * w.max()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["negative", "positive"]), st.integers(0, 2**31))
def test_rasterized_area_error_within_boundary_band(kind, seed):
    # point sampling can only misclassify cells straddling the boundary
    pg = PolarGrid(64, 32)
    w = pg.cell_areas()
    e = sample_ellipses(DatasetSpec(kind=kind, n_e=1), np.random.default_rng(seed))[0]
    p = e.boundary()
    perimeter = np.sum(np.hypot(*(np.roll(p, -1, axis=0) - p).T))
    diam = np.hypot(pg.dtheta, pg.drho)
    area = np.sum((rasterize([e], pg) != 0) * w)
    assert abs(area - np.pi * e.a * e.b) <= perimeter * diam


def test_rasterize_sums_disjoint_ellipses():
    pg = PolarGrid(32, 16)
    a = Ellipse(0.4, 0.0, 0.2, 0.1, 0.0, -0.5)
    b = Ellipse(-0.4, 0.0, 0.2, 0.1, 0.0, 2.0)
    assert np.array_equal(rasterize([a, b], pg), rasterize([a], pg) + rasterize([b], pg))


def test_zero_perturbation_gives_zero_data():
    spec = DatasetSpec(n_samples=8, seed=1)
    ds = generate_dataset(spec, ForwardConfig(CartesianGrid(32), BoundaryRing(8)), PolarGrid(8, 4), zero_perturbation=True)
    assert np.all(ds.d == 0.0)
    assert np.all(ds.m == 0.0)


def test_negative_samples_have_nonpositive_mean(small):
    for d in small.d:
        assert d.mean() <= small.forward.tol


def test_resimulation_reproduces_stored_data(small):
    for i in (0, 5):
        d = measure(EllipseSet(small.ellipses[i]), small.forward, small.u0).d
        assert np.max(np.abs(d - small.d[i])) <= small.forward.tol


def test_labels_match_stored_ellipses(small):
    for i in range(len(small.m)):
        assert np.array_equal(small.m[i], rasterize(small.ellipses[i], small.pg))


def test_split_sizes(small):
    (xtr, ytr), (xte, yte) = small.split()
    assert len(xtr) == len(ytr) == 4
    assert len(xte) == len(yte) == 2


def test_byte_identical_reruns(small, tmp_path):
    again = generate_dataset(small.spec, small.forward, small.pg)
    a = save_dataset(small, tmp_path / "a")
    b = save_dataset(again, tmp_path / "b")
    for name in ("d.tttk", "m.tttk", "u0.tttk", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_save_load_round_trip(small, tmp_path):
    back = load_dataset(save_dataset(small, tmp_path / "ds"))
    assert np.array_equal(back.d, small.d)
    assert np.array_equal(back.m, small.m)
    assert np.array_equal(back.u0, small.u0)
    assert back.ellipses == small.ellipses
    assert back.spec == small.spec
    assert back.pg == small.pg


def test_manifest_contents(small):
    man = manifest(small)
    assert man["amplitudes"] == [-0.5]
    assert man["split"] == {"n_train": 4, "n_test": 2}
    assert man["spec"]["seed"] == 3
    assert manifest(generate_dataset(DatasetSpec(kind="mixture", n_e=1, n_samples=1), small.forward, small.pg))["amplitudes"] == [-0.5, 2.0]


def test_manifest_mismatch_rejected(small, tmp_path):
    out = save_dataset(small, tmp_path / "ds")
    man = read_json(out / "manifest.json")
    man["spec"]["n_samples"] = 7
    write_json(out / "manifest.json", man)
    with pytest.raises(DatasetError, match="manifest"):
        load_dataset(out)


def test_noise_is_per_sample_and_reproducible(small):
    a = with_noise(small, 0.02)
    b = with_noise(small, 0.02)
    assert np.array_equal(a.d, b.d)
    assert not np.array_equal(a.d, small.d)
    assert a.spec.delta == 0.02
    assert np.array_equal(with_noise(small, 0.0).d, small.d)
    with pytest.raises(ValueError):
        with_noise(a, 0.1)


def test_sample_failure_names_sample():
    spec = DatasetSpec(kind="positive", n_e=200, n_samples=2, max_attempts=5)
    with pytest.raises(DatasetError, match="sample 0"):
        generate_dataset(spec, ForwardConfig(CartesianGrid(32), BoundaryRing(8)), PolarGrid(8, 4))
