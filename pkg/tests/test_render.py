import numpy as np
import pytest

from tttk import render
from tttk.geometry import PolarGrid


def test_gray_maps_range_and_constant():
    f = np.array([[0.0, 1.0], [2.0, 4.0]])
    img = render.gray(f)
    assert img.min() == 0 and img.max() == 255
    assert np.all(render.gray(np.full((3, 3), 7.0)) == 128)


def test_image_orientation():
    # field[i, j] with x = nodes[i]: +x to the right, +y up
    f = np.zeros((4, 4))
    f[3, 3] = 1.0  # x max, y max
    img = render.gray(f)
    assert img[0, 3] == 255


def test_signed_gray_zero_is_mid():
    assert np.all(render.signed_gray(np.zeros((5, 5))) == 128)
    img = render.signed_gray(np.array([[-2.0, 0.0, 2.0]]))  # y increases upwards
    assert img[:, 0].tolist() == [255, 128, 1]


def test_diverging_endpoints():
    img = render.diverging(np.array([[-1.0], [0.0], [1.0]]))
    assert img.shape == (1, 3, 3)
    assert img[0, 0].tolist() == [33, 102, 172]
    assert img[0, 1].tolist() == [247, 247, 247]
    assert img[0, 2].tolist() == [178, 24, 43]


def test_side_by_side():
    a = np.zeros((4, 3), dtype=np.uint8)
    out = render.side_by_side([a, a + 9], gap=2)
    assert out.shape == (4, 8)
    assert np.all(out[:, 3:5] == 255) and np.all(out[:, 5:] == 9)
    with pytest.raises(ValueError):
        render.side_by_side([a, np.zeros((5, 3), dtype=np.uint8)])


@pytest.mark.parametrize("suffix", [".png", ".pgm", ".ppm"])
def test_save_and_load_round_trip(tmp_path, suffix):
    img = np.arange(48, dtype=np.uint8).reshape(6, 8)
    if suffix == ".ppm":
        img = np.stack([img] * 3, axis=-1)
    path = render.save_image(tmp_path / f"x{suffix}", img)
    assert np.array_equal(render.load_image(path), img)


def test_render_signed_sidecar(tmp_path):
    pg = PolarGrid(16, 8)
    f = render.polar_to_image_field(-0.5 * np.ones(pg.shape), pg, 32)
    g = np.zeros_like(f)
    path = render.render_signed(tmp_path / "c.png", [f, g])
    meta = render.read_sidecar(path)
    assert meta == {"colormap": "blue-white-red", "vmin": -0.5, "vmax": 0.5, "panels": 2}
    assert render.load_image(path).shape == (32, 68, 3)


def test_polar_field_outside_disk_is_zero():
    pg = PolarGrid(16, 8)
    f = render.polar_to_image_field(np.ones(pg.shape), pg, 33)
    assert f[0, 0] == 0 and f[16, 16] == pytest.approx(1.0)
