import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from sdrain.images import (Image, ImageIOError, RainMask, load_image, load_mask,
                           quantize, save_image, save_mask)


def _write(path, arr):
    PILImage.fromarray(np.asarray(arr, dtype=np.uint8)).save(path)
    return path


def test_gray_scaling(tmp_path):
    img = load_image(_write(tmp_path / "g.png", [[255, 0], [51, 102]]))
    assert img.chroma is None
    assert img.luma[0, 0] == 1.0
    assert img.luma[0, 1] == 0.0
    assert img.luma[1, 0] == pytest.approx(0.2)


def test_white_rgb_has_neutral_chroma(tmp_path):
    img = load_image(_write(tmp_path / "w.png", np.full((3, 4, 3), 255)))
    assert np.allclose(img.luma, 1.0, atol=1e-15)
    assert np.allclose(img.chroma, 0.0, atol=1e-15)


def test_bt601_weights(tmp_path):
    px = np.zeros((1, 3, 3))
    px[0, 0, 0] = px[0, 1, 1] = px[0, 2, 2] = 255
    img = load_image(_write(tmp_path / "rgb.png", px))
    assert np.allclose(img.luma[0], [0.299, 0.587, 0.114])


def test_quantize_rules():
    q = quantize(np.array([1.2, 0.5, -0.1, 0.0, 1.0, 0.5 / 255, 1.49 / 255]))
    assert q.tolist() == [255, 128, 0, 0, 255, 1, 1]


def test_clamp_and_rounding_on_disk(tmp_path):
    save_image(Image(np.array([[1.2, 0.5]])), tmp_path / "o.png")
    assert np.asarray(PILImage.open(tmp_path / "o.png")).tolist() == [[255, 128]]


@pytest.mark.parametrize("suffix", [".png", ".pgm"])
def test_gray_round_trip(tmp_path, rng, suffix):
    x = rng.random((17, 23))
    path = tmp_path / f"x{suffix}"
    save_image(Image(x), path)
    assert np.abs(load_image(path).luma - x).max() <= 1 / 255
    if suffix == ".pgm":
        assert path.read_bytes()[:2] == b"P5"


def test_rgb_round_trip(tmp_path, rng):
    px = rng.integers(0, 256, (9, 11, 3))
    path = _write(tmp_path / "c.png", px)
    img = load_image(path)
    save_image(img, tmp_path / "c2.png")
    assert np.array_equal(np.asarray(PILImage.open(tmp_path / "c2.png")), px)


def test_rgb_to_pgm_rejected(tmp_path):
    img = load_image(_write(tmp_path / "c.png", np.zeros((4, 4, 3))))
    with pytest.raises(ImageIOError):
        save_image(img, tmp_path / "c.pgm")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 7), elements=st.floats(-0.5, 1.5)))
def test_save_load_save_idempotent(tmp_path_factory, x):
    d = tmp_path_factory.mktemp("idem")
    save_image(Image(x), d / "a.png")
    save_image(load_image(d / "a.png"), d / "b.png")
    assert (d / "a.png").read_bytes() == (d / "b.png").read_bytes()


def test_missing_and_garbage_files(tmp_path):
    with pytest.raises(ImageIOError, match="nope.png"):
        load_image(tmp_path / "nope.png")
    (tmp_path / "bad.png").write_bytes(b"not an image")
    with pytest.raises(ImageIOError, match="bad.png"):
        load_image(tmp_path / "bad.png")


def test_sixteen_bit_rejected(tmp_path):
    PILImage.fromarray(np.full((4, 4), 40000, np.uint16)).save(tmp_path / "d.png")
    with pytest.raises(ImageIOError):
        load_image(tmp_path / "d.png")


def test_mask_examples(tmp_path):
    img = Image(np.zeros((8, 8)))
    assert not load_mask(_write(tmp_path / "z.png", np.zeros((8, 8))), img).flags.any()
    red = np.zeros((8, 8, 3))
    red[2:4, 5, 0] = 200
    m = load_mask(_write(tmp_path / "r.png", red), img)
    assert m.flags.sum() == 2 and m.flags[2, 5] and m.flags[3, 5]
    with pytest.raises(ImageIOError, match="mask"):
        load_mask(_write(tmp_path / "s.png", np.zeros((16, 16))), Image(np.zeros((32, 32))))


def test_mask_round_trip(tmp_path, rng):
    flags = rng.random((10, 12)) < 0.3
    save_mask(RainMask(flags), tmp_path / "m.png")
    assert np.array_equal(load_mask(tmp_path / "m.png", (10, 12)).flags, flags)


def test_image_shape_validation():
    with pytest.raises(ValueError):
        Image(np.zeros(5))
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4)), np.zeros((4, 4, 3)))
    img = Image(np.zeros((3, 5)))
    assert (img.height, img.width, img.shape) == (3, 5, (3, 5))
