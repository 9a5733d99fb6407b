import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowroad.imagecore import (
    ImageReadError,
    StructuringElement,
    UnsupportedFormatError,
    hsv_to_rgb,
    load_image,
    load_mask,
    rgb_to_hsv,
    save_image,
    save_mask,
    to_uint8,
)


def px(*rgb):
    return np.array([[rgb]], dtype=float)


@pytest.mark.parametrize(
    "rgb, hsv",
    [
        ((1, 1, 1), (0.0, 0.0, 1.0)),
        ((1, 0, 0), (0.0, 1.0, 1 / 3)),
        ((0, 0, 1), (240.0, 1.0, 1 / 3)),
        ((0, 1, 0), (120.0, 1.0, 1 / 3)),
        ((0, 0, 0), (0.0, 0.0, 0.0)),
    ],
)
def test_rgb_to_hsv_examples(rgb, hsv):
    np.testing.assert_allclose(rgb_to_hsv(px(*rgb))[0, 0], hsv, atol=1e-12)


def test_hue_matches_arccos_form():
    rng = np.random.default_rng(3)
    rgb = rng.random((50, 3))
    r, g, b = rgb.T
    cos = 0.5 * ((r - g) + (r - b)) / np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    theta = np.degrees(np.arccos(np.clip(cos, -1, 1)))
    expected = np.where(b <= g, theta, 360 - theta)
    np.testing.assert_allclose(rgb_to_hsv(rgb[None])[0, :, 0], expected, atol=1e-6)


@pytest.mark.parametrize(
    "hsv, rgb",
    [((0.0, 0.0, 0.5), (0.5, 0.5, 0.5)), ((240.0, 1.0, 1 / 3), (0.0, 0.0, 1.0))],
)
def test_hsv_to_rgb_examples(hsv, rgb):
    np.testing.assert_allclose(hsv_to_rgb(px(*hsv))[0, 0], rgb, atol=1e-12)


def test_round_trip_example():
    p = px(0.2, 0.5, 0.7)
    assert np.abs(hsv_to_rgb(rgb_to_hsv(p)) - p).max() <= 1e-9


def test_round_trip_all_sectors_continuous():
    rng = np.random.default_rng(0)
    rgb = rng.random((200, 200, 3))
    back = hsv_to_rgb(rgb_to_hsv(rgb))
    assert np.abs(back - rgb).max() <= 1e-9


def test_round_trip_quantized_grid():
    levels = np.arange(0, 256, 5, dtype=np.uint8)
    grid = np.array(list(itertools.product(levels, repeat=3)), dtype=np.uint8)[None]
    back = to_uint8(hsv_to_rgb(rgb_to_hsv(grid / 255.0)))
    assert np.abs(back.astype(int) - grid.astype(int)).max() <= 1


rgb_pixel = st.tuples(*[st.floats(0, 1, allow_nan=False)] * 3)


@given(rgb_pixel)
def test_hsv_ranges(p):
    h, s, v = rgb_to_hsv(px(*p))[0, 0]
    assert 0 <= h < 360 and 0 <= s <= 1 and 0 <= v <= 1


@given(rgb_pixel, st.floats(0.05, 1.0))
@settings(max_examples=200)
def test_hue_scale_invariant(p, k):
    base = rgb_to_hsv(px(*p))[0, 0]
    scaled = rgb_to_hsv(px(*(k * c for c in p)))[0, 0]
    if base[1] > 1e-6:
        d = abs(base[0] - scaled[0])
        assert min(d, 360 - d) < 1e-6


def test_structuring_elements():
    assert len(StructuringElement.square(3).offsets) == 9
    assert len(StructuringElement.cross(3).offsets) == 5
    assert StructuringElement.parse("cross:5") == StructuringElement.cross(5)
    with pytest.raises(ValueError):
        StructuringElement(((1, 0),))
    with pytest.raises(ValueError):
        StructuringElement(((0, 0), (0, 0)))
    with pytest.raises(ValueError):
        StructuringElement.parse("disk:3")
    with pytest.raises(ValueError):
        StructuringElement.parse("square:4")


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_image_round_trip(tmp_path, suffix):
    data = np.array([[[0, 10, 255], [1, 2, 3]], [[128, 64, 32], [200, 100, 50]]], dtype=np.uint8)
    path = tmp_path / f"img{suffix}"
    save_image(data / 255.0, path)
    assert np.array_equal(to_uint8(load_image(path)), data)


def test_ppm_is_binary_p6(tmp_path):
    path = tmp_path / "a.ppm"
    save_image(np.zeros((2, 2, 3)), path)
    assert path.read_bytes().startswith(b"P6")


def test_mask_pgm_encoding(tmp_path):
    path = tmp_path / "m.pgm"
    save_mask(np.ones((3, 3), dtype=bool), path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5")
    assert raw[-9:] == bytes([255] * 9)
    assert load_mask(path).all()


def test_mask_values_only_0_and_255(tmp_path):
    path = tmp_path / "m.pgm"
    m = np.array([[True, False], [False, True]])
    save_mask(m, path)
    assert set(path.read_bytes()[-4:]) == {0, 255}
    assert np.array_equal(load_mask(path), m)


def test_empty_file_is_unsupported(tmp_path):
    path = tmp_path / "empty.png"
    path.write_bytes(b"")
    with pytest.raises(UnsupportedFormatError):
        load_image(path)


def test_missing_file(tmp_path):
    with pytest.raises(ImageReadError):
        load_image(tmp_path / "nope.png")


def test_unsupported_output_suffix(tmp_path):
    with pytest.raises(UnsupportedFormatError):
        save_image(np.zeros((1, 1, 3)), tmp_path / "x.jpg")
