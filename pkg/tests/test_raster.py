import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from morphlab.raster import (
    CorruptImageError,
    FloatRaster,
    Raster,
    UnsupportedImageError,
    bilinear_sample,
    load_image,
    quantize,
    save_image,
    to_float,
)

from conftest import gradient_image, noise_image


def test_raster_validation():
    with pytest.raises(ValueError):
        Raster(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        Raster(np.zeros((0, 4, 1), dtype=np.uint8))
    with pytest.raises(ValueError):
        Raster(np.zeros((4, 4, 1), dtype=np.float64))


def test_raster_immutable():
    r = noise_image(0)
    with pytest.raises(ValueError):
        r.data[0, 0, 0] = 1


def test_float_raster_rejects_nonfinite():
    with pytest.raises(ValueError):
        FloatRaster(np.full((2, 2, 1), np.nan))
    with pytest.raises(ValueError):
        FloatRaster(np.full((2, 2, 1), np.inf))


def test_pgm_round_trip_known_bytes(tmp_path):
    r = Raster(np.array([[0, 85], [170, 255]], dtype=np.uint8)[:, :, np.newaxis])
    path = tmp_path / "two.pgm"
    save_image(r, path)
    back = load_image(path)
    assert back.channels == 1
    assert np.array_equal(back.data.ravel(), [0, 85, 170, 255])


@pytest.mark.parametrize("suffix,channels", [(".png", 1), (".png", 3), (".ppm", 3), (".pgm", 1)])
def test_save_load_identity(tmp_path, suffix, channels):
    r = noise_image(3, height=50, width=37, channels=channels)
    path = tmp_path / f"img{suffix}"
    save_image(r, path)
    assert np.array_equal(load_image(path).data, r.data)


def test_round_trip_350x400_three_channel(tmp_path):
    r = noise_image(9, height=400, width=350, channels=3)
    path = tmp_path / "a.png"
    save_image(r, path)
    assert np.array_equal(load_image(path).data, r.data)


def test_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")


def test_16bit_png_rejected(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.full((4, 4), 1000, dtype=np.uint16)).save(path, format="PNG")
    with pytest.raises(UnsupportedImageError, match="bit depth"):
        load_image(path)


def test_rgba_png_rejected(tmp_path):
    path = tmp_path / "alpha.png"
    Image.new("RGBA", (4, 4)).save(path, format="PNG")
    with pytest.raises(UnsupportedImageError, match="layout"):
        load_image(path)


def test_corrupt_png_rejected(tmp_path):
    path = tmp_path / "broken.png"
    buf = io.BytesIO()
    Image.new("L", (16, 16)).save(buf, format="PNG")
    path.write_bytes(buf.getvalue()[:40])
    with pytest.raises(CorruptImageError):
        load_image(path)


def test_truncated_pnm_rejected(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(CorruptImageError, match="truncated"):
        load_image(path)


def test_ascii_pnm_rejected(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
    with pytest.raises(UnsupportedImageError):
        load_image(path)


def test_16bit_pnm_rejected(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(UnsupportedImageError, match="bit depth"):
        load_image(path)


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "mystery.png"
    path.write_bytes(b"\xff\xd8\xff\xe0 jpeg-ish")
    with pytest.raises(UnsupportedImageError, match="unrecognized"):
        load_image(path)


def test_pnm_comment_in_header(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x01\x02\x03\x04")
    r = load_image(path)
    assert np.array_equal(r.data.ravel(), [1, 2, 3, 4])


def test_save_to_unwritable_path(tmp_path):
    r = noise_image(1)
    with pytest.raises(Exception):
        save_image(r, tmp_path / "no_such_dir" / "x.png")


def test_channel_mismatch_for_pnm(tmp_path):
    with pytest.raises(UnsupportedImageError):
        save_image(noise_image(2, channels=3), tmp_path / "x.pgm")
    with pytest.raises(UnsupportedImageError):
        save_image(noise_image(2, channels=1), tmp_path / "x.ppm")


def test_to_float_preserves_values():
    r = gradient_image()
    f = to_float(r)
    assert f.data.dtype == np.float64
    assert np.array_equal(f.data, r.data.astype(np.float64))


def test_quantize_examples():
    f = FloatRaster(np.array([[[255.0], [257.6]], [[-3.2], [99.5]]]))
    q = quantize(f)
    assert q.data.ravel().tolist() == [255, 255, 0, 100]


def test_quantize_rejects_nan():
    from morphlab.raster import quantize_array

    with pytest.raises(ValueError):
        quantize_array(np.array([[np.nan]]))


def test_quantize_to_float_identity():
    r = noise_image(5, channels=3)
    assert np.array_equal(quantize(to_float(r)).data, r.data)


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=64))
@settings(max_examples=100, deadline=None)
def test_quantize_monotone(values):
    from morphlab.raster import quantize_array

    arr = np.sort(np.asarray(values))
    q = quantize_array(arr.reshape(1, -1, 1)).ravel()
    assert np.all(np.diff(q.astype(np.int16)) >= 0)


def test_bilinear_integer_coords_exact():
    r = noise_image(7)
    data = r.data.astype(np.float64)
    ys, xs = np.mgrid[0 : r.height, 0 : r.width]
    out = bilinear_sample(data, xs.astype(np.float64), ys.astype(np.float64))
    assert np.array_equal(out, data)


def test_bilinear_midpoint():
    data = np.zeros((1, 2, 1))
    data[0, 1, 0] = 100.0
    out = bilinear_sample(data, np.array([0.5]), np.array([0.0]))
    assert out[0, 0] == pytest.approx(50.0)
