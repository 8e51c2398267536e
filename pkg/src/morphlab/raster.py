"""Image and landmark data model with lossless file I/O.

Rasters are immutable 8-bit images (1 or 3 channels) stored as ``(h, w, c)``
arrays.  All processing happens on a float64 working copy (``FloatRaster``)
and is quantized back to bytes only at the very end of a pipeline, so
repeated conversions never accumulate error.

Supported file formats are lossless by design: PNG (8-bit), binary PPM (P6)
and binary PGM (P5).  Lossy formats would inject compression artifacts
indistinguishable from the degradations this toolkit studies.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageIOError(Exception):
    """Base class for image decoding/encoding failures."""


class UnsupportedImageError(ImageIOError):
    """File is readable but not a format/bit depth this toolkit accepts."""


class CorruptImageError(ImageIOError):
    """File claims a supported format but its stream is damaged."""


def _as_hwc(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return arr


@dataclass(frozen=True)
class Raster:
    """Immutable 8-bit image, shape ``(height, width, channels)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(_as_hwc(np.asarray(self.data)))
        if arr.dtype != np.uint8:
            raise ValueError(f"raster data must be uint8, got {arr.dtype}")
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"raster must be (h, w, c) with c in {{1, 3}}, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("raster dimensions must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FloatRaster:
    """Float64 working image; samples must be finite (nominally 0..255,
    intermediates may exceed that range)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(_as_hwc(np.asarray(self.data, dtype=np.float64)))
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"float raster must be (h, w, c) with c in {{1, 3}}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("float raster contains NaN or Inf samples")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered sub-pixel 2-D points annotating one image.

    When two sets are used jointly (morphing) their lengths and point order
    must correspond one-to-one; that is checked at the point of use.
    """

    points: np.ndarray
    tags: tuple[str, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"landmarks must be an (n, 2) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks contain non-finite coordinates")
        if self.tags is not None and len(self.tags) != pts.shape[0]:
            raise ValueError("tag count does not match point count")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def to_float(r: Raster) -> FloatRaster:
    """Exact widening of byte samples to the float64 working domain."""
    return FloatRaster(r.data.astype(np.float64))


def quantize(f: FloatRaster) -> Raster:
    """Clamp to [0, 255] then round half-away-from-zero back to bytes."""
    return Raster(quantize_array(f.data))


def quantize_array(arr: np.ndarray) -> np.ndarray:
    """Array-level quantization used by every pipeline tail."""
    arr = np.asarray(arr, dtype=np.float64)
    if np.any(np.isnan(arr)):
        raise ValueError("cannot quantize NaN samples")
    clipped = np.clip(arr, 0.0, 255.0)
    # all values are non-negative after the clamp, so half-away-from-zero
    # reduces to floor(v + 0.5)
    return np.floor(clipped + 0.5).astype(np.uint8)


@lru_cache(maxsize=8)
def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached, read-only (ys, xs) float coordinate planes for one size."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    ys.setflags(write=False)
    xs.setflags(write=False)
    return ys, xs


def bilinear_sample(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``(h, w, c)`` float data at sub-pixel positions, clamped to the
    image bounds.  Integer coordinates return the exact stored value."""
    h, w = data.shape[:2]
    xs = np.clip(xs, 0.0, float(w - 1))
    ys = np.clip(ys, 0.0, float(h - 1))
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., np.newaxis]
    fy = (ys - y0)[..., np.newaxis]
    flat = data.reshape(h * w, data.shape[2])
    base0 = y0 * w
    base1 = y1 * w
    top = flat.take(base0 + x0, axis=0) * (1.0 - fx) + flat.take(base0 + x1, axis=0) * fx
    bot = flat.take(base1 + x0, axis=0) * (1.0 - fx) + flat.take(base1 + x1, axis=0) * fx
    return top * (1.0 - fy) + bot * fy


# ---------------------------------------------------------------------------
# file I/O

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image(path: str | Path) -> Raster:
    """Load a PNG/PPM/PGM file with exact stored pixel values.

    No color-profile or gamma transform is applied.  Raises
    ``FileNotFoundError`` for a missing file, ``UnsupportedImageError`` for
    formats or bit depths outside the supported set, and
    ``CorruptImageError`` for a damaged stream.
    """
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(_PNG_MAGIC):
        return _decode_png(data, path)
    if data[:2] in (b"P5", b"P6"):
        return _decode_pnm(data, path)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedImageError(f"{path}: ASCII/bitmap PNM variants are not supported")
    raise UnsupportedImageError(f"{path}: unrecognized format (supported: PNG, PPM, PGM)")


def _decode_png(data: bytes, path: Path) -> Raster:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L"):
                raise UnsupportedImageError(f"{path}: unsupported bit depth (16-bit PNG)")
            if mode not in ("L", "RGB"):
                raise UnsupportedImageError(
                    f"{path}: unsupported pixel layout {mode!r} (need 8-bit L or RGB)"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except UnsupportedImageError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{path}: corrupt PNG stream ({exc})") from exc
    return Raster(arr)


def _decode_pnm(data: bytes, path: Path) -> Raster:
    channels = 1 if data[:2] == b"P5" else 3
    pos = 2
    fields: list[int] = []
    try:
        while len(fields) < 3:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if pos < len(data) and data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(int(data[start:pos]))
        pos += 1  # single whitespace byte after maxval
    except (ValueError, IndexError) as exc:
        raise CorruptImageError(f"{path}: malformed PNM header") from exc
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CorruptImageError(f"{path}: non-positive PNM dimensions")
    if maxval > 255:
        raise UnsupportedImageError(f"{path}: unsupported bit depth (maxval {maxval})")
    if maxval < 1:
        raise CorruptImageError(f"{path}: invalid PNM maxval {maxval}")
    n = width * height * channels
    raw = data[pos : pos + n]
    if len(raw) < n:
        raise CorruptImageError(f"{path}: truncated PNM pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return Raster(arr)


def save_image(r: Raster, path: str | Path, *, compress_level: int = 6) -> None:
    """Losslessly encode a raster; the format follows the file extension
    (.png, .ppm, .pgm).  ``load_image(save_image(r)) == r`` bytewise."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        arr = r.data[:, :, 0] if r.channels == 1 else r.data
        try:
            Image.fromarray(arr).save(path, format="PNG", compress_level=compress_level)
        except OSError as exc:
            raise ImageIOError(f"{path}: write failed ({exc})") from exc
        return
    if suffix in (".pgm", ".ppm"):
        want = 1 if suffix == ".pgm" else 3
        if r.channels != want:
            raise UnsupportedImageError(
                f"{path}: {suffix} stores {want}-channel data, raster has {r.channels}"
            )
        magic = b"P5" if want == 1 else b"P6"
        header = magic + f"\n{r.width} {r.height}\n255\n".encode("ascii")
        try:
            path.write_bytes(header + r.data.tobytes())
        except OSError as exc:
            raise ImageIOError(f"{path}: write failed ({exc})") from exc
        return
    raise UnsupportedImageError(f"{path}: unsupported output format {suffix!r}")
