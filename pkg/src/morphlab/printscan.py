"""Print-and-scan channel simulation.

The model degrades a digital image in four stages: a cascaded Gaussian blur
standing in for the printer and scanner point spread functions, a high-pass
weighted noise term concentrating extra variance near edges, a nonlinear
responsivity curve with intensity-dependent noise, and an optional global
sub-pixel resampling displacement.  Everything is a pure function of the
pixels and the parameter set (seed included): reruns are byte-identical.

Randomness comes from a counter-based generator (Philox) keyed by
(seed, stream, channel), with one 64-bit word per pixel draw mapped through
the inverse normal CDF, so a pixel's noise value never depends on the order
in which pixels are visited.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from numpy.random import Generator, Philox
from scipy.ndimage import convolve, correlate1d
from scipy.special import ndtri

from .raster import FloatRaster, Raster, bilinear_sample, pixel_grid, quantize_array, to_float

# high-pass filter weighting the edge-noise term
LAPLACIAN_3X3 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

_STREAM_EDGE = 0
_STREAM_DARK = 1
_STREAM_JITTER = 2


@dataclass(frozen=True)
class PnsParams:
    """Full parameter vector of the print-and-scan model.

    The defaults reproduce the reference configuration: gain 15.5, input and
    output color offsets 20, gamma 0.5, and two 3x3 Gaussian PSFs with
    standard deviation 1.2.  The two noise magnitudes and the jitter are not
    part of that configuration and default to mild, non-normative values.
    ``edge_noise_std`` multiplies the raw high-pass response (which reaches
    hundreds near strong edges), so its useful range is well below 1;
    ``dark_noise_scale`` is the noise standard deviation, in pixel values,
    reached on black pixels.
    """

    omega: float = 15.5
    beta_x: float = 20.0
    beta_k: float = 20.0
    gamma: float = 0.5
    k1: int = 3
    k2: int = 3
    sigma1: float = 1.2
    sigma2: float = 1.2
    edge_noise_std: float = 0.02
    dark_noise_scale: float = 2.0
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("k1", "k2"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {k}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigma1 and sigma2 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.edge_noise_std < 0 or self.dark_noise_scale < 0 or self.jitter < 0:
            raise ValueError("noise scales and jitter must be non-negative")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str | float | int]) -> "PnsParams":
        """Build parameters from key=value pairs (file or CLI overrides)."""
        kwargs: dict[str, float | int] = {}
        valid = {f.name for f in fields(cls)}
        for key, value in mapping.items():
            if key not in valid:
                raise ValueError(f"unknown print-scan parameter {key!r}")
            if key in ("k1", "k2", "seed"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PnsParams":
        """Parse a plain-text parameter file of ``key=value`` lines
        (``#`` comments and blank lines ignored)."""
        mapping: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)


def identity_params(seed: int = 0) -> PnsParams:
    """Parameter set under which the whole pipeline is the identity."""
    return PnsParams(
        omega=1.0, beta_x=0.0, beta_k=0.0, gamma=1.0, k1=1, k2=1,
        edge_noise_std=0.0, dark_noise_scale=0.0, jitter=0.0, seed=seed,
    )


def _counter_uniforms(seed: int, stream: int, channel: int, n: int) -> np.ndarray:
    key = [seed & 0xFFFFFFFFFFFFFFFF, (stream << 32) | channel]
    return Generator(Philox(key=key)).random(n)


def _normal_field(seed: int, stream: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Standard-normal field, one independent plane per channel.

    Uniform words are shifted off zero before the inverse CDF so the result
    is always finite.
    """
    h, w, c = shape
    out = np.empty(shape)
    for ch in range(c):
        u = _counter_uniforms(seed, stream, ch, h * w) + 2.0 ** -54
        out[:, :, ch] = ndtri(u).reshape(h, w)
    return out


@dataclass(frozen=True)
class NoiseField:
    """Per-pixel standard-normal draws: one field for the edge-noise term
    and one for the intensity-dependent responsivity noise."""

    n1: np.ndarray
    n2: np.ndarray

    @classmethod
    def for_image(cls, params: PnsParams, height: int, width: int, channels: int) -> "NoiseField":
        shape = (height, width, channels)
        return cls(
            n1=_normal_field(params.seed, _STREAM_EDGE, shape),
            n2=_normal_field(params.seed, _STREAM_DARK, shape),
        )


def gaussian_kernel(k: int, sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian of odd length ``k``, normalized to sum 1."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    offsets = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    kern = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return kern / kern.sum()


def _blur_once(data: np.ndarray, k: int, sigma: float) -> np.ndarray:
    h, w = data.shape[:2]
    if k > h or k > w:
        raise ValueError(f"kernel size {k} exceeds image dimensions {w}x{h}")
    kern = gaussian_kernel(k, sigma)
    out = correlate1d(data, kern, axis=0, mode="nearest")
    return correlate1d(out, kern, axis=1, mode="nearest")


def psf_blur(f: FloatRaster, params: PnsParams) -> FloatRaster:
    """Cascaded point-spread blur: Gaussian(k1, sigma1) then
    Gaussian(k2, sigma2), per channel, borders replicated."""
    out = _blur_once(f.data, params.k1, params.sigma1)
    out = _blur_once(out, params.k2, params.sigma2)
    return FloatRaster(out)


def edge_noise_term(f: FloatRaster, params: PnsParams, noise: NoiseField) -> FloatRaster:
    """High-pass weighted noise: Laplacian response times scaled N(0,1)."""
    if noise.n1.shape != f.data.shape:
        raise ValueError("noise field shape does not match image")
    if params.edge_noise_std == 0.0:
        return FloatRaster(np.zeros_like(f.data))
    hp = np.empty_like(f.data)
    for ch in range(f.channels):
        hp[:, :, ch] = convolve(f.data[:, :, ch], LAPLACIAN_3X3, mode="nearest")
    return FloatRaster(hp * (params.edge_noise_std * noise.n1))


def _dark_noise_std(v: np.ndarray, params: PnsParams) -> np.ndarray:
    # noise power rises toward black: peak scale at 0, zero at white
    return params.dark_noise_scale * (1.0 - np.clip(v, 0.0, 255.0) / 255.0)


def responsivity(v, params: PnsParams, n2=0.0):
    """Device tone-transfer curve applied to one sample (or an array).

    ``omega * max(v - beta_x, 0)**gamma + beta_k`` plus intensity-dependent
    noise; the base is clamped at zero so the power stays real and the curve
    monotone.
    """
    v = np.asarray(v, dtype=np.float64)
    base = np.maximum(v - params.beta_x, 0.0)
    out = params.omega * np.power(base, params.gamma) + params.beta_k
    if params.dark_noise_scale > 0.0:
        out = out + _dark_noise_std(v, params) * np.asarray(n2, dtype=np.float64)
    if out.ndim == 0:
        return float(out)
    return out


def _resample_global(data: np.ndarray, dx: float, dy: float) -> np.ndarray:
    h, w = data.shape[:2]
    ys, xs = pixel_grid(h, w)
    return bilinear_sample(data, xs + dx, ys + dy)


def simulate_pns(img: Raster, params: PnsParams) -> Raster:
    """Run the full print-and-scan pipeline on an image.

    Channels are processed independently with shared parameters.  The output
    is byte-identical for identical (pixels, params) including the seed.
    """
    f = to_float(img)
    signal = psf_blur(f, params).data
    need_noise = params.edge_noise_std > 0.0 or params.dark_noise_scale > 0.0
    noise = (
        NoiseField.for_image(params, img.height, img.width, img.channels)
        if need_noise
        else None
    )
    if noise is not None and params.edge_noise_std > 0.0:
        # the high-pass term acts on the unblurred source signal
        signal = signal + edge_noise_term(f, params, noise).data
    out = responsivity(signal, params, noise.n2 if noise is not None else 0.0)
    if params.jitter > 0.0:
        u = _counter_uniforms(params.seed, _STREAM_JITTER, 0, 2)
        dx, dy = (2.0 * u - 1.0) * params.jitter
        out = _resample_global(out, dx, dy)
    return Raster(quantize_array(out))
