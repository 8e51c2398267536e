"""2-D magnitude spectra and spectrum-similarity measures.

Used to quantify how closely a simulated print-and-scan image matches the
frequency signature of the degradation it imitates: the angle between two
spectra treated as vectors, their Pearson correlation, and the fraction of
energy above a radial frequency cutoff.

No window is applied before the transform; rectangular-window leakage is
identical across compared images and therefore cancels in the comparisons.
Magnitudes are stored raw; log scaling is a display concern only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster

# ITU-601 luminance weights for 3-channel inputs
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Spectrum:
    """Centered 2-D discrete-Fourier magnitudes (DC at the array center)."""

    magnitudes: np.ndarray
    source_size: tuple[int, int]

    def __post_init__(self) -> None:
        mags = np.ascontiguousarray(np.asarray(self.magnitudes, dtype=np.float64))
        if mags.ndim != 2:
            raise ValueError(f"spectrum must be 2-D, got shape {mags.shape}")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("spectrum magnitudes must be finite and non-negative")
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)

    @property
    def height(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def width(self) -> int:
        return self.magnitudes.shape[1]


def luminance(img: Raster) -> np.ndarray:
    """Float luminance plane (ITU-601 weights for RGB, identity for gray)."""
    data = img.data.astype(np.float64)
    if img.channels == 1:
        return data[:, :, 0]
    r, g, b = data[:, :, 0], data[:, :, 1], data[:, :, 2]
    return LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b


def magnitude_spectrum(img: Raster) -> Spectrum:
    """Centered magnitude of the unwindowed 2-D DFT of the luminance."""
    plane = luminance(img)
    mags = np.abs(np.fft.fftshift(np.fft.fft2(plane)))
    return Spectrum(mags, (img.width, img.height))


def _check_same_shape(a: Spectrum, b: Spectrum) -> None:
    if a.magnitudes.shape != b.magnitudes.shape:
        raise ValueError(
            f"spectra differ in shape: {a.magnitudes.shape} vs {b.magnitudes.shape}"
        )


def _non_dc(s: Spectrum) -> np.ndarray:
    # the DC magnitude is orders of magnitude above every other bin and
    # would otherwise make any two same-brightness spectra near-identical
    h, w = s.magnitudes.shape
    flat = s.magnitudes.ravel().copy()
    return np.delete(flat, (h // 2) * w + (w // 2))


def spectral_angle(a: Spectrum, b: Spectrum) -> float:
    """Angle (radians) between the magnitude vectors, DC bin excluded.

    Zero for identical or positively scaled spectra, pi/2 for spectra with
    disjoint support.  The cosine is evaluated as dot/sqrt(|a|^2*|b|^2) so a
    self-comparison yields exactly zero, and clamped against rounding before
    the arccos.
    """
    _check_same_shape(a, b)
    va = _non_dc(a)
    vb = _non_dc(b)
    naa = float(np.dot(va, va))
    nbb = float(np.dot(vb, vb))
    if naa == 0.0 or nbb == 0.0:
        raise ValueError("spectral angle undefined for a zero spectrum")
    cos = float(np.dot(va, vb)) / np.sqrt(naa * nbb)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def spectral_correlation(a: Spectrum, b: Spectrum) -> float:
    """Pearson correlation of the magnitudes (DC bin excluded), in [-1, 1]."""
    _check_same_shape(a, b)
    va = _non_dc(a)
    vb = _non_dc(b)
    ca = va - va.mean()
    cb = vb - vb.mean()
    vaa = float(np.dot(ca, ca))
    vbb = float(np.dot(cb, cb))
    if vaa == 0.0 or vbb == 0.0:
        raise ValueError("spectral correlation undefined for a zero-variance spectrum")
    corr = float(np.dot(ca, cb)) / np.sqrt(vaa * vbb)
    return float(np.clip(corr, -1.0, 1.0))


def hf_energy_ratio(s: Spectrum, cutoff: float) -> float:
    """Fraction of non-DC spectral energy above ``cutoff`` * Nyquist.

    Radial frequency is measured in cycles/sample; Nyquist is 0.5.  A
    constant image has no non-DC energy and returns 0.
    """
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must be in (0, 1), got {cutoff}")
    if s.magnitudes.size == 0:
        raise ValueError("empty spectrum")
    h, w = s.magnitudes.shape
    fy = np.fft.fftshift(np.fft.fftfreq(h))[:, np.newaxis]
    fx = np.fft.fftshift(np.fft.fftfreq(w))[np.newaxis, :]
    radial = np.hypot(fy, fx)
    energy = s.magnitudes ** 2
    total = float(energy[radial > 0.0].sum())
    if total == 0.0:
        return 0.0
    high = float(energy[radial > cutoff * 0.5].sum())
    return high / total
