"""Shared synthetic inputs for the test suite.

Everything here is deterministic: images come from seeded generators or
closed-form patterns so expected values can be frozen.
"""

from __future__ import annotations

import numpy as np
import pytest
from numpy.random import Generator, Philox

from morphlab.raster import LandmarkSet, Raster


def rng(seed: int) -> Generator:
    return Generator(Philox(key=[seed, 0]))


def noise_image(seed: int, height: int = 48, width: int = 40, channels: int = 1) -> Raster:
    data = rng(seed).integers(0, 256, (height, width, channels), dtype=np.uint8)
    return Raster(data)


def gradient_image(height: int = 48, width: int = 40, channels: int = 1) -> Raster:
    ramp = np.linspace(0, 255, width)[np.newaxis, :] + np.linspace(0, 40, height)[:, np.newaxis]
    data = np.clip(ramp, 0, 255).astype(np.uint8)
    return Raster(np.repeat(data[:, :, np.newaxis], channels, axis=2))


def textured_image(seed: int, size: int = 96) -> Raster:
    """Natural-ish texture: smooth base plus oriented stripes plus grain."""
    g = rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    base = 110.0 + 60.0 * np.sin(2 * np.pi * xs / (size / (2 + seed % 3)))
    base += 40.0 * np.sin(2 * np.pi * (xs + 2 * ys) / (11.0 + seed % 5))
    base += g.normal(0.0, 18.0, (size, size))
    arr = np.clip(base, 0, 255).astype(np.uint8)
    return Raster(arr[:, :, np.newaxis])


def face_landmarks(width: int, height: int, jitter_seed: int | None = None) -> LandmarkSet:
    """A plausible inner-face point layout, optionally jittered."""
    w, h = float(width - 1), float(height - 1)
    pts = np.array(
        [
            [0.30 * w, 0.35 * h],  # left eye
            [0.70 * w, 0.35 * h],  # right eye
            [0.50 * w, 0.55 * h],  # nose tip
            [0.35 * w, 0.75 * h],  # mouth left
            [0.65 * w, 0.75 * h],  # mouth right
            [0.50 * w, 0.20 * h],  # forehead
            [0.18 * w, 0.55 * h],  # left cheek
            [0.82 * w, 0.55 * h],  # right cheek
        ]
    )
    if jitter_seed is not None:
        pts = pts + rng(jitter_seed).normal(0.0, min(width, height) * 0.02, pts.shape)
    return LandmarkSet(pts)


@pytest.fixture
def tmp_image_dir(tmp_path):
    return tmp_path
