"""Figure rendering for the report-producing CLI paths.

Figures are written next to the delimited outputs they accompany.  PNG
metadata is stripped so reruns stay byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import DetCurve
from .spectral import Spectrum

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def render_det_curve(curve: DetCurve, path: str | Path, title: str = "DET curve") -> None:
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot(curve.apcer, curve.bpcer, drawstyle="steps-post", color="tab:blue")
    ax.set_xlabel("APCER")
    ax.set_ylabel("BPCER")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_spectrum(spec: Spectrum, path: str | Path, log_display: bool = True) -> None:
    mags = spec.magnitudes
    shown = np.log1p(mags) if log_display else mags
    fig, ax = plt.subplots(figsize=(5.0, 5.0 * mags.shape[0] / max(mags.shape[1], 1)))
    ax.imshow(shown, cmap="gray", interpolation="nearest")
    ax.set_title("magnitude spectrum" + (" (log)" if log_display else ""))
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
