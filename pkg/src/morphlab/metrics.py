"""ISO-style detection metrics over labeled score sets.

Score convention, fixed across the toolkit: higher score means more
morph-like, and a presentation is classified as an attack when its score is
greater than or equal to the threshold (ties fall on the attack side).

APCER is then the fraction of attack scores below the threshold (attacks
accepted as bona fide) and BPCER the fraction of bona fide scores at or
above it (bona fide rejected).  All rates are fractions in [0, 1]; accuracy
is a percentage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ScoreSet:
    """Detection scores split by ground truth."""

    bona_fide: np.ndarray
    attacks: np.ndarray

    def __post_init__(self) -> None:
        for name in ("bona_fide", "attacks"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.ndim != 1:
                raise ValueError(f"{name} scores must be a flat list")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} scores contain non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def require_both(self) -> None:
        if self.bona_fide.size == 0 or self.attacks.size == 0:
            raise ValueError("both bona fide and attack scores are required")


@dataclass(frozen=True)
class DetCurve:
    """(threshold, apcer, bpcer) triples; apcer non-decreasing and bpcer
    non-increasing as the threshold grows."""

    thresholds: np.ndarray
    apcer: np.ndarray
    bpcer: np.ndarray

    def __len__(self) -> int:
        return self.thresholds.shape[0]


class BpcerAtApcer(NamedTuple):
    value: float
    attainable: bool


def rates_at(ss: ScoreSet, t: float) -> tuple[float, float]:
    """(APCER, BPCER) at one decision threshold."""
    ss.require_both()
    apcer = float(np.count_nonzero(ss.attacks < t)) / ss.attacks.size
    bpcer = float(np.count_nonzero(ss.bona_fide >= t)) / ss.bona_fide.size
    return apcer, bpcer


def sweep_thresholds(ss: ScoreSet) -> np.ndarray:
    """Every threshold producing a distinct classification outcome.

    The smallest score is replaced by -inf (identical outcome: everything
    flagged attack) and +inf is appended (nothing flagged), so n distinct
    scores yield n + 1 thresholds spanning (0,1) -> (1,0) in rate space.
    """
    ss.require_both()
    distinct = np.unique(np.concatenate([ss.bona_fide, ss.attacks]))
    return np.concatenate([[-np.inf], distinct[1:], [np.inf]])


def _sweep_rates(ss: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    thresholds = sweep_thresholds(ss)
    attacks = np.sort(ss.attacks)
    bona = np.sort(ss.bona_fide)
    apcer = np.searchsorted(attacks, thresholds, side="left") / attacks.size
    bpcer = 1.0 - np.searchsorted(bona, thresholds, side="left") / bona.size
    return thresholds, apcer, bpcer


def det_curve(ss: ScoreSet) -> DetCurve:
    """Full detection-error tradeoff trace over the threshold sweep."""
    thresholds, apcer, bpcer = _sweep_rates(ss)
    return DetCurve(thresholds, apcer, bpcer)


def eer(ss: ScoreSet) -> float:
    """Rate at which APCER equals BPCER.

    Sweeps all distinct thresholds; an exact tie returns that rate, and
    otherwise both rates are interpolated linearly to their crossing between
    the two adjacent sweep points.
    """
    _, apcer, bpcer = _sweep_rates(ss)
    diff = apcer - bpcer  # non-decreasing, from -1 to +1
    i = int(np.searchsorted(diff >= 0.0, True))
    if diff[i] == 0.0:
        return float(apcer[i])
    a0, a1 = apcer[i - 1], apcer[i]
    b0, b1 = bpcer[i - 1], bpcer[i]
    s = (b0 - a0) / ((a1 - a0) - (b1 - b0))
    return float(a0 + s * (a1 - a0))


def bpcer_at_apcer(ss: ScoreSet, p: float) -> BpcerAtApcer:
    """Lowest BPCER among thresholds with APCER <= p percent.

    When no useful operating point exists the value degenerates to 1.0
    (reject everything); that case is flagged as not attainable, which
    reports render as "-".
    """
    if not 0.0 < p < 100.0:
        raise ValueError(f"APCER bound must be in (0, 100), got {p}")
    _, apcer, bpcer = _sweep_rates(ss)
    eligible = bpcer[apcer <= p / 100.0]
    if eligible.size == 0:
        return BpcerAtApcer(1.0, False)
    best = float(eligible.min())
    return BpcerAtApcer(best, best < 1.0)


def accuracy(ss: ScoreSet, t: float = 0.5) -> float:
    """Percentage of presentations classified correctly at a fixed
    operating threshold."""
    ss.require_both()
    correct = np.count_nonzero(ss.attacks >= t) + np.count_nonzero(ss.bona_fide < t)
    return 100.0 * float(correct) / (ss.attacks.size + ss.bona_fide.size)


def summary(ss: ScoreSet, threshold: float = 0.5) -> list[tuple[str, str]]:
    """Fixed-order key/value report lines for one score set."""
    lines = [
        ("accuracy", f"{accuracy(ss, threshold):.6f}"),
        ("eer", f"{eer(ss):.6f}"),
    ]
    for p in (10, 5, 1):
        res = bpcer_at_apcer(ss, float(p))
        lines.append((f"bpcer@apcer{p}", f"{res.value:.6f}" if res.attainable else "-"))
    return lines


# ---------------------------------------------------------------------------
# score CSV interchange

SCORE_LABELS = ("bonafide", "attack")


class ScoreRow(NamedTuple):
    label: str
    score: float
    group: str


def read_scores(path: str | Path) -> list[ScoreRow]:
    """Read a scores CSV (header ``label,score,group_id``; group optional)."""
    rows: list[ScoreRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if cols[:2] != ["label", "score"] or len(cols) > 3 or (len(cols) == 3 and cols[2] != "group_id"):
            raise ValueError(f"{path}: expected header label,score[,group_id], got {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2 or len(parts) > 3:
                raise ValueError(f"{path}:{lineno}: malformed score row {line!r}")
            label = parts[0].strip()
            if label not in SCORE_LABELS:
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            score = float(parts[1])
            if not math.isfinite(score):
                raise ValueError(f"{path}:{lineno}: non-finite score")
            group = parts[2].strip() if len(parts) == 3 else ""
            rows.append(ScoreRow(label, score, group))
    if not rows:
        raise ValueError(f"{path}: no score rows")
    return rows


def write_scores(rows: list[ScoreRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("label,score,group_id\n")
        for row in rows:
            fh.write(f"{row.label},{row.score:.6f},{row.group}\n")


def to_score_set(rows: list[ScoreRow]) -> ScoreSet:
    bona = [r.score for r in rows if r.label == "bonafide"]
    attacks = [r.score for r in rows if r.label == "attack"]
    return ScoreSet(np.asarray(bona), np.asarray(attacks))


def fuse_rows(rows: list[ScoreRow]) -> list[ScoreRow]:
    """Average scores sharing a group key (multi-crop fusion).

    Rows without a group pass through unchanged.  Output order follows the
    first occurrence of each group; labels must be uniform within a group.
    """
    order: list[int | str] = []
    grouped: dict[str, list[ScoreRow]] = {}
    for idx, row in enumerate(rows):
        if not row.group:
            order.append(idx)
        else:
            if row.group not in grouped:
                grouped[row.group] = []
                order.append(row.group)
            grouped[row.group].append(row)
    out: list[ScoreRow] = []
    for key in order:
        if isinstance(key, int):
            out.append(rows[key])
            continue
        members = grouped[key]
        labels = {m.label for m in members}
        if len(labels) != 1:
            raise ValueError(f"group {key!r} mixes labels {sorted(labels)}")
        mean = float(np.mean([m.score for m in members]))
        out.append(ScoreRow(members[0].label, mean, key))
    return out


def write_det_csv(curve: DetCurve, path: str | Path) -> None:
    def fmt_threshold(t: float) -> str:
        if math.isinf(t):
            return "-inf" if t < 0 else "inf"
        return f"{t:.6f}"

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("threshold,apcer,bpcer\n")
        for t, a, b in zip(curve.thresholds, curve.apcer, curve.bpcer):
            fh.write(f"{fmt_threshold(float(t))},{a:.6f},{b:.6f}\n")
