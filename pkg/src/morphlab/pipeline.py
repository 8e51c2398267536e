"""Dataset preparation: normalization, augmentation, manifest building.

Normalization rescales a face so the eye centers sit 150 px apart, then
crops a 350x400 window centered on the nose tip.  Augmentation expands each
normalized image by the full Cartesian product of horizontal mirroring,
small rotations about the nose tip and either 1-px translations (scheme
``au``, 54 outputs) or five sub-image crops (scheme ``mc``, 30 outputs).

Every generated file is recorded in a manifest row; with a fixed seed the
whole build is reproducible byte-for-byte, including the manifest ordering.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox

from .printscan import PnsParams, simulate_pns
from .raster import LandmarkSet, Raster, bilinear_sample, load_image, pixel_grid, quantize_array, save_image

NORMALIZED_SIZE = (350, 400)  # (width, height)
EYE_DISTANCE = 150.0
DEFAULT_CROP_SIZE = (224, 224)

MANIFEST_FIELDS = ("output_path", "label", "source_ids", "alpha", "transform", "pns_applied", "padded")

LABEL_GENUINE = "genuine"
LABEL_MORPHED = "morphed"


@dataclass(frozen=True)
class FaceAnnotation:
    """Eye centers and nose tip of one face image, in pixel coordinates."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose_tip: tuple[float, float]

    def __post_init__(self) -> None:
        for name in ("left_eye", "right_eye", "nose_tip"):
            pt = getattr(self, name)
            if len(pt) != 2 or not all(np.isfinite(c) for c in pt):
                raise ValueError(f"{name} must be a finite (x, y) pair")
            object.__setattr__(self, name, (float(pt[0]), float(pt[1])))
        if self.eye_distance() <= 0.0:
            raise ValueError("eye centers coincide")

    def eye_distance(self) -> float:
        return float(np.hypot(self.right_eye[0] - self.left_eye[0], self.right_eye[1] - self.left_eye[1]))

    def mirrored(self, width: int) -> "FaceAnnotation":
        """Annotation after horizontal mirroring (eyes swap sides)."""
        flip = lambda p: (float(width - 1) - p[0], p[1])
        return FaceAnnotation(flip(self.right_eye), flip(self.left_eye), flip(self.nose_tip))


@dataclass(frozen=True)
class AnnotationRecord:
    """Parsed sidecar: face points plus optional morph metadata."""

    face: FaceAnnotation
    landmarks: LandmarkSet | None = None
    alpha: float | None = None
    source_ids: str | None = None


def annotation_path(image_path: str | Path) -> Path:
    return Path(image_path).with_suffix(".json")


def load_annotation(path: str | Path) -> AnnotationRecord:
    """Read an annotation sidecar (JSON with left_eye/right_eye/nose_tip,
    optional points array, alpha, source_ids)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        face = FaceAnnotation(tuple(doc["left_eye"]), tuple(doc["right_eye"]), tuple(doc["nose_tip"]))
    except KeyError as exc:
        raise ValueError(f"{path}: annotation missing key {exc}") from exc
    landmarks = LandmarkSet(np.asarray(doc["points"], dtype=np.float64)) if "points" in doc else None
    alpha = float(doc["alpha"]) if "alpha" in doc else None
    source_ids = str(doc["source_ids"]) if "source_ids" in doc else None
    return AnnotationRecord(face, landmarks, alpha, source_ids)


def load_landmarks(path: str | Path) -> LandmarkSet:
    """Landmark set from a sidecar that must carry a points array."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "points" not in doc:
        raise ValueError(f"{path}: no landmark points array")
    return LandmarkSet(np.asarray(doc["points"], dtype=np.float64))


def save_annotation(record: AnnotationRecord, path: str | Path) -> None:
    doc: dict = {
        "left_eye": list(record.face.left_eye),
        "right_eye": list(record.face.right_eye),
        "nose_tip": list(record.face.nose_tip),
    }
    if record.landmarks is not None:
        doc["points"] = record.landmarks.points.tolist()
    if record.alpha is not None:
        doc["alpha"] = record.alpha
    if record.source_ids is not None:
        doc["source_ids"] = record.source_ids
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


# ---------------------------------------------------------------------------
# normalization

def _check_inside(img: Raster, ann: FaceAnnotation) -> None:
    w, h = img.width, img.height
    for name in ("left_eye", "right_eye", "nose_tip"):
        x, y = getattr(ann, name)
        if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
            raise ValueError(f"{name} ({x}, {y}) outside image bounds {w}x{h}")


def _normalize_full(img: Raster, ann: FaceAnnotation) -> tuple[Raster, FaceAnnotation, bool]:
    _check_inside(img, ann)
    scale = EYE_DISTANCE / ann.eye_distance()
    out_w, out_h = NORMALIZED_SIZE
    # nose tip lands on the geometric center of the crop
    off_x = scale * ann.nose_tip[0] - (out_w - 1) / 2.0
    off_y = scale * ann.nose_tip[1] - (out_h - 1) / 2.0
    ys, xs = pixel_grid(out_h, out_w)
    src_x = (xs + off_x) / scale
    src_y = (ys + off_y) / scale
    valid = (src_x >= 0.0) & (src_x <= img.width - 1) & (src_y >= 0.0) & (src_y <= img.height - 1)
    samples = bilinear_sample(img.data.astype(np.float64), src_x, src_y)
    samples[~valid] = 0.0
    padded = bool((~valid).any())

    def tx(p: tuple[float, float]) -> tuple[float, float]:
        return (scale * p[0] - off_x, scale * p[1] - off_y)

    norm_ann = FaceAnnotation(tx(ann.left_eye), tx(ann.right_eye), tx(ann.nose_tip))
    return Raster(quantize_array(samples)), norm_ann, padded


def normalize(img: Raster, ann: FaceAnnotation) -> Raster:
    """Scale to a 150 px interocular distance and crop 350x400 around the
    nose tip; regions falling outside the source are filled with black."""
    return _normalize_full(img, ann)[0]


# ---------------------------------------------------------------------------
# geometric primitives

def mirror(r: Raster) -> Raster:
    return Raster(r.data[:, ::-1, :])


def rotate_about(r: Raster, center: tuple[float, float], degrees: float) -> Raster:
    """Rotate by inverse mapping with bilinear sampling, replicate border.
    Zero degrees is a bit-exact identity."""
    if degrees == 0.0:
        return r
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    cx, cy = center
    ys, xs = pixel_grid(r.height, r.width)
    dx = xs - cx
    dy = ys - cy
    src_x = c * dx + s * dy + cx
    src_y = -s * dx + c * dy + cy
    samples = bilinear_sample(r.data.astype(np.float64), src_x, src_y)
    return Raster(quantize_array(samples))


def translate(r: Raster, tx: int, ty: int) -> Raster:
    """Integer-pixel shift with replicate border (exact, no resampling)."""
    if tx == 0 and ty == 0:
        return r
    h, w = r.height, r.width
    xs = np.clip(np.arange(w) - tx, 0, w - 1)
    ys = np.clip(np.arange(h) - ty, 0, h - 1)
    return Raster(r.data[np.ix_(ys, xs)])


def crop(r: Raster, x0: int, y0: int, cw: int, ch: int) -> Raster:
    if x0 < 0 or y0 < 0 or x0 + cw > r.width or y0 + ch > r.height:
        raise ValueError(f"crop {cw}x{ch}@({x0},{y0}) exceeds raster {r.width}x{r.height}")
    return Raster(r.data[y0 : y0 + ch, x0 : x0 + cw, :])


# ---------------------------------------------------------------------------
# augmentation

_AU_TRANSLATIONS = tuple((tx, ty) for tx in (-1, 0, 1) for ty in (-1, 0, 1))
_ROTATIONS = (-5.0, 0.0, 5.0)
_CROP_NAMES = ("tl", "tr", "bl", "br", "cc")


@dataclass(frozen=True)
class AugmentationPlan:
    """Cartesian expansion recipe for one normalized image.

    Scheme ``au``: mirror x rotation x 9 translations (54 per image).
    Scheme ``mc``: mirror x rotation x 5 crops (30 per image).
    """

    scheme: str
    rotations: tuple[float, ...] = _ROTATIONS
    translations: tuple[tuple[int, int], ...] = _AU_TRANSLATIONS
    crop_size: tuple[int, int] | None = None
    include_mirror: bool = True

    def __post_init__(self) -> None:
        if self.scheme not in ("au", "mc"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "mc" and self.crop_size is None:
            raise ValueError("scheme mc needs a crop size")

    @classmethod
    def au(cls) -> "AugmentationPlan":
        return cls(scheme="au")

    @classmethod
    def mc(cls, crop_size: tuple[int, int] = DEFAULT_CROP_SIZE) -> "AugmentationPlan":
        return cls(scheme="mc", crop_size=crop_size)

    @property
    def multiplicity(self) -> int:
        mirrors = 2 if self.include_mirror else 1
        per_pose = len(self.translations) if self.scheme == "au" else len(_CROP_NAMES)
        return mirrors * len(self.rotations) * per_pose


def _crop_origins(frame: tuple[int, int], crop_size: tuple[int, int]) -> dict[str, tuple[int, int]]:
    w, h = frame
    cw, ch = crop_size
    if cw > w or ch > h:
        raise ValueError(f"crop size {cw}x{ch} exceeds frame {w}x{h}")
    return {
        "tl": (0, 0),
        "tr": (w - cw, 0),
        "bl": (0, h - ch),
        "br": (w - cw, h - ch),
        "cc": ((w - cw) // 2, (h - ch) // 2),
    }


def augment(img: Raster, ann: FaceAnnotation, plan: AugmentationPlan) -> list[tuple[Raster, str]]:
    """Expand one normalized image into (raster, descriptor) pairs.

    Mirror is the outermost loop, then rotation about the (possibly
    mirrored) nose tip, then translation or crop; descriptors are canonical
    under that order.
    """
    if (img.width, img.height) != NORMALIZED_SIZE:
        raise ValueError(f"augment expects a {NORMALIZED_SIZE[0]}x{NORMALIZED_SIZE[1]} input")
    out: list[tuple[Raster, str]] = []
    mirror_states = (False, True) if plan.include_mirror else (False,)
    for mirrored in mirror_states:
        base = mirror(img) if mirrored else img
        base_ann = ann.mirrored(img.width) if mirrored else ann
        for deg in plan.rotations:
            rotated = rotate_about(base, base_ann.nose_tip, deg)
            prefix = f"m{int(mirrored)}_r{deg:+g}"
            if plan.scheme == "au":
                for tx, ty in plan.translations:
                    out.append((translate(rotated, tx, ty), f"{prefix}_tx{tx:+d}_ty{ty:+d}"))
            else:
                origins = _crop_origins((img.width, img.height), plan.crop_size)
                for name in _CROP_NAMES:
                    x0, y0 = origins[name]
                    cw, ch = plan.crop_size
                    out.append((crop(rotated, x0, y0, cw, ch), f"{prefix}_{name}"))
    return out


# ---------------------------------------------------------------------------
# manifest and training-set construction

@dataclass(frozen=True)
class ManifestRow:
    output_path: str
    label: str
    source_ids: str
    alpha: float | None
    transform: str
    pns_applied: bool
    padded: bool


def write_manifest(rows: list[ManifestRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(MANIFEST_FIELDS) + "\n")
        for row in rows:
            alpha = "" if row.alpha is None else f"{row.alpha:.6f}"
            fh.write(
                f"{row.output_path},{row.label},{row.source_ids},{alpha},"
                f"{row.transform},{str(row.pns_applied).lower()},{str(row.padded).lower()}\n"
            )


def read_manifest(path: str | Path) -> list[ManifestRow]:
    rows: list[ManifestRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(MANIFEST_FIELDS):
            raise ValueError(f"{path}: unexpected manifest header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(MANIFEST_FIELDS):
                raise ValueError(f"{path}: malformed manifest row {line!r}")
            rows.append(
                ManifestRow(
                    output_path=parts[0],
                    label=parts[1],
                    source_ids=parts[2],
                    alpha=float(parts[3]) if parts[3] else None,
                    transform=parts[4],
                    pns_applied=parts[5] == "true",
                    padded=parts[6] == "true",
                )
            )
    return rows


_IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


def _list_inputs(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise ValueError(f"{directory}: no images found")
    missing = [str(p) for p in paths if not annotation_path(p).exists()]
    if missing:
        raise ValueError(f"missing annotations for: {', '.join(missing)}")
    return paths


def _balance(genuine: list[Path], morphed: list[Path], seed: int) -> tuple[list[Path], list[Path]]:
    n = min(len(genuine), len(morphed))
    rng = Generator(Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, 0x62616C61]))

    def pick(paths: list[Path]) -> list[Path]:
        if len(paths) == n:
            return paths
        idx = np.sort(rng.choice(len(paths), size=n, replace=False))
        return [paths[i] for i in idx]

    return pick(genuine), pick(morphed)


def build_training_set(
    genuine_dir: str | Path,
    morphed_dir: str | Path,
    scheme: str,
    out_dir: str | Path,
    manifest_path: str | Path,
    *,
    pns: PnsParams | None = None,
    seed: int = 0,
    crop_size: tuple[int, int] = DEFAULT_CROP_SIZE,
    threads: int = 1,
    compress_level: int = 1,
) -> list[ManifestRow]:
    """Normalize, optionally print-scan simulate, augment, and write a
    balanced training set with its manifest.

    The larger class is subsampled deterministically (seeded) to match the
    smaller.  Print-scan simulation runs on the full normalized image before
    augmentation; each image gets a distinct noise stream derived from the
    configured seed and its position in the ordered input list.
    """
    genuine = _list_inputs(genuine_dir)
    morphed = _list_inputs(morphed_dir)
    genuine, morphed = _balance(genuine, morphed, seed)
    plan = AugmentationPlan.au() if scheme == "au" else AugmentationPlan.mc(crop_size)

    out_dir = Path(out_dir)
    for label in (LABEL_GENUINE, LABEL_MORPHED):
        (out_dir / label).mkdir(parents=True, exist_ok=True)

    inputs = [(p, LABEL_GENUINE) for p in genuine] + [(p, LABEL_MORPHED) for p in morphed]
    used_stems: set[str] = set()
    stems: list[str] = []
    for path, label in inputs:
        stem = f"{label}/{path.stem}"
        k = 1
        while stem in used_stems:
            stem = f"{label}/{path.stem}_{k}"
            k += 1
        used_stems.add(stem)
        stems.append(stem)

    def process(item: tuple[int, tuple[Path, str], str]) -> list[ManifestRow]:
        index, (path, label), stem = item
        img = load_image(path)
        record = load_annotation(annotation_path(path))
        norm, norm_ann, padded = _normalize_full(img, record.face)
        applied = pns is not None
        if pns is not None:
            norm = simulate_pns(norm, replace(pns, seed=pns.seed + index))
        rows: list[ManifestRow] = []
        for raster, desc in augment(norm, norm_ann, plan):
            rel = f"{stem}__{desc}.png"
            save_image(raster, out_dir / rel, compress_level=compress_level)
            rows.append(
                ManifestRow(
                    output_path=rel,
                    label=label,
                    source_ids=record.source_ids or path.stem,
                    alpha=record.alpha,
                    transform=desc,
                    pns_applied=applied,
                    padded=padded,
                )
            )
        return rows

    items = list(zip(range(len(inputs)), inputs, stems))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(process, items))
    else:
        per_image = [process(item) for item in items]

    rows = [row for rows_ in per_image for row in rows_]
    write_manifest(rows, manifest_path)
    return rows
