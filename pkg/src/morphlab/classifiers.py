"""Linear SVM and collaborative-representation classification over
externally produced feature vectors.

Both classifiers consume fixed-length float features labeled genuine (+1) or
morphed (-1) and emit a morph-likelihood score in [0, 1] (higher means more
morph-like), the orientation expected by the evaluation metrics.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

LABEL_GENUINE = 1
LABEL_MORPHED = -1

_LABEL_TOKENS = {
    "genuine": LABEL_GENUINE,
    "bonafide": LABEL_GENUINE,
    "1": LABEL_GENUINE,
    "+1": LABEL_GENUINE,
    "morphed": LABEL_MORPHED,
    "attack": LABEL_MORPHED,
    "-1": LABEL_MORPHED,
}

_MAGIC = b"MCLF"
_VERSION = 1
_KIND_SVM = 1
_KIND_CRC = 2


@dataclass(frozen=True)
class FeatureSet:
    """Labeled feature vectors: (n, dim) float matrix plus +-1 labels."""

    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        vecs = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if vecs.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {vecs.shape}")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("features contain non-finite values")
        if labels.shape != (vecs.shape[0],):
            raise ValueError("label count does not match sample count")
        if not np.all(np.isin(labels, (LABEL_GENUINE, LABEL_MORPHED))):
            raise ValueError("labels must be +1 (genuine) or -1 (morphed)")
        vecs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureSet":
        """Read ``label,v1,...,vd`` rows (no header)."""
        vectors: list[list[float]] = []
        labels: list[int] = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                token = parts[0].strip().lower()
                if token not in _LABEL_TOKENS:
                    raise ValueError(f"{path}:{lineno}: unknown label {parts[0]!r}")
                labels.append(_LABEL_TOKENS[token])
                vectors.append([float(v) for v in parts[1:]])
        if not vectors:
            raise ValueError(f"{path}: no feature rows")
        widths = {len(v) for v in vectors}
        if len(widths) != 1:
            raise ValueError(f"{path}: inconsistent feature dimensionality {sorted(widths)}")
        return cls(np.asarray(vectors), np.asarray(labels))


@dataclass(frozen=True)
class LinearModel:
    """Hyperplane scorer: s(x) = <w, x> + b, positive means genuine."""

    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise ValueError("linear model parameters must be a finite 1-D weight vector and bias")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


class CrcModel:
    """Collaborative-representation model: ridge coding over the training
    dictionary, decided by per-class reconstruction residuals."""

    def __init__(self, dictionary: np.ndarray, labels: np.ndarray, lam: float):
        dictionary = np.ascontiguousarray(np.asarray(dictionary, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(labels, dtype=np.int64))
        if dictionary.ndim != 2 or dictionary.shape[1] != labels.shape[0]:
            raise ValueError("dictionary must be (dim, n) with one label per column")
        if lam <= 0:
            raise ValueError("lambda must be positive")
        self.dictionary = dictionary
        self.labels = labels
        self.lam = float(lam)
        self._factor = None

    @property
    def dim(self) -> int:
        return self.dictionary.shape[0]

    def _solve_operator(self):
        # (D^T D + lambda I) factored once, lazily (not serialized)
        if self._factor is None:
            n = self.dictionary.shape[1]
            gram = self.dictionary.T @ self.dictionary + self.lam * np.eye(n)
            self._factor = cho_factor(gram)
        return self._factor

    def code(self, x: np.ndarray) -> np.ndarray:
        return cho_solve(self._solve_operator(), self.dictionary.T @ x)


def hinge_objective(fs: FeatureSet, w: np.ndarray, b: float, c: float) -> float:
    margins = fs.labels * (fs.vectors @ w + b)
    return 0.5 * float(w @ w) + c * float(np.maximum(0.0, 1.0 - margins).sum())


def train_svm(
    fs: FeatureSet, c: float = 1.0, epochs: int = 1000, tol: float = 1e-4, seed: int = 0
) -> LinearModel:
    """Fit the soft-margin hyperplane by seeded stochastic subgradient
    descent on 0.5*|w|^2 + C * sum(hinge).

    Stops at the epoch cap or when the objective changes by less than
    ``tol`` between epochs.  Identical inputs and seed reproduce the exact
    same model.
    """
    n = len(fs)
    if n == 0 or len(set(fs.labels.tolist())) < 2:
        raise ValueError("training needs at least one sample of each class")
    lam = 1.0 / (c * n)
    rng = Generator(Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, 0x73766D]))
    w = np.zeros(fs.dim)
    b = 0.0
    t = 0
    shift = 2 * n  # tempers the early 1/(lam*t) steps
    prev = hinge_objective(fs, w, b, c)
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + shift))
            x = fs.vectors[i]
            y = float(fs.labels[i])
            violated = y * (float(x @ w) + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * y * x
                b += eta * y
        obj = hinge_objective(fs, w, b, c)
        if abs(prev - obj) < tol:
            break
        prev = obj
    return LinearModel(w, b)


def train_crc(fs: FeatureSet, lam: float = 1e-3) -> CrcModel:
    """Build the ridge-coded dictionary: unit-normalized training columns
    and a single factorization of the regularized Gram matrix."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if len(fs) == 0 or len(set(fs.labels.tolist())) < 2:
        raise ValueError("training needs at least one sample of each class")
    norms = np.linalg.norm(fs.vectors, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm feature vector cannot be normalized")
    dictionary = (fs.vectors / norms[:, np.newaxis]).T
    model = CrcModel(dictionary, fs.labels, lam)
    model._solve_operator()
    return model


def _complement_stable(q: float) -> float:
    # double complement makes q a fixed point of further 1-x round trips
    return 1.0 - (1.0 - q)


def _crc_score(r_genuine: float, r_morphed: float) -> float:
    total = r_genuine + r_morphed
    if total == 0.0:
        return 0.5
    q = _complement_stable(min(r_genuine, r_morphed) / total)
    # residual ratio r_g / (r_g + r_m), computed so that swapping the class
    # tags yields exactly 1 - score
    return q if r_genuine <= r_morphed else 1.0 - q


def classify(model: LinearModel | CrcModel, x: np.ndarray) -> tuple[int, float]:
    """Score one feature vector; returns (label, morph-likelihood score).

    SVM scores map the signed distance through a logistic; CRC scores are
    the normalized genuine-class residual.  Label is morphed when the score
    reaches 0.5.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ValueError(f"feature dimension {x.shape} does not match model dim {model.dim}")
    if isinstance(model, LinearModel):
        s = float(model.weights @ x) + model.bias
        score = float(expit(-s))
    else:
        coef = model.code(x)
        residuals = {}
        for cls in (LABEL_GENUINE, LABEL_MORPHED):
            mask = model.labels == cls
            recon = model.dictionary[:, mask] @ coef[mask]
            residuals[cls] = float(np.linalg.norm(x - recon))
        score = _crc_score(residuals[LABEL_GENUINE], residuals[LABEL_MORPHED])
    label = LABEL_MORPHED if score >= 0.5 else LABEL_GENUINE
    return label, score


# ---------------------------------------------------------------------------
# model serialization (versioned binary, little-endian)

def save_model(model: LinearModel | CrcModel, path: str | Path) -> None:
    parts = [_MAGIC, struct.pack("<BB", _VERSION, _KIND_SVM if isinstance(model, LinearModel) else _KIND_CRC)]
    if isinstance(model, LinearModel):
        parts.append(struct.pack("<I", model.dim))
        parts.append(struct.pack("<d", model.bias))
        parts.append(model.weights.astype("<f8").tobytes())
    else:
        parts.append(struct.pack("<I", model.dim))
        parts.append(struct.pack("<dI", model.lam, model.dictionary.shape[1]))
        parts.append(model.labels.astype("<i1").tobytes())
        parts.append(model.dictionary.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> LinearModel | CrcModel:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a classifier model file")
    version, kind = struct.unpack_from("<BB", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    (dim,) = struct.unpack_from("<I", data, 6)
    off = 10
    if kind == _KIND_SVM:
        (bias,) = struct.unpack_from("<d", data, off)
        weights = np.frombuffer(data, dtype="<f8", count=dim, offset=off + 8)
        return LinearModel(weights.copy(), bias)
    if kind == _KIND_CRC:
        lam, n = struct.unpack_from("<dI", data, off)
        off += 12
        labels = np.frombuffer(data, dtype="<i1", count=n, offset=off).astype(np.int64)
        off += n
        dictionary = np.frombuffer(data, dtype="<f8", count=dim * n, offset=off).reshape(dim, n)
        return CrcModel(dictionary.copy(), labels, lam)
    raise ValueError(f"{path}: unknown model kind {kind}")
