"""morphlab: deterministic face-morph generation, print-and-scan
simulation, dataset pipelines and detection metrics."""

from .classifiers import CrcModel, FeatureSet, LinearModel, classify, train_crc, train_svm
from .metrics import DetCurve, ScoreSet, accuracy, bpcer_at_apcer, det_curve, eer, rates_at
from .morphing import DEFAULT_ALPHA_GRID, MorphSpec, WarpMesh, build_mesh, interpolate_landmarks, morph, warp_sample
from .pipeline import AugmentationPlan, FaceAnnotation, ManifestRow, augment, build_training_set, normalize
from .printscan import NoiseField, PnsParams, edge_noise_term, psf_blur, responsivity, simulate_pns
from .raster import FloatRaster, LandmarkSet, Raster, load_image, quantize, save_image, to_float
from .spectral import Spectrum, hf_energy_ratio, magnitude_spectrum, spectral_angle, spectral_correlation

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan", "CrcModel", "DEFAULT_ALPHA_GRID", "DetCurve", "FaceAnnotation",
    "FeatureSet", "FloatRaster", "LandmarkSet", "LinearModel", "ManifestRow", "MorphSpec",
    "NoiseField", "PnsParams", "Raster", "ScoreSet", "Spectrum", "WarpMesh", "accuracy",
    "augment", "bpcer_at_apcer", "build_mesh", "build_training_set", "classify", "det_curve",
    "eer", "edge_noise_term", "hf_energy_ratio", "interpolate_landmarks", "load_image",
    "magnitude_spectrum", "morph", "normalize", "psf_blur", "quantize", "rates_at",
    "responsivity", "save_image", "simulate_pns", "spectral_angle", "spectral_correlation",
    "to_float", "train_crc", "train_svm", "warp_sample",
]
