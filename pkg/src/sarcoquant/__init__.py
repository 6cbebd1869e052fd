"""Skeletal muscle area measurement and sarcopenia assessment from CT.

A small toolkit around one clinical workflow: load a CT volume and an
L3 muscle mask (NIfTI or a DICOM series), measure the cross-sectional
muscle area in cm^2, classify sarcopenia against sex-specific cutoffs,
and score predicted masks against references. A threshold baseline
segmenter and a synthetic phantom with a closed-form area support
validation end to end.
"""

from .baseline_seg import SegParams, segment_slice
from .config import RunConfig, build_config
from .geometry import orientation_of, reorient, resample, slice_pixel_area, voxel_spacing
from .metrics import (
    ClassificationMetrics,
    EvalRecord,
    SummaryStats,
    area_errors,
    confusion_metrics,
    dice,
    roc_auc,
    summarize,
)
from .nifti_io import load_volume, read_volume, save_volume, write_volume
from .phantom import PhantomSpec, generate
from .preprocess import HuWindow, clip_hu, crop, flip, normalize_unit, pad, rotate_inplane
from .sma import (
    DEFAULT_CUTOFFS,
    SarcopeniaAssessment,
    SmaMeasurement,
    annotated_slice_index,
    classify,
    compute_sma,
    measure_with_policy,
)
from .volume import CtVolume, MaskSlice, MaskVolume

__version__ = "0.1.0"

__all__ = [
    "CtVolume",
    "MaskVolume",
    "MaskSlice",
    "HuWindow",
    "RunConfig",
    "SegParams",
    "PhantomSpec",
    "SmaMeasurement",
    "SarcopeniaAssessment",
    "EvalRecord",
    "ClassificationMetrics",
    "SummaryStats",
    "DEFAULT_CUTOFFS",
    "load_volume",
    "save_volume",
    "read_volume",
    "write_volume",
    "orientation_of",
    "reorient",
    "resample",
    "voxel_spacing",
    "slice_pixel_area",
    "clip_hu",
    "normalize_unit",
    "flip",
    "pad",
    "crop",
    "rotate_inplane",
    "annotated_slice_index",
    "compute_sma",
    "measure_with_policy",
    "classify",
    "segment_slice",
    "dice",
    "area_errors",
    "confusion_metrics",
    "roc_auc",
    "summarize",
    "generate",
    "build_config",
]
