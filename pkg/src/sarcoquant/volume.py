"""Core volume containers: voxel samples plus a voxel-to-world affine.

Conventions used throughout the toolkit:

* volumes are 3-D arrays indexed (i, j, k), world units are millimetres
* image samples are float32 Hounsfield units (or dimensionless after
  normalization), mask labels are uint8 in {0, 1}
* the affine is a 4x4 float64 matrix mapping homogeneous voxel indices
  to world coordinates; loaded volumes are treated as immutable
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAffine, NonFiniteAfterScaling

# Plausible CT range in HU; values outside it are suspicious but not fatal.
HU_RANGE = (-1024.0, 3071.0)

_DET_EPS = 1e-9


def validate_affine(affine: np.ndarray) -> np.ndarray:
    """Check shape, last row and invertibility; return as float64."""
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (4, 4):
        raise DegenerateAffine(f"affine must be 4x4, got {affine.shape}")
    if not np.array_equal(affine[3], [0.0, 0.0, 0.0, 1.0]):
        raise DegenerateAffine(f"affine last row must be (0, 0, 0, 1), got {affine[3]}")
    if abs(np.linalg.det(affine[:3, :3])) < _DET_EPS:
        raise DegenerateAffine("affine 3x3 block is singular")
    return affine


@dataclass
class CtVolume:
    """A CT image: float32 samples on a 3-D grid with world geometry."""

    samples: np.ndarray
    affine: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 3:
            raise ValueError(f"samples must be 3-D, got {samples.ndim} dims")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteAfterScaling("image samples contain non-finite values")
        self.samples = samples
        self.affine = validate_affine(self.affine)
        lo, hi = float(samples.min(initial=0.0)), float(samples.max(initial=0.0))
        if samples.size and (lo < HU_RANGE[0] or hi > HU_RANGE[1]):
            warnings.warn(
                f"sample range [{lo:.1f}, {hi:.1f}] outside plausible CT range "
                f"[{HU_RANGE[0]:.0f}, {HU_RANGE[1]:.0f}]",
                stacklevel=2,
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.samples.shape  # type: ignore[return-value]


@dataclass
class MaskVolume:
    """A binary segmentation on the same grid layout as CtVolume."""

    labels: np.ndarray
    affine: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 3:
            raise ValueError(f"labels must be 3-D, got {labels.ndim} dims")
        labels = labels.astype(np.uint8, copy=False)
        bad = np.setdiff1d(np.unique(labels), [0, 1])
        if bad.size:
            raise ValueError(f"labels must be 0 or 1, found {bad.tolist()}")
        self.labels = labels
        self.affine = validate_affine(self.affine)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape  # type: ignore[return-value]


@dataclass
class MaskSlice:
    """A single 2-D binary mask with its pixel footprint in mm^2."""

    labels: np.ndarray
    pixel_area_mm2: float

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"slice labels must be 2-D, got {labels.ndim} dims")
        labels = labels.astype(np.uint8, copy=False)
        bad = np.setdiff1d(np.unique(labels), [0, 1])
        if bad.size:
            raise ValueError(f"labels must be 0 or 1, found {bad.tolist()}")
        if not self.pixel_area_mm2 > 0:
            raise ValueError("pixel_area_mm2 must be positive")
        self.labels = labels

    @property
    def pixel_count(self) -> int:
        return int(self.labels.sum())

    @property
    def area_cm2(self) -> float:
        # 100 mm^2 per cm^2
        return self.pixel_count * self.pixel_area_mm2 / 100.0


def geometry_matches(
    a: CtVolume | MaskVolume,
    b: CtVolume | MaskVolume,
    tol: float = 1e-4,
) -> bool:
    """True when dims are equal and affines agree elementwise within tol."""
    return a.dims == b.dims and bool(np.all(np.abs(a.affine - b.affine) <= tol))
