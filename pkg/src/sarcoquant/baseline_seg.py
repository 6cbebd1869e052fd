"""Deterministic threshold-and-morphology muscle segmentation.

A reference segmenter for one transverse HU slice, useful as a
comparison baseline and for exercising the evaluation path end to end.
Pipeline: find the body as the largest 4-connected component above an
air threshold, keep pixels inside the muscle HU window, open with a
small disk to cut thin bridges, then drop components below a physical
area floor. 4-connectivity throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptySlice
from .preprocess import HuWindow
from .volume import MaskSlice

# 4-connected neighbourhood
_CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SegParams:
    muscle_window: HuWindow = field(default_factory=lambda: HuWindow(-29.0, 150.0))
    body_threshold_hu: float = -500.0
    opening_radius_px: int = 1
    min_component_mm2: float = 100.0

    def __post_init__(self) -> None:
        if self.opening_radius_px < 0:
            raise ValueError("opening radius must be non-negative")
        if self.min_component_mm2 < 0:
            raise ValueError("component area floor must be non-negative")


def disk(radius: int) -> np.ndarray:
    """Boolean disk structuring element: x^2 + y^2 <= radius^2."""
    span = np.arange(-radius, radius + 1)
    xx, yy = np.meshgrid(span, span, indexing="ij")
    return (xx * xx + yy * yy) <= radius * radius


def _largest_component(binary: np.ndarray) -> np.ndarray | None:
    labelled, count = ndimage.label(binary, structure=_CROSS)
    if count == 0:
        return None
    sizes = ndimage.sum_labels(binary, labelled, index=np.arange(1, count + 1))
    return labelled == (int(np.argmax(sizes)) + 1)


def segment_slice(hu_slice: np.ndarray, pixel_area_mm2: float, params: SegParams = SegParams()) -> MaskSlice:
    """Segment muscle on one 2-D HU slice."""
    hu = np.asarray(hu_slice, dtype=np.float32)
    if hu.ndim != 2:
        raise ValueError(f"expected a 2-D slice, got {hu.ndim} dims")
    if not pixel_area_mm2 > 0:
        raise ValueError("pixel_area_mm2 must be positive")

    body = _largest_component(hu > params.body_threshold_hu)
    if body is None:
        raise EmptySlice("no pixels above the body threshold")

    window = params.muscle_window
    candidate = body & (hu >= window.lo) & (hu <= window.hi)
    if params.opening_radius_px > 0:
        candidate = ndimage.binary_opening(candidate, structure=disk(params.opening_radius_px))

    labelled, count = ndimage.label(candidate, structure=_CROSS)
    if count:
        sizes = ndimage.sum_labels(candidate, labelled, index=np.arange(1, count + 1))
        keep = np.flatnonzero(sizes * pixel_area_mm2 >= params.min_component_mm2) + 1
        candidate = np.isin(labelled, keep)

    return MaskSlice(candidate.astype(np.uint8), float(pixel_area_mm2))
