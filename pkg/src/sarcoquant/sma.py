"""Skeletal muscle area (SMA) measurement and sarcopenia classification.

Area comes straight from voxel counting: labelled pixels on one
transverse slice times the pixel footprint from the affine, reported in
cm^2. Classification compares the area against a sex-specific cutoff;
values exactly at the cutoff are not sarcopenic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, MultipleAnnotatedSlices
from .geometry import orientation_of, slice_pixel_area
from .volume import MaskVolume

SEXES = ("male", "female")

# cm^2, area strictly below the cutoff counts as sarcopenic
DEFAULT_CUTOFFS = {"male": 144.0, "female": 92.0}

SLICE_POLICIES = ("single", "sum", "largest")


@dataclass(frozen=True)
class SmaMeasurement:
    """One area measurement; slice_index is -1 when summed over all slices."""

    scan_id: str
    slice_index: int
    pixel_count: int
    pixel_area_mm2: float
    area_cm2: float


@dataclass(frozen=True)
class SarcopeniaAssessment:
    scan_id: str
    area_cm2: float
    sex: str
    cutoff_cm2: float
    sarcopenic: bool


def parse_sex(sex: str) -> str:
    sex = str(sex).lower()
    if sex not in SEXES:
        raise ValueError(f"sex must be one of {SEXES}, got {sex!r}")
    return sex


def axial_axis(affine: np.ndarray) -> int:
    """Voxel axis running superior-inferior, from the orientation code."""
    code = orientation_of(affine)
    return next(i for i, ch in enumerate(code) if ch in "SI")


def _slice_counts(mask: MaskVolume, axis: int) -> np.ndarray:
    other = tuple(i for i in range(3) if i != axis)
    return mask.labels.sum(axis=other)


def annotated_slice_index(mask: MaskVolume) -> int:
    """Index of the single labelled slice along the axial axis."""
    counts = _slice_counts(mask, axial_axis(mask.affine))
    hits = np.flatnonzero(counts)
    if hits.size == 0:
        raise EmptyMask("mask has no labelled voxels")
    if hits.size > 1:
        raise MultipleAnnotatedSlices(
            f"labels found on {hits.size} slices at indices {hits.tolist()}"
        )
    return int(hits[0])


def compute_sma(mask: MaskVolume, slice_index: int, scan_id: str | None = None) -> SmaMeasurement:
    """Measure the labelled area on one slice along the axial axis."""
    axis = axial_axis(mask.affine)
    size = mask.dims[axis]
    if not 0 <= slice_index < size:
        raise IndexError(f"slice index {slice_index} outside 0..{size - 1}")
    count = int(np.take(mask.labels, slice_index, axis=axis).sum())
    pixel_area = slice_pixel_area(mask.affine, axis)
    return SmaMeasurement(
        scan_id=scan_id if scan_id is not None else mask.source_id,
        slice_index=slice_index,
        pixel_count=count,
        pixel_area_mm2=pixel_area,
        area_cm2=count * pixel_area / 100.0,
    )


def measure_with_policy(mask: MaskVolume, policy: str, scan_id: str | None = None) -> SmaMeasurement:
    """Measure under a slice selection policy.

    ``single``: exactly one annotated slice, anything else is an error.
    ``sum``: total labelled area over all slices, slice_index -1.
    ``largest``: the slice with the most labelled pixels.
    ``index=<k>``: the fixed slice k.
    """
    axis = axial_axis(mask.affine)
    sid = scan_id if scan_id is not None else mask.source_id
    if policy == "single":
        return compute_sma(mask, annotated_slice_index(mask), sid)
    if policy == "sum":
        count = int(mask.labels.sum())
        if count == 0:
            raise EmptyMask("mask has no labelled voxels")
        pixel_area = slice_pixel_area(mask.affine, axis)
        return SmaMeasurement(sid, -1, count, pixel_area, count * pixel_area / 100.0)
    if policy == "largest":
        counts = _slice_counts(mask, axis)
        if counts.sum() == 0:
            raise EmptyMask("mask has no labelled voxels")
        return compute_sma(mask, int(np.argmax(counts)), sid)
    if policy.startswith("index="):
        try:
            index = int(policy.split("=", 1)[1])
        except ValueError:
            raise ValueError(f"bad slice policy {policy!r}") from None
        return compute_sma(mask, index, sid)
    raise ValueError(f"slice policy must be one of {SLICE_POLICIES} or index=<k>, got {policy!r}")


def classify(
    area_cm2: float,
    sex: str,
    cutoffs: dict[str, float] | None = None,
    scan_id: str = "",
) -> SarcopeniaAssessment:
    """Compare an area against the sex-specific cutoff."""
    sex = parse_sex(sex)
    table = dict(DEFAULT_CUTOFFS if cutoffs is None else cutoffs)
    cutoff = float(table[sex])
    if not np.isfinite(area_cm2) or area_cm2 < 0:
        raise ValueError(f"area must be a finite non-negative value, got {area_cm2}")
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    return SarcopeniaAssessment(
        scan_id=scan_id,
        area_cm2=float(area_cm2),
        sex=sex,
        cutoff_cm2=cutoff,
        sarcopenic=bool(area_cm2 < cutoff),
    )
