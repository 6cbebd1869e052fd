"""Intensity windowing and deterministic augmentation primitives.

Every operation here is a pure function of its arguments; randomness
stays outside, in :func:`sample_augmentation`, which only draws the
parameters. That keeps training-style augmentation reproducible and lets
each primitive be tested in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import TargetBelowDims, TargetExceedsDims
from .geometry import VALID_POLICIES
from .volume import CtVolume, MaskVolume


@dataclass(frozen=True)
class HuWindow:
    """A closed HU interval used for clipping and normalization."""

    lo: float = -175.0
    hi: float = 250.0

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"window needs lo < hi, got ({self.lo}, {self.hi})")


def clip_hu(volume: CtVolume, window: HuWindow = HuWindow()) -> CtVolume:
    """Clamp samples into the window."""
    clipped = np.clip(volume.samples, np.float32(window.lo), np.float32(window.hi))
    return CtVolume(clipped, volume.affine, volume.source_id)


def normalize_unit(volume: CtVolume, window: HuWindow = HuWindow()) -> CtVolume:
    """Clip to the window, then map it linearly onto [0, 1]."""
    clipped = np.clip(volume.samples.astype(np.float64), window.lo, window.hi)
    scaled = (clipped - window.lo) / (window.hi - window.lo)
    return CtVolume(scaled.astype(np.float32), volume.affine, volume.source_id)


def _rebuild(volume: CtVolume | MaskVolume, data: np.ndarray, affine: np.ndarray):
    if isinstance(volume, MaskVolume):
        return MaskVolume(data, affine, volume.source_id)
    return CtVolume(data, affine, volume.source_id)


def _data(volume: CtVolume | MaskVolume) -> np.ndarray:
    return volume.labels if isinstance(volume, MaskVolume) else volume.samples


def flip(volume: CtVolume | MaskVolume, axis: int) -> CtVolume | MaskVolume:
    """Reverse one voxel axis; the affine is updated so every voxel keeps
    its world position."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    data = _data(volume)
    out = np.ascontiguousarray(np.flip(data, axis=axis))
    mat = np.eye(4)
    mat[axis, axis] = -1.0
    mat[axis, 3] = data.shape[axis] - 1
    return _rebuild(volume, out, volume.affine @ mat)


def pad(volume: CtVolume | MaskVolume, target_dims: tuple[int, int, int], fill: float) -> CtVolume | MaskVolume:
    """Grow to ``target_dims`` with the original block centred.

    When the margin along an axis is odd the extra voxel goes to the high
    side. The translation is shifted so retained voxels stay in place.
    """
    data = _data(volume)
    if any(t < n for t, n in zip(target_dims, data.shape)):
        raise TargetBelowDims(f"pad target {target_dims} is below dims {data.shape}")
    lows = [(t - n) // 2 for t, n in zip(target_dims, data.shape)]
    widths = [(lo, t - n - lo) for lo, t, n in zip(lows, target_dims, data.shape)]
    if isinstance(volume, MaskVolume) and fill not in (0, 1):
        raise ValueError(f"mask pad fill must be 0 or 1, got {fill}")
    out = np.pad(data, widths, mode="constant", constant_values=data.dtype.type(fill))
    mat = np.eye(4)
    mat[:3, 3] = [-lo for lo in lows]
    return _rebuild(volume, out, volume.affine @ mat)


def crop(volume: CtVolume | MaskVolume, target_dims: tuple[int, int, int]) -> CtVolume | MaskVolume:
    """Take the centred block of ``target_dims``; inverse of :func:`pad`."""
    data = _data(volume)
    if any(t > n for t, n in zip(target_dims, data.shape)):
        raise TargetExceedsDims(f"crop target {target_dims} exceeds dims {data.shape}")
    starts = [(n - t) // 2 for n, t in zip(data.shape, target_dims)]
    slices = tuple(slice(s, s + t) for s, t in zip(starts, target_dims))
    out = np.ascontiguousarray(data[slices])
    mat = np.eye(4)
    mat[:3, 3] = starts
    return _rebuild(volume, out, volume.affine @ mat)


def _snap_to_grid(coords: np.ndarray) -> np.ndarray:
    # without this, quarter turns leak fill through ~1e-16 rounding of cos(90 deg)
    nearest = np.rint(coords)
    return np.where(np.abs(coords - nearest) < 1e-9, nearest, coords)


def rotate_inplane(
    volume: CtVolume | MaskVolume,
    angle_deg: float,
    interp: str | None = None,
    fill: float = 0.0,
) -> CtVolume | MaskVolume:
    """Rotate each transverse slice about its centre.

    Positive angles turn counterclockwise in the (axis 0, axis 1) plane.
    An augmentation step: the sample grid geometry (affine) is left as is.
    """
    is_mask = isinstance(volume, MaskVolume)
    if interp is None:
        interp = "nearest" if is_mask else "trilinear"
    if interp not in VALID_POLICIES:
        raise ValueError(f"interp must be one of {VALID_POLICIES}, got {interp!r}")
    if is_mask and fill not in (0, 1):
        raise ValueError(f"mask rotation fill must be 0 or 1, got {fill}")
    data = _data(volume)
    nx, ny = data.shape[:2]
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    ii, jj = np.meshgrid(np.arange(nx, dtype=np.float64), np.arange(ny, dtype=np.float64), indexing="ij")
    di, dj = ii - cx, jj - cy
    # inverse rotation: where each output pixel samples the input
    src_i = _snap_to_grid(cx + cos_t * di + sin_t * dj)
    src_j = _snap_to_grid(cy - sin_t * di + cos_t * dj)
    order = 0 if interp == "nearest" else 1
    out = np.empty_like(data)
    for k in range(data.shape[2]):
        out[:, :, k] = ndimage.map_coordinates(
            data[:, :, k], [src_i, src_j], order=order, mode="constant",
            cval=data.dtype.type(fill), output=data.dtype,
        )
    return _rebuild(volume, out, volume.affine.copy())


@dataclass(frozen=True)
class AugmentationPlan:
    """Parameters for one augmented sample, drawn once and applied to the
    image and its mask identically."""

    angle_deg: float
    flip_axis: int | None
    crop_dims: tuple[int, int, int]


def sample_augmentation(
    rng: np.random.Generator,
    dims: tuple[int, int, int],
    max_angle_deg: float = 10.0,
    crop_inplane: int = 192,
) -> AugmentationPlan:
    """Draw rotation, flip and crop parameters for a volume of ``dims``."""
    angle = float(rng.uniform(-max_angle_deg, max_angle_deg))
    flip_axis = int(rng.integers(0, 2)) if rng.random() < 0.5 else None
    side = min(crop_inplane, dims[0], dims[1])
    return AugmentationPlan(angle, flip_axis, (side, side, dims[2]))


def apply_augmentation(
    image: CtVolume,
    mask: MaskVolume,
    plan: AugmentationPlan,
    fill: float = HuWindow().lo,
) -> tuple[CtVolume, MaskVolume]:
    """Apply one plan to an image and mask pair.

    The image rotates with trilinear interpolation and window-floor fill;
    the mask uses nearest neighbour and zero fill, so it stays binary.
    """
    out_image = rotate_inplane(image, plan.angle_deg, "trilinear", fill)
    out_mask = rotate_inplane(mask, plan.angle_deg, "nearest", 0)
    if plan.flip_axis is not None:
        out_image = flip(out_image, plan.flip_axis)
        out_mask = flip(out_mask, plan.flip_axis)
    out_image = crop(out_image, plan.crop_dims)
    out_mask = crop(out_mask, plan.crop_dims)
    return out_image, out_mask
