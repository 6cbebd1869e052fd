"""Affine geometry: orientation codes, reorientation and resampling.

Orientation codes are three-letter strings such as ``RAS``: letter i names
the anatomical direction in which voxel axis i increases (R/L, A/P, S/I
for the world x, y and z axes). The code of an affine is found with the
dominant-axis rule: each column of the 3x3 block is labelled by the world
axis holding its strictly largest absolute component.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import AmbiguousOrientation
from .volume import CtVolume, MaskVolume, validate_affine

# world axis index, positive letter, negative letter
_AXIS_LETTERS = (("R", "L"), ("A", "P"), ("S", "I"))
_LETTER_AXIS = {letter: (axis, sign) for axis, pair in enumerate(_AXIS_LETTERS) for sign, letter in zip((1, -1), pair)}

VALID_POLICIES = ("trilinear", "nearest")


def parse_orientation(code: str) -> str:
    """Validate a three-letter orientation code and return it uppercased."""
    code = str(code).upper()
    if len(code) != 3 or any(ch not in _LETTER_AXIS for ch in code):
        raise ValueError(f"orientation code must be 3 letters from RLAPSI, got {code!r}")
    axes = [_LETTER_AXIS[ch][0] for ch in code]
    if len(set(axes)) != 3:
        raise ValueError(f"orientation code {code!r} repeats an anatomical axis")
    return code


def orientation_of(affine: np.ndarray) -> str:
    """Dominant-axis orientation code of an affine.

    Raises AmbiguousOrientation when a column has no strict dominant
    component or two columns map to the same anatomical axis.
    """
    affine = validate_affine(affine)
    letters = []
    taken = set()
    for i in range(3):
        col = affine[:3, i]
        mags = np.abs(col)
        top = int(np.argmax(mags))
        if np.sum(mags == mags[top]) > 1:
            raise AmbiguousOrientation(f"voxel axis {i} has no strict dominant world axis")
        if top in taken:
            raise AmbiguousOrientation(f"voxel axes share dominant world axis {top}")
        taken.add(top)
        letters.append(_AXIS_LETTERS[top][0] if col[top] > 0 else _AXIS_LETTERS[top][1])
    return "".join(letters)


def voxel_spacing(affine: np.ndarray) -> tuple[float, float, float]:
    """Column norms of the 3x3 block, in mm per voxel step."""
    affine = np.asarray(affine, dtype=np.float64)
    return tuple(float(np.linalg.norm(affine[:3, i])) for i in range(3))


def slice_pixel_area(affine: np.ndarray, slice_axis: int) -> float:
    """Pixel footprint in mm^2 within slices taken along ``slice_axis``.

    The area of the parallelogram spanned by the two in-plane affine
    columns, so anisotropic and oblique grids are handled correctly.
    """
    affine = np.asarray(affine, dtype=np.float64)
    in_plane = [i for i in range(3) if i != slice_axis]
    u, v = affine[:3, in_plane[0]], affine[:3, in_plane[1]]
    return float(np.linalg.norm(np.cross(u, v)))


def _index_map(affine: np.ndarray, dims: tuple[int, int, int], target: str) -> tuple[list[int], list[bool], np.ndarray]:
    """Permutation, flips and the index transform for a reorientation."""
    current = orientation_of(affine)
    target = parse_orientation(target)
    perm: list[int] = []
    flips: list[bool] = []
    for ch in target:
        want_axis, want_sign = _LETTER_AXIS[ch]
        src = next(i for i, cur in enumerate(current) if _LETTER_AXIS[cur][0] == want_axis)
        perm.append(src)
        flips.append(_LETTER_AXIS[current[src]][1] != want_sign)
    # old homogeneous index as a function of the new one
    mat = np.zeros((4, 4))
    mat[3, 3] = 1.0
    for new_axis, (src, flip) in enumerate(zip(perm, flips)):
        if flip:
            mat[src, new_axis] = -1.0
            mat[src, 3] = dims[src] - 1
        else:
            mat[src, new_axis] = 1.0
    return perm, flips, mat


def reorient(volume: CtVolume | MaskVolume, target: str) -> CtVolume | MaskVolume:
    """Permute and flip axes so the orientation code becomes ``target``.

    Pure index arithmetic: every voxel keeps its world position exactly.
    """
    data = volume.samples if isinstance(volume, CtVolume) else volume.labels
    perm, flips, mat = _index_map(volume.affine, data.shape, target)
    out = np.transpose(data, perm)
    for axis, flip in enumerate(flips):
        if flip:
            out = np.flip(out, axis=axis)
    out = np.ascontiguousarray(out)
    new_affine = volume.affine @ mat
    if isinstance(volume, CtVolume):
        return CtVolume(out, new_affine, volume.source_id)
    return MaskVolume(out, new_affine, volume.source_id)


def resample(
    volume: CtVolume | MaskVolume,
    target_spacing: tuple[float, float, float],
    interp: str | None = None,
) -> CtVolume | MaskVolume:
    """Resample onto a grid with the requested spacing.

    Output extent per axis is round(dims * spacing / target), at least 1.
    Images default to trilinear interpolation, masks to nearest neighbour;
    samples beyond the input grid clamp to the edge voxel. Direction
    cosines and the translation are preserved, only the spacing changes.
    """
    is_mask = isinstance(volume, MaskVolume)
    if interp is None:
        interp = "nearest" if is_mask else "trilinear"
    if interp not in VALID_POLICIES:
        raise ValueError(f"interp must be one of {VALID_POLICIES}, got {interp!r}")
    target = np.asarray(target_spacing, dtype=np.float64)
    if target.shape != (3,) or np.any(target <= 0):
        raise ValueError(f"target spacing must be 3 positive values, got {target_spacing}")

    data = volume.labels if is_mask else volume.samples
    spacing = np.array(voxel_spacing(volume.affine))
    ratio = target / spacing
    out_dims = tuple(max(1, int(np.floor(d * s / t + 0.5))) for d, s, t in zip(data.shape, spacing, target))

    grids = np.meshgrid(*(np.arange(n, dtype=np.float64) * r for n, r in zip(out_dims, ratio)), indexing="ij")
    order = 0 if interp == "nearest" else 1
    out = ndimage.map_coordinates(data, grids, order=order, mode="nearest", output=data.dtype)

    new_affine = volume.affine.copy()
    new_affine[:3, :3] = volume.affine[:3, :3] * ratio
    if is_mask:
        return MaskVolume(out, new_affine, volume.source_id)
    return CtVolume(out, new_affine, volume.source_id)
