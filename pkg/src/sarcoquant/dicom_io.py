"""DICOM Part-10 slice parsing and CT series assembly.

Supports uncompressed little-endian transfer syntaxes only (implicit VR
1.2.840.10008.1.2 and explicit VR 1.2.840.10008.1.2.1). Only the tags
needed for geometry and HU decoding are interpreted; sequences and
everything else are skipped. Compressed syntaxes are rejected rather
than silently misdecoded.

Assembled volumes are indexed (column, row, slice): voxel step i moves
along the first orientation triple, step j along the second, step k
along their cross product.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CompressedTransferSyntax,
    DuplicatePosition,
    InsufficientSlices,
    InvalidOrientation,
    MissingPreamble,
    MissingRequiredTag,
    MixedSeries,
    NonUniformSliceSpacing,
    PixelDataLengthMismatch,
    UnsupportedPixelFormat,
)
from .volume import CtVolume

TS_IMPLICIT_LE = "1.2.840.10008.1.2"
TS_EXPLICIT_LE = "1.2.840.10008.1.2.1"

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_SERIES_UID = (0x0020, 0x000E)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_IMAGE_POSITION = (0x0020, 0x0032)
TAG_IMAGE_ORIENTATION = (0x0020, 0x0037)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLS = (0x0028, 0x0011)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

_WANTED = {
    TAG_SERIES_UID,
    TAG_INSTANCE_NUMBER,
    TAG_IMAGE_POSITION,
    TAG_IMAGE_ORIENTATION,
    TAG_ROWS,
    TAG_COLS,
    TAG_PIXEL_SPACING,
    TAG_BITS_ALLOCATED,
    TAG_PIXEL_REPRESENTATION,
    TAG_RESCALE_INTERCEPT,
    TAG_RESCALE_SLOPE,
    TAG_PIXEL_DATA,
}

# explicit VRs carrying a 2-byte reserved field and 4-byte length
_LONG_VRS = {b"OB", b"OW", b"OF", b"SQ", b"UT", b"UN"}

_ITEM = (0xFFFE, 0xE000)
_ITEM_DELIM = (0xFFFE, 0xE00D)
_SEQ_DELIM = (0xFFFE, 0xE0DD)

_UNDEFINED = 0xFFFFFFFF

_COSINE_TOL = 1e-3
_SPACING_TOL_MM = 0.01
_DUP_TOL_MM = 1e-6


@dataclass
class DicomSlice:
    """One decoded CT slice: stored pixels plus geometry and rescale tags."""

    rows: int
    cols: int
    pixel_spacing: tuple[float, float]  # (row_mm, col_mm) as stored
    image_position: np.ndarray  # (3,) mm
    image_orientation: np.ndarray  # (6,) col-direction then row-direction cosines
    rescale_slope: float
    rescale_intercept: float
    instance_number: int
    series_uid: str
    stored_pixels: np.ndarray  # (rows, cols) integer samples

    def __post_init__(self) -> None:
        self.image_position = np.asarray(self.image_position, dtype=np.float64)
        self.image_orientation = np.asarray(self.image_orientation, dtype=np.float64)
        u, v = self.image_orientation[:3], self.image_orientation[3:]
        if abs(np.linalg.norm(u) - 1) > _COSINE_TOL or abs(np.linalg.norm(v) - 1) > _COSINE_TOL:
            raise InvalidOrientation("orientation cosines are not unit length")
        if abs(float(np.dot(u, v))) > _COSINE_TOL:
            raise InvalidOrientation("orientation cosines are not orthogonal")
        if self.stored_pixels.shape != (self.rows, self.cols):
            raise PixelDataLengthMismatch(
                f"pixel array {self.stored_pixels.shape} does not match "
                f"rows x cols ({self.rows}, {self.cols})"
            )

    def hu_pixels(self) -> np.ndarray:
        """Stored values mapped to HU with this slice's rescale pair."""
        hu = self.stored_pixels.astype(np.float64) * self.rescale_slope + self.rescale_intercept
        return hu.astype(np.float32)


def _tag_at(blob: bytes, pos: int) -> tuple[int, int]:
    return struct.unpack_from("<HH", blob, pos)


def _skip_undefined_item(blob: bytes, pos: int, explicit: bool) -> int:
    while pos + 8 <= len(blob):
        if _tag_at(blob, pos) == _ITEM_DELIM:
            return pos + 8
        pos = _skip_element(blob, pos, explicit)
    raise PixelDataLengthMismatch("unterminated sequence item")


def _skip_sequence_body(blob: bytes, pos: int, explicit: bool) -> int:
    """Advance past an undefined-length sequence, handling nesting."""
    while pos + 8 <= len(blob):
        tag = _tag_at(blob, pos)
        (length,) = struct.unpack_from("<I", blob, pos + 4)
        pos += 8
        if tag == _SEQ_DELIM:
            return pos
        if tag != _ITEM:
            raise PixelDataLengthMismatch(f"unexpected tag {tag} inside sequence")
        if length == _UNDEFINED:
            pos = _skip_undefined_item(blob, pos, explicit)
        else:
            pos += length
    raise PixelDataLengthMismatch("unterminated sequence")


def _element_head(blob: bytes, pos: int, explicit: bool) -> tuple[tuple[int, int], bytes, int, int]:
    """Decode one element header: (tag, vr, value_length, value_offset)."""
    tag = _tag_at(blob, pos)
    if explicit:
        vr = blob[pos + 4 : pos + 6]
        if vr in _LONG_VRS:
            (length,) = struct.unpack_from("<I", blob, pos + 8)
            return tag, vr, length, pos + 12
        (length,) = struct.unpack_from("<H", blob, pos + 6)
        return tag, vr, length, pos + 8
    (length,) = struct.unpack_from("<I", blob, pos + 4)
    return tag, b"UN", length, pos + 8


def _skip_element(blob: bytes, pos: int, explicit: bool) -> int:
    tag, vr, length, value_off = _element_head(blob, pos, explicit)
    if length == _UNDEFINED:
        return _skip_sequence_body(blob, value_off, explicit)
    return value_off + length


def _walk(blob: bytes, pos: int, explicit: bool):
    """Yield (tag, value_bytes) for defined-length elements; skip the rest."""
    end = len(blob)
    while pos + 8 <= end:
        tag, vr, length, value_off = _element_head(blob, pos, explicit)
        if length == _UNDEFINED:
            pos = _skip_sequence_body(blob, value_off, explicit)
            continue
        if value_off + length > end:
            raise PixelDataLengthMismatch(
                f"element ({tag[0]:04X},{tag[1]:04X}) runs past end of file"
            )
        if vr == b"SQ":
            pos = value_off + length
            continue
        yield tag, blob[value_off : value_off + length]
        pos = value_off + length


def _text(value: bytes) -> str:
    return value.decode("ascii", errors="replace").strip("\x00 ")


def _decimals(value: bytes) -> list[float]:
    parts = [p for p in _text(value).split("\\") if p.strip()]
    return [float(p) for p in parts]


def parse_slice(blob: bytes) -> DicomSlice:
    """Decode one Part-10 file into a DicomSlice."""
    if len(blob) < 132 or blob[128:132] != b"DICM":
        raise MissingPreamble("no 128-byte preamble followed by 'DICM'")

    # file meta group: always explicit VR little endian
    pos = 132
    transfer_syntax = None
    while pos + 8 <= len(blob) and _tag_at(blob, pos)[0] == 0x0002:
        tag, vr, length, value_off = _element_head(blob, pos, explicit=True)
        if tag == TAG_TRANSFER_SYNTAX:
            transfer_syntax = _text(blob[value_off : value_off + length])
        pos = value_off + length
    if transfer_syntax is None:
        raise MissingRequiredTag(TAG_TRANSFER_SYNTAX, "TransferSyntaxUID")
    if transfer_syntax == TS_EXPLICIT_LE:
        explicit = True
    elif transfer_syntax == TS_IMPLICIT_LE:
        explicit = False
    else:
        raise CompressedTransferSyntax(
            f"transfer syntax {transfer_syntax} is not uncompressed little endian"
        )

    found: dict[tuple[int, int], bytes] = {}
    for tag, value in _walk(blob, pos, explicit):
        if tag in _WANTED:
            found[tag] = value

    def require(tag: tuple[int, int], name: str) -> bytes:
        if tag not in found:
            raise MissingRequiredTag(tag, name)
        return found[tag]

    rows = struct.unpack("<H", require(TAG_ROWS, "Rows"))[0]
    cols = struct.unpack("<H", require(TAG_COLS, "Columns"))[0]
    spacing = _decimals(require(TAG_PIXEL_SPACING, "PixelSpacing"))
    position = _decimals(require(TAG_IMAGE_POSITION, "ImagePositionPatient"))
    orientation = _decimals(require(TAG_IMAGE_ORIENTATION, "ImageOrientationPatient"))
    if len(spacing) != 2 or len(position) != 3 or len(orientation) != 6:
        raise InvalidOrientation("geometry tags have wrong value counts")
    series_uid = _text(require(TAG_SERIES_UID, "SeriesInstanceUID"))
    instance_number = int(_text(require(TAG_INSTANCE_NUMBER, "InstanceNumber")))
    bits = struct.unpack("<H", require(TAG_BITS_ALLOCATED, "BitsAllocated"))[0]
    signed = struct.unpack("<H", require(TAG_PIXEL_REPRESENTATION, "PixelRepresentation"))[0]

    if TAG_RESCALE_SLOPE in found and TAG_RESCALE_INTERCEPT in found:
        slope = _decimals(found[TAG_RESCALE_SLOPE])[0]
        intercept = _decimals(found[TAG_RESCALE_INTERCEPT])[0]
    else:
        warnings.warn("rescale slope/intercept missing, assuming 1 and 0", stacklevel=2)
        slope, intercept = 1.0, 0.0

    if bits not in (8, 16) or signed not in (0, 1):
        raise UnsupportedPixelFormat(
            f"bits allocated {bits} with pixel representation {signed} not supported"
        )
    pixel_bytes = require(TAG_PIXEL_DATA, "PixelData")
    expected = rows * cols * (bits // 8)
    padded = expected + (expected % 2)  # values are padded to even length
    if len(pixel_bytes) not in (expected, padded):
        raise PixelDataLengthMismatch(
            f"pixel data is {len(pixel_bytes)} bytes, expected {expected}"
        )
    dtype = {(8, 0): "<u1", (8, 1): "<i1", (16, 0): "<u2", (16, 1): "<i2"}[(bits, signed)]
    pixels = np.frombuffer(pixel_bytes[:expected], dtype=dtype).reshape(rows, cols)

    return DicomSlice(
        rows=rows,
        cols=cols,
        pixel_spacing=(spacing[0], spacing[1]),
        image_position=np.array(position),
        image_orientation=np.array(orientation),
        rescale_slope=slope,
        rescale_intercept=intercept,
        instance_number=instance_number,
        series_uid=series_uid,
        stored_pixels=pixels,
    )


def assemble_series(slices: list[DicomSlice]) -> CtVolume:
    """Stack slices of one series into a CtVolume in HU.

    Slices are ordered by the projection of their position onto the slice
    normal, so the input order does not matter. The affine maps voxel
    (i, j, k) to ``position_0 + i*col_step + j*row_step + k*slice_step``.
    """
    if len(slices) < 2:
        raise InsufficientSlices(f"need at least 2 slices, got {len(slices)}")
    first = slices[0]
    for s in slices[1:]:
        if s.series_uid != first.series_uid:
            raise MixedSeries(f"series UIDs {first.series_uid!r} and {s.series_uid!r}")
        if (s.rows, s.cols) != (first.rows, first.cols):
            raise MixedSeries("slices disagree on rows/cols")
        if np.max(np.abs(np.subtract(s.pixel_spacing, first.pixel_spacing))) > 1e-6:
            raise MixedSeries("slices disagree on pixel spacing")
        if np.max(np.abs(s.image_orientation - first.image_orientation)) > _COSINE_TOL:
            raise MixedSeries("slices disagree on orientation")

    col_dir = first.image_orientation[:3]
    row_dir = first.image_orientation[3:]
    normal = np.cross(col_dir, row_dir)
    normal /= np.linalg.norm(normal)

    order = sorted(range(len(slices)), key=lambda idx: float(np.dot(slices[idx].image_position, normal)))
    ordered = [slices[idx] for idx in order]
    projections = np.array([float(np.dot(s.image_position, normal)) for s in ordered])
    steps = np.diff(projections)
    if np.any(steps < _DUP_TOL_MM):
        raise DuplicatePosition("two slices share a position along the normal")
    if steps.max() - steps.min() > _SPACING_TOL_MM:
        raise NonUniformSliceSpacing(
            f"slice spacing varies by {steps.max() - steps.min():.4f} mm"
        )
    for prev, cur in zip(ordered, ordered[1:]):
        delta = cur.image_position - prev.image_position
        drift = delta - np.dot(delta, normal) * normal
        if np.linalg.norm(drift) > _SPACING_TOL_MM:
            raise NonUniformSliceSpacing("slice positions drift off the normal axis")
    step = float(steps.mean())

    # (rows, cols) per slice -> volume axes (cols, rows, slices)
    hu = np.stack([s.hu_pixels().T for s in ordered], axis=2)

    row_mm, col_mm = first.pixel_spacing
    affine = np.eye(4)
    affine[:3, 0] = col_dir * col_mm
    affine[:3, 1] = row_dir * row_mm
    affine[:3, 2] = normal * step
    affine[:3, 3] = ordered[0].image_position
    return CtVolume(hu, affine, source_id=first.series_uid)
