"""Typed errors raised by the toolkit.

Every failure mode that callers are expected to branch on gets its own
class so that tests and the CLI can match on type instead of message text.
"""

from __future__ import annotations


class SarcoquantError(Exception):
    """Base class for all toolkit errors."""


# NIfTI reading and writing


class BadMagic(SarcoquantError):
    """Payload is not a little-endian single-file NIfTI-1 blob."""


class UnsupportedDatatype(SarcoquantError):
    """Header declares a datatype code outside the supported set."""


class UnsupportedDimensionality(SarcoquantError):
    """Header declares more than three non-trivial dimensions."""


class TruncatedPayload(SarcoquantError):
    """Declared voxel data does not fit inside the payload."""


class NonFiniteAfterScaling(SarcoquantError):
    """Decoded samples contain NaN or infinity after intensity scaling."""


class DimsOverflow(SarcoquantError):
    """Volume dimensions exceed what a NIfTI-1 header can encode."""


class DegenerateAffine(SarcoquantError):
    """Affine is singular or its last row is not (0, 0, 0, 1)."""


# DICOM parsing and series assembly


class MissingPreamble(SarcoquantError):
    """File lacks the 128-byte preamble followed by 'DICM'."""


class CompressedTransferSyntax(SarcoquantError):
    """Transfer syntax is not plain little-endian (compressed or unsupported)."""


class MissingRequiredTag(SarcoquantError):
    """A tag required for geometry or pixel decoding is absent."""

    def __init__(self, tag: tuple[int, int], name: str = ""):
        self.tag = tag
        label = f"({tag[0]:04X},{tag[1]:04X})"
        if name:
            label += f" {name}"
        super().__init__(f"missing required tag {label}")


class PixelDataLengthMismatch(SarcoquantError):
    """Pixel data length disagrees with rows * cols * bytes per sample."""


class UnsupportedPixelFormat(SarcoquantError):
    """Bits allocated or pixel representation outside the supported set."""


class InvalidOrientation(SarcoquantError):
    """Image orientation cosines are not unit length or not orthogonal."""


class InsufficientSlices(SarcoquantError):
    """Series assembly needs at least two slices."""


class MixedSeries(SarcoquantError):
    """Slices disagree on series UID, dimensions, spacing or orientation."""


class NonUniformSliceSpacing(SarcoquantError):
    """Consecutive slice spacings deviate beyond tolerance."""


class DuplicatePosition(SarcoquantError):
    """Two slices share the same position along the slice normal."""


# Geometry


class AmbiguousOrientation(SarcoquantError):
    """No strict dominant anatomical axis for some voxel axis."""


# Preprocessing


class TargetExceedsDims(SarcoquantError):
    """Crop target is larger than the current dimensions."""


class TargetBelowDims(SarcoquantError):
    """Pad target is smaller than the current dimensions."""


# Muscle area measurement


class EmptyMask(SarcoquantError):
    """Mask contains no positive labels."""


class MultipleAnnotatedSlices(SarcoquantError):
    """More than one slice along the axial axis carries labels."""


# Baseline segmentation


class EmptySlice(SarcoquantError):
    """No body region found above the air threshold."""


# Metrics


class DimsMismatch(SarcoquantError):
    """Operands have different shapes."""


class NonPositiveGroundTruth(SarcoquantError):
    """Reference area must be positive to form a relative error."""


class EmptyInput(SarcoquantError):
    """Metric requires at least one record."""


class SingleClassInput(SarcoquantError):
    """ROC analysis requires both classes present."""


# CLI and reporting


class GeometryMismatch(SarcoquantError):
    """Paired volumes disagree on dimensions or affine."""


class NoInput(SarcoquantError):
    """No usable input files were found."""


class BadManifest(SarcoquantError):
    """Manifest file is missing required columns or malformed."""
