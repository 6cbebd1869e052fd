"""Shared fixture builders.

The byte builders here are written directly against the file format
layouts, independent of the library's readers and writers, so that
round-trip tests cross-check two separate implementations instead of
one implementation against itself.
"""

from __future__ import annotations

import gzip
import struct

import numpy as np
import pytest


# NIfTI-1 builder: fields packed at their documented offsets.


def make_nifti_bytes(
    data: np.ndarray,
    *,
    datatype_code: int,
    pixdim: tuple[float, float, float] = (1.0, 1.0, 1.0),
    qfac: float = 1.0,
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
    vox_offset: int = 352,
    sform_code: int = 0,
    srow: np.ndarray | None = None,
    qform_code: int = 0,
    quat: tuple[float, float, float] = (0.0, 0.0, 0.0),
    qoffset: tuple[float, float, float] = (0.0, 0.0, 0.0),
    magic: bytes = b"n+1\x00",
    sizeof_hdr: int = 348,
    dim_override: tuple[int, ...] | None = None,
    truncate_to: int | None = None,
    gzipped: bool = False,
) -> bytes:
    header = bytearray(348)
    struct.pack_into("<i", header, 0, sizeof_hdr)
    dims = dim_override if dim_override is not None else (3, *data.shape, 1, 1, 1, 1)
    struct.pack_into(f"<{len(dims)}h", header, 40, *dims)
    struct.pack_into("<h", header, 70, datatype_code)
    struct.pack_into("<h", header, 72, data.dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, qfac, *pixdim, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(vox_offset))
    struct.pack_into("<2f", header, 112, scl_slope, scl_inter)
    struct.pack_into("<2h", header, 252, qform_code, sform_code)
    struct.pack_into("<3f", header, 256, *quat)
    struct.pack_into("<3f", header, 268, *qoffset)
    if srow is not None:
        for row, off in zip(np.asarray(srow, dtype=np.float64), (280, 296, 312)):
            struct.pack_into("<4f", header, off, *row)
    header[344:348] = magic

    body = bytes(header) + b"\x00\x00\x00\x00"
    body += b"\x00" * max(0, vox_offset - len(body))
    body += np.asfortranarray(data).tobytes(order="F")
    if truncate_to is not None:
        body = body[:truncate_to]
    if gzipped:
        body = gzip.compress(body)
    return body


def decode_nifti_fields(blob: bytes) -> dict:
    """Reference header decoder used to audit written files."""
    out = {
        "sizeof_hdr": struct.unpack_from("<i", blob, 0)[0],
        "dim": struct.unpack_from("<8h", blob, 40),
        "datatype": struct.unpack_from("<h", blob, 70)[0],
        "bitpix": struct.unpack_from("<h", blob, 72)[0],
        "pixdim": struct.unpack_from("<8f", blob, 76),
        "vox_offset": struct.unpack_from("<f", blob, 108)[0],
        "scl_slope": struct.unpack_from("<f", blob, 112)[0],
        "scl_inter": struct.unpack_from("<f", blob, 116)[0],
        "qform_code": struct.unpack_from("<h", blob, 252)[0],
        "sform_code": struct.unpack_from("<h", blob, 254)[0],
        "magic": blob[344:348],
    }
    out["srow"] = np.array(
        [struct.unpack_from("<4f", blob, off) for off in (280, 296, 312)], dtype=np.float64
    )
    return out


def nifti_voxel_at(blob: bytes, index: tuple[int, int, int], dims: tuple[int, int, int], dtype) -> float:
    """Read one voxel by flat Fortran-order offset arithmetic."""
    fields = decode_nifti_fields(blob)
    i, j, k = index
    nx, ny, _ = dims
    flat = i + nx * (j + ny * k)
    dtype = np.dtype(dtype).newbyteorder("<")
    off = int(fields["vox_offset"]) + flat * dtype.itemsize
    return np.frombuffer(blob, dtype=dtype, count=1, offset=off)[0]


# DICOM Part-10 builder.

_LONG_VRS = (b"OB", b"OW", b"OF", b"SQ", b"UT", b"UN")


def evr(group: int, elem: int, vr: bytes, value: bytes) -> bytes:
    head = struct.pack("<HH", group, elem) + vr
    if vr in _LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def ivr(group: int, elem: int, value: bytes) -> bytes:
    return struct.pack("<HH", group, elem) + struct.pack("<I", len(value)) + value


def _pad(text: str, pad: bytes = b" ") -> bytes:
    raw = text.encode("ascii")
    return raw + pad * (len(raw) % 2)


def _ds(values) -> bytes:
    return _pad("\\".join(f"{v:g}" for v in np.atleast_1d(values)))


TS_EXPLICIT = "1.2.840.10008.1.2.1"
TS_IMPLICIT = "1.2.840.10008.1.2"


def dicom_preamble(ts_uid: str = TS_EXPLICIT) -> bytes:
    meta_elements = evr(0x0002, 0x0001, b"OB", b"\x00\x01") + evr(
        0x0002, 0x0010, b"UI", _pad(ts_uid, b"\x00")
    )
    group_length = evr(0x0002, 0x0000, b"UL", struct.pack("<I", len(meta_elements)))
    return b"\x00" * 128 + b"DICM" + group_length + meta_elements


def make_dicom_bytes(
    pixels: np.ndarray,
    *,
    spacing: tuple[float, float] = (0.8, 0.8),
    position: tuple[float, float, float] = (0.0, 0.0, -100.0),
    orientation: tuple[float, ...] = (1, 0, 0, 0, 1, 0),
    slope: float | None = 1.0,
    intercept: float | None = -1024.0,
    instance: int = 1,
    series_uid: str = "1.2.840.99.1",
    syntax: str = TS_EXPLICIT,
    signed: int = 1,
    omit: tuple = (),
    extra: bytes = b"",
    pixel_bytes_override: bytes | None = None,
    preamble: bool = True,
) -> bytes:
    rows, cols = pixels.shape
    bits = pixels.dtype.itemsize * 8
    explicit = syntax == TS_EXPLICIT

    def element(group, elem, vr, value):
        if (group, elem) in omit:
            return b""
        return evr(group, elem, vr, value) if explicit else ivr(group, elem, value)

    pixel_payload = (
        pixel_bytes_override
        if pixel_bytes_override is not None
        else np.ascontiguousarray(pixels).astype(pixels.dtype.newbyteorder("<")).tobytes()
    )
    body = b"".join(
        [
            element(0x0008, 0x0060, b"CS", _pad("CT")),
            element(0x0020, 0x000E, b"UI", _pad(series_uid, b"\x00")),
            element(0x0020, 0x0013, b"IS", _pad(str(instance))),
            element(0x0020, 0x0032, b"DS", _ds(position)),
            element(0x0020, 0x0037, b"DS", _ds(orientation)),
            extra,
            element(0x0028, 0x0010, b"US", struct.pack("<H", rows)),
            element(0x0028, 0x0011, b"US", struct.pack("<H", cols)),
            element(0x0028, 0x0030, b"DS", _ds(spacing)),
            element(0x0028, 0x0100, b"US", struct.pack("<H", bits)),
            element(0x0028, 0x0101, b"US", struct.pack("<H", bits)),
            element(0x0028, 0x0102, b"US", struct.pack("<H", bits - 1)),
            element(0x0028, 0x0103, b"US", struct.pack("<H", signed)),
            b"" if intercept is None else element(0x0028, 0x1052, b"DS", _ds([intercept])),
            b"" if slope is None else element(0x0028, 0x1053, b"DS", _ds([slope])),
            element(0x7FE0, 0x0010, b"OW", pixel_payload),
        ]
    )
    head = dicom_preamble(syntax) if preamble else b""
    return head + body


def make_series_bytes(
    z_values,
    *,
    base_pixels: np.ndarray | None = None,
    spacing: tuple[float, float] = (0.8, 0.8),
    orientation: tuple[float, ...] = (1, 0, 0, 0, 1, 0),
    series_uid: str = "1.2.840.99.7",
    syntax: str = TS_EXPLICIT,
    origin: tuple[float, float] = (0.0, 0.0),
) -> list[bytes]:
    blobs = []
    for idx, z in enumerate(z_values):
        if base_pixels is None:
            pixels = np.full((4, 6), 100 * idx, dtype=np.int16)
        else:
            pixels = base_pixels + np.int16(idx)
        blobs.append(
            make_dicom_bytes(
                pixels,
                spacing=spacing,
                position=(origin[0], origin[1], z),
                orientation=orientation,
                instance=idx + 1,
                series_uid=series_uid,
                syntax=syntax,
            )
        )
    return blobs


# small shared helpers


def diag_affine(spacing=(1.0, 1.0, 1.0), translation=(0.0, 0.0, 0.0)) -> np.ndarray:
    affine = np.diag([*spacing, 1.0]).astype(np.float64)
    affine[:3, 3] = translation
    return affine


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)
