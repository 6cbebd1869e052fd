"""Single-file NIfTI-1 reading and writing.

Scope is deliberately narrow: little-endian single-file volumes (magic
``n+1``), optionally gzip-compressed, with scalar datatypes uint8, int16,
int32, float32 and float64. Header extensions are skipped by honouring
``vox_offset``. Two-file pairs, big-endian files and NIfTI-2 are out of
scope and rejected.

Field offsets follow the NIfTI-1 layout: 348 header bytes, a 4-byte
extension flag, voxel data at ``vox_offset`` in Fortran order (first
index varies fastest).
"""

from __future__ import annotations

import gzip
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimsOverflow,
    NonFiniteAfterScaling,
    TruncatedPayload,
    UnsupportedDatatype,
    UnsupportedDimensionality,
)
from .volume import CtVolume, MaskVolume, validate_affine

HEADER_SIZE = 348
MIN_VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
GZIP_MAGIC = b"\x1f\x8b"

# datatype code -> little-endian numpy dtype
DTYPES = {
    2: np.dtype("<u1"),
    4: np.dtype("<i2"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
}
_DTYPE_CODES = {v: k for k, v in DTYPES.items()}


@dataclass
class NiftiHeader:
    """Decoded subset of a NIfTI-1 header needed for volumes and geometry."""

    dim_count: int
    dims: tuple[int, int, int]
    pixdim: tuple[float, float, float]
    datatype_code: int
    scl_slope: float
    scl_inter: float
    vox_offset: int
    qform_code: int
    sform_code: int
    quaternion_params: tuple[float, float, float, float, float, float]
    srow_vectors: np.ndarray  # 3x4, rows of the affine when sform is set
    qfac: float
    magic: bytes


def parse_header(blob: bytes) -> NiftiHeader:
    """Decode the fixed 348-byte header from the start of ``blob``."""
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayload(f"payload is {len(blob)} bytes, header needs {HEADER_SIZE}")
    magic = blob[344:348]
    if magic not in (MAGIC_SINGLE, MAGIC_PAIR):
        raise BadMagic(f"bad magic {magic!r}")
    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != HEADER_SIZE:
        # a byte-swapped 348 means a big-endian file
        raise BadMagic(f"sizeof_hdr is {sizeof_hdr}, not a little-endian NIfTI-1 header")

    dim = struct.unpack_from("<8h", blob, 40)
    dim_count = dim[0]
    if not 1 <= dim_count <= 7:
        raise UnsupportedDimensionality(f"dim[0] is {dim_count}, expected 1..7")
    sizes = [max(1, d) for d in dim[1 : dim_count + 1]]
    if any(s > 1 for s in sizes[3:]):
        raise UnsupportedDimensionality(f"volume has extra non-trivial dims {sizes[3:]}")
    dims = tuple((sizes + [1, 1, 1])[:3])

    (datatype_code,) = struct.unpack_from("<h", blob, 70)
    pixdim_raw = struct.unpack_from("<8f", blob, 76)
    (vox_offset_f,) = struct.unpack_from("<f", blob, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", blob, 112)
    qform_code, sform_code = struct.unpack_from("<2h", blob, 252)
    quat = struct.unpack_from("<6f", blob, 256)
    srow = np.array(
        [struct.unpack_from("<4f", blob, off) for off in (280, 296, 312)],
        dtype=np.float64,
    )
    # pixdim[0] carries qfac; 0 means +1 by convention
    qfac = -1.0 if pixdim_raw[0] < 0 else 1.0

    return NiftiHeader(
        dim_count=dim_count,
        dims=dims,  # type: ignore[arg-type]
        pixdim=tuple(float(p) for p in pixdim_raw[1:4]),  # type: ignore[arg-type]
        datatype_code=datatype_code,
        scl_slope=float(scl_slope),
        scl_inter=float(scl_inter),
        vox_offset=int(round(vox_offset_f)),
        qform_code=qform_code,
        sform_code=sform_code,
        quaternion_params=tuple(float(q) for q in quat),  # type: ignore[arg-type]
        srow_vectors=srow,
        qfac=qfac,
        magic=magic,
    )


def _quaternion_rotation(b: float, c: float, d: float) -> np.ndarray:
    """Rotation matrix from the stored quaternion (a recovered from unit norm)."""
    a2 = 1.0 - (b * b + c * c + d * d)
    # clamp tiny negatives from stored float32 components
    a = np.sqrt(a2) if a2 > 0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def resolve_affine(header: NiftiHeader) -> np.ndarray:
    """Build the voxel-to-world affine.

    Precedence: sform when sform_code > 0, else qform when qform_code > 0,
    else a diagonal affine from pixdim.
    """
    affine = np.eye(4)
    if header.sform_code > 0:
        affine[:3, :] = header.srow_vectors
    elif header.qform_code > 0:
        b, c, d, ox, oy, oz = header.quaternion_params
        rot = _quaternion_rotation(b, c, d)
        scales = np.array(header.pixdim, dtype=np.float64)
        scales[2] *= header.qfac
        affine[:3, :3] = rot * scales
        affine[:3, 3] = (ox, oy, oz)
    else:
        affine[:3, :3] = np.diag(header.pixdim)
    return validate_affine(affine)


def _decode_samples(blob: bytes, header: NiftiHeader) -> np.ndarray:
    """Slice the voxel region out of the payload and scale to float32."""
    if header.magic == MAGIC_PAIR:
        raise BadMagic("two-file (.hdr/.img) volumes are not supported")
    if header.datatype_code not in DTYPES:
        raise UnsupportedDatatype(f"datatype code {header.datatype_code} not supported")
    if header.vox_offset < MIN_VOX_OFFSET:
        raise TruncatedPayload(
            f"vox_offset {header.vox_offset} overlaps the header (minimum {MIN_VOX_OFFSET})"
        )
    dtype = DTYPES[header.datatype_code]
    count = int(np.prod(header.dims))
    need = header.vox_offset + count * dtype.itemsize
    if len(blob) < need:
        raise TruncatedPayload(f"payload is {len(blob)} bytes, voxel data needs {need}")
    stored = np.frombuffer(blob, dtype=dtype, count=count, offset=header.vox_offset)
    stored = stored.reshape(header.dims, order="F")
    # overflow to inf is caught by the finiteness check below
    with np.errstate(over="ignore"):
        if header.scl_slope != 0.0:
            samples = stored.astype(np.float64) * header.scl_slope + header.scl_inter
        else:
            samples = stored.astype(np.float64)
        samples = samples.astype(np.float32)
    if not np.all(np.isfinite(samples)):
        raise NonFiniteAfterScaling("samples contain NaN or infinity after scaling")
    return samples


def read_volume(blob: bytes, kind: str = "image", source_id: str = "") -> CtVolume | MaskVolume:
    """Decode a NIfTI-1 blob into a CtVolume or, for kind='mask', a MaskVolume.

    Gzip payloads are detected by their two-byte magic prefix. Mask samples
    are binarized with threshold 0.5 after scaling.
    """
    if kind not in ("image", "mask"):
        raise ValueError(f"kind must be 'image' or 'mask', got {kind!r}")
    if blob[:2] == GZIP_MAGIC:
        blob = gzip.decompress(blob)
    header = parse_header(blob)
    samples = _decode_samples(blob, header)
    affine = resolve_affine(header)
    if kind == "mask":
        return MaskVolume((samples > 0.5).astype(np.uint8), affine, source_id)
    return CtVolume(samples, affine, source_id)


def write_volume(volume: CtVolume | MaskVolume) -> bytes:
    """Encode as an uncompressed single-file NIfTI-1 blob.

    Images are stored as float32, masks as uint8. The affine goes into the
    sform rows (sform_code 1, qform_code 0); pixdim mirrors the column norms.
    """
    if isinstance(volume, MaskVolume):
        data = volume.labels.astype("<u1")
    else:
        data = volume.samples.astype("<f4")
    dims = data.shape
    if any(d > 32767 for d in dims):
        raise DimsOverflow(f"dims {dims} exceed the int16 header fields")
    dtype_code = _DTYPE_CODES[np.dtype(data.dtype.newbyteorder("<"))]
    spacing = np.linalg.norm(volume.affine[:3, :3], axis=0)

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<b", header, 38, ord("r"))  # regular, conventional
    struct.pack_into("<8h", header, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, dtype_code, data.dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", header, 108, float(MIN_VOX_OFFSET))
    struct.pack_into("<2f", header, 112, 1.0, 0.0)
    struct.pack_into("<2h", header, 252, 0, 1)  # qform off, sform on
    for row, off in zip(volume.affine[:3], (280, 296, 312)):
        struct.pack_into("<4f", header, off, *row)
    header[344:348] = MAGIC_SINGLE

    out = io.BytesIO()
    out.write(bytes(header))
    out.write(b"\x00\x00\x00\x00")  # no extensions
    out.write(np.asfortranarray(data).tobytes(order="F"))
    return out.getvalue()


def load_volume(path: str | Path, kind: str = "image") -> CtVolume | MaskVolume:
    path = Path(path)
    return read_volume(path.read_bytes(), kind=kind, source_id=path.name)


def save_volume(path: str | Path, volume: CtVolume | MaskVolume) -> None:
    """Write to disk; a .gz suffix selects gzip with a fixed mtime so the
    same volume always produces identical bytes."""
    path = Path(path)
    blob = write_volume(volume)
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as fh:
            fh.write(blob)
        path.write_bytes(buf.getvalue())
    else:
        path.write_bytes(blob)
