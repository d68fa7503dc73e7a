"""Complex image containers, the unitary centered 2-D DFT, and file I/O.

The on-disk format is a 32-byte header followed by a raw payload:

====== ======= ==============================================
offset size    field
====== ======= ==============================================
0      8       magic, ``b"LCSIMG01"`` (image) or ``b"LCSKSP01"`` (k-space)
8      4       coils (little-endian u32; plane count, 1 for single images)
12     4       height (little-endian u32)
16     4       width (little-endian u32)
20     4       payload dtype tag: 0 = complex128, 1 = bool-u8
24     8       reserved, zero
====== ======= ==============================================

Complex payloads are interleaved little-endian float64 (real, imaginary)
pairs in row-major order; boolean payloads are one byte per pixel. Round
trips are byte-identical.
"""

import struct
from dataclasses import dataclass

import numpy as np

MAGIC_IMAGE = b"LCSIMG01"
MAGIC_KSPACE = b"LCSKSP01"
DTYPE_COMPLEX = 0
DTYPE_BOOL = 1
HEADER_STRUCT = struct.Struct("<8s4I8x")
MAX_ELEMENTS = 1 << 31


class FileFormatError(Exception):
    """Base class for binary-format violations."""


class HeaderError(FileFormatError):
    """Malformed header: bad magic, bad dtype tag, or zero dimension."""


class TruncatedPayloadError(FileFormatError):
    """Payload shorter than the header promises."""


class DimensionError(FileFormatError):
    """Dimensions overflow the supported range or disagree with the reader."""


@dataclass(frozen=True, eq=False)
class ComplexImage:
    """A single complex-valued image plane, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, order="C", copy=True)
        if arr.ndim != 2:
            raise ValueError(f"ComplexImage expects 2-D data, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ComplexImage data contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class KSpace:
    """Per-coil complex frequency samples, shape (coils, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, order="C", copy=True)
        if arr.ndim != 3:
            raise ValueError(f"KSpace expects 3-D data, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("KSpace data contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def coils(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape


# ---------------------------------------------------------------------------
# Centered unitary DFT
# ---------------------------------------------------------------------------


def fft2c(arr):
    """Centered unitary 2-D FFT over the trailing two axes."""
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(arr, axes=axes), norm="ortho", axes=axes),
        axes=axes,
    )


def ifft2c(arr):
    """Inverse (= adjoint) of :func:`fft2c`."""
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(arr, axes=axes), norm="ortho", axes=axes),
        axes=axes,
    )


def dft2(img: ComplexImage) -> ComplexImage:
    """Unitary centered 2-D DFT of an image (DC lands at the grid center)."""
    return ComplexImage(fft2c(img.data))


def idft2(ksp_plane: ComplexImage) -> ComplexImage:
    """Inverse of :func:`dft2` with the identical scaling convention."""
    return ComplexImage(ifft2c(ksp_plane.data))


# ---------------------------------------------------------------------------
# Stacked real representation
# ---------------------------------------------------------------------------


def image_to_stacked(img: ComplexImage) -> np.ndarray:
    """Flatten to the stacked representation [Re(x); Im(x)] of length 2N."""
    return np.concatenate([img.data.real.ravel(), img.data.imag.ravel()])


def stacked_to_image(vec: np.ndarray, height: int, width: int) -> ComplexImage:
    """Inverse of :func:`image_to_stacked`."""
    vec = np.asarray(vec, dtype=np.float64)
    n = height * width
    if vec.shape != (2 * n,):
        raise ValueError(
            f"stacked vector has length {vec.shape}, expected ({2 * n},)"
        )
    return ComplexImage((vec[:n] + 1j * vec[n:]).reshape(height, width))


# ---------------------------------------------------------------------------
# Binary I/O
# ---------------------------------------------------------------------------


def _check_dims(coils, height, width):
    if coils == 0 or height == 0 or width == 0:
        raise HeaderError("zero dimension in header")
    if coils * height * width > MAX_ELEMENTS:
        raise DimensionError(
            f"{coils}x{height}x{width} exceeds the supported element count"
        )


def _write(path, magic, dtype_tag, planes):
    coils, height, width = planes.shape
    _check_dims(coils, height, width)
    header = HEADER_STRUCT.pack(magic, coils, height, width, dtype_tag)
    if dtype_tag == DTYPE_COMPLEX:
        payload = np.ascontiguousarray(planes, dtype="<c16").tobytes()
    else:
        payload = np.ascontiguousarray(planes, dtype=np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _read(path, expected_magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_STRUCT.size:
        raise HeaderError(f"{path}: file shorter than the 32-byte header")
    magic, coils, height, width, dtype_tag = HEADER_STRUCT.unpack_from(raw)
    if magic != expected_magic:
        raise HeaderError(
            f"{path}: bad magic {magic!r}, expected {expected_magic!r}"
        )
    if dtype_tag not in (DTYPE_COMPLEX, DTYPE_BOOL):
        raise HeaderError(f"{path}: unknown payload dtype tag {dtype_tag}")
    _check_dims(coils, height, width)
    count = coils * height * width
    itemsize = 16 if dtype_tag == DTYPE_COMPLEX else 1
    expected = HEADER_STRUCT.size + count * itemsize
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(raw) - HEADER_STRUCT.size} bytes, "
            f"expected {count * itemsize}"
        )
    if len(raw) > expected:
        raise HeaderError(f"{path}: {len(raw) - expected} trailing bytes")
    body = raw[HEADER_STRUCT.size :]
    if dtype_tag == DTYPE_COMPLEX:
        planes = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    else:
        planes = np.frombuffer(body, dtype=np.uint8).copy()
    return dtype_tag, planes.reshape(coils, height, width)


def write_image(img: ComplexImage, path) -> None:
    _write(path, MAGIC_IMAGE, DTYPE_COMPLEX, img.data[None, :, :])


def read_image(path) -> ComplexImage:
    dtype_tag, planes = _read(path, MAGIC_IMAGE)
    if dtype_tag != DTYPE_COMPLEX:
        raise HeaderError(f"{path}: expected a complex payload")
    if planes.shape[0] != 1:
        raise DimensionError(
            f"{path}: expected a single plane, found {planes.shape[0]}"
        )
    return ComplexImage(planes[0])


def write_kspace(ksp: KSpace, path) -> None:
    _write(path, MAGIC_KSPACE, DTYPE_COMPLEX, ksp.data)


def read_kspace(path) -> KSpace:
    dtype_tag, planes = _read(path, MAGIC_KSPACE)
    if dtype_tag != DTYPE_COMPLEX:
        raise HeaderError(f"{path}: expected a complex payload")
    return KSpace(planes)


def write_image_stack(stack: np.ndarray, path) -> None:
    """Write a (planes, height, width) complex stack (coil maps, draws)."""
    stack = np.asarray(stack, dtype=np.complex128)
    if stack.ndim != 3:
        raise ValueError("image stack must be 3-D")
    _write(path, MAGIC_IMAGE, DTYPE_COMPLEX, stack)


def read_image_stack(path) -> np.ndarray:
    dtype_tag, planes = _read(path, MAGIC_IMAGE)
    if dtype_tag != DTYPE_COMPLEX:
        raise HeaderError(f"{path}: expected a complex payload")
    return planes


def write_mask_array(kept: np.ndarray, path) -> None:
    kept = np.asarray(kept)
    if kept.ndim != 2 or kept.dtype != np.bool_:
        raise ValueError("mask must be a 2-D boolean array")
    _write(path, MAGIC_IMAGE, DTYPE_BOOL, kept[None, :, :])


def read_mask_array(path) -> np.ndarray:
    dtype_tag, planes = _read(path, MAGIC_IMAGE)
    if dtype_tag != DTYPE_BOOL:
        raise HeaderError(f"{path}: expected a bool-u8 payload")
    if planes.shape[0] != 1:
        raise DimensionError(
            f"{path}: expected a single plane, found {planes.shape[0]}"
        )
    return planes[0] != 0
