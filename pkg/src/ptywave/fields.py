"""Pixel-grid field containers and the Fourier/patch plumbing used by every stage.

Conventions, fixed once for the whole package:

* arrays are row-major with index order ``[row, col]`` = ``[y, x]``;
* physical coordinates are ``(x, y)`` tuples in meters, with
  ``x = col * pixel_size`` and ``y = row * pixel_size``;
* ``dft2`` / ``idft2`` are unitary, so total power is conserved both ways;
* frequency grids are angular spatial frequencies (rad/m) in standard DFT
  ordering: zero frequency at index 0, negative frequencies in the upper half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _validate_grid(data: np.ndarray, pixel_size: float, what: str) -> None:
    if data.ndim != 2 or data.size == 0:
        raise ValueError(f"{what} requires a non-empty 2D array, got shape {data.shape}")
    if not np.isfinite(pixel_size) or pixel_size <= 0:
        raise ValueError(f"{what} pixel_size must be > 0, got {pixel_size}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass
class ComplexField:
    """A complex wave field sampled on a uniform pixel grid.

    ``data`` is a 2D complex array indexed ``[row, col]``; ``pixel_size`` is the
    sample pitch in meters per pixel (for Fourier-domain fields it is the
    frequency step in rad/m instead).
    """

    data: np.ndarray
    pixel_size: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        self.pixel_size = float(self.pixel_size)
        _validate_grid(self.data, self.pixel_size, "ComplexField")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def copy(self) -> "ComplexField":
        return ComplexField(self.data.copy(), self.pixel_size)


@dataclass
class RealField:
    """A real-valued map on a uniform pixel grid (intensities, phases, moments)."""

    data: np.ndarray
    pixel_size: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.pixel_size = float(self.pixel_size)
        _validate_grid(self.data, self.pixel_size, "RealField")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def copy(self) -> "RealField":
        return RealField(self.data.copy(), self.pixel_size)


@dataclass
class FreqGrid:
    """Per-pixel angular spatial frequencies (q_x, q_y) in DFT ordering, rad/m."""

    qx: np.ndarray
    qy: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.qx.shape

    @property
    def nyquist_x(self) -> float:
        return float(np.max(np.abs(self.qx)))


def freq_grid(width: int, height: int, pixel_size: float) -> FreqGrid:
    """Build the (q_x, q_y) grid conjugate to a ``height x width`` pixel grid.

    The step per axis is 2*pi / (N * pixel_size); ordering follows the DFT
    convention (q = 0 at index 0, negative frequencies wrapped to the top).
    """
    if width < 2 or height < 2:
        raise ValueError(f"freq_grid needs width, height >= 2, got {width}x{height}")
    if pixel_size <= 0:
        raise ValueError(f"freq_grid pixel_size must be > 0, got {pixel_size}")
    qx_1d = 2.0 * np.pi * np.fft.fftfreq(width, d=pixel_size)
    qy_1d = 2.0 * np.pi * np.fft.fftfreq(height, d=pixel_size)
    qx, qy = np.meshgrid(qx_1d, qy_1d)
    return FreqGrid(qx=qx, qy=qy)


def dft2(f: ComplexField) -> ComplexField:
    """Unitary 2D DFT. The output pixel_size records the q_x step (rad/m)."""
    if not np.all(np.isfinite(f.data)):
        raise ValueError("dft2: non-finite input")
    out = np.fft.fft2(f.data, norm="ortho")
    qstep = 2.0 * np.pi / (f.width * f.pixel_size)
    return ComplexField(out, qstep)


def idft2(F: ComplexField) -> ComplexField:
    """Unitary inverse 2D DFT; exact inverse of :func:`dft2`."""
    if not np.all(np.isfinite(F.data)):
        raise ValueError("idft2: non-finite input")
    out = np.fft.ifft2(F.data, norm="ortho")
    pixel = 2.0 * np.pi / (F.width * F.pixel_size)
    return ComplexField(out, pixel)


def bilinear_resample(
    src: RealField,
    dst_shape: tuple[int, int],
    src_origin: tuple[float, float],
    dst_origin: tuple[float, float],
    dst_pixel_size: float,
) -> RealField:
    """Resample ``src`` onto a new grid by bilinear interpolation in physical coordinates.

    Origins are the (x, y) position of pixel (0, 0) of each grid, in meters.
    Destination samples outside the source extent are clamped to the nearest
    source edge, so boundary pixels extend rather than extrapolate. Exact for
    fields that are affine in (x, y).
    """
    if src.data.size == 0:
        raise ValueError("bilinear_resample: empty source")
    if dst_pixel_size <= 0:
        raise ValueError(f"bilinear_resample: dst_pixel_size must be > 0, got {dst_pixel_size}")
    dst_h, dst_w = int(dst_shape[0]), int(dst_shape[1])
    if dst_h < 1 or dst_w < 1:
        raise ValueError(f"bilinear_resample: bad destination shape {dst_shape}")

    x = dst_origin[0] + dst_pixel_size * np.arange(dst_w) - src_origin[0]
    y = dst_origin[1] + dst_pixel_size * np.arange(dst_h) - src_origin[1]
    u = np.clip(x / src.pixel_size, 0.0, src.width - 1.0)   # fractional col
    v = np.clip(y / src.pixel_size, 0.0, src.height - 1.0)  # fractional row

    u0 = np.minimum(np.floor(u).astype(np.intp), max(src.width - 2, 0))
    v0 = np.minimum(np.floor(v).astype(np.intp), max(src.height - 2, 0))
    du = u - u0
    dv = v - v0

    d = src.data
    u1 = np.minimum(u0 + 1, src.width - 1)
    v1 = np.minimum(v0 + 1, src.height - 1)
    dv_col = dv[:, None]
    du_row = du[None, :]
    out = (
        d[np.ix_(v0, u0)] * (1.0 - dv_col) * (1.0 - du_row)
        + d[np.ix_(v0, u1)] * (1.0 - dv_col) * du_row
        + d[np.ix_(v1, u0)] * dv_col * (1.0 - du_row)
        + d[np.ix_(v1, u1)] * dv_col * du_row
    )
    return RealField(out, dst_pixel_size)


def patch_slices(
    shape: tuple[int, int],
    pixel_size: float,
    center: tuple[float, float],
    patch_shape: tuple[int, int],
) -> tuple[slice, slice]:
    """Snap a physical center (x, y) to the nearest pixel and return patch slices.

    The patch of shape (ph, pw) is placed with its center pixel at the snapped
    position (top-left = center - shape//2). Raises if any part falls outside.
    """
    h, w = shape
    ph, pw = int(patch_shape[0]), int(patch_shape[1])
    col_c = int(np.rint(center[0] / pixel_size))
    row_c = int(np.rint(center[1] / pixel_size))
    r0 = row_c - ph // 2
    c0 = col_c - pw // 2
    if r0 < 0 or c0 < 0 or r0 + ph > h or c0 + pw > w:
        raise ValueError(
            f"patch {ph}x{pw} at pixel (row={row_c}, col={col_c}) exceeds field {h}x{w}"
        )
    return slice(r0, r0 + ph), slice(c0, c0 + pw)


def extract_patch(
    field: ComplexField, center: tuple[float, float], patch_shape: tuple[int, int]
) -> ComplexField:
    """Copy the sub-array aligned at a scan position (snapped to the pixel grid)."""
    rs, cs = patch_slices(field.shape, field.pixel_size, center, patch_shape)
    return ComplexField(field.data[rs, cs].copy(), field.pixel_size)


def embed_add_patch(field: ComplexField, center: tuple[float, float], patch: ComplexField) -> None:
    """Add ``patch`` into ``field`` in place, using the same alignment as extract_patch."""
    rs, cs = patch_slices(field.shape, field.pixel_size, center, patch.shape)
    field.data[rs, cs] += patch.data
