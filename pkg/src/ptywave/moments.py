"""Transmission and differential-phase maps from diffraction-pattern moments.

The zeroth moment of each pattern, normalized by the flat field, gives the
object's intensity transmission at that scan point. The first-moment centroid
(in object-plane angular frequency, rad/m) estimates the illumination-weighted
mean phase gradient. When the probe itself carries a phase gradient and the
object absorbs, the centroid picks up a probe term; that bias is removed by
subtracting the centroids of virtual patterns computed from the absorption
signal alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FreqGrid, RealField, bilinear_resample, freq_grid
from .forward import DiffractionStack, Probe, ScanPlan, diffract

_NEG_TOL = 1e-9


@dataclass
class MomentMaps:
    """Per-scan-point transmission and differential phase on the scan raster."""

    transmission_sq: RealField
    phi_x: RealField
    phi_y: RealField
    corrected: bool

    def __post_init__(self):
        shape = self.transmission_sq.shape
        step = self.transmission_sq.pixel_size
        for name, m in (("phi_x", self.phi_x), ("phi_y", self.phi_y)):
            if m.shape != shape or abs(m.pixel_size - step) > 1e-12 * step:
                raise ValueError(f"MomentMaps: {name} raster does not match transmission map")


def _check_nonnegative(data: np.ndarray, what: str) -> None:
    lo = float(np.min(data))
    if lo < -_NEG_TOL * max(float(np.max(data)), 1e-300):
        raise ValueError(f"{what}: negative intensities (min {lo:.3e}) — corrupt input")


def moment_uv(pattern: RealField, u: int, v: int, qgrid: FreqGrid) -> float:
    """Discrete moment sum_q q_x^u q_y^v D(q), orders 0 and 1 only."""
    if u not in (0, 1) or v not in (0, 1):
        raise ValueError(f"moment orders must be 0 or 1, got u={u}, v={v}")
    if pattern.shape != qgrid.shape:
        raise ValueError(f"pattern shape {pattern.shape} != frequency grid {qgrid.shape}")
    _check_nonnegative(pattern.data, "moment_uv")
    w = pattern.data
    if u == 1:
        w = w * qgrid.qx
    if v == 1:
        w = w * qgrid.qy
    return float(np.sum(w))


def _pattern_qgrid(plan: ScanPlan) -> FreqGrid:
    qh, qw = plan.pattern_shape
    return freq_grid(qw, qh, plan.object_pixel_m)


def _stack_moments(stack: DiffractionStack) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(m00, m10, m01) for every pattern, vectorized over the stack."""
    grid = _pattern_qgrid(stack.plan)
    arr = stack.stacked()
    _check_nonnegative(arr, "stack moments")
    m00 = arr.sum(axis=(1, 2))
    m10 = (arr * grid.qx).sum(axis=(1, 2))
    m01 = (arr * grid.qy).sum(axis=(1, 2))
    return m00, m10, m01


def _require_raster(plan: ScanPlan) -> tuple[int, int]:
    if plan.raster_shape is None:
        raise ValueError("moment maps require a raster scan plan (raster_shape is unset)")
    return plan.raster_shape


def transmission_map(stack: DiffractionStack) -> RealField:
    """Intensity transmission o^2 per scan point: total counts over flat total."""
    rows, cols = _require_raster(stack.plan)
    flat_total = float(np.sum(stack.flat.data))
    if flat_total <= 0:
        raise ValueError("transmission_map: flat pattern has no counts")
    m00 = stack.stacked().sum(axis=(1, 2))
    _check_nonnegative(stack.stacked(), "transmission_map")
    return RealField((m00 / flat_total).reshape(rows, cols), stack.plan.step_m)


def _centroids(m00: np.ndarray, m1: np.ndarray, what: str) -> np.ndarray:
    bad = np.nonzero(m00 == 0)[0]
    if bad.size:
        raise ValueError(f"{what}: zero total intensity at position {bad[0]}")
    return m1 / m00


def diff_phase_naive(stack: DiffractionStack) -> MomentMaps:
    """Differential phase from raw centroids, flat-field centroid subtracted.

    Valid when the probe phase gradient is negligible; otherwise the maps are
    biased wherever the object absorbs (see diff_phase_corrected).
    """
    rows, cols = _require_raster(stack.plan)
    grid = _pattern_qgrid(stack.plan)
    m00, m10, m01 = _stack_moments(stack)
    cx = _centroids(m00, m10, "diff_phase_naive")
    cy = _centroids(m00, m01, "diff_phase_naive")

    flat = stack.flat.data
    _check_nonnegative(flat, "diff_phase_naive flat")
    f00 = float(np.sum(flat))
    if f00 <= 0:
        raise ValueError("diff_phase_naive: flat pattern has no counts")
    fx = float(np.sum(flat * grid.qx)) / f00
    fy = float(np.sum(flat * grid.qy)) / f00

    step = stack.plan.step_m
    flat_total = f00
    return MomentMaps(
        transmission_sq=RealField((m00 / flat_total).reshape(rows, cols), step),
        phi_x=RealField((cx - fx).reshape(rows, cols), step),
        phi_y=RealField((cy - fy).reshape(rows, cols), step),
        corrected=False,
    )


def upsample_to_object_grid(map_on_raster: RealField, plan: ScanPlan) -> RealField:
    """Bilinear upsample of a scan-raster map onto the full object grid.

    Pixels outside the scanned area take the nearest-edge value.
    """
    return bilinear_resample(
        map_on_raster,
        plan.object_shape,
        src_origin=plan.origin_m,
        dst_origin=(0.0, 0.0),
        dst_pixel_size=plan.object_pixel_m,
    )


def virtual_stack(transmission_sq: RealField, probe: Probe, plan: ScanPlan) -> DiffractionStack:
    """Diffraction patterns of the absorption signal alone.

    The measured o^2 map is upsampled to the object grid; each virtual pattern
    is |F{o(r) * P(r - R_j)}|^2 with o = sqrt(o^2). Their centroids isolate the
    probe-phase contribution to the measured centroids.
    """
    rows, cols = _require_raster(plan)
    if transmission_sq.shape != (rows, cols):
        raise ValueError(
            f"virtual_stack: transmission map {transmission_sq.shape} != raster {(rows, cols)}"
        )
    o2 = upsample_to_object_grid(transmission_sq, plan)
    o_full = np.sqrt(np.clip(o2.data, 0.0, None))
    patterns = []
    for j in range(plan.num_positions):
        rs, cs = plan.patch_slices_for(j)
        psi = o_full[rs, cs] * probe.field.data
        F = np.fft.fft2(psi, norm="ortho")
        qstep = 2.0 * np.pi / (plan.pattern_shape[1] * plan.object_pixel_m)
        patterns.append(RealField(F.real**2 + F.imag**2, qstep))
    return DiffractionStack(plan=plan, patterns=patterns, flat=diffract(probe.field))


def diff_phase_corrected(stack: DiffractionStack, probe: Probe) -> MomentMaps:
    """Differential phase with the probe-phase bias removed per scan point.

    Subtracts the centroid of each virtual diffraction pattern (built from the
    measured transmission and the probe estimate) instead of the single flat
    centroid. Reduces to the naive maps when the probe phase is constant.
    """
    rows, cols = _require_raster(stack.plan)
    trans = transmission_map(stack)
    vstack = virtual_stack(trans, probe, stack.plan)

    m00, m10, m01 = _stack_moments(stack)
    cx = _centroids(m00, m10, "diff_phase_corrected")
    cy = _centroids(m00, m01, "diff_phase_corrected")
    v00, v10, v01 = _stack_moments(vstack)
    vx = _centroids(v00, v10, "diff_phase_corrected virtual")
    vy = _centroids(v00, v01, "diff_phase_corrected virtual")

    step = stack.plan.step_m
    return MomentMaps(
        transmission_sq=trans,
        phi_x=RealField((cx - vx).reshape(rows, cols), step),
        phi_y=RealField((cy - vy).reshape(rows, cols), step),
        corrected=True,
    )
