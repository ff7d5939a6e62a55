"""Non-iterative integration of gradient maps and assembly of the object initialization.

The two differential-phase maps are integrated in one shot in the Fourier
domain. A plain periodic solver would wrap the mismatch between opposite
borders into low-frequency artifacts; extending both gradients antisymmetrically
to twice the size makes the extended phase genuinely periodic, so the result is
boundary-artifact-free. Phase is only defined up to a constant here, so the
output is pinned to zero mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ComplexField, RealField, freq_grid
from .forward import RefractiveObject, ScanPlan
from .moments import upsample_to_object_grid

_TRANSMISSION_FLOOR = 1e-6


@dataclass
class PhaseMap:
    """Integrated phase on the scan raster, radians, spatial mean pinned to zero."""

    field: RealField
    mean_convention: str = "zero-mean"

    def __post_init__(self):
        m = float(np.mean(self.field.data))
        if abs(m) > 1e-9:
            raise ValueError(f"PhaseMap: mean must be 0 (got {m:.3e} rad)")


def antisym_extend(phi_x: RealField, phi_y: RealField) -> tuple[RealField, RealField]:
    """Extend both gradient maps to doubled shape with the antisymmetric sign pattern.

    The input data sits in the (+x, +y) quadrant (indices [0:H, 0:W]); mirrored
    copies fill the wrapped negative-coordinate quadrants. phi_x is odd under
    the x-mirror and even under the y-mirror; phi_y the other way around.
    """
    if phi_x.shape != phi_y.shape:
        raise ValueError(f"antisym_extend: shape mismatch {phi_x.shape} vs {phi_y.shape}")
    gx, gy = phi_x.data, phi_y.data
    ext_x = np.block([[gx, -gx[:, ::-1]], [gx[::-1, :], -gx[::-1, ::-1]]])
    ext_y = np.block([[gy, gy[:, ::-1]], [-gy[::-1, :], -gy[::-1, ::-1]]])
    return RealField(ext_x, phi_x.pixel_size), RealField(ext_y, phi_y.pixel_size)


def fourier_integrate(phi_x: RealField, phi_y: RealField, step: float | None = None) -> PhaseMap:
    """Integrate (phi_x, phi_y) = (d/dx, d/dy) of a phase into the phase itself.

    Gradients are in rad/m on a raster of pitch ``step`` (defaults to the
    fields' pixel_size); the result is in radians on the same raster. The q = 0
    term of the spectral division is zeroed, which fixes the mean-free gauge.
    """
    if step is None:
        step = phi_x.pixel_size
    if step <= 0:
        raise ValueError(f"fourier_integrate: step must be > 0, got {step}")
    if phi_x.shape != phi_y.shape:
        raise ValueError(f"fourier_integrate: shape mismatch {phi_x.shape} vs {phi_y.shape}")
    if not (np.all(np.isfinite(phi_x.data)) and np.all(np.isfinite(phi_y.data))):
        raise ValueError("fourier_integrate: non-finite input")

    h, w = phi_x.shape
    # the mean slope would become a square wave across the mirror seams and
    # ring; integrate it analytically and feed only the residual to the solver
    mean_gx = float(np.mean(phi_x.data))
    mean_gy = float(np.mean(phi_y.data))
    res_x = RealField(phi_x.data - mean_gx, step)
    res_y = RealField(phi_y.data - mean_gy, step)

    ext_x, ext_y = antisym_extend(res_x, res_y)
    grid = freq_grid(2 * w, 2 * h, step)
    num = np.fft.fft2(ext_x.data) + 1j * np.fft.fft2(ext_y.data)
    # d/dx <-> multiplication by i*q_x under this DFT sign convention, hence
    # the extra factor i relative to a bare (q_x + i q_y) denominator
    den = 1j * (grid.qx + 1j * grid.qy)
    den[0, 0] = 1.0
    spec = num / den
    spec[0, 0] = 0.0
    phi = np.fft.ifft2(spec).real[:h, :w]

    xs = step * np.arange(w)
    ys = step * np.arange(h)
    phi = phi + mean_gx * xs[None, :] + mean_gy * ys[:, None]
    phi = phi - phi.mean()
    return PhaseMap(RealField(phi, step))


def build_init_object(
    transmission_sq: RealField, phase: PhaseMap, plan: ScanPlan
) -> RefractiveObject:
    """Assemble the low-resolution object estimate used to start the reconstruction.

    Both raster maps are bilinearly upsampled to the object grid (nearest-edge
    value outside the scanned area). The refractive estimate is
    ``phase - 1j*ln(o)`` with ``o = sqrt(o^2)`` floored at 1e-6 (and capped at 1)
    so its object wave is exactly ``o * exp(1j*phase)``. Empty maps reduce to
    the flat initialization.
    """
    if transmission_sq.data.size == 0 or phase.field.data.size == 0:
        raise ValueError("build_init_object: empty maps")
    if transmission_sq.shape != phase.field.shape:
        raise ValueError(
            f"build_init_object: transmission {transmission_sq.shape} vs phase {phase.field.shape}"
        )
    o2 = upsample_to_object_grid(transmission_sq, plan)
    phi = upsample_to_object_grid(phase.field, plan)
    o = np.sqrt(np.clip(o2.data, _TRANSMISSION_FLOOR, 1.0))
    data = phi.data - 1j * np.log(o)
    return RefractiveObject(ComplexField(data, plan.object_pixel_m))
