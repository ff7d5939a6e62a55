"""Synthetic objects and probes, exit waves, and simulated diffraction scans.

The object is kept in refractive form: a complex map ``O_tilde`` whose real
part is the accumulated phase (radians) and whose imaginary part is the
attenuation exponent, so the transmitted wave is ``exp(1j * O_tilde)`` and the
amplitude transmission is ``exp(-imag(O_tilde))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _field

import numpy as np

from .fields import ComplexField, RealField, extract_patch, patch_slices

_ABSORPTION_SLACK = 1e-9


@dataclass
class RefractiveObject:
    """Refractive object function on the object pixel grid.

    Invariant: ``imag(data) >= 0`` (absorption cannot amplify), so the
    amplitude transmission ``exp(-imag)`` lies in (0, 1].
    """

    field: ComplexField

    def __post_init__(self):
        if np.min(self.field.data.imag) < -_ABSORPTION_SLACK:
            raise ValueError(
                "RefractiveObject: negative attenuation exponent "
                f"(min imag = {np.min(self.field.data.imag):.3e})"
            )

    def object_wave(self) -> np.ndarray:
        """The transmitted complex wave exp(1j * O_tilde)."""
        return np.exp(1j * self.field.data)

    def transmission(self) -> np.ndarray:
        """Amplitude transmission exp(-imag O_tilde), in (0, 1]."""
        return np.exp(-self.field.data.imag)

    def copy(self) -> "RefractiveObject":
        return RefractiveObject(self.field.copy())


@dataclass
class Probe:
    """Complex illumination field on the same pixel pitch as the object."""

    field: ComplexField

    def __post_init__(self):
        if not np.sum(np.abs(self.field.data) ** 2) > 0:
            raise ValueError("Probe: total power must be > 0")

    def amplitude(self) -> np.ndarray:
        return np.abs(self.field.data)

    def phase(self) -> np.ndarray:
        return np.angle(self.field.data)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.field.data) ** 2))

    def copy(self) -> "Probe":
        return Probe(self.field.copy())


@dataclass
class ScanPlan:
    """Scan geometry: positions in meters plus the grids they refer to.

    ``positions`` is a (J, 2) array of (x, y) object-plane coordinates.
    ``raster_shape = (rows, cols)`` is set when the positions form a row-major
    raster on a uniform step, which the moment/wavefront stages require.
    """

    positions: np.ndarray
    pattern_shape: tuple[int, int]
    object_shape: tuple[int, int]
    object_pixel_m: float
    raster_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.pattern_shape = (int(self.pattern_shape[0]), int(self.pattern_shape[1]))
        self.object_shape = (int(self.object_shape[0]), int(self.object_shape[1]))
        self.object_pixel_m = float(self.object_pixel_m)
        if self.positions.shape[0] < 1:
            raise ValueError("ScanPlan: at least one position required")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("ScanPlan: non-finite positions")
        if self.object_pixel_m <= 0:
            raise ValueError("ScanPlan: object_pixel_m must be > 0")
        # every position must map to an in-bounds patch; keep the slices around
        self._slices = []
        for j, (x, y) in enumerate(self.positions):
            try:
                self._slices.append(
                    patch_slices(self.object_shape, self.object_pixel_m, (x, y), self.pattern_shape)
                )
            except ValueError as exc:
                raise ValueError(f"scan position {j}: {exc}") from exc
        if self.raster_shape is not None:
            self.raster_shape = (int(self.raster_shape[0]), int(self.raster_shape[1]))
            rows, cols = self.raster_shape
            if rows * cols != self.num_positions:
                raise ValueError(
                    f"ScanPlan: raster {rows}x{cols} does not match {self.num_positions} positions"
                )
            self._validate_raster()

    def _validate_raster(self):
        rows, cols = self.raster_shape
        pos = self.positions.reshape(rows, cols, 2)
        steps = []
        if cols > 1:
            dx = np.diff(pos[:, :, 0], axis=1)
            steps.append(dx)
            if np.ptp(dx) > 1e-9 * max(np.abs(dx).max(), 1e-300):
                raise ValueError("ScanPlan: raster columns are not uniformly spaced")
        if rows > 1:
            dy = np.diff(pos[:, :, 1], axis=0)
            steps.append(dy)
            if np.ptp(dy) > 1e-9 * max(np.abs(dy).max(), 1e-300):
                raise ValueError("ScanPlan: raster rows are not uniformly spaced")
        if len(steps) == 2:
            sx, sy = steps[0].flat[0], steps[1].flat[0]
            if abs(sx - sy) > 1e-9 * max(abs(sx), abs(sy)):
                raise ValueError(f"ScanPlan: anisotropic raster step ({sx} vs {sy})")

    @property
    def num_positions(self) -> int:
        return self.positions.shape[0]

    @property
    def step_m(self) -> float:
        """Uniform raster step in meters (raster plans only)."""
        if self.raster_shape is None:
            raise ValueError("ScanPlan: step_m is only defined for raster plans")
        rows, cols = self.raster_shape
        pos = self.positions.reshape(rows, cols, 2)
        if cols > 1:
            return float(pos[0, 1, 0] - pos[0, 0, 0])
        if rows > 1:
            return float(pos[1, 0, 1] - pos[0, 0, 1])
        raise ValueError("ScanPlan: 1x1 raster has no step")

    @property
    def origin_m(self) -> tuple[float, float]:
        """Position (x, y) of the first scan point."""
        return (float(self.positions[0, 0]), float(self.positions[0, 1]))

    def patch_slices_for(self, j: int) -> tuple[slice, slice]:
        return self._slices[j]


def make_raster_plan(
    rows: int,
    cols: int,
    step_m: float,
    origin_m: tuple[float, float],
    pattern_shape: tuple[int, int],
    object_shape: tuple[int, int],
    object_pixel_m: float,
) -> ScanPlan:
    """Row-major raster of ``rows x cols`` positions starting at ``origin_m``."""
    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    x = origin_m[0] + step_m * jj.ravel()
    y = origin_m[1] + step_m * ii.ravel()
    return ScanPlan(
        positions=np.column_stack([x, y]),
        pattern_shape=pattern_shape,
        object_shape=object_shape,
        object_pixel_m=object_pixel_m,
        raster_shape=(rows, cols),
    )


@dataclass
class PoissonNoise:
    """Photon-count noise model: ``photons`` sets the flat-pattern budget."""

    photons: float
    seed: int = 0


@dataclass
class DiffractionStack:
    """J far-field intensity patterns plus their scan plan and a flat-field pattern."""

    plan: ScanPlan
    patterns: list[RealField]
    flat: RealField
    _cache: dict = _field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.patterns) != self.plan.num_positions:
            raise ValueError(
                f"DiffractionStack: {len(self.patterns)} patterns for "
                f"{self.plan.num_positions} positions"
            )
        shape = self.plan.pattern_shape
        for j, p in enumerate(self.patterns):
            if p.shape != shape:
                raise ValueError(f"DiffractionStack: pattern {j} has shape {p.shape}, expected {shape}")
            if np.min(p.data) < 0:
                raise ValueError(f"DiffractionStack: negative intensity in pattern {j}")
        if self.flat.shape != shape:
            raise ValueError("DiffractionStack: flat shape mismatch")
        if np.min(self.flat.data) < 0:
            raise ValueError("DiffractionStack: negative intensity in flat")

    @property
    def num_patterns(self) -> int:
        return len(self.patterns)

    def stacked(self) -> np.ndarray:
        """All patterns as one (J, Qh, Qw) array (cached)."""
        if "stacked" not in self._cache:
            self._cache["stacked"] = np.stack([p.data for p in self.patterns])
        return self._cache["stacked"]

    def stacked_sqrt(self) -> np.ndarray:
        if "sqrt" not in self._cache:
            self._cache["sqrt"] = np.sqrt(self.stacked())
        return self._cache["sqrt"]


def exit_wave(obj: RefractiveObject, probe: Probe, position: tuple[float, float]) -> ComplexField:
    """Exit wave exp(1j*O_tilde) * P at one scan position, on the probe grid."""
    if abs(probe.field.pixel_size - obj.field.pixel_size) > 1e-12 * obj.field.pixel_size:
        raise ValueError(
            f"probe pitch {probe.field.pixel_size} != object pitch {obj.field.pixel_size}"
        )
    patch = extract_patch(obj.field, position, probe.field.shape)
    return ComplexField(np.exp(1j * patch.data) * probe.field.data, obj.field.pixel_size)


def diffract(psi: ComplexField) -> RealField:
    """Far-field intensity |F{psi}|^2; total counts equal total |psi|^2."""
    F = np.fft.fft2(psi.data, norm="ortho")
    qstep = 2.0 * np.pi / (psi.width * psi.pixel_size)
    return RealField(F.real**2 + F.imag**2, qstep)


def simulate_scan(
    obj: RefractiveObject,
    probe: Probe,
    plan: ScanPlan,
    noise: PoissonNoise | None = None,
) -> DiffractionStack:
    """Simulate the full diffraction stack for a scan plan.

    The flat-field pattern is the diffraction of the bare probe (object == 1)
    and is kept noiseless; it is a normalization reference. With ``noise``,
    pattern j is replaced by a Poisson draw at a photon scale set so the flat
    pattern would total ``noise.photons`` counts, seeded per position with
    ``seed XOR j`` so the draw order is irrelevant.
    """
    if plan.pattern_shape != probe.field.shape:
        raise ValueError(
            f"plan pattern_shape {plan.pattern_shape} != probe shape {probe.field.shape}"
        )
    if plan.object_shape != obj.field.shape:
        raise ValueError(f"plan object_shape {plan.object_shape} != object shape {obj.field.shape}")
    if abs(plan.object_pixel_m - obj.field.pixel_size) > 1e-12 * obj.field.pixel_size:
        raise ValueError("plan object_pixel_m does not match the object grid")

    flat = diffract(probe.field)
    if noise is not None:
        scale = noise.photons / float(np.sum(flat.data))
        if scale <= 0 or not np.isfinite(scale):
            raise ValueError(f"PoissonNoise: bad photon budget {noise.photons}")

    patterns = []
    for j in range(plan.num_positions):
        try:
            psi = exit_wave(obj, probe, (plan.positions[j, 0], plan.positions[j, 1]))
        except ValueError as exc:
            raise ValueError(f"scan position {j}: {exc}") from exc
        pat = diffract(psi)
        if noise is not None:
            rng = np.random.default_rng(noise.seed ^ j)
            pat = RealField(rng.poisson(pat.data * scale) / scale, pat.pixel_size)
        patterns.append(pat)
    return DiffractionStack(plan=plan, patterns=patterns, flat=flat)


def _radius_angle(grid: int) -> tuple[np.ndarray, np.ndarray]:
    c = (grid - 1) / 2.0
    yy, xx = np.mgrid[0:grid, 0:grid]
    dx = xx - c
    dy = yy - c
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def make_siemens_star(
    grid: int = 213,
    min_transmission: float = 0.8,
    phase_shift: float = -1.2,
    spokes: int = 36,
    inner_radius: float = 4.0,
    outer_radius: float | None = None,
    pixel_size: float = 1.0,
) -> RefractiveObject:
    """Flat test pattern of alternating wedges, finest features at the center.

    Spoke sectors carry phase ``phase_shift`` and amplitude transmission
    ``min_transmission``; the background (and everything outside
    ``outer_radius``) is empty. ``spokes`` counts the spoke sectors, each
    ``pi/spokes`` wide, so the pattern repeats every ``2*pi/spokes``.
    Radii are in pixels.
    """
    if spokes < 4 or spokes % 2 != 0:
        raise ValueError(f"spokes must be even and >= 4, got {spokes}")
    if not 0 < min_transmission <= 1:
        raise ValueError(f"min_transmission must be in (0, 1], got {min_transmission}")
    if outer_radius is None:
        outer_radius = grid / 2.0 - 2.0
    if not 0 <= inner_radius < outer_radius <= grid / 2.0:
        raise ValueError(
            f"bad star geometry: inner {inner_radius}, outer {outer_radius}, grid {grid}"
        )
    rho, theta = _radius_angle(grid)
    period = 2.0 * np.pi / spokes
    in_spoke = np.mod(theta, period) < (period / 2.0)
    mask = in_spoke & (rho >= inner_radius) & (rho <= outer_radius)
    data = np.zeros((grid, grid), dtype=np.complex128)
    data[mask] = phase_shift + 1j * (-np.log(min_transmission))
    return RefractiveObject(ComplexField(data, pixel_size))


def make_bulky_phantom(
    grid: int,
    diameter: float,
    peak_phase: float = -30.0,
    peak_attenuation: float = 0.5,
    edge_width: float | None = None,
    pixel_size: float = 1.0,
) -> RefractiveObject:
    """Smooth super-Gaussian disk, much larger than the probe.

    ``O_tilde(r) = (peak_phase + 1j*peak_attenuation) * exp(-(rho/R)^p)`` with
    R = diameter/2. With ``edge_width`` (pixels) the exponent p is chosen so
    the 90%-to-10% edge transition has about that width (p ~ 3.08*R/width);
    by default p = 8. Steep gradients stay confined to the edge band.
    """
    R = diameter / 2.0
    if not 0 < diameter < grid:
        raise ValueError(f"diameter must be in (0, grid), got {diameter} on grid {grid}")
    if peak_attenuation < 0:
        raise ValueError(f"peak_attenuation must be >= 0, got {peak_attenuation}")
    if edge_width is None:
        p = 8.0
    else:
        if edge_width <= 0:
            raise ValueError(f"edge_width must be > 0, got {edge_width}")
        p = max(2.0, 3.0844 * R / edge_width)
    rho, _ = _radius_angle(grid)
    profile = np.exp(-((rho / R) ** p))
    data = (peak_phase + 1j * peak_attenuation) * profile
    return RefractiveObject(ComplexField(data, pixel_size))


def _gaussian_amplitude(grid: int, fwhm: float) -> np.ndarray:
    # intensity FWHM = fwhm, so amplitude ~ exp(-2 ln2 (rho/fwhm)^2)
    rho, _ = _radius_angle(grid)
    return np.exp(-2.0 * np.log(2.0) * (rho / fwhm) ** 2)


def make_gaussian_probe(
    grid: int, fwhm: float = 7.0, power: float = 1.0, pixel_size: float = 1.0
) -> Probe:
    """Focused probe: real Gaussian amplitude (intensity FWHM in pixels), flat phase."""
    if fwhm <= 0 or power <= 0:
        raise ValueError(f"fwhm and power must be > 0, got fwhm={fwhm}, power={power}")
    amp = _gaussian_amplitude(grid, fwhm)
    amp *= np.sqrt(power / np.sum(amp**2))
    return Probe(ComplexField(amp.astype(np.complex128), pixel_size))


def make_defocused_probe(
    grid: int,
    fwhm: float = 7.0,
    power: float = 1.0,
    linear_phase: tuple[float, float] = (0.0, 0.0),
    quadratic_phase: float = 0.0,
    pixel_size: float = 1.0,
) -> Probe:
    """Gaussian probe with structured phase a*x + b*y + c*|r|^2 about its center.

    ``linear_phase`` is (a, b) in rad/m and ``quadratic_phase`` is c in rad/m^2
    (rad/px and rad/px^2 when pixel_size is 1). The amplitude is the same as
    :func:`make_gaussian_probe` regardless of the phase coefficients.
    """
    base = make_gaussian_probe(grid, fwhm, power, pixel_size)
    c = (grid - 1) / 2.0
    yy, xx = np.mgrid[0:grid, 0:grid]
    x = (xx - c) * pixel_size
    y = (yy - c) * pixel_size
    xi = linear_phase[0] * x + linear_phase[1] * y + quadratic_phase * (x**2 + y**2)
    return Probe(ComplexField(base.field.data * np.exp(1j * xi), pixel_size))
