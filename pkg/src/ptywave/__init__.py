"""Ptychography at desk scale: simulation, moment analysis, wavefront
integration, and refractive iterative reconstruction with pluggable
object initialization."""

__version__ = "0.1.0"

from .fields import (
    ComplexField,
    FreqGrid,
    RealField,
    bilinear_resample,
    dft2,
    embed_add_patch,
    extract_patch,
    freq_grid,
    idft2,
)
from .forward import (
    DiffractionStack,
    PoissonNoise,
    Probe,
    RefractiveObject,
    ScanPlan,
    diffract,
    exit_wave,
    make_bulky_phantom,
    make_defocused_probe,
    make_gaussian_probe,
    make_raster_plan,
    make_siemens_star,
    simulate_scan,
)
from .moments import (
    MomentMaps,
    diff_phase_corrected,
    diff_phase_naive,
    moment_uv,
    transmission_map,
    virtual_stack,
)
from .wavefront import PhaseMap, antisym_extend, build_init_object, fourier_integrate
from .recon import (
    MomentumConfig,
    ReconConfig,
    ReconState,
    amplitude_project,
    cost,
    count_phase_residues,
    init_flat,
    run,
    update_position,
)
