"""Refractive ptychographic reconstruction by stochastic sequential updates.

Each sweep visits every scan position once in a fresh seeded random order. At
a position the current exit wave is propagated to the detector, its modulus is
replaced by the measured amplitude, and the back-propagated difference drives
additive updates of the refractive object and, optionally, of the probe. The
object is stored in refractive form throughout, so its phase is never wrapped
by the algorithm itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as _field

import numpy as np
import scipy.fft as _fft

from .fields import ComplexField, RealField
from .forward import DiffractionStack, Probe, RefractiveObject

_CHUNK = 512  # positions per batched FFT block in cost()
_WORKERS = 2


@dataclass
class MomentumConfig:
    """Velocity/friction acceleration applied to the object every ``period`` sweeps."""

    friction: float
    period: int = 2

    def __post_init__(self):
        if not 0 < self.friction < 1:
            raise ValueError(f"momentum friction must be in (0, 1), got {self.friction}")
        if self.period < 1:
            raise ValueError(f"momentum period must be >= 1, got {self.period}")


@dataclass
class ReconConfig:
    alpha: float = 1.0            # object step
    beta: float = 1.0             # probe step
    iterations: int = 1           # sweeps over all positions
    shuffle_seed: int = 0
    probe_refine: bool = True
    momentum: MomentumConfig | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 2 or not 0 < self.beta <= 2:
            raise ValueError(f"alpha and beta must be in (0, 2], got {self.alpha}, {self.beta}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@dataclass
class ReconState:
    """Current object/probe estimates plus the per-sweep cost history."""

    object: RefractiveObject
    probe: Probe
    iteration: int = 0
    cost_history: list[tuple[int, float]] = _field(default_factory=list)


def init_flat(obj_shape: tuple[int, int], pixel_size: float) -> RefractiveObject:
    """Flat initialization: refractive function 0 everywhere, object wave 1."""
    return RefractiveObject(
        ComplexField(np.zeros(obj_shape, dtype=np.complex128), pixel_size)
    )


def _project_to_amplitude(psi_hat: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Replace |psi_hat| with ``target``, keeping the phase (0 where undefined)."""
    amp = np.abs(psi_hat)
    zero = amp == 0
    out = psi_hat * (target / np.where(zero, 1.0, amp))
    if zero.any():
        out[zero] = target[zero]
    return out


def _sqrt_scaled(stack: DiffractionStack) -> np.ndarray:
    # measured amplitudes pre-scaled to the plain (unnormalized) forward FFT,
    # so the hot loop can skip the ortho scaling and the per-visit sqrt
    cache = stack._cache
    if "sqrt_scaled" not in cache:
        qh, qw = stack.plan.pattern_shape
        cache["sqrt_scaled"] = stack.stacked_sqrt() * math.sqrt(qh * qw)
    return cache["sqrt_scaled"]


def amplitude_project(psi_hat: ComplexField, measured: RealField) -> ComplexField:
    """Amplitude-replacement step: output modulus is sqrt(measured) exactly."""
    if psi_hat.shape != measured.shape:
        raise ValueError(f"amplitude_project: shape mismatch {psi_hat.shape} vs {measured.shape}")
    if np.min(measured.data) < 0:
        raise ValueError("amplitude_project: negative measured intensity")
    return ComplexField(
        _project_to_amplitude(psi_hat.data, np.sqrt(measured.data)), psi_hat.pixel_size
    )


def cost(state: ReconState, stack: DiffractionStack) -> float:
    """Amplitude-residual cost: sum over j, q of (sqrt(I_model) - sqrt(D))^2."""
    plan = stack.plan
    obj = state.object.field
    if plan.object_shape != obj.shape:
        raise ValueError(f"cost: object shape {obj.shape} != plan {plan.object_shape}")
    if plan.pattern_shape != state.probe.field.shape:
        raise ValueError("cost: probe shape does not match pattern shape")
    O = np.exp(1j * obj.data)
    P = state.probe.field.data
    sqrt_meas = _sqrt_scaled(stack)
    qh, qw = plan.pattern_shape
    J = plan.num_positions

    r0 = np.empty(J, dtype=np.intp)
    c0 = np.empty(J, dtype=np.intp)
    for j in range(J):
        rs, cs = plan.patch_slices_for(j)
        r0[j], c0[j] = rs.start, cs.start
    windows = np.lib.stride_tricks.sliding_window_view(O, (qh, qw))

    total = 0.0
    for s in range(0, J, _CHUNK):
        e = min(s + _CHUNK, J)
        psi = windows[r0[s:e], c0[s:e]] * P
        amp = np.abs(_fft.fft2(psi, axes=(-2, -1), workers=_WORKERS))
        total += float(np.sum((amp - sqrt_meas[s:e]) ** 2))
    return total / (qh * qw)


def update_position(state: ReconState, stack: DiffractionStack, j: int, config: ReconConfig) -> None:
    """One stochastic update at scan position j (mutates object and probe in place)."""
    plan = stack.plan
    rs, cs = plan.patch_slices_for(j)
    obj_data = state.object.field.data
    P = state.probe.field.data

    O = np.exp(1j * obj_data[rs, cs])
    psi = O * P
    m = np.abs(psi).max()
    if m == 0.0:
        warnings.warn(f"update_position: zero exit wave at position {j}, skipped")
        return
    # plain transforms + pre-scaled measured amplitudes == the unitary chain
    psi_hat = _fft.fft2(psi)
    amp = np.abs(psi_hat)
    target = _sqrt_scaled(stack)[j]
    if amp.min() == 0.0:
        proj = _project_to_amplitude(psi_hat, target)
    else:
        psi_hat *= target / amp
        proj = psi_hat
    diff = _fft.ifft2(proj)
    diff -= psi

    upd = np.conj(psi)
    upd *= diff
    upd *= config.alpha * (-1j) / (m * m)
    obj_data[rs, cs] += upd
    if config.probe_refine:
        # uses the pre-update object patch
        om = np.abs(O).max()
        if om == 0.0:
            warnings.warn(f"update_position: opaque object patch at position {j}, probe not updated")
            return
        np.conj(O, out=O)
        O *= diff
        O *= config.beta / (om * om)
        P += O


def run(
    stack: DiffractionStack,
    init_object: RefractiveObject,
    init_probe: Probe,
    config: ReconConfig,
) -> ReconState:
    """Iterate ``config.iterations`` sweeps from the given initialization.

    Each sweep visits all positions in a fresh random permutation drawn from a
    generator seeded with ``config.shuffle_seed``, so identical seeds give
    bit-identical histories. The cost is recorded at sweep 0 (initialization)
    and after every sweep.
    """
    plan = stack.plan
    if init_object.field.shape != plan.object_shape:
        raise ValueError(
            f"init object shape {init_object.field.shape} != plan {plan.object_shape}"
        )
    if init_probe.field.shape != plan.pattern_shape:
        raise ValueError(
            f"init probe shape {init_probe.field.shape} != pattern {plan.pattern_shape}"
        )
    state = ReconState(object=init_object.copy(), probe=init_probe.copy())
    rng = np.random.default_rng(config.shuffle_seed)
    state.cost_history.append((0, cost(state, stack)))

    vel = None
    obj_ref = None
    if config.momentum is not None:
        vel = np.zeros_like(state.object.field.data)
        obj_ref = state.object.field.data.copy()

    for sweep in range(1, config.iterations + 1):
        for j in rng.permutation(plan.num_positions):
            update_position(state, stack, int(j), config)
        if config.momentum is not None and sweep % config.momentum.period == 0:
            obj_data = state.object.field.data
            vel = config.momentum.friction * vel + (obj_data - obj_ref)
            obj_data += config.momentum.friction * vel
            obj_ref = obj_data.copy()
        state.iteration = sweep
        state.cost_history.append((sweep, cost(state, stack)))
    return state


def _wrap(angles: np.ndarray) -> np.ndarray:
    return (angles + np.pi) % (2.0 * np.pi) - np.pi


def count_phase_residues(
    obj: RefractiveObject | ComplexField, region: tuple[int, int, int, int] | None = None
) -> int:
    """Count +-2pi circulations of the wrapped object phase over 2x2 plaquettes.

    ``region`` is (row0, row1, col0, col1), half-open, defaulting to the full
    grid. A clean reconstruction of a smooth phase has none; they appear where
    the iteration tore the phase at steep gradients. Accepts a bare
    ComplexField as well (reconstruction snapshots read back from disk).
    """
    data = obj.data if isinstance(obj, ComplexField) else obj.field.data
    theta = np.angle(np.exp(1j * data.real))
    if region is not None:
        r0, r1, c0, c1 = region
        h, w = theta.shape
        if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= w):
            raise ValueError(f"region {region} outside grid {h}x{w}")
        theta = theta[r0:r1, c0:c1]
    if theta.shape[0] < 2 or theta.shape[1] < 2:
        return 0
    d_right = _wrap(theta[:-1, 1:] - theta[:-1, :-1])
    d_down = _wrap(theta[1:, 1:] - theta[:-1, 1:])
    d_left = _wrap(theta[1:, :-1] - theta[1:, 1:])
    d_up = _wrap(theta[:-1, :-1] - theta[1:, :-1])
    circulation = d_right + d_down + d_left + d_up
    return int(np.count_nonzero(np.abs(circulation) > np.pi))
