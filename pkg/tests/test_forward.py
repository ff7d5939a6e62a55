"""Phantoms, probes, exit waves, diffraction, and simulated scans."""

import numpy as np
import pytest

from ptywave.fields import ComplexField, freq_grid
from ptywave.forward import (
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


def small_plan(n=32, q=8, step=4.0, rows=5, cols=5):
    return make_raster_plan(rows, cols, step, (q // 2 + 2.0, q // 2 + 2.0), (q, q), (n, n), 1.0)


def flat_object(n=32):
    return RefractiveObject(ComplexField(np.zeros((n, n), complex), 1.0))


class TestTypes:
    def test_negative_absorption_rejected(self):
        data = np.zeros((4, 4), complex)
        data[0, 0] = 1.0 - 0.5j  # amplifying pixel
        with pytest.raises(ValueError, match="attenuation"):
            RefractiveObject(ComplexField(data, 1.0))

    def test_zero_power_probe_rejected(self):
        with pytest.raises(ValueError, match="power"):
            Probe(ComplexField(np.zeros((4, 4), complex), 1.0))

    def test_plan_bounds_checked_with_index(self):
        with pytest.raises(ValueError, match="position 0"):
            ScanPlan(
                positions=np.array([[0.0, 0.0]]),
                pattern_shape=(8, 8),
                object_shape=(16, 16),
                object_pixel_m=1.0,
            )

    def test_plan_raster_consistency(self):
        plan = small_plan()
        assert plan.raster_shape == (5, 5)
        assert plan.step_m == 4.0
        with pytest.raises(ValueError, match="raster"):
            ScanPlan(
                positions=plan.positions,
                pattern_shape=plan.pattern_shape,
                object_shape=plan.object_shape,
                object_pixel_m=1.0,
                raster_shape=(5, 4),
            )

    def test_stack_rejects_negative_intensity(self):
        plan = small_plan()
        probe = make_gaussian_probe(8, fwhm=3.0)
        stack = simulate_scan(flat_object(), probe, plan)
        bad = [p.copy() for p in stack.patterns]
        bad[3].data[0, 0] = -1.0
        with pytest.raises(ValueError, match="negative"):
            DiffractionStack(plan=plan, patterns=bad, flat=stack.flat)


class TestExitWave:
    def test_empty_object_gives_probe(self):
        probe = make_gaussian_probe(8, fwhm=3.0)
        psi = exit_wave(flat_object(), probe, (16.0, 16.0))
        np.testing.assert_allclose(psi.data, probe.field.data, atol=1e-15)

    def test_constant_phase_object(self):
        c = 0.7
        obj = RefractiveObject(ComplexField(np.full((32, 32), c, complex), 1.0))
        probe = make_gaussian_probe(8, fwhm=3.0)
        psi = exit_wave(obj, probe, (16.0, 16.0))
        np.testing.assert_allclose(psi.data, np.exp(1j * c) * probe.field.data, atol=1e-15)
        np.testing.assert_allclose(np.abs(psi.data), np.abs(probe.field.data), atol=1e-15)

    def test_pure_absorber_halves_amplitude(self):
        # O_tilde = -i ln 2 => |psi| = |P| / 2, checked pointwise
        obj = RefractiveObject(ComplexField(np.full((32, 32), 1j * np.log(2.0)), 1.0))
        probe = make_gaussian_probe(8, fwhm=3.0)
        psi = exit_wave(obj, probe, (16.0, 16.0))
        expect = np.abs(probe.field.data) / 2.0
        np.testing.assert_allclose(np.abs(psi.data), expect, rtol=1e-12)

    def test_out_of_bounds_position(self):
        probe = make_gaussian_probe(8, fwhm=3.0)
        with pytest.raises(ValueError, match="exceeds"):
            exit_wave(flat_object(), probe, (1.0, 1.0))


class TestDiffract:
    def test_delta_gives_uniform(self):
        data = np.zeros((8, 8), complex)
        data[3, 5] = 2.0
        pat = diffract(ComplexField(data, 1.0))
        np.testing.assert_allclose(pat.data, 4.0 / 64.0, rtol=1e-12)

    def test_total_intensity_conserved(self):
        rng = np.random.default_rng(0)
        psi = ComplexField(rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16)), 1.0)
        pat = diffract(psi)
        power = float(np.sum(np.abs(psi.data) ** 2))
        assert abs(float(np.sum(pat.data)) - power) < 1e-10 * power

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(1)
        base = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        a = diffract(ComplexField(base, 1.0))
        b = diffract(ComplexField(base * np.exp(1j * 1.234), 1.0))
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12)


class TestSimulateScan:
    def test_empty_object_patterns_equal_flat(self):
        probe = make_gaussian_probe(8, fwhm=3.0)
        stack = simulate_scan(flat_object(), probe, small_plan())
        for p in stack.patterns:
            np.testing.assert_allclose(p.data, stack.flat.data, atol=1e-15)

    def test_phase_only_object_conserves_counts(self):
        rng = np.random.default_rng(2)
        phases = rng.uniform(-2, 2, (32, 32))
        obj = RefractiveObject(ComplexField(phases.astype(complex), 1.0))
        probe = make_gaussian_probe(8, fwhm=3.0)
        stack = simulate_scan(obj, probe, small_plan())
        flat_total = float(np.sum(stack.flat.data))
        for p in stack.patterns:
            assert abs(float(np.sum(p.data)) - flat_total) < 1e-10 * flat_total

    def test_poisson_converges_to_noiseless(self):
        obj = make_siemens_star(grid=32, spokes=8, inner_radius=2, outer_radius=14)
        probe = make_gaussian_probe(8, fwhm=3.0)
        plan = small_plan()
        clean = simulate_scan(obj, probe, plan)
        noisy = simulate_scan(obj, probe, plan, PoissonNoise(photons=1e12, seed=7))
        for c, n in zip(clean.patterns, noisy.patterns):
            rms = np.sqrt(np.mean((c.data - n.data) ** 2))
            assert rms < 0.01 * np.sqrt(np.mean(c.data**2))

    def test_poisson_deterministic(self):
        obj = make_siemens_star(grid=32, spokes=8, inner_radius=2, outer_radius=14)
        probe = make_gaussian_probe(8, fwhm=3.0)
        a = simulate_scan(obj, probe, small_plan(), PoissonNoise(photons=1e4, seed=5))
        b = simulate_scan(obj, probe, small_plan(), PoissonNoise(photons=1e4, seed=5))
        for pa, pb in zip(a.patterns, b.patterns):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_snapping_consistency_with_recon(self):
        # the simulator and the engine snap positions identically: the true
        # state reconstructs a noiseless scan to an essentially zero cost
        from ptywave.recon import ReconConfig, run

        obj = make_siemens_star(grid=48, spokes=8, inner_radius=3, outer_radius=20)
        probe = make_gaussian_probe(12, fwhm=4.0)
        # off-pitch positions: snapping happens on both sides
        plan = make_raster_plan(8, 8, 4.3, (6.2, 6.1), (12, 12), (48, 48), 1.0)
        stack = simulate_scan(obj, probe, plan)
        state = run(stack, obj, probe, ReconConfig(iterations=3, shuffle_seed=0))
        counts = sum(float(np.sum(p.data)) for p in stack.patterns)
        assert state.cost_history[-1][1] < 1e-20 * counts

    def test_flat_is_noiseless_reference(self):
        obj = flat_object()
        probe = make_gaussian_probe(8, fwhm=3.0)
        noisy = simulate_scan(obj, probe, small_plan(), PoissonNoise(photons=100.0, seed=3))
        clean = simulate_scan(obj, probe, small_plan())
        np.testing.assert_array_equal(noisy.flat.data, clean.flat.data)


class TestSiemensStar:
    def test_background_is_empty(self):
        star = make_siemens_star(grid=64, spokes=12, inner_radius=3, outer_radius=28)
        # corner pixel lies outside the outer radius
        assert star.field.data[0, 0] == 0
        assert np.exp(-star.field.data[0, 0].imag) == 1.0

    def test_spoke_values(self):
        star = make_siemens_star(grid=101, spokes=12, inner_radius=3, outer_radius=45)
        spoke_mask = star.field.data.real != 0
        assert spoke_mask.any()
        vals = star.field.data[spoke_mask]
        np.testing.assert_allclose(vals.real, -1.2)
        np.testing.assert_allclose(np.exp(-vals.imag), 0.8, rtol=1e-12)

    def test_rotational_symmetry(self):
        # geometric oracle: histogram spoke pixels into angular bins; rotating
        # by two sector periods must map the spoke set onto itself
        spokes = 12
        star = make_siemens_star(grid=129, spokes=spokes, inner_radius=4, outer_radius=60)
        c = (129 - 1) / 2
        yy, xx = np.mgrid[0:129, 0:129]
        theta = np.arctan2(yy - c, xx - c)
        rho = np.hypot(yy - c, xx - c)
        ring = (rho > 10) & (rho < 55)
        nbins = 4 * spokes
        bins = ((theta[ring] + np.pi) / (2 * np.pi) * nbins).astype(int) % nbins
        occupancy = np.bincount(bins, weights=(star.field.data.real[ring] != 0), minlength=nbins)
        counts = np.bincount(bins, minlength=nbins)
        frac = occupancy / np.maximum(counts, 1)
        shift = int(round(2 * (2 * np.pi / spokes) / (2 * np.pi) * nbins))
        # strong correlation at the symmetry lag (boundary pixels add a little
        # quantization noise), none at a quarter-period control lag
        assert np.corrcoef(frac, np.roll(frac, shift))[0, 1] > 0.95
        assert np.corrcoef(frac, np.roll(frac, 1))[0, 1] < 0.5

    def test_rejects_odd_spokes(self):
        with pytest.raises(ValueError, match="even"):
            make_siemens_star(grid=64, spokes=7)


class TestBulkyPhantom:
    def test_center_value(self):
        ph = make_bulky_phantom(grid=65, diameter=40, peak_phase=-30.0, peak_attenuation=0.5)
        center = ph.field.data[32, 32]
        assert abs(center - (-30.0 + 0.5j)) < 1e-6

    def test_tail_vanishes_at_2r(self):
        ph = make_bulky_phantom(grid=129, diameter=50, peak_phase=-30.0, peak_attenuation=0.5)
        c = (129 - 1) / 2
        # pixel at 2R = 50 px from the center, along x
        assert abs(ph.field.data[64, 64 + 50]) < 1e-10

    def test_max_gradient_inside_edge_band(self):
        # finite-difference scan of the radial profile
        grid, diameter, edge = 257, 160, 12.0
        ph = make_bulky_phantom(grid, diameter, peak_phase=-30.0, peak_attenuation=0.0, edge_width=edge)
        row = ph.field.data.real[(grid - 1) // 2]
        grad = np.abs(np.diff(row))
        r_peak = abs(np.argmax(grad) - (grid - 1) / 2)
        R = diameter / 2
        assert R - edge <= r_peak <= R + edge

    def test_edge_width_controls_steepness(self):
        grid, diameter = 257, 160
        steep = make_bulky_phantom(grid, diameter, -30.0, 0.0, edge_width=8.0)
        soft = make_bulky_phantom(grid, diameter, -30.0, 0.0, edge_width=32.0)
        g_steep = np.abs(np.diff(steep.field.data.real[(grid - 1) // 2])).max()
        g_soft = np.abs(np.diff(soft.field.data.real[(grid - 1) // 2])).max()
        assert g_steep > 2.5 * g_soft

    def test_diameter_must_fit(self):
        with pytest.raises(ValueError, match="diameter"):
            make_bulky_phantom(grid=64, diameter=80)


class TestProbes:
    def test_gaussian_fwhm_definition(self):
        probe = make_gaussian_probe(33, fwhm=8.0, power=2.0)
        inten = np.abs(probe.field.data) ** 2
        peak = inten[16, 16]
        at_half_radius = inten[16, 20]  # r = fwhm/2 = 4 px
        assert at_half_radius == pytest.approx(peak / 2, rel=1e-12)

    def test_flat_phase(self):
        probe = make_gaussian_probe(16, fwhm=5.0)
        assert np.abs(probe.phase()).max() == 0.0

    def test_power_normalization(self):
        probe = make_gaussian_probe(16, fwhm=5.0, power=3.7)
        assert probe.power == pytest.approx(3.7, rel=1e-12)

    def test_defocused_zero_coeffs_equals_gaussian(self):
        a = make_gaussian_probe(16, fwhm=5.0, power=2.0)
        b = make_defocused_probe(16, fwhm=5.0, power=2.0)
        np.testing.assert_array_equal(a.field.data, b.field.data)

    def test_defocused_amplitude_independent_of_phase(self):
        a = make_gaussian_probe(16, fwhm=5.0)
        b = make_defocused_probe(16, fwhm=5.0, linear_phase=(0.4, -0.2), quadratic_phase=0.03)
        np.testing.assert_allclose(np.abs(b.field.data), np.abs(a.field.data), atol=1e-15)

    def test_linear_phase_shifts_pattern(self):
        # Fourier shift theorem: the far field moves by a in q_x; centroid oracle
        q = 32
        a_coeff = 0.5  # rad/px, well under Nyquist pi
        focused = make_gaussian_probe(q, fwhm=7.0)
        tilted = make_defocused_probe(q, fwhm=7.0, linear_phase=(a_coeff, 0.0))
        g = freq_grid(q, q, 1.0)

        def centroid_x(pat):
            return float(np.sum(g.qx * pat.data) / np.sum(pat.data))

        c0 = centroid_x(diffract(focused.field))
        c1 = centroid_x(diffract(tilted.field))
        assert c1 - c0 == pytest.approx(a_coeff, rel=0.01)
