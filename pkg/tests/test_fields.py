"""Field containers, unitary DFT, frequency grids, resampling, patch algebra."""

import numpy as np
import pytest

from ptywave.fields import (
    ComplexField,
    RealField,
    bilinear_resample,
    dft2,
    embed_add_patch,
    extract_patch,
    freq_grid,
    idft2,
)


def random_complex(h, w, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))


class TestFieldValidation:
    def test_rejects_nan(self):
        data = np.ones((4, 4), complex)
        data[1, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ComplexField(data, 1.0)

    def test_rejects_bad_pixel_size(self):
        with pytest.raises(ValueError):
            RealField(np.ones((4, 4)), 0.0)
        with pytest.raises(ValueError):
            RealField(np.ones((4, 4)), -1.0)

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            ComplexField(np.ones(16, complex), 1.0)

    def test_shape_accessors(self):
        f = RealField(np.zeros((3, 5)), 2.0)
        assert (f.height, f.width) == (3, 5)
        assert f.shape == (3, 5)


class TestDft:
    def test_constant_to_delta(self):
        # DC-only signal: unitary scaling puts sqrt(N)*mean = 4 at the origin
        f = ComplexField(np.ones((4, 4), complex), 1.0)
        F = dft2(f)
        assert F.data[0, 0] == pytest.approx(4.0)
        rest = F.data.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-14

    def test_delta_to_constant(self):
        data = np.zeros((4, 4), complex)
        data[0, 0] = 4.0
        f = idft2(ComplexField(data, 1.0))
        np.testing.assert_allclose(f.data, np.ones((4, 4)), atol=1e-14)

    def test_round_trip(self):
        f = ComplexField(random_complex(16, 16, 0), 0.5)
        back = idft2(dft2(f))
        np.testing.assert_allclose(back.data, f.data, rtol=0, atol=1e-12 * np.abs(f.data).max())

    def test_reverse_round_trip(self):
        F = ComplexField(random_complex(12, 12, 1), 3.0)
        back = dft2(idft2(F))
        np.testing.assert_allclose(back.data, F.data, rtol=0, atol=1e-12 * np.abs(F.data).max())

    def test_parseval_8x8(self):
        # oracle: direct summation of |.|^2 on both sides
        f = ComplexField(random_complex(8, 8, 2), 1.0)
        power_in = sum(abs(v) ** 2 for v in f.data.ravel())
        power_out = sum(abs(v) ** 2 for v in dft2(f).data.ravel())
        assert abs(power_out - power_in) < 1e-12 * power_in

    @pytest.mark.parametrize("n", [8, 32, 64, 256])
    def test_unitarity_and_round_trip_sizes(self, n):
        f = ComplexField(random_complex(n, n, n), 1.0)
        F = dft2(f)
        pin = np.sum(np.abs(f.data) ** 2)
        pout = np.sum(np.abs(F.data) ** 2)
        assert abs(pout - pin) <= 1e-10 * pin
        np.testing.assert_allclose(idft2(F).data, f.data, atol=1e-12 * np.abs(f.data).max())

    def test_dft_rejects_non_finite(self):
        f = ComplexField(np.ones((4, 4), complex), 1.0)
        f.data[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            dft2(f)

    def test_freq_step_metadata(self):
        f = ComplexField(np.ones((8, 8), complex), 2.0)
        assert dft2(f).pixel_size == pytest.approx(2 * np.pi / (8 * 2.0))


class TestFreqGrid:
    def test_4x4_unit_pitch(self):
        g = freq_grid(4, 4, 1.0)
        np.testing.assert_allclose(g.qx[0], [0.0, np.pi / 2, -np.pi, -np.pi / 2])
        np.testing.assert_allclose(g.qy[:, 0], [0.0, np.pi / 2, -np.pi, -np.pi / 2])

    @pytest.mark.parametrize("w,h", [(4, 6), (5, 3), (8, 8)])
    def test_zero_frequency_at_origin(self, w, h):
        g = freq_grid(w, h, 0.7)
        assert g.qx[0, 0] == 0.0
        assert g.qy[0, 0] == 0.0

    def test_nyquist_for_even_width(self):
        pixel = 0.25
        g = freq_grid(6, 4, pixel)
        assert np.max(np.abs(g.qx)) == pytest.approx(np.pi / pixel)

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError):
            freq_grid(1, 4, 1.0)
        with pytest.raises(ValueError):
            freq_grid(4, 4, 0.0)


class TestBilinearResample:
    def test_constant_any_shapes(self):
        src = RealField(np.full((3, 4), 2.5), 1.0)
        out = bilinear_resample(src, (7, 5), (0.0, 0.0), (-1.0, -1.0), 0.65)
        np.testing.assert_allclose(out.data, 2.5)

    def test_linear_ramp_double_density(self):
        # bilinear is exact on affine fields
        w, h = 8, 6
        src = RealField(np.tile(np.arange(w, dtype=float), (h, 1)), 1.0)  # f = x
        out = bilinear_resample(src, (2 * h, 2 * w), (0.0, 0.0), (0.0, 0.0), 0.5)
        expect = np.tile(0.5 * np.arange(2 * w), (2 * h, 1))
        expect = np.minimum(expect, w - 1.0)  # clamp at source edge
        assert np.abs(out.data - expect).max() < 1e-12

    def test_checkerboard_midpoints(self):
        src = RealField(np.array([[1.0, 0.0], [0.0, 1.0]]), 1.0)
        out = bilinear_resample(src, (4, 4), (0.0, 0.0), (0.0, 0.0), 0.5)

        # oracle: scalar bilinear formula evaluated per destination pixel
        def ref(xq, yq):
            xq, yq = min(max(xq, 0.0), 1.0), min(max(yq, 0.0), 1.0)
            x0, y0 = int(min(np.floor(xq), 0)), int(min(np.floor(yq), 0))
            dx, dy = xq - x0, yq - y0
            d = src.data
            return (
                d[y0, x0] * (1 - dy) * (1 - dx)
                + d[y0, x0 + 1] * (1 - dy) * dx
                + d[y0 + 1, x0] * dy * (1 - dx)
                + d[y0 + 1, x0 + 1] * dy * dx
            )

        for r in range(4):
            for c in range(4):
                assert out.data[r, c] == pytest.approx(ref(c * 0.5, r * 0.5), abs=1e-14)
        # the midpoint of a 2x2 checkerboard averages to one half
        assert out.data[1, 1] == pytest.approx(0.5)

    def test_affine_exactness(self):
        h, w = 9, 11
        yy, xx = np.mgrid[0:h, 0:w]
        src = RealField(1.5 + 0.25 * xx * 2.0 - 0.4 * yy * 2.0, 2.0)
        out = bilinear_resample(src, (13, 17), (2.0, -3.0), (3.0, -1.0), 0.7)
        yy2, xx2 = np.mgrid[0:13, 0:17]
        x_phys = 3.0 + 0.7 * xx2
        y_phys = -1.0 + 0.7 * yy2
        expect = 1.5 + 0.25 * (x_phys - 2.0) - 0.4 * (y_phys - (-3.0))
        inside = (
            (x_phys >= 2.0) & (x_phys <= 2.0 + (w - 1) * 2.0)
            & (y_phys >= -3.0) & (y_phys <= -3.0 + (h - 1) * 2.0)
        )
        assert np.abs(out.data[inside] - expect[inside]).max() <= 1e-12

    def test_1x1_source(self):
        src = RealField(np.array([[3.0]]), 1.0)
        out = bilinear_resample(src, (2, 2), (0.0, 0.0), (0.0, 0.0), 1.0)
        np.testing.assert_allclose(out.data, 3.0)


class TestPatches:
    def test_full_field_identity(self):
        f = ComplexField(random_complex(8, 8, 3), 1.0)
        patch = extract_patch(f, (4.0, 4.0), (8, 8))
        np.testing.assert_array_equal(patch.data, f.data)

    def test_single_pixel(self):
        f = ComplexField(random_complex(6, 6, 4), 1.0)
        patch = extract_patch(f, (3.0, 2.0), (1, 1))
        assert patch.data[0, 0] == f.data[2, 3]

    def test_shift_by_one_pitch(self):
        # oracle: index arithmetic on the raw array
        f = ComplexField(random_complex(10, 10, 5), 0.5)
        a = extract_patch(f, (2.0, 2.0), (4, 4))
        b = extract_patch(f, (2.5, 2.0), (4, 4))
        np.testing.assert_array_equal(b.data[:, :-1], a.data[:, 1:])
        np.testing.assert_array_equal(a.data, f.data[2:6, 2:6])
        np.testing.assert_array_equal(b.data, f.data[2:6, 3:7])

    def test_out_of_bounds(self):
        f = ComplexField(random_complex(8, 8, 6), 1.0)
        with pytest.raises(ValueError, match="exceeds"):
            extract_patch(f, (0.0, 0.0), (4, 4))

    def test_embed_zero_is_noop(self):
        f = ComplexField(random_complex(8, 8, 7), 1.0)
        before = f.data.copy()
        embed_add_patch(f, (4.0, 4.0), ComplexField(np.zeros((4, 4), complex), 1.0))
        np.testing.assert_array_equal(f.data, before)

    def test_extract_negate_embed_cancels(self):
        f = ComplexField(random_complex(8, 8, 8), 1.0)
        patch = extract_patch(f, (3.0, 4.0), (3, 3))
        embed_add_patch(f, (3.0, 4.0), ComplexField(-patch.data, 1.0))
        rs = slice(4 - 1, 4 + 2)
        cs = slice(3 - 1, 3 + 2)
        assert np.abs(f.data[rs, cs]).max() == 0.0

    def test_overlapping_embeds_sum(self):
        # oracle: direct summation into an explicit expectation array
        f = ComplexField(np.zeros((8, 8), complex), 1.0)
        p = ComplexField(np.ones((4, 4), complex), 1.0)
        embed_add_patch(f, (3.0, 3.0), p)
        embed_add_patch(f, (4.0, 4.0), p)
        expect = np.zeros((8, 8), complex)
        expect[1:5, 1:5] += 1
        expect[2:6, 2:6] += 1
        np.testing.assert_array_equal(f.data, expect)

    def test_extract_embed_adjoint(self):
        # <extract(f), g> == <f, embed(g)> for the real-part inner product
        f = ComplexField(random_complex(12, 12, 10), 1.0)
        g = ComplexField(random_complex(5, 5, 11), 1.0)
        center = (6.0, 5.0)
        ex = extract_patch(f, center, (5, 5))
        lhs = float(np.real(np.vdot(ex.data, g.data)))
        fz = ComplexField(np.zeros((12, 12), complex), 1.0)
        embed_add_patch(fz, center, g)
        rhs = float(np.real(np.vdot(f.data, fz.data)))
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)
