"""Spectral core: grid validation, transform normalization, multipliers,
free propagator, periodic convolution.

Oracles: a directly-coded DFT sum for the transform convention, the
closed-form Gaussian free evolution, and O(N^2) double sums for the
convolution.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nls4d import grid as gr


def random_field(g, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    return gr.field(g, v)


class TestMakeGrid:
    def test_valid(self):
        g = gr.make_grid(4, 16, 8.0)
        assert g.h == 1.0
        assert g.shape == (16, 16, 16, 16)
        assert g.npoints == 16 ** 4

    @pytest.mark.parametrize("d", [0, 5, -1, 2.5])
    def test_bad_dimension(self, d):
        with pytest.raises(gr.GridError):
            gr.make_grid(d, 16, 1.0)

    @pytest.mark.parametrize("n", [3, 5, 12, 2, 512, 257])
    def test_bad_n(self, n):
        with pytest.raises(gr.GridError):
            gr.make_grid(2, n, 1.0)

    @pytest.mark.parametrize("L", [0.0, -1.0, np.nan, np.inf])
    def test_bad_L(self, L):
        with pytest.raises(gr.GridError):
            gr.make_grid(2, 16, L)

    def test_memory_guard(self):
        with pytest.raises(gr.GridError):
            gr.make_grid(4, 128, 1.0)  # 128**4 = 2**28 > 2**26

    def test_frequency_lattice(self):
        g = gr.make_grid(1, 8, np.pi)
        xi = np.sort(g.xi_axis())
        assert np.allclose(xi, np.arange(-4, 4) * (np.pi / g.L))


class TestTransform:
    def test_round_trip(self):
        g = gr.make_grid(3, 8, 2.0)
        f = random_field(g, 1)
        back = gr.field_from_spectrum(gr.spectrum(f))
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_parseval(self):
        g = gr.make_grid(2, 32, 5.0)
        f = random_field(g, 2)
        s = gr.spectrum(f)
        lhs = gr.lebesgue_norm(f, 2) ** 2
        rhs = np.sum(np.abs(s.coefficients) ** 2) * g.xi_cell ** g.d
        assert abs(lhs - rhs) < 1e-10 * lhs

    def test_against_direct_dft_sum(self):
        # Independent oracle: evaluate the defining sum
        # u_hat(xi) = (2 pi)^{-1/2} h sum_x e^{-i x xi} u(x) directly.
        g = gr.make_grid(1, 16, 3.0)
        f = random_field(g, 3)
        s = gr.spectrum(f)
        x = g.x_axis()
        for k, xi in enumerate(g.xi_axis()):
            direct = (2 * np.pi) ** -0.5 * g.h * np.sum(
                np.exp(-1j * x * xi) * f.values
            )
            assert abs(s.coefficients[k] - direct) < 1e-12

    def test_gaussian_spectrum_is_gaussian(self):
        # e^{-x^2/2} transforms to e^{-xi^2/2} under this normalization.
        g = gr.make_grid(1, 128, 16.0)
        x = g.x_axis()
        f = gr.field(g, np.exp(-x ** 2 / 2).astype(complex))
        s = gr.spectrum(f)
        xi = g.xi_axis()
        assert np.max(np.abs(s.coefficients - np.exp(-xi ** 2 / 2))) < 1e-12


class TestMultiplier:
    def test_identity(self):
        g = gr.make_grid(2, 16, 1.0)
        f = random_field(g, 4)
        out = gr.apply_multiplier(f, lambda *xi: np.ones(1))
        assert np.max(np.abs(out.values - f.values)) < 1e-13

    def test_indicator_idempotent(self):
        g = gr.make_grid(2, 16, 2.0)
        f = random_field(g, 5)
        half = lambda x1, x2: (x1 ** 2 + x2 ** 2 < 30.0).astype(float)
        once = gr.apply_multiplier(f, half)
        twice = gr.apply_multiplier(once, half)
        assert np.max(np.abs(twice.values - once.values)) < 1e-12

    def test_multipliers_commute(self):
        g = gr.make_grid(3, 8, 1.5)
        f = random_field(g, 6)
        m1 = lambda *xi: np.exp(-sum(a ** 2 for a in xi))
        m2 = lambda *xi: 1.0 / (1.0 + sum(a ** 2 for a in xi))
        ab = gr.apply_multiplier(gr.apply_multiplier(f, m1), m2)
        ba = gr.apply_multiplier(gr.apply_multiplier(f, m2), m1)
        assert np.max(np.abs(ab.values - ba.values)) < 1e-12

    def test_nonfinite_symbol_rejected(self):
        g = gr.make_grid(1, 16, 1.0)
        f = random_field(g, 7)
        with np.errstate(divide="ignore"):
            with pytest.raises(gr.GridError, match="non-finite"):
                gr.apply_multiplier(f, lambda x: 1.0 / x)  # 1/0 at the zero mode


class TestFractionalDerivative:
    def test_single_mode_scaling(self):
        g = gr.make_grid(2, 32, np.pi)
        k = np.array([3.0, -2.0])  # lattice frequencies for L = pi
        x1, x2 = g.x_mesh()
        f = gr.field(g, np.exp(1j * (k[0] * x1 + k[1] * x2)))
        for s in (1.5, -1.0, 2.0):
            out = gr.fractional_derivative(f, s)
            expected = np.linalg.norm(k) ** s * f.values
            assert np.max(np.abs(out.values - expected)) < 1e-10

    def test_zero_order_is_identity(self):
        g = gr.make_grid(1, 32, 2.0)
        f = random_field(g, 8)
        out = gr.fractional_derivative(f, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_zero_mode_dropped_for_negative_order(self):
        g = gr.make_grid(1, 16, 1.0)
        f = gr.field(g, np.full(g.shape, 2.0 + 0j))  # pure zero mode
        out = gr.fractional_derivative(f, -1.0)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_order_floor(self):
        g = gr.make_grid(1, 16, 1.0)
        with pytest.raises(gr.GridError):
            gr.fractional_derivative(random_field(g, 9), -2.5)

    def test_composition(self):
        g = gr.make_grid(2, 16, 2.0)
        f = random_field(g, 10)
        one_shot = gr.fractional_derivative(f, 3.0)
        composed = gr.fractional_derivative(gr.fractional_derivative(f, 1.0), 2.0)
        assert np.max(np.abs(one_shot.values - composed.values)) < 1e-9 * np.max(
            np.abs(one_shot.values)
        )


class TestFreePropagate:
    def test_unitary(self):
        g = gr.make_grid(3, 16, 2.0)
        f = random_field(g, 11)
        out = gr.free_propagate(f, 0.37)
        assert abs(gr.lebesgue_norm(out, 2) - gr.lebesgue_norm(f, 2)) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(
        s=st.floats(-2.0, 2.0, allow_nan=False),
        t=st.floats(-2.0, 2.0, allow_nan=False),
    )
    def test_group_law(self, s, t):
        g = gr.make_grid(1, 32, 3.0)
        f = random_field(g, 12)
        two_step = gr.free_propagate(gr.free_propagate(f, s), t)
        one_step = gr.free_propagate(f, s + t)
        assert np.max(np.abs(two_step.values - one_step.values)) < 1e-11
        assert abs(two_step.t - one_step.t) < 1e-14

    def test_gaussian_closed_form(self):
        # e^{it Lap} e^{-|x|^2/2} = (1+2it)^{-d/2} e^{-|x|^2/(2(1+2it))}
        g = gr.make_grid(2, 64, 12.0)
        xs = g.x_mesh()
        r2 = sum(a ** 2 for a in xs)
        f = gr.field(g, np.exp(-r2 / 2).astype(complex))
        t = 0.5
        out = gr.free_propagate(f, t)
        z = 1.0 + 2j * t
        exact = z ** (-g.d / 2.0) * np.exp(-r2 / (2.0 * z))
        assert np.max(np.abs(out.values - exact)) < 1e-8

    def test_single_mode_phase(self):
        g = gr.make_grid(1, 16, np.pi)
        x, = g.x_mesh()
        f = gr.field(g, np.exp(2j * x))
        out = gr.free_propagate(f, 0.3)
        assert np.max(np.abs(out.values - np.exp(-0.3j * 4.0) * f.values)) < 1e-12

    def test_timestamp_advances(self):
        g = gr.make_grid(1, 16, 1.0)
        f = gr.field(g, np.ones(g.shape, complex), t=1.5)
        assert gr.free_propagate(f, 0.25).t == 1.75


def conv_direct(g, rho, kernel):
    """O(N^2) periodic convolution, the independent oracle."""
    out = np.zeros(g.shape, dtype=np.result_type(rho, kernel, float))
    for i in np.ndindex(g.shape):
        acc = 0.0
        for j in np.ndindex(g.shape):
            k = tuple((a - b) % g.n for a, b in zip(i, j))
            acc += kernel[k] * rho[j]
        out[i] = acc * g.cell_volume
    return out


class TestConvolution:
    @pytest.mark.parametrize("d,n", [(1, 16), (2, 8), (3, 4)])
    def test_against_direct_sum(self, d, n):
        g = gr.make_grid(d, n, 1.7)
        rng = np.random.default_rng(d * 100 + n)
        rho = rng.standard_normal(g.shape)
        kernel = rng.standard_normal(g.shape)
        fast = gr.convolve_periodic(g, rho, kernel)
        slow = conv_direct(g, rho, kernel)
        scale = np.max(np.abs(slow))
        assert np.max(np.abs(fast - slow)) < 1e-10 * scale

    def test_delta_reproduces_kernel(self):
        g = gr.make_grid(2, 16, 4.0)
        rho = np.zeros(g.shape)
        origin = (g.n // 2,) * g.d  # x = 0 sits at index n/2
        rho[origin] = 1.0
        kernel = np.exp(-gr.displacement_radius(g) ** 2)
        out = gr.convolve_periodic(g, rho, kernel)
        # out(x) = h^d kernel(x - 0); compare via index shift
        rolled = np.roll(kernel, g.n // 2, axis=(0, 1))
        assert np.max(np.abs(out - g.cell_volume * rolled)) < 1e-12

    def test_symmetric_in_arguments(self):
        g = gr.make_grid(2, 8, 1.0)
        rng = np.random.default_rng(42)
        a = rng.standard_normal(g.shape)
        b = rng.standard_normal(g.shape)
        ab = gr.convolve_periodic(g, a, b)
        ba = gr.convolve_periodic(g, b, a)
        assert np.max(np.abs(ab - ba)) < 1e-12

    def test_real_output_for_real_input(self):
        g = gr.make_grid(1, 32, 1.0)
        out = gr.convolve_periodic(g, np.ones(g.shape), np.ones(g.shape))
        assert out.dtype.kind == "f"
        # constant rho, constant kernel: out = h^d * n * 1 = 2L
        assert np.allclose(out, 2 * g.L)


class TestNormsAndHelpers:
    def test_lp_norm_volume_element(self):
        g = gr.make_grid(2, 16, 2.0)
        f = gr.field(g, np.ones(g.shape, complex))
        # ||1||_p = (vol of box)^{1/p} = (4 L^2)^{1/p}
        for p in (1, 2, 4):
            assert abs(gr.lebesgue_norm(f, p) - (4 * g.L ** 2) ** (1 / p)) < 1e-12
        assert gr.lebesgue_norm(f, np.inf) == 1.0

    def test_boundary_shell(self):
        g = gr.make_grid(2, 8, 1.0)
        mask = gr.boundary_shell_mask(g)
        assert mask[0, 3] and mask[7, 3] and mask[3, 0]
        assert not mask[3, 3]
        assert mask.sum() == g.n ** 2 - (g.n - 2) ** 2

    def test_periodic_distance(self):
        g = gr.make_grid(1, 8, 2.0)
        d2 = gr.periodic_distance_sq(g, [1.5])
        x = g.x_axis()
        # point at x = -2 is distance 0.5 from 1.5 through the wrap
        assert abs(d2[0] - 0.25) < 1e-12

    def test_field_shape_mismatch(self):
        g = gr.make_grid(2, 8, 1.0)
        with pytest.raises(gr.GridError):
            gr.field(g, np.zeros((8, 4), complex))

    def test_field_immutable(self):
        g = gr.make_grid(1, 8, 1.0)
        f = gr.field(g, np.zeros(g.shape, complex))
        with pytest.raises(ValueError):
            f.values[0] = 1.0
