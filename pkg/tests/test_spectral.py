import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boreg import spectral as sp
from boreg.spectral import ContractViolation, Grid, RealField, SpectralField

from conftest import trig_field


def mode(grid: Grid, j: int, phase: float = 0.0) -> RealField:
    k = 2 * np.pi * j / grid.length
    return RealField(grid, np.cos(k * (grid.x - grid.x_left) + phase))


class TestGrid:
    @pytest.mark.parametrize("n", [0, 6, 100, 4])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ContractViolation):
            Grid(n, 1.0)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ContractViolation):
            Grid(16, 0.0)

    def test_wavenumbers_fft_order(self):
        g = Grid(8, 2 * np.pi)
        assert list(g.wavenumbers) == [0, 1, 2, 3, -4, -3, -2, -1]
        assert g.nyquist_index == 4

    def test_centered(self):
        g = Grid.centered(64, 10.0)
        assert g.x_left == -5.0 and g.x_right == 5.0
        assert g.x[0] == -5.0 and np.isclose(g.x[-1], 5.0 - g.spacing)

    def test_refined(self):
        g = Grid.centered(64, 10.0).refined()
        assert g.n == 128 and g.length == 10.0 and g.x_left == -5.0


class TestFields:
    def test_nonfinite_rejected(self, grid):
        bad = np.zeros(grid.n)
        bad[3] = np.nan
        with pytest.raises(ContractViolation):
            RealField(grid, bad)

    def test_wrong_length_rejected(self, grid):
        with pytest.raises(ContractViolation):
            RealField(grid, np.zeros(grid.n + 1))

    def test_hermitian_defect_of_real_transform(self, grid, rng):
        F = sp.forward(trig_field(grid, rng))
        assert F.hermitian_defect() < 1e-15

    def test_zero_field_has_zero_coefficients(self, grid):
        F = sp.forward(RealField(grid, np.zeros(grid.n)))
        assert not np.any(F.coeffs)

    def test_single_mode_has_two_coefficients(self, grid):
        F = sp.forward(mode(grid, 1))
        nz = np.flatnonzero(np.abs(F.coeffs) > 1e-14)
        assert list(grid.mode_index[nz]) == [1, -1]
        assert np.allclose(F.coeffs[nz], 0.5)

    def test_size_mismatch(self, grid):
        with pytest.raises(ContractViolation):
            SpectralField(grid, np.zeros(grid.n - 1))


class TestMultipliers:
    def test_hilbert_of_cosine_is_sine(self, grid):
        # H cos(kx) = sin(kx) for k > 0
        k = 2 * np.pi * 3 / grid.length
        x = grid.x - grid.x_left
        Hf = sp.hilbert_transform(RealField(grid, np.cos(k * x)))
        assert np.max(np.abs(Hf.samples - np.sin(k * x))) < 1e-13

    def test_hilbert_kills_mean(self, grid):
        assert np.max(np.abs(sp.hilbert_transform(RealField(grid, np.full(grid.n, 3.0))).samples)) == 0

    def test_odd_operators_zero_nyquist(self):
        g = Grid(16, 2 * np.pi)
        nyq = RealField(g, (-1.0) ** np.arange(16))
        assert np.max(np.abs(sp.hilbert_transform(nyq).samples)) < 1e-15
        assert np.max(np.abs(sp.spatial_derivative(nyq, 1).samples)) < 1e-15
        # even order keeps it: d^2 gives -k^2 = -64
        assert np.allclose(sp.spatial_derivative(nyq, 2).samples, -64 * nyq.samples)

    def test_fractional_derivative_of_mode(self, grid):
        j = 5
        k = 2 * np.pi * j / grid.length
        f = mode(grid, j, 0.3)
        assert np.allclose(sp.fractional_derivative(f, 0.5).samples, np.sqrt(k) * f.samples, atol=1e-13)

    def test_zero_order_is_mean_free_projection(self, grid, rng):
        f = trig_field(grid, rng)
        assert np.allclose(sp.fractional_derivative(f, 0.0).samples, f.samples - f.mean(), atol=1e-13)

    def test_negative_order_rejected(self, grid, rng):
        with pytest.raises(ContractViolation):
            sp.fractional_derivative(trig_field(grid, rng), -0.5)
        with pytest.raises(ContractViolation):
            sp.spatial_derivative(trig_field(grid, rng), -1)

    def test_derivative_of_sine(self, grid):
        k = 2 * np.pi * 2 / grid.length
        x = grid.x - grid.x_left
        d3 = sp.spatial_derivative(RealField(grid, np.sin(k * x)), 3)
        assert np.max(np.abs(d3.samples + k**3 * np.cos(k * x))) < 1e-10

    def test_dealias_count_and_idempotence(self, rng):
        g = Grid(64, 1.0)
        F = sp.forward(RealField(g, rng.normal(size=64)))
        D = sp.dealias(F)
        assert np.count_nonzero(D.coeffs) == 2 * (64 // 3) + 1
        assert np.array_equal(sp.dealias(D).coeffs, D.coeffs)

    def test_dealias_keeps_band_limited(self, grid):
        F = sp.forward(mode(grid, 7))
        assert np.allclose(sp.dealias(F).coeffs, F.coeffs, rtol=0, atol=1e-15)

    def test_second_derivative_matches_finite_difference(self):
        # centred differences converge at O(h^2) toward the spectral value
        errs = []
        for n in (128, 256):
            g = Grid.centered(n, 20.0)
            u = np.exp(-g.x**2)
            fd = (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / g.spacing**2
            errs.append(np.max(np.abs(sp.spatial_derivative(RealField(g, u), 2).samples - fd)))
        assert 3.5 < errs[0] / errs[1] < 4.5

    def test_hilbert_commutes_with_derivative(self, grid, rng):
        f = trig_field(grid, rng)
        a = sp.hilbert_transform(sp.spatial_derivative(f, 1)).samples
        b = sp.spatial_derivative(sp.hilbert_transform(f), 1).samples
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))

    def test_first_power_is_modulus(self, grid):
        k = 2 * np.pi * 2 / grid.length
        f = mode(grid, 2)
        assert np.allclose(sp.fractional_derivative(f, 1.0).samples, k * f.samples, atol=1e-13)


class TestNorms:
    def test_mode_norms_closed_form(self, grid):
        f = mode(grid, 4)
        L = grid.length
        assert np.isclose(sp.lp_norm(f, 2) ** 2, L / 2, rtol=1e-13)
        assert np.isclose(sp.lp_norm(f, 4) ** 4, 3 * L / 8, rtol=1e-13)
        assert np.isclose(sp.lp_norm(f, np.inf), 1.0)
        assert np.isclose(sp.lp_norm(f, 1), 2 * L / np.pi, rtol=1e-3)

    def test_unsupported_p(self, grid, rng):
        with pytest.raises(ContractViolation):
            sp.lp_norm(trig_field(grid, rng), 3)

    def test_sobolev_of_mode(self, grid):
        j = 3
        k = 2 * np.pi * j / grid.length
        f = mode(grid, j)
        assert np.isclose(sp.sobolev_norm(f, 1.5) ** 2, (1 + k**2) ** 1.5 * grid.length / 2, rtol=1e-13)

    def test_parseval(self, grid, rng):
        f = trig_field(grid, rng)
        c = np.fft.fft(f.samples) / grid.n
        assert np.isclose(sp.parseval_l2_squared(grid, c), grid.spacing * np.sum(f.samples**2), rtol=1e-13)

    def test_oversample_preserves_band_limited_field(self, grid, rng):
        f = trig_field(grid, rng)
        fine = sp.oversample(f, 4)
        assert fine.grid.n == 4 * grid.n
        assert np.allclose(fine.samples[::4], f.samples, atol=1e-13)
        assert sp.lp_norm(fine, np.inf) >= sp.lp_norm(f, np.inf) - 1e-15

    def test_tail_fraction_small_for_gaussian(self):
        g = Grid.centered(256, 40.0)
        f = RealField(g, np.exp(-g.x**2))
        assert sp.spectral_tail_fraction(f) < 1e-12


@st.composite
def coefficient_sets(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed)


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(coefficient_sets())
    def test_roundtrip_and_skew(self, rng):
        g = Grid.centered(64, 7.0)
        f, h = trig_field(g, rng), trig_field(g, rng)
        assert np.max(np.abs(sp.inverse(sp.forward(f)).samples - f.samples)) < 1e-13
        lhs = sp.inner(sp.hilbert_transform(f), h)
        rhs = -sp.inner(f, sp.hilbert_transform(h))
        assert abs(lhs - rhs) <= 1e-12 * sp.lp_norm(f) * sp.lp_norm(h)

    @settings(max_examples=25, deadline=None)
    @given(coefficient_sets(), st.floats(0.1, 2.0), st.floats(0.1, 2.0))
    def test_fractional_semigroup(self, rng, s, t):
        g = Grid.centered(64, 5.0)
        f = trig_field(g, rng, max_mode=10)
        lhs = sp.fractional_derivative(sp.fractional_derivative(f, s), t)
        rhs = sp.fractional_derivative(f, s + t)
        assert np.max(np.abs(lhs.samples - rhs.samples)) <= 1e-11 * max(1.0, np.max(np.abs(rhs.samples)))
