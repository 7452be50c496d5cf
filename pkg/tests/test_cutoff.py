import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from boreg.cutoff import (
    CutoffFamily,
    CutoffParams,
    mollifier_rho,
    ramp_nu,
    rho_mass,
    rho_moment,
    verify_family,
)
from boreg.spectral import ContractViolation, Grid

PAIRS = [(0.1, 0.5), (0.2, 1.0), (0.05, 0.25), (0.1, 2.0)]


def probe_for(eps, b):
    n = 4096
    while 4 * b / n > eps / 20:
        n *= 2
    return Grid(n, 4 * b, -b)


class TestMollifier:
    def test_support_and_evenness(self):
        x = np.linspace(0, 1.5, 151)
        r = mollifier_rho(x)
        assert np.all(r[x >= 1] == 0)
        assert mollifier_rho(1.0) == 0 and mollifier_rho(-1.0) == 0
        assert np.array_equal(r, mollifier_rho(-x))

    def test_unit_mass(self):
        mass, _ = integrate.quad(mollifier_rho, -1, 1, epsabs=1e-14, epsrel=1e-13)
        assert abs(mass - 1) < 1e-12

    def test_partial_mass_and_moment_against_quad(self):
        for z in (-0.9, -0.3, 0.0, 0.4, 0.95):
            m, _ = integrate.quad(mollifier_rho, -1, z, epsabs=1e-15)
            s, _ = integrate.quad(lambda u: u * mollifier_rho(u), -1, z, epsabs=1e-15)
            assert abs(rho_mass(z) - m) < 1e-13
            assert abs(rho_moment(z) - s) < 1e-13


class TestRamp:
    @pytest.mark.parametrize("eps,b", PAIRS)
    def test_endpoints_and_midpoint(self, eps, b):
        p = CutoffParams(eps, b)
        assert ramp_nu(2 * eps, p) == 0
        assert np.isclose(ramp_nu(b - eps, p), 1.0)
        assert np.isclose(ramp_nu((2 * eps + b - eps) / 2, p), 0.5)

    def test_slope(self):
        p = CutoffParams(0.1, 0.5)
        x = np.array([0.25, 0.3])
        assert np.isclose(np.diff(ramp_nu(x, p))[0] / 0.05, 1 / (0.5 - 0.3))


class TestParams:
    def test_b_below_five_eps_rejected(self):
        with pytest.raises(ContractViolation, match="5"):
            CutoffParams(0.2, 0.9)

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ContractViolation):
            CutoffParams(0.0, 1.0)

    def test_boundary_value_accepted(self):
        CutoffParams(0.05, 0.25)


class TestFamily:
    @pytest.mark.parametrize("eps,b", PAIRS)
    def test_point_values(self, eps, b):
        fam = CutoffFamily(CutoffParams(eps, b))
        assert fam.chi(0.9 * eps) == 0
        assert fam.chi(b + 0.1) == 1

    @pytest.mark.parametrize("eps,b", PAIRS)
    def test_constant_slope_on_ramp(self, eps, b):
        fam = CutoffFamily(CutoffParams(eps, b))
        x = np.linspace(3 * eps, b - 2 * eps, 7)
        assert np.max(np.abs(fam.chi_prime(x) - 1 / (b - 3 * eps))) <= 1e-12

    @pytest.mark.parametrize("x", [0.1, 0.15, 0.22, 0.3, 0.38, 0.45, 0.49, 0.6])
    def test_closed_form_matches_adaptive_quadrature(self, x):
        fam = CutoffFamily(CutoffParams(0.1, 0.5))
        ref = fam.evaluate_adaptive(x)
        assert abs(fam.chi(x) - ref["chi"]) < 1e-10
        assert abs(fam.chi_prime(x) - ref["chi_prime"]) < 1e-10

    def test_derivatives_match_finite_differences(self):
        fam = CutoffFamily(CutoffParams(0.2, 1.0))
        x = np.linspace(0.15, 1.05, 37)
        h = 1e-5
        d1 = (fam.chi(x + h) - fam.chi(x - h)) / (2 * h)
        d2 = (fam.chi_prime(x + h) - fam.chi_prime(x - h)) / (2 * h)
        ep = (fam.eta(x + h) - fam.eta(x - h)) / (2 * h)
        assert np.max(np.abs(d1 - fam.chi_prime(x))) < 1e-8
        assert np.max(np.abs(d2 - fam.chi_second(x))) < 1e-6
        inside = fam.eta(x) > 1e-3
        assert np.max(np.abs(ep[inside] - fam.eta_prime(x)[inside])) < 1e-5

    def test_eta_squared(self):
        fam = CutoffFamily(CutoffParams(0.1, 0.5))
        x = np.linspace(-0.2, 0.8, 2001)
        assert np.max(np.abs(fam.eta(x) ** 2 - fam.chi_prime(x))) < 1e-10

    def test_moving_window_translation(self):
        p = CutoffParams(0.5, 2.5, x0=1.0, v=2.0)
        x = np.linspace(-5, 5, 201)
        t = 0.3
        moved = CutoffFamily(p).chi(x, t)
        base = CutoffFamily(CutoffParams(0.5, 2.5)).chi(x - 1.0 + 2.0 * t)
        assert np.max(np.abs(moved - base)) <= 1e-12

    def test_sample_on_grid(self):
        g = Grid.centered(256, 10.0)
        s = CutoffFamily(CutoffParams(0.5, 2.5)).sample(g)
        assert set(s) == {"chi", "chi_prime", "eta"}
        assert s["chi"].shape == (256,)


class TestVerify:
    @pytest.mark.parametrize("eps,b", PAIRS)
    def test_all_properties_pass(self, eps, b):
        rep = verify_family(CutoffParams(eps, b), probe_for(eps, b))
        failed = [k for k, v in rep["checks"].items() if not v["passed"]]
        assert rep["all_passed"], failed

    def test_lower_value_bound_reported(self):
        rep = verify_family(CutoffParams(0.1, 0.5), probe_for(0.1, 0.5))
        c = rep["checks"]["value_lower_bound"]
        assert c["chi_at_3eps"] >= c["bound"]

    def test_unit_on_support_relation(self):
        rep = verify_family(CutoffParams(0.2, 1.0), probe_for(0.2, 1.0))
        assert rep["checks"]["nesting_unit_on_support"]["max_violation"] <= 1e-10

    def test_under_resolved_probe_rejected(self):
        with pytest.raises(ContractViolation):
            verify_family(CutoffParams(0.1, 0.5), Grid(256, 2.0, -0.5))


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 1.0), st.floats(5.0, 20.0))
    def test_monotone_and_bounded(self, eps, ratio):
        fam = CutoffFamily(CutoffParams(eps, ratio * eps))
        x = np.linspace(-eps, (ratio + 1) * eps, 801)
        chi = fam.chi(x)
        assert np.all(np.diff(chi) >= -1e-14)
        assert chi.min() >= 0 and chi.max() <= 1
        assert np.max(fam.chi_prime(x)) <= 1 / ((ratio - 3) * eps) + 1e-12
