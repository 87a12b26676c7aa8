"""Beam kinematics, the audited line integral, and the small numeric helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oamlens import CONSTANTS, DomainError, NumericalError, integrate_line, make_beam
from oamlens.core import bracket_crossing, parabolic_minimum, solve_tridiagonal


class TestConstants:
    def test_pinned_si_values(self):
        assert CONSTANTS.e_charge == 1.602176634e-19
        assert CONSTANTS.m_e == 9.1093837015e-31
        assert CONSTANTS.hbar == 1.054571817e-34
        assert CONSTANTS.h == 6.62607015e-34
        assert CONSTANTS.mu0 == 1.25663706212e-6

    def test_as_dict_round_trip(self):
        d = CONSTANTS.as_dict()
        assert d["e_charge"] == CONSTANTS.e_charge
        assert set(d) == {"hbar", "e_charge", "m_e", "mu0", "h"}


class TestMakeBeam:
    def test_80kv_kinetic_energy_is_ev(self):
        beam = make_beam(80e3)
        assert beam.kinetic_energy == pytest.approx(1.2817413072e-14, rel=1e-12)

    def test_80kv_frozen_kinematics(self):
        # Regression anchors computed from the pinned constants by hand:
        # lambda = h / sqrt(2 m_e e V), k = 2 pi / lambda, v = hbar k / m_e.
        beam = make_beam(80e3)
        assert beam.wavelength == pytest.approx(4.3360705864684525e-12, rel=1e-12)
        assert beam.wavenumber == pytest.approx(1449050512873.91, rel=1e-12)
        assert beam.speed == pytest.approx(167753152.49602497, rel=1e-12)
        assert beam.wavenumber * beam.wavelength == pytest.approx(2 * math.pi, rel=1e-14)
        assert beam.relativistic is False

    def test_80kv_three_figure_anchor(self):
        beam = make_beam(80e3)
        assert beam.wavelength == pytest.approx(4.34e-12, rel=5e-3)

    def test_relativistic_momentum_shrinks_wavelength(self):
        beam = make_beam(80e3, relativistic=True)
        assert beam.wavelength == pytest.approx(4.175716077283421e-12, rel=1e-12)
        assert beam.wavelength < make_beam(80e3).wavelength
        assert beam.relativistic is True

    @pytest.mark.parametrize("bad", [0.0, -5.0, math.inf, math.nan])
    def test_unphysical_voltage_rejected(self, bad):
        with pytest.raises(DomainError):
            make_beam(bad)

    def test_deterministic(self):
        a = make_beam(80e3)
        b = make_beam(80e3)
        assert (a.wavelength, a.wavenumber, a.speed) == \
            (b.wavelength, b.wavenumber, b.speed)


class TestIntegrateLine:
    def test_lorentzian_full_line_is_pi(self):
        out = integrate_line(lambda z: 1.0 / (1.0 + z * z))
        assert out.value == pytest.approx(math.pi, abs=1e-8)
        # The tangent substitution makes this nearly exact in practice.
        assert out.value == pytest.approx(math.pi, abs=1e-12)
        assert out.substitution == "tangent"

    def test_squared_bell_profile(self):
        # B1(z) = B0 / (1 + z^2/a^2) integrates in square to pi B0^2 a / 2.
        b0, a = 2.0, 1e-3
        out = integrate_line(lambda z: (b0 / (1.0 + (z / a) ** 2)) ** 2)
        assert out.value == pytest.approx(math.pi * b0 * b0 * a / 2.0, rel=1e-9)
        assert out.value == pytest.approx(6.2832e-3, rel=1e-4)

    def test_odd_integrand_vanishes(self):
        out = integrate_line(lambda z: z * math.exp(-z * z))
        assert out.value == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(min_value=0.05, max_value=20.0))
    def test_even_integrand_equals_twice_half_line(self, width):
        f = lambda z: math.exp(-((z / width) ** 2))
        full = integrate_line(f).value
        half = integrate_line(f, 0.0, math.inf).value
        assert full == pytest.approx(2.0 * half, rel=1e-10)

    def test_finite_interval_no_substitution(self):
        out = integrate_line(lambda z: z * z, -1.0, 2.0)
        assert out.value == pytest.approx(3.0, rel=1e-13)
        assert out.substitution == "none"
        assert out.z_lower == -1.0 and out.z_upper == 2.0

    def test_semi_infinite_against_erfc(self):
        out = integrate_line(lambda z: math.exp(-z * z), 1.0, math.inf)
        assert out.value == pytest.approx(math.sqrt(math.pi) / 2 * math.erfc(1.0),
                                          rel=1e-12)

    def test_peak_far_from_origin_is_found(self):
        # A unit-width bump a million widths off axis; naive scaling misses it.
        out = integrate_line(lambda z: math.exp(-((z - 1e6) ** 2)))
        assert out.value == pytest.approx(math.sqrt(math.pi), rel=1e-9)

    def test_narrow_bump_on_wide_finite_interval(self):
        a = 1e-7
        out = integrate_line(lambda z: 1.0 / (1.0 + (z / a) ** 2), -1.0, 1.0)
        assert out.value == pytest.approx(math.pi * a, rel=1e-6)

    def test_negative_integrand(self):
        out = integrate_line(lambda z: -1.0 / (1.0 + z * z))
        assert out.value == pytest.approx(-math.pi, rel=1e-12)

    def test_reversed_limits_rejected(self):
        with pytest.raises(DomainError):
            integrate_line(lambda z: 1.0, 1.0, -1.0)

    @pytest.mark.parametrize("tol", [0.0, -1e-9])
    def test_nonpositive_tolerance_rejected(self, tol):
        with pytest.raises(DomainError):
            integrate_line(lambda z: 1.0, 0.0, 1.0, rel_tol=tol)

    def test_degenerate_interval_is_zero(self):
        out = integrate_line(lambda z: 7.0, 3.0, 3.0)
        assert out.value == 0.0
        assert out.function_evaluations == 0

    def test_unresolvable_oscillation_raises_with_estimate(self):
        f = lambda z: math.cos(1e6 * z * z) / (1.0 + z * z)
        with pytest.raises(NumericalError) as exc:
            integrate_line(f, max_subdivisions=20)
        assert exc.value.estimate is not None
        value, err = exc.value.estimate
        assert math.isfinite(value) and err > 0.0

    def test_metadata_fields(self):
        out = integrate_line(lambda z: math.exp(-z * z))
        assert out.truncation_threshold == 1e-14
        assert out.function_evaluations > 0
        assert out.error_estimate >= 0.0
        # Support probes should bracket the Gaussian's meaningful range.
        assert out.z_lower < -4.0 and out.z_upper > 4.0

    def test_identically_zero_integrand(self):
        out = integrate_line(lambda z: 0.0)
        assert out.value == 0.0


class TestSolveTridiagonal:
    def test_complex_system_matches_dense_solve(self):
        rng = np.random.default_rng(7)
        n = 40
        lower = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
        upper = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
        diag = rng.normal(size=n) + 1j * rng.normal(size=n) + 6.0
        rhs = rng.normal(size=n) + 1j * rng.normal(size=n)
        a = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
        x = solve_tridiagonal(lower, diag, upper, rhs)
        assert np.allclose(a @ x, rhs, rtol=1e-12, atol=1e-12)


class TestBracketCrossing:
    def test_linear_interpolation(self):
        z = [0.0, 1.0, 2.0]
        y = [1.0, -1.0, -3.0]
        assert bracket_crossing(z, y) == pytest.approx(0.5)

    def test_exact_node_zero(self):
        assert bracket_crossing([0.0, 1.0, 2.0], [2.0, 0.0, -1.0]) == 1.0

    def test_no_crossing_returns_none(self):
        assert bracket_crossing([0.0, 1.0], [1.0, 2.0]) is None

    def test_terminal_zero(self):
        assert bracket_crossing([0.0, 1.0], [1.0, 0.0]) == 1.0


class TestParabolicMinimum:
    def test_recovers_vertex(self):
        zc = 0.37
        f = lambda z: 3.0 * (z - zc) ** 2 + 1.0
        z = [0.0, 0.3, 0.8]
        assert parabolic_minimum(z, [f(v) for v in z]) == pytest.approx(zc, rel=1e-12)

    def test_collinear_falls_back_to_middle(self):
        assert parabolic_minimum([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]) == 1.0
