"""Axial field models, their moment integrals, and the multipole null."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oamlens import (
    CONSTANTS,
    AxialFieldModel,
    DomainError,
    axial_solenoid_phi_integral,
    field_integrals,
    multipole_phi_integral,
    vector_potential_phi,
)
from oamlens.fields import read_field_csv, write_field_csv


def make_tabulated(polarity=1):
    z = np.linspace(-1e-3, 1e-3, 201)
    b1 = 2.0 / (1.0 + (z / 1e-4) ** 2)
    b3 = 0.5 * b1 + 0.1
    return AxialFieldModel.tabulated(z, b1, b3, dispersion_length=1e-7,
                                     polarity=polarity)


class TestModelConstruction:
    def test_glaser_eval_center_and_half_width(self):
        lens = AxialFieldModel.glaser(peak_field=2.0, half_width=1e-5,
                                      dispersion_length=1e-7)
        assert lens.eval(0.0) == (2.0, 2.0)
        assert lens.eval(1e-5) == (1.0, 1.0)

    def test_glaser_even_in_z(self):
        lens = AxialFieldModel.glaser(peak_field=2.0, half_width=1e-5,
                                      dispersion_length=1e-7)
        z = np.linspace(0.0, 8e-5, 37)
        b1p, b3p = lens.eval(z)
        b1m, b3m = lens.eval(-z)
        assert np.array_equal(b1p, b1m) and np.array_equal(b3p, b3m)

    def test_wire_loop_center_values(self):
        b0 = 0.1
        loop = AxialFieldModel.wire_loop(loop_radius=1e-3, peak_field=b0)
        b1, b3 = loop.eval(0.0)
        assert b1 == pytest.approx(0.5 * b0, rel=1e-14)
        assert b3 == pytest.approx(10.5 * b0, rel=1e-14)

    def test_wire_loop_current_sets_field_scale(self):
        loop = AxialFieldModel.wire_loop(loop_radius=1e-3, loop_current=2.5)
        assert loop.peak_field == pytest.approx(CONSTANTS.mu0 * 2.5 / 1e-3,
                                                rel=1e-14)

    def test_wire_loop_pins_dispersion_length_to_radius(self):
        loop = AxialFieldModel.wire_loop(loop_radius=2e-3, peak_field=0.1)
        assert loop.dispersion_length == 2e-3

    def test_wire_loop_needs_exactly_one_excitation(self):
        with pytest.raises(DomainError):
            AxialFieldModel.wire_loop(loop_radius=1e-3)
        with pytest.raises(DomainError):
            AxialFieldModel.wire_loop(loop_radius=1e-3, loop_current=1.0,
                                      peak_field=0.1)

    def test_polarity_negates_both_profiles(self):
        plus = AxialFieldModel.glaser(2.0, 1e-5, 1e-7, polarity=1)
        minus = AxialFieldModel.glaser(2.0, 1e-5, 1e-7, polarity=-1)
        z = np.linspace(-3e-5, 3e-5, 11)
        for (bp, bm) in zip(plus.eval(z), minus.eval(z)):
            assert np.array_equal(bp, -bm)

    def test_flipped_is_an_involution(self):
        lens = AxialFieldModel.glaser(2.0, 1e-5, 1e-7)
        assert lens.flipped().polarity == -1
        assert lens.flipped().flipped() == lens

    def test_extent_per_kind(self):
        assert AxialFieldModel.glaser(2.0, 1e-5, 1e-7).extent == 1e-5
        assert AxialFieldModel.wire_loop(1e-3, peak_field=0.1).extent == 1e-3
        assert make_tabulated().extent == pytest.approx(1e-3)

    def test_tabulated_interpolates_between_nodes(self):
        model = make_tabulated()
        z = 0.5 * (model.table_z[3] + model.table_z[4])
        b1, _ = model.eval(z)
        assert b1 == pytest.approx(
            0.5 * (model.table_b1[3] + model.table_b1[4]), rel=1e-14)

    def test_tabulated_outside_grid_rejected(self):
        with pytest.raises(DomainError):
            make_tabulated().eval(2e-3)

    def test_tabulated_grid_must_increase(self):
        with pytest.raises(DomainError):
            AxialFieldModel.tabulated(np.array([0.0, 0.0, 1.0]),
                                      np.zeros(3), np.zeros(3), 1e-7)

    @pytest.mark.parametrize("bad", [0, 2, -2])
    def test_polarity_domain(self, bad):
        with pytest.raises(DomainError):
            AxialFieldModel.glaser(2.0, 1e-5, 1e-7, polarity=bad)

    def test_positive_scales_required(self):
        with pytest.raises(DomainError):
            AxialFieldModel.glaser(2.0, -1e-5, 1e-7)
        with pytest.raises(DomainError):
            AxialFieldModel.glaser(2.0, 1e-5, 0.0)
        with pytest.raises(DomainError):
            AxialFieldModel.wire_loop(-1e-3, peak_field=0.1)


class TestVectorPotential:
    def test_on_axis_vanishes(self, ref_lens):
        assert vector_potential_phi(ref_lens, 0.0, 0.0).a_phi == 0.0

    def test_center_plane_value(self, ref_lens):
        # B1 rho / 2 - B3 rho^3 / (8 b^2) at rho = 10 nm, where both
        # profiles sit at their 2 T peak and b = 100 nm.
        sample = vector_potential_phi(ref_lens, 1e-8, 0.0)
        assert sample.a_phi == pytest.approx(9.975e-9, rel=1e-14)
        assert sample.beyond_dispersion_length is False

    def test_matches_profile_combination(self, ref_lens):
        rho, z = 3e-8, 1.7e-5
        b1, b3 = ref_lens.eval(z)
        b = ref_lens.dispersion_length
        expected = 0.5 * b1 * rho - b3 * rho ** 3 / (8.0 * b * b)
        assert vector_potential_phi(ref_lens, rho, z).a_phi == \
            pytest.approx(expected, rel=1e-14)

    def test_beyond_dispersion_length_flagged(self, ref_lens):
        assert vector_potential_phi(ref_lens, 2e-7, 0.0).beyond_dispersion_length

    def test_negative_rho_rejected(self, ref_lens):
        with pytest.raises(DomainError):
            vector_potential_phi(ref_lens, -1e-9, 0.0)

    def test_odd_in_rho_as_formal_polynomial(self, ref_lens):
        # The model is the odd polynomial c1 rho + c3 rho^3; evaluating at
        # two radii recovers the coefficients, whose even partners are absent.
        r1, r2 = 1e-8, 2e-8
        a1 = vector_potential_phi(ref_lens, r1, 0.0).a_phi
        a2 = vector_potential_phi(ref_lens, r2, 0.0).a_phi
        c1 = (a1 * r2 ** 3 - a2 * r1 ** 3) / (r1 * r2 ** 3 - r2 * r1 ** 3)
        c3 = (a1 - c1 * r1) / r1 ** 3
        for r in (0.5e-8, 1.5e-8, 3e-8):
            assert vector_potential_phi(ref_lens, r, 0.0).a_phi == \
                pytest.approx(c1 * r + c3 * r ** 3, rel=1e-10)


def loop_potential_exact(radius, current, rho, z, n=4096):
    # Periodic trapezoid over the loop azimuth; spectrally accurate off
    # the wire. Independent of the package's field machinery.
    phi = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    dist = np.sqrt(radius ** 2 + rho ** 2 + z ** 2
                   - 2.0 * radius * rho * np.cos(phi))
    return (CONSTANTS.mu0 * current * radius / (4.0 * math.pi)
            * float(np.sum(np.cos(phi) / dist)) * (2.0 * math.pi / n))


class TestLoopAgainstBiotSavart:
    RADIUS = 1e-3
    B0 = 0.1

    def setup_method(self):
        self.current = self.B0 * self.RADIUS / CONSTANTS.mu0
        self.loop = AxialFieldModel.wire_loop(loop_radius=self.RADIUS,
                                              peak_field=self.B0)

    def mismatch(self, frac):
        rho = frac * self.RADIUS
        exact = loop_potential_exact(self.RADIUS, self.current, rho, 0.0)
        model = vector_potential_phi(self.loop, rho, 0.0).a_phi
        return abs(model - exact) / abs(exact)

    def test_tiny_radius_agreement(self):
        assert self.mismatch(1e-4) < 1e-6

    def test_mismatch_grows_quadratically(self):
        # The cubic profile is an ansatz, not the loop's Taylor term; the
        # residual against the exact loop scales as (rho/R)^2.
        m1 = self.mismatch(0.01)
        m2 = self.mismatch(0.02)
        assert 3e-4 < m1 < 8e-4
        assert m2 / m1 == pytest.approx(4.0, rel=0.2)


class TestFieldIntegrals:
    def test_glaser_closed_forms(self, ref_lens):
        ints = field_integrals(ref_lens)
        b0, a = 2.0, 1e-5
        assert ints.method == "analytic"
        assert ints.i_b1sq == pytest.approx(math.pi * b0 * b0 * a / 2, rel=1e-14)
        assert ints.i_b1b3 == pytest.approx(math.pi * b0 * b0 * a / 2, rel=1e-14)
        assert ints.i_b1 == pytest.approx(math.pi * b0 * a, rel=1e-14)
        assert ints.i_b3 == pytest.approx(math.pi * b0 * a, rel=1e-14)

    def test_glaser_quadrature_cross_check(self, ref_lens):
        ana = field_integrals(ref_lens, method="analytic")
        num = field_integrals(ref_lens, method="quadrature")
        assert num.method == "quadrature"
        for name in ("i_b1sq", "i_b3", "i_b1", "i_b1b3"):
            assert getattr(num, name) == pytest.approx(getattr(ana, name),
                                                       rel=1e-8)

    def test_wire_loop_moments(self):
        b0, r = 0.1, 1e-3
        loop = AxialFieldModel.wire_loop(loop_radius=r, peak_field=b0)
        ints = field_integrals(loop)
        assert ints.method == "analytic+quadrature"
        assert ints.i_b1 == pytest.approx(b0 * r, rel=1e-12)
        assert ints.i_b3 == pytest.approx(12.0 * b0 * r, rel=1e-12)
        # Quadratic moments by independent reduction to Wallis integrals:
        # int dz / l^6 = (3 pi / 8) / R^5 gives int B1^2 = 3 pi/32 B0^2 R;
        # the B1 B3 cross term reduces the same way to 765/512 pi B0^2 R.
        assert ints.i_b1sq == pytest.approx(3 * math.pi / 32 * b0 * b0 * r,
                                            rel=1e-9)
        assert ints.i_b1b3 == pytest.approx(765 / 512 * math.pi * b0 * b0 * r,
                                            rel=1e-9)

    def test_wire_loop_rejects_pure_analytic(self):
        loop = AxialFieldModel.wire_loop(loop_radius=1e-3, peak_field=0.1)
        with pytest.raises(DomainError):
            field_integrals(loop, method="analytic")

    def test_unknown_method_rejected(self, ref_lens):
        with pytest.raises(DomainError):
            field_integrals(ref_lens, method="simpson")

    def test_polarity_flip_negates_linear_moments_only(self):
        plus = make_tabulated(polarity=1)
        minus = make_tabulated(polarity=-1)
        ip, im = field_integrals(plus), field_integrals(minus)
        assert im.i_b1 == -ip.i_b1
        assert im.i_b3 == -ip.i_b3
        assert im.i_b1sq == ip.i_b1sq
        assert im.i_b1b3 == ip.i_b1b3

    @given(st.integers(min_value=0, max_value=1))
    def test_glaser_polarity_flip_property(self, flip):
        lens = AxialFieldModel.glaser(1.3, 2e-5, 1e-7,
                                      polarity=-1 if flip else 1)
        base = field_integrals(lens.flipped())
        ints = field_integrals(lens)
        assert ints.i_b1 == -base.i_b1
        assert ints.i_b1sq == base.i_b1sq

    def test_tabulated_against_segment_formulas(self):
        model = make_tabulated()
        ints = field_integrals(model)
        z, b1, b3 = model.table_z, model.table_b1, model.table_b3
        assert ints.i_b1 == pytest.approx(np.trapezoid(b1, z), rel=1e-12)
        assert ints.i_b3 == pytest.approx(np.trapezoid(b3, z), rel=1e-12)
        h = np.diff(z)
        sq = np.sum(h / 3.0 * (b1[:-1] ** 2 + b1[:-1] * b1[1:] + b1[1:] ** 2))
        assert ints.i_b1sq == pytest.approx(sq, rel=1e-12)
        cross = np.sum(h / 6.0 * (2 * b1[:-1] * b3[:-1] + b1[:-1] * b3[1:]
                                  + b1[1:] * b3[:-1] + 2 * b1[1:] * b3[1:]))
        assert ints.i_b1b3 == pytest.approx(cross, rel=1e-12)

    def test_tabulated_quadrature_request_returns_exact_forms(self):
        model = make_tabulated()
        a = field_integrals(model, method="quadrature")
        b = field_integrals(model, method="analytic")
        assert a == b


class TestMultipoleNull:
    def test_transverse_ring_cancels(self):
        # Coarser resolution than the acceptance sweep; the null comes from
        # the ring symmetry, not from the grid.
        out = multipole_phi_integral(4, 1e-9, 1e-3, rho=1e-5, phi=0.3,
                                     n_z=801, n_segments=64)
        assert out.solenoid_scale > 0.0
        assert abs(out.value) <= 1e-10 * out.solenoid_scale

    def test_two_pole_cancels_on_and_between_poles(self):
        for phi in (0.0, math.pi / 2):
            out = multipole_phi_integral(2, 1e-9, 1e-3, rho=1e-5, phi=phi,
                                         n_z=801, n_segments=64)
            assert abs(out.value) <= 1e-10 * out.solenoid_scale

    def test_axial_solenoid_control_is_nonzero(self):
        out = axial_solenoid_phi_integral(1e-9, 1e-3, rho=1e-5,
                                          n_z=801, n_segments=64)
        assert abs(out.value) > 0.1 * out.solenoid_scale

    @pytest.mark.parametrize("n", [3, 1, 0, -2])
    def test_odd_or_degenerate_pole_counts_rejected(self, n):
        with pytest.raises(DomainError):
            multipole_phi_integral(n, 1e-9, 1e-3, rho=1e-5, phi=0.0)

    def test_path_near_hardware_rejected(self):
        with pytest.raises(DomainError):
            multipole_phi_integral(4, 1e-9, 1e-3, rho=3e-3, phi=0.0)


class TestFieldCsv:
    def test_round_trip(self, tmp_path):
        model = make_tabulated()
        path = tmp_path / "field.csv"
        write_field_csv(path, model.table_z, model.table_b1, model.table_b3)
        header = path.read_text().splitlines()[0]
        assert header == "z,B1,B3"
        back = read_field_csv(path, dispersion_length=1e-7)
        assert np.array_equal(back.table_z, model.table_z)
        assert np.array_equal(back.table_b1, model.table_b1)
        assert np.array_equal(back.table_b3, model.table_b3)

    def test_round_trip_preserves_integrals_exactly(self, tmp_path):
        model = make_tabulated()
        path = tmp_path / "field.csv"
        write_field_csv(path, model.table_z, model.table_b1, model.table_b3)
        back = read_field_csv(path, dispersion_length=1e-7)
        assert field_integrals(back) == field_integrals(model)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("z,Br,Bz\n0.0,1.0,2.0\n1.0,0.5,0.1\n")
        with pytest.raises(DomainError):
            read_field_csv(path, dispersion_length=1e-7)
