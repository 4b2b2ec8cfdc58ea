"""Unit conversion checks.

Expected values were frozen from direct arithmetic with the CODATA
constants (h = 6.62607015e-34 J s, c = 299792458 m/s) so the library
results are compared against an independent calculation, not against
themselves.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from qlink import units


class TestPowerConversions:
    def test_dbm_to_watts_round_trip(self):
        rng = np.random.default_rng(7)
        for dbm in rng.uniform(-130.0, 10.0, size=200):
            assert units.watts_to_dbm(units.dbm_to_watts(dbm)) == pytest.approx(dbm, abs=1e-9)

    def test_reference_points(self):
        assert units.dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)
        assert units.dbm_to_watts(-30.0) == pytest.approx(1e-6, rel=1e-12)
        assert units.watts_to_dbm(1e-3) == pytest.approx(0.0, abs=1e-12)

    def test_watts_to_dbm_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            units.watts_to_dbm(0.0)
        with pytest.raises(ValueError):
            units.watts_to_dbm(-1e-6)


class TestPhotonFlux:
    def test_flux_at_minus_100_dbm(self):
        # 1e-13 W / (hc / 1555 nm) = 7.828e5 photons/s
        assert units.photon_flux(-100.0, 1555.0) == pytest.approx(782805.126, rel=1e-6)

    def test_flux_at_minus_130_dbm(self):
        assert units.photon_flux(-130.0, 1555.0) == pytest.approx(782.805126, rel=1e-6)

    def test_flux_scales_linearly_with_power(self):
        f1 = units.photon_flux(-90.0, 1555.0)
        f2 = units.photon_flux(-80.0, 1555.0)
        assert f2 / f1 == pytest.approx(10.0, rel=1e-12)

    def test_photon_energy(self):
        # hc/lambda at 532 nm
        expected = 6.62607015e-34 * 299792458.0 / 532e-9
        assert units.photon_energy_j(532.0) == pytest.approx(expected, rel=1e-12)


class TestBandwidth:
    def test_half_nm_at_1555(self):
        assert units.bandwidth_to_thz(0.5, 1555.0) == pytest.approx(0.06199118, rel=1e-6)

    def test_conversion_factor_near_quantum_channel(self):
        # c / lambda^2 expressed in THz per nm
        k = units.bandwidth_to_thz(1.0, 1555.0)
        assert k == pytest.approx(0.12398236, rel=1e-6)

    def test_linear_in_width(self):
        assert units.bandwidth_to_thz(1.0, 1555.0) == pytest.approx(
            2.0 * units.bandwidth_to_thz(0.5, 1555.0), rel=1e-12
        )

    def test_signal_bandwidth_from_idler(self):
        bw = units.signal_bandwidth_from_idler(0.5, 809.0, 1555.0)
        assert bw == pytest.approx(0.135333795, rel=1e-6)
        assert bw < 0.15


class TestBeamGeometry:
    def test_rayleigh_range_in_crystal(self):
        # n pi w0^2 / lambda with w0 = 75 um, n = 2.2, 532 nm
        z0 = units.rayleigh_range_mm(150.0, 532.0, 2.2)
        assert z0 == pytest.approx(73.0774607, rel=1e-6)
        # focus comfortably longer than a 50 mm crystal
        assert z0 / 50.0 == pytest.approx(1.4615, rel=1e-3)

    def test_rayleigh_range_free_space(self):
        assert units.rayleigh_range_mm(150.0, 532.0, 1.0) == pytest.approx(
            33.2170276, rel=1e-6
        )

    def test_dataclass_wrapper(self):
        beam = units.BeamGeometry(waist_diameter_um=150.0, wavelength_nm=532.0)
        assert beam.rayleigh_range_mm() == pytest.approx(73.0774607, rel=1e-6)

    def test_waist_from_divergence(self):
        assert units.waist_from_divergence_um(9.0, 809.0) == pytest.approx(
            114.45009, rel=1e-5
        )
        assert units.waist_from_divergence_um(15.0, 1555.0) == pytest.approx(
            131.99250, rel=1e-5
        )

    def test_waist_divergence_round_trip(self):
        # waist -> divergence -> waist is the identity for Gaussian beams
        lam = 809.0
        diam = units.waist_from_divergence_um(9.0, lam)
        theta_half = (lam * 1e-9) / (math.pi * diam * 1e-6 / 2.0)
        again = units.waist_from_divergence_um(2.0 * theta_half * 1e3, lam)
        assert again == pytest.approx(diam, rel=1e-12)


class TestDispersion:
    def test_spread_over_150_km(self):
        assert units.dispersion_spread_ps(18.0, 0.5, 150.0) == pytest.approx(1350.0)

    def test_spread_over_27_km(self):
        assert units.dispersion_spread_ps(18.0, 0.5, 27.0) == pytest.approx(243.0)

    def test_max_distance_for_gate(self):
        d = units.max_dispersion_distance_km(18.0, 0.5, 1.5)
        assert d == pytest.approx(1500.0 / 9.0, rel=1e-12)
        assert 150.0 <= d <= 170.0

    def test_max_distance_rejects_zero_product(self):
        with pytest.raises(ValueError):
            units.max_dispersion_distance_km(0.0, 0.5, 1.5)
        with pytest.raises(ValueError):
            units.max_dispersion_distance_km(18.0, 0.0, 1.5)

    def test_spread_and_reach_are_inverses(self):
        d = units.max_dispersion_distance_km(18.0, 0.5, 1.5)
        assert units.dispersion_spread_ps(18.0, 0.5, d) == pytest.approx(1500.0, rel=1e-12)


class TestEnergyConservation:
    def test_nominal_triple(self):
        r = units.energy_conservation_residual(532.0, 809.0, 1555.0)
        assert r == pytest.approx(2.7583575e-4, rel=1e-5)
        assert units.wavelengths_consistent(532.0, 809.0, 1555.0)

    def test_symmetry_under_swap(self):
        a = units.energy_conservation_residual(532.0, 809.0, 1555.0)
        b = units.energy_conservation_residual(532.0, 1555.0, 809.0)
        assert a == pytest.approx(b, rel=1e-12)

    def test_inconsistent_triple_fails(self):
        assert not units.wavelengths_consistent(532.0, 800.0, 1400.0)
