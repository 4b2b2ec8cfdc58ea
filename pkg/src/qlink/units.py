"""Optical unit conversions and small beam/dispersion helpers.

All functions work on plain floats with the unit spelled out in the
argument name (``_nm``, ``_dbm``, ``_ps``...). Wavelengths are vacuum
wavelengths in nanometers unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Final

__all__ = [
    "H_PLANCK",
    "C_LIGHT",
    "BeamGeometry",
    "dbm_to_watts",
    "watts_to_dbm",
    "photon_energy_j",
    "photon_flux",
    "bandwidth_to_thz",
    "signal_bandwidth_from_idler",
    "rayleigh_range_mm",
    "waist_from_divergence_um",
    "dispersion_spread_ps",
    "max_dispersion_distance_km",
    "energy_conservation_residual",
    "wavelengths_consistent",
]

# CODATA 2018 exact values.
H_PLANCK: Final[float] = 6.62607015e-34  # J s
C_LIGHT: Final[float] = 299792458.0  # m / s


def dbm_to_watts(power_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** (power_dbm / 10.0) * 1e-3


def watts_to_dbm(power_w: float) -> float:
    """Convert watts to dBm. Raises ValueError for non-positive power."""
    if power_w <= 0.0:
        raise ValueError(f"power must be positive to express in dBm, got {power_w}")
    return 10.0 * math.log10(power_w / 1e-3)


def photon_energy_j(wavelength_nm: float) -> float:
    """Energy of one photon at the given vacuum wavelength, in joules."""
    if wavelength_nm <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return H_PLANCK * C_LIGHT / (wavelength_nm * 1e-9)


def photon_flux(power_dbm: float, wavelength_nm: float) -> float:
    """Photon rate (per second) carried by a power level at one wavelength."""
    return dbm_to_watts(power_dbm) / photon_energy_j(wavelength_nm)


def bandwidth_to_thz(delta_lambda_nm: float, center_nm: float) -> float:
    """Convert a spectral width in nm around ``center_nm`` to THz.

    Uses the first-order relation d(nu) = c * d(lambda) / lambda**2.
    """
    if center_nm <= 0.0:
        raise ValueError(f"center wavelength must be positive, got {center_nm}")
    return C_LIGHT * (delta_lambda_nm * 1e-9) / (center_nm * 1e-9) ** 2 / 1e12


def signal_bandwidth_from_idler(
    idler_fwhm_nm: float, signal_nm: float, idler_nm: float
) -> float:
    """Signal-side spectral width implied by the idler width.

    Energy conservation ties the two photons of a pair: equal frequency
    widths map to wavelength widths scaled by (lambda_s / lambda_i)**2.
    """
    if signal_nm <= 0.0 or idler_nm <= 0.0:
        raise ValueError("wavelengths must be positive")
    return idler_fwhm_nm * (signal_nm / idler_nm) ** 2


@dataclass(frozen=True)
class BeamGeometry:
    """Focused Gaussian beam described by its waist diameter.

    The waist is stored as a diameter (2 w0) because that is how beam
    sizes are usually quoted by meters and datasheets.
    """

    waist_diameter_um: float
    wavelength_nm: float
    refractive_index: float = 2.2  # bulk index of the nonlinear crystal

    def rayleigh_range_mm(self) -> float:
        return rayleigh_range_mm(
            self.waist_diameter_um, self.wavelength_nm, self.refractive_index
        )


def rayleigh_range_mm(
    waist_diameter_um: float, wavelength_nm: float, refractive_index: float = 2.2
) -> float:
    """In-medium Rayleigh range z0 = n pi w0^2 / lambda, in millimeters.

    ``waist_diameter_um`` is the full beam diameter (2 w0); the radius is
    taken inside. ``refractive_index`` defaults to the crystal bulk index
    so the result describes the focus inside the nonlinear medium; pass
    1.0 for free space.
    """
    if waist_diameter_um <= 0.0 or wavelength_nm <= 0.0:
        raise ValueError("waist and wavelength must be positive")
    if refractive_index < 1.0:
        raise ValueError(f"refractive index below 1: {refractive_index}")
    w0_m = waist_diameter_um * 1e-6 / 2.0
    z0_m = refractive_index * math.pi * w0_m**2 / (wavelength_nm * 1e-9)
    return z0_m * 1e3


def waist_from_divergence_um(full_divergence_mrad: float, wavelength_nm: float) -> float:
    """Diffraction-limited waist diameter (um) from a far-field divergence.

    ``full_divergence_mrad`` is the full opening angle; the Gaussian
    relation w0 = lambda / (pi * theta_half) is applied to its half.
    """
    if full_divergence_mrad <= 0.0:
        raise ValueError(f"divergence must be positive, got {full_divergence_mrad}")
    theta_half = full_divergence_mrad * 1e-3 / 2.0
    w0_m = (wavelength_nm * 1e-9) / (math.pi * theta_half)
    return 2.0 * w0_m * 1e6


def dispersion_spread_ps(
    cd_ps_nm_km: float, bandwidth_nm: float, length_km: float
) -> float:
    """Arrival-time spread from chromatic dispersion over a fiber span."""
    if length_km < 0.0:
        raise ValueError(f"length must be non-negative, got {length_km}")
    return abs(cd_ps_nm_km) * abs(bandwidth_nm) * length_km


def max_dispersion_distance_km(
    cd_ps_nm_km: float, bandwidth_nm: float, gate_ns: float
) -> float:
    """Longest span whose dispersion spread still fits inside the gate."""
    per_km = abs(cd_ps_nm_km) * abs(bandwidth_nm)
    if per_km == 0.0:
        raise ValueError("dispersion-bandwidth product is zero, distance is unbounded")
    if gate_ns <= 0.0:
        raise ValueError(f"gate width must be positive, got {gate_ns}")
    return gate_ns * 1e3 / per_km


def energy_conservation_residual(
    pump_nm: float, signal_nm: float, idler_nm: float
) -> float:
    """Relative mismatch of 1/lp = 1/ls + 1/li for a pair-production triple."""
    if min(pump_nm, signal_nm, idler_nm) <= 0.0:
        raise ValueError("wavelengths must be positive")
    inv_pump = 1.0 / pump_nm
    return abs(inv_pump - 1.0 / signal_nm - 1.0 / idler_nm) / inv_pump


def wavelengths_consistent(
    pump_nm: float, signal_nm: float, idler_nm: float, tol: float = 1e-3
) -> bool:
    """True when the three wavelengths satisfy energy conservation within tol."""
    return energy_conservation_residual(pump_nm, signal_nm, idler_nm) <= tol
