"""Two-crystal down-conversion source model.

Covers the photon-pair polarization state produced by two crossed
crystals, the temporal-overlap (interference) factor set by group-delay
compensation, the pump-phase dependence on crystal temperature, and the
in-fiber pair flux implied by a normalized source brightness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Final

import numpy as np

from .units import bandwidth_to_thz

__all__ = [
    "TRIANGULAR_TAU_EFF_PS",
    "GAUSSIAN_TAU_EFF_PS",
    "DEFAULT_PHASE_TEMP_SLOPE",
    "SIGNAL_STATE_ANGLES",
    "PairState",
    "TwoCrystalSource",
    "CompensatorStack",
    "net_group_delay",
    "interference_factor",
    "phase_at",
    "pair_flux_in_fiber",
    "crystal_length_scaling",
    "coincidence_probability",
    "signal_marginal_probability",
    "idler_marginal_probability",
]

# Overlap widths calibrated so that an 11 ps group-delay mismatch leaves
# a 0.25 interference factor (75% contrast loss) under either model.
TRIANGULAR_TAU_EFF_PS: Final[float] = 44.0 / 3.0
GAUSSIAN_TAU_EFF_PS: Final[float] = 11.0 * math.sqrt(2.0)

# A 0.1 C pump-crystal temperature change walks the pair phase by pi.
DEFAULT_PHASE_TEMP_SLOPE: Final[float] = 10.0 * math.pi  # rad per degree C

# Analyzer angles that transmit each of the four reference polarizations.
SIGNAL_STATE_ANGLES: Final[dict[str, float]] = {
    "H": 0.0,
    "V": 90.0,
    "D": 45.0,
    "A": 135.0,
}


@dataclass(frozen=True)
class PairState:
    """Polarization state of an emitted photon pair.

    The coherent part is (sqrt(w_v)|VV> + e^{i phase} sqrt(w_h)|HH>),
    mixed with weight ``interference_mu`` against the incoherent HH/VV
    mixture of the same weights. ``weight_h``/``weight_v`` carry the
    per-crystal emission balance; pumping a single crystal is the
    degenerate case (1, 0) or (0, 1).
    """

    phase_rad: float = 0.0
    interference_mu: float = 1.0
    weight_h: float = 0.5
    weight_v: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.interference_mu <= 1.0:
            raise ValueError(f"interference factor outside [0, 1]: {self.interference_mu}")
        if self.weight_h < 0.0 or self.weight_v < 0.0:
            raise ValueError("crystal weights must be non-negative")
        if abs(self.weight_h + self.weight_v - 1.0) > 1e-9:
            raise ValueError(
                f"crystal weights must sum to 1, got {self.weight_h + self.weight_v}"
            )

    def density_matrix(self) -> np.ndarray:
        """4x4 density matrix in the (HH, HV, VH, VV) product basis."""
        wh, wv = self.weight_h, self.weight_v
        mu, phi = self.interference_mu, self.phase_rad
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = wh
        rho[3, 3] = wv
        coherence = mu * math.sqrt(wh * wv) * np.exp(1j * phi)
        rho[0, 3] = coherence
        rho[3, 0] = np.conj(coherence)
        return rho


@dataclass(frozen=True)
class TwoCrystalSource:
    """Operating point of the two-crystal pair source."""

    brightness_pairs_per_s_thz_mw: float
    pump_power_mw_per_crystal: float
    crystals_pumped: int = 2
    crystal_length_mm: float = 50.0
    pump_wavelength_nm: float = 532.0
    signal_wavelength_nm: float = 809.0
    idler_wavelength_nm: float = 1555.0
    idler_bandwidth_fwhm_nm: float = 0.5
    idler_coherence_time_ps: float = 16.0
    base_phase_rad: float = 0.0
    phase_temp_slope_rad_per_c: float = DEFAULT_PHASE_TEMP_SLOPE
    temperature_offset_c: float = 0.0
    # Uncorrelated light in the idler band that leaves the source fiber
    # along with the pairs (broadband down-conversion, fluorescence).
    background_flux_per_s: float = 0.0

    def __post_init__(self) -> None:
        if self.brightness_pairs_per_s_thz_mw < 0.0:
            raise ValueError("brightness must be non-negative")
        if self.pump_power_mw_per_crystal < 0.0:
            raise ValueError("pump power must be non-negative")
        if self.crystals_pumped not in (1, 2):
            raise ValueError(f"crystals_pumped must be 1 or 2, got {self.crystals_pumped}")
        if self.crystal_length_mm <= 0.0:
            raise ValueError("crystal length must be positive")
        if self.idler_bandwidth_fwhm_nm <= 0.0:
            raise ValueError("idler bandwidth must be positive")
        if self.background_flux_per_s < 0.0:
            raise ValueError("background flux must be non-negative")

    def pair_weights(self) -> tuple[float, float]:
        """(weight_h, weight_v) for the emitted state.

        Both crystals contribute equally when both are pumped. The
        second crystal produces the vertical pairs, so single-crystal
        operation is all |VV>.
        """
        if self.crystals_pumped == 2:
            return 0.5, 0.5
        return 0.0, 1.0


@dataclass(frozen=True)
class CompensatorStack:
    """Ordered group-delay contributions along the pair paths, in ps.

    Positive entries delay the idler against the signal; compensators
    carry the opposite sign. The stack for the assembled source is
    (intrinsic two-crystal mismatch, calcite block, polarization
    maintaining fiber).
    """

    delays_ps: tuple[float, ...] = ()
    overlap_model: str = "triangular"
    tau_eff_ps: float | None = None

    def __post_init__(self) -> None:
        if self.overlap_model not in ("triangular", "gaussian"):
            raise ValueError(f"unknown overlap model: {self.overlap_model!r}")
        if self.tau_eff_ps is not None and self.tau_eff_ps <= 0.0:
            raise ValueError("tau_eff must be positive when given")


def net_group_delay(stack: CompensatorStack | tuple[float, ...] | list[float]) -> float:
    """Net signal/idler group-delay mismatch of a compensator stack, ps."""
    delays = stack.delays_ps if isinstance(stack, CompensatorStack) else tuple(stack)
    return float(sum(delays))


def interference_factor(
    delta_tau_ps: float,
    model: str = "triangular",
    tau_eff_ps: float | None = None,
) -> float:
    """Two-photon interference contrast left after a group-delay mismatch.

    ``triangular`` ramps linearly to zero at ``tau_eff_ps``; ``gaussian``
    uses a Gaussian with FWHM-like width ``tau_eff_ps``. Either default
    width is calibrated to leave 25% contrast at an 11 ps mismatch.
    """
    if model == "triangular":
        tau = TRIANGULAR_TAU_EFF_PS if tau_eff_ps is None else tau_eff_ps
        return max(0.0, 1.0 - abs(delta_tau_ps) / tau)
    if model == "gaussian":
        tau = GAUSSIAN_TAU_EFF_PS if tau_eff_ps is None else tau_eff_ps
        return math.exp(-4.0 * math.log(2.0) * (delta_tau_ps / tau) ** 2)
    raise ValueError(f"unknown overlap model: {model!r}")


def phase_at(source: TwoCrystalSource, delta_temp_c: float | None = None) -> float:
    """Pair phase at a pump-crystal temperature offset (rad).

    Uses the source's stored ``temperature_offset_c`` unless an explicit
    offset is supplied.
    """
    if delta_temp_c is None:
        delta_temp_c = source.temperature_offset_c
    return source.base_phase_rad + source.phase_temp_slope_rad_per_c * delta_temp_c


def pair_flux_in_fiber(source: TwoCrystalSource) -> float:
    """Rate of pairs with both photons coupled into fiber, per second.

    The brightness is normalized per mW of pump and per THz of selected
    idler bandwidth, so the flux is brightness * pump power * number of
    pumped crystals * bandwidth.
    """
    bandwidth_thz = bandwidth_to_thz(
        source.idler_bandwidth_fwhm_nm, source.idler_wavelength_nm
    )
    return (
        source.brightness_pairs_per_s_thz_mw
        * source.pump_power_mw_per_crystal
        * source.crystals_pumped
        * bandwidth_thz
    )


def crystal_length_scaling(flux_per_s: float, old_mm: float, new_mm: float) -> float:
    """Rescale a pair flux for a different crystal length (linear model)."""
    if old_mm <= 0.0 or new_mm <= 0.0:
        raise ValueError("crystal lengths must be positive")
    return flux_per_s * new_mm / old_mm


def coincidence_probability(
    theta_a_deg: float, theta_b_deg: float, state: PairState
) -> float:
    """Joint projection probability for analyzers at the two angles.

    Angles are measured from horizontal in degrees. For the balanced
    state this reduces to
    1/2 [sin^2 tA sin^2 tB + cos^2 tA cos^2 tB
         + (mu cos phi / 2) sin 2tA sin 2tB].
    """
    ta = math.radians(theta_a_deg)
    tb = math.radians(theta_b_deg)
    wh, wv = state.weight_h, state.weight_v
    interference = (
        math.sqrt(wh * wv)
        * state.interference_mu
        * math.cos(state.phase_rad)
        / 2.0
        * math.sin(2.0 * ta)
        * math.sin(2.0 * tb)
    )
    return (
        wv * math.sin(ta) ** 2 * math.sin(tb) ** 2
        + wh * math.cos(ta) ** 2 * math.cos(tb) ** 2
        + interference
    )


def signal_marginal_probability(theta_deg: float, state: PairState) -> float:
    """Probability that the signal photon alone passes an analyzer."""
    t = math.radians(theta_deg)
    return state.weight_h * math.cos(t) ** 2 + state.weight_v * math.sin(t) ** 2


def idler_marginal_probability(theta_deg: float, state: PairState) -> float:
    """Probability that the idler photon alone passes an analyzer.

    The reduced states of the two photons coincide for this family of
    states, but the two entry points are kept separate so call sites
    say which arm they mean.
    """
    return signal_marginal_probability(theta_deg, state)
