"""Figures of merit derived from coincidence counts.

Raw visibility follows the counter convention: rates are used as
registered, with no background subtraction. Per-basis numbers pair the
analyzer setting aligned with a signal state against the orthogonal
setting, so the error rate and the visibility are two views of the same
pair of rates and QBER = (1 - V) / 2 holds exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .source import TwoCrystalSource
from .units import bandwidth_to_thz

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .engine import CountsReport, Scenario

__all__ = [
    "BASIS_LABELS",
    "SECURITY_QBER_LIMIT",
    "CurveFit",
    "MeritReport",
    "visibility",
    "visibility_from_curve",
    "qber",
    "is_secure",
    "conditional_detection",
    "normalized_brightness",
    "merit_report",
]

BASIS_LABELS = ("H", "V", "D", "A")

# Error threshold below which a secret key can still be distilled.
SECURITY_QBER_LIMIT = 0.11


def visibility(coincidence_rate: float, accidental_rate: float) -> float:
    """Raw visibility (Rc - Ra) / (Rc + Ra) of two registered rates."""
    total = coincidence_rate + accidental_rate
    if total <= 0.0:
        raise ValueError("visibility undefined: both rates are zero")
    return (coincidence_rate - accidental_rate) / total


@dataclass(frozen=True)
class CurveFit:
    """Result of extracting visibility from an analyzer-angle scan."""

    visibility: float
    method: str  # "cosine_fit" or "min_max"
    offset: float
    amplitude: float
    phase_deg: float


def visibility_from_curve(
    angles_deg: Sequence[float], rates: Sequence[float]
) -> CurveFit:
    """Extract visibility from coincidence rates over an angle scan.

    Fits a + b cos(2 (theta - theta0)) by linear least squares on the
    (1, cos 2theta, sin 2theta) basis; visibility is b / a. Falls back
    to (max - min) / (max + min) when the fit is unusable, and records
    which route produced the number.
    """
    angles = np.asarray(angles_deg, dtype=float)
    values = np.asarray(rates, dtype=float)
    if angles.shape != values.shape or angles.ndim != 1:
        raise ValueError("angles and rates must be 1-d sequences of equal length")
    if angles.size < 8:
        raise ValueError(f"need at least 8 points for a contrast fit, got {angles.size}")
    if np.ptp(angles) < 180.0 - 1e-9:
        raise ValueError("angle scan must span at least 180 degrees")

    two_theta = np.radians(2.0 * angles)
    design = np.column_stack([np.ones_like(two_theta), np.cos(two_theta), np.sin(two_theta)])
    solution, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    offset, c_cos, c_sin = solution
    amplitude = math.hypot(c_cos, c_sin)
    if rank == 3 and offset > 0.0 and amplitude <= offset * (1.0 + 1e-9):
        phase_deg = math.degrees(0.5 * math.atan2(c_sin, c_cos))
        return CurveFit(
            visibility=amplitude / offset,
            method="cosine_fit",
            offset=float(offset),
            amplitude=float(amplitude),
            phase_deg=phase_deg,
        )

    top, bottom = float(values.max()), float(values.min())
    if top + bottom <= 0.0:
        raise ValueError("curve carries no counts, visibility undefined")
    return CurveFit(
        visibility=(top - bottom) / (top + bottom),
        method="min_max",
        offset=(top + bottom) / 2.0,
        amplitude=(top - bottom) / 2.0,
        phase_deg=float("nan"),
    )


def _basis_rows(report: "CountsReport") -> dict[str, tuple[float, float]]:
    """(aligned, orthogonal) registered rates per basis, from row roles."""
    aligned: dict[str, float] = {}
    orthogonal: dict[str, float] = {}
    for row in report.settings:
        if row.role == "matched":
            aligned[row.signal_state] = aligned.get(row.signal_state, 0.0) + row.coincidence_rate_hz
        elif row.role == "orthogonal":
            orthogonal[row.signal_state] = (
                orthogonal.get(row.signal_state, 0.0) + row.coincidence_rate_hz
            )
    missing = [b for b in BASIS_LABELS if b not in aligned or b not in orthogonal]
    if missing:
        raise ValueError(
            "report lacks aligned/orthogonal rows for bases: " + ", ".join(missing)
        )
    return {b: (aligned[b], orthogonal[b]) for b in BASIS_LABELS}


def qber(report: "CountsReport") -> float:
    """Quantum bit error rate: mean error fraction over the four bases.

    Per basis the error fraction is the orthogonal-setting rate over the
    total of both settings, the coincidence-counter analogue of wrong
    bits over sifted bits.
    """
    fractions = []
    for basis, (good, bad) in _basis_rows(report).items():
        total = good + bad
        if total <= 0.0:
            raise ValueError(f"basis {basis} registered no coincidences")
        fractions.append(bad / total)
    return float(np.mean(fractions))


def is_secure(qber_value: float, limit: float = SECURITY_QBER_LIMIT) -> bool:
    """True when the error rate is strictly below the security limit."""
    if qber_value < 0.0:
        raise ValueError(f"negative error rate: {qber_value}")
    return qber_value < limit


def conditional_detection(
    coincidence_rate: float, trigger_rate: float, gated_efficiency: float
) -> tuple[float, float]:
    """(raw, efficiency-corrected) probability of finding the partner photon.

    Raw is coincidences per trigger; corrected divides out the gated
    detector efficiency to estimate the transmission of the idler arm.
    """
    if trigger_rate <= 0.0:
        raise ValueError("trigger rate must be positive")
    if not 0.0 < gated_efficiency <= 1.0:
        raise ValueError(f"gated efficiency outside (0, 1]: {gated_efficiency}")
    raw = coincidence_rate / trigger_rate
    return raw, raw / gated_efficiency


def normalized_brightness(
    coincidence_rate: float,
    signal_efficiency: float,
    gated_efficiency: float,
    pump_power_mw: float,
    bandwidth_nm: float,
    wavelength_nm: float,
) -> float:
    """Source brightness per mW of pump and THz of selected bandwidth.

    Inverts the detection chain at the reference operating point:
    Rf = Rc / (eta_s * eta_i * P * delta_nu).
    """
    if signal_efficiency <= 0.0 or gated_efficiency <= 0.0:
        raise ValueError("detector efficiencies must be positive")
    if pump_power_mw <= 0.0:
        raise ValueError("pump power must be positive")
    bandwidth_thz = bandwidth_to_thz(bandwidth_nm, wavelength_nm)
    return coincidence_rate / (
        signal_efficiency * gated_efficiency * pump_power_mw * bandwidth_thz
    )


@dataclass(frozen=True)
class MeritReport:
    """Headline figures extracted from a counts report."""

    visibility_by_basis: dict[str, float]
    qber: float
    secure: bool
    pair_rate_hz: float
    accidental_rate_hz: float
    conditional_raw: float
    conditional_corrected: float
    brightness_pairs_per_s_thz_mw: float


def merit_report(report: "CountsReport", scenario: "Scenario") -> MeritReport:
    """Derive the merit figures the link is judged by."""
    vis = {}
    for basis, (good, bad) in _basis_rows(report).items():
        vis[basis] = visibility(good, bad)
    error_rate = qber(report)
    raw, corrected = conditional_detection(
        report.pair_rate_hz, report.trigger_rate_hz, scenario.idler_detector.efficiency
    )
    src = scenario.source
    brightness = normalized_brightness(
        report.pair_rate_hz,
        scenario.signal_detector.efficiency,
        scenario.idler_detector.efficiency,
        src.pump_power_mw_per_crystal * src.crystals_pumped,
        src.idler_bandwidth_fwhm_nm,
        src.idler_wavelength_nm,
    )
    return MeritReport(
        visibility_by_basis=vis,
        qber=error_rate,
        secure=is_secure(error_rate),
        pair_rate_hz=report.pair_rate_hz,
        accidental_rate_hz=report.accidental_rate_hz,
        conditional_raw=raw,
        conditional_corrected=corrected,
        brightness_pairs_per_s_thz_mw=brightness,
    )
