"""Detector and coincidence-electronics models.

The signal arm uses a free-running silicon APD; the idler arm uses a
gated InGaAs APD that only arms when a trigger arrives, enforces a
hold-off after avalanches to tame afterpulsing, and can be followed by
a pulse-overlap coincidence discriminator (TDC) that trades away a
known fraction of true pairs for a narrower accidental window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FreeRunningDetector",
    "GatedDetector",
    "TimeDiscriminator",
    "SyncReceiver",
    "detection_trial",
    "effective_gate_rate",
    "accidental_probability_per_gate",
    "coincidence_window_ns",
    "true_pass_fraction",
    "sync_gate_check",
]

AFTER_DETECTION = "after-detection"
AFTER_EVERY_GATE = "after-every-gate"


@dataclass(frozen=True)
class FreeRunningDetector:
    """Free-running single-photon detector (signal arm)."""

    efficiency: float = 0.60
    dark_rate_hz: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency outside [0, 1]: {self.efficiency}")
        if self.dark_rate_hz < 0.0:
            raise ValueError("dark rate must be non-negative")


@dataclass(frozen=True)
class GatedDetector:
    """Gated single-photon detector (idler arm).

    ``holdoff_semantics`` selects when the hold-off timer starts:
    ``after-detection`` (default) blocks new gates only after an
    avalanche; ``after-every-gate`` blocks after each armed gate, which
    caps the gate throughput regardless of detections.
    """

    efficiency: float = 0.18
    gate_width_ns: float = 2.5
    holdoff_us: float = 10.0
    holdoff_semantics: str = AFTER_DETECTION
    dark_prob_per_gate: float = 1.1e-3

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency outside [0, 1]: {self.efficiency}")
        if self.gate_width_ns <= 0.0:
            raise ValueError("gate width must be positive")
        if self.holdoff_us < 0.0:
            raise ValueError("hold-off must be non-negative")
        if self.holdoff_semantics not in (AFTER_DETECTION, AFTER_EVERY_GATE):
            raise ValueError(f"unknown hold-off semantics: {self.holdoff_semantics!r}")
        if not 0.0 <= self.dark_prob_per_gate < 1.0:
            raise ValueError("dark probability per gate must lie in [0, 1)")


@dataclass(frozen=True)
class TimeDiscriminator:
    """Pulse-overlap coincidence stage after the gated detector.

    When enabled, true coincidences survive with
    ``true_coincidence_pass`` (finite pulse overlap) and accidentals
    are only collected inside ``overlap_window_ns`` instead of the full
    gate.
    """

    enabled: bool = False
    overlap_window_ns: float = 1.5
    true_coincidence_pass: float = 0.8

    def __post_init__(self) -> None:
        if self.overlap_window_ns <= 0.0:
            raise ValueError("overlap window must be positive")
        if not 0.0 < self.true_coincidence_pass <= 1.0:
            raise ValueError("true-coincidence pass must lie in (0, 1]")


@dataclass(frozen=True)
class SyncReceiver:
    """Threshold detector for the synchronization pulses.

    The receiver also sets the electronic delay that places the gate on
    the idler arrival. ``gate_delay_offset_ns`` is the residual error of
    that calibration: zero means the gate is centered on the mean
    arrival time.
    """

    threshold_dbm: float = -23.0
    gate_delay_offset_ns: float = 0.0

    def closes(self, received_dbm: float) -> bool:
        return received_dbm >= self.threshold_dbm


def detection_trial(rng: np.random.Generator, n: int, probability: float) -> np.ndarray:
    """Bernoulli thinning: boolean array of n detection outcomes."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {probability}")
    if n < 0:
        raise ValueError("trial count must be non-negative")
    return rng.random(n) < probability


def effective_gate_rate(
    trigger_rate_hz: float,
    detector: GatedDetector,
    detection_rate_hz: float | None = None,
) -> float:
    """Gate rate left after the hold-off circuit discards triggers.

    after-every-gate: non-paralyzable dead time per armed gate,
    R_eff = R / (1 + R * tau).
    after-detection: only avalanches start the timer, so the discarded
    fraction is detection_rate * tau, R_eff = R * (1 - detection_rate * tau).
    """
    if trigger_rate_hz < 0.0:
        raise ValueError("trigger rate must be non-negative")
    tau_s = detector.holdoff_us * 1e-6
    if detector.holdoff_semantics == AFTER_EVERY_GATE:
        return trigger_rate_hz / (1.0 + trigger_rate_hz * tau_s)
    if detection_rate_hz is None:
        raise ValueError("after-detection hold-off needs the detection rate")
    if detection_rate_hz < 0.0:
        raise ValueError("detection rate must be non-negative")
    return max(0.0, trigger_rate_hz * (1.0 - detection_rate_hz * tau_s))


def coincidence_window_ns(detector: GatedDetector, tdc: TimeDiscriminator) -> float:
    """Time window in which uncorrelated light is accepted as a coincidence."""
    if tdc.enabled:
        return min(tdc.overlap_window_ns, detector.gate_width_ns)
    return detector.gate_width_ns


def true_pass_fraction(tdc: TimeDiscriminator) -> float:
    """Fraction of true coincidences surviving the discriminator."""
    return tdc.true_coincidence_pass if tdc.enabled else 1.0


def accidental_probability_per_gate(
    detector: GatedDetector,
    window_ns: float,
    background_flux_per_s: float,
) -> float:
    """Probability of an uncorrelated count inside ``window_ns``.

    Dark counts scale with the fraction of the gate covered by the
    window; photon background scales with flux, efficiency and the
    window itself.
    """
    if window_ns <= 0.0 or window_ns > detector.gate_width_ns + 1e-12:
        raise ValueError(
            f"window must lie within the gate: {window_ns} vs {detector.gate_width_ns}"
        )
    if background_flux_per_s < 0.0:
        raise ValueError("background flux must be non-negative")
    dark = detector.dark_prob_per_gate * (window_ns / detector.gate_width_ns)
    photons = background_flux_per_s * detector.efficiency * window_ns * 1e-9
    return min(1.0, dark + photons)


def sync_gate_check(received_dbm: float, receiver: SyncReceiver) -> bool:
    """True when the received sync power is enough to run the gating."""
    return receiver.closes(received_dbm)
