"""Fiber link, WDM filtering, synchronization path and polarization drift.

A channel is an ordered list of :class:`FiberSpan` and
:class:`FilterElement` entries between the source output and the remote
analyzer. The synchronization laser shares the same fiber through
add/drop ports, so its budget and its leakage into the quantum band are
derived from the same chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .units import dispersion_spread_ps, photon_flux

__all__ = [
    "FiberSpan",
    "FilterElement",
    "SyncChannel",
    "PolarizationDrift",
    "LeakageReport",
    "chain_loss_db",
    "link_transmittance",
    "arrival_time_spread_ps",
    "sync_power_at_receiver",
    "leakage_flux_at_detector",
    "drift_rotation_rad",
    "drift_walk_rad",
]


@dataclass(frozen=True)
class FiberSpan:
    """Telecom fiber span carrying the idler photons."""

    length_km: float
    attenuation_db_per_km: float = 0.222
    chromatic_dispersion_ps_nm_km: float = 18.0

    def __post_init__(self) -> None:
        if self.length_km < 0.0:
            raise ValueError(f"fiber length must be non-negative, got {self.length_km}")
        if self.attenuation_db_per_km < 0.0:
            raise ValueError("attenuation must be non-negative")

    def loss_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km


@dataclass(frozen=True)
class FilterElement:
    """WDM add/drop filter in the quantum path."""

    insertion_loss_db: float = 1.0
    adjacent_isolation_db: float = 40.0
    center_nm: float = 1555.0
    flat_top_nm: float = 0.2
    fwhm_nm: float = 0.5

    def __post_init__(self) -> None:
        if self.insertion_loss_db < 0.0 or self.adjacent_isolation_db < 0.0:
            raise ValueError("filter losses must be non-negative")
        if self.flat_top_nm > self.fwhm_nm:
            raise ValueError("flat-top width cannot exceed the FWHM")


ChannelElement = Union[FiberSpan, FilterElement]


@dataclass(frozen=True)
class SyncChannel:
    """Pulsed synchronization laser multiplexed onto the quantum fiber.

    ``multiplexed`` False means the trigger travels electrically
    (coaxial cable) instead; the optical budget then does not apply and
    nothing leaks into the quantum band.

    ``transmitter_filter_db`` lists the spectral clean-up stages after
    the laser (grating reflector, then the add WDM); their sum
    suppresses broadband fluorescence at the quantum wavelength, while
    only the WDM stage acts on the in-band line during a pulse.
    ``gate_overlap_fraction`` is the fraction of residual pulse light
    that falls inside the detector gate; the nominal timing puts the
    pulse well clear of the gate, so it defaults to zero.
    """

    multiplexed: bool = True
    wavelength_nm: float = 1555.75
    launch_pulse_power_dbm: float = -3.0
    pulse_width_ns: float = 10.0
    offset_behind_photon_ns: float = 50.0
    idle_floor_power_dbm: float = -10.0
    fluorescence_at_quantum_dbm: float = -50.0
    transmitter_filter_db: tuple[float, ...] = (20.0, 40.0)
    receiver_isolation_db: float = 40.0
    path_insertion_db: float = 2.0
    gate_overlap_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gate_overlap_fraction <= 1.0:
            raise ValueError("gate overlap fraction must lie in [0, 1]")
        if self.pulse_width_ns <= 0.0:
            raise ValueError("pulse width must be positive")


@dataclass(frozen=True)
class PolarizationDrift:
    """Slow random rotation of the analyzer frame against the source."""

    drift_rate_rad_per_min: float = 0.0
    initial_misalignment_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.drift_rate_rad_per_min < 0.0:
            raise ValueError("drift rate must be non-negative")


@dataclass(frozen=True)
class LeakageReport:
    """Sync-laser light reaching the gated detector, in photons/s.

    ``fluorescence_flux_per_s`` is continuous in-band background;
    ``pulse_flux_per_s`` is the flux while a pulse is present, of which
    only ``overlap_fraction`` coincides with the gate.
    """

    fluorescence_flux_per_s: float
    pulse_flux_per_s: float
    overlap_fraction: float

    def in_gate_flux_per_s(self) -> float:
        return self.fluorescence_flux_per_s + self.pulse_flux_per_s * self.overlap_fraction


def chain_loss_db(chain: Sequence[ChannelElement]) -> float:
    """Total quantum-path loss of the chain in dB (fiber plus insertion)."""
    total = 0.0
    for element in chain:
        if isinstance(element, FiberSpan):
            total += element.loss_db()
        elif isinstance(element, FilterElement):
            total += element.insertion_loss_db
        else:
            raise TypeError(f"unknown channel element: {element!r}")
    return total


def link_transmittance(chain: Sequence[ChannelElement]) -> float:
    """Linear power transmittance of the chain for in-band photons."""
    return 10.0 ** (-chain_loss_db(chain) / 10.0)


def arrival_time_spread_ps(chain: Sequence[ChannelElement], bandwidth_nm: float) -> float:
    """Chromatic arrival-time spread accumulated over all fiber spans."""
    spread = 0.0
    for element in chain:
        if isinstance(element, FiberSpan):
            spread += dispersion_spread_ps(
                element.chromatic_dispersion_ps_nm_km, bandwidth_nm, element.length_km
            )
    return spread


def _fiber_loss_db(chain: Sequence[ChannelElement]) -> float:
    return sum(e.loss_db() for e in chain if isinstance(e, FiberSpan))


def sync_power_at_receiver(sync: SyncChannel, chain: Sequence[ChannelElement]) -> float:
    """Pulse power arriving at the sync photodiode, dBm.

    The sync line rides the same fiber but enters and leaves through
    add/drop ports, so it sees the fiber attenuation plus the fixed
    add/drop insertion rather than the whole filter cascade.
    """
    if not sync.multiplexed:
        raise ValueError("sync channel is not multiplexed onto the fiber")
    return sync.launch_pulse_power_dbm - _fiber_loss_db(chain) - sync.path_insertion_db


def leakage_flux_at_detector(
    sync: SyncChannel, chain: Sequence[ChannelElement]
) -> LeakageReport:
    """Sync-laser leakage entering the gated detector's band.

    Two paths: broadband laser fluorescence already at the quantum
    wavelength (suppressed by every transmitter clean-up filter), and
    the in-band wing of the pulse itself (suppressed by the receiver
    drop isolation and the transmitter WDM stage). Both then ride the
    fiber and the add/drop insertion like any other in-band light.
    """
    if not sync.multiplexed:
        return LeakageReport(0.0, 0.0, 0.0)
    path_db = _fiber_loss_db(chain) + sync.path_insertion_db
    fluor_dbm = (
        sync.fluorescence_at_quantum_dbm - sum(sync.transmitter_filter_db) - path_db
    )
    wdm_stage_db = sync.transmitter_filter_db[-1] if sync.transmitter_filter_db else 0.0
    pulse_dbm = (
        sync.launch_pulse_power_dbm
        - sync.receiver_isolation_db
        - wdm_stage_db
        - path_db
    )
    quantum_nm = min(
        (e.center_nm for e in chain if isinstance(e, FilterElement)),
        default=1555.0,
    )
    return LeakageReport(
        fluorescence_flux_per_s=photon_flux(fluor_dbm, quantum_nm),
        pulse_flux_per_s=photon_flux(pulse_dbm, sync.wavelength_nm),
        overlap_fraction=sync.gate_overlap_fraction,
    )


def drift_rotation_rad(
    drift: PolarizationDrift, elapsed_min: float, rng: np.random.Generator
) -> float:
    """One sample of the analyzer-frame rotation after ``elapsed_min``.

    Random-walk statistics: zero-mean Gaussian with standard deviation
    drift_rate * sqrt(elapsed minutes), on top of the static offset.
    """
    if elapsed_min < 0.0:
        raise ValueError(f"elapsed time must be non-negative, got {elapsed_min}")
    sigma = drift.drift_rate_rad_per_min * math.sqrt(elapsed_min)
    wander = rng.normal(0.0, sigma) if sigma > 0.0 else 0.0
    return drift.initial_misalignment_rad + wander


def drift_walk_rad(
    drift: PolarizationDrift,
    n_steps: int,
    step_minutes: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Cumulative drift path sampled at fixed intervals (rad).

    Element k is the rotation at the END of step k; the increments are
    independent Gaussians so the variance grows linearly with time.
    """
    if n_steps < 0:
        raise ValueError("step count must be non-negative")
    if step_minutes <= 0.0:
        raise ValueError("step duration must be positive")
    sigma = drift.drift_rate_rad_per_min * math.sqrt(step_minutes)
    if sigma == 0.0:
        increments = np.zeros(n_steps)
    else:
        increments = rng.normal(0.0, sigma, size=n_steps)
    return drift.initial_misalignment_rad + np.cumsum(increments)
