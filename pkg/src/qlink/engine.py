"""Analytic budget and Monte Carlo engines for the shared-fiber pair link.

Both engines model the same chain: pairs leave the source, the signal
photon is detected locally and opens a gate on the remote detector via
the sync path, the idler crosses the fiber chain and is analyzed in
polarization inside that gate. The budget propagates expected rates
through the chain in closed form; the Monte Carlo draws a trigger
timeline per analyzer setting and pushes every gate through the same
loss, jitter, hold-off and discrimination steps, so the two agree
within counting statistics.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import analysis
from .channel import (
    FiberSpan,
    FilterElement,
    PolarizationDrift,
    SyncChannel,
    arrival_time_spread_ps,
    chain_loss_db,
    drift_walk_rad,
    leakage_flux_at_detector,
    sync_power_at_receiver,
)
from .detection import (
    AFTER_DETECTION,
    FreeRunningDetector,
    GatedDetector,
    SyncReceiver,
    TimeDiscriminator,
    coincidence_window_ns,
    effective_gate_rate,
    true_pass_fraction,
)
from .source import (
    SIGNAL_STATE_ANGLES,
    CompensatorStack,
    PairState,
    TwoCrystalSource,
    coincidence_probability,
    idler_marginal_probability,
    interference_factor,
    net_group_delay,
    pair_flux_in_fiber,
    phase_at,
    signal_marginal_probability,
)
from .units import wavelengths_consistent

__all__ = [
    "EVENT_GUARD",
    "ScenarioError",
    "EventGuardError",
    "Scenario",
    "RunSettings",
    "SettingCounts",
    "CountsReport",
    "VisibilityCurve",
    "SweepPoint",
    "SweepResult",
    "default_analyzer_settings",
    "validate_scenario",
    "run_budget",
    "run_monte_carlo",
    "visibility_curve",
    "set_parameter",
    "sweep",
]

# Hard ceiling on expected trigger-stream events in one Monte Carlo call.
EVENT_GUARD = 1_000_000_000

_FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
_DRIFT_GRID_STEPS = 512


class ScenarioError(ValueError):
    """A scenario or run request failed validation."""


class EventGuardError(RuntimeError):
    """A Monte Carlo request would exceed the event budget."""


@dataclass(frozen=True)
class Scenario:
    """Full description of one link configuration."""

    name: str = "custom"
    source: TwoCrystalSource = field(
        default_factory=lambda: TwoCrystalSource(
            brightness_pairs_per_s_thz_mw=1.2e6, pump_power_mw_per_crystal=4.0
        )
    )
    compensators: CompensatorStack = field(default_factory=lambda: CompensatorStack(()))
    channel: tuple = ()
    sync: SyncChannel = field(default_factory=lambda: SyncChannel(multiplexed=False))
    signal_detector: FreeRunningDetector = field(default_factory=FreeRunningDetector)
    idler_detector: GatedDetector = field(default_factory=GatedDetector)
    tdc: TimeDiscriminator = field(default_factory=TimeDiscriminator)
    sync_receiver: SyncReceiver = field(default_factory=SyncReceiver)
    drift: PolarizationDrift = field(default_factory=PolarizationDrift)
    alice_coupling_loss_db: float = 0.0
    bob_analyzer_loss_db: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "channel", tuple(self.channel))


@dataclass(frozen=True)
class RunSettings:
    """How to exercise a scenario."""

    mode: str = "budget"
    duration_s: float = 10.0
    seed: int = 12345
    analyzer_settings: tuple | None = None  # ((state, idler_angle_deg), ...) or None

    def __post_init__(self) -> None:
        if self.mode not in ("budget", "mc"):
            raise ValueError(f"unknown run mode: {self.mode!r}")
        if self.duration_s <= 0.0:
            raise ValueError(f"run duration must be positive, got {self.duration_s}")
        if self.analyzer_settings is not None:
            object.__setattr__(
                self,
                "analyzer_settings",
                tuple((str(s), float(a)) for s, a in self.analyzer_settings),
            )


@dataclass(frozen=True)
class SettingCounts:
    """Counts for one (signal state, idler analyzer angle) row."""

    signal_state: str
    idler_angle_deg: float
    role: str  # "matched", "orthogonal" or "custom"
    singles_rate_hz: float
    trigger_rate_hz: float  # full trigger stream while this row was measured
    gates_opened: float
    coincidence_rate_hz: float  # registered: true plus accidental
    accidental_rate_hz: float
    coincidences: float
    accidentals: float


@dataclass(frozen=True)
class CountsReport:
    """Outcome of one budget or Monte Carlo run."""

    scenario_name: str
    mode: str
    duration_s: float
    seed: int | None
    trigger_rate_hz: float
    gate_rate_hz: float
    sync_received_dbm: float | None
    sync_closed: bool
    pair_rate_hz: float  # registered coincidences summed over matched rows
    accidental_rate_hz: float  # accidental share of the same rows
    settings: tuple
    warnings: tuple


@dataclass(frozen=True)
class VisibilityCurve:
    """Coincidence rates over an idler analyzer scan at one signal state."""

    signal_state: str
    mode: str
    seed: int | None
    angles_deg: tuple
    coincidence_rates_hz: tuple
    accidental_rates_hz: tuple
    fit: analysis.CurveFit


@dataclass(frozen=True)
class SweepPoint:
    value: float
    merit: analysis.MeritReport
    trigger_rate_hz: float
    gate_rate_hz: float
    seed: int | None


@dataclass(frozen=True)
class SweepResult:
    parameter_path: str
    mode: str
    points: tuple


# ---------------------------------------------------------------------------
# validation and setting resolution


def validate_scenario(scenario: Scenario) -> list[str]:
    """Collect human-readable violations; an empty list means runnable."""
    problems: list[str] = []
    src = scenario.source
    if not wavelengths_consistent(
        src.pump_wavelength_nm, src.signal_wavelength_nm, src.idler_wavelength_nm
    ):
        problems.append(
            "pump/signal/idler wavelengths do not satisfy energy conservation"
        )
    if scenario.alice_coupling_loss_db < 0.0:
        problems.append("alice_coupling_loss_db must be non-negative")
    if scenario.bob_analyzer_loss_db < 0.0:
        problems.append("bob_analyzer_loss_db must be non-negative")
    for idx, element in enumerate(scenario.channel):
        if not isinstance(element, (FiberSpan, FilterElement)):
            problems.append(f"channel element {idx} has unsupported type {type(element).__name__}")
    if scenario.tdc.enabled and scenario.tdc.overlap_window_ns > scenario.idler_detector.gate_width_ns:
        problems.append("discriminator overlap window exceeds the detector gate width")
    if scenario.sync.multiplexed:
        for idx, element in enumerate(scenario.channel):
            if isinstance(element, FilterElement):
                if abs(element.center_nm - scenario.sync.wavelength_nm) < element.fwhm_nm / 2.0:
                    problems.append(
                        f"sync wavelength sits inside the passband of channel filter {idx}"
                    )
    return problems


def _role_for(weights: tuple[float, float], state: str, angle_deg: float) -> str:
    """Classify an analyzer row as matched, orthogonal or custom."""
    if min(weights) > 0.0:
        reference = SIGNAL_STATE_ANGLES[state]
    else:
        # single-crystal emission: alignment is a property of the source,
        # not of the trigger state
        reference = 90.0 if weights[1] >= weights[0] else 0.0
    offset = (angle_deg - reference) % 180.0
    if min(offset, 180.0 - offset) < 1e-6:
        return "matched"
    if abs(offset - 90.0) < 1e-6:
        return "orthogonal"
    return "custom"


def default_analyzer_settings(source: TwoCrystalSource) -> tuple:
    """Standard eight-row measurement: aligned and crossed per state."""
    weights = source.pair_weights()
    rows = []
    if min(weights) > 0.0:
        for state, angle in SIGNAL_STATE_ANGLES.items():
            rows.append((state, angle))
        for state, angle in SIGNAL_STATE_ANGLES.items():
            rows.append((state, (angle + 90.0) % 180.0))
    else:
        aligned = 90.0 if weights[1] >= weights[0] else 0.0
        for state in SIGNAL_STATE_ANGLES:
            rows.append((state, aligned))
        for state in SIGNAL_STATE_ANGLES:
            rows.append((state, (aligned + 90.0) % 180.0))
    return tuple(rows)


def _resolve_rows(scenario: Scenario, settings: RunSettings) -> list[tuple[str, float, str]]:
    requested = settings.analyzer_settings
    if requested is None:
        requested = default_analyzer_settings(scenario.source)
    weights = scenario.source.pair_weights()
    rows = []
    for state, angle in requested:
        if state not in SIGNAL_STATE_ANGLES:
            raise ScenarioError(
                f"unknown signal state {state!r}; expected one of "
                + ", ".join(SIGNAL_STATE_ANGLES)
            )
        rows.append((state, float(angle), _role_for(weights, state, float(angle))))
    if not rows:
        raise ScenarioError("no analyzer settings requested")
    return rows


# ---------------------------------------------------------------------------
# shared operating point


@dataclass(frozen=True)
class _OperatingPoint:
    state: PairState
    pair_rate_hz: float
    heralding: float
    signal_rate_hz: float
    trigger_rate_hz: float
    pair_trigger_fraction: float
    path_transmittance: float
    capture_gate: float
    capture_window: float
    window_ns: float
    true_pass: float
    unpolarized_flux_at_detector_hz: float
    sync_received_dbm: float | None
    sync_closed: bool
    misalignment_deg: float
    q_trigger: dict
    warnings: tuple


def _capture_fraction(sigma_ps: float, window_ns: float, offset_ns: float = 0.0) -> float:
    """Probability that Gaussian arrival jitter lands inside the window.

    The window is centered on the calibrated gate position; a nonzero
    offset models a misadjusted receiver delay.
    """
    half_ps = window_ns * 1e3 / 2.0
    offset_ps = offset_ns * 1e3
    if sigma_ps <= 0.0:
        return 1.0 if abs(offset_ps) <= half_ps else 0.0
    root2 = math.sqrt(2.0)
    return 0.5 * (
        math.erf((half_ps - offset_ps) / (sigma_ps * root2))
        + math.erf((half_ps + offset_ps) / (sigma_ps * root2))
    )


def _operating_point(scenario: Scenario) -> _OperatingPoint:
    src = scenario.source
    warnings: list[str] = []

    mu = interference_factor(
        net_group_delay(scenario.compensators),
        model=scenario.compensators.overlap_model,
        tau_eff_ps=scenario.compensators.tau_eff_ps,
    )
    weight_h, weight_v = src.pair_weights()
    state = PairState(
        phase_rad=phase_at(src),
        interference_mu=mu,
        weight_h=weight_h,
        weight_v=weight_v,
    )

    pair_rate = pair_flux_in_fiber(src)
    heralding = 10.0 ** (-scenario.alice_coupling_loss_db / 10.0)
    signal_rate = pair_rate / heralding
    dark_rate = scenario.signal_detector.dark_rate_hz
    trigger_rate = signal_rate * scenario.signal_detector.efficiency + dark_rate
    if trigger_rate > 0.0:
        pair_trigger_fraction = signal_rate * scenario.signal_detector.efficiency / trigger_rate
    else:
        pair_trigger_fraction = 0.0

    chain_db = chain_loss_db(scenario.channel)
    path_transmittance = 10.0 ** (-(chain_db + scenario.bob_analyzer_loss_db) / 10.0)

    spread_fwhm_ps = arrival_time_spread_ps(scenario.channel, src.idler_bandwidth_fwhm_nm)
    sigma_ps = spread_fwhm_ps / _FWHM_TO_SIGMA
    gate_ns = scenario.idler_detector.gate_width_ns
    delay_offset_ns = scenario.sync_receiver.gate_delay_offset_ns
    window_ns = coincidence_window_ns(scenario.idler_detector, scenario.tdc)
    capture_gate = _capture_fraction(sigma_ps, gate_ns, delay_offset_ns)
    capture_window = _capture_fraction(sigma_ps, window_ns, delay_offset_ns)
    if capture_gate < 0.5:
        warnings.append(
            "dispersion spread exceeds the detector gate; most idlers arrive outside it"
        )

    if scenario.sync.multiplexed:
        received = sync_power_at_receiver(scenario.sync, scenario.channel)
        closed = scenario.sync_receiver.closes(received)
        leak = leakage_flux_at_detector(scenario.sync, scenario.channel)
        leak_flux = leak.in_gate_flux_per_s()
    else:
        received = None
        closed = True
        leak_flux = 0.0
    if not closed:
        warnings.append(
            "sync budget does not close at the receiver threshold; "
            "the gated detector never fires"
        )

    unpolarized = src.background_flux_per_s * path_transmittance + leak_flux

    if scenario.drift.drift_rate_rad_per_min > 0.0:
        warnings.append(
            "budget treats polarization drift as the initial offset only; "
            "the random walk is sampled in Monte Carlo runs"
        )

    q_trigger = {}
    for state_label, theta_s in SIGNAL_STATE_ANGLES.items():
        if trigger_rate > 0.0:
            pair_part = (
                signal_rate
                * scenario.signal_detector.efficiency
                * 0.5
                * signal_marginal_probability(theta_s, state)
            )
            q_trigger[state_label] = (pair_part + dark_rate / 4.0) / trigger_rate
        else:
            q_trigger[state_label] = 0.25

    return _OperatingPoint(
        state=state,
        pair_rate_hz=pair_rate,
        heralding=heralding,
        signal_rate_hz=signal_rate,
        trigger_rate_hz=trigger_rate,
        pair_trigger_fraction=pair_trigger_fraction,
        path_transmittance=path_transmittance,
        capture_gate=capture_gate,
        capture_window=capture_window,
        window_ns=window_ns,
        true_pass=true_pass_fraction(scenario.tdc),
        unpolarized_flux_at_detector_hz=unpolarized,
        sync_received_dbm=received,
        sync_closed=closed,
        misalignment_deg=math.degrees(scenario.drift.initial_misalignment_rad),
        q_trigger=q_trigger,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class _ContextRates:
    theta_eff_deg: float
    gate_rate_hz: float
    p_acc_gate: float
    p_acc_window: float
    p_pair_gate: float


def _context_rates(scenario: Scenario, op: _OperatingPoint, theta_b_deg: float) -> _ContextRates:
    """Hold-off fixed point and accidental odds for one analyzer angle.

    The gate rate depends on the detection probability per gate, which
    includes uncorrelated idlers whose partner trigger never opened a
    gate; that flux in turn depends on the gate rate. The loop converges
    geometrically because hold-off only perturbs the rate.
    """
    det = scenario.idler_detector
    theta_eff = theta_b_deg + op.misalignment_deg
    marginal = idler_marginal_probability(theta_eff, op.state)
    eta = det.efficiency
    gate_s = det.gate_width_ns * 1e-9
    window_s = op.window_ns * 1e-9
    tau_s = det.holdoff_us * 1e-6

    if op.trigger_rate_hz <= 0.0:
        return _ContextRates(
            theta_eff_deg=theta_eff,
            gate_rate_hz=0.0,
            p_acc_gate=0.0,
            p_acc_window=0.0,
            p_pair_gate=0.0,
        )

    p_pair_gate = (
        op.pair_trigger_fraction
        * marginal
        * op.heralding
        * op.path_transmittance
        * op.capture_gate
        * eta
    )
    eta_trigger = scenario.signal_detector.efficiency

    gate_fraction = 1.0
    gate_rate = op.trigger_rate_hz
    p_acc_gate = 0.0
    for _ in range(200):
        uncorr_flux = (
            op.pair_rate_hz * (1.0 - eta_trigger * gate_fraction) * op.path_transmittance
        )
        flux_term = (
            op.unpolarized_flux_at_detector_hz * 0.5 + uncorr_flux * marginal
        ) * eta
        p_acc_gate = min(1.0, det.dark_prob_per_gate + flux_term * gate_s)
        p_detect = p_pair_gate + p_acc_gate - p_pair_gate * p_acc_gate
        if det.holdoff_semantics == AFTER_DETECTION:
            # self-consistent solution of gate = trigger * (1 - det * tau)
            # with det = gate * p_detect; solving directly avoids the
            # oscillation a naive relaxation shows at heavy blocking
            gate_rate = op.trigger_rate_hz / (
                1.0 + op.trigger_rate_hz * p_detect * tau_s
            )
        else:
            gate_rate = effective_gate_rate(op.trigger_rate_hz, det)
        new_fraction = gate_rate / op.trigger_rate_hz
        if abs(new_fraction - gate_fraction) < 1e-14:
            gate_fraction = new_fraction
            break
        gate_fraction = new_fraction

    p_acc_window = p_acc_gate * (window_s / gate_s)
    return _ContextRates(
        theta_eff_deg=theta_eff,
        gate_rate_hz=gate_rate,
        p_acc_gate=p_acc_gate,
        p_acc_window=p_acc_window,
        p_pair_gate=p_pair_gate,
    )


def _headline(rows: Sequence[SettingCounts]) -> tuple[float, float]:
    pair = sum(r.coincidence_rate_hz for r in rows if r.role == "matched")
    acc = sum(r.accidental_rate_hz for r in rows if r.role == "matched")
    return pair, acc


# ---------------------------------------------------------------------------
# analytic budget


def run_budget(scenario: Scenario, settings: RunSettings | None = None) -> CountsReport:
    """Propagate expected rates through the link in closed form."""
    settings = settings or RunSettings()
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError("; ".join(problems))
    rows_spec = _resolve_rows(scenario, settings)
    op = _operating_point(scenario)
    duration = settings.duration_s

    contexts: dict[float, _ContextRates] = {}
    rows: list[SettingCounts] = []
    gate_rates = []
    for state_label, theta_b, role in rows_spec:
        if theta_b not in contexts:
            contexts[theta_b] = _context_rates(scenario, op, theta_b)
        ctx = contexts[theta_b]
        theta_s = SIGNAL_STATE_ANGLES[state_label]
        singles = op.q_trigger[state_label] * op.trigger_rate_hz
        gates = ctx.gate_rate_hz * duration if op.sync_closed else 0.0
        if op.sync_closed:
            joint = coincidence_probability(theta_s, ctx.theta_eff_deg, op.state)
            true_rate = (
                ctx.gate_rate_hz
                * op.pair_trigger_fraction
                * 0.5
                * joint
                * op.heralding
                * op.path_transmittance
                * op.capture_window
                * scenario.idler_detector.efficiency
                * op.true_pass
            )
            acc_rate = ctx.gate_rate_hz * op.q_trigger[state_label] * ctx.p_acc_window
        else:
            true_rate = 0.0
            acc_rate = 0.0
        registered = true_rate + acc_rate
        rows.append(
            SettingCounts(
                signal_state=state_label,
                idler_angle_deg=theta_b,
                role=role,
                singles_rate_hz=singles,
                trigger_rate_hz=op.trigger_rate_hz,
                gates_opened=gates,
                coincidence_rate_hz=registered,
                accidental_rate_hz=acc_rate,
                coincidences=registered * duration,
                accidentals=acc_rate * duration,
            )
        )
    for ctx in contexts.values():
        gate_rates.append(ctx.gate_rate_hz if op.sync_closed else 0.0)

    pair_rate, acc_rate = _headline(rows)
    return CountsReport(
        scenario_name=scenario.name,
        mode="budget",
        duration_s=duration,
        seed=None,
        trigger_rate_hz=op.trigger_rate_hz,
        gate_rate_hz=float(np.mean(gate_rates)),
        sync_received_dbm=op.sync_received_dbm,
        sync_closed=op.sync_closed,
        pair_rate_hz=pair_rate,
        accidental_rate_hz=acc_rate,
        settings=tuple(rows),
        warnings=op.warnings,
    )


# ---------------------------------------------------------------------------
# Monte Carlo


def _holdoff_keep(times: np.ndarray, tau_s: float) -> np.ndarray:
    """Mark which avalanche candidates actually fire given hold-off.

    Candidates are time-sorted; each accepted one blocks the detector
    for tau seconds, and candidates inside that span are skipped without
    opening a gate.
    """
    if tau_s <= 0.0:
        return np.ones(times.size, dtype=bool)
    kept = np.zeros(times.size, dtype=bool)
    idx = 0
    size = times.size
    while idx < size:
        kept[idx] = True
        idx = int(np.searchsorted(times, times[idx] + tau_s, side="left"))
    return kept


def _open_gate_mask(
    trigger_times: np.ndarray, kept_times: np.ndarray, tau_s: float
) -> np.ndarray:
    """True for triggers whose gate request falls outside hold-off spans."""
    if kept_times.size == 0 or tau_s <= 0.0:
        return np.ones(trigger_times.size, dtype=bool)
    edges = np.zeros(trigger_times.size + 1, dtype=np.int64)
    starts = np.searchsorted(trigger_times, kept_times, side="right")
    ends = np.searchsorted(trigger_times, kept_times + tau_s, side="left")
    np.add.at(edges, starts, 1)
    np.add.at(edges, ends, -1)
    return np.cumsum(edges[:-1]) == 0


def _joint_probability_array(
    theta_a_deg: float, theta_b_deg: np.ndarray, state: PairState
) -> np.ndarray:
    """Vectorized twin of source.coincidence_probability for angle arrays."""
    ta = math.radians(theta_a_deg)
    tb = np.radians(theta_b_deg)
    interference = (
        math.sqrt(state.weight_h * state.weight_v)
        * state.interference_mu
        * math.cos(state.phase_rad)
        / 2.0
        * math.sin(2.0 * ta)
        * np.sin(2.0 * tb)
    )
    return (
        state.weight_v * math.sin(ta) ** 2 * np.sin(tb) ** 2
        + state.weight_h * math.cos(ta) ** 2 * np.cos(tb) ** 2
        + interference
    )


def _drift_angle_offsets(
    scenario: Scenario, rng: np.random.Generator, times: np.ndarray, duration_s: float
) -> np.ndarray | None:
    """Per-trigger analyzer offset (degrees) from the polarization walk."""
    drift = scenario.drift
    if drift.drift_rate_rad_per_min <= 0.0:
        return None
    step_minutes = duration_s / 60.0 / _DRIFT_GRID_STEPS
    walk = drift_walk_rad(drift, _DRIFT_GRID_STEPS, step_minutes, rng)
    grid = np.linspace(0.0, duration_s, _DRIFT_GRID_STEPS, endpoint=False)
    idx = np.clip(np.searchsorted(grid, times, side="right") - 1, 0, _DRIFT_GRID_STEPS - 1)
    return np.degrees(walk[idx] - drift.initial_misalignment_rad)


def run_monte_carlo(scenario: Scenario, settings: RunSettings | None = None) -> CountsReport:
    """Sample the link event by event on a per-setting timeline.

    One timeline is drawn per distinct analyzer angle; the rows sharing
    that angle are read off the same stream. Draw order per timeline is
    fixed, so results are reproducible for a given seed.
    """
    settings = settings or RunSettings()
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError("; ".join(problems))
    rows_spec = _resolve_rows(scenario, settings)
    op = _operating_point(scenario)
    duration = settings.duration_s
    det = scenario.idler_detector

    context_angles: list[float] = []
    for _, theta_b, _ in rows_spec:
        if theta_b not in context_angles:
            context_angles.append(theta_b)
    expected_events = op.trigger_rate_hz * duration * len(context_angles)
    if expected_events > EVENT_GUARD:
        raise EventGuardError(
            f"expected {expected_events:.3g} trigger events across "
            f"{len(context_angles)} settings; the guard is {EVENT_GUARD:.0e}. "
            "Shorten the run or drop analyzer settings."
        )

    state_labels = list(SIGNAL_STATE_ANGLES)
    q_values = np.array([op.q_trigger[s] for s in state_labels])
    q_cumulative = np.cumsum(q_values)
    q_cumulative[-1] = 1.0

    tau_s = det.holdoff_us * 1e-6
    gate_s = det.gate_width_ns * 1e-9
    window_ratio = op.window_ns / det.gate_width_ns
    sigma_ps = 0.0
    spread_fwhm_ps = arrival_time_spread_ps(scenario.channel, scenario.source.idler_bandwidth_fwhm_nm)
    if spread_fwhm_ps > 0.0:
        sigma_ps = spread_fwhm_ps / _FWHM_TO_SIGMA

    per_context: dict[float, dict] = {}
    trigger_rates = []
    gate_rates = []
    for ctx_index, theta_b in enumerate(context_angles):
        rng = np.random.default_rng(
            np.random.SeedSequence(settings.seed, spawn_key=(ctx_index,))
        )
        ctx = _context_rates(scenario, op, theta_b)
        n_triggers = int(rng.poisson(op.trigger_rate_hz * duration))
        times = np.sort(rng.random(n_triggers)) * duration
        outputs = np.searchsorted(q_cumulative, rng.random(n_triggers), side="right")
        singles_counts = np.bincount(outputs, minlength=4)
        trigger_rates.append(n_triggers / duration)

        if not op.sync_closed:
            per_context[theta_b] = {
                "singles": singles_counts,
                "true": np.zeros(4),
                "acc": np.zeros(4),
                "gates": 0,
                "triggers": n_triggers,
            }
            gate_rates.append(0.0)
            continue

        drift_offsets = _drift_angle_offsets(scenario, rng, times, duration)

        # probability that the partner idler produces a detection
        # candidate, per trigger, before jitter capture
        base = (
            op.pair_trigger_fraction
            * op.heralding
            * op.path_transmittance
            * det.efficiency
        )
        theta_eff = ctx.theta_eff_deg
        if drift_offsets is None:
            p_candidate = np.zeros(4)
            for k, state_label in enumerate(state_labels):
                q_s = op.q_trigger[state_label]
                if q_s <= 0.0:
                    continue
                theta_s = SIGNAL_STATE_ANGLES[state_label]
                joint = coincidence_probability(theta_s, theta_eff, op.state)
                p_candidate[k] = 0.5 * joint * base / q_s
            p_per_trigger = p_candidate[outputs]
        else:
            angles = theta_eff + drift_offsets
            p_per_trigger = np.zeros(n_triggers)
            for k, state_label in enumerate(state_labels):
                mask = outputs == k
                q_s = op.q_trigger[state_label]
                if q_s <= 0.0 or not mask.any():
                    continue
                theta_s = SIGNAL_STATE_ANGLES[state_label]
                joint = _joint_probability_array(theta_s, angles[mask], op.state)
                p_per_trigger[mask] = 0.5 * joint * base / q_s

        candidate = rng.random(n_triggers) < p_per_trigger
        n_candidates = int(candidate.sum())
        offset_ps = scenario.sync_receiver.gate_delay_offset_ns * 1e3
        if sigma_ps > 0.0:
            jitter_ps = rng.normal(offset_ps, sigma_ps, size=n_candidates)
            in_gate = np.abs(jitter_ps) <= det.gate_width_ns * 1e3 / 2.0
            in_window = np.abs(jitter_ps) <= op.window_ns * 1e3 / 2.0
        else:
            inside = abs(offset_ps) <= det.gate_width_ns * 1e3 / 2.0
            in_gate = np.full(n_candidates, inside)
            in_window = np.full(n_candidates, abs(offset_ps) <= op.window_ns * 1e3 / 2.0)
        tdc_pass = rng.random(n_candidates) < op.true_pass

        detect = candidate.copy()
        detect[candidate] = in_gate

        acc_fire = rng.random(n_triggers) < ctx.p_acc_gate
        acc_in_window = rng.random(n_triggers) < window_ratio

        avalanche = detect | acc_fire
        avalanche_idx = np.nonzero(avalanche)[0]
        if det.holdoff_semantics == AFTER_DETECTION:
            kept_local = _holdoff_keep(times[avalanche_idx], tau_s)
            kept_times = times[avalanche_idx[kept_local]]
            open_gate = _open_gate_mask(times, kept_times, tau_s)
        else:
            granted = _holdoff_keep(times, tau_s)
            open_gate = granted

        true_flags = np.zeros(n_triggers, dtype=bool)
        cand_idx = np.nonzero(candidate)[0]
        true_flags[cand_idx] = in_gate & in_window & tdc_pass
        true_counted = true_flags & open_gate
        acc_counted = acc_fire & acc_in_window & open_gate

        per_context[theta_b] = {
            "singles": singles_counts,
            "true": np.bincount(outputs[true_counted], minlength=4).astype(float),
            "acc": np.bincount(outputs[acc_counted], minlength=4).astype(float),
            "gates": int(open_gate.sum()),
            "triggers": n_triggers,
        }
        gate_rates.append(per_context[theta_b]["gates"] / duration)

    rows: list[SettingCounts] = []
    for state_label, theta_b, role in rows_spec:
        data = per_context[theta_b]
        k = state_labels.index(state_label)
        true_n = float(data["true"][k])
        acc_n = float(data["acc"][k])
        rows.append(
            SettingCounts(
                signal_state=state_label,
                idler_angle_deg=theta_b,
                role=role,
                singles_rate_hz=float(data["singles"][k]) / duration,
                trigger_rate_hz=data["triggers"] / duration,
                gates_opened=float(data["gates"]),
                coincidence_rate_hz=(true_n + acc_n) / duration,
                accidental_rate_hz=acc_n / duration,
                coincidences=true_n + acc_n,
                accidentals=acc_n,
            )
        )

    pair_rate, acc_rate = _headline(rows)
    return CountsReport(
        scenario_name=scenario.name,
        mode="mc",
        duration_s=duration,
        seed=settings.seed,
        trigger_rate_hz=float(np.mean(trigger_rates)),
        gate_rate_hz=float(np.mean(gate_rates)),
        sync_received_dbm=op.sync_received_dbm,
        sync_closed=op.sync_closed,
        pair_rate_hz=pair_rate,
        accidental_rate_hz=acc_rate,
        settings=tuple(rows),
        warnings=op.warnings,
    )


# ---------------------------------------------------------------------------
# angle scans and parameter sweeps


def visibility_curve(
    scenario: Scenario,
    signal_state: str = "V",
    angles_deg: Sequence[float] | None = None,
    settings: RunSettings | None = None,
) -> VisibilityCurve:
    """Scan the idler analyzer for one signal state and fit the contrast."""
    settings = settings or RunSettings()
    if angles_deg is None:
        angles_deg = np.arange(0.0, 361.0, 15.0)
    angles = [float(a) for a in angles_deg]
    if any(b <= a for a, b in zip(angles, angles[1:])):
        raise ScenarioError("curve angle grid must be strictly increasing")
    rows = tuple((signal_state, a) for a in angles)
    run_settings = replace(settings, analyzer_settings=rows)
    if settings.mode == "mc":
        report = run_monte_carlo(scenario, run_settings)
    else:
        report = run_budget(scenario, run_settings)
    rates = tuple(r.coincidence_rate_hz for r in report.settings)
    accidentals = tuple(r.accidental_rate_hz for r in report.settings)
    fit = analysis.visibility_from_curve(angles, rates)
    return VisibilityCurve(
        signal_state=signal_state,
        mode=settings.mode,
        seed=report.seed,
        angles_deg=tuple(angles),
        coincidence_rates_hz=rates,
        accidental_rates_hz=accidentals,
        fit=fit,
    )


def set_parameter(scenario: Scenario, path: str, value: float) -> Scenario:
    """Return a copy of the scenario with one dotted numeric field replaced.

    Paths walk dataclass fields, with an integer segment indexing the
    channel tuple, e.g. ``source.pump_power_mw_per_crystal`` or
    ``channel.0.length_km``.
    """
    parts = path.split(".")
    if not parts or not parts[0]:
        raise ScenarioError(f"empty parameter path: {path!r}")

    def rebuild(obj, segments):
        name = segments[0]
        if isinstance(obj, tuple):
            try:
                index = int(name)
            except ValueError:
                raise ScenarioError(
                    f"expected a numeric index into the channel list, got {name!r}"
                ) from None
            if not 0 <= index < len(obj):
                raise ScenarioError(f"channel index {index} out of range (0..{len(obj) - 1})")
            items = list(obj)
            items[index] = rebuild(items[index], segments[1:])
            return tuple(items)
        if not hasattr(obj, "__dataclass_fields__") or name not in obj.__dataclass_fields__:
            valid = ", ".join(getattr(obj, "__dataclass_fields__", {}))
            raise ScenarioError(f"unknown parameter {name!r}; valid fields: {valid}")
        if len(segments) == 1:
            current = getattr(obj, name)
            if isinstance(current, bool) or not isinstance(current, (int, float)):
                raise ScenarioError(f"parameter {path!r} is not a numeric field")
            return replace(obj, **{name: type(current)(value)})
        return replace(obj, **{name: rebuild(getattr(obj, name), segments[1:])})

    return rebuild(scenario, parts)


def _sweep_seed(master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)


def sweep(
    scenario: Scenario,
    parameter_path: str,
    values: Sequence[float],
    settings: RunSettings | None = None,
    workers: int = 1,
) -> SweepResult:
    """Run the scenario across a parameter grid and collect merit figures.

    Each grid point gets a seed derived from the master seed and its
    index, so results do not depend on worker count or completion order.
    """
    settings = settings or RunSettings()
    values = [float(v) for v in values]
    if not values:
        raise ScenarioError("sweep needs at least one parameter value")

    def run_point(index: int) -> SweepPoint:
        point_scenario = set_parameter(scenario, parameter_path, values[index])
        point_seed = _sweep_seed(settings.seed, index)
        point_settings = replace(settings, seed=point_seed)
        if settings.mode == "mc":
            report = run_monte_carlo(point_scenario, point_settings)
        else:
            report = run_budget(point_scenario, point_settings)
        merit = analysis.merit_report(report, point_scenario)
        return SweepPoint(
            value=values[index],
            merit=merit,
            trigger_rate_hz=report.trigger_rate_hz,
            gate_rate_hz=report.gate_rate_hz,
            seed=report.seed,
        )

    if workers <= 1:
        points = [run_point(i) for i in range(len(values))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(run_point, range(len(values))))
    return SweepResult(
        parameter_path=parameter_path, mode=settings.mode, points=tuple(points)
    )
