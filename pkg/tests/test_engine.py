"""Engine checks: budget chain, Monte Carlo, curves, parameter sweeps.

Most tests run on a deliberately clean link (no dark counts, no
background, no hold-off, lossless couplings) where the chain algebra
has exact consequences: linearity in pump power, unit visibility,
brightness round trips. Noise effects are then switched on one at a
time.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from qlink.analysis import merit_report, visibility
from qlink.channel import FiberSpan, FilterElement, PolarizationDrift, SyncChannel
from qlink.detection import FreeRunningDetector, GatedDetector, TimeDiscriminator, SyncReceiver
from qlink.engine import (
    EventGuardError,
    RunSettings,
    Scenario,
    ScenarioError,
    default_analyzer_settings,
    run_budget,
    run_monte_carlo,
    set_parameter,
    sweep,
    validate_scenario,
    visibility_curve,
)
from qlink.source import CompensatorStack, TwoCrystalSource


def clean_scenario(pump_mw: float = 2.0, phase: float = 0.0,
                   delays: tuple = (), **overrides) -> Scenario:
    """Noise-free link: every registered coincidence is a true pair."""
    base = Scenario(
        name="clean",
        source=TwoCrystalSource(
            brightness_pairs_per_s_thz_mw=5.0e4,
            pump_power_mw_per_crystal=pump_mw,
            crystals_pumped=2,
            base_phase_rad=phase,
            background_flux_per_s=0.0,
        ),
        compensators=CompensatorStack(tuple(delays)),
        channel=(),
        sync=SyncChannel(multiplexed=False),
        signal_detector=FreeRunningDetector(efficiency=1.0),
        idler_detector=GatedDetector(dark_prob_per_gate=0.0, holdoff_us=0.0),
        tdc=TimeDiscriminator(enabled=False),
    )
    return replace(base, **overrides) if overrides else base


def basis_visibility(report, basis: str) -> float:
    good = bad = None
    for row in report.settings:
        if row.signal_state == basis and row.role == "matched":
            good = row.coincidence_rate_hz
        if row.signal_state == basis and row.role == "orthogonal":
            bad = row.coincidence_rate_hz
    return visibility(good, bad)


class TestValidation:
    def test_clean_scenario_is_runnable(self):
        assert validate_scenario(clean_scenario()) == []

    def test_energy_conservation_violation(self):
        scn = clean_scenario()
        bad = replace(scn, source=replace(scn.source, pump_wavelength_nm=532.0,
                                          signal_wavelength_nm=800.0,
                                          idler_wavelength_nm=1600.0))
        problems = validate_scenario(bad)
        assert any("energy conservation" in p for p in problems)
        with pytest.raises(ScenarioError, match="energy conservation"):
            run_budget(bad)

    def test_discriminator_window_wider_than_gate(self):
        scn = clean_scenario(
            tdc=TimeDiscriminator(enabled=True, overlap_window_ns=3.0),
            idler_detector=GatedDetector(gate_width_ns=2.5),
        )
        assert any("overlap window" in p for p in validate_scenario(scn))

    def test_negative_losses_flagged(self):
        scn = clean_scenario(alice_coupling_loss_db=-1.0)
        assert any("alice_coupling_loss_db" in p for p in validate_scenario(scn))

    def test_sync_wavelength_must_avoid_quantum_passband(self):
        scn = clean_scenario(
            sync=SyncChannel(multiplexed=True, wavelength_nm=1555.05),
            channel=(FilterElement(center_nm=1555.0, fwhm_nm=0.5),),
        )
        assert any("passband" in p for p in validate_scenario(scn))

    def test_run_settings_validation(self):
        with pytest.raises(ValueError):
            RunSettings(mode="fast")
        with pytest.raises(ValueError):
            RunSettings(duration_s=0.0)

    def test_unknown_signal_state_rejected(self):
        with pytest.raises(ScenarioError, match="unknown signal state"):
            run_budget(clean_scenario(), RunSettings(analyzer_settings=(("X", 0.0),)))


class TestDefaultSettings:
    def test_balanced_source_gets_matched_and_orthogonal_rows(self):
        rows = default_analyzer_settings(clean_scenario().source)
        assert len(rows) == 8
        report = run_budget(clean_scenario())
        roles = [row.role for row in report.settings]
        assert roles.count("matched") == 4
        assert roles.count("orthogonal") == 4

    def test_single_crystal_alignment_follows_the_source(self):
        src = TwoCrystalSource(
            brightness_pairs_per_s_thz_mw=5e4,
            pump_power_mw_per_crystal=2.0,
            crystals_pumped=1,
        )
        rows = default_analyzer_settings(src)
        # one pumped crystal emits the vertical product state; aligned
        # rows all sit at 90 degrees whatever the trigger state
        assert all(angle == 90.0 for _, angle in rows[:4])
        assert all(angle == 0.0 for _, angle in rows[4:])


class TestBudget:
    def test_zero_pump_kills_every_rate(self):
        report = run_budget(clean_scenario(pump_mw=0.0))
        assert report.trigger_rate_hz == 0.0
        assert report.gate_rate_hz == 0.0
        assert report.pair_rate_hz == 0.0
        for row in report.settings:
            assert row.coincidence_rate_hz == 0.0
            assert row.singles_rate_hz == 0.0

    def test_linear_in_pump_power(self):
        lo = run_budget(clean_scenario(pump_mw=2.0))
        hi = run_budget(clean_scenario(pump_mw=4.0))
        assert hi.trigger_rate_hz == pytest.approx(2.0 * lo.trigger_rate_hz, rel=1e-9)
        assert hi.pair_rate_hz == pytest.approx(2.0 * lo.pair_rate_hz, rel=1e-9)
        for row_lo, row_hi in zip(lo.settings, hi.settings):
            assert row_hi.coincidence_rate_hz == pytest.approx(
                2.0 * row_lo.coincidence_rate_hz, rel=1e-9
            )

    def test_brightness_round_trip(self):
        scn = clean_scenario()
        merit = merit_report(run_budget(scn), scn)
        assert merit.brightness_pairs_per_s_thz_mw == pytest.approx(
            scn.source.brightness_pairs_per_s_thz_mw, rel=1e-9
        )

    def test_diagonal_visibility_is_mu_cos_phi(self):
        # mu set by the compensator mismatch, phi by the source phase
        for delays, mu in (((), 1.0), ((11.0,), 0.25)):
            for phi in (0.0, 0.3, 1.0):
                report = run_budget(clean_scenario(phase=phi, delays=delays))
                assert basis_visibility(report, "D") == pytest.approx(
                    mu * math.cos(phi), abs=1e-9
                )
                assert basis_visibility(report, "H") == pytest.approx(1.0, abs=1e-12)

    def test_temperature_retunes_the_phase(self):
        scn = clean_scenario()
        for delta_c in (0.0, 0.01, 0.025, 0.05):
            warmed = set_parameter(scn, "source.temperature_offset_c", delta_c)
            expected = math.cos(math.pi * delta_c / 0.1)
            report = run_budget(warmed)
            assert basis_visibility(report, "D") == pytest.approx(expected, abs=1e-9)

    def test_longer_fiber_means_fewer_pairs(self):
        rates = []
        for km in (0.0, 5.0, 15.0, 30.0):
            scn = clean_scenario(channel=(FiberSpan(length_km=km),))
            rates.append(run_budget(scn).pair_rate_hz)
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_sync_failure_zeroes_gates_not_singles(self):
        scn = clean_scenario(
            sync=SyncChannel(multiplexed=True),
            channel=(FiberSpan(length_km=100.0),),
        )
        report = run_budget(scn)
        assert not report.sync_closed
        assert report.pair_rate_hz == 0.0
        assert report.gate_rate_hz == 0.0
        assert report.trigger_rate_hz > 0.0
        assert all(row.singles_rate_hz > 0.0 for row in report.settings)
        assert any("sync" in w for w in report.warnings)

    def test_gate_delay_offset_steps_the_capture(self):
        # no fiber: arrivals have no spread, so the gate either contains
        # them or misses them outright
        centered = run_budget(clean_scenario())
        nudged = run_budget(
            clean_scenario(sync_receiver=SyncReceiver(gate_delay_offset_ns=1.0))
        )
        missed = run_budget(
            clean_scenario(sync_receiver=SyncReceiver(gate_delay_offset_ns=1.5))
        )
        assert nudged.pair_rate_hz == pytest.approx(centered.pair_rate_hz, rel=1e-12)
        assert missed.pair_rate_hz == 0.0

    def test_gate_delay_offset_with_dispersion_loses_pairs(self):
        chain = (FiberSpan(length_km=20.0),)
        centered = run_budget(clean_scenario(channel=chain))
        offset = run_budget(
            clean_scenario(
                channel=chain, sync_receiver=SyncReceiver(gate_delay_offset_ns=1.0)
            )
        )
        assert 0.0 < offset.pair_rate_hz < centered.pair_rate_hz

    def test_drift_in_budget_mode_warns(self):
        scn = clean_scenario(drift=PolarizationDrift(drift_rate_rad_per_min=0.5))
        report = run_budget(scn)
        assert any("drift" in w for w in report.warnings)


class TestMonteCarlo:
    def test_coincidences_never_exceed_gates(self):
        report = run_monte_carlo(clean_scenario(), RunSettings(mode="mc", duration_s=2.0))
        for row in report.settings:
            assert row.coincidences <= row.gates_opened

    def test_matches_budget_within_counting_noise(self):
        scn = clean_scenario()
        budget = run_budget(scn, RunSettings(duration_s=5.0))
        mc = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=5.0, seed=99))
        for row_b, row_m in zip(budget.settings, mc.settings):
            expected = row_b.coincidences
            sigma = math.sqrt(max(expected, 1.0))
            assert abs(row_m.coincidences - expected) <= 4.0 * sigma

    def test_zero_pump_is_all_zeros(self):
        report = run_monte_carlo(
            clean_scenario(pump_mw=0.0), RunSettings(mode="mc", duration_s=1.0)
        )
        assert report.pair_rate_hz == 0.0
        assert report.trigger_rate_hz == 0.0

    def test_deterministic_for_a_seed(self):
        scn = clean_scenario()
        first = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=1.0, seed=7))
        again = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=1.0, seed=7))
        other = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=1.0, seed=8))
        assert first == again
        assert first != other

    def test_event_guard_trips(self):
        scn = clean_scenario(
            source=replace(clean_scenario().source, brightness_pairs_per_s_thz_mw=1e9)
        )
        with pytest.raises(EventGuardError):
            run_monte_carlo(scn, RunSettings(mode="mc", duration_s=10.0))

    def test_sync_failure_keeps_singles(self):
        scn = clean_scenario(
            sync=SyncChannel(multiplexed=True),
            channel=(FiberSpan(length_km=100.0),),
        )
        report = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=1.0))
        assert not report.sync_closed
        assert report.pair_rate_hz == 0.0
        assert report.trigger_rate_hz > 0.0

    def test_gate_delay_offset_miss_drops_everything(self):
        scn = clean_scenario(sync_receiver=SyncReceiver(gate_delay_offset_ns=1.5))
        report = run_monte_carlo(scn, RunSettings(mode="mc", duration_s=1.0))
        assert report.pair_rate_hz == 0.0

    def test_polarization_drift_degrades_visibility(self):
        steady = clean_scenario()
        drifting = clean_scenario(
            drift=PolarizationDrift(drift_rate_rad_per_min=5.0)
        )
        settings = RunSettings(mode="mc", duration_s=5.0, seed=31)
        vis_steady = basis_visibility(run_monte_carlo(steady, settings), "D")
        vis_drift = basis_visibility(run_monte_carlo(drifting, settings), "D")
        assert vis_drift < vis_steady - 0.1


class TestVisibilityCurveRuns:
    def test_budget_curve_period_is_180_degrees(self):
        curve = visibility_curve(clean_scenario(phase=0.4), signal_state="D")
        rates = curve.coincidence_rates_hz
        for i in range(12):
            assert rates[i] == pytest.approx(rates[i + 12], rel=1e-12)

    def test_ideal_diagonal_curve(self):
        curve = visibility_curve(clean_scenario(), signal_state="D")
        assert curve.fit.method == "cosine_fit"
        assert curve.fit.visibility == pytest.approx(1.0, abs=1e-6)
        assert curve.fit.phase_deg == pytest.approx(45.0, abs=1e-6)

    def test_monte_carlo_curve_tracks_budget(self):
        scn = clean_scenario(phase=0.5)
        budget = visibility_curve(scn, signal_state="D")
        sampled = visibility_curve(
            scn, signal_state="D",
            settings=RunSettings(mode="mc", duration_s=4.0, seed=11),
        )
        assert sampled.fit.visibility == pytest.approx(
            budget.fit.visibility, abs=0.05
        )

    def test_angle_grid_must_increase(self):
        with pytest.raises(ScenarioError, match="strictly increasing"):
            visibility_curve(clean_scenario(), angles_deg=[0.0, 10.0, 10.0, 30.0])


class TestSetParameter:
    def test_replaces_nested_field(self):
        scn = clean_scenario()
        warmer = set_parameter(scn, "source.pump_power_mw_per_crystal", 3.5)
        assert warmer.source.pump_power_mw_per_crystal == 3.5
        assert scn.source.pump_power_mw_per_crystal == 2.0

    def test_channel_indexing(self):
        scn = clean_scenario(channel=(FiberSpan(length_km=1.0), FilterElement()))
        longer = set_parameter(scn, "channel.0.length_km", 9.0)
        assert longer.channel[0].length_km == 9.0
        assert longer.channel[1] == scn.channel[1]

    def test_integer_fields_stay_integers(self):
        scn = set_parameter(clean_scenario(), "source.crystals_pumped", 1.0)
        assert scn.source.crystals_pumped == 1
        assert isinstance(scn.source.crystals_pumped, int)

    def test_unknown_field_names_the_valid_ones(self):
        with pytest.raises(ScenarioError, match="pump_power_mw_per_crystal"):
            set_parameter(clean_scenario(), "source.pump_power", 1.0)

    def test_non_numeric_leaves_rejected(self):
        with pytest.raises(ScenarioError):
            set_parameter(clean_scenario(), "idler_detector.holdoff_semantics", 1.0)
        with pytest.raises(ScenarioError):
            set_parameter(clean_scenario(), "tdc.enabled", 1.0)

    def test_bad_channel_index(self):
        scn = clean_scenario(channel=(FiberSpan(length_km=1.0),))
        with pytest.raises(ScenarioError):
            set_parameter(scn, "channel.4.length_km", 2.0)


class TestSweep:
    def test_budget_sweep_matches_individual_runs(self):
        scn = clean_scenario()
        settings = RunSettings(mode="budget", duration_s=1.0)
        result = sweep(scn, "source.pump_power_mw_per_crystal", (1.0, 2.0, 3.0), settings)
        assert result.parameter_path == "source.pump_power_mw_per_crystal"
        for point in result.points:
            probe = set_parameter(scn, "source.pump_power_mw_per_crystal", point.value)
            direct = merit_report(run_budget(probe, settings), probe)
            assert point.merit.pair_rate_hz == pytest.approx(
                direct.pair_rate_hz, rel=1e-12
            )

    def test_rates_grow_with_pump(self):
        result = sweep(
            clean_scenario(), "source.pump_power_mw_per_crystal", (1.0, 2.0, 4.0)
        )
        rates = [p.merit.pair_rate_hz for p in result.points]
        assert rates[0] < rates[1] < rates[2]

    def test_worker_count_does_not_change_results(self):
        scn = clean_scenario()
        settings = RunSettings(mode="mc", duration_s=0.5, seed=77)
        serial = sweep(scn, "source.pump_power_mw_per_crystal", (1.0, 2.0, 3.0, 4.0),
                       settings, workers=1)
        threaded = sweep(scn, "source.pump_power_mw_per_crystal", (1.0, 2.0, 3.0, 4.0),
                         settings, workers=4)
        assert serial == threaded

    def test_points_get_distinct_reproducible_seeds(self):
        scn = clean_scenario()
        settings = RunSettings(mode="mc", duration_s=0.5, seed=5)
        first = sweep(scn, "source.pump_power_mw_per_crystal", (1.0, 2.0), settings)
        again = sweep(scn, "source.pump_power_mw_per_crystal", (1.0, 2.0), settings)
        seeds = [p.seed for p in first.points]
        assert len(set(seeds)) == len(seeds)
        assert [p.seed for p in again.points] == seeds
