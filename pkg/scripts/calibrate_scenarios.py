"""Solve the calibrated knobs in the bundled scenario files.

The three shipped scenarios reproduce measured operating points of a
real link. A few parameters of that apparatus were never published
(analyzer bench insertion loss, broadband background level, residual
pump phase, sync-pulse gate overlap), so we back-fill them here by
solving the budget model against the published rates and visibilities.
Run this after touching the budget math and paste the printed values
into src/qlink/scenarios/*.scn; every such value carries a
"# calibrated" marker there.

Targets (reference operating points):
  local, one crystal at 3 mW:  trigger rate 0.8e6/s, coincidences
      25e3/s, accidentals 0.9e3/s.
  100 m link, two crystals at 4 mW:  trigger rate 1.1e6/s,
      coincidences 8.33e3/s, visibility 0.92 (H/V) and 0.88 (D/A).
  27 km link, same source:  visibility 0.85 (H/V) and 0.84 (D/A);
      coincidence rate must land in [0.825e3, 1.375e3] on its own.
"""
from __future__ import annotations

import math
from dataclasses import replace

from qlink.analysis import merit_report
from qlink.channel import FiberSpan, FilterElement, SyncChannel
from qlink.detection import GatedDetector, TimeDiscriminator
from qlink.engine import RunSettings, Scenario, run_budget
from qlink.source import CompensatorStack, TwoCrystalSource


def solve(update, read, target, lo, hi, tol=1e-10, iters=200) -> float:
    """Bisection on a monotone scalar knob; returns the solved value."""
    f_lo = read(update(lo)) - target
    f_hi = read(update(hi)) - target
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise RuntimeError(f"no sign change on [{lo}, {hi}]: {f_lo:+.3g} {f_hi:+.3g}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = read(update(mid)) - target
        if abs(f_mid) < tol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def budget_numbers(scn: Scenario) -> dict:
    rep = run_budget(scn, RunSettings())
    numbers = {
        "trigger": rep.trigger_rate_hz,
        "rc": rep.pair_rate_hz,
        "ra": rep.accidental_rate_hz,
        "vh": float("nan"),
        "vd": float("nan"),
        "qber": float("nan"),
    }
    if min(scn.source.pair_weights()) > 0.0:
        # per-basis merit only exists when all four outputs fire
        merit = merit_report(rep, scn)
        numbers["vh"] = merit.visibility_by_basis["H"]
        numbers["vd"] = merit.visibility_by_basis["D"]
        numbers["qber"] = merit.qber
    return numbers


def _with_trigger(scn: Scenario, target_hz: float) -> Scenario:
    """Rescale source brightness until the budget trigger rate hits target."""
    for _ in range(4):
        trig = budget_numbers(scn)["trigger"]
        scn = replace(
            scn,
            source=replace(
                scn.source,
                brightness_pairs_per_s_thz_mw=scn.source.brightness_pairs_per_s_thz_mw
                * target_hz
                / trig,
            ),
        )
    return scn


def calibrate_local() -> Scenario:
    scn = Scenario(
        name="one_crystal_local",
        source=TwoCrystalSource(
            brightness_pairs_per_s_thz_mw=1.6e6,
            pump_power_mw_per_crystal=3.0,
            crystals_pumped=1,
            background_flux_per_s=6.2e6,
        ),
        compensators=CompensatorStack((11.0, -15.0, 4.0)),
        channel=(),
        sync=SyncChannel(multiplexed=False),
        idler_detector=GatedDetector(dark_prob_per_gate=2.0e-5),
        tdc=TimeDiscriminator(enabled=False),
        alice_coupling_loss_db=6.5,
    )
    for _ in range(3):
        # coupling loss cancels out of the coincidence rate at fixed
        # brightness, so every probe re-pins the trigger rate first
        scn = replace(
            scn,
            alice_coupling_loss_db=solve(
                lambda v: _with_trigger(replace(scn, alice_coupling_loss_db=v), 0.8e6),
                lambda s: budget_numbers(s)["rc"] - budget_numbers(s)["ra"],
                25.0e3 - 0.9e3,
                3.0,
                9.0,
                tol=1e-6,
            ),
        )
        scn = _with_trigger(scn, 0.8e6)
        scn = replace(
            scn,
            source=replace(
                scn.source,
                background_flux_per_s=solve(
                    lambda v: replace(scn, source=replace(scn.source, background_flux_per_s=v)),
                    lambda s: budget_numbers(s)["ra"],
                    0.9e3,
                    1.0e5,
                    5.0e7,
                    tol=1e-6,
                ),
            ),
        )
    return scn


def calibrate_100m(alice_db: float) -> Scenario:
    scn = Scenario(
        name="link_100m",
        source=TwoCrystalSource(
            brightness_pairs_per_s_thz_mw=8.7e5,
            pump_power_mw_per_crystal=4.0,
            crystals_pumped=2,
            base_phase_rad=0.30,
            background_flux_per_s=1.0e7,
        ),
        compensators=CompensatorStack((11.0, -15.0, 4.0)),
        channel=(FiberSpan(length_km=0.1), FilterElement(insertion_loss_db=1.0)),
        sync=SyncChannel(multiplexed=True),
        idler_detector=GatedDetector(dark_prob_per_gate=2.0e-5),
        tdc=TimeDiscriminator(enabled=True),
        alice_coupling_loss_db=alice_db,
        bob_analyzer_loss_db=5.3,
    )
    for _ in range(6):
        scn = replace(
            scn,
            source=replace(
                scn.source,
                brightness_pairs_per_s_thz_mw=scn.source.brightness_pairs_per_s_thz_mw
                * 1.1e6
                / budget_numbers(scn)["trigger"],
            ),
        )
        scn = replace(
            scn,
            bob_analyzer_loss_db=solve(
                lambda v: replace(scn, bob_analyzer_loss_db=v),
                lambda s: budget_numbers(s)["rc"],
                25.0e3 / 3.0,
                1.0,
                12.0,
                tol=1e-5,
            ),
        )
        scn = replace(
            scn,
            source=replace(
                scn.source,
                background_flux_per_s=solve(
                    lambda v: replace(scn, source=replace(scn.source, background_flux_per_s=v)),
                    lambda s: budget_numbers(s)["vh"],
                    0.92,
                    1.0e5,
                    1.0e8,
                    tol=1e-9,
                ),
            ),
        )
        ratio = 0.88 / budget_numbers(scn)["vh"]
        scn = replace(
            scn, source=replace(scn.source, base_phase_rad=math.acos(ratio))
        )
    return scn


def calibrate_27km(base: Scenario) -> Scenario:
    scn = replace(
        base,
        name="link_27km",
        channel=(
            FiberSpan(length_km=27.0),
            FilterElement(insertion_loss_db=1.0),
            FilterElement(insertion_loss_db=1.0),
            FilterElement(insertion_loss_db=1.0),
            FilterElement(insertion_loss_db=1.0),
        ),
        sync=replace(base.sync, gate_overlap_fraction=0.15),
    )
    for _ in range(6):
        scn = replace(
            scn,
            sync=replace(
                scn.sync,
                gate_overlap_fraction=solve(
                    lambda v: replace(scn, sync=replace(scn.sync, gate_overlap_fraction=v)),
                    lambda s: budget_numbers(s)["vh"],
                    0.85,
                    0.0,
                    1.0,
                    tol=1e-9,
                ),
            ),
        )
        ratio = 0.84 / budget_numbers(scn)["vh"]
        scn = replace(
            scn, source=replace(scn.source, base_phase_rad=math.acos(ratio))
        )
    return scn


def report(scn: Scenario) -> None:
    n = budget_numbers(scn)
    print(f"--- {scn.name}")
    print(f"  brightness_pairs_per_s_thz_mw = {scn.source.brightness_pairs_per_s_thz_mw!r}")
    print(f"  background_flux_per_s         = {scn.source.background_flux_per_s!r}")
    print(f"  base_phase_rad                = {scn.source.base_phase_rad!r}")
    print(f"  alice_coupling_loss_db        = {scn.alice_coupling_loss_db!r}")
    print(f"  bob_analyzer_loss_db          = {scn.bob_analyzer_loss_db!r}")
    print(f"  gate_overlap_fraction         = {scn.sync.gate_overlap_fraction!r}")
    print(
        f"  -> trigger {n['trigger']:.6g}  rc {n['rc']:.6g}  ra {n['ra']:.6g}\n"
        f"     vis H {n['vh']:.6f}  D {n['vd']:.6f}  qber {n['qber']:.6f}"
    )


def main() -> None:
    local = calibrate_local()
    report(local)
    m100 = calibrate_100m(local.alice_coupling_loss_db)
    report(m100)
    km27 = calibrate_27km(m100)
    report(km27)


if __name__ == "__main__":
    main()
