"""Command line front end.

Four subcommands share one output convention: a JSON report document on
stdout (optionally copied to a file with ``-o``), and for the tabular
commands an optional CSV file next to it. Exit codes: 0 on success, 1 on
bad input or a failed run, 2 when the event guard trips or, under
``--strict``, when the sync receiver cannot open gates.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analysis import BASIS_LABELS, merit_report
from .engine import (
    EventGuardError,
    RunSettings,
    Scenario,
    ScenarioError,
    run_budget,
    run_monte_carlo,
    sweep,
    visibility_curve,
)
from .scenario_io import resolve_scenario, scenario_hash

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GUARD = 2


class _UsageError(Exception):
    """Bad command line; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for the event
    # guard here, so route usage problems through the normal error path
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qlink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-s", "--scenario", required=True, metavar="FILE_OR_NAME",
                       help="scenario file path or bundled scenario name")
        p.add_argument("-o", "--out", metavar="FILE", help="also write the JSON report here")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default: scenario [run] table, else 12345)")
        p.add_argument("--duration", type=float, default=None, metavar="S",
                       help="integration time in seconds (default: scenario [run] table, else 10)")

    budget = sub.add_parser("budget", help="closed-form rate budget")
    common(budget)
    budget.add_argument("--strict", action="store_true",
                        help="exit 2 if the sync receiver cannot open gates")
    budget.set_defaults(func=_cmd_budget)

    sim = sub.add_parser("sim", help="Monte Carlo run with per-event sampling")
    common(sim)
    sim.add_argument("--strict", action="store_true",
                     help="exit 2 if the sync receiver cannot open gates")
    sim.set_defaults(func=_cmd_sim)

    curve = sub.add_parser("curve", help="analyzer scan at one signal state, with fitted contrast")
    common(curve)
    curve.add_argument("--basis", choices=BASIS_LABELS, default="V",
                       help="signal state to hold while scanning (default V)")
    curve.add_argument("--points", type=int, default=25,
                       help="number of analyzer angles over 0..360 deg (default 25)")
    curve.add_argument("--mc", action="store_true", help="sample the scan instead of the budget")
    curve.add_argument("--csv", metavar="FILE", help="write the scan table here")
    curve.add_argument("--strict", action="store_true",
                       help="exit 2 if the sync receiver cannot open gates")
    curve.set_defaults(func=_cmd_curve)

    swp = sub.add_parser("sweep", help="rerun the budget (or simulation) across a parameter grid")
    common(swp)
    swp.add_argument("--param", required=True, metavar="PATH",
                     help="dotted field path, e.g. source.pump_power_mw_per_crystal or channel.0.length_km")
    swp.add_argument("--values", required=True, metavar="SPEC",
                     help="grid as start:stop:step or a comma list")
    swp.add_argument("--mc", action="store_true", help="simulate each point instead of the budget")
    swp.add_argument("--workers", type=int, default=1, help="thread count (default 1)")
    swp.add_argument("--csv", metavar="FILE", help="write the sweep table here")
    swp.set_defaults(func=_cmd_sweep)

    return parser


def _run_settings(args, run_defaults: dict, mode: str) -> RunSettings:
    duration = args.duration if args.duration is not None else run_defaults.get("duration_s", 10.0)
    seed = args.seed if args.seed is not None else run_defaults.get("seed", 12345)
    return RunSettings(mode=mode, duration_s=duration, seed=seed)


def _merit_or_none(report, scenario: Scenario):
    """Merit figures, or None when a basis never fires (one-crystal source)."""
    try:
        return dataclasses.asdict(merit_report(report, scenario))
    except ValueError:
        return None


def _document(command: str, scenario: Scenario, settings: RunSettings, payload: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "qlink", "version": __version__},
        "command": command,
        "scenario": {"name": scenario.name, "sha256": scenario_hash(scenario)},
        "mode": settings.mode,
        "seed": settings.seed,
        "duration_s": settings.duration_s,
    }
    doc.update(payload)
    return doc


def validate_document(doc: dict) -> list[str]:
    """Check a parsed report document against the output contract."""
    problems: list[str] = []

    def need(key: str, kinds) -> None:
        if key not in doc:
            problems.append(f"missing key '{key}'")
        elif not isinstance(doc[key], kinds):
            problems.append(f"key '{key}' has type {type(doc[key]).__name__}")

    need("schema_version", int)
    need("tool", dict)
    need("command", str)
    need("scenario", dict)
    need("mode", str)
    need("seed", int)
    need("duration_s", (int, float))
    if isinstance(doc.get("schema_version"), int) and doc["schema_version"] < 1:
        problems.append("schema_version must be >= 1")
    tool = doc.get("tool", {})
    if isinstance(tool, dict) and ("name" not in tool or "version" not in tool):
        problems.append("tool table needs name and version")
    scn = doc.get("scenario", {})
    if isinstance(scn, dict):
        digest = scn.get("sha256", "")
        if not (isinstance(digest, str) and len(digest) == 64):
            problems.append("scenario.sha256 must be a 64-char digest")
        if not isinstance(scn.get("name"), str):
            problems.append("scenario.name must be a string")
    command = doc.get("command")
    if command in ("budget", "sim"):
        if not isinstance(doc.get("counts"), dict):
            problems.append("counts table missing")
        if "merit" not in doc:
            problems.append("merit key missing")
    elif command == "curve":
        if not isinstance(doc.get("points"), list) or not isinstance(doc.get("fit"), dict):
            problems.append("curve document needs points and fit")
    elif command == "sweep":
        if not isinstance(doc.get("points"), list) or not isinstance(doc.get("parameter"), str):
            problems.append("sweep document needs parameter and points")
    else:
        problems.append(f"unknown command {command!r}")
    return problems


def _render(doc: dict) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    problems = validate_document(json.loads(text))
    if problems:
        raise RuntimeError("report failed self-check: " + "; ".join(problems))
    return text


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")


def _csv_path(args) -> Path | None:
    explicit = getattr(args, "csv", None)
    if explicit:
        return Path(explicit)
    if args.out:
        derived = Path(args.out).with_suffix(".csv")
        if derived == Path(args.out):
            raise ScenarioError(
                f"JSON output {args.out} already ends in .csv; pass --csv for the table"
            )
        return derived
    return None


def _parse_values(spec: str) -> list[float]:
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ScenarioError("--values range must be start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0.0:
                raise ScenarioError("--values step must be positive")
            count = math.floor((stop - start) / step + 1e-9) + 1
            if count < 1:
                raise ScenarioError("--values range is empty")
            return [start + i * step for i in range(count)]
        values = [float(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise ScenarioError(f"cannot parse --values {spec!r}") from None
    if not values:
        raise ScenarioError("--values list is empty")
    return values


def _cmd_budget(args) -> int:
    scenario, run_defaults = resolve_scenario(args.scenario)
    settings = _run_settings(args, run_defaults, "budget")
    report = run_budget(scenario, settings)
    payload = {
        "counts": dataclasses.asdict(report),
        "merit": _merit_or_none(report, scenario),
    }
    _emit(_render(_document("budget", scenario, settings, payload)), args.out)
    if args.strict and not report.sync_closed:
        print("sync receiver below threshold; gates never open", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def _cmd_sim(args) -> int:
    scenario, run_defaults = resolve_scenario(args.scenario)
    settings = _run_settings(args, run_defaults, "mc")
    report = run_monte_carlo(scenario, settings)
    payload = {
        "counts": dataclasses.asdict(report),
        "merit": _merit_or_none(report, scenario),
    }
    _emit(_render(_document("sim", scenario, settings, payload)), args.out)
    if args.strict and not report.sync_closed:
        print("sync receiver below threshold; gates never open", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def _cmd_curve(args) -> int:
    scenario, run_defaults = resolve_scenario(args.scenario)
    if args.points < 8:
        raise ScenarioError("--points must be at least 8 for a contrast fit")
    settings = _run_settings(args, run_defaults, "mc" if args.mc else "budget")
    if args.strict:
        probe = run_budget(scenario, RunSettings(mode="budget", duration_s=settings.duration_s,
                                                 seed=settings.seed))
        if not probe.sync_closed:
            print("sync receiver below threshold; gates never open", file=sys.stderr)
            return EXIT_GUARD
    angles = tuple(i * 360.0 / (args.points - 1) for i in range(args.points))
    curve = visibility_curve(scenario, signal_state=args.basis, angles_deg=angles,
                             settings=settings)
    points = [
        {
            "angle_deg": angle,
            "hwp_deg": angle / 2.0,
            "basis": args.basis,
            "rate_hz": rate,
            "accidental_rate_hz": acc,
        }
        for angle, rate, acc in zip(curve.angles_deg, curve.coincidence_rates_hz,
                                    curve.accidental_rates_hz)
    ]
    payload = {"points": points, "fit": dataclasses.asdict(curve.fit)}
    _emit(_render(_document("curve", scenario, settings, payload)), args.out)
    csv_path = _csv_path(args)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["angle_deg", "hwp_deg", "basis", "rate_hz"])
            for row in points:
                writer.writerow([row["angle_deg"], row["hwp_deg"], row["basis"], row["rate_hz"]])
    return EXIT_OK


def _cmd_sweep(args) -> int:
    scenario, run_defaults = resolve_scenario(args.scenario)
    if args.workers < 1:
        raise ScenarioError("--workers must be at least 1")
    values = _parse_values(args.values)
    settings = _run_settings(args, run_defaults, "mc" if args.mc else "budget")
    result = sweep(scenario, args.param, values, settings, workers=args.workers)
    points = [
        {
            "value": point.value,
            "seed": point.seed,
            "trigger_rate_hz": point.trigger_rate_hz,
            "gate_rate_hz": point.gate_rate_hz,
            "pair_rate_hz": point.merit.pair_rate_hz,
            "accidental_rate_hz": point.merit.accidental_rate_hz,
            "visibility": dict(point.merit.visibility_by_basis),
            "qber": point.merit.qber,
            "secure": point.merit.secure,
        }
        for point in result.points
    ]
    payload = {"parameter": result.parameter_path, "points": points}
    _emit(_render(_document("sweep", scenario, settings, payload)), args.out)
    csv_path = _csv_path(args)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["param", "R_c", "R_a", "V_H", "V_V", "V_D", "V_A", "QBER", "secure"])
            for row in points:
                writer.writerow([
                    row["value"],
                    row["pair_rate_hz"],
                    row["accidental_rate_hz"],
                    row["visibility"]["H"],
                    row["visibility"]["V"],
                    row["visibility"]["D"],
                    row["visibility"]["A"],
                    row["qber"],
                    "true" if row["secure"] else "false",
                ])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except EventGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
