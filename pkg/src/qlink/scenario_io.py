"""Scenario files: TOML loading, canonical serialization, bundled presets.

A scenario file is TOML with one table per subsystem::

    name = "bench_test"

    [source]            # pair source, plus coupling_loss_db on the local arm
    [compensators]      # birefringence compensator stack
    [[channel]]         # ordered chain elements, each tagged kind = "fiber" | "filter"
    [sync]              # classical sync channel, plus the receiver keys
    [detectors.signal]  # free-running trigger detector
    [detectors.idler]   # gated remote detector, plus analyzer_loss_db
    [tdc]               # overlap discriminator
    [drift]             # slow polarization drift
    [run]               # optional defaults: duration_s, seed

Every key is optional except the two source requirements (brightness and
pump power). Unknown keys are rejected by name so typos fail loudly.

The canonical form of a scenario is the nested dict produced by
``scenario_to_dict``; ``scenario_from_dict`` inverts it exactly, and the
sha256 of its sorted JSON (``scenario_hash``) identifies the scenario in
report documents regardless of file formatting.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from .channel import FiberSpan, FilterElement, PolarizationDrift, SyncChannel
from .detection import (
    FreeRunningDetector,
    GatedDetector,
    SyncReceiver,
    TimeDiscriminator,
)
from .engine import Scenario, ScenarioError
from .source import CompensatorStack, TwoCrystalSource

import dataclasses

__all__ = [
    "load_scenario",
    "loads_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "canonical_json",
    "scenario_hash",
    "bundled_scenario_names",
    "resolve_scenario",
]

_RUN_KEYS = frozenset({"duration_s", "seed"})
_TOP_LEVEL = frozenset(
    {"name", "source", "compensators", "channel", "sync", "detectors", "tdc", "drift", "run"}
)

# keys that live in a component's table but map onto Scenario-level or
# sibling fields
_SOURCE_EXTRAS = frozenset({"coupling_loss_db"})
_IDLER_EXTRAS = frozenset({"analyzer_loss_db"})
_SYNC_EXTRAS = frozenset({"receiver_threshold_dbm", "gate_delay_offset_ns"})

_CHANNEL_KINDS = {"fiber": FiberSpan, "filter": FilterElement}


def _as_float(where: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_int(where: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {type(value).__name__}")
    return value


def _as_bool(where: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(f"{where}: expected true/false, got {type(value).__name__}")
    return value


def _as_str(where: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ScenarioError(f"{where}: expected a string, got {type(value).__name__}")
    return value


def _as_float_tuple(where: str, value: Any) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ScenarioError(f"{where}: expected an array of numbers")
    return tuple(_as_float(f"{where}[{i}]", v) for i, v in enumerate(value))


_CONVERTERS: dict[str, Callable[[str, Any], Any]] = {
    "float": _as_float,
    "float | None": _as_float,
    "int": _as_int,
    "bool": _as_bool,
    "str": _as_str,
    "tuple[float, ...]": _as_float_tuple,
}


def _table(doc: dict, key: str, where: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioError(f"{where}: expected a table")
    return value


def _build(cls: type, table: dict, where: str, also_valid: frozenset[str] = frozenset()) -> Any:
    """Construct a component dataclass from a TOML table, strictly."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in table.items():
        spot = f"{where}.{key}"
        if key not in fields:
            valid = ", ".join(sorted(set(fields) | also_valid))
            raise ScenarioError(f"unknown key '{spot}' (valid keys: {valid})")
        kwargs[key] = _CONVERTERS[fields[key].type](spot, raw)
    try:
        return cls(**kwargs)
    except TypeError:
        required = [
            f.name
            for f in fields.values()
            if f.default is dataclasses.MISSING
            and f.default_factory is dataclasses.MISSING
            and f.name not in kwargs
        ]
        raise ScenarioError(f"{where}: missing required keys: {', '.join(required)}") from None
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _split(table: dict, extras: frozenset[str]) -> tuple[dict, dict]:
    own = {k: v for k, v in table.items() if k not in extras}
    extra = {k: v for k, v in table.items() if k in extras}
    return own, extra


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from the parsed document, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a table")
    for key in doc:
        if key not in _TOP_LEVEL:
            valid = ", ".join(sorted(_TOP_LEVEL))
            raise ScenarioError(f"unknown key '{key}' (valid keys: {valid})")

    name = doc.get("name", "custom")
    if not isinstance(name, str):
        raise ScenarioError("name: expected a string")

    src_table, src_extra = _split(_table(doc, "source", "source"), _SOURCE_EXTRAS)
    source = _build(TwoCrystalSource, src_table, "source", _SOURCE_EXTRAS)
    alice_db = _as_float("source.coupling_loss_db", src_extra.get("coupling_loss_db", 0.0))

    compensators = _build(CompensatorStack, _table(doc, "compensators", "compensators"), "compensators")

    chain_doc = doc.get("channel", [])
    if not isinstance(chain_doc, list):
        raise ScenarioError("channel: expected an array of tables ([[channel]])")
    chain = []
    for index, entry in enumerate(chain_doc):
        where = f"channel[{index}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected a table")
        kind = entry.get("kind")
        if kind not in _CHANNEL_KINDS:
            raise ScenarioError(
                f"{where}.kind: got {kind!r}, expected one of {sorted(_CHANNEL_KINDS)}"
            )
        body = {k: v for k, v in entry.items() if k != "kind"}
        chain.append(_build(_CHANNEL_KINDS[kind], body, where))

    sync_table, sync_extra = _split(_table(doc, "sync", "sync"), _SYNC_EXTRAS)
    sync = _build(SyncChannel, sync_table, "sync", _SYNC_EXTRAS)
    receiver = SyncReceiver(
        threshold_dbm=_as_float(
            "sync.receiver_threshold_dbm", sync_extra.get("receiver_threshold_dbm", -23.0)
        ),
        gate_delay_offset_ns=_as_float(
            "sync.gate_delay_offset_ns", sync_extra.get("gate_delay_offset_ns", 0.0)
        ),
    )

    det_doc = _table(doc, "detectors", "detectors")
    for key in det_doc:
        if key not in ("signal", "idler"):
            raise ScenarioError(f"unknown key 'detectors.{key}' (valid keys: idler, signal)")
    signal_detector = _build(
        FreeRunningDetector, _table(det_doc, "signal", "detectors.signal"), "detectors.signal"
    )
    idler_table, idler_extra = _split(
        _table(det_doc, "idler", "detectors.idler"), _IDLER_EXTRAS
    )
    idler_detector = _build(GatedDetector, idler_table, "detectors.idler", _IDLER_EXTRAS)
    bob_db = _as_float(
        "detectors.idler.analyzer_loss_db", idler_extra.get("analyzer_loss_db", 0.0)
    )

    tdc = _build(TimeDiscriminator, _table(doc, "tdc", "tdc"), "tdc")
    drift = _build(PolarizationDrift, _table(doc, "drift", "drift"), "drift")

    run_doc = _table(doc, "run", "run")
    for key in run_doc:
        if key not in _RUN_KEYS:
            raise ScenarioError(f"unknown key 'run.{key}' (valid keys: duration_s, seed)")

    try:
        return Scenario(
            name=name,
            source=source,
            compensators=compensators,
            channel=tuple(chain),
            sync=sync,
            signal_detector=signal_detector,
            idler_detector=idler_detector,
            tdc=tdc,
            sync_receiver=receiver,
            drift=drift,
            alice_coupling_loss_db=alice_db,
            bob_analyzer_loss_db=bob_db,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def run_defaults_from_dict(doc: dict) -> dict:
    """Extract the optional [run] table: duration_s and seed defaults."""
    run_doc = _table(doc, "run", "run")
    out: dict[str, Any] = {}
    if "duration_s" in run_doc:
        out["duration_s"] = _as_float("run.duration_s", run_doc["duration_s"])
    if "seed" in run_doc:
        out["seed"] = _as_int("run.seed", run_doc["seed"])
    return out


def loads_scenario(text: str, label: str = "<string>") -> tuple[Scenario, dict]:
    """Parse scenario TOML text; returns (scenario, run defaults)."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{label}: {exc}") from None
    return scenario_from_dict(doc), run_defaults_from_dict(doc)


def load_scenario(path: str | Path) -> tuple[Scenario, dict]:
    """Load a scenario file from disk; returns (scenario, run defaults)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    return loads_scenario(text, label=str(path))


def bundled_scenario_names() -> tuple[str, ...]:
    """Names of the scenarios shipped inside the package."""
    root = resources.files("qlink") / "scenarios"
    return tuple(sorted(p.name[: -len(".scn")] for p in root.iterdir() if p.name.endswith(".scn")))


def resolve_scenario(spec: str) -> tuple[Scenario, dict]:
    """Load a scenario by file path or by bundled name."""
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    name = spec[: -len(".scn")] if spec.endswith(".scn") else spec
    bundled = bundled_scenario_names()
    if name in bundled:
        text = (resources.files("qlink") / "scenarios" / f"{name}.scn").read_text("utf-8")
        return loads_scenario(text, label=f"bundled:{name}")
    raise ScenarioError(
        f"no scenario file at '{spec}' and no bundled scenario of that name "
        f"(bundled: {', '.join(bundled)})"
    )


def _component_dict(obj: Any) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical nested-dict form; inverse of scenario_from_dict."""
    source = _component_dict(scenario.source)
    source["coupling_loss_db"] = scenario.alice_coupling_loss_db
    sync = _component_dict(scenario.sync)
    sync["receiver_threshold_dbm"] = scenario.sync_receiver.threshold_dbm
    sync["gate_delay_offset_ns"] = scenario.sync_receiver.gate_delay_offset_ns
    idler = _component_dict(scenario.idler_detector)
    idler["analyzer_loss_db"] = scenario.bob_analyzer_loss_db
    chain = []
    for element in scenario.channel:
        kind = "fiber" if isinstance(element, FiberSpan) else "filter"
        chain.append({"kind": kind, **_component_dict(element)})
    return {
        "name": scenario.name,
        "source": source,
        "compensators": _component_dict(scenario.compensators),
        "channel": chain,
        "sync": sync,
        "detectors": {
            "signal": _component_dict(scenario.signal_detector),
            "idler": idler,
        },
        "tdc": _component_dict(scenario.tdc),
        "drift": _component_dict(scenario.drift),
    }


def canonical_json(scenario: Scenario) -> str:
    """Sorted, compact JSON of the canonical dict."""
    return json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario: Scenario) -> str:
    """sha256 of the canonical JSON; stable across file formatting."""
    return hashlib.sha256(canonical_json(scenario).encode("utf-8")).hexdigest()
