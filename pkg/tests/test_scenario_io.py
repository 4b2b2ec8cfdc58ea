"""Scenario file loading, serialization, hashing, bundled lookup."""
from __future__ import annotations

import json

import pytest

from qlink.engine import Scenario, ScenarioError
from qlink.scenario_io import (
    bundled_scenario_names,
    canonical_json,
    load_scenario,
    loads_scenario,
    resolve_scenario,
    scenario_from_dict,
    scenario_hash,
    scenario_to_dict,
)

MINIMAL = """
name = "tabletop"

[source]
brightness_pairs_per_s_thz_mw = 2.5e4
pump_power_mw_per_crystal = 3.0
"""

FULL = """
name = "short-haul"

[source]
brightness_pairs_per_s_thz_mw = 8.0e5
pump_power_mw_per_crystal = 4.0
coupling_loss_db = 5.5
base_phase_rad = 0.2

[compensators]
delays_ps = [11.0, -15.0, 4.0]

[[channel]]
kind = "fiber"
length_km = 0.1

[[channel]]
kind = "filter"
insertion_loss_db = 1.0

[sync]
multiplexed = true
receiver_threshold_dbm = -23.0
gate_delay_offset_ns = 0.5
transmitter_filter_db = [20.0, 40.0]

[detectors.signal]
efficiency = 0.6

[detectors.idler]
efficiency = 0.18
analyzer_loss_db = 3.0

[tdc]
enabled = true
overlap_window_ns = 1.5

[drift]
drift_rate_rad_per_min = 0.01

[run]
duration_s = 2.0
seed = 99
"""


class TestLoading:
    def test_minimal_file_fills_defaults(self):
        scn, run = loads_scenario(MINIMAL, label="inline")
        assert scn.name == "tabletop"
        assert scn.source.crystals_pumped == 2
        assert scn.channel == ()
        assert run == {}

    def test_full_file_maps_every_section(self):
        scn, run = loads_scenario(FULL, label="inline")
        assert scn.alice_coupling_loss_db == 5.5
        assert scn.bob_analyzer_loss_db == 3.0
        assert scn.compensators.delays_ps == (11.0, -15.0, 4.0)
        assert scn.channel[0].length_km == 0.1
        assert scn.channel[1].insertion_loss_db == 1.0
        assert scn.sync_receiver.threshold_dbm == -23.0
        assert scn.sync_receiver.gate_delay_offset_ns == 0.5
        assert scn.sync.transmitter_filter_db == (20.0, 40.0)
        assert scn.tdc.enabled is True
        assert scn.drift.drift_rate_rad_per_min == 0.01
        assert run == {"duration_s": 2.0, "seed": 99}

    def test_unknown_key_is_named_with_the_valid_set(self):
        bad = MINIMAL.replace(
            "pump_power_mw_per_crystal = 3.0",
            "pump_power_mw_per_crystal = 3.0\npump = 3.0",
        )
        with pytest.raises(ScenarioError) as err:
            loads_scenario(bad, label="x")
        assert "unknown key 'source.pump'" in str(err.value)
        assert "coupling_loss_db" in str(err.value)

    def test_missing_required_key(self):
        bad = MINIMAL.replace("brightness_pairs_per_s_thz_mw = 2.5e4\n", "")
        with pytest.raises(ScenarioError, match="missing required keys"):
            loads_scenario(bad, label="x")

    def test_component_validation_names_the_section(self):
        bad = FULL.replace("length_km = 0.1", "length_km = -5.0")
        with pytest.raises(ScenarioError, match=r"channel\[0\]"):
            loads_scenario(bad, label="x")

    def test_channel_entry_needs_known_kind(self):
        bad = FULL.replace('kind = "fiber"', 'kind = "mirror"')
        with pytest.raises(ScenarioError, match="mirror"):
            loads_scenario(bad, label="x")

    def test_toml_syntax_error_carries_label_and_line(self):
        with pytest.raises(ScenarioError) as err:
            loads_scenario("[source\nx = 1\n", label="broken.scn")
        message = str(err.value)
        assert "broken.scn" in message
        assert "line" in message

    def test_bool_rejected_where_float_expected(self):
        bad = MINIMAL.replace(
            "pump_power_mw_per_crystal = 3.0", "pump_power_mw_per_crystal = true"
        )
        with pytest.raises(ScenarioError, match="pump_power_mw_per_crystal"):
            loads_scenario(bad, label="x")


class TestRoundTrip:
    def test_dict_round_trip_is_identity(self):
        scn, _ = loads_scenario(FULL, label="inline")
        assert scenario_from_dict(scenario_to_dict(scn)) == scn

    def test_bundled_scenarios_round_trip(self):
        for name in bundled_scenario_names():
            scn, _ = resolve_scenario(name)
            assert scenario_from_dict(scenario_to_dict(scn)) == scn

    def test_canonical_json_is_parseable_and_sorted(self):
        scn, _ = loads_scenario(MINIMAL, label="inline")
        doc = json.loads(canonical_json(scn))
        assert list(doc.keys()) == sorted(doc.keys())
        assert doc["name"] == "tabletop"


class TestHashing:
    def test_hash_ignores_formatting(self):
        reordered = FULL.replace(
            "multiplexed = true\nreceiver_threshold_dbm = -23.0",
            "receiver_threshold_dbm = -23.0\nmultiplexed = true",
        )
        a, _ = loads_scenario(FULL, label="a")
        b, _ = loads_scenario(reordered, label="b")
        assert scenario_hash(a) == scenario_hash(b)

    def test_hash_tracks_values(self):
        a, _ = loads_scenario(FULL, label="a")
        b, _ = loads_scenario(FULL.replace("seed = 99", "seed = 99"), label="b")
        assert scenario_hash(a) == scenario_hash(b)
        c, _ = loads_scenario(
            FULL.replace("base_phase_rad = 0.2", "base_phase_rad = 0.3"), label="c"
        )
        assert scenario_hash(a) != scenario_hash(c)

    def test_hash_is_hex_sha256(self):
        scn, _ = loads_scenario(MINIMAL, label="x")
        digest = scenario_hash(scn)
        assert len(digest) == 64
        int(digest, 16)


class TestResolve:
    def test_bundled_names_present(self):
        names = bundled_scenario_names()
        assert {"one_crystal_local", "link_100m", "link_27km"} <= set(names)

    def test_resolve_by_name_with_or_without_suffix(self):
        by_name, _ = resolve_scenario("link_100m")
        by_file, _ = resolve_scenario("link_100m.scn")
        assert by_name == by_file

    def test_resolve_path(self, tmp_path):
        path = tmp_path / "mine.scn"
        path.write_text(MINIMAL)
        scn, run = resolve_scenario(str(path))
        assert scn.name == "tabletop"
        assert run == {}

    def test_resolve_failure_lists_bundled_names(self):
        with pytest.raises(ScenarioError) as err:
            resolve_scenario("no_such_link")
        assert "link_27km" in str(err.value)

    def test_load_scenario_from_disk(self, tmp_path):
        path = tmp_path / "disk.scn"
        path.write_text(FULL)
        scn, run = load_scenario(path)
        assert scn.name == "short-haul"
        assert run["seed"] == 99

    def test_bundled_files_validate_cleanly(self):
        from qlink.engine import validate_scenario

        for name in bundled_scenario_names():
            scn, run = resolve_scenario(name)
            assert validate_scenario(scn) == [], name
            assert run["duration_s"] == 10.0
            assert run["seed"] == 12345

    def test_scenario_requires_mapping_sections(self):
        with pytest.raises(ScenarioError):
            loads_scenario('name = "x"\nsource = 3\n', label="x")
