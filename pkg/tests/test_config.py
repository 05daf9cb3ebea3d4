import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from uavroute import ScenarioConfig
from uavroute.errors import ConfigError


def test_defaults_match_table_values():
    c = ScenarioConfig()
    assert (c.uavs, c.range, c.senders, c.packet_size) == (16, 300.0, 35, 1024)
    assert (c.rows, c.cols, c.block_length) == (3, 3, 2000.0)
    assert c.validate() is c


def test_partial_file_keeps_defaults():
    c = ScenarioConfig.from_text("""
[nodes]
vehicles = 80   # sparse case

[protocol]
protocol = baseline
relay_listed_zones = off
""")
    assert c.vehicles == 80 and c.protocol == "baseline" and c.relay_listed_zones is False
    assert c.uavs == 16 and c.duration == 300.0


def test_round_trip():
    c = ScenarioConfig().replace(vehicles=160, loss_probability=0.05, obstacles=False,
                                 trace_file="a b.trace", duration=12.25)
    assert ScenarioConfig.from_text(c.to_text()) == c


@settings(max_examples=100, deadline=None)
@given(vehicles=st.integers(1, 500), dur=st.floats(0.01, 1e5, allow_nan=False),
       lat=st.floats(1e-6, 1.0), obstacles=st.booleans())
def test_round_trip_property(vehicles, dur, lat, obstacles):
    c = ScenarioConfig().replace(vehicles=vehicles, senders=0, duration=dur,
                                 per_hop_latency=lat, obstacles=obstacles)
    assert ScenarioConfig.from_text(c.to_text()) == c


def test_every_field_has_a_section():
    sections = {f.metadata["section"] for f in dataclasses.fields(ScenarioConfig)}
    assert sections == {"map", "nodes", "mobility", "radio", "protocol", "traffic", "run"}


@pytest.mark.parametrize("text", [
    "[nodes]\nvehicle = 3\n",
    "[radio]\nvehicles = 3\n",
    "[nodes]\nvehicles = many\n",
    "[radio]\nobstacles = maybe\n",
    "vehicles = 3\n",
])
def test_bad_files(text):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        ScenarioConfig.from_file(tmp_path / "nope.ini")


@pytest.mark.parametrize("changes, fragment", [
    ({"rows": 1}, "rows"),
    ({"zone_size": 400.0}, "zone_size"),
    ({"vehicles": 0}, "vehicles"),
    ({"duration": 0.0}, "duration"),
    ({"vehicles": 20}, "senders"),
    ({"protocol": "aodv"}, "protocol"),
    ({"mobility": "trace"}, "trace_file"),
    ({"loss_probability": 1.0}, "loss_probability"),
    ({"uav_min_speed": 50.0, "uav_max_speed": 10.0}, "uav_min_speed"),
])
def test_validation(changes, fragment):
    with pytest.raises(ConfigError, match=fragment):
        ScenarioConfig().replace(**changes).validate()
