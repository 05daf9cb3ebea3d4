"""Scenario configuration and its INI-style file format.

Example file::

    [map]
    rows = 3
    cols = 3
    block_length = 2000

    [nodes]
    vehicles = 120
    uavs = 16

    [protocol]
    protocol = proposed

Keys left out keep their defaults.  Every field of :class:`ScenarioConfig`
belongs to exactly one section; unknown keys are an error.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mobility import UAV_ALTITUDE, UAV_MAX_SPEED, UAV_MIN_SPEED, VEHICLE_MAX_SPEED

PROTOCOLS = ("proposed", "baseline")


def _f(default, section: str):
    return field(default=default, metadata={"section": section})


@dataclass
class ScenarioConfig:
    # map
    rows: int = _f(3, "map")
    cols: int = _f(3, "map")
    block_length: float = _f(2000.0, "map")
    zone_size: float = _f(300.0, "map")
    # nodes
    vehicles: int = _f(120, "nodes")
    uavs: int = _f(16, "nodes")
    # mobility
    mobility: str = _f("builtin", "mobility")
    trace_file: str = _f("", "mobility")
    mobility_step: float = _f(0.1, "mobility")
    vehicle_max_speed: float = _f(VEHICLE_MAX_SPEED, "mobility")
    uav_min_speed: float = _f(UAV_MIN_SPEED, "mobility")
    uav_max_speed: float = _f(UAV_MAX_SPEED, "mobility")
    uav_altitude: float = _f(UAV_ALTITUDE, "mobility")
    # radio
    range: float = _f(300.0, "radio")
    uav_range: float = _f(300.0, "radio")
    per_hop_latency: float = _f(0.002, "radio")
    processing_delay: float = _f(0.1, "radio")
    hello_interval: float = _f(1.0, "radio")
    staleness: float = _f(3.0, "radio")
    loss_probability: float = _f(0.0, "radio")
    obstacles: bool = _f(True, "radio")
    # protocol
    protocol: str = _f("proposed", "protocol")
    rreq_lifetime: float = _f(3.0, "protocol")
    max_hops: int = _f(40, "protocol")
    destination_wait: float = _f(0.5, "protocol")
    discovery_timeout: float = _f(5.0, "protocol")
    baseline_discovery_timeout: float = _f(3.0, "protocol")
    route_lifetime: float = _f(20.0, "protocol")
    retry_budget: int = _f(2, "protocol")
    relay_listed_zones: bool = _f(True, "protocol")
    # traffic
    senders: int = _f(35, "traffic")
    packet_size: int = _f(1024, "traffic")
    send_interval: float = _f(1.0, "traffic")
    flow_start: float = _f(2.0, "traffic")
    # run
    duration: float = _f(300.0, "run")
    seed: int = _f(1, "run")

    def validate(self) -> "ScenarioConfig":
        problems = []
        if self.rows < 2 or self.cols < 2:
            problems.append("map needs rows >= 2 and cols >= 2")
        if self.block_length <= 0:
            problems.append("block_length must be positive")
        if not 0 < self.zone_size <= self.range:
            problems.append("zone_size must lie in (0, range]")
        if self.vehicles < 1 or self.uavs < 0:
            problems.append("vehicles must be >= 1 and uavs >= 0")
        if self.duration <= 0 or self.mobility_step <= 0:
            problems.append("duration and mobility_step must be positive")
        if self.senders < 0 or (self.senders > 0 and self.vehicles < 2):
            problems.append("flows need at least two vehicles")
        if self.senders > self.vehicles:
            problems.append("more senders than vehicles")
        if self.packet_size <= 0 or self.send_interval <= 0:
            problems.append("packet_size and send_interval must be positive")
        if self.protocol not in PROTOCOLS:
            problems.append(f"protocol must be one of {PROTOCOLS}")
        if self.mobility not in ("builtin", "trace", "static"):
            problems.append("mobility must be builtin, trace or static")
        if self.mobility == "trace" and not self.trace_file:
            problems.append("trace mobility needs trace_file")
        if self.range <= 0 or self.uav_range <= 0 or self.per_hop_latency <= 0:
            problems.append("radio range and latency must be positive")
        if self.hello_interval <= 0 or self.staleness <= 0:
            problems.append("hello_interval and staleness must be positive")
        if not 0 <= self.loss_probability < 1:
            problems.append("loss_probability must lie in [0, 1)")
        if self.max_hops < 1 or self.retry_budget < 0:
            problems.append("max_hops >= 1 and retry_budget >= 0 required")
        if not self.uav_min_speed <= self.uav_max_speed:
            problems.append("uav_min_speed exceeds uav_max_speed")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # -- file I/O ---------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                f = fields.get(key)
                if f is None or f.metadata["section"] != section:
                    raise ConfigError(f"unknown key [{section}] {key}")
                values[key] = _convert(f, raw)
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        sections: dict[str, list[str]] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            sections.setdefault(f.metadata["section"], []).append(f"{f.name} = {v}")
        return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


def _convert(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {f.name}: {exc}") from None
