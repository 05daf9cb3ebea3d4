"""Protocol packet types and the discovered-path record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

DATA_PAYLOAD_BYTES = 1024


@dataclass(frozen=True, slots=True)
class ZoneEntry:
    zone_id: int
    density: int

    def __post_init__(self) -> None:
        if self.density < 1:
            raise ValueError(f"zone density must be >= 1, got {self.density}")


@dataclass(frozen=True, slots=True)
class UavEntry:
    uav_id: int


TransitEntry = Union[ZoneEntry, UavEntry]


@dataclass
class PathRecord:
    """A discovered path: transited entries plus what the RREQ measured on the way.

    ``average``, ``s_deviation`` and ``score`` are filled in by
    :func:`uavroute.scoring.compute_score`; they do not take part in equality.
    """

    entries: tuple[TransitEntry, ...]
    nb_vehicles: int
    delay: float
    average: float | None = field(default=None, compare=False)
    s_deviation: float | None = field(default=None, compare=False)
    score: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        self.entries = tuple(self.entries)

    @property
    def zone_entries(self) -> list[ZoneEntry]:
        return [e for e in self.entries if isinstance(e, ZoneEntry)]

    @property
    def zone_ids(self) -> list[int]:
        return [e.zone_id for e in self.entries if isinstance(e, ZoneEntry)]

    @property
    def densities(self) -> list[int]:
        return [e.density for e in self.entries if isinstance(e, ZoneEntry)]

    @property
    def uav_ids(self) -> list[int]:
        return [e.uav_id for e in self.entries if isinstance(e, UavEntry)]

    @property
    def n_z(self) -> int:
        return sum(1 for e in self.entries if isinstance(e, ZoneEntry))

    @property
    def hops_uav(self) -> int:
        return sum(1 for e in self.entries if isinstance(e, UavEntry))

    def __hash__(self) -> int:
        return hash((self.entries, self.nb_vehicles, self.delay))

    @classmethod
    def from_rows(cls, rows, delay: float, nb_vehicles: int | None = None) -> "PathRecord":
        """Build from ``(zone_id, density)`` pairs, with ``"UAV"`` / ``("UAV", id)`` for UAV hops."""
        entries: list[TransitEntry] = []
        uav_counter = 0
        for row in rows:
            if row == "UAV" or (isinstance(row, tuple) and row[0] == "UAV"):
                uav_id = row[1] if isinstance(row, tuple) else -(uav_counter + 1)
                uav_counter += 1
                entries.append(UavEntry(uav_id))
            else:
                entries.append(ZoneEntry(int(row[0]), int(row[1])))
        total = sum(e.density for e in entries if isinstance(e, ZoneEntry))
        return cls(tuple(entries), total if nb_vehicles is None else nb_vehicles, delay)


RreqId = tuple[int, int]


@dataclass(frozen=True, slots=True)
class RreqPacket:
    rreq_id: RreqId
    source: int
    destination: int
    delay: float
    nb_vehicles: int
    expires_at: float
    max_hops: int
    transited: tuple[TransitEntry, ...]
    hops: int = 0

    def zone_listed(self, zone_id: int) -> bool:
        return any(isinstance(e, ZoneEntry) and e.zone_id == zone_id for e in self.transited)

    def as_path(self) -> PathRecord:
        return PathRecord(self.transited, self.nb_vehicles, self.delay)


@dataclass
class RrepPacket:
    rreq_id: RreqId
    source: int
    destination: int
    destination_location: tuple[float, float]
    selected_path: PathRecord
    discovered_paths: list[PathRecord]
    destination_zone: int | None = None
    hops: int = 0
    visited: list[int] = field(default_factory=list)
    progress: int = 0

    def __post_init__(self) -> None:
        if not self.discovered_paths:
            raise ValueError("RREP needs at least one discovered path")
        if self.selected_path not in self.discovered_paths:
            raise ValueError("selected path must be one of the discovered paths")


@dataclass
class DataPacket:
    flow_id: int
    seq: int
    source: int
    destination: int
    destination_location: tuple[float, float]
    active_path: PathRecord | None
    alternative_paths: list[PathRecord]
    origination_time: float
    payload_size: int = DATA_PAYLOAD_BYTES
    destination_zone: int | None = None
    epoch: object = None
    hops: int = 0
    visited: list[int] = field(default_factory=list)
    progress: int = 0
    route: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.payload_size <= 0:
            raise ValueError("payload size must be positive")

    @property
    def key(self) -> str:
        return f"{self.flow_id}:{self.seq}"


@dataclass
class RerrPacket:
    flow_id: int
    broken_zone: int | None
    reporter: int
    return_path: PathRecord | None
    source: int
    packet: DataPacket | None = None
    hops: int = 0
    visited: list[int] = field(default_factory=list)
    progress: int = 0
    route: tuple[int, ...] = ()
