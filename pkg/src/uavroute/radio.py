"""Unit-disk radio with urban line-of-sight for ground links, and hello beacons."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import Unreachable
from .roadmap import COMMUNICATION_RANGE, RoadMap


class NodeKind(enum.Enum):
    VEHICLE = "vehicle"
    UAV = "uav"


class NeighborEntry(NamedTuple):
    last_heard: float
    position: tuple[float, float, float]
    kind: NodeKind
    zone: int | None


@dataclass
class LinkModel:
    range: float = COMMUNICATION_RANGE
    uav_range: float = COMMUNICATION_RANGE
    per_hop_latency: float = 0.002
    processing_delay: float = 0.1
    obstacles: bool = True
    hello_interval: float = 1.0
    staleness: float = 3.0
    loss_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.range <= 0 or self.uav_range <= 0:
            raise ValueError("radio range must be positive")
        if self.per_hop_latency <= 0:
            raise ValueError("per-hop latency must be positive")
        if not 0.0 <= self.loss_probability < 1.0:
            raise ValueError("loss probability must lie in [0, 1)")


@dataclass(eq=False)
class NodeState:
    id: int
    kind: NodeKind
    position: tuple[float, float, float]
    segment: int | None = None
    zone: int | None = None
    neighbor_table: dict[int, NeighborEntry] = field(default_factory=dict)
    seen_rreqs: set = field(default_factory=set)

    @property
    def is_uav(self) -> bool:
        return self.kind is NodeKind.UAV

    def fresh_neighbors(self, now: float, staleness: float) -> dict[int, NeighborEntry]:
        """Prune stale entries and return the table."""
        cutoff = now - staleness
        stale = [k for k, e in self.neighbor_table.items() if e.last_heard < cutoff]
        for k in stale:
            del self.neighbor_table[k]
        return self.neighbor_table


@dataclass(frozen=True)
class HelloPacket:
    node: int
    kind: NodeKind
    position: tuple[float, float, float]
    zone: int | None


def _dist3(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def line_of_sight(a: NodeState, b: NodeState, roadmap: RoadMap, rng: float) -> bool:
    """Ground LOS: same segment, or both within ``rng`` of an intersection their segments share."""
    if a.segment == b.segment:
        return True
    sa, sb = roadmap.segments[a.segment], roadmap.segments[b.segment]
    for k in {sa.endpoint_a, sa.endpoint_b} & {sb.endpoint_a, sb.endpoint_b}:
        p = roadmap.intersections[k]
        if (math.hypot(a.position[0] - p[0], a.position[1] - p[1]) <= rng
                and math.hypot(b.position[0] - p[0], b.position[1] - p[1]) <= rng):
            return True
    return False


def in_range(a: NodeState, b: NodeState, roadmap: RoadMap, model: LinkModel) -> bool:
    d = _dist3(a.position, b.position)
    if a.is_uav or b.is_uav:
        return d <= model.uav_range
    if d > model.range:
        return False
    return not model.obstacles or line_of_sight(a, b, roadmap, model.range)


def adjacency(positions: np.ndarray, is_uav: np.ndarray, segments: np.ndarray,
              roadmap: RoadMap, model: LinkModel) -> np.ndarray:
    """Boolean link matrix for all node pairs; equals pairwise :func:`in_range`.

    ``segments`` entries for UAVs are ignored.
    """
    n = len(positions)
    links = np.zeros((n, n), dtype=bool)
    reach = max(model.range, model.uav_range)
    pairs = cKDTree(positions).query_pairs(reach * (1 + 1e-9), output_type="ndarray")
    if not len(pairs):
        return links
    i, j = pairs[:, 0], pairs[:, 1]
    pi, pj = positions[i], positions[j]
    # same arithmetic as in_range so both agree bit for bit
    d = np.sqrt((pi[:, 0] - pj[:, 0]) ** 2 + (pi[:, 1] - pj[:, 1]) ** 2 + (pi[:, 2] - pj[:, 2]) ** 2)
    veh = ~is_uav
    both = veh[i] & veh[j]
    ok = np.where(both, d <= model.range, d <= model.uav_range)
    if model.obstacles:
        near = np.zeros((n, len(roadmap.intersections)), dtype=bool)
        vi = np.flatnonzero(veh)
        if len(vi):
            s = segments[vi]
            for ends in (roadmap.seg_a[s], roadmap.seg_b[s]):
                p = roadmap.intersections[ends]
                close = np.hypot(positions[vi, 0] - p[:, 0], positions[vi, 1] - p[:, 1]) <= model.range
                near[vi[close], ends[close]] = True
        los = (segments[i] == segments[j]) | (near[i] & near[j]).any(axis=1)
        ok &= los | ~both
    i, j = i[ok], j[ok]
    links[i, j] = True
    links[j, i] = True
    return links


def zone_density(node: NodeState) -> int:
    """Vehicles in the node's zone according to its neighbor table, itself included."""
    count = 1
    for e in node.neighbor_table.values():
        if e.kind is NodeKind.VEHICLE and e.zone == node.zone:
            count += 1
    return count


def beacon_tick(node: NodeState, now: float, staleness: float = 3.0) -> HelloPacket:
    node.fresh_neighbors(now, staleness)
    return HelloPacket(node.id, node.kind, node.position, node.zone)


def receive_hello(node: NodeState, hello: HelloPacket, now: float) -> None:
    if hello.node == node.id:
        return
    node.neighbor_table[hello.node] = NeighborEntry(now, hello.position, hello.kind, hello.zone)


class RadioMedium:
    """Link oracle and packet delivery over a set of nodes at one instant.

    The link matrix is cached until :meth:`invalidate` is called (after each
    mobility step).
    """

    def __init__(self, nodes: Sequence[NodeState], roadmap: RoadMap, model: LinkModel,
                 rng: np.random.Generator | None = None):
        self.nodes = list(nodes)
        self.roadmap = roadmap
        self.model = model
        self.rng = rng
        self._links: np.ndarray | None = None
        self._rows: dict[int, list[int]] = {}

    def invalidate(self) -> None:
        self._links = None
        self._rows = {}

    def links(self) -> np.ndarray:
        if self._links is None:
            pos = np.array([n.position for n in self.nodes], dtype=float).reshape(-1, 3)
            uav = np.array([n.is_uav for n in self.nodes], dtype=bool)
            seg = np.array([-1 if n.segment is None else n.segment for n in self.nodes],
                           dtype=np.int64)
            self._links = adjacency(pos, uav, seg, self.roadmap, self.model)
        return self._links

    def neighbors(self, i: int) -> list[int]:
        row = self._rows.get(i)
        if row is None:
            row = np.flatnonzero(self.links()[i]).tolist()
            self._rows[i] = row
        return row

    def linked(self, i: int, j: int) -> bool:
        return bool(self.links()[i, j])

    def _lost(self) -> bool:
        p = self.model.loss_probability
        return p > 0 and self.rng is not None and self.rng.random() < p

    def deliver(self, sender: int, packet: Any, mode: str = "broadcast", now: float = 0.0,
                target: int | None = None) -> list[tuple[int, float]]:
        """Receivers and arrival times for one transmission.

        ``mode`` is ``"broadcast"`` or ``"unicast"``; unicast to a node out of
        range raises :class:`Unreachable`.
        """
        arrival = now + self.model.per_hop_latency
        if mode == "broadcast":
            return [(r, arrival) for r in self.neighbors(sender) if not self._lost()]
        if mode != "unicast" or target is None:
            raise ValueError("unicast delivery needs a target")
        if not self.linked(sender, target) or self._lost():
            raise Unreachable(sender, target)
        return [(target, arrival)]
