"""Vehicle and UAV mobility: Manhattan grid driving, block patrol loops, trace replay."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import TraceParseError
from .roadmap import RoadMap

KMH = 1000.0 / 3600.0
VEHICLE_MAX_SPEED = 60 * KMH
UAV_MIN_SPEED = 50 * KMH
UAV_MAX_SPEED = 120 * KMH
UAV_ALTITUDE = 100.0
U_TURN_PROBABILITY = 0.1


@dataclass(frozen=True)
class VehicleMobilityState:
    node: int
    segment: int
    offset: float
    direction: int
    speed: float


@dataclass(frozen=True)
class UavMobilityState:
    node: int
    patrol_area: tuple[int, ...]
    corners: tuple[tuple[float, float], ...]
    arc: float
    speed: float
    altitude: float = UAV_ALTITUDE

    @property
    def perimeter(self) -> float:
        return _loop_perimeter(self.corners)

    @property
    def position(self) -> tuple[float, float, float]:
        x, y = _loop_point(self.corners, self.arc)
        return (x, y, self.altitude)


def _turn(roadmap: RoadMap, segment: int, direction: int, rng: np.random.Generator,
          max_speed: float) -> tuple[int, float, int, float]:
    """Pick the outgoing segment at the intersection a vehicle just reached."""
    seg = roadmap.segments[segment]
    node = seg.endpoint_b if direction > 0 else seg.endpoint_a
    others = [s for s in roadmap.segments_at(node) if s != segment]
    if not others or rng.random() < U_TURN_PROBABILITY:
        new_seg = segment
    else:
        new_seg = others[int(rng.integers(len(others)))]
    speed = float(rng.uniform(0.0, max_speed))
    out = roadmap.segments[new_seg]
    if out.endpoint_a == node:
        return new_seg, 0.0, 1, speed
    return new_seg, out.length, -1, speed


def step_vehicle(state: VehicleMobilityState, dt: float, rng: np.random.Generator,
                 roadmap: RoadMap, max_speed: float = VEHICLE_MAX_SPEED) -> VehicleMobilityState:
    """Advance a vehicle by ``dt`` seconds along its segment.

    A vehicle that reaches an intersection stops there for the rest of the
    step and picks a new segment and a fresh speed in ``[0, max_speed]``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    length = roadmap.segments[state.segment].length
    offset = state.offset + state.speed * dt * state.direction
    if 0.0 <= offset <= length:
        return replace(state, offset=offset)
    seg, off, d, speed = _turn(roadmap, state.segment, state.direction, rng, max_speed)
    return VehicleMobilityState(state.node, seg, off, d, speed)


class VehicleFleet:
    """Array form of many :class:`VehicleMobilityState` stepped together.

    Produces exactly the states :func:`step_vehicle` would, node by node, as
    long as each vehicle is given its own random stream.
    """

    def __init__(self, roadmap: RoadMap, states: Sequence[VehicleMobilityState],
                 rngs: Sequence[np.random.Generator], max_speed: float = VEHICLE_MAX_SPEED):
        self.roadmap = roadmap
        self.max_speed = max_speed
        self.nodes = [s.node for s in states]
        self.segment = np.array([s.segment for s in states], dtype=np.int64)
        self.offset = np.array([s.offset for s in states], dtype=float)
        self.direction = np.array([s.direction for s in states], dtype=np.int64)
        self.speed = np.array([s.speed for s in states], dtype=float)
        self.rngs = list(rngs)

    def __len__(self) -> int:
        return len(self.nodes)

    def step(self, dt: float) -> None:
        off = self.offset + self.speed * dt * self.direction
        length = self.roadmap.seg_len[self.segment]
        crossed = np.flatnonzero((off < 0.0) | (off > length))
        self.offset = off
        for i in crossed:
            seg, o, d, v = _turn(self.roadmap, int(self.segment[i]), int(self.direction[i]),
                                 self.rngs[i], self.max_speed)
            self.segment[i] = seg
            self.offset[i] = o
            self.direction[i] = d
            self.speed[i] = v

    def state(self, i: int) -> VehicleMobilityState:
        return VehicleMobilityState(self.nodes[i], int(self.segment[i]), float(self.offset[i]),
                                    int(self.direction[i]), float(self.speed[i]))

    def positions(self) -> np.ndarray:
        rm = self.roadmap
        a = rm.intersections[rm.seg_a[self.segment]]
        b = rm.intersections[rm.seg_b[self.segment]]
        t = (self.offset / rm.seg_len[self.segment])[:, None]
        return a + (b - a) * t


def random_vehicle_state(node: int, roadmap: RoadMap, rng: np.random.Generator,
                         max_speed: float = VEHICLE_MAX_SPEED) -> VehicleMobilityState:
    seg = int(rng.integers(len(roadmap.segments)))
    length = roadmap.segments[seg].length
    return VehicleMobilityState(node, seg, float(rng.uniform(0.0, length)),
                                1 if rng.random() < 0.5 else -1,
                                float(rng.uniform(0.0, max_speed)))


# -- UAVs ---------------------------------------------------------------------

def _loop_perimeter(corners) -> float:
    total = 0.0
    for i in range(len(corners)):
        a, b = corners[i], corners[(i + 1) % len(corners)]
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total


def _loop_point(corners, arc: float) -> tuple[float, float]:
    for i in range(len(corners)):
        a, b = corners[i], corners[(i + 1) % len(corners)]
        edge = math.hypot(b[0] - a[0], b[1] - a[1])
        if arc <= edge or i == len(corners) - 1:
            t = min(max(arc / edge, 0.0), 1.0)
            return (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)
        arc -= edge
    raise AssertionError("unreachable")


def step_uav(state: UavMobilityState, dt: float, rng: np.random.Generator | None = None
             ) -> UavMobilityState:
    """Move a UAV ``speed * dt`` metres around its rectangular patrol loop.

    ``rng`` is accepted for interface symmetry; the patrol is deterministic.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return replace(state, arc=math.fmod(state.arc + state.speed * dt, state.perimeter))


def patrol_cover(roadmap: RoadMap) -> list[tuple[int, int, int, int]]:
    """Greedy set cover of all segments by city blocks (4 segments each)."""
    blocks = roadmap.blocks()
    uncovered = set(range(len(roadmap.segments)))
    chosen: list[tuple[int, int, int, int]] = []
    while uncovered:
        best = max(range(len(blocks)), key=lambda i: (len(uncovered.intersection(blocks[i])), -i))
        gain = uncovered.intersection(blocks[best])
        if not gain:
            break
        chosen.append(blocks[best])
        uncovered -= gain
    return chosen


def assign_patrols(roadmap: RoadMap, n_uavs: int, first_node: int, rng: np.random.Generator,
                   altitude: float = UAV_ALTITUDE, min_speed: float = UAV_MIN_SPEED,
                   max_speed: float = UAV_MAX_SPEED) -> list[UavMobilityState]:
    """Place ``n_uavs`` on block loops, set-cover blocks first, evenly phased per block."""
    cover = patrol_cover(roadmap)
    order = cover + [b for b in roadmap.blocks() if b not in cover]
    per_block: dict[tuple, list[int]] = {}
    for i in range(n_uavs):
        per_block.setdefault(order[i % len(order)], []).append(i)
    states: list[UavMobilityState | None] = [None] * n_uavs
    for block, members in per_block.items():
        x0, y0, x1, y1 = roadmap.bounding_box(block)
        corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        perim = _loop_perimeter(corners)
        for k, i in enumerate(members):
            speed = float(rng.uniform(min_speed, max_speed))
            states[i] = UavMobilityState(first_node + i, tuple(block), corners,
                                         perim * k / len(members), speed, altitude)
    return states  # type: ignore[return-value]


# -- traces -------------------------------------------------------------------

@dataclass
class TraceSeries:
    """Time-indexed positions of one node; queried with linear interpolation."""

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    zs: np.ndarray | None = None

    def position_at(self, t: float) -> tuple[float, float, float]:
        x = float(np.interp(t, self.times, self.xs))
        y = float(np.interp(t, self.times, self.ys))
        z = float(np.interp(t, self.times, self.zs)) if self.zs is not None else 0.0
        return (x, y, z)

    @property
    def is_aerial(self) -> bool:
        return self.zs is not None and bool(np.any(self.zs > 0))


def load_trace(path) -> dict[int, TraceSeries]:
    """Parse a ``time node_id x y [z]`` trace file.

    Blank lines and ``#`` comments are skipped.  Timestamps must be strictly
    increasing per node.
    """
    rows: dict[int, list[tuple[float, float, float, float | None]]] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (4, 5):
            raise TraceParseError(f"expected 4 or 5 fields, got {len(parts)}", lineno)
        try:
            t = float(parts[0])
            node = int(parts[1])
            x, y = float(parts[2]), float(parts[3])
            z = float(parts[4]) if len(parts) == 5 else None
        except ValueError as exc:
            raise TraceParseError(str(exc), lineno) from None
        series = rows.setdefault(node, [])
        if series and t <= series[-1][0]:
            raise TraceParseError(f"non-monotonic timestamp {t} for node {node}", lineno)
        if series and (z is None) != (series[-1][3] is None):
            raise TraceParseError(f"node {node} mixes 2-D and 3-D records", lineno)
        series.append((t, x, y, z))
    if not rows:
        raise TraceParseError("trace is empty")
    out = {}
    for node, series in sorted(rows.items()):
        arr = np.array([(t, x, y, 0.0 if z is None else z) for t, x, y, z in series])
        out[node] = TraceSeries(arr[:, 0], arr[:, 1], arr[:, 2],
                                arr[:, 3] if series[0][3] is not None else None)
    return out
