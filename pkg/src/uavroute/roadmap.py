"""Manhattan grid road map partitioned into fixed-length zones.

Intersections are laid out on a ``rows x cols`` lattice with spacing
``block_length``; intersection ``r * cols + c`` sits at ``(c * block_length,
r * block_length)``.  Segments are numbered horizontal-first (row by row),
then vertical (column by column).  Zone IDs start at 1 and are assigned in
(segment id, offset) order.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, OffRoadError

COMMUNICATION_RANGE = 300.0
SNAP_TOLERANCE = 5.0
BOUNDARY_EPS = 1e-9  # offsets this close to a zone boundary count as on it


@dataclass(frozen=True)
class Segment:
    id: int
    endpoint_a: int
    endpoint_b: int
    length: float


@dataclass(frozen=True)
class Zone:
    id: int
    segment: int
    start_offset: float
    end_offset: float

    @property
    def length(self) -> float:
        return self.end_offset - self.start_offset


@dataclass
class RoadMap:
    rows: int
    cols: int
    block_length: float
    zone_size: float
    intersections: np.ndarray
    segments: list[Segment]
    zones: list[Zone]
    _zone_ends: list[list[float]] = field(default_factory=list, repr=False)
    _first_zone: list[int] = field(default_factory=list, repr=False)
    _incident: list[list[int]] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._zone_ends = [[] for _ in self.segments]
        self._first_zone = [0] * len(self.segments)
        for z in self.zones:
            if not self._zone_ends[z.segment]:
                self._first_zone[z.segment] = z.id
            self._zone_ends[z.segment].append(z.end_offset)
        self._incident = [[] for _ in range(len(self.intersections))]
        for s in self.segments:
            self._incident[s.endpoint_a].append(s.id)
            self._incident[s.endpoint_b].append(s.id)
        self.seg_a = np.array([s.endpoint_a for s in self.segments])
        self.seg_b = np.array([s.endpoint_b for s in self.segments])
        self.seg_len = np.array([s.length for s in self.segments])

    # -- lookups -----------------------------------------------------------

    def zone(self, zone_id: int) -> Zone:
        return self.zones[zone_id - 1]

    def segments_at(self, intersection: int) -> list[int]:
        """Segment ids incident to an intersection, in id order."""
        return self._incident[intersection]

    def zone_for(self, segment: int, offset: float) -> int:
        """Zone id for an offset along ``segment``; boundaries go to the lower id."""
        ends = self._zone_ends[segment]
        k = bisect.bisect_left(ends, offset - BOUNDARY_EPS)
        if k >= len(ends):
            k = len(ends) - 1
        return self._first_zone[segment] + k

    def zones_for(self, segments: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`zone_for`."""
        out = np.zeros(len(segments), dtype=np.int64)
        for s in np.unique(segments):
            mask = segments == s
            ends = self._zone_ends[s]
            k = np.searchsorted(ends, offsets[mask] - BOUNDARY_EPS, side="left")
            np.minimum(k, len(ends) - 1, out=k)
            out[mask] = self._first_zone[s] + k
        return out

    def point_on(self, segment: int, offset: float) -> tuple[float, float]:
        s = self.segments[segment]
        a = self.intersections[s.endpoint_a]
        b = self.intersections[s.endpoint_b]
        t = offset / s.length
        return (float(a[0] + (b[0] - a[0]) * t), float(a[1] + (b[1] - a[1]) * t))

    def zone_midpoint(self, zone_id: int) -> tuple[float, float]:
        z = self.zone(zone_id)
        return self.point_on(z.segment, 0.5 * (z.start_offset + z.end_offset))

    def project(self, segment: int, position: Sequence[float]) -> tuple[float, float]:
        """Return ``(offset, distance)`` of the projection of ``position`` onto ``segment``."""
        s = self.segments[segment]
        a = self.intersections[s.endpoint_a]
        b = self.intersections[s.endpoint_b]
        dx, dy = b[0] - a[0], b[1] - a[1]
        px, py = position[0] - a[0], position[1] - a[1]
        t = (px * dx + py * dy) / (s.length * s.length)
        t = min(max(t, 0.0), 1.0)
        off = t * s.length
        qx, qy = a[0] + dx * t, a[1] + dy * t
        return off, math.hypot(position[0] - qx, position[1] - qy)

    def nearest_segment(
        self, position: Sequence[float], tolerance: float = SNAP_TOLERANCE
    ) -> tuple[int, float]:
        """Closest segment to ``position`` and the offset of the projection.

        Equidistant segments (a point at an intersection) resolve to the one
        whose projected zone has the lowest id.
        """
        best = None
        for s in self.segments:
            off, d = self.project(s.id, position)
            if d > tolerance:
                continue
            key = (round(d, 9), self.zone_for(s.id, off))
            if best is None or key < best[0]:
                best = (key, s.id, off)
        if best is None:
            raise OffRoadError(f"position {tuple(position)} is off-road")
        return best[1], best[2]

    def bounding_box(self, segment_ids: Iterable[int]) -> tuple[float, float, float, float]:
        pts = []
        for sid in segment_ids:
            s = self.segments[sid]
            pts.append(self.intersections[s.endpoint_a])
            pts.append(self.intersections[s.endpoint_b])
        arr = np.array(pts)
        return (float(arr[:, 0].min()), float(arr[:, 1].min()),
                float(arr[:, 0].max()), float(arr[:, 1].max()))

    def blocks(self) -> list[tuple[int, int, int, int]]:
        """The four segments bounding each city block, row-major by block."""
        h = lambda r, c: r * (self.cols - 1) + c  # noqa: E731
        nh = self.rows * (self.cols - 1)
        v = lambda c, r: nh + c * (self.rows - 1) + r  # noqa: E731
        out = []
        for r in range(self.rows - 1):
            for c in range(self.cols - 1):
                out.append((h(r, c), v(c + 1, r), h(r + 1, c), v(c, r)))
        return out

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["zone_id", "segment_id", "start_offset", "end_offset"])
            for z in self.zones:
                w.writerow([z.id, z.segment, f"{z.start_offset:.6f}", f"{z.end_offset:.6f}"])


def build_grid_map(
    rows: int,
    cols: int,
    block_length: float,
    zone_size: float = COMMUNICATION_RANGE,
    comm_range: float = COMMUNICATION_RANGE,
) -> RoadMap:
    """Build a ``rows x cols`` grid and split every segment into equal zones.

    Each segment of length L gets ``ceil(L / zone_size)`` zones, so no zone
    is longer than ``zone_size``.
    """
    if rows < 2 or cols < 2:
        raise InvalidParameterError(f"grid needs at least 2x2 intersections, got {rows}x{cols}")
    if not block_length > 0:
        raise InvalidParameterError(f"block_length must be positive, got {block_length}")
    if not 0 < zone_size <= comm_range:
        raise InvalidParameterError(
            f"zone_size must lie in (0, {comm_range}], got {zone_size}")

    pts = np.array([(c * block_length, r * block_length)
                    for r in range(rows) for c in range(cols)], dtype=float)
    segments: list[Segment] = []
    pairs = [(r * cols + c, r * cols + c + 1) for r in range(rows) for c in range(cols - 1)]
    pairs += [(r * cols + c, (r + 1) * cols + c) for c in range(cols) for r in range(rows - 1)]
    for sid, (a, b) in enumerate(pairs):
        length = float(np.hypot(*(pts[b] - pts[a])))
        segments.append(Segment(sid, a, b, length))

    zones: list[Zone] = []
    for s in segments:
        n = max(1, math.ceil(s.length / zone_size - 1e-9))
        for k in range(n):
            start = s.length * k / n
            end = s.length if k == n - 1 else s.length * (k + 1) / n
            zones.append(Zone(len(zones) + 1, s.id, start, end))
    return RoadMap(rows, cols, float(block_length), float(zone_size), pts, segments, zones)


def zone_of(roadmap: RoadMap, position: Sequence[float], tolerance: float = SNAP_TOLERANCE) -> int:
    """Zone containing the projection of ``position`` onto its nearest segment."""
    seg, off = roadmap.nearest_segment(position, tolerance)
    return roadmap.zone_for(seg, off)
