"""Zone-based on-demand routing with UAV relays.

Per-node operations are plain functions over :class:`NodeState` and packets;
:class:`ProposedRouter` wires them to the event engine.  The source-side flow
bookkeeping (:class:`FlowState`, :class:`FlowRouter`) is shared with the
baseline protocol.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .packets import (DataPacket, PathRecord, RerrPacket, RreqPacket, RrepPacket, UavEntry,
                      ZoneEntry)
from .radio import NodeKind, NodeState, zone_density
from .scoring import order_alternatives, select_path

if TYPE_CHECKING:
    from .engine import Simulator


# -- actions ------------------------------------------------------------------

@dataclass(frozen=True)
class Drop:
    reason: str


@dataclass(frozen=True)
class Rebroadcast:
    rreq: RreqPacket


@dataclass(frozen=True)
class DeliverToDestination:
    rreq: RreqPacket


@dataclass(frozen=True)
class Forward:
    next_hop: int


@dataclass(frozen=True)
class SwitchPath:
    next_hop: int
    active: PathRecord
    alternatives: list[PathRecord]


@dataclass(frozen=True)
class EmitRerr:
    rerr: RerrPacket


# -- discovery ----------------------------------------------------------------

def initiate_discovery(node: NodeState, destination: int, now: float, seq: int,
                       lifetime: float = 3.0, max_hops: int = 40) -> RreqPacket:
    """Build the source's RREQ, seeded with its own zone and zone density."""
    density = zone_density(node)
    rreq = RreqPacket(
        rreq_id=(node.id, seq),
        source=node.id,
        destination=destination,
        delay=0.0,
        nb_vehicles=density,
        expires_at=now + lifetime,
        max_hops=max_hops,
        transited=(ZoneEntry(node.zone, density),),
    )
    node.seen_rreqs.add(rreq.rreq_id)
    return rreq


def _expired(rreq: RreqPacket, now: float) -> bool:
    return now > rreq.expires_at or rreq.hops > rreq.max_hops


def handle_rreq(node: NodeState, rreq: RreqPacket, now: float, hop_delay: float = 0.102,
                relay_listed_zones: bool = True):
    """Decide what ``node`` does with an incoming RREQ.

    The destination accepts every unexpired copy so it can compare paths.
    Other nodes drop repeats of an ``rreq_id``.  A UAV appends its id only;
    a vehicle appends its zone and zone density unless the zone is already
    listed, in which case it relays the RREQ unchanged (or drops it when
    ``relay_listed_zones`` is off).
    """
    if node.id == rreq.destination:
        if _expired(rreq, now):
            return Drop("expired")
        node.seen_rreqs.add(rreq.rreq_id)
        return DeliverToDestination(rreq)
    if rreq.rreq_id in node.seen_rreqs:
        return Drop("duplicate")
    node.seen_rreqs.add(rreq.rreq_id)
    if _expired(rreq, now) or rreq.hops >= rreq.max_hops:
        return Drop("expired")
    if node.is_uav:
        entry = UavEntry(node.id)
        return Rebroadcast(_extend(rreq, entry, 0, hop_delay))
    if rreq.zone_listed(node.zone):
        if not relay_listed_zones:
            return Drop("zone-listed")
        return Rebroadcast(_extend(rreq, None, 0, hop_delay))
    density = zone_density(node)
    return Rebroadcast(_extend(rreq, ZoneEntry(node.zone, density), density, hop_delay))


def _extend(rreq: RreqPacket, entry, density: int, hop_delay: float) -> RreqPacket:
    transited = rreq.transited if entry is None else rreq.transited + (entry,)
    return RreqPacket(rreq.rreq_id, rreq.source, rreq.destination, rreq.delay + hop_delay,
                      rreq.nb_vehicles + density, rreq.expires_at, rreq.max_hops, transited,
                      rreq.hops + 1)


# -- geographic forwarding ----------------------------------------------------

def advance(zone_seq: Sequence[int], zone: int | None, progress: int) -> int:
    """Index of ``zone`` in the unvisited part of ``zone_seq``, else ``progress``."""
    if zone is None:
        return progress
    for i in range(progress, len(zone_seq)):
        if zone_seq[i] == zone:
            return i
    return progress


def greedy_next_hop(current: NodeState, target_location, path: PathRecord, *,
                    now: float = math.inf, staleness: float = math.inf,
                    destination: int | None = None, progress: int = 0,
                    reverse: bool = False, extra_zone: int | None = None,
                    exclude=()) -> int | None:
    """Neighbor on the rest of ``path`` closest to ``target_location``.

    Candidates are fresh neighbors located in a zone at or after ``progress``
    in the path's zone sequence (reversed when ``reverse``), or in
    ``extra_zone``, plus neighboring UAVs listed on the path.  The final
    ``destination`` wins outright when it is a neighbor.  Ties go to the lower
    node id; ``None`` means no candidate.
    """
    table = current.fresh_neighbors(now, staleness) if now != math.inf else current.neighbor_table
    if destination is not None and destination in table and destination not in exclude:
        return destination
    zones = path.zone_ids
    if reverse:
        zones = zones[::-1]
    allowed = set(zones[progress:])
    if extra_zone is not None:
        allowed.add(extra_zone)
    uavs = set(path.uav_ids)
    tx, ty = target_location[0], target_location[1]
    best = None
    for nid in sorted(table):
        if nid == current.id or nid in exclude:
            continue
        e = table[nid]
        if e.kind is NodeKind.UAV:
            if nid not in uavs:
                continue
        elif e.zone not in allowed:
            continue
        d = math.hypot(e.position[0] - tx, e.position[1] - ty)
        if best is None or d < best[0]:
            best = (d, nid)
    return None if best is None else best[1]


def forward_data(node: NodeState, packet: DataPacket, now: float, *, staleness: float = 3.0,
                 destination_zone: int | None = None, exclude=()):
    """Forward on the active path, fall back to the best reachable alternative, else RERR."""
    skip = set(exclude) | set(packet.visited)
    nxt = greedy_next_hop(node, packet.destination_location, packet.active_path, now=now,
                          staleness=staleness, destination=packet.destination,
                          progress=packet.progress, extra_zone=destination_zone, exclude=skip)
    if nxt is not None:
        return Forward(nxt)
    for alt in order_alternatives(packet.alternative_paths):
        prog = advance(alt.zone_ids, node.zone, 0)
        nxt = greedy_next_hop(node, packet.destination_location, alt, now=now,
                              staleness=staleness, destination=packet.destination,
                              progress=prog, extra_zone=destination_zone, exclude=skip)
        if nxt is not None:
            rest = [p for p in packet.alternative_paths if p is not alt]
            return SwitchPath(nxt, alt, rest)
    return EmitRerr(make_rerr(node, packet))


def make_rerr(node: NodeState, packet: DataPacket) -> RerrPacket:
    path = packet.active_path
    zones = path.zone_ids
    k = packet.progress
    broken = zones[min(k + 1, len(zones) - 1)]
    # entries up to and including the reporter's zone, reversed
    upto, seen = [], 0
    for e in path.entries:
        upto.append(e)
        if isinstance(e, ZoneEntry):
            if seen == k:
                break
            seen += 1
    ret = PathRecord(tuple(reversed(upto)),
                     sum(e.density for e in upto if isinstance(e, ZoneEntry)), path.delay)
    return RerrPacket(packet.flow_id, broken, node.id, ret, packet.source, packet)


# -- source-side flow state ---------------------------------------------------

@dataclass
class FlowState:
    flow_id: int
    source: int
    destination: int
    state: str = "idle"  # idle | discovering | active
    epoch: object = None
    discovery: object = None
    route: object = None
    established_at: float = 0.0
    failures: int = 0
    pending: deque = field(default_factory=deque)
    next_seq: int = 0

    def invalidate(self) -> None:
        self.state = "idle"
        self.route = None


def handle_rerr(flow: FlowState | None, rerr: RerrPacket, now: float, retry_budget: int = 2) -> str:
    """Source reaction to a route error.

    Returns ``"ignored"`` for an unknown flow, ``"requeued"`` when the error
    refers to a route already replaced, ``"rediscover"`` or, once more than
    ``retry_budget`` errors hit the flow, ``"abandon"``.  A carried data
    packet is put back in the flow's send buffer.
    """
    if flow is None or flow.flow_id != rerr.flow_id:
        return "ignored"
    pkt = rerr.packet
    if pkt is not None:
        flow.pending.append(pkt)
    if pkt is not None and pkt.epoch != flow.epoch:
        return "requeued"
    if flow.state == "discovering":
        return "requeued"
    flow.invalidate()
    flow.failures += 1
    if flow.failures > retry_budget:
        return "abandon"
    return "rediscover"


class FlowRouter:
    """Source-side flow machinery common to all routing protocols."""

    name = "abstract"
    discovery_timeout = 5.0

    def __init__(self, sim: "Simulator"):
        self.sim = sim
        self.cfg = sim.cfg
        self.flows: dict[int, FlowState] = {}
        self._rreq_seq: dict[int, int] = {}
        self.discoveries: dict = {}
        self.arrivals: Counter = Counter()

    def participates(self, node: NodeState) -> bool:
        return True

    def add_flow(self, flow: FlowState) -> None:
        self.flows[flow.flow_id] = flow

    def next_rreq_seq(self, node: int) -> int:
        s = self._rreq_seq.get(node, 0)
        self._rreq_seq[node] = s + 1
        return s

    # packets entering the network at the source

    def send_data(self, flow: FlowState, packet: DataPacket, now: float) -> None:
        if flow.state == "active" and now - flow.established_at > self.cfg.route_lifetime:
            flow.invalidate()
            flow.failures = 0
        if flow.state == "active":
            self.transmit_data(flow, packet, now)
            return
        flow.pending.append(packet)
        if flow.state == "idle":
            self.start_discovery(flow, now)

    def start_discovery(self, flow: FlowState, now: float) -> None:
        flow.state = "discovering"
        rreq_id = self.initiate(flow, now)
        flow.discovery = rreq_id
        self.discoveries[rreq_id] = flow.flow_id
        self.sim.schedule(now + self.discovery_timeout, "timer", ("discovery-timeout", flow.flow_id, rreq_id))

    def route_established(self, flow: FlowState, rreq_id, route, now: float) -> None:
        if flow.state != "discovering" or flow.discovery != rreq_id:
            return
        flow.state = "active"
        flow.route = route
        flow.epoch = rreq_id
        flow.established_at = now
        self.sim.log_event("route", flow.source, "RREP", _rid(rreq_id), f"flow={flow.flow_id}")
        self.flush(flow, now)

    def flush(self, flow: FlowState, now: float) -> None:
        while flow.pending and flow.state == "active":
            self.transmit_data(flow, flow.pending.popleft(), now)

    def abandon(self, flow: FlowState, now: float, reason: str) -> None:
        while flow.pending:
            self.sim.data_dropped(flow.pending.popleft(), flow.source, reason)
        flow.invalidate()
        flow.failures = 0

    def on_timer(self, payload, now: float) -> None:
        tag = payload[0]
        if tag == "discovery-timeout":
            _, flow_id, rreq_id = payload
            flow = self.flows[flow_id]
            if flow.state == "discovering" and flow.discovery == rreq_id:
                self.sim.log_event("timeout", flow.source, "RREQ", _rid(rreq_id), f"flow={flow_id}")
                self.abandon(flow, now, "no-route")

    def deliver_rerr_to_source(self, rerr: RerrPacket, now: float) -> None:
        flow = self.flows.get(rerr.flow_id)
        action = handle_rerr(flow, rerr, now, self.cfg.retry_budget)
        if action == "ignored" and rerr.packet is not None:
            self.sim.data_dropped(rerr.packet, rerr.source, "unknown-flow")
        self.sim.log_event("rerr", rerr.source, "RERR", str(rerr.flow_id), f"action={action}")
        if action == "rediscover":
            self.start_discovery(flow, now)
        elif action == "abandon":
            self.abandon(flow, now, "retries")
        elif action == "requeued" and flow.state == "active":
            self.flush(flow, now)

    def drop_rerr(self, rerr: RerrPacket, node: int) -> None:
        self.sim.log_event("drop", node, "RERR", str(rerr.flow_id), "reason=unroutable")
        if rerr.packet is not None:
            self.sim.data_dropped(rerr.packet, node, "rerr-lost")

    # protocol hooks

    def initiate(self, flow: FlowState, now: float):
        raise NotImplementedError

    def transmit_data(self, flow: FlowState, packet: DataPacket, now: float) -> None:
        raise NotImplementedError

    def on_receive(self, node: NodeState, packet, sender: int, now: float) -> None:
        raise NotImplementedError

    def on_process(self, node: NodeState, packet, now: float) -> None:
        raise NotImplementedError


def _rid(rreq_id) -> str:
    return f"{rreq_id[0]}.{rreq_id[1]}"


@dataclass
class _Collection:
    closes_at: float
    candidates: list[PathRecord] = field(default_factory=list)
    arrivals: int = 0


class ProposedRouter(FlowRouter):
    """Density-aware multi-path discovery with UAV participation."""

    name = "proposed"

    def __init__(self, sim: "Simulator"):
        super().__init__(sim)
        self.discovery_timeout = self.cfg.discovery_timeout
        self.hop_delay = sim.model.per_hop_latency + sim.model.processing_delay
        self.collections: dict = {}

    # discovery

    def initiate(self, flow: FlowState, now: float):
        node = self.sim.nodes[flow.source]
        self._refresh(node, now)
        rreq = initiate_discovery(node, flow.destination, now, self.next_rreq_seq(node.id),
                                  self.cfg.rreq_lifetime, self.cfg.max_hops)
        self.sim.log_event("discover", node.id, "RREQ", _rid(rreq.rreq_id), f"dst={flow.destination}")
        self.sim.broadcast(node.id, rreq, "RREQ", _rid(rreq.rreq_id))
        return rreq.rreq_id

    def _refresh(self, node: NodeState, now: float) -> None:
        node.fresh_neighbors(now, self.sim.model.staleness)

    def on_receive(self, node: NodeState, packet, sender: int, now: float) -> None:
        if isinstance(packet, RreqPacket):
            self._on_rreq(node, packet, now)
        elif isinstance(packet, DataPacket):
            if node.id == packet.destination:
                self.sim.data_delivered(packet, node.id)
            else:
                self.sim.schedule(now + self.sim.model.processing_delay, "process", (node.id, packet))
        elif isinstance(packet, RrepPacket):
            if node.id == packet.source:
                self._on_rrep_at_source(packet, now)
            else:
                self.sim.schedule(now + self.sim.model.processing_delay, "process", (node.id, packet))
        elif isinstance(packet, RerrPacket):
            if node.id == packet.source:
                self.deliver_rerr_to_source(packet, now)
            else:
                self.sim.schedule(now + self.sim.model.processing_delay, "process", (node.id, packet))

    def _on_rreq(self, node: NodeState, rreq: RreqPacket, now: float) -> None:
        if node.id != rreq.destination and rreq.rreq_id in node.seen_rreqs:
            return  # fast path for the common duplicate
        if node.id != rreq.destination:
            self._refresh(node, now)
        action = handle_rreq(node, rreq, now, self.hop_delay, self.cfg.relay_listed_zones)
        if isinstance(action, Rebroadcast):
            self.sim.schedule(now + self.sim.model.processing_delay, "tx",
                              (node.id, action.rreq, "RREQ", _rid(rreq.rreq_id)))
        elif isinstance(action, DeliverToDestination):
            self.arrivals[rreq.rreq_id] += 1
            self._collect(node, rreq, now)

    def _collect(self, node: NodeState, rreq: RreqPacket, now: float) -> None:
        col = self.collections.get(rreq.rreq_id)
        if col is None:
            col = _Collection(now + self.cfg.destination_wait)
            self.collections[rreq.rreq_id] = col
            self.sim.schedule(col.closes_at, "timer", ("select", node.id, rreq.rreq_id))
        elif now > col.closes_at:
            return
        col.arrivals += 1
        path = rreq.as_path()
        if path not in col.candidates:
            col.candidates.append(path)

    def on_timer(self, payload, now: float) -> None:
        if payload[0] == "select":
            _, node_id, rreq_id = payload
            self._select_and_reply(self.sim.nodes[node_id], rreq_id, now)
        else:
            super().on_timer(payload, now)

    def _select_and_reply(self, node: NodeState, rreq_id, now: float) -> None:
        col = self.collections[rreq_id]
        selected, rrep = select_path(col.candidates, rreq_id, node.position[:2],
                                     source=rreq_id[0], destination=node.id)
        rrep.destination_zone = node.zone
        self.sim.log_event("select", node.id, "RREP", _rid(rreq_id),
                           f"candidates={len(col.candidates)} nz={selected.n_z} uav={selected.hops_uav}")
        self._route_control(node, rrep, now)

    def _on_rrep_at_source(self, rrep: RrepPacket, now: float) -> None:
        flow_id = self.discoveries.get(rrep.rreq_id)
        if flow_id is None:
            return
        flow = self.flows[flow_id]
        alternatives = [p for p in rrep.discovered_paths if p is not rrep.selected_path]
        route = (rrep.selected_path, alternatives, rrep.destination_location,
                 rrep.destination_zone)
        self.route_established(flow, rrep.rreq_id, route, now)

    # unicast control packets (RREP back to the source, RERR back to the source)

    def _control_route(self, packet) -> tuple[PathRecord, bool, tuple[float, float], int]:
        if isinstance(packet, RrepPacket):
            path = packet.selected_path
            return path, True, self.sim.roadmap.zone_midpoint(path.zone_ids[0]), packet.source
        path = packet.return_path
        return path, False, self.sim.roadmap.zone_midpoint(path.zone_ids[-1]), packet.source

    def _route_control(self, node: NodeState, packet, now: float) -> None:
        kind = "RREP" if isinstance(packet, RrepPacket) else "RERR"
        ident = _rid(packet.rreq_id) if kind == "RREP" else str(packet.flow_id)
        path, reverse, target, final = self._control_route(packet)
        zones = path.zone_ids[::-1] if reverse else path.zone_ids
        packet.progress = advance(zones, node.zone, packet.progress)
        if packet.hops >= self.cfg.max_hops:
            return self._control_lost(packet, node.id, kind, ident)
        exclude = set(packet.visited)
        while True:
            nxt = greedy_next_hop(node, target, path, now=now, staleness=self.sim.model.staleness,
                                  destination=final, progress=packet.progress, reverse=reverse,
                                  exclude=exclude)
            if nxt is None:
                return self._control_lost(packet, node.id, kind, ident)
            packet.visited.append(node.id)
            packet.hops += 1
            if self.sim.unicast(node.id, nxt, packet, kind, ident):
                return
            packet.visited.pop()
            packet.hops -= 1
            exclude.add(nxt)

    def _control_lost(self, packet, node_id: int, kind: str, ident: str) -> None:
        if kind == "RERR":
            self.drop_rerr(packet, node_id)
        else:
            self.sim.log_event("drop", node_id, kind, ident, "reason=unroutable")

    # data

    def transmit_data(self, flow: FlowState, packet: DataPacket, now: float) -> None:
        active, alternatives, dest_loc, dest_zone = flow.route
        packet.active_path = active
        packet.alternative_paths = list(alternatives)
        packet.destination_location = tuple(dest_loc)
        packet.destination_zone = dest_zone
        packet.epoch = flow.epoch
        packet.hops, packet.visited, packet.progress = 0, [], 0
        self._forward(self.sim.nodes[flow.source], packet, now)

    def on_process(self, node: NodeState, packet, now: float) -> None:
        if isinstance(packet, DataPacket):
            self._forward(node, packet, now)
        else:
            self._route_control(node, packet, now)

    def _forward(self, node: NodeState, packet: DataPacket, now: float) -> None:
        packet.progress = advance(packet.active_path.zone_ids, node.zone, packet.progress)
        if packet.hops >= self.cfg.max_hops:
            self.sim.data_dropped(packet, node.id, "ttl")
            return
        exclude: set[int] = set()
        dest_zone = packet.destination_zone
        while True:
            action = forward_data(node, packet, now, staleness=self.sim.model.staleness,
                                  destination_zone=dest_zone, exclude=exclude)
            if isinstance(action, EmitRerr):
                self._emit_rerr(node, action.rerr, now)
                return
            if isinstance(action, SwitchPath):
                self.sim.log_event("switch", node.id, "DATA", packet.key,
                                   f"alternatives={len(action.alternatives)}")
                packet.active_path = action.active
                packet.alternative_paths = action.alternatives
                packet.progress = advance(action.active.zone_ids, node.zone, 0)
            packet.visited.append(node.id)
            packet.hops += 1
            if self.sim.unicast(node.id, action.next_hop, packet, "DATA", packet.key):
                return
            packet.visited.pop()
            packet.hops -= 1
            exclude.add(action.next_hop)

    def _emit_rerr(self, node: NodeState, rerr: RerrPacket, now: float) -> None:
        self.sim.log_event("break", node.id, "DATA", rerr.packet.key, f"zone={rerr.broken_zone}")
        if node.id == rerr.source:
            self.deliver_rerr_to_source(rerr, now)
        else:
            self._route_control(node, rerr, now)
