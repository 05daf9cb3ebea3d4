"""Shortest-hop reactive baseline.

Flood an RREQ with duplicate suppression, answer the first copy that reaches
the destination along its reverse node path, forward data hop by hop along
the recorded relays, and rediscover on any break.  No density metric, no
alternative paths, and UAVs stay out of it entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .packets import DataPacket
from .protocol import FlowRouter, FlowState, _rid
from .radio import NodeState

if TYPE_CHECKING:
    from .engine import Simulator


@dataclass(frozen=True)
class BaselineRoute:
    flow_id: int
    nodes: tuple[int, ...]
    established: float

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("route repeats a node")

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True, slots=True)
class BaselineRreq:
    rreq_id: tuple[int, int]
    source: int
    destination: int
    route: tuple[int, ...]
    expires_at: float
    max_hops: int


@dataclass
class BaselineRrep:
    rreq_id: tuple[int, int]
    route: tuple[int, ...]
    index: int


@dataclass
class BaselineRerr:
    flow_id: int
    source: int
    route: tuple[int, ...]
    index: int
    packet: DataPacket | None = None
    broken_zone: int | None = None
    reporter: int = -1
    return_path: object = None
    visited: list[int] = field(default_factory=list)


def baseline_forward(holder: int, packet: DataPacket, linked) -> tuple[str, int | None]:
    """Next relay on the packet's recorded route, or ``("rediscover", None)``.

    ``linked(a, b)`` reports whether ``b`` is currently in range of ``a``.
    """
    route = packet.route
    i = route.index(holder)
    nxt = route[i + 1]
    if linked(holder, nxt):
        return "forward", nxt
    return "rediscover", None


def baseline_discover(sim: "Simulator", source: int, destination: int) -> BaselineRoute | None:
    """Run one discovery on ``sim`` (a baseline simulator); ``None`` on timeout."""
    return sim.probe_discovery(source, destination).route


class BaselineRouter(FlowRouter):
    name = "baseline"

    def __init__(self, sim: "Simulator"):
        super().__init__(sim)
        self.discovery_timeout = self.cfg.baseline_discovery_timeout
        self.answered: set = set()

    def participates(self, node: NodeState) -> bool:
        return not node.is_uav

    def initiate(self, flow: FlowState, now: float):
        src = flow.source
        rreq = BaselineRreq((src, self.next_rreq_seq(src)), src, flow.destination, (src,),
                            now + self.cfg.rreq_lifetime, self.cfg.max_hops)
        self.sim.nodes[src].seen_rreqs.add(rreq.rreq_id)
        self.sim.log_event("discover", src, "RREQ", _rid(rreq.rreq_id), f"dst={flow.destination}")
        self.sim.broadcast(src, rreq, "RREQ", _rid(rreq.rreq_id))
        return rreq.rreq_id

    def on_receive(self, node: NodeState, packet, sender: int, now: float) -> None:
        if isinstance(packet, BaselineRreq):
            self._on_rreq(node, packet, now)
        elif isinstance(packet, DataPacket):
            if node.id == packet.destination:
                self.sim.data_delivered(packet, node.id)
            else:
                self._later(node, packet, now)
        elif isinstance(packet, BaselineRrep):
            if packet.index == 0:
                flow_id = self.discoveries.get(packet.rreq_id)
                if flow_id is not None:
                    flow = self.flows[flow_id]
                    route = BaselineRoute(flow_id, packet.route, now)
                    self.route_established(flow, packet.rreq_id, route, now)
            else:
                self._later(node, packet, now)
        elif isinstance(packet, BaselineRerr):
            if packet.index == 0:
                self.deliver_rerr_to_source(packet, now)
            else:
                self._later(node, packet, now)

    def _later(self, node: NodeState, packet, now: float) -> None:
        self.sim.schedule(now + self.sim.model.processing_delay, "process", (node.id, packet))

    def _on_rreq(self, node: NodeState, rreq: BaselineRreq, now: float) -> None:
        if node.id == rreq.destination:
            self.arrivals[rreq.rreq_id] += 1
            if rreq.rreq_id in self.answered or now > rreq.expires_at:
                return
            self.answered.add(rreq.rreq_id)
            node.seen_rreqs.add(rreq.rreq_id)
            route = rreq.route + (node.id,)
            self.sim.log_event("select", node.id, "RREP", _rid(rreq.rreq_id), f"hops={len(route) - 1}")
            self._send_back(node.id, BaselineRrep(rreq.rreq_id, route, len(route) - 1), "RREP",
                            _rid(rreq.rreq_id))
            return
        if rreq.rreq_id in node.seen_rreqs:
            return
        node.seen_rreqs.add(rreq.rreq_id)
        if now > rreq.expires_at or len(rreq.route) > rreq.max_hops:
            return
        fwd = BaselineRreq(rreq.rreq_id, rreq.source, rreq.destination, rreq.route + (node.id,),
                           rreq.expires_at, rreq.max_hops)
        self.sim.schedule(now + self.sim.model.processing_delay, "tx",
                          (node.id, fwd, "RREQ", _rid(rreq.rreq_id)))

    def _send_back(self, holder: int, packet, kind: str, ident: str) -> bool:
        """Unicast one hop toward the start of ``packet.route``."""
        nxt = packet.route[packet.index - 1]
        packet.index -= 1
        if self.sim.unicast(holder, nxt, packet, kind, ident):
            return True
        packet.index += 1
        if kind == "RERR":
            self.drop_rerr(packet, holder)
        else:
            self.sim.log_event("drop", holder, kind, ident, "reason=unroutable")
        return False

    def on_process(self, node: NodeState, packet, now: float) -> None:
        if isinstance(packet, DataPacket):
            self._forward(node, packet, now)
        elif isinstance(packet, BaselineRrep):
            self._send_back(node.id, packet, "RREP", _rid(packet.rreq_id))
        else:
            self._send_back(node.id, packet, "RERR", str(packet.flow_id))

    def transmit_data(self, flow: FlowState, packet: DataPacket, now: float) -> None:
        packet.route = flow.route.nodes
        packet.epoch = flow.epoch
        packet.hops, packet.visited = 0, []
        self._forward(self.sim.nodes[flow.source], packet, now)

    def _forward(self, node: NodeState, packet: DataPacket, now: float) -> None:
        action, nxt = baseline_forward(node.id, packet, self.sim.radio.linked)
        if action == "forward":
            packet.hops += 1
            if self.sim.unicast(node.id, nxt, packet, "DATA", packet.key):
                return
            packet.hops -= 1
        self.sim.log_event("break", node.id, "DATA", packet.key, "")
        i = packet.route.index(node.id)
        rerr = BaselineRerr(packet.flow_id, packet.source, packet.route[: i + 1], i, packet,
                            reporter=node.id)
        if i == 0:
            self.deliver_rerr_to_source(rerr, now)
        else:
            self._send_back(node.id, rerr, "RERR", str(packet.flow_id))
