"""Deterministic discrete-event simulation of vehicles, UAVs and routing traffic."""

from __future__ import annotations

import copy
import heapq
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .config import ScenarioConfig
from .errors import BatchRunError, OffRoadError, Unreachable
from .eventlog import LogRecord, format_log
from .metrics import AggregateReport, MetricsCounter, MetricsReport, aggregate
from .mobility import (VehicleFleet, assign_patrols, load_trace, random_vehicle_state, step_uav)
from .packets import DataPacket
from .protocol import FlowState, ProposedRouter
from .radio import (HelloPacket, LinkModel, NodeKind, NodeState, RadioMedium, beacon_tick,
                    receive_hello)
from .roadmap import SNAP_TOLERANCE, RoadMap, build_grid_map

log = logging.getLogger(__name__)

# named random streams derived from the master seed
_PLACEMENT, _VEHICLE, _UAV, _FLOWS, _BEACON, _LOSS = range(6)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


class Scheduler:
    """Priority queue of ``(time, sequence)``-ordered events."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, str, Any]] = []
        self._seq = 0

    def push(self, time: float, kind: str, payload: Any) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def pop(self) -> tuple[float, int, str, Any]:
        return heapq.heappop(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class DiscoveryProbe:
    route: Any
    rreq_id: Any
    rreq_transmissions: int
    destination_arrivals: int


class Simulator:
    """One simulation instance.

    Owns the node states, radio medium, routing agent and event queue.  All
    randomness flows from ``cfg.seed`` through named streams, so equal
    configurations give equal event logs.
    """

    def __init__(self, cfg: ScenarioConfig, *, roadmap: RoadMap | None = None,
                 nodes: Sequence[NodeState] | None = None, keep_log: bool = True,
                 record_trace: bool = False):
        self.cfg = cfg.validate()
        self.roadmap = roadmap or build_grid_map(cfg.rows, cfg.cols, cfg.block_length,
                                                 cfg.zone_size, cfg.range)
        self.model = LinkModel(cfg.range, cfg.uav_range, cfg.per_hop_latency,
                               cfg.processing_delay, cfg.obstacles, cfg.hello_interval,
                               cfg.staleness, cfg.loss_probability)
        self.now = 0.0
        self.queue = Scheduler()
        self.log: list[LogRecord] | None = [] if keep_log else None
        self.counter = MetricsCounter()
        self.outstanding: dict[tuple[int, int], DataPacket] = {}
        self.tx_count: Counter = Counter()
        self.trace_lines: list[str] | None = [] if record_trace else None
        self._finished = False
        self._fleet: VehicleFleet | None = None
        self._uavs = []
        self._trace = None

        seed = cfg.seed
        if nodes is not None:
            self.mode = "static"
            # private copies: a run fills neighbor tables and must not leak into the caller's nodes
            self.nodes = copy.deepcopy(list(nodes))
            for n in self.nodes:
                if not n.is_uav and n.zone is None:
                    n.zone = self.roadmap.zone_for(n.segment, self._offset(n.segment, n.position))
        elif cfg.mobility == "trace":
            self.mode = "trace"
            self._init_trace(load_trace(cfg.trace_file))
        else:
            self.mode = cfg.mobility
            self._init_builtin(seed)
        self.vehicle_ids = [n.id for n in self.nodes if not n.is_uav]
        self._is_uav = np.array([n.is_uav for n in self.nodes], dtype=bool)
        self.radio = RadioMedium(self.nodes, self.roadmap, self.model,
                                 _rng(seed, _LOSS) if cfg.loss_probability > 0 else None)

        if cfg.protocol == "baseline":
            from .baseline import BaselineRouter
            self.router = BaselineRouter(self)
        else:
            self.router = ProposedRouter(self)

        if self.mode != "static":
            self._record_positions()
            self.schedule(cfg.mobility_step, "mobility", 1)
        phases = _rng(seed, _BEACON).uniform(0.0, cfg.hello_interval, len(self.nodes))
        for n in self.nodes:
            if self.router.participates(n):
                self.schedule(float(phases[n.id]), "beacon", n.id)
        if nodes is None:
            self._init_flows(seed)

    # -- setup ----------------------------------------------------------------

    def _offset(self, segment: int, position) -> float:
        a = self.roadmap.intersections[self.roadmap.segments[segment].endpoint_a]
        return math.hypot(position[0] - a[0], position[1] - a[1])

    def _init_builtin(self, seed: int) -> None:
        cfg = self.cfg
        place = _rng(seed, _PLACEMENT)
        states = [random_vehicle_state(i, self.roadmap, place, cfg.vehicle_max_speed)
                  for i in range(cfg.vehicles)]
        self._fleet = VehicleFleet(self.roadmap, states,
                                   [_rng(seed, _VEHICLE, i) for i in range(cfg.vehicles)],
                                   cfg.vehicle_max_speed)
        self.nodes = [NodeState(i, NodeKind.VEHICLE, (0.0, 0.0, 0.0)) for i in range(cfg.vehicles)]
        if cfg.uavs:
            self._uavs = assign_patrols(self.roadmap, cfg.uavs, cfg.vehicles, _rng(seed, _UAV),
                                        cfg.uav_altitude, cfg.uav_min_speed, cfg.uav_max_speed)
            self.nodes += [NodeState(u.node, NodeKind.UAV, u.position) for u in self._uavs]
        self._apply_vehicle_positions(self._fleet.positions(), self._fleet.segment)

    def _init_trace(self, trace) -> None:
        ids = sorted(trace)
        if ids != list(range(len(ids))):
            raise ValueError("trace node ids must be 0..N-1")
        self._trace = [trace[i] for i in ids]
        self.nodes = [NodeState(i, NodeKind.UAV if trace[i].is_aerial else NodeKind.VEHICLE,
                                (0.0, 0.0, 0.0)) for i in ids]
        self._trace_veh = [i for i in ids if not trace[i].is_aerial]
        self._trace_uav = [i for i in ids if trace[i].is_aerial]
        self._trace_prev_seg = np.full(len(self._trace_veh), -1, dtype=np.int64)
        self._apply_trace(0.0)

    def _init_flows(self, seed: int) -> None:
        cfg = self.cfg
        rng = _rng(seed, _FLOWS)
        veh = self.vehicle_ids
        if cfg.senders == 0:
            return
        sources = rng.choice(len(veh), size=cfg.senders, replace=False)
        for fid, si in enumerate(sources.tolist()):
            di = int(rng.integers(len(veh) - 1))
            if di >= si:
                di += 1
            start = cfg.flow_start + float(rng.uniform(0.0, cfg.send_interval))
            self.add_flow(veh[si], veh[di], start, fid)

    def add_flow(self, source: int, destination: int, start: float,
                 flow_id: int | None = None) -> FlowState:
        """Register a constant-rate flow whose first packet leaves at ``start``."""
        if flow_id is None:
            flow_id = max((f for f in self.router.flows if f >= 0), default=-1) + 1
        flow = FlowState(flow_id, source, destination)
        self.router.add_flow(flow)
        if start <= self.cfg.duration:
            self.schedule(start, "flow", flow_id)
        return flow

    # -- mobility -------------------------------------------------------------

    def _apply_vehicle_positions(self, pos2: np.ndarray, segments: np.ndarray) -> None:
        rm = self.roadmap
        if len(pos2):
            a = rm.intersections[rm.seg_a[segments]]
            offsets = np.hypot(pos2[:, 0] - a[:, 0], pos2[:, 1] - a[:, 1])
            zones = rm.zones_for(segments, offsets).tolist()
        else:
            zones = []
        xs, ys, segs = pos2[:, 0].tolist(), pos2[:, 1].tolist(), segments.tolist()
        nodes = self.nodes
        for i in range(len(xs)):
            n = nodes[i]
            n.position = (xs[i], ys[i], 0.0)
            n.segment = segs[i]
            n.zone = zones[i]

    def _apply_trace(self, t: float) -> None:
        tr = self._trace
        for i in self._trace_uav:
            self.nodes[i].position = tr[i].position_at(t)
        if not self._trace_veh:
            return
        pos = np.array([tr[i].position_at(t)[:2] for i in self._trace_veh])
        nxt = np.array([tr[i].position_at(t + self.cfg.mobility_step)[:2] for i in self._trace_veh])
        seg = self._resolve_segments(pos, nxt, t)
        self._trace_prev_seg = seg
        for k, i in enumerate(self._trace_veh):
            n = self.nodes[i]
            n.position = (float(pos[k, 0]), float(pos[k, 1]), 0.0)
            n.segment = int(seg[k])
            n.zone = self.roadmap.zone_for(n.segment, self._offset(n.segment, n.position))

    def _seg_distances(self, pos: np.ndarray) -> np.ndarray:
        rm = self.roadmap
        a = rm.intersections[rm.seg_a]
        ab = rm.intersections[rm.seg_b] - a
        rel = pos[:, None, :] - a[None, :, :]
        t = np.clip((rel * ab[None]).sum(-1) / (rm.seg_len ** 2)[None], 0.0, 1.0)
        proj = a[None] + ab[None] * t[..., None]
        return np.hypot(pos[:, None, 0] - proj[..., 0], pos[:, None, 1] - proj[..., 1])

    def _resolve_segments(self, pos: np.ndarray, nxt: np.ndarray, t: float) -> np.ndarray:
        """Segment of each trace vehicle: the nearest one, with ties at
        intersections resolved toward the segment the vehicle moves onto."""
        d = self._seg_distances(pos)
        best = d.min(axis=1)
        if np.any(best > SNAP_TOLERANCE):
            k = int(np.argmax(best > SNAP_TOLERANCE))
            raise OffRoadError(f"trace node {self._trace_veh[k]} off-road at t={t}")
        out = d.argmin(axis=1)
        tied = np.flatnonzero(((d <= best[:, None] + 1e-9).sum(axis=1)) > 1)
        if len(tied):
            dn = self._seg_distances(nxt[tied])
            for j, k in enumerate(tied):
                cands = np.flatnonzero(d[k] <= best[k] + 1e-9)
                prev = self._trace_prev_seg[k]
                out[k] = min(cands, key=lambda s: (round(dn[j, s], 9), s != prev, s))
        return out

    def _step_mobility(self, k: int) -> None:
        dt = self.cfg.mobility_step
        t = k * dt
        if self.mode == "trace":
            self._apply_trace(t)
        else:
            self._fleet.step(dt)
            self._apply_vehicle_positions(self._fleet.positions(), self._fleet.segment)
            base = len(self._fleet)
            for j, u in enumerate(self._uavs):
                u = step_uav(u, dt)
                self._uavs[j] = u
                self.nodes[base + j].position = u.position
        self.radio.invalidate()
        self._record_positions(t)
        if (k + 1) * dt <= self.cfg.duration:
            self.schedule((k + 1) * dt, "mobility", k + 1)

    def _record_positions(self, t: float = 0.0) -> None:
        if self.trace_lines is None:
            return
        for n in self.nodes:
            x, y, z = n.position
            if n.is_uav:
                self.trace_lines.append(f"{t!r} {n.id} {x!r} {y!r} {z!r}")
            else:
                self.trace_lines.append(f"{t!r} {n.id} {x!r} {y!r}")

    def dump_trace(self, path) -> None:
        if self.trace_lines is None:
            raise ValueError("simulator was not recording positions")
        with open(path, "w") as fh:
            fh.write("\n".join(self.trace_lines) + "\n")

    # -- primitives used by routers ------------------------------------------

    def schedule(self, time: float, kind: str, payload: Any) -> None:
        self.queue.push(time, kind, payload)

    def log_event(self, event: str, node: int, packet_kind: str, ident: str, detail: str = "") -> None:
        if self.log is not None:
            self.log.append(LogRecord(self.now, event, node, packet_kind, ident, detail))

    def _count_tx(self, kind: str, ident: str) -> None:
        if kind in self.counter.control:
            self.counter.control[kind] += 1
        if kind == "RREQ":
            self.tx_count[ident] += 1

    def broadcast(self, sender: int, packet: Any, kind: str, ident: str) -> int:
        self.log_event("tx", sender, kind, ident, "bcast")
        self._count_tx(kind, ident)
        rx = [r for r, _ in self.radio.deliver(sender, packet, "broadcast", self.now)]
        if rx:
            self.schedule(self.now + self.model.per_hop_latency, "arrival", (sender, packet, rx))
        return len(rx)

    def unicast(self, sender: int, target: int, packet: Any, kind: str, ident: str) -> bool:
        self._count_tx(kind, ident)
        try:
            self.radio.deliver(sender, packet, "unicast", self.now, target)
        except Unreachable:
            self.log_event("tx", sender, kind, ident, f"to={target} fail=1")
            return False
        self.log_event("tx", sender, kind, ident, f"to={target}")
        self.schedule(self.now + self.model.per_hop_latency, "arrival", (sender, packet, (target,)))
        return True

    def data_sent(self, packet: DataPacket) -> None:
        self.counter.sent += 1
        self.outstanding[(packet.flow_id, packet.seq)] = packet
        self.log_event("send", packet.source, "DATA", packet.key, f"dst={packet.destination}")

    def data_delivered(self, packet: DataPacket, node: int) -> None:
        if self.outstanding.pop((packet.flow_id, packet.seq), None) is None:
            return
        c = self.counter
        c.delivered += 1
        c.delay_sum += self.now - packet.origination_time
        c.hop_sum += packet.hops
        self.log_event("recv", node, "DATA", packet.key,
                       f"hops={packet.hops} orig={packet.origination_time!r}")

    def data_dropped(self, packet: DataPacket, node: int, reason: str) -> None:
        if self.outstanding.pop((packet.flow_id, packet.seq), None) is None:
            return
        self.counter.dropped += 1
        self.log_event("drop", node, "DATA", packet.key, f"reason={reason}")

    # -- event loop -----------------------------------------------------------

    def _dispatch(self, kind: str, payload: Any) -> None:
        now = self.now
        if kind == "arrival":
            sender, packet, receivers = payload
            nodes = self.nodes
            if isinstance(packet, HelloPacket):
                for r in receivers:
                    if self.router.participates(nodes[r]):
                        receive_hello(nodes[r], packet, now)
                return
            router = self.router
            for r in receivers:
                node = nodes[r]
                if router.participates(node):
                    router.on_receive(node, packet, sender, now)
        elif kind == "tx":
            node, packet, pkind, ident = payload
            self.broadcast(node, packet, pkind, ident)
        elif kind == "process":
            node, packet = payload
            self.router.on_process(self.nodes[node], packet, now)
        elif kind == "beacon":
            node = self.nodes[payload]
            hello = beacon_tick(node, now, self.model.staleness)
            self.broadcast(node.id, hello, "HELLO", str(node.id))
            self.schedule(now + self.model.hello_interval, "beacon", payload)
        elif kind == "mobility":
            self._step_mobility(payload)
        elif kind == "timer":
            self.router.on_timer(payload, now)
        elif kind == "flow":
            self._flow_send(payload)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _flow_send(self, flow_id: int) -> None:
        flow = self.router.flows[flow_id]
        pkt = DataPacket(flow_id, flow.next_seq, flow.source, flow.destination, (0.0, 0.0),
                         None, [], self.now, self.cfg.packet_size)
        flow.next_seq += 1
        self.data_sent(pkt)
        self.router.send_data(flow, pkt, self.now)
        nxt = self.now + self.cfg.send_interval
        if nxt <= self.cfg.duration:
            self.schedule(nxt, "flow", flow_id)

    def run_until(self, t_end: float) -> None:
        q = self.queue
        while len(q) and q.peek_time() <= t_end:
            time, _, kind, payload = q.pop()
            self.now = time
            self._dispatch(kind, payload)
        self.now = max(self.now, t_end) if math.isfinite(t_end) else self.now

    def run(self) -> tuple[list[LogRecord] | None, MetricsReport]:
        """Simulate ``[0, duration]`` and return the event log and metrics."""
        if self._finished:
            raise RuntimeError("simulator already ran")
        self.run_until(self.cfg.duration)
        self.finish()
        return self.log, self.counter.report()

    def finish(self) -> None:
        self.now = self.cfg.duration
        for key in sorted(self.outstanding):
            pkt = self.outstanding[key]
            self.counter.expired += 1
            self.log_event("expire", pkt.source, "DATA", pkt.key, "")
        self.outstanding.clear()
        self._finished = True

    # -- static-snapshot helpers ---------------------------------------------

    @classmethod
    def from_snapshot(cls, roadmap: RoadMap, nodes: Sequence[NodeState],
                      cfg: ScenarioConfig | None = None, **kw) -> "Simulator":
        """Simulator over fixed node positions, with no flows and no mobility."""
        cfg = (cfg or ScenarioConfig()).replace(senders=0, mobility="static",
                                                vehicles=max(1, sum(not n.is_uav for n in nodes)),
                                                uavs=sum(n.is_uav for n in nodes))
        return cls(cfg, roadmap=roadmap, nodes=nodes, **kw)

    def warm_up(self, rounds: int = 2) -> None:
        """Run enough hello rounds for neighbor tables to settle."""
        self.run_until(self.now + rounds * self.model.hello_interval)

    def probe_discovery(self, source: int, destination: int) -> DiscoveryProbe:
        """Run one route discovery to completion and report what happened."""
        fid = -1 - len([f for f in self.router.flows if f < 0])
        flow = FlowState(fid, source, destination)
        self.router.add_flow(flow)
        self.router.start_discovery(flow, self.now)
        rreq_id = flow.discovery
        self.run_until(self.now + self.router.discovery_timeout - 1e-9)
        ident = f"{rreq_id[0]}.{rreq_id[1]}"
        route = flow.route if flow.state == "active" and flow.epoch == rreq_id else None
        return DiscoveryProbe(route, rreq_id, self.tx_count[ident],
                              self.router.arrivals[rreq_id])

    def format_log(self) -> str:
        return format_log(self.log or [])


def run(config: ScenarioConfig, **kw) -> tuple[list[LogRecord] | None, MetricsReport]:
    """Simulate one scenario; equal ``config`` (seed included) gives equal output."""
    return Simulator(config, **kw).run()


def _run_metrics(config: ScenarioConfig) -> MetricsReport:
    return Simulator(config, keep_log=False).run()[1]


def run_batch(config: ScenarioConfig, seeds: Sequence[int], workers: int = 1) -> AggregateReport:
    """Run ``config`` once per seed and aggregate; seed order does not matter."""
    if not seeds:
        raise ValueError("seeds must be non-empty")
    ordered = sorted(seeds)
    configs = [config.replace(seed=s) for s in ordered]
    reports: list[MetricsReport] = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_metrics, c) for c in configs]
            for s, fut in zip(ordered, futures):
                try:
                    reports.append(fut.result())
                except Exception as exc:
                    raise BatchRunError(s, exc) from exc
    else:
        for s, c in zip(ordered, configs):
            try:
                reports.append(_run_metrics(c))
            except Exception as exc:
                raise BatchRunError(s, exc) from exc
    return aggregate(reports)
