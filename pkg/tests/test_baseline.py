from collections import deque

import numpy as np

from uavroute import ScenarioConfig, Simulator
from uavroute.baseline import BaselineRoute, baseline_discover, baseline_forward
from uavroute.packets import DataPacket
from uavroute.radio import in_range

from conftest import uav, vehicle

BASE = ScenarioConfig().replace(protocol="baseline")


def _sim(city, nodes, **kw):
    sim = Simulator.from_snapshot(city, nodes, BASE.replace(**kw))
    sim.warm_up(2)
    return sim


def _bfs_hops(nodes, rm, model, src, dst, allow=lambda n: True):
    dist = {src: 0}
    q = deque([src])
    while q:
        a = q.popleft()
        for b in nodes:
            if b.id not in dist and allow(b) and in_range(nodes[a], b, rm, model):
                dist[b.id] = dist[a] + 1
                q.append(b.id)
    return dist.get(dst)


def test_direct_link(city):
    sim = _sim(city, [vehicle(city, 0, 0, 100.0), vehicle(city, 1, 0, 250.0)])
    route = baseline_discover(sim, 0, 1)
    assert route.nodes == (0, 1)
    assert route.hops == 1


def test_linear_chain(city):
    nodes = [vehicle(city, i, 1, 100.0 + 250.0 * i) for i in range(5)]
    sim = _sim(city, nodes)
    assert baseline_discover(sim, 0, 4).nodes == (0, 1, 2, 3, 4)


def test_disconnected_times_out(city):
    sim = _sim(city, [vehicle(city, 0, 0, 100.0), vehicle(city, 1, 5, 1500.0)])
    probe = sim.probe_discovery(0, 1)
    assert probe.route is None
    assert probe.destination_arrivals == 0
    sim.run_until(sim.now + 0.01)
    assert any(r.event == "timeout" for r in sim.log)


def test_uavs_never_relay(city):
    # the only bridge between the two vehicles is a UAV
    nodes = [vehicle(city, 0, 0, 700.0), vehicle(city, 1, 0, 1100.0), uav(2, 900.0, 0.0, 100.0)]
    sim = _sim(city, nodes)
    assert in_range(nodes[0], nodes[2], city, sim.model)
    assert in_range(nodes[1], nodes[2], city, sim.model)
    assert not in_range(nodes[0], nodes[1], city, sim.model)
    assert baseline_discover(sim, 0, 1) is None
    assert not any(r.node == 2 for r in sim.log)
    assert sim.nodes[2].neighbor_table == {}


def test_route_never_shorter_than_graph_distance(city):
    rng = np.random.default_rng(12)
    found = 0
    for trial in range(40):
        nodes = []
        for i in range(30):
            s = int(rng.integers(0, 4))
            nodes.append(vehicle(city, i, s, float(rng.uniform(0, 2000))))
        sim = _sim(city, nodes, seed=trial)
        route = baseline_discover(sim, 0, 1)
        hops = _bfs_hops(sim.nodes, city, sim.model, 0, 1)
        assert (route is None) == (hops is None)
        if route is not None:
            found += 1
            assert route.nodes[0] == 0 and route.nodes[-1] == 1
            assert len(set(route.nodes)) == len(route.nodes)
            assert route.hops >= hops
    assert found >= 5


def _packet(route):
    pkt = DataPacket(0, 0, route[0], route[-1], (0.0, 0.0), None, [], 0.0)
    pkt.route = route
    return pkt


def test_forward_along_intact_chain():
    links = {(0, 1), (1, 2), (2, 3)}
    linked = lambda a, b: (a, b) in links  # noqa: E731
    pkt = _packet((0, 1, 2, 3))
    holder, path = 0, [0]
    while holder != 3:
        action, nxt = baseline_forward(holder, pkt, linked)
        assert action == "forward"
        holder = nxt
        path.append(holder)
    assert path == [0, 1, 2, 3]


def test_moved_relay_triggers_rediscovery():
    pkt = _packet((0, 1, 2, 3))
    assert baseline_forward(1, pkt, lambda a, b: False) == ("rediscover", None)


def test_chain_delivery_end_to_end(city):
    nodes = [vehicle(city, i, 1, 100.0 + 250.0 * i) for i in range(5)]
    sim = Simulator.from_snapshot(city, nodes, BASE.replace(duration=12.5))
    sim.warm_up(2)
    sim.add_flow(0, 4, 3.0)
    _, rep = sim.run()
    assert rep.sent == 10
    assert rep.delivered == 10
    assert rep.avg_hops == 4.0


def test_isolated_source_after_break_drops(city):
    nodes = [vehicle(city, 0, 1, 100.0), vehicle(city, 1, 1, 300.0)]
    sim = Simulator.from_snapshot(city, nodes, BASE.replace(duration=20.0))
    sim.warm_up(2)
    sim.add_flow(0, 1, 3.0)
    sim.run_until(4.5)
    assert sim.counter.delivered >= 1
    # the destination drives off; the source is now alone
    far = vehicle(city, 1, 7, 1500.0)
    sim.nodes[1].position, sim.nodes[1].segment, sim.nodes[1].zone = far.position, far.segment, far.zone
    sim.radio.invalidate()
    _, rep = sim.run()
    assert rep.dropped > 0
    assert rep.sent == rep.delivered + rep.dropped + rep.expired
    reasons = {r.detail for r in sim.log if r.event == "drop" and r.packet_kind == "DATA"}
    assert "reason=no-route" in reasons


def test_route_type_rejects_loops():
    import pytest
    with pytest.raises(ValueError):
        BaselineRoute(0, (1, 2, 1), 0.0)
