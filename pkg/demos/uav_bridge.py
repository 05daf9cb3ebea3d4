"""
A UAV closing a gap between two road clusters
=============================================

Two groups of parked vehicles sit on the same road, 500 m apart, so no
ground link joins them.  A UAV hovering over the gap relays for them.
"""

from uavroute import ScenarioConfig, Simulator, build_grid_map
from uavroute.radio import NodeKind, NodeState

city = build_grid_map(3, 3, 2000.0, 300.0)


def parked(node_id, segment, offset):
    x, y = city.point_on(segment, offset)
    return NodeState(node_id, NodeKind.VEHICLE, (x, y, 0.0), segment, city.zone_for(segment, offset))


left = [parked(i, 0, 200.0 + 120.0 * i) for i in range(4)]     # 200 .. 560 m
right = [parked(4 + i, 0, 1060.0 + 120.0 * i) for i in range(4)]  # 1060 .. 1420 m
drone = NodeState(8, NodeKind.UAV, (810.0, 0.0, 100.0))

for nodes, label in ((left + right, "without the UAV"), (left + right + [drone], "with the UAV")):
    sim = Simulator.from_snapshot(city, nodes, ScenarioConfig().replace(duration=20.0))
    sim.warm_up(2)
    sim.add_flow(0, 7, 3.0)
    log, report = sim.run()
    print(f"{label}: sent {report.sent}, delivered {report.delivered}, "
          f"hops {report.avg_hops}")
    # the route the destination picked, as zone ids with UAV hops in brackets
    for rec in log:
        if rec.event == "select":
            print("  ", rec.detail)
            break
