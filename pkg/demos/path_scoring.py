"""
Scoring discovered paths
========================

Three candidate paths reach the same destination.  Each is a list of
(zone id, vehicle count) rows; a "UAV" row marks a hop through a UAV.
"""

from uavroute import PathRecord, compute_average, compute_sdeviation, select_path

# the densest, evenly populated and fast path should win
candidates = {
    "dense": PathRecord.from_rows(list(zip(range(1, 13), [1, 2, 3, 2, 2, 1, 1, 1, 2, 2, 1, 1])), 1.0),
    "via uav": PathRecord.from_rows([(1, 1), (2, 2), (3, 3), (4, 2), "UAV", (9, 2), (10, 2),
                                     (11, 1), (12, 1)], 1.5),
    "detour": PathRecord.from_rows(list(zip([1, 13, 14, 15, 16, 17, 18, 19, 20, 21, 11, 12],
                                            [1, 2, 1, 2, 1, 1, 1, 2, 1, 1, 1, 1])), 4.5),
}

selected, rrep = select_path(list(candidates.values()))

print(f"{'path':10s} {'vehicles':>8s} {'zones':>5s} {'avg':>6s} {'sdev':>7s} {'delay':>6s} {'score':>8s}")
for name, p in candidates.items():
    print(f"{name:10s} {p.nb_vehicles:8d} {p.n_z:5d} {compute_average(p):6.3f} "
          f"{compute_sdeviation(p):7.4f} {p.delay:6.2f} {p.score:8.4f}")

winner = next(k for k, v in candidates.items() if v is selected)
print(f"\nselected: {winner}; the reply carries all {len(rrep.discovered_paths)} paths")
