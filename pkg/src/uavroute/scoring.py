"""Path statistics, multi-criteria score and destination-side path selection.

The score rewards paths that carry many vehicles and penalises long
discovery delay, uneven vehicle distribution across zones and every UAV hop:

    average     = nb_vehicles / n_z
    s_deviation = sqrt(mean((density_i - average) ** 2))
    score       = (nb_vehicles / delay) / (1 + s_deviation + hops_uav)
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import DegeneratePathError
from .packets import PathRecord, RreqId, RrepPacket

DELAY_FLOOR = 1e-3


def compute_average(path: PathRecord) -> float:
    n_z = path.n_z
    if n_z == 0:
        raise DegeneratePathError("path has no zone entries")
    return path.nb_vehicles / n_z


def compute_sdeviation(path: PathRecord) -> float:
    avg = compute_average(path)
    dens = path.densities
    return math.sqrt(sum((z - avg) ** 2 for z in dens) / len(dens))


def compute_score(path: PathRecord) -> float:
    """Score ``path`` and cache ``average``/``s_deviation``/``score`` on it.

    Delays below 1 ms are clamped to 1 ms.
    """
    avg = compute_average(path)
    sdev = compute_sdeviation(path)
    delay = max(path.delay, DELAY_FLOOR)
    score = (path.nb_vehicles / delay) * (1.0 / (1.0 + sdev + path.hops_uav))
    path.average, path.s_deviation, path.score = avg, sdev, score
    return score


def _rank_key(p: PathRecord):
    return (-p.score, p.hops_uav, p.delay, tuple(p.zone_ids))


def select_path(
    candidates: Sequence[PathRecord],
    rreq_id: RreqId = (0, 0),
    destination_location: tuple[float, float] = (0.0, 0.0),
    source: int = -1,
    destination: int = -1,
) -> tuple[PathRecord, RrepPacket]:
    """Pick the best-scoring candidate and build the RREP carrying all of them.

    A lone candidate is taken as-is without scoring.  Ties on score go to
    fewer UAV hops, then smaller delay, then the lexicographically smaller
    zone sequence.
    """
    if not candidates:
        raise ValueError("no candidate paths")
    paths = list(candidates)
    if len(paths) == 1:
        selected = paths[0]
    else:
        for p in paths:
            compute_score(p)
        selected = min(paths, key=_rank_key)
    rrep = RrepPacket(rreq_id, source, destination, tuple(destination_location), selected, paths)
    return selected, rrep


def order_alternatives(paths: Sequence[PathRecord]) -> list[PathRecord]:
    """Alternatives in descending stored score (unscored paths last)."""
    return sorted(paths, key=lambda p: (p.score is None, -(p.score or 0.0), p.hops_uav,
                                        p.delay, tuple(p.zone_ids)))
