"""Delivery metrics from event logs, seed aggregation and density sweeps."""

from __future__ import annotations

import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .eventlog import LogRecord, parse_log

CONTROL_KINDS = ("RREQ", "RREP", "RERR", "HELLO")
METRICS = ("pdr", "eed", "hops", "overhead")
CSV_HEADER = ("vehicles,protocol,pdr_mean,pdr_sd,eed_mean,eed_sd,"
              "hops_mean,hops_sd,overhead_mean,overhead_sd")


@dataclass
class MetricsReport:
    """Metrics for one run.

    ``eed`` and ``avg_hops`` are ``None`` and ``overhead`` is ``inf`` when
    nothing was delivered.
    """

    pdr: float
    eed: float | None
    avg_hops: float | None
    overhead: float
    sent: int
    delivered: int
    dropped: int
    expired: int
    control: dict[str, int] = field(default_factory=dict)


class MetricsCounter:
    """Running tallies that turn into a :class:`MetricsReport`."""

    def __init__(self) -> None:
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.expired = 0
        self.delay_sum = 0.0
        self.hop_sum = 0
        self.control = {k: 0 for k in CONTROL_KINDS}

    def report(self) -> MetricsReport:
        ctrl = sum(self.control.values())
        if self.delivered:
            eed = self.delay_sum / self.delivered
            hops = self.hop_sum / self.delivered
            overhead = ctrl / self.delivered
        else:
            eed = hops = None
            overhead = math.inf
        pdr = self.delivered / self.sent if self.sent else 0.0
        return MetricsReport(pdr, eed, hops, overhead, self.sent, self.delivered,
                             self.dropped, self.expired, dict(self.control))


def compute_metrics(log: Iterable[LogRecord] | str) -> MetricsReport:
    """Recount a finished run's metrics from its log records (or log text)."""
    if isinstance(log, str):
        log = parse_log(log)
    c = MetricsCounter()
    for r in log:
        ev = r.event
        if ev == "tx":
            if r.packet_kind in c.control:
                c.control[r.packet_kind] += 1
        elif r.packet_kind != "DATA":
            continue
        elif ev == "send":
            c.sent += 1
        elif ev == "recv":
            f = r.fields()
            c.delivered += 1
            c.delay_sum += r.time - float(f["orig"])
            c.hop_sum += int(f["hops"])
        elif ev == "drop":
            c.dropped += 1
        elif ev == "expire":
            c.expired += 1
    return c.report()


# -- aggregation --------------------------------------------------------------

def _metric(rep: MetricsReport, name: str) -> float | None:
    v = {"pdr": rep.pdr, "eed": rep.eed, "hops": rep.avg_hops, "overhead": rep.overhead}[name]
    if v is None or not math.isfinite(v):
        return None
    return v


@dataclass
class AggregateReport:
    """Per-metric mean and sample standard deviation across seeds.

    Runs where a metric is undefined (nothing delivered) are left out of that
    metric; a metric undefined in every run is ``nan``.
    """

    runs: int
    mean: dict[str, float]
    sd: dict[str, float]
    reports: list[MetricsReport] = field(default_factory=list, repr=False)


def aggregate(reports: Sequence[MetricsReport]) -> AggregateReport:
    if not reports:
        raise ValueError("nothing to aggregate")
    mean, sd = {}, {}
    for name in METRICS:
        vals = [v for v in (_metric(r, name) for r in reports) if v is not None]
        if not vals:
            mean[name], sd[name] = math.nan, math.nan
            continue
        mean[name] = math.fsum(vals) / len(vals)
        sd[name] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return AggregateReport(len(reports), mean, sd, list(reports))


def pooled_sd(a: AggregateReport, b: AggregateReport, name: str) -> float:
    return math.sqrt((a.sd[name] ** 2 + b.sd[name] ** 2) / 2)


# -- sweep --------------------------------------------------------------------

VARIANTS = ("proposed", "baseline", "proposed-without-uavs")


def variant_config(base, variant: str):
    if variant == "proposed":
        return base.replace(protocol="proposed")
    if variant == "baseline":
        return base.replace(protocol="baseline")
    if variant == "proposed-without-uavs":
        return base.replace(protocol="proposed", uavs=0)
    raise ValueError(f"unknown protocol variant {variant!r}")


@dataclass
class SweepRow:
    vehicles: int
    protocol: str
    result: AggregateReport

    def csv(self) -> str:
        cells = [str(self.vehicles), self.protocol]
        for name in METRICS:
            cells += [_fmt(self.result.mean[name]), _fmt(self.result.sd[name])]
        return ",".join(cells)


def _fmt(x: float) -> str:
    return "nan" if x is None or math.isnan(x) else f"{x:.6g}"


def density_sweep(base, vehicle_counts: Sequence[int], seeds: Sequence[int],
                  variants: Sequence[str] = VARIANTS, workers: int = 1) -> list[SweepRow]:
    """Run every (vehicle count, protocol variant) over ``seeds``."""
    from .engine import run_batch

    if not vehicle_counts:
        raise ValueError("vehicle_counts must be non-empty")
    rows = []
    for n in vehicle_counts:
        for v in variants:
            cfg = variant_config(base.replace(vehicles=n), v)
            try:
                agg = run_batch(cfg, seeds, workers=workers)
            except Exception as exc:
                raise RuntimeError(f"sweep failed at vehicles={n} protocol={v}: {exc}") from exc
            rows.append(SweepRow(n, v, agg))
    return rows


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(r.csv() + "\n")
    return buf.getvalue()


def report_csv(rep: MetricsReport) -> str:
    """Single-run report as a two-line CSV."""
    cols = ["pdr", "eed", "avg_hops", "overhead", "sent", "delivered", "dropped", "expired"]
    cols += [k.lower() for k in CONTROL_KINDS]
    vals = [rep.pdr, rep.eed, rep.avg_hops, rep.overhead, rep.sent, rep.delivered,
            rep.dropped, rep.expired] + [rep.control.get(k, 0) for k in CONTROL_KINDS]
    cells = [str(v) if isinstance(v, int) else ("nan" if v is None else f"{v:.6g}") for v in vals]
    return ",".join(cols) + "\n" + ",".join(cells) + "\n"
