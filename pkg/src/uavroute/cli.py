"""Command-line entry point: ``uavroute run | sweep | metrics``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ScenarioConfig
from .engine import Simulator
from .errors import UavRouteError
from .eventlog import read_log
from .metrics import VARIANTS, compute_metrics, density_sweep, report_csv, sweep_csv


def _densities(text: str) -> list[int]:
    try:
        counts = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad density list {text!r}") from None
    if not counts or any(c < 2 for c in counts):
        raise argparse.ArgumentTypeError("densities must be integers >= 2")
    return counts


def _load(path: str | None) -> ScenarioConfig:
    return ScenarioConfig.from_file(path) if path else ScenarioConfig()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _load(args.config).replace(seed=args.seed)
    sim = Simulator(cfg, keep_log=args.log is not None)
    log, report = sim.run()
    if args.log:
        Path(args.log).write_text(sim.format_log())
    _emit(report_csv(report), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))
    variants = args.protocols.split(",") if args.protocols else VARIANTS
    rows = density_sweep(cfg, args.densities, seeds, variants, workers=args.workers)
    _emit(sweep_csv(rows), args.out)
    return 0


def cmd_metrics(args) -> int:
    report = compute_metrics(read_log(args.log))
    _emit(report_csv(report), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavroute",
                                description="Zone-based VANET routing with UAV relays: simulate and measure.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", help="INI scenario file (defaults apply when omitted)")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--log", help="write the event log here")
    r.add_argument("--out", help="write the metrics CSV here instead of stdout")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="density sweep over protocol variants")
    s.add_argument("--config")
    s.add_argument("--densities", type=_densities, default=[80, 120, 160, 200])
    s.add_argument("--seeds", type=int, default=15, help="number of seeds, counted up from the config seed")
    s.add_argument("--protocols", help=f"comma list from {','.join(VARIANTS)}")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("metrics", help="recompute metrics from an event log")
    m.add_argument("--log", required=True)
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seeds", 1) < 1:
        parser.error("--seeds must be at least 1")
    try:
        return args.func(args)
    except (UavRouteError, OSError, ValueError, RuntimeError) as exc:
        print(f"uavroute: error: {exc}", file=sys.stderr)
        return 1
