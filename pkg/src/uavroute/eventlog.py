"""Line-oriented event log.

One record per line: ``time event_kind node packet_kind id detail``, where
``detail`` is zero or more ``key=value`` tokens.  Times are written with
``repr`` so a parsed log reproduces the in-memory floats exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple


class LogRecord(NamedTuple):
    time: float
    event: str
    node: int
    packet_kind: str
    ident: str
    detail: str = ""

    def format(self) -> str:
        line = f"{self.time!r} {self.event} {self.node} {self.packet_kind} {self.ident}"
        return f"{line} {self.detail}" if self.detail else line

    def fields(self) -> dict[str, str]:
        return dict(tok.split("=", 1) for tok in self.detail.split() if "=" in tok)


def format_log(records: Iterable[LogRecord]) -> str:
    return "".join(r.format() + "\n" for r in records)


def parse_line(line: str) -> LogRecord:
    parts = line.split(" ", 5)
    if len(parts) < 5:
        raise ValueError(f"malformed log line: {line!r}")
    detail = parts[5] if len(parts) == 6 else ""
    return LogRecord(float(parts[0]), parts[1], int(parts[2]), parts[3], parts[4], detail)


def parse_log(text: str) -> list[LogRecord]:
    return [parse_line(line) for line in text.splitlines() if line.strip()]


def write_log(records: Iterable[LogRecord], path) -> None:
    Path(path).write_text(format_log(records))


def read_log(path) -> list[LogRecord]:
    return parse_log(Path(path).read_text())
