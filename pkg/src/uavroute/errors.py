"""Exception types raised by the simulator and protocol library."""


class UavRouteError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(UavRouteError, ValueError):
    pass


class OffRoadError(UavRouteError, ValueError):
    """A position is farther than the snap tolerance from every road segment."""


class TraceParseError(UavRouteError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegeneratePathError(UavRouteError, ValueError):
    """A path carries no zone entries, so per-zone statistics are undefined."""


class ConfigError(UavRouteError, ValueError):
    pass


class Unreachable(UavRouteError):
    """Unicast target is not within radio range of the sender."""

    def __init__(self, sender: int, target: int):
        self.sender = sender
        self.target = target
        super().__init__(f"node {target} unreachable from node {sender}")


class BatchRunError(UavRouteError):
    def __init__(self, seed: int, cause: BaseException):
        self.seed = seed
        self.cause = cause
        super().__init__(f"run with seed {seed} failed: {cause!r}")
