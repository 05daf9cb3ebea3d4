"""Zone-based VANET routing with UAV relays, with a seeded discrete-event simulator."""

from .baseline import BaselineRoute, BaselineRouter, baseline_discover, baseline_forward
from .config import ScenarioConfig
from .engine import Simulator, run, run_batch
from .errors import (BatchRunError, ConfigError, DegeneratePathError, InvalidParameterError,
                     OffRoadError, TraceParseError, Unreachable, UavRouteError)
from .eventlog import LogRecord, parse_log, read_log, write_log
from .metrics import (AggregateReport, MetricsReport, aggregate, compute_metrics, density_sweep,
                      sweep_csv)
from .mobility import (TraceSeries, UavMobilityState, VehicleFleet, VehicleMobilityState,
                       assign_patrols, load_trace, step_uav, step_vehicle)
from .packets import (DataPacket, PathRecord, RerrPacket, RreqPacket, RrepPacket, UavEntry,
                      ZoneEntry)
from .protocol import (FlowState, ProposedRouter, forward_data, greedy_next_hop, handle_rerr,
                       handle_rreq, initiate_discovery)
from .radio import LinkModel, NodeKind, NodeState, RadioMedium, in_range, line_of_sight, zone_density
from .roadmap import RoadMap, Segment, Zone, build_grid_map, zone_of
from .scoring import compute_average, compute_score, compute_sdeviation, select_path

__version__ = "0.1.0"
