"""Cycle-level simulator for a multicore cache hierarchy with MSI coherence
and per-page memory-type control, including inner-non-cacheable
outer-cacheable (INC-OC) memory served single-copy from the shared L2.
"""

from .config import ConfigError, RunConfig, parse_config, render_config
from .engine import Deadlock, LatencyConfig, Report, RequestResult, SimulationFault, TypeMismatch
from .memory import MemoryModel, MemoryType
from .machine import Machine, run_trace
from .protocol import MSIState, Op, ProtocolViolation, RemoteLoadPolicy
from .traces import (
    Trace, TraceError, TraceOrderError, TraceRangeError, TraceRecord,
    TraceSyntaxError, gen_dirty_miss, gen_micro, gen_producer_consumer,
    gen_write_storm, parse_trace, render_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "RunConfig", "parse_config", "render_config",
    "Deadlock", "LatencyConfig", "Report", "RequestResult",
    "SimulationFault", "TypeMismatch",
    "MemoryModel", "MemoryType", "Machine", "run_trace",
    "MSIState", "Op", "ProtocolViolation", "RemoteLoadPolicy",
    "Trace", "TraceError", "TraceOrderError", "TraceRangeError",
    "TraceRecord", "TraceSyntaxError",
    "gen_dirty_miss", "gen_micro", "gen_producer_consumer", "gen_write_storm",
    "parse_trace", "render_trace",
    "__version__",
]
