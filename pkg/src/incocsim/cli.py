"""Command-line driver.

Verbs: simulate (run a trace file), scenario (run a canned workload),
verify (randomized invariant suite), report (convert a report file),
serve (start the HTTP API).

Exit codes: 0 success, 2 input error, 3 simulation fault, 4 verification
failure. Setting INCOC_SIM_LOG=1 adds the event log to simulate/scenario
output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, RunConfig, parse_config
from .engine import Report, SimulationFault
from .machine import Machine
from .memory import MemoryError_, MemoryType
from .reporting import load_json, rows_to_csv, to_csv, to_json
from .traces import (
    TraceError, gen_dirty_miss, gen_micro, gen_producer_consumer,
    gen_write_storm, parse_trace, render_trace,
)
from .verify import run_verification

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FAULT = 3
EXIT_VERIFY = 4


def _log_enabled(args) -> bool:
    return args.emit_log or os.environ.get("INCOC_SIM_LOG") == "1"


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as f:
        return parse_config(f.read())


def _write_report(report: Report, config: RunConfig, out_path: str | None,
                  emit_log: bool) -> None:
    doc = json.loads(to_json(report, config))
    if emit_log:
        doc["event_log"] = report.event_log
    text = json.dumps(doc, indent=2) + "\n"
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as f:
            f.write(text)


def _run(trace, config: RunConfig, emit_log: bool) -> Report:
    if trace.n_cores_required() > config.n_cores:
        config.n_cores = trace.n_cores_required()
    machine = Machine(config, log_enabled=emit_log)
    return machine.run(trace)


def cmd_simulate(args) -> int:
    try:
        config = _load_config(args.config)
        with open(args.trace) as f:
            trace = parse_trace(f.read(), memory_size=config.memory_size)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, TraceError, MemoryError_) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    emit_log = _log_enabled(args)
    try:
        report = _run(trace, config, emit_log=True)
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        for line in exc.event_log:
            print(line, file=sys.stderr)
        return EXIT_FAULT
    except (TraceError, MemoryError_) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_report(report, config, args.out, emit_log)
    return EXIT_OK


_SCENARIOS = ("dirty-miss", "write-storm", "micro-load", "micro-store",
              "micro-lock", "pipeline")


def _build_scenario(args):
    mem_type = MemoryType.from_name(args.memtype)
    name = args.scenario
    if name == "dirty-miss":
        return gen_dirty_miss(mem_type, n_cores=args.cores or 2)
    if name == "write-storm":
        return gen_write_storm(args.cores or 4, mem_type)
    if name.startswith("micro-"):
        return gen_micro(name[len("micro-"):], args.sharing, mem_type,
                         n_cores=args.cores or 4, iters=args.iters)
    if name == "pipeline":
        return gen_producer_consumer(n_stages=args.cores or 4,
                                     typing=args.typing)
    raise ValueError(f"unknown scenario {name!r}")


def _summary(report: Report, baseline_path: str | None) -> str:
    agg = report.aggregates()["overall"]
    lines = [
        f"requests measured : {agg['count']}",
        f"mean latency      : {agg['mean']:.1f}",
        f"max latency       : {agg['max']}",
        f"first complete    : {report.first_complete_tick()}",
        f"all complete      : {report.all_complete_tick()}",
    ]
    if baseline_path:
        with open(baseline_path) as f:
            base = load_json(f.read())
        base_span = (base["aggregates"].get("all_complete", 0)
                     - base.get("measure_from", 0))
        span = report.all_complete_tick() - report.measure_from
        if base_span > 0:
            lines.append(f"vs baseline       : {span / base_span:.3f}x "
                         "measured all-complete")
    return "\n".join(lines) + "\n"


def cmd_scenario(args) -> int:
    try:
        trace, n_cores = _build_scenario(args)
        config = _load_config(args.config)
        config.n_cores = max(config.n_cores, n_cores)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    emit_log = _log_enabled(args)
    try:
        report = _run(trace, config, emit_log=True)
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        for line in exc.event_log:
            print(line, file=sys.stderr)
        return EXIT_FAULT
    _write_report(report, config, args.out, emit_log)
    try:
        summary = _summary(report, args.baseline)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stderr.write(summary)
    if args.dump_trace:
        with open(args.dump_trace, "w") as f:
            f.write(render_trace(trace))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        config = _load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    n, violations = run_verification(n_traces=args.traces, seed=config.seed
                                     if args.seed is None else args.seed)
    print(f"{n} traces checked, {len(violations)} violations")
    for v in violations:
        print(str(v), file=sys.stderr)
    return EXIT_OK if not violations else EXIT_VERIFY


def cmd_report(args) -> int:
    try:
        with open(args.report) as f:
            doc = load_json(f.read())
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        out = json.dumps(doc, indent=2) + "\n"
    else:
        out = rows_to_csv(doc["per_request"])
    if args.out is None or args.out == "-":
        sys.stdout.write(out)
    else:
        with open(args.out, "w") as f:
            f.write(out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incocsim",
        description="Cycle-level multicore cache hierarchy simulator with "
                    "MSI coherence and per-page memory types.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="run a trace file")
    p.add_argument("trace")
    p.add_argument("--config")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--emit-log", action="store_true", dest="emit_log",
                   help="include the event log in the report")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("scenario", help="run a canned workload")
    p.add_argument("scenario", choices=_SCENARIOS)
    p.add_argument("--memtype", default="normal",
                   choices=[m.value for m in MemoryType])
    p.add_argument("--cores", type=int)
    p.add_argument("--sharing", default="shared", choices=("private", "shared"))
    p.add_argument("--iters", type=int, default=2500)
    p.add_argument("--typing", default="selective",
                   choices=("normal", "selective", "blind"))
    p.add_argument("--config")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--baseline", help="report to normalize the summary against")
    p.add_argument("--dump-trace", help="also write the generated trace here")
    p.add_argument("--emit-log", action="store_true", dest="emit_log")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("verify", help="run the randomized invariant suite")
    p.add_argument("--traces", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("report", help="convert a report file")
    p.add_argument("report")
    p.add_argument("--format", default="csv", choices=("json", "csv"))
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
