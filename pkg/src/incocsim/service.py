"""HTTP API over the simulator core.

POST /simulate  run a trace file body
POST /scenario  run a canned workload
POST /verify    run the randomized invariant suite
GET  /healthz   liveness probe

Simulation faults return 500 with the event log; malformed traces or
configs return 400 with the same line-precise message the CLI prints.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .engine import SimulationFault
from .machine import Machine
from .memory import MemoryError_, MemoryType
from .reporting import report_dict
from .traces import (
    TraceError, gen_dirty_miss, gen_micro, gen_producer_consumer,
    gen_write_storm, parse_trace, render_trace,
)
from .verify import run_verification

app = FastAPI(title="incocsim", version=__version__)


class SimulateRequest(BaseModel):
    trace: str = Field(description="trace file contents")
    config: str | None = Field(default=None, description="flat key = value config")
    emit_log: bool = False


class ScenarioRequest(BaseModel):
    name: str
    memtype: str = "normal"
    cores: int | None = None
    sharing: str = "shared"
    iters: int = Field(default=2500, ge=1)
    typing: str = "selective"
    config: str | None = None
    emit_log: bool = False
    include_trace: bool = False


class VerifyRequest(BaseModel):
    traces: int = Field(default=100, ge=0)
    seed: int = 0


class ReportResponse(BaseModel):
    report: dict
    event_log: list[str] | None = None
    summary: dict | None = None
    trace: str | None = None


class VerifyResponse(BaseModel):
    traces: int
    passed: bool
    violations: list[str]


def _config_from(text: str | None) -> RunConfig:
    return parse_config(text) if text else RunConfig()


def _run_or_http(trace, config: RunConfig, emit_log: bool):
    if trace.n_cores_required() > config.n_cores:
        config.n_cores = trace.n_cores_required()
    machine = Machine(config, log_enabled=emit_log)
    try:
        return machine.run(trace)
    except SimulationFault as exc:
        raise HTTPException(
            status_code=500,
            detail={"error": str(exc), "event_log": exc.event_log}) from exc


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/simulate", response_model=ReportResponse,
          response_model_exclude_none=True)
def simulate(req: SimulateRequest) -> ReportResponse:
    try:
        config = _config_from(req.config)
        trace = parse_trace(req.trace, memory_size=config.memory_size)
    except (ConfigError, TraceError, MemoryError_) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    report = _run_or_http(trace, config, req.emit_log)
    return ReportResponse(
        report=report_dict(report, config),
        event_log=report.event_log if req.emit_log else None)


def _build_scenario(req: ScenarioRequest):
    mem_type = MemoryType.from_name(req.memtype)
    if req.name == "dirty-miss":
        return gen_dirty_miss(mem_type, n_cores=req.cores or 2)
    if req.name == "write-storm":
        return gen_write_storm(req.cores or 4, mem_type)
    if req.name.startswith("micro-"):
        return gen_micro(req.name[len("micro-"):], req.sharing, mem_type,
                         n_cores=req.cores or 4, iters=req.iters)
    if req.name == "pipeline":
        return gen_producer_consumer(n_stages=req.cores or 4, typing=req.typing)
    raise ValueError(f"unknown scenario {req.name!r}")


@app.post("/scenario", response_model=ReportResponse,
          response_model_exclude_none=True)
def scenario(req: ScenarioRequest) -> ReportResponse:
    try:
        trace, n_cores = _build_scenario(req)
        config = _config_from(req.config)
        config.n_cores = max(config.n_cores, n_cores)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    report = _run_or_http(trace, config, req.emit_log)
    agg = report.aggregates()["overall"]
    summary = {
        "count": agg["count"],
        "mean": agg["mean"],
        "max": agg["max"],
        "first_complete": report.first_complete_tick(),
        "all_complete": report.all_complete_tick(),
    }
    return ReportResponse(
        report=report_dict(report, config),
        event_log=report.event_log if req.emit_log else None,
        summary=summary,
        trace=render_trace(trace) if req.include_trace else None)


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest) -> VerifyResponse:
    n, violations = run_verification(n_traces=req.traces, seed=req.seed)
    return VerifyResponse(traces=n, passed=not violations,
                          violations=[str(v) for v in violations])
