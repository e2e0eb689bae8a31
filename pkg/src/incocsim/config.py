"""Run configuration: machine geometry, latencies, and the flat
``key = value`` config file format used for reproducible experiment bundles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import LatencyConfig
from .l1 import L1Config
from .l2 import L2Config
from .protocol import RemoteLoadPolicy


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    n_cores: int = 4
    l1: L1Config = field(default_factory=L1Config)
    l2: L2Config = field(default_factory=L2Config)
    latencies: LatencyConfig = field(default_factory=LatencyConfig)
    memory_size: int = 4 << 30
    page_size: int = 4096
    remote_load_policy: RemoteLoadPolicy = RemoteLoadPolicy.DOWNGRADE_SHARED
    seed: int = 0
    sx_retry_limit: int = 64  # failed store-exclusives retry from the load

    def validate(self) -> None:
        if self.n_cores < 1:
            raise ConfigError("n_cores must be >= 1")
        if self.page_size <= 0 or self.page_size & (self.page_size - 1):
            raise ConfigError("page_size must be a power of two")
        if self.memory_size <= 0 or self.memory_size % self.page_size:
            raise ConfigError("memory_size must be a positive multiple of page_size")
        try:
            self.l1.validate(self.page_size)
            self.l2.validate(self.l1.line_size)
            self.latencies.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "n_cores": self.n_cores,
            "memory_size": self.memory_size,
            "page_size": self.page_size,
            "remote_load_policy": self.remote_load_policy.value,
            "seed": self.seed,
            "l1": {"size_bytes": self.l1.size, "associativity": self.l1.associativity,
                   "line_size": self.l1.line_size},
            "l2": {"size_bytes": self.l2.size, "associativity": self.l2.associativity,
                   "line_size": self.l2.line_size},
            "latency": {
                "l1_proc": self.latencies.l1_proc,
                "l1_to_l2_hop": self.latencies.l1_to_l2_hop,
                "l2_proc": self.latencies.l2_proc,
                "l2_to_l1_hop": self.latencies.l2_to_l1_hop,
                "dram_access": self.latencies.dram_access,
                "queue_issue": self.latencies.queue_issue,
            },
        }


def _setter_int(obj, attr):
    def set_(cfg, raw, key):
        try:
            value = int(raw, 0)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
        setattr(obj(cfg), attr, value)
    return set_


def _set_policy(cfg, raw, key):
    try:
        cfg.remote_load_policy = RemoteLoadPolicy(raw)
    except ValueError:
        choices = ", ".join(p.value for p in RemoteLoadPolicy)
        raise ConfigError(f"{key}: expected one of {choices}, got {raw!r}") from None


_KEYS = {
    "n_cores": _setter_int(lambda c: c, "n_cores"),
    "memory_size": _setter_int(lambda c: c, "memory_size"),
    "page_size": _setter_int(lambda c: c, "page_size"),
    "seed": _setter_int(lambda c: c, "seed"),
    "sx_retry_limit": _setter_int(lambda c: c, "sx_retry_limit"),
    "remote_load_policy": _set_policy,
    "l1.size_bytes": _setter_int(lambda c: c.l1, "size"),
    "l1.associativity": _setter_int(lambda c: c.l1, "associativity"),
    "l1.line_size": _setter_int(lambda c: c.l1, "line_size"),
    "l2.size_bytes": _setter_int(lambda c: c.l2, "size"),
    "l2.associativity": _setter_int(lambda c: c.l2, "associativity"),
    "l2.line_size": _setter_int(lambda c: c.l2, "line_size"),
    "latency.l1_proc": _setter_int(lambda c: c.latencies, "l1_proc"),
    "latency.l1_to_l2_hop": _setter_int(lambda c: c.latencies, "l1_to_l2_hop"),
    "latency.l2_proc": _setter_int(lambda c: c.latencies, "l2_proc"),
    "latency.l2_to_l1_hop": _setter_int(lambda c: c.latencies, "l2_to_l1_hop"),
    "latency.dram_access": _setter_int(lambda c: c.latencies, "dram_access"),
    "latency.queue_issue": _setter_int(lambda c: c.latencies, "queue_issue"),
}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        setter = _KEYS.get(key)
        if setter is None:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            setter(cfg, value, key)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    cfg.validate()
    return cfg


def render_config(cfg: RunConfig) -> str:
    d = cfg.to_dict()
    lines = [
        f"n_cores = {d['n_cores']}",
        f"memory_size = {d['memory_size']}",
        f"page_size = {d['page_size']}",
        f"seed = {d['seed']}",
        f"remote_load_policy = {d['remote_load_policy']}",
        f"l1.size_bytes = {d['l1']['size_bytes']}",
        f"l1.associativity = {d['l1']['associativity']}",
        f"l1.line_size = {d['l1']['line_size']}",
        f"l2.size_bytes = {d['l2']['size_bytes']}",
        f"l2.associativity = {d['l2']['associativity']}",
        f"l2.line_size = {d['l2']['line_size']}",
    ]
    lines += [f"latency.{k} = {v}" for k, v in d["latency"].items()]
    return "\n".join(lines) + "\n"
