"""TOML run configuration to ``SimConfig``, with line-numbered diagnostics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FsPath

import tomli

from .detection import DetectorConfig
from .engine import SimConfig, load_topology
from .topology import PathMode, PathPolicy, TopologyError

SCHEMA = {
    "environment": {"roles", "rounds", "round_length", "topology", "gml", "honey_ratio"},
    "nodes": {"real", "honey_factor", "servers", "server_placement"},
    "paths": {"mode", "max_extra_hops", "max_overlap"},
    "adversary": {"compromised", "target_role", "confidence_init", "confidence_cap"},
    "detector": {"timeout", "delta", "noise", "adaptive"},
    "bms": {"beta", "prism_counter_init"},
    "run": {"samples", "master_seed", "warmup"},
}

_MODES = {m.value: m for m in PathMode}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def format(self, source: str = "<config>") -> str:
        return f"{source}:{self.line}: {self.message}" if self.line else f"{source}: {self.message}"


@dataclass
class ConfigError(Exception):
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __str__(self):
        return "; ".join(d.format() for d in self.diagnostics)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> line, by a plain line scan; enough for our flat files."""
    lines: dict[tuple[str, str], int] = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            section = m.group(1)
            lines.setdefault((section, ""), no)
            continue
        m = re.match(r"^([A-Za-z0-9_-]+)\s*=", line)
        if m:
            lines.setdefault((section, m.group(1)), no)
    return lines


def _toml_error_line(err: tomli.TOMLDecodeError) -> int:
    m = re.search(r"line (\d+)", str(err))
    return int(m.group(1)) if m else 0


def validate_config(text: str, base_dir: FsPath | None = None) -> SimConfig:
    """Parse and validate; raises ``ConfigError`` carrying every problem found."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError([Diagnostic(_toml_error_line(err), f"syntax error: {err}")]) from None
    where = _key_lines(text)
    diags: list[Diagnostic] = []

    def err(section: str, key: str, msg: str):
        diags.append(Diagnostic(where.get((section, key), where.get((section, ""), 0)), msg))

    for section, body in data.items():
        if section not in SCHEMA:
            err(section, "", f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            err(section, "", f"[{section}] must be a table")
            continue
        for key in body:
            if key not in SCHEMA[section]:
                err(section, key, f"unknown key {key!r} in [{section}]")

    def get(section, key, kind, default):
        value = data.get(section, {}).get(key, default) if isinstance(data.get(section, {}), dict) else default
        if value is default:
            return default
        ok = {
            int: isinstance(value, int) and not isinstance(value, bool),
            float: isinstance(value, (int, float)) and not isinstance(value, bool),
            bool: isinstance(value, bool),
            str: isinstance(value, str),
            list: isinstance(value, list),
        }[kind]
        if not ok:
            err(section, key, f"{section}.{key} must be {kind.__name__}, got {type(value).__name__}")
            return default
        return value

    d = SimConfig()
    kw: dict = {}
    kw["roles"] = get("environment", "roles", int, d.roles)
    kw["rounds"] = get("environment", "rounds", int, d.rounds)
    kw["round_length"] = get("environment", "round_length", int, d.round_length)
    kw["topology"] = get("environment", "topology", str, d.topology)
    gml = get("environment", "gml", str, None)
    if gml is not None:
        path = FsPath(gml)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            err("environment", "gml", f"gml file {gml!r} not found")
        kw["gml_path"] = str(path)
    kw["honey_ratio"] = float(get("environment", "honey_ratio", float, d.honey_ratio))
    kw["n_real"] = get("nodes", "real", int, d.n_real)
    hf = get("nodes", "honey_factor", float, None)
    kw["honey_factor"] = d.honey_factor if hf is None else Fraction(str(hf))
    kw["n_servers"] = get("nodes", "servers", int, d.n_servers)
    kw["server_placement"] = get("nodes", "server_placement", str, d.server_placement)

    mode_text = get("paths", "mode", str, d.path_policy.mode.value)
    mode = _MODES.get(mode_text)
    if mode is None:
        err("paths", "mode", f"paths.mode must be one of {sorted(_MODES)}")
        mode = d.path_policy.mode
    hops = get("paths", "max_extra_hops", int, d.path_policy.max_extra_hops)
    overlap = get("paths", "max_overlap", float, None)
    overlap = d.path_policy.max_overlap_fraction if overlap is None else Fraction(str(overlap))
    if "max_overlap" in data.get("paths", {}) and mode is not PathMode.OVERLAP_TOLERANT:
        err("paths", "max_overlap", "paths.max_overlap only applies to mode = \"overlap\"")

    compromised = get("adversary", "compromised", list, list(d.compromised))
    sel = []
    for item in compromised:
        if isinstance(item, bool) or not isinstance(item, (int, str)):
            err("adversary", "compromised", f"compromised entries must be ids or \"tier:index\", got {item!r}")
        else:
            sel.append(item)
    kw["compromised"] = tuple(sel)
    kw["target_role"] = get("adversary", "target_role", int, d.target_role)
    kw["confidence_init"] = get("adversary", "confidence_init", int, d.confidence_init)
    kw["confidence_cap"] = get("adversary", "confidence_cap", int, d.confidence_cap)

    det = d.detector
    timeout = get("detector", "timeout", float, det.estimated_timeout)
    delta = get("detector", "delta", float, det.timeout_increment)
    noise = get("detector", "noise", float, det.benign_drop_probability)
    adaptive = get("detector", "adaptive", bool, det.adaptive_timeout)

    kw["beta"] = float(get("bms", "beta", float, d.beta))
    kw["prism_counter_init"] = get("bms", "prism_counter_init", bool, d.prism_counter_init)
    kw["samples"] = get("run", "samples", int, d.samples)
    kw["master_seed"] = get("run", "master_seed", int, d.master_seed)
    kw["warmup"] = get("run", "warmup", int, d.warmup)

    # value checks, each reported against its own line
    checks = [
        ("environment", "roles", kw["roles"] >= 1, "roles must be positive"),
        ("environment", "rounds", kw["rounds"] >= 1, "rounds must be positive"),
        ("environment", "round_length", kw["round_length"] >= 1, "round_length must be positive"),
        ("environment", "honey_ratio", 0 <= kw["honey_ratio"] <= 1, "honey_ratio must lie in [0, 1]"),
        ("nodes", "real", kw["n_real"] >= kw["roles"], "need at least one real host per role"),
        ("nodes", "servers", kw["n_servers"] >= kw["roles"], "need at least one server per role"),
        ("nodes", "honey_factor", kw["honey_factor"] >= 0, "honey_factor must be non-negative"),
        ("nodes", "server_placement", kw["server_placement"] in ("spread", "racks"),
         "server_placement must be \"spread\" or \"racks\""),
        ("paths", "max_extra_hops", hops >= 0, "max_extra_hops must be non-negative"),
        ("paths", "max_overlap", 0 <= overlap <= 1, "max_overlap must lie in [0, 1]"),
        ("adversary", "target_role", 0 <= kw["target_role"] < max(kw["roles"], 1),
         "target_role must name one of the configured roles"),
        ("adversary", "confidence_init", 0 <= kw["confidence_init"] <= kw["confidence_cap"] <= 100,
         "need 0 <= confidence_init <= confidence_cap <= 100"),
        ("detector", "timeout", timeout > 0, "detector timeout must be positive"),
        ("detector", "delta", delta >= 0, "detector delta must be non-negative"),
        ("detector", "noise", 0 <= noise < 1, "detector noise must lie in [0, 1)"),
        ("bms", "beta", 0 < kw["beta"] < 1, "beta must lie strictly between 0 and 1"),
        ("run", "samples", kw["samples"] >= 1, "samples must be positive"),
        ("run", "warmup", 0 <= kw["warmup"] < kw["rounds"], "warmup must be below rounds"),
    ]
    for section, key, ok, msg in checks:
        if not ok:
            err(section, key, msg)
    if diags:
        raise ConfigError(diags)

    kw["path_policy"] = PathPolicy(mode, hops, overlap)
    kw["detector"] = DetectorConfig(timeout, delta, noise, adaptive_timeout=adaptive)
    cfg = SimConfig(**kw)
    try:
        topo = load_topology(cfg)
    except (TopologyError, ValueError, OSError) as exc:
        raise ConfigError([Diagnostic(where.get(("environment", "gml" if gml else "topology"), 0),
                                      f"topology: {exc}")]) from None
    for s in cfg.compromised:
        try:
            topo.resolve(s)
        except (TopologyError, ValueError, KeyError) as exc:
            err("adversary", "compromised", f"compromised switch {s!r}: {exc}")
    if diags:
        raise ConfigError(diags)
    return cfg


def load_config(path: str | FsPath) -> SimConfig:
    path = FsPath(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError([Diagnostic(0, f"config file {str(path)!r} not found")]) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([Diagnostic(0, f"cannot read config: {exc}")]) from None
    return validate_config(text, path.parent)
