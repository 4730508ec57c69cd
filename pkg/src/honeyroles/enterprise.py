"""Organisational roles, real/honey/server hosts and the defender's traffic.

Heartbeats and reports have a canonical big-endian byte layout so that every
message of one type has the same length on the wire:

heartbeat: mac(6) ip(4) port(u16) rre_count(u32) rre_interval_us(u64)
           timeout_us(u64) app_len(u16) app_info pad_len(u16) zeros
report:    agent(u32) interval(u32) requests_sent(u32) n_alerts(u16)
           n_alerts x [kind(u8) connection(u32) delay_us(u64) dropped(u16)]
           pad_len(u16) zeros
"""

from __future__ import annotations

import math
import random
import struct
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .detection import Alert
from .model import Connection, Host, HostKind
from .topology import PathPolicy, Topology, select_path

HEARTBEAT_SIZE = 512
REPORT_SIZE = 1024

_REAL_NET = 0x0A000000      # 10.0.0.0/16, real clients
_SERVER_NET = 0x0A010000    # 10.1.0.0/16, servers
_HONEY_NET = 0x0A800000     # 10.128.0.0/9, honey hosts
_HONEY_NET_SIZE = 1 << 23


class ConfigurationError(ValueError):
    pass


class AddressExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class RoleProfile:
    role: int
    real_members: tuple[int, ...]
    honey_factor: Fraction
    servers: tuple[int, ...]
    credential_stub: bytes = b""

    def __post_init__(self):
        if self.honey_factor < 0:
            raise ValueError("honey factor must be non-negative")
        if not self.servers:
            raise ValueError(f"role {self.role} needs at least one server")
        if set(self.servers) & set(self.real_members):
            raise ValueError("servers and role members must be disjoint")

    @property
    def honey_count(self) -> int:
        return honey_count(self.honey_factor, len(self.real_members))


def _exact(x: Fraction | float | int) -> Fraction:
    # floats go through their shortest decimal form, so 0.1 * 30 is exactly 3
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def honey_count(alpha: Fraction | float | int, n_real: int) -> int:
    return math.ceil(_exact(alpha) * n_real)


class HostRegistry:
    """All hosts of one world plus lookups by (kind, role) and by role's servers."""

    def __init__(self, hosts: Iterable[Host] = ()):
        self.hosts: list[Host] = []
        self._ips: set[int] = set()
        self._macs: set[int] = set()
        for h in hosts:
            self.add(h)

    def add(self, host: Host) -> None:
        if host.id != len(self.hosts):
            raise ValueError("host ids must be dense and added in order")
        if host.ip in self._ips or host.mac in self._macs:
            raise ValueError(f"duplicate address for host {host.id}")
        self.hosts.append(host)
        self._ips.add(host.ip)
        self._macs.add(host.mac)

    def __getitem__(self, host_id: int) -> Host:
        return self.hosts[host_id]

    def __len__(self) -> int:
        return len(self.hosts)

    def __iter__(self):
        return iter(self.hosts)

    @property
    def next_id(self) -> int:
        return len(self.hosts)

    def clients(self, kind: HostKind, role: int) -> list[Host]:
        return [h for h in self.hosts if not h.server and h.kind is kind and h.role == role]

    def has_ip(self, ip: int) -> bool:
        return ip in self._ips

    def has_mac(self, mac: int) -> bool:
        return mac in self._macs


def _mac_for(ip: int) -> int:
    # locally administered unicast prefix 02:00
    return (0x02 << 40) | ip


def build_real_side(
    topo: Topology,
    n_roles: int,
    n_real: int,
    n_servers: int,
    honey_factor: Fraction | float = Fraction(1),
    placement: str = "spread",
) -> tuple[list[RoleProfile], HostRegistry]:
    """Fixed real clients and servers.

    Real client ``i`` sits on edge switch ``i mod E`` with role ``i mod n_roles``.
    Server ``j`` serves role ``j mod n_roles``. With ``"spread"`` it sits on
    edge ``j mod E``; with ``"racks"`` servers are grouped ``n_roles`` to a rack
    and racks are spaced evenly over the edges, so a rack edge carries traffic
    of every role.
    """
    edges = topo.edge_switches
    if not edges:
        raise ConfigurationError("topology has no edge switch for host attachment")
    if n_roles < 1 or n_real < 1 or n_servers < 1:
        raise ConfigurationError("roles, real hosts and servers must all be positive")
    if n_servers < n_roles:
        raise ConfigurationError(f"{n_servers} servers cannot cover {n_roles} roles")
    if n_real < n_roles:
        raise ConfigurationError(f"{n_real} real hosts cannot cover {n_roles} roles")
    registry = HostRegistry()
    members: dict[int, list[int]] = defaultdict(list)
    servers: dict[int, list[int]] = defaultdict(list)
    for i in range(n_real):
        ip = _REAL_NET + 1 + i
        host = Host(registry.next_id, ip, _mac_for(ip), HostKind.REAL, i % n_roles,
                    edges[i % len(edges)])
        registry.add(host)
        members[host.role].append(host.id)
    racks = math.ceil(n_servers / n_roles)
    stride = max(1, len(edges) // racks)
    for j in range(n_servers):
        ip = _SERVER_NET + 1 + j
        if placement == "racks":
            rack_edge = edges[((j // n_roles) * stride) % len(edges)]
        elif placement == "spread":
            rack_edge = edges[j % len(edges)]
        else:
            raise ConfigurationError(f"unknown server placement {placement!r}")
        host = Host(registry.next_id, ip, _mac_for(ip), HostKind.REAL, j % n_roles,
                    rack_edge, server=True)
        registry.add(host)
        servers[host.role].append(host.id)
    roles = [
        RoleProfile(role, tuple(members[role]), _exact(honey_factor), tuple(servers[role]),
                    credential_stub=f"cred-role{role}".encode())
        for role in range(n_roles)
    ]
    return roles, registry


def instantiate_honey_hosts(
    profile: RoleProfile,
    topo: Topology,
    rng: random.Random,
    registry: HostRegistry,
) -> list[Host]:
    """Add ``ceil(alpha * |ID_r|)`` honey hosts for one role to ``registry``.

    Addresses are drawn at random from the honey block and edge switches
    uniformly; both stay fixed for the lifetime of the registry.
    """
    edges = topo.edge_switches
    if not edges:
        raise ConfigurationError("topology has no edge switch for host attachment")
    count = profile.honey_count
    used = sum(1 for h in registry if _HONEY_NET <= h.ip < _HONEY_NET + _HONEY_NET_SIZE)
    if used + count > _HONEY_NET_SIZE - 2:
        raise AddressExhausted(f"honey address block cannot hold {used + count} hosts")
    created = []
    for _ in range(count):
        while True:
            ip = _HONEY_NET + 1 + rng.randrange(_HONEY_NET_SIZE - 2)
            if not registry.has_ip(ip):
                break
        mac = _mac_for(ip) | (0x80 << 32)
        while registry.has_mac(mac):
            mac = (0x02 << 40) | rng.getrandbits(40)
        host = Host(registry.next_id, ip, mac, HostKind.HONEY, profile.role, rng.choice(edges))
        registry.add(host)
        created.append(host)
    return created


class ConnectionGenerator:
    """Draws connections the way the PRISM Defender module does.

    Per draw: kind (honey with ``honey_ratio``), role uniform, source uniform in
    (kind, role), destination uniform over the role's servers, path uniform over
    the enumerated paths between the two edge switches.
    """

    def __init__(self, roles: Sequence[RoleProfile], registry: HostRegistry,
                 topo: Topology, policy: PathPolicy, honey_ratio: float = 0.5):
        if not 0 <= honey_ratio <= 1:
            raise ConfigurationError("honey_ratio must lie in [0, 1]")
        if not roles:
            raise ConfigurationError("at least one role is required")
        self.registry = registry
        self.topo = topo
        self.policy = policy
        self.honey_ratio = float(honey_ratio)
        self.roles = list(roles)
        self._sources: dict[tuple[HostKind, int], list[Host]] = {}
        for profile in self.roles:
            for kind in HostKind:
                group = registry.clients(kind, profile.role)
                needed = (self.honey_ratio < 1) if kind is HostKind.REAL else (self.honey_ratio > 0)
                if not group and needed:
                    raise ConfigurationError(
                        f"role {profile.role} has no {kind.name.lower()} client hosts")
                self._sources[(kind, profile.role)] = group
        self._servers = {p.role: [registry[s] for s in p.servers] for p in self.roles}

    def __call__(self, rng: random.Random, seq: int = 0, round_index: int = 0) -> Connection:
        kind = HostKind.HONEY if rng.random() < self.honey_ratio else HostKind.REAL
        role = self.roles[rng.randrange(len(self.roles))].role
        sources = self._sources[(kind, role)]
        src = sources[rng.randrange(len(sources))]
        servers = self._servers[role]
        dst = servers[rng.randrange(len(servers))]
        path = select_path(self.topo.paths(src.switch, dst.switch, self.policy), rng)
        return Connection(seq, kind, role, src.id, dst.id, path, round_index)


def generate_connection(roles: Sequence[RoleProfile], hosts: HostRegistry, topo: Topology,
                        policy: PathPolicy, honey_ratio: float, rng: random.Random) -> Connection:
    return ConnectionGenerator(roles, hosts, topo, policy, honey_ratio)(rng)


# --- traffic profiles -------------------------------------------------------

@dataclass(frozen=True)
class Observation:
    """One observed real session between a client and a server."""
    source: int
    destination: int
    start: float
    payload_bytes: int
    duration: float = 0.0
    requests: int = 1
    protocol: str = "tcp"
    port: int = 443
    mac: int = 0


@dataclass(frozen=True)
class PairProfile:
    payload_size_mean: float
    active_sessions_mean: float
    inter_arrival_mean: float
    inter_connection_gaps: dict[float, float]
    header_distribution: dict[tuple[str, int, int], float]
    requests: dict[int, float]
    connections: int


@dataclass(frozen=True)
class TrafficProfile:
    interval: float
    pairs: dict[tuple[int, int], PairProfile]

    def for_server(self, server: int) -> dict[tuple[int, int], PairProfile]:
        return {k: v for k, v in self.pairs.items() if k[1] == server}


def _empirical(values: Iterable) -> dict:
    counts = Counter(values)
    total = sum(counts.values())
    return {v: n / total for v, n in sorted(counts.items())}


def capture_profile(observed: Sequence[Observation], interval: float) -> TrafficProfile:
    if not observed:
        raise ValueError("cannot build a traffic profile from no observations")
    if interval <= 0:
        raise ValueError("interval must be positive")
    by_pair: dict[tuple[int, int], list[Observation]] = defaultdict(list)
    for obs in observed:
        by_pair[(obs.source, obs.destination)].append(obs)
    pairs = {}
    for key, group in sorted(by_pair.items()):
        group.sort(key=lambda o: o.start)
        gaps = [b.start - a.start for a, b in zip(group, group[1:])]
        inter_arrival = sum(gaps) / len(gaps) if gaps else interval
        pairs[key] = PairProfile(
            payload_size_mean=sum(o.payload_bytes for o in group) / len(group),
            active_sessions_mean=sum(o.duration for o in group) / interval,
            inter_arrival_mean=inter_arrival,
            inter_connection_gaps=_empirical(gaps) if gaps else {interval: 1.0},
            header_distribution=_empirical((o.protocol, o.port, o.mac) for o in group),
            requests=_empirical(o.requests for o in group),
            connections=len(group),
        )
    return TrafficProfile(interval, pairs)


def _draw(dist: dict, rng: random.Random):
    values = list(dist)
    return rng.choices(values, weights=[dist[v] for v in values])[0]


def honey_schedule(profile: TrafficProfile, honey_sources: Sequence[Host], horizon: float,
                   rng: random.Random) -> list[tuple[float, int, int]]:
    """Replay every captured pair as a renewal process from a mapped honey host.

    Real sources map round-robin onto ``honey_sources``. Returns sorted
    ``(time, honey_host_id, server_id)`` triples within ``[0, horizon)``.
    """
    if not honey_sources:
        raise ConfigurationError("no honey hosts to replay the profile from")
    real_sources = sorted({src for src, _ in profile.pairs})
    mapping = {src: honey_sources[i % len(honey_sources)].id for i, src in enumerate(real_sources)}
    events = []
    for (src, server), pair in profile.pairs.items():
        t = _draw(pair.inter_connection_gaps, rng) * rng.random()
        while t < horizon:
            events.append((t, mapping[src], server))
            t += _draw(pair.inter_connection_gaps, rng)
    events.sort()
    return events


# --- heartbeats -------------------------------------------------------------

@dataclass(frozen=True)
class Heartbeat:
    destination_mac: int
    destination_ip: int
    destination_port: int
    rre_count: int
    rre_interval: float
    app_protocol_info: bytes
    estimated_timeout: float
    size: int = HEARTBEAT_SIZE

    _HEAD = struct.Struct(">6s4sHIQQH")

    def mandatory_size(self) -> int:
        return self._HEAD.size + len(self.app_protocol_info) + 2

    def to_bytes(self) -> bytes:
        body = self._HEAD.pack(
            self.destination_mac.to_bytes(6, "big"),
            self.destination_ip.to_bytes(4, "big"),
            self.destination_port,
            self.rre_count,
            round(self.rre_interval * 1e6),
            round(self.estimated_timeout * 1e6),
            len(self.app_protocol_info),
        ) + self.app_protocol_info
        pad = self.size - len(body) - 2
        if pad < 0:
            raise ValueError(f"heartbeat fields need {len(body) + 2} bytes, size is {self.size}")
        return body + struct.pack(">H", pad) + bytes(pad)


def build_heartbeat(profile: TrafficProfile, server: Host, fixed_size: int,
                    rng: random.Random, estimated_timeout: float = 5.0,
                    app_protocol_info: bytes = b"") -> Heartbeat:
    pairs = profile.for_server(server.id)
    if not pairs:
        raise ValueError(f"profile has no traffic towards server {server.id}")
    keys = sorted(pairs)
    pair = pairs[keys[rng.randrange(len(keys))]]
    header = _draw(pair.header_distribution, rng)
    info = app_protocol_info or b"url=https://%s/;cookie=stub" % server.ip_text.encode()
    hb = Heartbeat(
        destination_mac=server.mac,
        destination_ip=server.ip,
        destination_port=header[1],
        rre_count=max(1, int(_draw(pair.requests, rng))),
        rre_interval=float(_draw(pair.inter_connection_gaps, rng)),
        app_protocol_info=info,
        estimated_timeout=estimated_timeout,
        size=fixed_size,
    )
    if hb.mandatory_size() > fixed_size:
        raise ValueError(f"heartbeat fields need {hb.mandatory_size()} bytes, "
                         f"fixed size is {fixed_size}")
    return hb


# --- reports ----------------------------------------------------------------

_REPORT_HEAD = struct.Struct(">IIIH")
_ALERT = struct.Struct(">BIQH")


@dataclass(frozen=True)
class HoneyReport:
    agent: int
    interval: int
    requests_sent: int
    alerts: tuple[Alert, ...] = field(default_factory=tuple)
    size: int = REPORT_SIZE

    def __post_init__(self):
        if len(self.alerts) > self.requests_sent:
            raise ValueError("a report cannot carry more alerts than requests sent")

    def to_bytes(self) -> bytes:
        body = _REPORT_HEAD.pack(self.agent, self.interval, self.requests_sent, len(self.alerts))
        for a in self.alerts:
            body += _ALERT.pack(int(a.kind), a.connection.seq, round(a.average_delay * 1e6),
                                a.dropped_requests)
        pad = self.size - len(body) - 2
        if pad < 0:
            raise ValueError(f"{len(self.alerts)} alerts do not fit a {self.size}-byte report")
        return body + struct.pack(">H", pad) + bytes(pad)


def build_report(agent: Host, round_index: int, sent: int, alerts: Sequence[Alert],
                 size: int = REPORT_SIZE) -> HoneyReport:
    if agent.kind is HostKind.REAL:
        # real hosts answer heartbeats too, with nothing in them
        return HoneyReport(agent.id, round_index, 0, (), size)
    return HoneyReport(agent.id, round_index, sent, tuple(alerts), size)
