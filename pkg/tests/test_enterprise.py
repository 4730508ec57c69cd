import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from honeyroles.detection import Alert
from honeyroles.enterprise import (
    HEARTBEAT_SIZE, REPORT_SIZE, ConfigurationError, ConnectionGenerator, HoneyReport,
    HostRegistry, Observation, RoleProfile, build_heartbeat, build_real_side, build_report,
    capture_profile, generate_connection, honey_count, honey_schedule, instantiate_honey_hosts,
)
from honeyroles.model import AttackKind, Connection, Host, HostKind
from honeyroles.topology import PathPolicy, SwitchTier, Topology, preset


def world(n_roles=3, n_real=50, n_servers=6, alpha=Fraction(1), seed=0, topo=None):
    topo = topo or preset("paper-14")
    roles, reg = build_real_side(topo, n_roles, n_real, n_servers, alpha)
    rng = random.Random(seed)
    for p in roles:
        instantiate_honey_hosts(p, topo, rng, reg)
    return topo, roles, reg


@pytest.mark.parametrize("alpha,n,want", [(1, 5, 5), (Fraction(1, 2), 5, 3), (0.1, 30, 3), (0, 7, 0)])
def test_honey_count(alpha, n, want):
    assert honey_count(alpha, n) == want


def test_honey_hosts_for_half_factor():
    topo = preset("paper-14")
    roles, reg = build_real_side(topo, 1, 5, 1, Fraction(1, 2))
    made = instantiate_honey_hosts(roles[0], topo, random.Random(3), reg)
    assert len(made) == 3
    assert all(h.kind is HostKind.HONEY and h.role == 0 for h in made)
    assert all(topo.tiers[h.switch] is SwitchTier.EDGE for h in made)


def test_table_defaults_give_fifty_and_fifty():
    _, roles, reg = world()
    real = [h for h in reg if h.kind is HostKind.REAL and not h.server]
    honey = [h for h in reg if h.kind is HostKind.HONEY]
    servers = [h for h in reg if h.server]
    # 50 real hosts split 17/17/16 over three roles, with alpha = 1 per role
    assert (len(real), len(honey), len(servers)) == (50, 50, 6)
    for p in roles:
        assert len(reg.clients(HostKind.HONEY, p.role)) == p.honey_count == len(p.real_members)
        assert len(p.servers) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(4, 60), st.integers(4, 8),
       st.fractions(0, 3, max_denominator=10), st.integers(0, 10**6))
def test_registry_invariants(n_roles, n_real, n_servers, alpha, seed):
    if n_real < n_roles or n_servers < n_roles:
        return
    _, roles, reg = world(n_roles, n_real, n_servers, alpha, seed)
    assert len({h.ip for h in reg}) == len(reg)
    assert len({h.mac for h in reg}) == len(reg)
    for p in roles:
        assert len(reg.clients(HostKind.HONEY, p.role)) == honey_count(alpha, len(p.real_members))
        assert not set(p.servers) & set(p.real_members)


def test_honey_placement_fixed():
    a = world(seed=5)[2]
    b = world(seed=5)[2]
    assert [(h.ip, h.mac, h.switch) for h in a] == [(h.ip, h.mac, h.switch) for h in b]


def test_server_placements():
    topo = preset("paper-14")
    _, reg = build_real_side(topo, 3, 50, 6, placement="spread")
    assert [h.switch for h in reg if h.server] == [0, 1, 2, 3, 4, 5]
    _, reg = build_real_side(topo, 3, 50, 6, placement="racks")
    assert [h.switch for h in reg if h.server] == [0, 0, 0, 3, 3, 3]
    with pytest.raises(ConfigurationError):
        build_real_side(topo, 3, 50, 6, placement="moon")


def test_setup_errors():
    topo = preset("paper-14")
    with pytest.raises(ConfigurationError):
        build_real_side(topo, 3, 50, 2)
    with pytest.raises(ConfigurationError):
        build_real_side(topo, 3, 2, 6)
    cores = Topology.from_edges([SwitchTier.CORE] * 2, [(0, 1)])
    with pytest.raises(ConfigurationError):
        build_real_side(cores, 1, 1, 1)


def test_registry_rejects_duplicates():
    reg = HostRegistry([Host(0, 1, 1, HostKind.REAL, 0, 0)])
    with pytest.raises(ValueError):
        reg.add(Host(1, 1, 2, HostKind.REAL, 0, 0))
    with pytest.raises(ValueError):
        reg.add(Host(1, 2, 1, HostKind.REAL, 0, 0))


def test_generator_marginals():
    topo, roles, reg = world(seed=1)
    gen = ConnectionGenerator(roles, reg, topo, PathPolicy(), 0.5)
    rng = random.Random(11)
    n = 100_000
    kinds = Counter()
    role_counts = Counter()
    servers = {p.role: set(p.servers) for p in roles}
    for i in range(n):
        c = gen(rng, i)
        kinds[c.kind] += 1
        role_counts[c.role] += 1
        src = reg[c.source]
        assert src.kind is c.kind and src.role == c.role
        assert c.destination in servers[c.role]
        assert topo.is_valid_path(c.path)
        assert c.path[0] == src.switch and c.path[-1] == reg[c.destination].switch
    assert abs(kinds[HostKind.HONEY] / n - 0.5) <= 0.01
    for r in range(3):
        assert abs(role_counts[r] / n - 1 / 3) <= 0.01
    assert chisquare([kinds[HostKind.REAL], kinds[HostKind.HONEY]]).pvalue > 0.01
    assert chisquare([role_counts[r] for r in range(3)]).pvalue > 0.01


def test_source_and_destination_uniform():
    topo, roles, reg = world(seed=2)
    gen = ConnectionGenerator(roles, reg, topo, PathPolicy(), 0.5)
    rng = random.Random(12)
    src = Counter()
    dst = Counter()
    for i in range(100_000):
        c = gen(rng, i)
        if c.kind is HostKind.HONEY and c.role == 0:
            src[c.source] += 1
            dst[c.destination] += 1
    assert chisquare(list(src.values())).pvalue > 0.01
    assert chisquare(list(dst.values())).pvalue > 0.01
    assert len(src) == len(reg.clients(HostKind.HONEY, 0))


def test_degenerate_generator():
    topo = Topology.from_edges([SwitchTier.EDGE] * 2, [(0, 1)])
    roles, reg = build_real_side(topo, 1, 1, 1)
    instantiate_honey_hosts(roles[0], topo, random.Random(0), reg)
    rng = random.Random(4)
    seen = {(c.kind, c.source, c.destination, c.path)
            for c in (generate_connection(roles, reg, topo, PathPolicy(), 0.5, rng) for _ in range(200))}
    assert {s[0] for s in seen} == {HostKind.REAL, HostKind.HONEY}
    assert len(seen) == 2


def test_generator_needs_hosts():
    topo = preset("paper-14")
    roles, reg = build_real_side(topo, 3, 30, 3, 0)
    with pytest.raises(ConfigurationError):
        ConnectionGenerator(roles, reg, topo, PathPolicy(), 0.5)
    # with no honey traffic requested, missing honey hosts are fine
    ConnectionGenerator(roles, reg, topo, PathPolicy(), 0.0)


def test_profile_means():
    obs = [Observation(1, 9, 0.0, 100), Observation(1, 9, 1.0, 300), Observation(1, 9, 4.0, 200)]
    prof = capture_profile(obs, 10.0)
    pair = prof.pairs[(1, 9)]
    assert pair.payload_size_mean == 200
    assert pair.inter_arrival_mean == 2.0
    assert sum(pair.inter_connection_gaps.values()) == pytest.approx(1)
    assert sum(pair.header_distribution.values()) == pytest.approx(1)
    assert pair.connections == 3


def test_profile_two_payloads():
    prof = capture_profile([Observation(1, 9, 0.0, 100), Observation(1, 9, 5.0, 300)], 10.0)
    assert prof.pairs[(1, 9)].payload_size_mean == 200


def test_profile_errors():
    with pytest.raises(ValueError):
        capture_profile([], 1.0)
    with pytest.raises(ValueError):
        capture_profile([Observation(1, 2, 0, 1)], 0)


def poisson_observations(rate, n, seed, src=1, dst=9):
    rng = random.Random(seed)
    t = 0.0
    out = []
    for _ in range(n):
        t += rng.expovariate(rate)
        out.append(Observation(src, dst, t, rng.randint(200, 1400)))
    return out


def test_profile_poisson_rate():
    prof = capture_profile(poisson_observations(1.0, 1000, 7), 1000.0)
    assert abs(prof.pairs[(1, 9)].inter_arrival_mean - 1.0) <= 0.1


def _server(host_id=9):
    return Host(host_id, 0x0A010001, 0x020A010001, HostKind.REAL, 0, 3, server=True)


def test_heartbeat_fixed_size():
    prof = capture_profile(poisson_observations(0.5, 200, 1), 400.0)
    rng = random.Random(0)
    a = build_heartbeat(prof, _server(), HEARTBEAT_SIZE, rng)
    b = build_heartbeat(prof, _server(), HEARTBEAT_SIZE, rng, app_protocol_info=b"x" * 100)
    assert len(a.to_bytes()) == len(b.to_bytes()) == 512


def test_heartbeat_interval_matches_profile():
    prof = capture_profile(poisson_observations(0.5, 2000, 2), 4000.0)
    assert prof.pairs[(1, 9)].inter_arrival_mean == pytest.approx(2, abs=0.15)
    rng = random.Random(1)
    beats = [build_heartbeat(prof, _server(), 512, rng) for _ in range(1000)]
    mean = sum(hb.rre_interval for hb in beats) / len(beats)
    assert abs(mean - 2.0) <= 0.2


def test_heartbeat_too_small():
    prof = capture_profile([Observation(1, 9, 0, 10), Observation(1, 9, 1, 10)], 2.0)
    with pytest.raises(ValueError):
        build_heartbeat(prof, _server(), 20, random.Random(0))
    with pytest.raises(ValueError):
        build_heartbeat(prof, _server(42), 512, random.Random(0))


def test_honey_schedule_replays_rate():
    obs = poisson_observations(1.0, 1500, 3)
    prof = capture_profile(obs, obs[-1].start)
    honey = [Host(50, 0x0A800001, 0x02800001, HostKind.HONEY, 0, 1)]
    events = honey_schedule(prof, honey, obs[-1].start, random.Random(5))
    assert len(events) >= 1000
    real_rate = len(obs) / obs[-1].start
    honey_rate = len(events) / obs[-1].start
    assert abs(honey_rate - real_rate) / real_rate <= 0.10
    assert all(h == 50 and s == 9 for _, h, s in events)
    with pytest.raises(ConfigurationError):
        honey_schedule(prof, [], 10.0, random.Random(0))


def _conn(seq=0):
    return Connection(seq, HostKind.HONEY, 0, 1, 2, (0, 6, 1), 1)


def test_report_contents():
    agent = Host(3, 0x0A800003, 0x02800003, HostKind.HONEY, 0, 1)
    alerts = [Alert(AttackKind.BLACKHOLE, _conn(i), 5.0, 1) for i in range(2)]
    rep = build_report(agent, 4, 10, alerts)
    assert rep.requests_sent == 10 and len(rep.alerts) == 2


def test_real_report_indistinguishable():
    real = Host(1, 0x0A000001, 0x020A000001, HostKind.REAL, 0, 0)
    honey = Host(3, 0x0A800003, 0x02800003, HostKind.HONEY, 0, 1)
    a = build_report(real, 4, 10, [Alert(AttackKind.SSL_STRIP, _conn(), 0.1, 0)])
    b = build_report(honey, 4, 10, [Alert(AttackKind.SSL_STRIP, _conn(), 0.1, 0)])
    assert a.alerts == () and a.requests_sent == 0
    assert len(a.to_bytes()) == len(b.to_bytes()) == REPORT_SIZE


def test_report_rejects_excess_alerts():
    with pytest.raises(ValueError):
        HoneyReport(1, 1, 1, tuple(Alert(AttackKind.BLACKHOLE, _conn(i), 5.0, 1) for i in range(2)))


def test_report_layout_is_big_endian():
    raw = HoneyReport(0x01020304, 7, 9).to_bytes()
    assert raw[:4] == b"\x01\x02\x03\x04"
    assert raw[4:8] == (7).to_bytes(4, "big")
