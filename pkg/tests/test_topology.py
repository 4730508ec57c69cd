import itertools
import random
from fractions import Fraction
from pathlib import Path as FsPath

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from honeyroles.topology import (
    GmlError, NoPath, PathMode, PathPolicy, SwitchTier, Topology, TopologyError,
    build_fat_tree, enumerate_paths, load_gml, preset, scan_probability, select_path,
)
from oracles import brute_force_simple_paths, diamond_scan_enumeration, oracle_paths

DATA = FsPath(__file__).parent / "data"
DIS = PathPolicy(PathMode.DISJOINT_ONLY)
NONOPT = PathPolicy(PathMode.DISJOINT_PLUS_NON_OPTIMAL, max_extra_hops=2)


def diamond():
    # 0 and 3 are edge switches, 1 and 2 the two middle branches
    tiers = [SwitchTier.EDGE, SwitchTier.AGGREGATE, SwitchTier.AGGREGATE, SwitchTier.EDGE]
    return Topology.from_edges(tiers, [(0, 1), (0, 2), (1, 3), (2, 3)])


def from_nx(g):
    nodes = sorted(g.nodes)
    idx = {n: i for i, n in enumerate(nodes)}
    return Topology.from_edges([SwitchTier.EDGE] * len(nodes),
                               [(idx[u], idx[v]) for u, v in g.edges])


def test_smallest_fat_tree():
    t = build_fat_tree(2, 1, 1, 1)
    assert t.num_switches == 5
    assert t.has_link(0, 2) and t.has_link(1, 3)
    assert t.is_connected()


def test_k4_count():
    t = build_fat_tree(4, 2, 2, 4)
    assert t.num_switches == 4 * (2 + 2) + 4 == 20
    assert len(t.edge_switches) == 8


def test_paper14_layout():
    t = preset("paper-14")
    assert t.num_switches == 14
    assert t.switches_of(SwitchTier.EDGE) == [0, 1, 2, 3, 4, 5]
    assert t.switches_of(SwitchTier.AGGREGATE) == list(range(6, 12))
    assert t.switches_of(SwitchTier.CORE) == [12, 13]
    assert t.resolve("edge:0") == 0
    assert t.resolve("aggregate:1") == 7
    assert t.resolve("core:1") == 13
    # core c reaches aggregate c of every pod
    assert [a for a in t.neighbors(12)] == [6, 8, 10]
    assert [a for a in t.neighbors(13)] == [7, 9, 11]


def test_single_agg_preset_is_the_other_fourteen():
    t = preset("single-agg-14")
    assert t.num_switches == 14
    assert len(t.switches_of(SwitchTier.AGGREGATE)) == 4


def test_inline_fat_tree_shape():
    assert preset("fat-tree:3,2,2,2").links == preset("paper-14").links
    with pytest.raises(TopologyError):
        preset("fat-tree:3,2")
    with pytest.raises(TopologyError):
        preset("nonsense")


def test_paper14_path_counts_between_pods():
    t = preset("paper-14")
    edges = t.edge_switches
    for a, b in itertools.permutations(edges, 2):
        if a // 2 != b // 2:
            n = len(enumerate_paths(t, a, b, PathPolicy()))
            assert 2 <= n <= 8


@pytest.mark.parametrize("pods,e,a,c", [(2, 1, 1, 1), (3, 2, 2, 2), (4, 2, 1, 2), (2, 3, 2, 3)])
def test_fat_tree_connected_and_formula(pods, e, a, c):
    t = build_fat_tree(pods, e, a, c)
    assert t.num_switches == pods * (e + a) + c
    assert t.is_connected()
    for pod in range(pods):
        for i in range(e):
            for j in range(a):
                assert t.has_link(pod * e + i, pods * e + pod * a + j)


def test_resolve_errors():
    t = preset("paper-14")
    with pytest.raises(TopologyError):
        t.resolve("core:2")
    with pytest.raises(TopologyError):
        t.resolve(99)
    with pytest.raises(ValueError):
        t.resolve("spine:0")


def test_gml_minimal():
    t = load_gml("graph [ node [ id 0 ] ]")
    assert t.num_switches == 1 and not t.links
    t = load_gml("graph [ node [ id 0 ] node [ id 1 ] edge [ source 0 target 1 ] ]")
    assert t.num_switches == 2 and len(t.links) == 1
    assert t.tiers == (SwitchTier.EDGE, SwitchTier.EDGE)


def test_gml_tier_labels():
    t = load_gml('graph [ node [ id 5 tier "core" ] node [ id 7 ] edge [ source 5 target 7 ] ]')
    assert t.tiers == (SwitchTier.CORE, SwitchTier.EDGE)


def test_gml_zoo_file_counts():
    text = (DATA / "zoo_sample.gml").read_text(encoding="utf-8")
    # independent line scan: count block openers before handing to the parser
    lines = [ln.strip() for ln in text.splitlines()]
    n_nodes = sum(1 for ln in lines if ln.startswith("node ["))
    n_edges = sum(1 for ln in lines if ln.startswith("edge ["))
    t = load_gml(text)
    assert (t.num_switches, len(t.links)) == (n_nodes, n_edges)
    assert t.is_connected()


@pytest.mark.parametrize("text", [
    "graph [ node [ id 0 ] edge [ source 0 target 1 ] ]",
    "graph [ node [ id 0 ] edge [ source 0 target 0 ] ]",
    "graph [ node [ label \"x\" ] ]",
    "graph [ node [ id 0 ",
    "graph [ node [ id 0 ] edge [ source 0 ] ]",
])
def test_gml_errors(text):
    with pytest.raises(GmlError):
        load_gml(text)


def test_diamond_disjoint():
    t = diamond()
    assert enumerate_paths(t, 0, 3, DIS) == [(0, 1, 3), (0, 2, 3)]


def test_enumerate_errors():
    t = diamond()
    with pytest.raises(ValueError):
        enumerate_paths(t, 0, 0, DIS)
    split = Topology.from_edges([SwitchTier.EDGE] * 4, [(0, 1), (2, 3)])
    with pytest.raises(NoPath):
        enumerate_paths(split, 0, 3, DIS)


def test_two_pod_instance_matches_oracle():
    t = build_fat_tree(2, 1, 1, 2)
    assert t.num_switches == 6
    g = t.to_networkx()
    for mode, pol in [("disjoint", DIS), ("disjoint-nonoptimal", NONOPT), ("overlap", PathPolicy())]:
        assert enumerate_paths(t, 0, 1, pol) == oracle_paths(g, 0, 1, mode)


def _small_graphs(max_atlas_nodes=6, random_graphs=15):
    # connected atlas graphs, plus a few random 8-node ones
    for g in nx.graph_atlas_g():
        if 3 <= g.number_of_nodes() <= max_atlas_nodes and nx.is_connected(g):
            yield g
    rng = random.Random(8)
    for _ in range(random_graphs):
        g = nx.gnp_random_graph(8, 0.4, seed=rng.randrange(10**6))
        if nx.is_connected(g):
            yield g


def check_graph(g, policies):
    t = from_nx(g)
    for src, dst in itertools.combinations(sorted(g.nodes), 2):
        for mode, pol in policies:
            want = oracle_paths(g, src, dst, mode, pol.max_extra_hops, pol.max_overlap_fraction)
            got = enumerate_paths(t, src, dst, pol)
            assert got == want, (list(g.edges), src, dst, mode)


POLICIES = [
    ("disjoint", DIS),
    ("disjoint-nonoptimal", NONOPT),
    ("disjoint-nonoptimal", PathPolicy(PathMode.DISJOINT_PLUS_NON_OPTIMAL, max_extra_hops=1)),
    ("overlap", PathPolicy()),
    ("overlap", PathPolicy(max_extra_hops=1, max_overlap_fraction=Fraction(1, 2))),
    ("overlap", PathPolicy(max_extra_hops=3, max_overlap_fraction=Fraction(0))),
]


def test_small_graphs_match_brute_force():
    count = 0
    for g in _small_graphs():
        check_graph(g, POLICIES)
        count += 1
    assert count > 100


def test_brute_force_oracle_agrees_with_networkx():
    g = nx.petersen_graph().subgraph(range(7)).copy()
    for src, dst in itertools.combinations(g.nodes, 2):
        assert sorted(tuple(p) for p in nx.all_simple_paths(g, src, dst)) == sorted(
            brute_force_simple_paths(g, src, dst))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3),
       st.sampled_from(POLICIES))
def test_paths_are_valid_and_disjoint(pods, e, a, c, named):
    mode, pol = named
    t = build_fat_tree(pods, e, a, c)
    edges = t.edge_switches
    for src, dst in itertools.combinations(edges, 2):
        paths = enumerate_paths(t, src, dst, pol)
        assert paths == sorted(paths)
        assert paths == enumerate_paths(t, src, dst, pol)
        for p in paths:
            assert t.is_valid_path(p) and p[0] == src and p[-1] == dst
            assert len(set(p)) == len(p)
        if mode != "overlap":
            for p, q in itertools.combinations(paths, 2):
                assert not set(p[1:-1]) & set(q[1:-1])


def test_paths_cached():
    t = preset("paper-14")
    assert t.paths(0, 5, PathPolicy()) is t.paths(0, 5, PathPolicy())
    assert t.paths(3, 3, PathPolicy()) == [(3,)]


def test_select_single():
    rng = random.Random(1)
    assert all(select_path([(1, 2)], rng) == (1, 2) for _ in range(20))
    with pytest.raises(ValueError):
        select_path([], rng)


def test_select_uniform():
    paths = [(0, i, 9) for i in range(4)]
    rng = random.Random(2024)
    draws = [select_path(paths, rng) for _ in range(10_000)]
    freq = [draws.count(p) for p in paths]
    for f in freq:
        assert abs(f / 10_000 - 0.25) <= 0.02
    assert chisquare(freq).pvalue > 0.01


def test_select_deterministic():
    paths = [(0, i, 9) for i in range(8)]
    a = [select_path(paths, random.Random(77)) for _ in range(1)]
    r1, r2 = random.Random(77), random.Random(77)
    assert [select_path(paths, r1) for _ in range(200)] == [select_path(paths, r2) for _ in range(200)]
    assert a


def test_scan_probability_values():
    assert scan_probability(1, 1, 2) == Fraction(1, 4)
    assert scan_probability(50, 50, 8) == Fraction(1, 16)
    assert scan_probability(2, 3, 2) == Fraction(1, 5)


def test_scan_probability_matches_enumeration():
    for r in range(0, 5):
        for h in range(0, 5):
            if r + h:
                assert scan_probability(r, h, 2) == diamond_scan_enumeration(r, h)


@given(st.integers(0, 500), st.integers(0, 500), st.integers(1, 16))
def test_scan_probability_factorisation(r, h, p):
    if r + h == 0:
        return
    assert scan_probability(r, h, p) == Fraction(1, p) * Fraction(r, r + h)
    assert scan_probability(r, h, 1) == Fraction(r, r + h)


@pytest.mark.parametrize("args", [(0, 0, 1), (1, 1, 0), (-1, 2, 1)])
def test_scan_probability_domain(args):
    with pytest.raises(ValueError):
        scan_probability(*args)
