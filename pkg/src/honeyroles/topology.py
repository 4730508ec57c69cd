"""Switch graphs: Fat-Tree generation, GML ingestion and forwarding-path enumeration.

Switch ids are dense integers. Fat-Tree ids are laid out tier-major: all edge
switches (pod-major), then aggregate switches (pod-major), then cores. For the
``paper-14`` preset (3 pods of 2 edge + 2 aggregate switches, 2 cores) this
gives edges 0-5 (pod p owns 2p and 2p+1), aggregates 6-11 (pod p owns 6+2p
and 7+2p) and cores 12-13. Core c links to aggregate c of every pod, so any
two pods are joined by two switch-disjoint shortest paths.

"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx

Path = tuple[int, ...]


class SwitchTier(enum.Enum):
    EDGE = "edge"
    AGGREGATE = "aggregate"
    CORE = "core"

    @classmethod
    def parse(cls, text: str) -> "SwitchTier":
        key = text.strip().lower()
        aliases = {"agg": "aggregate", "aggregation": "aggregate"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown switch tier {text!r}") from None


class TopologyError(ValueError):
    """Structural problem with a topology (bad link, unknown switch, ...)."""


class GmlError(TopologyError):
    pass


class NoPath(TopologyError):
    pass


class PathMode(enum.Enum):
    DISJOINT_ONLY = "disjoint"
    DISJOINT_PLUS_NON_OPTIMAL = "disjoint-nonoptimal"
    OVERLAP_TOLERANT = "overlap"


@dataclass(frozen=True)
class PathPolicy:
    mode: PathMode = PathMode.OVERLAP_TOLERANT
    max_extra_hops: int = 2
    max_overlap_fraction: Fraction = Fraction(1)

    def __post_init__(self):
        if self.max_extra_hops < 0:
            raise ValueError("max_extra_hops must be non-negative")
        frac = Fraction(self.max_overlap_fraction)
        if not 0 <= frac <= 1:
            raise ValueError("max_overlap_fraction must lie in [0, 1]")
        object.__setattr__(self, "max_overlap_fraction", frac)

    @property
    def hop_slack(self) -> int:
        # "optimal disjoint paths only" admits no detour at all
        if self.mode is PathMode.DISJOINT_ONLY:
            return 0
        return self.max_extra_hops


@dataclass(frozen=True)
class Topology:
    tiers: tuple[SwitchTier, ...]
    links: frozenset[frozenset[int]]
    name: str = ""
    labels: tuple[str, ...] = ()
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _path_cache: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        n = len(self.tiers)
        adj: list[set[int]] = [set() for _ in range(n)]
        for link in self.links:
            if len(link) != 2:
                raise TopologyError(f"self-link or malformed link {sorted(link)}")
            u, v = sorted(link)
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"link {u}-{v} references an unknown switch")
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(s)) for s in adj))
        object.__setattr__(self, "_path_cache", {})
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"sw{i}" for i in range(n)))

    @classmethod
    def from_edges(
        cls,
        tiers: Sequence[SwitchTier],
        edges: Iterable[tuple[int, int]],
        name: str = "",
        labels: Sequence[str] = (),
    ) -> "Topology":
        links = set()
        for u, v in edges:
            if u == v:
                raise TopologyError(f"self-link on switch {u}")
            links.add(frozenset((u, v)))
        return cls(tuple(tiers), frozenset(links), name=name, labels=tuple(labels))

    @property
    def num_switches(self) -> int:
        return len(self.tiers)

    def neighbors(self, switch: int) -> tuple[int, ...]:
        return self._adj[switch]

    def has_link(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def switches_of(self, tier: SwitchTier) -> list[int]:
        return [i for i, t in enumerate(self.tiers) if t is tier]

    @property
    def edge_switches(self) -> list[int]:
        return self.switches_of(SwitchTier.EDGE)

    def resolve(self, selector: str | int) -> int:
        """Map ``"tier:index"`` (or a raw id) to a switch id."""
        if isinstance(selector, int):
            if not 0 <= selector < self.num_switches:
                raise TopologyError(f"switch id {selector} out of range")
            return selector
        text = str(selector).strip()
        if ":" not in text:
            return self.resolve(int(text))
        tier_name, _, index = text.partition(":")
        members = self.switches_of(SwitchTier.parse(tier_name))
        idx = int(index)
        if not 0 <= idx < len(members):
            raise TopologyError(
                f"selector {text!r}: topology has {len(members)} {tier_name} switches"
            )
        return members[idx]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_switches))
        g.add_edges_from(tuple(link) for link in self.links)
        return g

    def is_connected(self) -> bool:
        return self.num_switches > 0 and nx.is_connected(self.to_networkx())

    def is_valid_path(self, path: Sequence[int]) -> bool:
        if not path or len(set(path)) != len(path):
            return False
        return all(self.has_link(u, v) for u, v in zip(path, path[1:]))

    def hop_distances(self, target: int) -> list[int | None]:
        dist: list[int | None] = [None] * self.num_switches
        dist[target] = 0
        queue = deque([target])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] is None:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def paths(self, src: int, dst: int, policy: PathPolicy) -> list[Path]:
        """Cached :func:`enumerate_paths`; a host pair on one switch gets ``[(src,)]``."""
        key = (src, dst, policy)
        cached = self._path_cache.get(key)
        if cached is None:
            if src == dst:
                cached = [(src,)]
            else:
                cached = enumerate_paths(self, src, dst, policy)
            self._path_cache[key] = cached
        return cached


def build_fat_tree(pods: int, edge_per_pod: int, agg_per_pod: int, cores: int) -> Topology:
    """Three-tier Fat-Tree.

    Every edge switch links to every aggregate switch of its pod. Core ``c``
    links to aggregate ``c % agg_per_pod`` of every pod, which for the standard
    k-ary tree reproduces the usual core groups.
    """
    for name, value in (("pods", pods), ("edge_per_pod", edge_per_pod),
                        ("agg_per_pod", agg_per_pod), ("cores", cores)):
        if value < 1:
            raise ValueError(f"{name} must be >= 1")
    n_edge = pods * edge_per_pod
    n_agg = pods * agg_per_pod
    tiers = ([SwitchTier.EDGE] * n_edge + [SwitchTier.AGGREGATE] * n_agg
             + [SwitchTier.CORE] * cores)
    labels = ([f"e{p}.{i}" for p in range(pods) for i in range(edge_per_pod)]
              + [f"a{p}.{i}" for p in range(pods) for i in range(agg_per_pod)]
              + [f"c{i}" for i in range(cores)])

    def agg_id(pod: int, i: int) -> int:
        return n_edge + pod * agg_per_pod + i

    edges = []
    for pod in range(pods):
        for e in range(edge_per_pod):
            for a in range(agg_per_pod):
                edges.append((pod * edge_per_pod + e, agg_id(pod, a)))
    for c in range(cores):
        core = n_edge + n_agg + c
        for pod in range(pods):
            edges.append((agg_id(pod, c % agg_per_pod), core))
    return Topology.from_edges(
        tiers, edges, name=f"fat-tree({pods},{edge_per_pod},{agg_per_pod},{cores})",
        labels=labels,
    )


PRESETS = {
    # 14 switches, two aggregates per pod so every inter-pod pair has two
    # disjoint shortest paths and at most 8 paths under the default policy.
    "paper-14": dict(pods=3, edge_per_pod=2, agg_per_pod=2, cores=2),
    # The other 14-switch reading: one aggregate per pod, a single pod exit.
    "single-agg-14": dict(pods=4, edge_per_pod=2, agg_per_pod=1, cores=2),
    "k4": dict(pods=4, edge_per_pod=2, agg_per_pod=2, cores=4),
}


def preset(name: str) -> Topology:
    """Resolve a preset name or an explicit ``fat-tree:pods,edge,agg,cores`` shape."""
    if name.startswith("fat-tree:"):
        try:
            pods, edge, agg, cores = (int(x) for x in name.split(":", 1)[1].split(","))
        except ValueError:
            raise TopologyError(f"bad fat-tree shape {name!r}, want fat-tree:P,E,A,C") from None
        params = dict(pods=pods, edge_per_pod=edge, agg_per_pod=agg, cores=cores)
    else:
        try:
            params = PRESETS[name]
        except KeyError:
            raise TopologyError(
                f"unknown topology preset {name!r} (known: {', '.join(sorted(PRESETS))})"
            ) from None
    topo = build_fat_tree(**params)
    return Topology(topo.tiers, topo.links, name=name, labels=topo.labels)


def load_gml(text: str) -> Topology:
    """Parse a Topology-Zoo style GML graph.

    Nodes may carry a ``tier`` attribute (edge/aggregate/core); nodes without
    one are edge switches. Switch ids follow node order in the file.
    """
    try:
        graph = nx.parse_gml(text, label="id")
    except nx.NetworkXError as exc:
        raise GmlError(f"invalid GML: {exc}") from None
    except (ValueError, KeyError, IndexError) as exc:
        raise GmlError(f"malformed GML: {exc}") from None

    node_ids = list(graph.nodes)
    index = {node: i for i, node in enumerate(node_ids)}
    tiers = []
    labels = []
    for node in node_ids:
        attrs = graph.nodes[node]
        raw = attrs.get("tier", attrs.get("Tier"))
        try:
            tiers.append(SwitchTier.EDGE if raw is None else SwitchTier.parse(str(raw)))
        except ValueError as exc:
            raise GmlError(f"node {node}: {exc}") from None
        labels.append(str(attrs.get("label", f"sw{index[node]}")))

    edges = []
    for u, v in graph.edges():
        if u == v:
            raise GmlError(f"self-loop on node {u}")
        edges.append((index[u], index[v]))
    return Topology.from_edges(tiers, edges, name="gml", labels=labels)


def _simple_paths_within(topo: Topology, src: int, dst: int, max_len: int) -> list[Path]:
    dist = topo.hop_distances(dst)
    found: list[Path] = []
    stack = [src]
    on_path = {src}

    def walk(node: int) -> None:
        if node == dst:
            found.append(tuple(stack))
            return
        for nxt in topo.neighbors(node):
            d = dist[nxt]
            if nxt in on_path or d is None or len(stack) + 1 + d > max_len:
                continue
            stack.append(nxt)
            on_path.add(nxt)
            walk(nxt)
            on_path.discard(nxt)
            stack.pop()

    walk(src)
    return found


def overlap_fraction(candidate: Path, other: Path) -> Fraction:
    """Share of ``candidate``'s interior switches that ``other`` also visits inside."""
    inner = set(candidate[1:-1])
    if not inner:
        return Fraction(0)
    return Fraction(len(inner & set(other[1:-1])), len(inner))


def admissible(candidate: Path, accepted: Sequence[Path], policy: PathPolicy) -> bool:
    if policy.mode is PathMode.OVERLAP_TOLERANT:
        return all(overlap_fraction(candidate, p) <= policy.max_overlap_fraction
                   for p in accepted)
    inner = set(candidate[1:-1])
    return all(inner.isdisjoint(p[1:-1]) for p in accepted)


def select_by_policy(candidates: Iterable[Path], policy: PathPolicy) -> list[Path]:
    """Greedy maximal admissible set, shortest first, then lexicographic."""
    accepted: list[Path] = []
    for cand in sorted(candidates, key=lambda p: (len(p), p)):
        if admissible(cand, accepted, policy):
            accepted.append(cand)
    return sorted(accepted)


def enumerate_paths(topo: Topology, src: int, dst: int, policy: PathPolicy) -> list[Path]:
    if src == dst:
        raise ValueError("enumerate_paths needs distinct endpoints")
    for s in (src, dst):
        if not 0 <= s < topo.num_switches:
            raise TopologyError(f"unknown switch {s}")
    dist = topo.hop_distances(dst)
    if dist[src] is None:
        raise NoPath(f"switches {src} and {dst} are disconnected")
    # path lengths are counted in switches; hops = switches - 1
    limit = dist[src] + 1 + policy.hop_slack
    return select_by_policy(_simple_paths_within(topo, src, dst, limit), policy)


def select_path(paths: Sequence[Path], rng: random.Random) -> Path:
    if not paths:
        raise ValueError("no paths to choose from")
    return paths[rng.randrange(len(paths))]


def scan_probability(r: int, h: int, p: int) -> Fraction:
    """Chance an adversary on one of ``p`` disjoint paths scans a real connection."""
    if r < 0 or h < 0:
        raise ValueError("connection counts must be non-negative")
    if r + h == 0:
        raise ValueError("need at least one connection")
    if p < 1:
        raise ValueError("need at least one path")
    return Fraction(r, p * (r + h))
