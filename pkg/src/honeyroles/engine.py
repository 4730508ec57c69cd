"""Round and sample orchestration plus Monte Carlo aggregation.

Sample seeds come from ``numpy.random.SeedSequence(master_seed,
spawn_key=(sample,))``, so a sample's trajectory does not depend on which
worker runs it or in what order.
"""

from __future__ import annotations

import random
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from . import adversary as adv
from .bms import BeliefTable, Ranking, rank_positions
from .detection import DetectorConfig, HoneyAgentDetector, simulate_outcome
from .enterprise import (ConnectionGenerator, HoneyReport, HostRegistry, RoleProfile,
                         build_real_side, build_report, instantiate_honey_hosts)
from .model import Connection, HostKind, Outcome
from .topology import PathPolicy, Topology, load_gml, preset


@dataclass(frozen=True)
class SimConfig:
    roles: int = 3
    rounds: int = 100
    round_length: int = 100
    topology: str = "paper-14"
    gml_path: str | None = None
    n_real: int = 50
    honey_factor: Fraction = Fraction(1)
    n_servers: int = 6
    server_placement: str = "spread"
    path_policy: PathPolicy = field(default_factory=PathPolicy)
    compromised: tuple[str | int, ...] = ("edge:0",)
    target_role: int = 0
    confidence_init: int = 10
    confidence_cap: int = 90
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    beta: float = 0.2
    prism_counter_init: bool = False
    honey_ratio: float = 0.5
    samples: int = 50
    master_seed: int = 0
    warmup: int = 10

    def __post_init__(self):
        for name in ("roles", "rounds", "round_length", "n_real", "n_servers", "samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie strictly between 0 and 1")
        if not 0 <= self.target_role < self.roles:
            raise ValueError(f"target_role {self.target_role} is not one of {self.roles} roles")

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def load_topology(cfg: SimConfig) -> Topology:
    if cfg.gml_path:
        return load_gml(FsPath(cfg.gml_path).read_text(encoding="utf-8"))
    return preset(cfg.topology)


def adversary_config(cfg: SimConfig, topo: Topology) -> adv.AdversaryConfig | None:
    ids = frozenset(topo.resolve(s) for s in cfg.compromised)
    if not ids:
        return None
    return adv.AdversaryConfig(ids, cfg.target_role, cfg.confidence_init, cfg.confidence_cap)


def sample_seed(master_seed: int, sample: int) -> int:
    state = np.random.SeedSequence(master_seed, spawn_key=(sample,)).generate_state(2, np.uint64)
    return int(state[0]) << 64 | int(state[1])


@dataclass(frozen=True)
class RoundResult:
    index: int
    alarms: tuple[int, ...]
    honey: tuple[int, ...]
    ratio: tuple[float, ...]
    risk: tuple[float, ...]
    ranking: Ranking
    positions: tuple[int, ...]
    confidence: int | None
    connections: int
    honey_connections: int
    attacks: int
    honey_attacks: int
    alarm_count: int
    honey_hops: int
    alerted_hops: int
    log: tuple[Connection, ...] = ()
    reports: tuple[HoneyReport, ...] = ()


class World:
    """Everything one sample owns: hosts, adversary, detectors and beliefs."""

    def __init__(self, cfg: SimConfig, topo: Topology, seed: int, keep_log: bool = False):
        self.cfg = cfg
        self.topo = topo
        self.rng = random.Random(seed)
        self.keep_log = keep_log
        self.roles: list[RoleProfile]
        self.roles, self.registry = build_real_side(
            topo, cfg.roles, cfg.n_real, cfg.n_servers, cfg.honey_factor,
            cfg.server_placement)
        for profile in self.roles:
            instantiate_honey_hosts(profile, topo, self.rng, self.registry)
        self.generator = ConnectionGenerator(self.roles, self.registry, topo,
                                             cfg.path_policy, cfg.honey_ratio)
        self.adversary = adversary_config(cfg, topo)
        self.adv_state = adv.AdversaryState.initial(self.adversary) if self.adversary else None
        self.beliefs = BeliefTable(topo.num_switches, cfg.beta, cfg.prism_counter_init)
        self.detectors: dict[int, HoneyAgentDetector] = {}
        self._visible: dict[tuple[int, ...], bool] = {}
        self.round_index = 0
        self.seq = 0

    def _visible_path(self, path: tuple[int, ...]) -> bool:
        hit = self._visible.get(path)
        if hit is None:
            hit = not self.adversary.compromised.isdisjoint(path)
            self._visible[path] = hit
        return hit

    def run_round(self) -> RoundResult:
        cfg, rng = self.cfg, self.rng
        adversary, state = self.adversary, self.adv_state
        beliefs, detectors = self.beliefs, self.detectors
        det_cfg = cfg.detector
        confidence = state.confidence if state else None
        round_no = self.round_index + 1
        log = []
        sent: dict[int, int] = defaultdict(int)
        alerts_by_agent: dict[int, list] = defaultdict(list)
        honey_n = attacks = honey_attacks = alarm_count = honey_hops = alerted_hops = 0

        for _ in range(cfg.round_length):
            conn = self.generator(rng, self.seq, round_no)
            self.seq += 1
            attacked = False
            if adversary is not None:
                visible = conn.role == adversary.target_role and self._visible_path(conn.path)
                attacked = adv.observe(state, adversary, conn, rng, visible) is adv.Decision.ATTACK
            if attacked:
                attacks += 1
            obs = simulate_outcome(conn, attacked, det_cfg, rng)
            if conn.kind is HostKind.HONEY:
                honey_n += 1
                honey_hops += len(conn.path)
                if attacked:
                    honey_attacks += 1
                detector = detectors.get(conn.source)
                if detector is None:
                    detector = detectors[conn.source] = HoneyAgentDetector(det_cfg)
                alert = detector.inspect(conn, obs)
                sent[conn.source] += 1
                if alert is not None:
                    alarm_count += 1
                    alerted_hops += len(conn.path)
                    alerts_by_agent[conn.source].append(alert)
                beliefs.record_path(conn.path, alert is not None)
            if self.keep_log:
                log.append(conn)

        if state is not None:
            adv.end_of_round(state, adversary, rng)
        snap = beliefs.end_of_interval()
        reports = ()
        if self.keep_log:
            reports = tuple(
                build_report(h, round_no, sent.get(h.id, 0), alerts_by_agent.get(h.id, ()))
                for h in self.registry if not h.server
            )
        self.round_index += 1
        return RoundResult(
            index=round_no,
            alarms=snap.alarms,
            honey=snap.honey,
            ratio=snap.ratio,
            risk=snap.risk,
            ranking=snap.ranking,
            positions=tuple(rank_positions(snap.ranking)),
            confidence=confidence,
            connections=cfg.round_length,
            honey_connections=honey_n,
            attacks=attacks,
            honey_attacks=honey_attacks,
            alarm_count=alarm_count,
            honey_hops=honey_hops,
            alerted_hops=alerted_hops,
            log=tuple(log),
            reports=reports,
        )


def run_experiment(cfg: SimConfig, seed: int, topo: Topology | None = None,
                   keep_log: bool = False) -> list[RoundResult]:
    world = World(cfg, topo or load_topology(cfg), seed, keep_log)
    return [world.run_round() for _ in range(cfg.rounds)]


def _run_sample(args) -> list[RoundResult]:
    cfg, topo, sample = args
    return run_experiment(cfg, sample_seed(cfg.master_seed, sample), topo)


@dataclass
class ExperimentResult:
    cfg: SimConfig
    topology: Topology
    compromised: tuple[int, ...]
    samples: list[list[RoundResult]]

    def __post_init__(self):
        self.positions = np.array([[r.positions for r in s] for s in self.samples], dtype=np.int64)
        self.risk_array = np.array([[r.risk for r in s] for s in self.samples], dtype=float)

    @property
    def rounds(self) -> int:
        return self.positions.shape[1]

    def mean_rank(self) -> np.ndarray:
        """(rounds, switches) rank averaged over samples."""
        return self.positions.mean(axis=0)

    def mean_risk(self) -> np.ndarray:
        return self.risk_array.mean(axis=0)

    def _after(self, warmup: int | None) -> slice:
        return slice(self.cfg.warmup if warmup is None else warmup, None)

    def hit_rate(self, switch: int, k: int, warmup: int | None = 0) -> float:
        """Share of (sample, round) cells, after warm-up, where ``switch`` ranks <= k."""
        cells = self.positions[:, self._after(warmup), switch]
        return float((cells <= k).mean())

    def mean_rank_share(self, switch: int, k: float, warmup: int | None = None) -> float:
        """Share of post-warm-up rounds whose sample-mean rank of ``switch`` is <= k."""
        return float((self.mean_rank()[self._after(warmup), switch] <= k).mean())

    def best_and_worst_mean_rank(self) -> tuple[np.ndarray, np.ndarray]:
        ranks = self.mean_rank()[:, list(self.compromised)]
        return ranks.min(axis=1), ranks.max(axis=1)

    def detection_latency(self, k: int = 2) -> list[int | None]:
        """Per sample, the first 1-based round with every compromised switch in the top k."""
        out: list[int | None] = []
        if not self.compromised:
            return [None] * len(self.samples)
        cols = list(self.compromised)
        for s in range(self.positions.shape[0]):
            ok = (self.positions[s][:, cols] <= k).all(axis=1)
            hits = np.flatnonzero(ok)
            out.append(int(hits[0]) + 1 if hits.size else None)
        return out

    def switch_latency(self, switch: int, k: int = 2) -> int | None:
        """First 1-based round at which the sample-mean rank of ``switch`` is <= k."""
        hits = np.flatnonzero(self.mean_rank()[:, switch] <= k)
        return int(hits[0]) + 1 if hits.size else None


def monte_carlo(cfg: SimConfig, topo: Topology | None = None, workers: int = 1) -> ExperimentResult:
    topo = topo or load_topology(cfg)
    aconf = adversary_config(cfg, topo)
    compromised = tuple(sorted(aconf.compromised)) if aconf else ()
    jobs = [(cfg, topo, s) for s in range(cfg.samples)]
    if workers > 1 and cfg.samples > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(_run_sample, jobs))
    else:
        samples = [_run_sample(j) for j in jobs]
    return ExperimentResult(cfg, topo, compromised, samples)


def sweep_beta(cfg: SimConfig, betas: Sequence[float], topo: Topology | None = None,
               workers: int = 1) -> dict[float, ExperimentResult]:
    topo = topo or load_topology(cfg)
    return {b: monte_carlo(cfg.with_(beta=b), topo, workers) for b in betas}
