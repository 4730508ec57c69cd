"""Honey-agent detectors for SSL-stripping and blackholing."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import AttackKind, Connection, Outcome


@dataclass(frozen=True)
class DetectorConfig:
    estimated_timeout: float = 5.0
    timeout_increment: float = 1.0
    benign_drop_probability: float = 0.0
    # nominal round-trip of an unattacked exchange, seconds
    response_latency: float = 0.05
    adaptive_timeout: bool = True

    def __post_init__(self):
        if self.estimated_timeout <= 0:
            raise ValueError("estimated_timeout must be positive")
        if self.timeout_increment < 0:
            raise ValueError("timeout_increment must be non-negative")
        if not 0 <= self.benign_drop_probability < 1:
            raise ValueError("benign_drop_probability must lie in [0, 1)")


@dataclass(frozen=True, slots=True)
class ResponseObservation:
    responded: bool
    response_time: float | None = None
    redirect_honored: bool = True


@dataclass(frozen=True, slots=True)
class Alert:
    kind: AttackKind
    connection: Connection
    average_delay: float
    dropped_requests: int


def simulate_outcome(
    conn: Connection,
    attacked: bool,
    cfg: DetectorConfig,
    rng: random.Random,
) -> ResponseObservation:
    """Turn the adversary's decision into what the client actually sees.

    Sets ``conn.outcome`` as a side effect. ``conn.attack`` must already hold
    the attack kind when ``attacked`` is true.
    """
    if attacked:
        conn.outcome = Outcome.ATTACKED
        if conn.attack is AttackKind.BLACKHOLE:
            return ResponseObservation(responded=False, redirect_honored=True)
        return ResponseObservation(True, cfg.response_latency, redirect_honored=False)
    # congestion only ever shows up as a timeout, never as a missing redirect
    if cfg.benign_drop_probability and rng.random() < cfg.benign_drop_probability:
        conn.outcome = Outcome.BENIGN_DROP
        return ResponseObservation(responded=False)
    conn.outcome = Outcome.DELIVERED
    return ResponseObservation(True, cfg.response_latency, True)


def detect(conn: Connection, obs: ResponseObservation, cfg: DetectorConfig,
           timeout: float | None = None) -> Alert | None:
    if not conn.is_honey:
        raise ValueError("detectors only run on honey connections")
    limit = cfg.estimated_timeout if timeout is None else timeout
    if obs.responded and not obs.redirect_honored:
        return Alert(AttackKind.SSL_STRIP, conn, average_delay=obs.response_time or 0.0,
                     dropped_requests=0)
    if not obs.responded or (obs.response_time is not None and obs.response_time > limit):
        delay = limit if obs.response_time is None else obs.response_time
        return Alert(AttackKind.BLACKHOLE, conn, average_delay=delay, dropped_requests=1)
    return None


class HoneyAgentDetector:
    """Per-agent detector whose blackhole timeout grows after each timeout alert."""

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self.timeout = cfg.estimated_timeout

    def inspect(self, conn: Connection, obs: ResponseObservation) -> Alert | None:
        alert = detect(conn, obs, self.cfg, self.timeout)
        if alert is not None and alert.kind is AttackKind.BLACKHOLE and self.cfg.adaptive_timeout:
            self.timeout += self.cfg.timeout_increment
        return alert
