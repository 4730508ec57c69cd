"""Belief maintenance: per-switch alarm ratios smoothed into a risk ranking."""

from __future__ import annotations

from dataclasses import dataclass

from .model import Connection

Ranking = tuple[tuple[int, float], ...]


def rank_order(risk: list[float]) -> Ranking:
    """Descending by risk, ties broken by ascending switch id."""
    order = sorted(range(len(risk)), key=lambda k: (-risk[k], k))
    return tuple((k, risk[k]) for k in order)


def rank_positions(ranking: Ranking) -> list[int]:
    """1-based rank of every switch, indexed by switch id."""
    pos = [0] * len(ranking)
    for i, (k, _) in enumerate(ranking, start=1):
        pos[k] = i
    return pos


@dataclass(frozen=True)
class IntervalSnapshot:
    """What one interval left behind: the counts, their ratio and the new risk."""
    index: int
    alarms: tuple[int, ...]
    honey: tuple[int, ...]
    ratio: tuple[float, ...]
    risk: tuple[float, ...]
    ranking: Ranking


class BeliefTable:
    """Alarm counters ``a``, honey counters ``c`` and smoothed risk ``R`` per switch.

    With ``prism_counter_init`` the counters start every interval at 1 and the
    smoothed risk starts from 0, as in the generated PRISM model; otherwise
    counters start at 0, an idle switch scores 0 and the first interval seeds
    the average directly.
    """

    def __init__(self, num_switches: int, beta: float = 0.2, prism_counter_init: bool = False):
        if not 0 < beta < 1:
            raise ValueError("beta must lie strictly between 0 and 1")
        self.n = num_switches
        self.beta = beta
        self.prism_counter_init = prism_counter_init
        self.interval_index = 0
        self.risk = [0.0] * num_switches
        self.ratio = [0.0] * num_switches
        self._reset_counters()

    def _reset_counters(self) -> None:
        start = 1 if self.prism_counter_init else 0
        self.alarms = [start] * self.n
        self.honey = [start] * self.n

    def record(self, conn: Connection, alerted: bool) -> None:
        if not conn.is_honey:
            raise ValueError("only honey connections carry notifications")
        self.record_path(conn.path, alerted)

    def record_path(self, path, alerted: bool) -> None:
        for k in path:
            if not 0 <= k < self.n:
                raise KeyError(f"unknown switch {k}")
        honey, alarms = self.honey, self.alarms
        for k in path:
            honey[k] += 1
        if alerted:
            for k in path:
                alarms[k] += 1

    def end_of_interval(self) -> IntervalSnapshot:
        beta = self.beta
        first = self.interval_index == 0 and not self.prism_counter_init
        ratio = [a / c if c else 0.0 for a, c in zip(self.alarms, self.honey)]
        if first:
            risk = list(ratio)
        else:
            risk = [beta * r + (1 - beta) * prev for r, prev in zip(ratio, self.risk)]
        snap = IntervalSnapshot(
            index=self.interval_index,
            alarms=tuple(self.alarms),
            honey=tuple(self.honey),
            ratio=tuple(ratio),
            risk=tuple(risk),
            ranking=rank_order(risk),
        )
        self.ratio = ratio
        self.risk = risk
        self.interval_index += 1
        self._reset_counters()
        return snap

    def rank(self) -> Ranking:
        return rank_order(self.risk)

    def above(self, threshold: float) -> list[int]:
        """Switches whose smoothed risk exceeds an operator-chosen threshold."""
        return [k for k, r in self.rank() if r > threshold]
