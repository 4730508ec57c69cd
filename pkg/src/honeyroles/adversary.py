"""Confidence-driven adversary living in one or more compromised switches.

All compromised switches feed one shared state. For each visible connection
of the target role the adversary classifies it correctly with probability
``confidence/100`` and attacks whatever it believes is real. The confidence
takes a bounded random walk once per round.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from fractions import Fraction

from .model import AttackKind, Connection, HostKind


class Decision(enum.Enum):
    NO_VISIBILITY = "no-visibility"
    IGNORE = "ignore"
    ATTACK = "attack"


@dataclass(frozen=True)
class AdversaryConfig:
    compromised: frozenset[int]
    target_role: int = 0
    confidence_init: int = 10
    confidence_cap: int = 90
    increase_weight: Fraction = Fraction(2, 3)
    attack_kinds: tuple[AttackKind, ...] = (AttackKind.SSL_STRIP, AttackKind.BLACKHOLE)

    def __post_init__(self):
        object.__setattr__(self, "compromised", frozenset(self.compromised))
        if not self.compromised:
            raise ValueError("an adversary needs at least one compromised switch")
        if not 0 <= self.confidence_init <= self.confidence_cap <= 100:
            raise ValueError("need 0 <= confidence_init <= confidence_cap <= 100")
        if not 0 <= self.increase_weight <= 1:
            raise ValueError("increase_weight must be a probability")
        if not self.attack_kinds:
            raise ValueError("at least one attack kind is required")


@dataclass
class AdversaryState:
    confidence: int
    attacks_this_round: int = 0
    observations_this_round: int = 0

    @classmethod
    def initial(cls, cfg: AdversaryConfig) -> "AdversaryState":
        return cls(cfg.confidence_init)


def sees(cfg: AdversaryConfig, conn: Connection) -> bool:
    return conn.role == cfg.target_role and not cfg.compromised.isdisjoint(conn.path)


def observe(state: AdversaryState, cfg: AdversaryConfig, conn: Connection,
            rng: random.Random, visible: bool | None = None) -> Decision:
    """Classify one connection; on ATTACK also sets ``conn.attack``.

    ``visible`` lets callers pass a precomputed visibility test.
    """
    if visible is None:
        visible = sees(cfg, conn)
    if not visible:
        return Decision.NO_VISIBILITY
    state.observations_this_round += 1
    correct = rng.random() < state.confidence / 100
    # attack what looks real: a correct read of a real flow or a misread honey flow
    if correct == (conn.kind is HostKind.REAL):
        state.attacks_this_round += 1
        kinds = cfg.attack_kinds
        conn.attack = kinds[0] if len(kinds) == 1 else kinds[rng.randrange(len(kinds))]
        return Decision.ATTACK
    return Decision.IGNORE


def end_of_round(state: AdversaryState, cfg: AdversaryConfig, rng: random.Random) -> AdversaryState:
    u = rng.random()
    if state.confidence < cfg.confidence_cap:
        step = 1 if u < cfg.increase_weight else -1
    else:
        step = 0 if u < 0.5 else -1
    state.confidence = max(0, state.confidence + step)
    state.attacks_this_round = 0
    state.observations_this_round = 0
    return state
