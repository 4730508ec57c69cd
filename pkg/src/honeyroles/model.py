"""Domain records shared by the defender, adversary and detectors."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .topology import Path


class HostKind(enum.IntEnum):
    # values follow the PRISM flowType encoding: 1 = real, 2 = honey
    REAL = 1
    HONEY = 2


class AttackKind(enum.IntEnum):
    SSL_STRIP = 1
    BLACKHOLE = 2


class Outcome(enum.IntEnum):
    DELIVERED = 0
    ATTACKED = 1
    BENIGN_DROP = 2


@dataclass(frozen=True, slots=True)
class Host:
    id: int
    ip: int
    mac: int
    kind: HostKind
    role: int | None
    switch: int
    server: bool = False

    @property
    def ip_text(self) -> str:
        return ".".join(str((self.ip >> s) & 0xFF) for s in (24, 16, 8, 0))

    @property
    def mac_text(self) -> str:
        return ":".join(f"{(self.mac >> s) & 0xFF:02x}" for s in range(40, -8, -8))


@dataclass(slots=True)
class Connection:
    seq: int
    kind: HostKind
    role: int
    source: int
    destination: int
    path: Path
    round: int
    outcome: Outcome = Outcome.DELIVERED
    attack: AttackKind | None = None

    @property
    def is_honey(self) -> bool:
        return self.kind is HostKind.HONEY
