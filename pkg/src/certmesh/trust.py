"""Per-node trust bookkeeping and the key acceptance decision.

Evidence from several certifiers is combined with noisy-OR, which is what
Dempster's rule reduces to when every source only commits mass to "the key
is genuine" or to ignorance.  The combiner is a plain callable so a richer
rule can be passed to :func:`decide_key` instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from certmesh.identity import Certificate, NodeId, PublicKey

KNOWN_TRUST = 0.75
DEFAULT_TRUST = 0.5
REWARD_RATE = 0.05
PENALTY_FACTOR = 0.5

Combiner = Callable[[Iterable[float]], float]


def combine_trust(trusts: Iterable[float]) -> float:
    """Noisy-OR: ``1 - prod(1 - t)``; no evidence gives 0."""
    disbelief = 1.0
    for t in trusts:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"trust value {t} outside [0, 1]")
        disbelief *= 1.0 - t
    return min(1.0, max(0.0, 1.0 - disbelief))


@dataclass(frozen=True)
class MPKTV:
    """Minimum aggregate trust a requester demands before accepting a key."""

    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"MPKTV must lie in [0, 1], got {self.threshold}")


@dataclass
class TrustTable:
    owner: NodeId
    entries: dict[NodeId, float] = field(default_factory=dict)
    known: set[NodeId] = field(default_factory=set)
    known_trust: float = KNOWN_TRUST
    default_trust: float = DEFAULT_TRUST
    reward_rate: float = REWARD_RATE
    penalty_factor: float = PENALTY_FACTOR

    def add_known(self, peer: NodeId) -> None:
        """Record ``peer`` as one of the owner's certifiers."""
        self.known.add(peer)
        self.entries.setdefault(peer, self.known_trust)

    def __getitem__(self, peer: NodeId) -> float:
        return initial_trust(self, peer)


def initial_trust(table: TrustTable, peer: NodeId) -> float:
    if peer in table.entries:
        return table.entries[peer]
    value = table.known_trust if peer in table.known else table.default_trust
    table.entries[peer] = value
    return value


def on_confirmation(table: TrustTable, issuer: NodeId) -> float:
    t = initial_trust(table, issuer)
    t = min(1.0, t + table.reward_rate * (1.0 - t))
    table.entries[issuer] = t
    return t


def on_spurious(table: TrustTable, issuer: NodeId) -> float:
    t = initial_trust(table, issuer) * table.penalty_factor
    table.entries[issuer] = max(0.0, t)
    return table.entries[issuer]


@dataclass
class KeyCandidate:
    """One claimed key for a subject and everyone who vouched for it."""

    key: PublicKey
    certifiers: dict[NodeId, Certificate] = field(default_factory=dict)

    def add(self, cert: Certificate) -> bool:
        """Add a certifier; returns False when it was already counted."""
        if cert.issuer in self.certifiers:
            return False
        self.certifiers[cert.issuer] = cert
        return True

    def combined_trust(self, table: TrustTable, combine: Combiner = combine_trust) -> float:
        return combine(initial_trust(table, n) for n in sorted(self.certifiers))


@dataclass(frozen=True)
class Accept:
    key: PublicKey
    certifiers: frozenset
    combined_trust: float


def decide_key(candidates: list[KeyCandidate], table: TrustTable, mpktv: MPKTV | float,
               combine: Combiner = combine_trust) -> Optional[Accept]:
    """Accept the best-supported key if it clears ``mpktv`` and beats every rival.

    Returns None (undecided) otherwise, including on ties at the top.
    """
    threshold = mpktv.threshold if isinstance(mpktv, MPKTV) else float(mpktv)
    scored = sorted(((c.combined_trust(table, combine), c) for c in candidates if c.certifiers),
                    key=lambda sc: (-sc[0], sc[1].key))
    if not scored:
        return None
    best_trust, best = scored[0]
    if best_trust < threshold:
        return None
    if len(scored) > 1 and not best_trust > scored[1][0]:
        return None
    return Accept(best.key, frozenset(best.certifiers), best_trust)


def detect_conflicts(candidates: list[KeyCandidate], decision: Accept) -> list[NodeId]:
    """Issuers of every certificate that binds the subject to a losing key."""
    losers: set[NodeId] = set()
    for c in candidates:
        if c.key != decision.key:
            losers.update(c.certifiers)
    return sorted(losers)


def apply_outcome(table: TrustTable, candidates: list[KeyCandidate], decision: Accept) -> list[NodeId]:
    """Reward the winning certifiers and halve everyone who backed a rival key.

    A node on both sides is only penalised.
    """
    losers = detect_conflicts(candidates, decision)
    for n in sorted(decision.certifiers):
        if n not in losers:
            on_confirmation(table, n)
    for n in losers:
        on_spurious(table, n)
    return losers
