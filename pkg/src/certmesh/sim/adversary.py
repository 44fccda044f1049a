"""Forging nodes: they route honestly but answer every CREQ with a made-up key."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from certmesh.identity import NodeId, PublicKey, fabricate_key
from certmesh.protocol import CertReply, CertRequest, ExchangeReply, FirstPacket, Node
from certmesh.routing import SourceRoute


class AttackMode(str, enum.Enum):
    ISOLATED = "isolated"
    COLLUDING = "colluding"


@dataclass
class AdversaryModel:
    mode: AttackMode
    members: frozenset
    seed: int = 0
    drop_certificates: bool = False
    _keys: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.mode = AttackMode(self.mode)
        self.members = frozenset(self.members)

    def fabricated_key(self, attacker: NodeId, target: NodeId) -> PublicKey:
        """Colluders share one key per target; isolated forgers each invent their own."""
        owner = -1 if self.mode is AttackMode.COLLUDING else attacker
        k = (owner, target)
        if k not in self._keys:
            self._keys[k] = fabricate_key("forged", self.seed, owner, target)
        return self._keys[k]


def adversary_on_creq(adv: AdversaryModel, attacker: "AttackerNode", creq: CertRequest) -> CertReply:
    """Build the spurious CREP an attacker sends back for ``creq``."""
    if attacker.id not in adv.members:
        raise ValueError(f"node {attacker.id} is not an attacker")
    fake = adv.fabricated_key(attacker.id, creq.target)
    cert = attacker._issue(creq.target, fake)
    return CertReply(creq.request_id, creq.origin, creq.target, attacker.id, attacker.self_cert,
                     (cert,), False, ())


class AttackerNode(Node):
    """Forwards floods and source-routed packets like anyone else (unless told to
    drop certificate traffic) but never vouches for an authentic key."""

    def __init__(self, node_id, keys, net, adversary: AdversaryModel, **kwargs):
        super().__init__(node_id, keys, net, **kwargs)
        self.adversary = adversary

    def _on_creq(self, creq: CertRequest, sender: NodeId) -> None:
        if self.id in creq.accumulated_path:
            return
        path = creq.accumulated_path + (self.id,)
        self.dsr.cache.insert(SourceRoute._unchecked(path[::-1]), prefixes=False)
        key = (creq.origin, creq.request_id)
        if creq.origin == self.id or key in self._seen:
            return
        self._seen.add(key)
        if not self._replied_recently(creq.origin, creq.target):
            self._replied[(creq.origin, creq.target)] = self.now
            crep = adversary_on_creq(self.adversary, self, creq)
            routes = self._routes_to(creq.origin, extra=[SourceRoute(path[::-1])])
            self._send_on_routes(self._sign(replace(crep, paths_used=tuple(routes))), routes)
        if creq.target != self.id:
            self._forward_creq(creq)

    def relay(self, msg, route, index) -> bool:
        if self.adversary.drop_certificates and isinstance(msg, (CertReply, FirstPacket, ExchangeReply)):
            return False
        return super().relay(msg, route, index)

    def start_exchange(self, target, mpktv):
        raise NotImplementedError("attackers do not request keys in these scenarios")
