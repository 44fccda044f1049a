"""Wire messages of the certificate exchange.

Each message has a canonical byte form (``to_bytes``) with fields in the
order declared here.  ``signed_part`` is that form minus the signature and
is what the sender signs.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from functools import cached_property

from certmesh import wire
from certmesh.identity import Certificate, NodeId


class _Message:
    kind = "MSG"
    signature: bytes

    def signed_part(self) -> bytes:
        return wire.encode(self.kind, *(getattr(self, f.name) for f in fields(self)
                                        if f.name != "signature"))

    def to_bytes(self) -> bytes:
        return self.encoded

    @cached_property
    def encoded(self) -> bytes:
        return wire.encode(self.kind, *(getattr(self, f.name) for f in fields(self)))


@dataclass(frozen=True)
class CertRequest(_Message):
    """CREQ: flooded with a hop limit; carries the requester's self-signed certificate."""

    origin: NodeId
    origin_cert: Certificate
    target: NodeId
    known_certifiers: tuple
    request_id: int
    ttl: int
    accumulated_path: tuple

    kind = "CREQ"

    @property
    def is_bootstrap(self) -> bool:
        return self.origin == self.target

    def forwarded_by(self, node: NodeId) -> "CertRequest":
        return CertRequest(self.origin, self.origin_cert, self.target, self.known_certifiers,
                           self.request_id, self.ttl - 1, self.accumulated_path + (node,))

    def signed_part(self) -> bytes:
        raise TypeError("CREQs are not signed")


@dataclass(frozen=True)
class CertReply(_Message):
    """CREP: certificates for the requested key, signed by the replier."""

    request_id: int
    origin: NodeId
    target: NodeId
    replier: NodeId
    replier_cert: Certificate
    certificates: tuple
    exchange_offer: bool
    paths_used: tuple
    signature: bytes = b""

    kind = "CREP"


@dataclass(frozen=True)
class KeyNotice(_Message):
    """Intermediate to target: ``origin`` is asking for your key."""

    request_id: int
    origin: NodeId
    origin_cert: Certificate
    target: NodeId
    notifier: NodeId
    signature: bytes = b""

    kind = "KNOTE"


@dataclass(frozen=True)
class OriginCertRequest(_Message):
    """Target to intermediate: please vouch for the requester's key."""

    request_id: int
    origin: NodeId
    target: NodeId
    notifier: NodeId
    signature: bytes = b""

    kind = "OCREQ"


@dataclass(frozen=True)
class OriginCertGrant(_Message):
    request_id: int
    notifier: NodeId
    target: NodeId
    certificate: Certificate
    signature: bytes = b""

    kind = "OCGRANT"


@dataclass(frozen=True)
class FirstPacket(_Message):
    """Requester to target after acceptance: who vouched, plus a certificate for the target."""

    origin: NodeId
    target: NodeId
    origin_cert: Certificate
    certifiers: tuple
    grant: Certificate
    signature: bytes = b""

    kind = "FIRST"


@dataclass(frozen=True)
class ExchangeRequest(_Message):
    """Hands the receiver a certificate and asks for one back (volunteers, refresh)."""

    sender: NodeId
    receiver: NodeId
    sender_cert: Certificate
    grant: Certificate
    purpose: str
    signature: bytes = b""

    kind = "XREQ"


@dataclass(frozen=True)
class ExchangeReply(_Message):
    sender: NodeId
    receiver: NodeId
    grant: Certificate
    purpose: str
    signature: bytes = b""

    kind = "XREP"
