from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

from certmesh import wire
from certmesh.identity.keys import KeyPair, NodeId, OracleScheme, PublicKey, sign, verify


@dataclass(frozen=True)
class Certificate:
    """A signed binding of ``subject`` to ``subject_key``, vouched for by ``issuer``."""

    subject: NodeId
    subject_key: PublicKey
    issuer: NodeId
    issued_at: float
    lifetime: float
    signature: bytes = b""

    @property
    def self_signed(self) -> bool:
        return self.issuer == self.subject

    @property
    def expires_at(self) -> float:
        return self.issued_at + self.lifetime

    def payload(self) -> bytes:
        return wire.encode(self.subject, self.subject_key, self.issued_at, self.lifetime)

    def to_bytes(self) -> bytes:
        return self.encoded

    @cached_property
    def encoded(self) -> bytes:
        return wire.encode(self.subject, self.subject_key, self.issuer, self.issued_at,
                           self.lifetime, self.signature, self.self_signed)

    def active(self, now: float) -> bool:
        return self.issued_at <= now < self.issued_at + self.lifetime


def issue_certificate(issuer_keys: KeyPair, issuer: NodeId, subject: NodeId, key: PublicKey,
                      now: float, lifetime: float, scheme: OracleScheme | None = None) -> Certificate:
    if not lifetime > 0:
        raise ValueError(f"certificate lifetime must be positive, got {lifetime}")
    cert = Certificate(subject, key, issuer, float(now), float(lifetime))
    return replace(cert, signature=sign(issuer_keys, cert.payload(), scheme))


def validate_certificate(cert: Certificate, issuer_key: PublicKey, now: float,
                         scheme: OracleScheme | None = None) -> bool:
    """Signature check plus the half-open window ``[issued_at, issued_at + lifetime)``."""
    if not cert.active(now):
        return False
    return verify(issuer_key, cert.payload(), cert.signature, scheme)
