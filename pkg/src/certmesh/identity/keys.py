"""Key material and the pluggable signature scheme.

The default scheme is a simulation oracle: the public token is a digest of
the secret, and verification looks the secret up in a private table that
only ``generate_keypair`` writes to.  Nobody can produce a valid signature
for a public key without holding its secret, but anyone may mint new keys.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass, field

NodeId = int

TOKEN_BYTES = 32
SIG_BYTES = 64


@dataclass(frozen=True, order=True)
class PublicKey:
    token: bytes

    def __post_init__(self):
        if len(self.token) != TOKEN_BYTES:
            raise ValueError(f"public token must be {TOKEN_BYTES} bytes")

    def to_bytes(self) -> bytes:
        return self.token

    def short(self) -> str:
        return self.token[:4].hex()


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    secret: bytes = field(repr=False)


class OracleScheme:
    """Keyed-digest signatures checked against an append-only secret table."""

    def __init__(self):
        self._secrets: dict[bytes, bytes] = {}

    def keypair_from_secret(self, secret: bytes) -> KeyPair:
        token = hashlib.blake2b(secret, digest_size=TOKEN_BYTES, person=b"certmesh-pub").digest()
        self._secrets.setdefault(token, secret)
        return KeyPair(PublicKey(token), secret)

    def sign(self, keys: KeyPair, payload: bytes) -> bytes:
        return hashlib.blake2b(payload, key=keys.secret, digest_size=SIG_BYTES).digest()

    def verify(self, key: PublicKey, payload: bytes, sig: bytes) -> bool:
        secret = self._secrets.get(key.token)
        if secret is None or len(sig) != SIG_BYTES:
            return False
        expected = hashlib.blake2b(payload, key=secret, digest_size=SIG_BYTES).digest()
        return hmac.compare_digest(expected, sig)


default_scheme = OracleScheme()


def generate_keypair(node: NodeId, rng: random.Random, scheme: OracleScheme | None = None) -> KeyPair:
    """Draw a keypair for ``node`` from ``rng``.

    The node id is mixed into the secret so two nodes drawing from
    identically seeded sources still end up with distinct keys.
    """
    scheme = scheme or default_scheme
    material = rng.getrandbits(256).to_bytes(32, "big") + node.to_bytes(8, "big")
    secret = hashlib.blake2b(material, digest_size=32, person=b"certmesh-sec").digest()
    return scheme.keypair_from_secret(secret)


def sign(keys: KeyPair, payload: bytes, scheme: OracleScheme | None = None) -> bytes:
    return (scheme or default_scheme).sign(keys, payload)


def verify(key: PublicKey, payload: bytes, sig: bytes, scheme: OracleScheme | None = None) -> bool:
    return (scheme or default_scheme).verify(key, payload, sig)


def fabricate_key(*material) -> PublicKey:
    """A public key nobody holds a secret for; what a forger hands out."""
    raw = repr(material).encode()
    return PublicKey(hashlib.blake2b(raw, digest_size=TOKEN_BYTES, person=b"certmesh-fab").digest())
