from certmesh.identity.certificates import Certificate, issue_certificate, validate_certificate
from certmesh.identity.keys import (
    KeyPair,
    NodeId,
    OracleScheme,
    PublicKey,
    default_scheme,
    fabricate_key,
    generate_keypair,
    sign,
    verify,
)

__all__ = [
    "Certificate", "KeyPair", "NodeId", "OracleScheme", "PublicKey", "default_scheme",
    "fabricate_key", "generate_keypair", "issue_certificate", "sign", "validate_certificate",
    "verify",
]
