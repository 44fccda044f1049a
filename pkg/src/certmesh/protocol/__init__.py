from certmesh.protocol.messages import (
    CertReply,
    CertRequest,
    ExchangeReply,
    ExchangeRequest,
    FirstPacket,
    KeyNotice,
    OriginCertGrant,
    OriginCertRequest,
)
from certmesh.protocol.node import (
    CertStore,
    ExchangeSession,
    Node,
    ProtocolError,
    ProtocolParams,
    SessionState,
    handle_creq,
    handle_crep,
    mutual_certify,
    revocation_refresh,
)
