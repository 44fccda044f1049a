"""The certificate-exchange state machine run by every honest node.

All handlers run to completion on a single simulated event; the only way
nodes affect each other is by sending messages through ``net``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from certmesh.identity import (
    Certificate,
    KeyPair,
    NodeId,
    OracleScheme,
    PublicKey,
    default_scheme,
    issue_certificate,
    validate_certificate,
)
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
from certmesh.routing import (
    DsrAgent,
    RouteReply,
    RouteRequest,
    SourceRoute,
    select_disjoint_paths,
    try_route,
)
from certmesh.trust import (
    MPKTV,
    Accept,
    KeyCandidate,
    TrustTable,
    apply_outcome,
    decide_key,
    on_spurious,
)


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    ttl_schedule: tuple = (2, 4, 8)
    k_paths: int = 3
    cert_lifetime: float = 120.0
    hop_delay: float = 0.001
    timeout_margin: float = 0.05
    self_reply_below: int = 3       # target answers for itself with fewer certifiers than this
    volunteer_cap: int = 5
    refresh_period: float = math.inf
    reply_memory: float = 10.0
    cache_capacity: int = 8

    def __post_init__(self):
        if not self.ttl_schedule or any(t < 1 for t in self.ttl_schedule):
            raise ProtocolError(f"bad TTL schedule {self.ttl_schedule}")
        if self.k_paths < 1:
            raise ProtocolError("k_paths must be at least 1")
        if not self.cert_lifetime > 0:
            raise ProtocolError("certificate lifetime must be positive")
        if not self.refresh_period > 0:
            raise ProtocolError("refresh period must be positive")

    def attempt_timeout(self, ttl: int) -> float:
        return 2 * ttl * self.hop_delay + self.timeout_margin


class SessionState(enum.Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    FAILED = "failed"


@dataclass
class ExchangeSession:
    origin: NodeId
    target: NodeId
    mpktv: MPKTV
    ttl_schedule: tuple
    started_at: float
    attempt: int = 1
    required: int = 0               # bootstrap only: distinct certifiers wanted
    state: SessionState = SessionState.PENDING
    decided_at: Optional[float] = None
    decision: Optional[Accept] = None
    candidates: dict = field(default_factory=dict)    # PublicKey -> KeyCandidate
    request_ids: list = field(default_factory=list)
    replied: set = field(default_factory=set)
    volunteers: dict = field(default_factory=dict)    # NodeId -> (PublicKey, return route)
    certifier_trust: dict = field(default_factory=dict)   # winners' trust at decision time

    @property
    def bootstrap(self) -> bool:
        return self.origin == self.target

    @property
    def accepted_key(self) -> Optional[PublicKey]:
        return self.decision.key if self.decision else None

    @property
    def delay(self) -> Optional[float]:
        if self.state is not SessionState.ACCEPTED:
            return None
        return self.decided_at - self.started_at

    def candidate_list(self) -> list[KeyCandidate]:
        return [self.candidates[k] for k in sorted(self.candidates)]

    def _close(self, state: SessionState, now: float) -> None:
        if self.state is not SessionState.PENDING:
            raise ProtocolError(f"session {self.origin}->{self.target} already {self.state.value}")
        self.state = state
        self.decided_at = now


class CertStore:
    """Certificates a node holds, indexed by subject then issuer."""

    def __init__(self, owner: NodeId):
        self.owner = owner
        self.certs: dict[NodeId, dict[NodeId, Certificate]] = {}

    def add(self, cert: Certificate) -> bool:
        by_issuer = self.certs.setdefault(cert.subject, {})
        old = by_issuer.get(cert.issuer)
        if old == cert:
            return False
        by_issuer[cert.issuer] = cert
        return True

    def get(self, subject: NodeId, issuer: NodeId, now: float) -> Optional[Certificate]:
        cert = self.certs.get(subject, {}).get(issuer)
        if cert is not None and cert.active(now):
            return cert
        return None

    def about(self, subject: NodeId, now: float) -> list[Certificate]:
        return [c for _, c in sorted(self.certs.get(subject, {}).items()) if c.active(now)]

    def issued(self) -> list[Certificate]:
        return [c for s in sorted(self.certs) for i, c in self.certs[s].items() if i == self.owner
                and s != self.owner]

    def purge(self, now: float) -> list[Certificate]:
        gone = []
        for subject in list(self.certs):
            by_issuer = self.certs[subject]
            for issuer in list(by_issuer):
                if now >= by_issuer[issuer].expires_at:
                    gone.append(by_issuer.pop(issuer))
            if not by_issuer:
                del self.certs[subject]
        return gone

    def __len__(self) -> int:
        return sum(len(v) for v in self.certs.values())


class Node:
    """An honest participant: DSR agent, certificate store, trust table and sessions."""

    def __init__(self, node_id: NodeId, keys: KeyPair, net, params: ProtocolParams = ProtocolParams(),
                 scheme: OracleScheme = default_scheme):
        self.id = node_id
        self.keys = keys
        self.net = net
        self.params = params
        self.scheme = scheme
        self.table = TrustTable(node_id)
        self.store = CertStore(node_id)
        self.dsr = DsrAgent(node_id, net, params.cache_capacity, params.hop_delay, params.timeout_margin)
        self.sessions: dict[int, ExchangeSession] = {}   # request_id -> session
        self.peer_certifiers: dict[NodeId, frozenset] = {}
        self._seen: set = set()
        self._replied: dict = {}
        self._pending_origin_keys: dict = {}
        self._purged_at = -math.inf
        self.self_cert = self._issue(node_id, keys.public)
        self.store.add(self.self_cert)

    # -- helpers --------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.net.now

    @property
    def certifiers(self) -> set[NodeId]:
        """K(self): peers currently holding our key certified."""
        return set(self.table.known)

    def _issue(self, subject: NodeId, key: PublicKey) -> Certificate:
        return issue_certificate(self.keys, self.id, subject, key, self.now, self.params.cert_lifetime,
                                 self.scheme)

    def _sign(self, msg):
        return replace(msg, signature=self.scheme.sign(self.keys, msg.signed_part()))

    def _verify(self, msg, key: PublicKey) -> bool:
        return self.scheme.verify(key, msg.signed_part(), msg.signature)

    def _self_cert_key(self, cert: Certificate, claimed: NodeId) -> Optional[PublicKey]:
        """Key from a self-signed certificate, if it really is one for ``claimed``."""
        if cert.subject != claimed or not cert.self_signed:
            return None
        if not validate_certificate(cert, cert.subject_key, self.now, self.scheme):
            return None
        return cert.subject_key

    def key_of(self, peer: NodeId) -> Optional[PublicKey]:
        """The key we ourselves have certified for ``peer``, if any."""
        cert = self.store.get(peer, self.id, self.now)
        return cert.subject_key if cert else None

    def knows(self, peer: NodeId) -> bool:
        return self.key_of(peer) is not None

    def _peer_key(self, peer: NodeId, presented: Certificate) -> Optional[PublicKey]:
        """Resolve a peer's key: our own binding wins, else its self-signed certificate."""
        offered = self._self_cert_key(presented, peer)
        known = self.key_of(peer)
        if known is not None and offered is not None and offered != known:
            return None
        return known or offered

    def _maintain(self) -> None:
        now = self.now
        if now <= self._purged_at:
            return
        self._purged_at = now
        for cert in self.store.purge(now):
            if cert.subject == self.id and cert.issuer != self.id:
                self.table.known.discard(cert.issuer)
        if self.store.get(self.id, self.id, now) is None:
            self.self_cert = self._issue(self.id, self.keys.public)
            self.store.add(self.self_cert)

    def add_mutual(self, peer: NodeId, cert_about_me: Certificate) -> None:
        """Record that ``peer`` certified our key."""
        self.store.add(cert_about_me)
        self.table.add_known(peer)

    def _replied_recently(self, origin: NodeId, target: NodeId) -> bool:
        t = self._replied.get((origin, target))
        return t is not None and self.now - t < self.params.reply_memory

    def _send_on_routes(self, msg, routes: list[SourceRoute], on_fail=None) -> None:
        for r in routes:
            self.net.send_routed(msg, r, on_fail=on_fail)

    def _routes_to(self, dst: NodeId, extra=()) -> list[SourceRoute]:
        routes = list(extra) + self.dsr.cache.lookup(dst)
        return select_disjoint_paths(routes, self.params.k_paths) if routes else []

    def _with_route(self, dst: NodeId, then, prefer: Optional[SourceRoute] = None) -> None:
        """Call ``then(routes)`` once some route to ``dst`` is known (possibly none)."""
        if prefer is not None:
            then([prefer] + [r for r in self.dsr.cache.lookup(dst) if r != prefer])
            return
        self.dsr.discover(dst, self.params.ttl_schedule[-1], then)

    # -- transport callbacks -----------------------------------------------------

    def receive(self, msg, sender: NodeId) -> None:
        self._maintain()
        name = _HANDLERS.get(type(msg))
        if name is None:
            raise ProtocolError(f"node {self.id} cannot handle {type(msg).__name__}")
        getattr(self, name)(msg, sender)

    def relay(self, msg, route: SourceRoute, index: int) -> bool:
        """Called at each intermediate hop; returning False drops the packet."""
        if isinstance(msg, RouteReply):
            self.dsr.on_rrep(msg)
        else:
            self.dsr.learn_path(route.hops)
        return True

    def on_route_error(self, route: SourceRoute, u: NodeId, v: NodeId) -> None:
        self.dsr.on_route_error(route, u, v)

    # -- routing messages --------------------------------------------------------

    def _on_rreq(self, msg: RouteRequest, sender: NodeId) -> None:
        self.dsr.on_rreq(msg, sender)

    def _on_rrep(self, msg: RouteReply, sender: NodeId) -> None:
        self.dsr.on_rrep(msg)

    # -- requester side ----------------------------------------------------------

    def start_exchange(self, target: NodeId, mpktv: MPKTV | float) -> ExchangeSession:
        if target == self.id:
            raise ProtocolError("a node cannot request its own key; use bootstrap")
        if not isinstance(mpktv, MPKTV):
            mpktv = MPKTV(float(mpktv))
        self._maintain()
        session = ExchangeSession(self.id, target, mpktv, tuple(self.params.ttl_schedule), self.now)
        self.net.session_started(self, session)
        self._send_creq(session)
        return session

    def bootstrap(self, required: int) -> ExchangeSession:
        """Flood a request for certificates of our own key until ``required`` peers sign it."""
        self._maintain()
        session = ExchangeSession(self.id, self.id, MPKTV(0.0), tuple(self.params.ttl_schedule),
                                  self.now, required=required)
        if required <= 0:
            session._close(SessionState.ACCEPTED, self.now)
            return session
        self._send_creq(session)
        return session

    def _send_creq(self, session: ExchangeSession) -> None:
        ttl = session.ttl_schedule[session.attempt - 1]
        rid = self.net.next_request_id()
        session.request_ids.append(rid)
        self.sessions[rid] = session
        self._seen.add((self.id, rid))
        creq = CertRequest(self.id, self.self_cert, session.target, tuple(sorted(self.table.known)),
                           rid, ttl, (self.id,))
        self.net.broadcast(self.id, creq)
        self.net.schedule(self.params.attempt_timeout(ttl), self.escalate_or_fail, session, session.attempt)

    def escalate_or_fail(self, session: ExchangeSession, attempt: int) -> None:
        if session.state is not SessionState.PENDING or session.attempt != attempt:
            return
        if session.attempt < len(session.ttl_schedule):
            session.attempt += 1
            self._send_creq(session)
            return
        session._close(SessionState.FAILED, self.now)
        self.net.session_decided(self, session)

    def _on_crep(self, crep: CertReply, sender: NodeId) -> None:
        if crep.origin != self.id:
            return
        session = self.sessions.get(crep.request_id)
        if session is None or session.state is not SessionState.PENDING:
            return
        if crep.replier in session.replied:
            return
        handle_crep(self, session, crep)

    def _accept(self, session: ExchangeSession, decision: Accept) -> None:
        session.certifier_trust = {n: self.table[n] for n in sorted(decision.certifiers)}
        losers = apply_outcome(self.table, session.candidate_list(), decision)
        session.decision = decision
        session._close(SessionState.ACCEPTED, self.now)
        winner = session.candidates[decision.key]
        for issuer in sorted(winner.certifiers):
            if issuer not in losers:
                self.store.add(winner.certifiers[issuer])
        self.net.session_decided(self, session)
        mutual_certify(self, session)

    # -- intermediate and target side ----------------------------------------------

    def _on_creq(self, creq: CertRequest, sender: NodeId) -> None:
        if self.id in creq.accumulated_path:
            return
        path = creq.accumulated_path + (self.id,)
        self.dsr.cache.insert(SourceRoute._unchecked(path[::-1]), prefixes=False)
        key = (creq.origin, creq.request_id)
        if creq.origin == self.id or key in self._seen:
            return
        self._seen.add(key)
        handle_creq(self, creq)

    def _reply_creq(self, creq: CertRequest, certificates: tuple, offer: bool) -> None:
        self._replied[(creq.origin, creq.target)] = self.now
        back = SourceRoute((creq.accumulated_path + (self.id,))[::-1])
        routes = self._routes_to(creq.origin, extra=[back])
        crep = CertReply(creq.request_id, creq.origin, creq.target, self.id, self.self_cert,
                         certificates, offer, tuple(routes))
        self._send_on_routes(self._sign(crep), routes)

    def _forward_creq(self, creq: CertRequest) -> None:
        if creq.ttl > 1:
            self.net.broadcast(self.id, creq.forwarded_by(self.id))

    def _notify_target(self, creq: CertRequest) -> None:
        routes = self.dsr.cache.lookup(creq.target)
        if not routes:
            return
        notice = KeyNotice(creq.request_id, creq.origin, creq.origin_cert, creq.target, self.id)
        self.net.send_routed(self._sign(notice), min(routes, key=lambda r: (len(r), r.hops)))

    def _on_notice(self, msg: KeyNotice, sender: NodeId) -> None:
        notifier_key = self.key_of(msg.notifier)
        if msg.target != self.id or notifier_key is None or not self._verify(msg, notifier_key):
            return
        if self.store.about(msg.origin, self.now):
            return
        req = OriginCertRequest(msg.request_id, msg.origin, self.id, msg.notifier)
        self._answer(msg.notifier, self._sign(req))

    def _on_origin_cert_request(self, msg: OriginCertRequest, sender: NodeId) -> None:
        target_key = self.key_of(msg.target)
        if msg.notifier != self.id or target_key is None or not self._verify(msg, target_key):
            return
        origin_key = self._pending_origin_keys.pop((msg.origin, msg.request_id), None)
        if origin_key is None:
            return
        grant = OriginCertGrant(msg.request_id, self.id, msg.target, self._issue(msg.origin, origin_key))
        self._answer(msg.target, self._sign(grant))

    def _on_origin_cert_grant(self, msg: OriginCertGrant, sender: NodeId) -> None:
        key = self.key_of(msg.notifier)
        if key is None or not self._verify(msg, key):
            return
        if validate_certificate(msg.certificate, key, self.now, self.scheme):
            self.store.add(msg.certificate)

    # -- mutual certification and refresh --------------------------------------------

    def _on_first(self, msg: FirstPacket, sender: NodeId) -> None:
        if msg.target != self.id:
            return
        origin_key = self._self_cert_key(msg.origin_cert, msg.origin)
        if origin_key is None or not self._verify(msg, origin_key):
            return
        vouched = {c.subject_key for c in self.store.about(msg.origin, self.now) if c.issuer != msg.origin}
        if vouched and origin_key not in vouched:
            return
        if msg.grant.subject != self.id or msg.grant.subject_key != self.keys.public:
            return
        if not validate_certificate(msg.grant, origin_key, self.now, self.scheme):
            return
        self.add_mutual(msg.origin, msg.grant)
        self.peer_certifiers[msg.origin] = frozenset(msg.certifiers)
        mine = self.store.get(msg.origin, self.id, self.now)
        if mine is None or mine.subject_key != origin_key:
            mine = self._issue(msg.origin, origin_key)
            self.store.add(mine)
        reply = self._sign(ExchangeReply(self.id, msg.origin, mine, "first"))
        self._answer(msg.origin, reply)

    def _answer(self, dst: NodeId, reply) -> None:
        routes = self.dsr.cache.lookup(dst)
        if routes:
            self.net.send_routed(reply, min(routes, key=lambda r: (len(r), r.hops)))
        else:
            self.dsr.discover(dst, self.params.ttl_schedule[-1],
                              lambda rs: rs and self.net.send_routed(reply, min(rs, key=lambda r: (len(r), r.hops))))

    def _on_xreq(self, msg: ExchangeRequest, sender: NodeId) -> None:
        if msg.receiver != self.id:
            return
        key = self._peer_key(msg.sender, msg.sender_cert)
        if key is None or not self._verify(msg, key):
            return
        if msg.grant.subject != self.id or msg.grant.subject_key != self.keys.public:
            return
        if not validate_certificate(msg.grant, key, self.now, self.scheme):
            return
        self.add_mutual(msg.sender, msg.grant)
        mine = self._issue(msg.sender, key)
        self.store.add(mine)
        self._answer(msg.sender, self._sign(ExchangeReply(self.id, msg.sender, mine, msg.purpose)))

    def _on_xrep(self, msg: ExchangeReply, sender: NodeId) -> None:
        if msg.receiver != self.id:
            return
        key = self.key_of(msg.sender)
        if key is None or not self._verify(msg, key):
            return
        cert = msg.grant
        if cert.subject != self.id or cert.subject_key != self.keys.public:
            return
        if validate_certificate(cert, key, self.now, self.scheme):
            self.add_mutual(msg.sender, cert)

    def exchange_with(self, peer: NodeId, peer_key: PublicKey, purpose: str,
                      route: Optional[SourceRoute] = None) -> None:
        """Certify ``peer_key`` and ask ``peer`` to certify us back."""
        grant = self._issue(peer, peer_key)
        self.store.add(grant)
        msg = self._sign(ExchangeRequest(self.id, peer, self.self_cert, grant, purpose))
        if route is not None:
            self.net.send_routed(msg, route)
        else:
            self._answer(peer, msg)

    def start_refresh(self) -> None:
        if math.isfinite(self.params.refresh_period):
            self.net.schedule(self.params.refresh_period, revocation_refresh, self)


def handle_creq(node: Node, creq: CertRequest) -> None:
    """Decide how ``node`` reacts to the first copy of a CREQ.

    Bootstrap requests (origin == target) are answered with a fresh
    certificate for the newcomer.  Otherwise a node that has certified the
    target answers with that certificate, offering a certificate exchange
    when it does not know the requester, and tips off the target if it has a
    route there.  The target answers for itself while it has few
    certifiers.  Everyone else forwards while the hop limit lasts.
    """
    now = node.now
    origin_key = node._self_cert_key(creq.origin_cert, creq.origin)
    if creq.is_bootstrap:
        if origin_key is None or node._replied_recently(creq.origin, creq.target):
            node._forward_creq(creq)
            return
        mine = node.store.get(creq.origin, node.id, now)
        if mine is not None and mine.subject_key != origin_key:
            node._forward_creq(creq)
            return
        cert = mine or node._issue(creq.origin, origin_key)
        node.store.add(cert)
        node._reply_creq(creq, (cert,), True)
        return

    offer = not (node.knows(creq.origin) or node.id in creq.known_certifiers)
    if creq.target == node.id:
        if (not node._replied_recently(creq.origin, creq.target)
                and len(node.certifiers) < node.params.self_reply_below):
            node._reply_creq(creq, (node.self_cert,), offer)
        return

    cert = node.store.get(creq.target, node.id, now)
    if cert is None or node._replied_recently(creq.origin, creq.target):
        node._forward_creq(creq)
        return
    node._reply_creq(creq, (cert,), offer)
    if origin_key is not None:
        node._pending_origin_keys[(creq.origin, creq.request_id)] = origin_key
        node._notify_target(creq)


def handle_crep(node: Node, session: ExchangeSession, crep: CertReply) -> ExchangeSession:
    """Fold a verified CREP into ``session`` and decide if possible."""
    now = node.now
    key = node._peer_key(crep.replier, crep.replier_cert)
    if key is None or not node._verify(crep, key):
        on_spurious(node.table, crep.replier)
        return session
    certs = crep.certificates
    for cert in certs:
        if (cert.subject != session.target or cert.issuer != crep.replier
                or not validate_certificate(cert, key, now, node.scheme)):
            on_spurious(node.table, crep.replier)
            return session
    session.replied.add(crep.replier)

    if session.bootstrap:
        for cert in certs:
            if cert.subject_key == node.keys.public and not cert.self_signed:
                node.add_mutual(crep.replier, cert)
                mine = node._issue(crep.replier, key)
                node.store.add(mine)
                back = try_route(crep.paths_used[0].hops[::-1]) if crep.paths_used else None
                reply = node._sign(ExchangeReply(node.id, crep.replier, mine, "bootstrap"))
                if back is not None:
                    node.net.send_routed(reply, back)
            elif cert.subject_key != node.keys.public:
                on_spurious(node.table, crep.replier)
        if len(node.certifiers) >= session.required:
            session._close(SessionState.ACCEPTED, now)
        return session

    for cert in certs:
        cand = session.candidates.setdefault(cert.subject_key, KeyCandidate(cert.subject_key))
        cand.add(cert)
    if crep.exchange_offer and crep.replier != session.target and crep.paths_used:
        back = try_route(crep.paths_used[0].hops[::-1])
        if back is not None:
            session.volunteers.setdefault(crep.replier, (key, back))
    decision = decide_key(session.candidate_list(), node.table, session.mpktv)
    if decision is not None:
        node._accept(session, decision)
    return session


def mutual_certify(node: Node, session: ExchangeSession) -> None:
    """After acceptance: certify the target, tell it who vouched, and trade certificates."""
    if session.state is not SessionState.ACCEPTED or session.bootstrap:
        raise ProtocolError("mutual certification needs an accepted exchange session")
    target = session.target
    grant = node.store.get(target, node.id, node.now)
    if grant is None or grant.subject_key != session.accepted_key:
        grant = node._issue(target, session.accepted_key)
        node.store.add(grant)
    first = node._sign(FirstPacket(node.id, target, node.self_cert,
                                   tuple(sorted(session.decision.certifiers)), grant))

    def send(routes, retry=True):
        if not routes:
            return
        primary = min(routes, key=lambda r: (len(r), r.hops))
        others = [r for r in routes if r != primary]

        def failed():
            if retry:
                alternates = others or node.dsr.cache.lookup(target)
                if alternates:
                    send(alternates, retry=False)

        node.net.send_routed(first, primary, on_fail=failed)

    node._with_route(target, send)
    volunteers = sorted(session.volunteers.items())[: node.params.volunteer_cap]
    for peer, (key, back) in volunteers:
        if peer != target and not node.knows(peer):
            node.exchange_with(peer, key, "volunteer", route=back)


def revocation_refresh(node: Node) -> None:
    """Periodic re-signing with every certifier; anything not refreshed expires."""
    node._maintain()
    for peer in sorted(node.certifiers):
        key = node.key_of(peer)
        if key is not None:
            node.exchange_with(peer, key, "refresh")
    node.start_refresh()


_HANDLERS = {
    RouteRequest: "_on_rreq",
    RouteReply: "_on_rrep",
    CertRequest: "_on_creq",
    CertReply: "_on_crep",
    KeyNotice: "_on_notice",
    OriginCertRequest: "_on_origin_cert_request",
    OriginCertGrant: "_on_origin_cert_grant",
    FirstPacket: "_on_first",
    ExchangeRequest: "_on_xreq",
    ExchangeReply: "_on_xrep",
}
