import math
from dataclasses import replace

import pytest

from certmesh.identity import fabricate_key, validate_certificate
from certmesh.protocol import (
    CertReply,
    CertRequest,
    ExchangeSession,
    KeyNotice,
    OriginCertGrant,
    ProtocolError,
    ProtocolParams,
    SessionState,
    handle_crep,
    handle_creq,
    mutual_certify,
)
from certmesh.sim.scenario import ScenarioConfig, build_world, pre_certify, run_scenario
from certmesh.trust import MPKTV, combine_trust
from conftest import Bench, line


def sent(b):
    """Record every broadcast and routed message without changing delivery."""
    log = []
    broadcast, routed = b.net.broadcast, b.net.send_routed

    def bc(sender, msg):
        log.append(msg)
        broadcast(sender, msg)

    def sr(msg, route, on_fail=None):
        log.append(msg)
        routed(msg, route, on_fail)

    b.net.broadcast, b.net.send_routed = bc, sr
    return log


def crep_from(b, replier, origin, target, key, rid, offer=False):
    r = b[replier]
    cert = r._issue(target, key)
    return r._sign(CertReply(rid, origin, target, replier, r.self_cert, (cert,), offer, ()))


def fresh_session(b, origin, target, mpktv):
    s = ExchangeSession(origin, target, MPKTV(mpktv), (2, 4, 8), b.net.now)
    s.request_ids.append(1)
    return s


# -- starting and escalating ------------------------------------------------------------------

def test_first_creq_carries_ttl_two():
    b = Bench(line(3))
    log = sent(b)
    s = b[0].start_exchange(2, 0.9)
    assert s.mpktv.threshold == 0.9
    assert isinstance(log[0], CertRequest) and log[0].ttl == 2 and log[0].target == 2
    assert log[0].accumulated_path == (0,)


def test_cannot_request_own_key():
    b = Bench(line(2))
    with pytest.raises(ProtocolError):
        b[0].start_exchange(0, 0.5)


def test_isolated_requester_escalates_then_fails():
    b = Bench([(0.0, 0.0), (3000.0, 3000.0)])
    log = sent(b)
    s = b[0].start_exchange(1, 0.5)
    b.run(5.0)
    assert [m.ttl for m in log if isinstance(m, CertRequest)] == [2, 4, 8]
    assert len(set(s.request_ids)) == 3
    assert s.state is SessionState.FAILED
    expected = sum(b.params.attempt_timeout(t) for t in (2, 4, 8))
    assert s.decided_at == pytest.approx(expected)


def test_timer_is_noop_after_acceptance():
    b = Bench(line(3))
    s = b[0].start_exchange(2, 0.5)
    b.run(5.0)
    assert s.state is SessionState.ACCEPTED
    decided = s.decided_at
    b[0].escalate_or_fail(s, s.attempt)
    assert s.state is SessionState.ACCEPTED and s.decided_at == decided
    with pytest.raises(ProtocolError):
        s._close(SessionState.FAILED, 10.0)


def test_params_validation():
    with pytest.raises(ProtocolError):
        ProtocolParams(ttl_schedule=())
    with pytest.raises(ProtocolError):
        ProtocolParams(cert_lifetime=0.0)
    assert ProtocolParams().attempt_timeout(2) == pytest.approx(0.054)


# -- intermediate behaviour ------------------------------------------------------------------

def test_plain_intermediate_forwards_with_lower_ttl():
    b = Bench(line(4))
    log = sent(b)
    creq = CertRequest(0, b[0].self_cert, 3, (), 77, 3, (0,))
    handle_creq(b[1], creq)
    assert len(log) == 1 and log[0].ttl == 2 and log[0].accumulated_path == (0, 1)
    log.clear()
    handle_creq(b[1], replace(creq, ttl=1, request_id=78))
    assert log == []


def test_certificate_holder_replies_with_its_certificate():
    b = Bench(line(4))
    pre_certify(b[1], b[3])
    log = sent(b)
    creq = CertRequest(0, b[0].self_cert, 3, (), 5, 2, (0,))
    handle_creq(b[1], creq)
    reps = [m for m in log if isinstance(m, CertReply)]
    assert len(reps) == 1
    crep = reps[0]
    assert crep.replier == 1 and crep.exchange_offer
    assert crep.certificates[0].issuer == 1 and crep.certificates[0].subject_key == b[3].keys.public
    assert all(c.subject == 3 for c in crep.certificates)
    # it does not forward, and a second copy of the same request is not answered again
    assert not any(isinstance(m, CertRequest) for m in log)
    log.clear()
    handle_creq(b[1], replace(creq, request_id=6))
    assert not any(isinstance(m, CertReply) for m in log)


def test_no_offer_when_origin_already_known():
    b = Bench(line(4))
    pre_certify(b[1], b[3])
    pre_certify(b[1], b[0])
    log = sent(b)
    handle_creq(b[1], CertRequest(0, b[0].self_cert, 3, (1,), 5, 2, (0,)))
    assert [m.exchange_offer for m in log if isinstance(m, CertReply)] == [False]


def test_holder_with_route_notifies_target_who_gets_origin_vouched():
    b = Bench(line(4))
    pre_certify(b[1], b[3])
    log = sent(b)
    b[1].dsr.learn((1, 2, 3))
    b[0].start_exchange(3, 0.5)
    b.run(2.0)
    assert any(isinstance(m, KeyNotice) for m in log)
    assert any(isinstance(m, OriginCertGrant) for m in log)
    vouched = b[3].store.get(0, 1, b.net.now)
    assert vouched is not None and vouched.subject_key == b[0].keys.public


def test_target_answers_for_itself():
    b = Bench(line(3))
    s = b[0].start_exchange(2, 0.5)
    b.run(2.0)
    assert s.state is SessionState.ACCEPTED
    assert s.accepted_key == b[2].keys.public
    assert s.decision.certifiers == {2}


def test_well_known_target_stays_silent():
    b = Bench(line(6))
    for p in (3, 4, 5):
        pre_certify(b[1], b[p])
    log = sent(b)
    handle_creq(b[1], CertRequest(0, b[0].self_cert, 1, (), 5, 2, (0,)))
    assert log == []


# -- reply handling ------------------------------------------------------------------------------

def test_unknown_single_reply_accepted_at_half():
    b = Bench(line(6))
    s = fresh_session(b, 0, 5, 0.5)
    handle_crep(b[0], s, crep_from(b, 3, 0, 5, b[5].keys.public, 1))
    assert s.state is SessionState.ACCEPTED and s.accepted_key == b[5].keys.public


def test_two_known_certifiers_reach_point_nine():
    b = Bench(line(6))
    pre_certify(b[0], b[1])
    pre_certify(b[0], b[2])
    s = fresh_session(b, 0, 5, 0.9)
    handle_crep(b[0], s, crep_from(b, 1, 0, 5, b[5].keys.public, 1))
    assert s.state is SessionState.PENDING
    handle_crep(b[0], s, crep_from(b, 2, 0, 5, b[5].keys.public, 1))
    assert s.state is SessionState.ACCEPTED
    assert s.decision.combined_trust == pytest.approx(0.9375)
    for issuer, cert in s.candidates[s.accepted_key].certifiers.items():
        assert validate_certificate(cert, b[issuer].keys.public, b.net.now, b.scheme)


def test_tied_conflict_stays_pending():
    b = Bench(line(6))
    s = fresh_session(b, 0, 5, 0.7)
    handle_crep(b[0], s, crep_from(b, 3, 0, 5, b[5].keys.public, 1))
    handle_crep(b[0], s, crep_from(b, 4, 0, 5, fabricate_key("x"), 1))
    assert s.state is SessionState.PENDING


def test_bad_signature_discarded_and_penalised():
    b = Bench(line(6))
    s = fresh_session(b, 0, 5, 0.5)
    good = crep_from(b, 3, 0, 5, b[5].keys.public, 1)
    forged = replace(good, certificates=(b[4]._issue(5, fabricate_key("y")),))
    handle_crep(b[0], s, forged)
    assert s.state is SessionState.PENDING and not s.candidates
    assert b[0].table.entries[3] == pytest.approx(0.25)


def test_repeat_replier_does_not_inflate_trust():
    b = Bench(line(6))
    s = fresh_session(b, 0, 5, 0.7)
    for _ in range(3):
        handle_crep(b[0], s, crep_from(b, 3, 0, 5, b[5].keys.public, 1))
    assert s.state is SessionState.PENDING
    assert s.candidates[b[5].keys.public].combined_trust(b[0].table) == 0.5


# -- mutual certification ---------------------------------------------------------------------

def test_mutual_certification_after_acceptance():
    b = Bench(line(3))
    s = b[0].start_exchange(2, 0.5)
    b.run(2.0)
    now = b.net.now
    assert b[0].store.get(2, 0, now).subject_key == b[2].keys.public
    assert b[2].store.get(0, 2, now).subject_key == b[0].keys.public
    assert 2 in b[0].certifiers and 0 in b[2].certifiers
    assert b[2].peer_certifiers[0] == s.decision.certifiers
    before = (len(b[0].store), len(b[2].store))
    mutual_certify(b[0], s)
    b.run(4.0)
    assert (len(b[0].store), len(b[2].store)) == before


def test_mutual_certify_requires_acceptance():
    b = Bench(line(3))
    with pytest.raises(ProtocolError):
        mutual_certify(b[0], fresh_session(b, 0, 2, 0.5))


def test_volunteer_gets_certified():
    b = Bench(line(4))
    pre_certify(b[1], b[3])
    s = b[0].start_exchange(3, 0.5)
    b.run(2.0)
    assert s.state is SessionState.ACCEPTED
    assert 1 in s.volunteers
    assert b[0].knows(1) and b[1].knows(0)


# -- bootstrap --------------------------------------------------------------------------------------

def test_bootstrap_nothing_required():
    b = Bench(line(2))
    s = b[0].bootstrap(0)
    assert s.state is SessionState.ACCEPTED and not b[0].certifiers


def test_bootstrap_isolated_fails():
    b = Bench([(0.0, 0.0), (3000.0, 0.0)])
    s = b[0].bootstrap(3)
    b.run(5.0)
    assert s.state is SessionState.FAILED and not b[0].certifiers


def test_bootstrap_in_connected_network():
    w = build_world(ScenarioConfig(sessions=0), seed=42)
    s = w.nodes[0].bootstrap(5)
    w.sim.run(5.0)
    assert s.state is SessionState.ACCEPTED
    assert len(w.nodes[0].certifiers) >= 5
    for p in w.nodes[0].certifiers:
        assert w.nodes[p].knows(0)
        assert w.nodes[0].knows(p)


# -- refresh ----------------------------------------------------------------------------------------

def test_refresh_keeps_certificates_alive():
    b = Bench(line(2), params=ProtocolParams(cert_lifetime=60.0, refresh_period=30.0))
    pre_certify(b[0], b[1])
    b[0].start_refresh()
    b[1].start_refresh()
    b.run(120.0)
    b[0]._maintain()
    b[1]._maintain()
    assert b[0].certifiers == {1} and b[1].certifiers == {0}
    assert b[0].store.get(0, 1, 120.0) is not None


def test_partitioned_peer_expires():
    b = Bench(line(2), params=ProtocolParams(cert_lifetime=60.0, refresh_period=30.0))
    pre_certify(b[0], b[1])
    b.mobility.set_leg(1, (300.0, 100.0), (300.0, 4000.0), 1e6, 1.0)
    b[0].start_refresh()
    b.run(90.0)
    assert b[0].certifiers == set()
    assert b[0].store.about(1, 90.0) == []


def test_refresh_disabled_matches_baseline():
    cfg = ScenarioConfig(nodes=40, area=(900.0, 900.0), duration=40.0)
    assert math.isinf(cfg.refresh_period)
    assert run_scenario(cfg, seed=2) == run_scenario(cfg.replace(refresh_period=math.inf), seed=2)


# -- whole-run properties ------------------------------------------------------------------------------

def test_no_secret_ever_on_the_wire():
    w = build_world(ScenarioConfig(attacker_fraction=0.2, known_certs=5), seed=3)
    w.net.capture = []
    w.run()
    assert len(w.net.capture) > 100
    blob = b"\x00".join(w.net.capture)
    for node in w.nodes.values():
        assert node.keys.secret not in blob


def test_honest_network_never_accepts_corrupted_keys():
    cfg = ScenarioConfig()
    for seed in range(1, 51):
        w = build_world(cfg, seed=seed, strict=True)
        rep = w.run()
        assert rep.accepted_corrupted == 0
        for rec in w.collector.records:
            s = rec.session
            assert s.state is not SessionState.PENDING or s.decided_at is None
            if s.state is SessionState.ACCEPTED:
                assert s.decided_at >= s.started_at
                assert combine_trust(s.certifier_trust[n] for n in sorted(s.certifier_trust)) >= (
                    s.mpktv.threshold - 1e-12)
