"""Scenario construction and execution."""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, TextIO

import numpy as np

from certmesh.identity import generate_keypair, issue_certificate
from certmesh.identity.keys import OracleScheme
from certmesh.identity.registry import GroundTruthRegistry, KeyClass
from certmesh.metrics import MetricsReport
from certmesh.protocol import Node, ProtocolParams, SessionState
from certmesh.sim.adversary import AdversaryModel, AttackerNode, AttackMode
from certmesh.sim.engine import Simulator
from certmesh.sim.mobility import MobilityState
from certmesh.sim.network import Network
from certmesh.sim.radio import RadioModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int = 100
    area: tuple = (1500.0, 1500.0)
    duration: float = 120.0
    vmax: float = 10.0
    pause: float = 30.0
    sessions: int = 5
    attacker_fraction: float = 0.0
    attacker_mode: str = "isolated"
    known_certs: int = 0
    mpktv: float = 0.5
    ttl_schedule: tuple = (2, 4, 8)
    radio_range: float = 250.0
    hop_delay: float = 0.001
    k_paths: int = 3
    cert_lifetime: float = 120.0
    refresh_period: float = math.inf
    seed: int = 1
    replications: int = 10
    exponential_pause: bool = False
    drop_certificates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "area", tuple(float(a) for a in self.area))
        object.__setattr__(self, "ttl_schedule", tuple(int(t) for t in self.ttl_schedule))
        self.validate()

    def validate(self) -> None:
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)

        need(self.nodes >= 2, f"nodes must be at least 2, got {self.nodes}")
        need(len(self.area) == 2 and all(a > 0 for a in self.area), f"bad area {self.area}")
        need(self.duration > 0, "duration must be positive")
        need(self.vmax > 0, "vmax must be positive")
        need(self.pause >= 0, "pause must be non-negative")
        need(self.sessions >= 0, "sessions must be non-negative")
        need(0.0 <= self.attacker_fraction <= 1.0, f"attacker_fraction {self.attacker_fraction} not in [0, 1]")
        need(self.attacker_mode in ("isolated", "colluding"), f"unknown attacker_mode {self.attacker_mode!r}")
        need(self.known_certs >= 0, "known_certs must be non-negative")
        need(0.0 <= self.mpktv <= 1.0, f"mpktv {self.mpktv} not in [0, 1]")
        need(len(self.ttl_schedule) > 0 and all(t >= 1 for t in self.ttl_schedule),
             f"bad ttl_schedule {self.ttl_schedule}")
        need(self.radio_range > 0, "radio_range must be positive")
        need(self.hop_delay >= 0, "hop_delay must be non-negative")
        need(self.k_paths >= 1, "k_paths must be at least 1")
        need(self.cert_lifetime > 0, "cert_lifetime must be positive")
        need(self.refresh_period > 0, "refresh_period must be positive")
        need(self.replications >= 1, "replications must be at least 1")

    @property
    def attacker_count(self) -> int:
        return int(math.floor(self.attacker_fraction * self.nodes + 1e-9))

    def replace(self, **changes) -> "ScenarioConfig":
        data = asdict(self)
        data.update(changes)
        return ScenarioConfig(**data)

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(ttl_schedule=self.ttl_schedule, k_paths=self.k_paths,
                              cert_lifetime=self.cert_lifetime, hop_delay=self.hop_delay,
                              refresh_period=self.refresh_period)


CONFIG_FIELDS = tuple(f.name for f in fields(ScenarioConfig))


@dataclass
class SessionRecord:
    origin: int
    target: int
    session: object
    outcome: Optional[KeyClass] = None


class MetricsCollector:
    """Classifies finished sessions against the ground truth; the protocol never sees it."""

    def __init__(self, registry: GroundTruthRegistry, attackers: frozenset, strict: bool = False):
        self.registry = registry
        self.attackers = attackers
        self.strict = strict
        self.records: list[SessionRecord] = []
        self.violations: list[str] = []

    def session_started(self, node, session) -> None:
        self.records.append(SessionRecord(node.id, session.target, session))

    def session_decided(self, node, session) -> None:
        if session.state is not SessionState.ACCEPTED:
            return
        verdict = self.registry.classify_key(session.target, session.accepted_key)
        if verdict is KeyClass.CORRUPTED:
            self._check_safety(node, session)

    def _check_safety(self, node, session) -> None:
        """A forged key may only win if its backers really cleared the threshold."""
        trusts = session.certifier_trust
        honest = [n for n in trusts if n not in self.attackers]
        disbelief = 1.0
        for n in sorted(trusts):
            disbelief *= 1.0 - trusts[n]
        combined = 1.0 - disbelief
        if not honest and combined < session.mpktv.threshold - 1e-12:
            msg = (f"node {node.id} accepted forged key for {session.target} at combined trust "
                   f"{combined:.6f} < {session.mpktv.threshold}")
            self.violations.append(msg)
            if self.strict:
                raise AssertionError(msg)

    def report(self, net: Network) -> MetricsReport:
        rep = MetricsReport(messages_sent=net.messages_sent, bytes_sent=net.bytes_sent,
                            safety_violations=len(self.violations))
        for rec in self.records:
            s = rec.session
            rep.requested += 1
            if s.state is SessionState.ACCEPTED:
                rec.outcome = self.registry.classify_key(s.target, s.accepted_key)
                if rec.outcome is KeyClass.VALID:
                    rep.accepted_valid += 1
                else:
                    rep.accepted_corrupted += 1
                rep.delays.append(s.decided_at - s.started_at)
            else:
                rep.failed += 1
        rep.check()
        return rep


@dataclass
class World:
    """Everything a built scenario consists of, before or after running."""

    config: ScenarioConfig
    seed: int
    sim: Simulator
    net: Network
    nodes: dict
    registry: GroundTruthRegistry
    adversary: AdversaryModel
    sessions: list = field(default_factory=list)
    collector: Optional[MetricsCollector] = None

    @property
    def honest(self) -> list[int]:
        return [n for n in sorted(self.nodes) if n not in self.adversary.members]

    def run(self) -> MetricsReport:
        self.sim.run(self.config.duration)
        return self.collector.report(self.net)


def _rng(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def assign_roles(config: ScenarioConfig, seed: int):
    """Pick session pairs and attackers from one seeded permutation.

    Endpoints come first and attackers are taken from the rest in a fixed
    order, so for a given seed a larger attacker fraction only adds attackers
    and never changes the sessions.
    """
    n = config.nodes
    order = [int(v) for v in _rng(seed, 1).permutation(n)]
    pairs = []
    if 2 * config.sessions <= n:
        pairs = [(order[2 * i], order[2 * i + 1]) for i in range(config.sessions)]
        rest = order[2 * config.sessions:]
    else:
        extra = _rng(seed, 2)
        for _ in range(config.sessions):
            s, d = (int(v) for v in extra.choice(n, size=2, replace=False))
            pairs.append((s, d))
        used = {v for p in pairs for v in p}
        rest = [v for v in order if v not in used]
    attackers = frozenset(rest[: min(config.attacker_count, len(rest))])
    return pairs, attackers


def build_world(config: ScenarioConfig, seed: Optional[int] = None, trace: Optional[TextIO] = None,
                strict: bool = False) -> World:
    seed = config.seed if seed is None else seed
    pairs, attackers = assign_roles(config, seed)
    scheme = OracleScheme()
    sim = Simulator(trace=trace)
    mobility = MobilityState.random(config.nodes, config.area, config.vmax, config.pause, seed,
                                    config.exponential_pause)
    net = Network(sim, mobility, RadioModel(config.radio_range, config.hop_delay))
    params = config.protocol_params()
    adversary = AdversaryModel(AttackMode(config.attacker_mode), attackers, seed, config.drop_certificates)
    registry = GroundTruthRegistry()
    nodes = {}
    for i in range(config.nodes):
        keys = generate_keypair(i, random.Random(f"certmesh-key/{seed}/{i}"), scheme)
        if i in attackers:
            nodes[i] = AttackerNode(i, keys, net, adversary, params=params, scheme=scheme)
        else:
            nodes[i] = Node(i, keys, net, params=params, scheme=scheme)
            registry.bind(i, keys.public)
    net.nodes = nodes
    collector = MetricsCollector(registry, attackers, strict)
    net.observer = collector
    world = World(config, seed, sim, net, nodes, registry, adversary, pairs, collector)
    _seed_initial_certificates(world)
    starts = _rng(seed, 4).uniform(0.0, config.duration / 2, size=len(pairs))
    for (s, d), t in zip(pairs, starts):
        sim.schedule_at(float(t), nodes[s].start_exchange, d, config.mpktv)
    if math.isfinite(config.refresh_period):
        for i in world.honest:
            nodes[i].start_refresh()
    return world


def _seed_initial_certificates(world: World) -> None:
    """Mutual certificates between each session endpoint and ``known_certs`` honest peers."""
    config = world.config
    if config.known_certs == 0:
        return
    endpoints = sorted({v for p in world.sessions for v in p})
    pool = [n for n in world.honest if n not in endpoints]
    for e in endpoints:
        k = min(config.known_certs, len(pool))
        peers = sorted(int(p) for p in _rng(world.seed, 3, e).choice(pool, size=k, replace=False))
        for p in peers:
            pre_certify(world.nodes[e], world.nodes[p], now=0.0)


def pre_certify(a: Node, b: Node, now: float = 0.0) -> None:
    """Out-of-band mutual certification, as if both had met during initialisation."""
    life = a.params.cert_lifetime
    a_for_b = issue_certificate(a.keys, a.id, b.id, b.keys.public, now, life, a.scheme)
    b_for_a = issue_certificate(b.keys, b.id, a.id, a.keys.public, now, life, b.scheme)
    a.store.add(a_for_b)
    b.store.add(b_for_a)
    a.add_mutual(b.id, b_for_a)
    b.add_mutual(a.id, a_for_b)


def run_scenario(config: ScenarioConfig, seed: Optional[int] = None, trace: Optional[TextIO] = None,
                 strict: bool = False) -> MetricsReport:
    """Build and run one scenario; equal (config, seed) always give equal reports."""
    return build_world(config, seed, trace, strict).run()
