"""Message transport over the mobile topology: broadcast and source routing."""

from __future__ import annotations

import itertools
from typing import Callable, Optional

import numpy as np

from certmesh.routing import SourceRoute
from certmesh.sim.engine import Simulator
from certmesh.sim.mobility import MobilityState
from certmesh.sim.radio import RadioModel, neighbors


class Network:
    """Idealised MAC: every in-range neighbour receives, nothing collides.

    Packets are only lost when a source route uses a link that has broken by
    the time the packet reaches it.
    """

    def __init__(self, sim: Simulator, mobility: MobilityState, radio: RadioModel = RadioModel()):
        self.sim = sim
        self.mobility = mobility
        self.radio = radio
        self.nodes: dict = {}
        self.messages_sent = 0
        self.bytes_sent = 0
        self.by_kind: dict[str, int] = {}
        self.capture: Optional[list] = None
        self.observer = None
        self._rid = itertools.count(1)
        self._pos_time = None
        self._pos = None

    # -- plumbing ---------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.sim.now

    def schedule(self, delay: float, fn: Callable, *args) -> None:
        self.sim.schedule(delay, fn, *args)

    def next_request_id(self) -> int:
        return next(self._rid)

    def positions(self) -> np.ndarray:
        now = self.sim.now
        if self._pos_time != now:
            self._pos = self.mobility.positions(now)
            self._pos_time = now
        return self._pos

    def neighbors(self, node: int) -> list[int]:
        return neighbors(self.positions(), node, self.radio.range)

    def linked(self, u: int, v: int) -> bool:
        p = self.positions()
        d = p[u] - p[v]
        return u != v and float(d @ d) <= self.radio.range * self.radio.range

    def _account(self, msg, src, dst) -> None:
        raw = msg.to_bytes()
        self.messages_sent += 1
        self.bytes_sent += len(raw)
        self.by_kind[msg.kind] = self.by_kind.get(msg.kind, 0) + 1
        if self.capture is not None:
            self.capture.append(raw)
        self.sim.log(msg.kind, src, dst, getattr(msg, "request_id", None))

    # -- transmission -----------------------------------------------------------

    def broadcast(self, sender: int, msg) -> None:
        self._account(msg, sender, "*")
        nbrs = self.neighbors(sender)
        if nbrs:
            self.sim.schedule(self.radio.hop_delay, self._deliver_all, msg, sender, nbrs)

    def _deliver_all(self, msg, sender: int, nbrs: list[int]) -> None:
        for n in nbrs:
            self.nodes[n].receive(msg, sender)

    def send_routed(self, msg, route: SourceRoute, on_fail: Optional[Callable] = None) -> None:
        if route.source not in self.nodes:
            raise KeyError(f"unknown node {route.source}")
        self._hop(msg, route, 0, on_fail)

    def _hop(self, msg, route: SourceRoute, i: int, on_fail) -> None:
        u, v = route.hops[i], route.hops[i + 1]
        if not self.linked(u, v):
            self.sim.log("DROP", u, v, getattr(msg, "request_id", None))
            self.nodes[route.source].on_route_error(route, u, v)
            if i > 0:
                self.nodes[u].on_route_error(SourceRoute(route.hops[i:]), u, v)
            if on_fail is not None:
                on_fail()
            return
        self._account(msg, u, v)
        self.sim.schedule(self.radio.hop_delay, self._arrive, msg, route, i + 1, on_fail)

    def _arrive(self, msg, route: SourceRoute, i: int, on_fail) -> None:
        node = self.nodes[route.hops[i]]
        if i == len(route.hops) - 1:
            node.receive(msg, route.hops[i - 1])
            return
        if node.relay(msg, route, i):
            self._hop(msg, route, i, on_fail)

    # -- observer hooks ------------------------------------------------------------

    def session_started(self, node, session) -> None:
        if self.observer is not None:
            self.observer.session_started(node, session)

    def session_decided(self, node, session) -> None:
        if self.observer is not None:
            self.observer.session_decided(node, session)
