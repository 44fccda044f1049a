"""DSR-lite source routing.

Route discovery floods a request that accumulates its path; the target (or a
node with a cached route to it) answers with the full route, which is then
source-routed back.  No promiscuous listening, no salvaging.

Everything here talks to the network through a small transport object that
provides ``now``, ``broadcast(sender, msg)``, ``send_routed(msg, route,
on_fail)``, ``schedule(delay, fn, *args)`` and ``next_request_id()``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from certmesh import wire
from certmesh.identity import NodeId

DEFAULT_CACHE_CAPACITY = 8
MAX_TARGET_REPLIES = 8


class RouteError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class SourceRoute:
    hops: tuple

    def __post_init__(self):
        hops = tuple(self.hops)
        object.__setattr__(self, "hops", hops)
        if len(hops) < 2:
            raise RouteError(f"a route needs at least two hops, got {hops}")
        if len(set(hops)) != len(hops):
            raise RouteError(f"route contains a cycle: {hops}")

    @classmethod
    def _unchecked(cls, hops: tuple) -> "SourceRoute":
        # for slices of an already validated route
        route = object.__new__(cls)
        object.__setattr__(route, "hops", hops)
        return route

    @property
    def source(self) -> NodeId:
        return self.hops[0]

    @property
    def destination(self) -> NodeId:
        return self.hops[-1]

    @property
    def intermediates(self) -> tuple:
        return self.hops[1:-1]

    def __len__(self) -> int:
        return len(self.hops) - 1

    def reversed(self) -> "SourceRoute":
        return SourceRoute._unchecked(self.hops[::-1])

    def to_bytes(self) -> bytes:
        return wire.encode(self.hops)


def try_route(hops: Iterable[NodeId]) -> Optional[SourceRoute]:
    hops = tuple(hops)
    if len(hops) < 2 or len(set(hops)) != len(hops):
        return None
    return SourceRoute(hops)


class RouteCache:
    """Source routes known to ``owner``, at most ``capacity`` per destination.

    Inserting past capacity evicts the oldest route for that destination.
    """

    def __init__(self, owner: NodeId, capacity: int = DEFAULT_CACHE_CAPACITY):
        if capacity < 1:
            raise ValueError("cache capacity must be at least 1")
        self.owner = owner
        self.capacity = capacity
        self.routes: dict[NodeId, dict[tuple, SourceRoute]] = {}

    def insert(self, route: SourceRoute, prefixes: bool = True) -> None:
        if route.source != self.owner:
            raise RouteError(f"route {route.hops} does not start at {self.owner}")
        self._put(route.hops, route)
        if prefixes:
            hops = route.hops
            for end in range(2, len(hops)):
                self._put(hops[:end], None)

    def _put(self, hops: tuple, route: Optional[SourceRoute]) -> None:
        bucket = self.routes.get(hops[-1])
        if bucket is None:
            bucket = self.routes[hops[-1]] = {}
        elif hops in bucket:
            return
        bucket[hops] = route or SourceRoute._unchecked(hops)
        if len(bucket) > self.capacity:
            del bucket[next(iter(bucket))]

    def lookup(self, dst: NodeId) -> list[SourceRoute]:
        return list(self.routes.get(dst, {}).values())

    def remove(self, route: SourceRoute) -> None:
        bucket = self.routes.get(route.destination)
        if bucket:
            bucket.pop(route.hops, None)

    def remove_link(self, u: NodeId, v: NodeId) -> int:
        """Drop every cached route that uses the link u-v (either direction)."""
        dropped = 0
        for bucket in self.routes.values():
            for hops in [h for h, r in bucket.items() if _uses_link(r, u, v)]:
                del bucket[hops]
                dropped += 1
        return dropped

    def __len__(self) -> int:
        return sum(len(b) for b in self.routes.values())


def _uses_link(route: SourceRoute, u: NodeId, v: NodeId) -> bool:
    return any({a, b} == {u, v} for a, b in zip(route.hops, route.hops[1:]))


def cache_lookup(cache: RouteCache, dst: NodeId) -> list[SourceRoute]:
    return cache.lookup(dst)


def select_disjoint_paths(routes: Iterable[SourceRoute], k: Optional[int]) -> list[SourceRoute]:
    """Greedy shortest-first choice of routes with pairwise disjoint intermediates.

    Not guaranteed to find the maximum disjoint set; it is what a node can do
    with nothing but its route cache.  ``k=None`` means no limit.
    """
    if k is not None and k < 1:
        raise ValueError("k must be at least 1")
    chosen: list[SourceRoute] = []
    used: set = set()
    endpoints = None
    for r in sorted(set(routes), key=lambda r: (len(r), r.hops)):
        if endpoints is None:
            endpoints = (r.source, r.destination)
        elif (r.source, r.destination) != endpoints:
            raise RouteError("routes do not share endpoints")
        mids = set(r.intermediates)
        if mids & used:
            continue
        # a direct link shares nothing, but only one copy over it makes sense
        if not mids and any(not c.intermediates for c in chosen):
            continue
        chosen.append(r)
        used |= mids
        if k is not None and len(chosen) >= k:
            break
    return chosen


@dataclass(frozen=True)
class RouteRequest:
    origin: NodeId
    target: NodeId
    request_id: int
    accumulated_hops: tuple
    ttl: int

    kind = "RREQ"

    def to_bytes(self) -> bytes:
        return wire.encode(self.kind, self.origin, self.target, self.request_id, self.accumulated_hops,
                           self.ttl)


@dataclass(frozen=True)
class RouteReply:
    origin: NodeId
    target: NodeId
    request_id: int
    route: SourceRoute

    kind = "RREP"

    def to_bytes(self) -> bytes:
        return wire.encode(self.kind, self.origin, self.target, self.request_id, self.route)


@dataclass
class _Discovery:
    target: NodeId
    request_id: int
    callbacks: list = field(default_factory=list)
    done: bool = False


class DsrAgent:
    """Route discovery and cache maintenance for one node."""

    def __init__(self, node_id: NodeId, net, capacity: int = DEFAULT_CACHE_CAPACITY,
                 hop_delay: float = 0.001, timeout_margin: float = 0.05):
        self.node_id = node_id
        self.net = net
        self.cache = RouteCache(node_id, capacity)
        self.hop_delay = hop_delay
        self.timeout_margin = timeout_margin
        self._seen: set = set()
        self._target_replies: dict = {}
        self._pending: dict[NodeId, _Discovery] = {}

    # -- learning -----------------------------------------------------------

    def learn(self, hops: Iterable[NodeId], prefixes: bool = True) -> None:
        """Cache a route starting at this node, if it is well formed."""
        route = try_route(hops)
        if route is not None and route.source == self.node_id:
            self.cache.insert(route, prefixes)

    def learn_path(self, hops: tuple) -> None:
        """Cache both directions of a path this node lies on."""
        if self.node_id not in hops:
            return
        i = hops.index(self.node_id)
        self.learn(hops[i:])
        self.learn(hops[: i + 1][::-1])

    # -- discovery ------------------------------------------------------------

    def discover(self, dst: NodeId, ttl: int, callback: Callable[[list], None]) -> None:
        """Find routes to ``dst``; ``callback`` gets the (possibly empty) route list."""
        if dst == self.node_id:
            raise RouteError("cannot discover a route to self")
        cached = self.cache.lookup(dst)
        if cached:
            self.net.schedule(0.0, callback, cached)
            return
        pending = self._pending.get(dst)
        if pending is not None and not pending.done:
            pending.callbacks.append(callback)
            return
        rid = self.net.next_request_id()
        disc = _Discovery(dst, rid, [callback])
        self._pending[dst] = disc
        self._seen.add((self.node_id, rid))
        self.net.broadcast(self.node_id, RouteRequest(self.node_id, dst, rid, (self.node_id,), ttl))
        self.net.schedule(2 * ttl * self.hop_delay + self.timeout_margin, self._finish, disc)

    def _finish(self, disc: _Discovery) -> None:
        if disc.done:
            return
        disc.done = True
        if self._pending.get(disc.target) is disc:
            del self._pending[disc.target]
        routes = self.cache.lookup(disc.target)
        for cb in disc.callbacks:
            cb(routes)

    def on_rreq(self, rreq: RouteRequest, sender: NodeId) -> None:
        me = self.node_id
        if me in rreq.accumulated_hops:
            return
        path = rreq.accumulated_hops + (me,)
        self.learn(path[::-1], prefixes=False)
        if me == rreq.target:
            n = self._target_replies.get((rreq.origin, rreq.request_id), 0)
            if n < MAX_TARGET_REPLIES:
                self._target_replies[(rreq.origin, rreq.request_id)] = n + 1
                self._reply(rreq, SourceRoute(path))
            return
        key = (rreq.origin, rreq.request_id)
        if key in self._seen:
            return
        self._seen.add(key)
        for cached in self.cache.lookup(rreq.target):
            full = try_route(path + cached.hops[1:])
            if full is not None:
                self._reply(rreq, full)
                return
        if rreq.ttl > 1:
            self.net.broadcast(me, RouteRequest(rreq.origin, rreq.target, rreq.request_id,
                                                path, rreq.ttl - 1))

    def _reply(self, rreq: RouteRequest, full: SourceRoute) -> None:
        me = self.node_id
        i = full.hops.index(me)
        back = SourceRoute(full.hops[: i + 1][::-1])
        self.net.send_routed(RouteReply(rreq.origin, rreq.target, rreq.request_id, full), back,
                             on_fail=None)

    def on_rrep(self, rrep: RouteReply) -> None:
        self.learn_path(rrep.route.hops)
        if self.node_id != rrep.origin:
            return
        disc = self._pending.get(rrep.target)
        if disc is not None and disc.request_id == rrep.request_id:
            self._finish(disc)

    def on_route_error(self, route: SourceRoute, u: NodeId, v: NodeId) -> None:
        self.cache.remove(route)
        self.cache.remove_link(u, v)


def forward_source_routed(net, packet, route: SourceRoute, on_fail=None) -> None:
    """Hand ``packet`` hop by hop along ``route``; see the network for timing."""
    net.send_routed(packet, route, on_fail=on_fail)


def discover_routes(agent: DsrAgent, dst: NodeId, ttl: int, callback: Callable[[list], None]) -> None:
    agent.discover(dst, ttl, callback)
