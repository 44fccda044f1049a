import itertools
import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from certmesh.routing import (
    RouteCache,
    RouteError,
    RouteReply,
    SourceRoute,
    cache_lookup,
    discover_routes,
    forward_source_routed,
    select_disjoint_paths,
    try_route,
)
from conftest import line

R = SourceRoute
S, A, B, D = 0, 1, 2, 3


def test_route_invariants():
    assert len(R((1, 2, 3))) == 2
    assert R((1, 2, 3)).intermediates == (2,)
    assert R((1, 2, 3)).reversed().hops == (3, 2, 1)
    with pytest.raises(RouteError):
        R((1,))
    with pytest.raises(RouteError):
        R((1, 2, 1))
    assert try_route((1, 2, 1)) is None
    assert try_route((4, 5)) == R((4, 5))


def test_cache_rejects_foreign_routes():
    c = RouteCache(0)
    with pytest.raises(RouteError):
        c.insert(R((1, 2)))


def test_cache_lookup_and_prefixes():
    c = RouteCache(0)
    assert cache_lookup(c, 5) == []
    c.insert(R((0, 1, 2, 5)))
    assert cache_lookup(c, 5) == [R((0, 1, 2, 5))]
    assert cache_lookup(c, 2) == [R((0, 1, 2))]
    c.insert(R((0, 1, 2, 5)))
    assert len(cache_lookup(c, 5)) == 1


def test_cache_evicts_oldest():
    c = RouteCache(0, capacity=8)
    routes = [R((0, 10 + i, 99)) for i in range(12)]
    for r in routes:
        c.insert(r)
    got = cache_lookup(c, 99)
    assert len(got) == 8
    assert set(got) == set(routes[4:])


def test_remove_link_either_direction():
    c = RouteCache(0)
    c.insert(R((0, 1, 2, 3)))
    c.insert(R((0, 4, 3)))
    c.remove_link(2, 1)
    assert cache_lookup(c, 3) == [R((0, 4, 3))]
    assert cache_lookup(c, 1) == [R((0, 1))]


def test_disjoint_fixture():
    routes = {R((S, A, D)), R((S, B, D)), R((S, A, B, D))}
    assert select_disjoint_paths(routes, 2) == [R((S, A, D)), R((S, B, D))]


def test_disjoint_single_and_shared():
    assert select_disjoint_paths([R((S, A, D))], 3) == [R((S, A, D))]
    shared = [R((S, A, D)), R((S, A, B, D)), R((S, 5, A, D))]
    assert select_disjoint_paths(shared, 3) == [R((S, A, D))]
    assert select_disjoint_paths([], 3) == []


def test_disjoint_rejects_mixed_endpoints():
    with pytest.raises(RouteError):
        select_disjoint_paths([R((0, 1, 2)), R((0, 1, 3))], 2)
    with pytest.raises(ValueError):
        select_disjoint_paths([R((0, 1))], 0)


# -- oracle ------------------------------------------------------------------------------

def max_vertex_disjoint(g, s, t):
    """Unit vertex capacities via node splitting, solved as a max-flow problem."""
    flow = nx.DiGraph()
    for v in g.nodes:
        flow.add_edge((v, "in"), (v, "out"), capacity=len(g) if v in (s, t) else 1)
    for u, v in g.edges:
        flow.add_edge((u, "out"), (v, "in"), capacity=1)
        flow.add_edge((v, "out"), (u, "in"), capacity=1)
    return nx.maximum_flow_value(flow, (s, "out"), (t, "in"))


def random_graphs(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(2, 10)
        g = nx.gnp_random_graph(n, rng.uniform(0.2, 0.8), seed=rng.randrange(1 << 30))
        s, t = rng.sample(range(n), 2)
        out.append((g, s, t))
    return out


def check_disjoint(paths):
    for p, q in itertools.combinations(paths, 2):
        assert not set(p.intermediates) & set(q.intermediates)


def test_disjoint_against_flow_oracle():
    for g, s, t in random_graphs(200, seed=7):
        routes = [R(tuple(p)) for p in nx.all_simple_paths(g, s, t)]
        chosen = select_disjoint_paths(routes, None)
        check_disjoint(chosen)
        bound = max_vertex_disjoint(g, s, t)
        assert len(chosen) <= bound
        if nx.has_path(g, s, t):
            assert len(chosen) >= 1
        else:
            assert chosen == []


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.integers(2, 12), max_size=5, unique=True), max_size=10), st.integers(1, 5))
def test_disjoint_property(middles, k):
    routes = [R((0, *m, 1)) for m in middles]
    chosen = select_disjoint_paths(routes, k)
    assert len(chosen) <= k
    check_disjoint(chosen)
    assert sum(1 for r in chosen if not r.intermediates) <= 1
    if routes:
        assert chosen


# -- discovery and forwarding over the simulator ---------------------------------------------

def test_discover_on_a_line(bench):
    b = bench(line(3))
    got = []
    discover_routes(b[0].dsr, 2, 3, got.append)
    b.run(1.0)
    assert got == [[R((0, 1, 2))]]


def test_discover_partitioned_pair_times_out(bench):
    b = bench([(0.0, 0.0), (2000.0, 2000.0)])
    got = []
    discover_routes(b[0].dsr, 1, 3, got.append)
    b.run(1.0)
    assert got == [[]]


def test_discover_both_sides_of_a_square(bench):
    b = bench([(0.0, 0.0), (200.0, 0.0), (200.0, 200.0), (0.0, 200.0)])
    g = nx.cycle_graph(4)
    expected = {tuple(p) for p in nx.all_simple_paths(g, 0, 2)}
    got = []
    discover_routes(b[0].dsr, 2, 3, got.append)
    b.run(1.0)
    assert got and got[0]
    assert {r.hops for r in cache_lookup(b[0].dsr.cache, 2)} == expected


def test_discovered_routes_were_link_valid(bench):
    pts = [(random.Random(i).uniform(0, 900), random.Random(-i).uniform(0, 900)) for i in range(15)]
    b = bench(pts)
    discover_routes(b[0].dsr, 14, 8, lambda routes: None)
    b.run(1.0)
    for node in b.nodes.values():
        for bucket in node.dsr.cache.routes.values():
            for r in bucket.values():
                assert all(b.net.linked(u, v) for u, v in zip(r.hops, r.hops[1:]))


class Recorder:
    def __init__(self, node):
        self.got = []
        self.node = node

    def __call__(self, msg, sender):
        self.got.append((self.node.net.now, msg, sender))


def test_forward_delay_three_hops(bench):
    b = bench(line(4))
    rec = Recorder(b[3])
    b[3].receive = rec
    msg = RouteReply(0, 3, 1, R((0, 1, 2, 3)))
    b.sim.schedule_at(2.0, forward_source_routed, b.net, msg, R((0, 1, 2, 3)))
    b.run(3.0)
    assert len(rec.got) == 1
    assert rec.got[0][0] == pytest.approx(2.003, abs=1e-12)


def test_broken_link_drops_and_evicts(bench):
    b = bench(line(4))
    route = R((0, 1, 2, 3))
    b[0].dsr.cache.insert(route)
    # node 2 jumps away right after the first hop
    b.mobility.set_leg(2, (500.0, 100.0), (500.0, 4000.0), 1e6, 0.0005)
    rec = Recorder(b[3])
    b[3].receive = rec
    failures = []
    forward_source_routed(b.net, RouteReply(0, 3, 1, route), route, on_fail=lambda: failures.append(1))
    b.run(1.0)
    assert rec.got == []
    assert failures == [1]
    assert route not in cache_lookup(b[0].dsr.cache, 3)


def test_two_disjoint_paths_one_broken(bench):
    b = bench([(0.0, 0.0), (200.0, 0.0), (200.0, 200.0), (0.0, 200.0)])
    rec = Recorder(b[2])
    b[2].receive = rec
    b.mobility.set_leg(1, (200.0, 0.0), (200.0, -4000.0), 1e6, 0.0005)
    msg = RouteReply(0, 2, 1, R((0, 1, 2)))
    forward_source_routed(b.net, msg, R((0, 1, 2)))
    forward_source_routed(b.net, msg, R((0, 3, 2)))
    b.run(1.0)
    assert len(rec.got) == 1
    assert rec.got[0][2] == 3
