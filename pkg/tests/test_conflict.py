import math
from itertools import combinations

import numpy as np
from hypothesis import given, settings, strategies as st

from ecrmac.conflict import (build_comm_graph, build_conflict_graph, dump_conflict_graph,
                             links_conflict, neighbor_sets, two_hop)


def nb_of(positions, r=150.0):
    return neighbor_sets(np.asarray(positions, dtype=float), r)


def test_comm_graph_links():
    pos = [(0, 0), (100, 0), (300, 0)]
    g = build_comm_graph(pos, {0: {1, 2}, 1: {2, 3}, 2: {1}}, 150.0)
    assert g.links[(0, 1)] == {2}
    assert (1, 2) not in g.links  # 200 m
    g2 = build_comm_graph(pos, {0: {1}, 1: {2}, 2: {1}}, 150.0)
    assert (0, 1) not in g2.links


def test_conflict_examples():
    nb = nb_of([(0, 0), (100, 0), (200, 0), (300, 0)])
    assert links_conflict((0, 1), (1, 2), nb)
    # B in Nb(C): A->B and C->D conflict
    assert links_conflict((0, 1), (2, 3), nb)
    far = nb_of([(0, 0), (100, 0), (1000, 0), (1100, 0)])
    assert not links_conflict((0, 1), (2, 3), far)
    # shared transmitter
    assert links_conflict((0, 1), (0, 2), nb)


def test_two_hop():
    nb = nb_of([(0, 0), (100, 0), (200, 0)])
    assert two_hop(0, nb) == {1, 2}
    assert two_hop(0, nb_of([(0, 0), (1000, 0)])) == frozenset()
    star = nb_of([(0, 0), (100, 0), (-100, 0), (0, 100), (0, -100)])
    # leaves are 141 m or 200 m apart; the brute-force oracle is plain enumeration
    leaves = {1, 2, 3, 4}
    assert two_hop(0, star) == leaves


def test_conflict_graph_small():
    pos = [(0, 0), (100, 0)]
    g = build_comm_graph(pos, {0: {1}, 1: {1}}, 150.0)
    single = build_conflict_graph(g, [(0, 1)])
    assert not single.edges
    pos3 = [(0, 0), (100, 0), (200, 0)]
    g3 = build_comm_graph(pos3, {i: {1} for i in range(3)}, 150.0)
    f = build_conflict_graph(g3, [(0, 1), (1, 2)])
    assert len(f.edges) == 1
    assert dump_conflict_graph(f) == "0->1: 1->2\n1->2: 0->1\n"


points = st.lists(st.tuples(st.floats(0, 400), st.floats(0, 400)), min_size=2, max_size=10,
                  unique=True)


@settings(max_examples=60, deadline=None)
@given(points)
def test_conflict_graph_matches_bruteforce(pts):
    g = build_comm_graph(pts, {i: {1} for i in range(len(pts))}, 150.0)
    f = build_conflict_graph(g)
    dist = lambda a, b: math.dist(pts[a], pts[b])
    for a, b in combinations(f.vertices, 2):
        (u, v), (x, y) = a, b
        expect = (len({u, v, x, y}) < 4 or dist(v, x) <= 150 or dist(u, y) <= 150)
        assert f.has_edge(a, b) == expect
        assert links_conflict(a, b, g) == links_conflict(b, a, g)
        if expect:
            # the transmitter of one and receiver of the other are within two hops
            two = lambda n: two_hop(n, g) | {n}
            assert x in two(v) or u in two(y) or y in two(u) or v in two(x)
