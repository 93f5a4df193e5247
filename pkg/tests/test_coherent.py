"""Two-dimensional refinement, coherent configurations and algebraic sketches."""

import random
from collections import Counter

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from choiceless import coherent as co
from choiceless.battery import atlas_graphs, cycle
from choiceless.structure import disjoint_union, graph, orbits_k, relabel

random_graphs = st.integers(1, 6).flatmap(
    lambda n: st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                      .filter(lambda e: e[0] < e[1]), max_size=15)
    .map(lambda es: graph(n, sorted(es))))


def axioms_hold(A, cc):
    """Independent restatement of the four axioms."""
    n = A.universe_size
    cls = cc.classes()
    parts = set(cls)
    E = A.rel("E")
    for c in cls:
        if len({u == v for u, v in c}) != 1:
            return False
        if frozenset((v, u) for u, v in c) not in parts:
            return False
        if len({(u, v) in E for u, v in c}) != 1:
            return False
        counts = {frozenset(Counter((cc.color[u][w], cc.color[w][v]) for w in range(n)).items())
                  for u, v in c}
        if len(counts) != 1:
            return False
    return True


def petersen():
    g = nx.petersen_graph()
    return graph(10, list(g.edges()))


@pytest.mark.parametrize("n", range(3, 9))
def test_cycles_split_by_distance(n):
    # a cycle is distance-regular, so its closure is the distance partition
    cc = co.refine_2wl(cycle(n))
    assert cc.k == 1 + n // 2
    assert axioms_hold(cycle(n), cc)


def test_petersen_intersection_numbers():
    # [DERIVED] strongly regular (10, 3, 0, 1)
    P = petersen()
    cc = co.refine_2wl(P)
    assert cc.k == 3
    D, E_, N = cc.color[0][0], cc.color[0][1], cc.color[0][2]
    assert (0, 2) not in P.rel("E")
    assert cc.q(D, E_, E_) == 3          # valency
    assert cc.q(E_, E_, E_) == 0         # lambda
    assert cc.q(N, E_, E_) == 1          # mu
    # common non-neighbours outside {u, v}: 10 - 2 - (3 + 3 - mu) and 10 - 2 - (2 + 2)
    assert cc.q(N, N, N) == 3
    assert cc.q(E_, N, N) == 4


@settings(max_examples=40, deadline=None)
@given(random_graphs)
def test_two_orbits_lie_inside_colors(A):
    cc = co.refine_2wl(A)
    assert axioms_hold(A, cc)
    for orbit in orbits_k(A, 2):
        assert len({cc.color[u][v] for u, v in orbit}) == 1


def test_closure_matches_forced_splitting():
    for n in range(1, 6):
        for A in atlas_graphs(n, connected=False):
            assert co.refine_2wl(A).partition() == co.naive_closure(A)


@settings(max_examples=30, deadline=None)
@given(random_graphs, st.data())
def test_sketch_is_isomorphism_invariant(A, data):
    perm = data.draw(st.permutations(list(A.atoms)))
    assert co.sketch(A) == co.sketch(relabel(A, perm))


def test_sketch_separates_what_refinement_separates():
    # one round of colour refinement cannot tell these apart, the pair version can
    assert co.sketch(cycle(6)) != co.sketch(disjoint_union(cycle(3), cycle(3)))
    assert co.sketch(cycle(5)) != co.sketch(graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)]))


def test_union_sketch_from_parts():
    rng = random.Random(7)
    pool = [A for n in range(1, 6) for A in atlas_graphs(n, connected=False)]
    for _ in range(25):
        A, B = rng.choice(pool), rng.choice(pool)
        assert co.sketch_of_union(co.sketch(A), co.sketch(B)) == co.sketch(disjoint_union(A, B))


def test_restriction_recovers_a_component():
    A, B = cycle(5), graph(3, [(0, 1)])
    U = disjoint_union(A, B)
    fibers = co.fiber_sets(U)
    CA = [c for c, vs in fibers.items() if max(vs) < A.universe_size]
    assert co.restrict_sketch(co.sketch(U), ["E"], CA) == co.sketch(A)


def test_restriction_needs_fibers():
    s = co.sketch(cycle(4))
    non_fiber = next(c for c in range(s.sigma) if c not in co.fiber_sets(cycle(4)))
    with pytest.raises(co.CoherentError):
        co.restrict_sketch(s, ["E"], [non_fiber])


def test_render_lists_every_section():
    text = co.sketch(cycle(4)).render()
    for head in ("tau:", "sigma:", "subset:", "q:"):
        assert head in text
