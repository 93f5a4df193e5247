"""Canonization by iterated individualization, with witnessing maps."""

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from choiceless import canonize, hfset as hf
from choiceless.battery import atlas_graphs, cycle, wheel
from choiceless.evaluator import ChoicePolicy, eval_program
from choiceless.parser import parse_program
from choiceless.structure import (
    GRAPH, disjoint_union, graph, is_automorphism, orbits_1, relabel,
)

CHOOSERS = [canonize.LexChooser(), canonize.BruteForceChooser(), canonize.InvariantChooser()]

random_graphs = st.integers(1, 6).flatmap(
    lambda n: st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                      .filter(lambda e: e[0] < e[1]), max_size=15)
    .map(lambda es: graph(n, sorted(es))))


def nx_of(A):
    g = nx.Graph(list(A.rel("E")))
    g.add_nodes_from(A.atoms)
    return g


def edges_1based(S):
    return sorted((a + 1, b + 1) for a, b in S.rel("E") if a < b)


# --- the worked example: a wheel with four spokes --------------------------------------

def wheel_rank(A, prefix, O):
    """Orbit preference reproducing the worked example's choices."""
    v = O[0]
    deg = len(A.neighbors(v))
    first = prefix[:1]
    near_first = any(v in A.neighbors(w) for w in first)
    k = len(prefix)
    if k == 0:
        return deg
    if k == 1:
        return (deg == 4, not near_first)
    if k == 2:
        return (deg != 4, near_first)
    return near_first


def test_wheel_canon_matches_worked_example():
    # [PAPER] ordered canon: I-II, II-III, III-IV, IV-V, I-III, III-V, II-IV, I-V
    A = wheel(4)
    res = canonize.gurevich_canon(A, canonize.BruteForceChooser(wheel_rank))
    assert edges_1based(res.canon) == sorted([(1, 2), (2, 3), (3, 4), (4, 5),
                                              (1, 3), (3, 5), (2, 4), (1, 5)])
    # the hub is the third individualized vertex
    assert res.order[2] == 0
    # first the rim orbit, then the two rim neighbours of I, then singletons
    assert [len(r.orbit) for r in res.rounds] == [4, 2, 1, 1, 1]


def test_other_choices_give_the_same_wheel_canon():
    A = wheel(4)
    chooser = canonize.BruteForceChooser(wheel_rank)
    base = canonize.gurevich_canon(A, chooser).canon
    for seed in range(8):
        assert canonize.gurevich_canon(A, chooser, ChoicePolicy.random(seed)).canon == base


def test_wheel_witness_swaps_u_and_v():
    # [PAPER] with I individualized, the induced map exchanges u and v, fixing the rest
    A = wheel(4)
    chooser = canonize.BruteForceChooser(wheel_rank)
    res = canonize.gurevich_canon(A, chooser)
    I = res.order[0]
    u, v = sorted(A.neighbors(I) - {0})
    phi = canonize.witness_automorphisms(A, (I,), u, v, chooser, res.order)
    assert phi[u] == v and phi[v] == u
    assert all(phi[a] == a for a in A.atoms if a not in (u, v))


# --- general properties ------------------------------------------------------------------

@pytest.mark.parametrize("chooser", CHOOSERS, ids=lambda c: c.name)
def test_chooser_returns_an_orbit(chooser):
    for A in atlas_graphs(5):
        for prefix in [(), (0,), (0, 2)]:
            O = chooser(A, prefix)
            orbits = orbits_1(A.with_indiv(prefix))
            assert sorted(O) in orbits
            assert not set(O) & set(prefix)


@settings(max_examples=40, deadline=None)
@given(random_graphs, st.data())
def test_canon_is_invariant_under_relabeling(A, data):
    perm = data.draw(st.permutations(list(A.atoms)))
    assert canonize.canon(A) == canonize.canon(relabel(A, perm))


@settings(max_examples=40, deadline=None)
@given(random_graphs, random_graphs)
def test_canon_equality_matches_networkx(A, B):
    same = canonize.canonical_form(A)[0] == canonize.canonical_form(B)[0]
    assert same == nx.is_isomorphic(nx_of(A), nx_of(B))


@pytest.mark.parametrize("chooser", CHOOSERS, ids=lambda c: c.name)
def test_every_witness_is_a_stabilizing_automorphism(chooser):
    for A in atlas_graphs(5):
        res = canonize.gurevich_canon(A, chooser)
        for r in res.rounds:
            assert len(r.witnesses) == len(r.orbit) ** 2
            for u, v, phi in r.witnesses:
                assert phi[u] == v
                assert is_automorphism(A.with_indiv(r.prefix), phi)


def test_canon_is_an_isomorphic_copy():
    A = cycle(5)
    res = canonize.gurevich_canon(A)
    assert relabel(A, res.position) == res.canon


def test_complete_invariant_is_atom_free():
    inv = canonize.complete_invariant(wheel(4))
    assert not hf.atoms_of(inv)
    assert inv is canonize.complete_invariant(relabel(wheel(4), [4, 3, 2, 1, 0]))


def test_tuple_invariant_separates_orbits():
    P4 = graph(4, [(0, 1), (1, 2), (2, 3)])
    ends = canonize.tuple_invariant(P4, (), (0,))
    assert ends is canonize.tuple_invariant(P4, (), (3,))
    assert ends is not canonize.tuple_invariant(P4, (), (1,))
    classes = canonize.distinguishable_orbits(P4, (), 1)
    assert sorted(sorted(t[0] for t in c) for c in classes) == [[0, 3], [1, 2]]


def test_disconnected_inputs():
    A = disjoint_union(cycle(3), graph(2, [(0, 1)]))
    B = disjoint_union(graph(2, [(0, 1)]), cycle(3))
    assert canonize.iso_by_canon(A, B)
    assert not canonize.iso_by_canon(A, disjoint_union(cycle(4), graph(1, [])))


def test_higher_arity_is_rejected():
    from choiceless.structure import Signature, Structure
    T = Structure.make(Signature((("R", 3),)), 3, {"R": [(0, 1, 2)]})
    with pytest.raises(canonize.CanonError):
        canonize.gurevich_canon(T)


def test_generated_program_reproduces_native_canon():
    prog = parse_program(canonize.generate_canon_program(GRAPH))
    for A in [graph(1, []), graph(2, [(0, 1)]), graph(3, [(0, 1), (1, 2)])]:
        r = eval_program(prog, A)
        native = canonize.gurevich_canon(A, witnesses=False).canon.rel("E")
        assert canonize.decode_canon_value(r.value, GRAPH)[0] == native
