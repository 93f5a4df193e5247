"""Gadget graphs over small bases, parity queries and the clique ring."""

import networkx as nx
import pytest

from choiceless import cfi
from choiceless.canonize import gurevich_canon
from choiceless.structure import graph, orbits_1, orbits_k

BASES = {
    "C3": cfi.cycle_base(3),
    "C4": cfi.cycle_base(4),
    "paw": cfi.paw_base(),
    "K4": cfi.complete_base(4),
}


def nx_colored(A):
    g = nx.Graph(list(A.rel("E")))
    g.add_nodes_from(A.atoms)
    for i, cls in enumerate(A.colors):
        for x in cls:
            g.nodes[x]["c"] = i
    return g


def same_class(a, b):
    return nx.is_isomorphic(nx_colored(a.structure), nx_colored(b.structure),
                            node_match=lambda x, y: x["c"] == y["c"])


@pytest.mark.parametrize("name", BASES)
def test_sizes(name):
    G = BASES[name]
    C = cfi.build_cfi(cfi.CFISpec.make(G))
    degrees = {u: len(G.neighbors(u)) for u in G.atoms}
    assert cfi.gadget_sizes(C) == {u: 2 ** (d - 1) for u, d in degrees.items()}
    m = len(cfi.base_edges(G))
    assert C.structure.universe_size == sum(2 ** (d - 1) for d in degrees.values()) + 4 * m


@pytest.mark.parametrize("name", BASES)
def test_two_classes_decided_by_parity(name):
    G = BASES[name]
    edges = cfi.base_edges(G)
    specs = [cfi.CFISpec.make(G, flips) for flips in
             ([], [edges[0]], [edges[-1]], [edges[0], edges[-1]], edges)]
    graphs = [cfi.build_cfi(s) for s in specs]
    for s, g in zip(specs, graphs):
        for t, h in zip(specs, graphs):
            assert same_class(g, h) == (cfi.parity(s) == cfi.parity(t))
    # the brute-force oracle agrees with networkx
    assert cfi.twist_equivalence(specs[0], specs[3]) == same_class(graphs[0], graphs[3])


@pytest.mark.parametrize("name", ["C3", "C4", "paw"])
def test_query_reports_parity(name):
    G = BASES[name]
    e = cfi.base_edges(G)[0]
    assert cfi.cfi_query(cfi.build_cfi(cfi.CFISpec.make(G))) == "even"
    assert cfi.cfi_query(cfi.build_cfi(cfi.CFISpec.make(G, [e]))) == "odd"


@pytest.mark.parametrize("name", ["C3", "paw"])
def test_chooser_rounds_are_full_orbits(name):
    for flips in ([], [cfi.base_edges(BASES[name])[0]]):
        C = cfi.build_cfi(cfi.CFISpec.make(BASES[name], flips))
        res = gurevich_canon(C.structure, cfi.CFIChooser(C), witnesses=False)
        for r in res.rounds:
            assert list(r.orbit) in orbits_1(C.structure.with_indiv(r.prefix), cap=64)


def test_bad_specs_are_rejected():
    with pytest.raises(cfi.CFIError):
        cfi.CFISpec.make(cfi.cycle_base(4), [(0, 2)])
    with pytest.raises(cfi.CFIError):
        cfi.check_base(graph(3, [(0, 1)]))  # disconnected


def test_file_round_trip_hides_the_labeling():
    C = cfi.build_cfi(cfi.CFISpec.make(cfi.cycle_base(3), [(0, 1)]))
    back = cfi.parse_cfi(cfi.render_cfi(C))
    assert back.spec is None
    assert back.structure == C.structure
    assert cfi.cfi_query(back) == "odd"


def test_clique_ring_shape():
    # [PAPER] regular of degree 3n - 1 with colour classes of size n
    n = 3
    G = cfi.clique_ring_base(n)
    assert {len(G.neighbors(v)) for v in G.atoms} == {3 * n - 1}
    assert sorted(len(c) for c in G.colors) == [n] * n


@pytest.mark.parametrize("indiv", [(), (0,), (0, 4)])
def test_clique_ring_orbits_closed_form(indiv):
    G = cfi.clique_ring_base(3)
    got = sorted(orbits_k(G.with_indiv(indiv), 2))
    assert got == cfi.clique_ring_orbits(3, indiv, 2)
