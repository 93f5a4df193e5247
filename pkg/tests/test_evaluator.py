"""Evaluation of terms, formulas and witnessed symmetric choice."""

import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from choiceless import hfset as hf
from choiceless.battery import exhaustive, load_program, named_graphs
from choiceless.evaluator import ChoicePolicy, eval_program, eval_term, format_result
from choiceless.parser import parse_expr
from choiceless.structure import graph

GRAPHS = named_graphs()

random_graphs = st.integers(1, 6).flatmap(
    lambda n: st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                      .filter(lambda e: e[0] < e[1]), max_size=15)
    .map(lambda es: graph(n, sorted(es))))


def run(text, A, bound=10_000, env=None, scope=()):
    node = parse_expr(text, [("E", 2)], scope=scope)
    return eval_term(A, env or {}, node, bound)


def threshold_by_forbidden_subgraphs(A):
    """Threshold graphs are exactly those with no induced P4, C4 or 2K2."""
    g = nx.Graph(list(A.rel("E")))
    g.add_nodes_from(A.atoms)
    bad = [nx.path_graph(4), nx.cycle_graph(4), nx.Graph([(0, 1), (2, 3)])]
    for quad in itertools.combinations(A.atoms, 4):
        sub = g.subgraph(quad)
        if any(nx.is_isomorphic(sub, h) for h in bad):
            return False
    return True


@settings(max_examples=50, deadline=None)
@given(random_graphs)
def test_comprehension_matches_python(A):
    got = run("{v | v in atoms, exists w in atoms . E(v, w)}", A).value
    want = {a for a, _ in A.rel("E")}
    assert {x.index for x in got} == want
    assert run("card(atoms)", A).value is hf.von_neumann(A.universe_size)


def test_unique_and_empty_fallback():
    A = graph(3, [(0, 1)])
    assert run("unique({x | x in atoms, forall w in atoms . ~E(x, w)})", A).value is hf.atom(2)
    assert run("unique(atoms)", A).value is hf.EMPTY


def test_bound_violation_gives_dagger():
    A = graph(5, [])
    assert run("card(atoms)", A, bound=2).is_dagger
    assert run("card(atoms)", A, bound=100).value is hf.von_neumann(5)


@settings(max_examples=60, deadline=None)
@given(random_graphs)
def test_threshold_program_agrees_with_forbidden_subgraphs(A):
    r = eval_program(load_program("threshold"), A)
    assert not r.is_dagger
    assert r.value == threshold_by_forbidden_subgraphs(A)


@settings(max_examples=30, deadline=None)
@given(random_graphs)
def test_triangle_program_agrees_with_networkx(A):
    g = nx.Graph(list(A.rel("E")))
    has = any(c for c in nx.triangles(g).values()) if g.number_of_nodes() else False
    assert eval_program(load_program("triangle"), A).value == has


@pytest.mark.parametrize("n", range(1, 7))
def test_even_size_without_choice(n):
    assert eval_program(load_program("even_size"), graph(n, [])).value == (n % 2 == 0)


def test_missing_witnesses_give_dagger():
    for name in ("K1", "K3", "P4"):
        assert eval_program(load_program("no_witness"), GRAPHS[name]).is_dagger


def test_twin_transpositions_witness_only_symmetric_graphs():
    prog = load_program("twin_pick")
    assert eval_program(prog, GRAPHS["K4"]).value is True
    assert eval_program(prog, GRAPHS["5K1"]).value is True
    assert eval_program(prog, GRAPHS["P3"]).is_dagger


def test_output_with_atoms_is_replaced_by_empty():
    A = graph(5, [(0, 1)])
    assert eval_program(load_program("isolated_set", "collected"), A).value is hf.EMPTY
    assert eval_program(load_program("isolated_set", "how_many"), A).value is hf.von_neumann(3)


def test_exhaustive_tree_of_the_path():
    res = exhaustive(load_program("threshold"), GRAPHS["P3"])
    # two symmetric first choices (the two leaves), each path witnessed
    assert len(res.paths) == 2
    assert res.all_or_none and set(res.verdicts) == {True}


@pytest.mark.parametrize("seed", range(5))
def test_random_choices_do_not_change_the_result(seed):
    for prog in ("threshold", "maxdeg_pick", "leaf_peel"):
        p = load_program(prog)
        for A in GRAPHS.values():
            first = format_result(eval_program(p, A))
            assert format_result(eval_program(p, A, ChoicePolicy.random(seed))) == first


def test_deterministic_choice_follows_the_order():
    A = graph(3, [])
    order = hf.make_tuple([hf.atom(2), hf.atom(0), hf.atom(1)])
    text = "dc x y (if x = {} then {y} else x; atoms; o)"
    got = run(text, A, env={"o": order}, scope=["o"]).value
    assert got is hf.singleton(hf.atom(2))


def test_trace_records_rounds():
    from choiceless.evaluator import Evaluator
    p = load_program("threshold")
    r = Evaluator(GRAPHS["star3"], p, trace=True).run_entry()
    assert r.value is True
    assert r.trace and any(step.get("op") == "wsc" for step in r.trace)


@pytest.mark.parametrize("name", ["threshold", "twin_pick", "leaf_peel", "even_size", "triangle"])
def test_sugar_agrees_with_its_core_translation(name):
    from choiceless.syntax import desugar_program, is_core
    prog = load_program(name)
    core = desugar_program(prog)
    assert all(is_core(b.body) for b in core.bindings)
    for A in (GRAPHS["K1"], GRAPHS["P3"], GRAPHS["paw"], GRAPHS["C4"]):
        assert format_result(eval_program(core, A)) == format_result(eval_program(prog, A))
