"""Test batteries: small graphs, bundled programs, and brute-force cross-checks.

The ``CHECKS`` table drives the ``selftest`` subcommand.  Each check returns
``(passed, detail)`` and compares a component against an independent oracle.
"""

from __future__ import annotations

import dataclasses
import random
import time
from importlib import resources
from typing import Callable

from .structure import Structure, graph, is_isomorphic, disjoint_union
from .parser import parse_program
from .syntax import Program, Polynomial, WSC, eliminate_outputs
from .evaluator import ChoicePolicy, Evaluator, eval_program, format_result
from . import canonize, coherent, cfi


# --- graphs ------------------------------------------------------------------------------------

def atlas_graphs(n: int, connected: bool = True) -> list[Structure]:
    """Graphs on exactly ``n`` vertices from the graph atlas (one per class)."""
    import networkx as nx
    from networkx.generators.atlas import graph_atlas_g
    out = []
    for g in graph_atlas_g():
        if g.number_of_nodes() != n:
            continue
        if connected and not nx.is_connected(g):
            continue
        out.append(graph(n, list(g.edges())))
    return out


def cycle(n: int) -> Structure:
    return graph(n, [(i, (i + 1) % n) for i in range(n)])


def wheel(k: int) -> Structure:
    """Center 0 joined to the cycle 1..k."""
    return graph(k + 1, [(0, i) for i in range(1, k + 1)]
                 + [(i, i % k + 1) for i in range(1, k + 1)])


def named_graphs() -> dict[str, Structure]:
    """Small graphs (at most five vertices) used with the program battery."""
    return {
        "K1": graph(1, []),
        "2K1": graph(2, []),
        "K2": graph(2, [(0, 1)]),
        "3K1": graph(3, []),
        "P3": graph(3, [(0, 1), (1, 2)]),
        "K3": graph(3, [(0, 1), (1, 2), (0, 2)]),
        "K2+K1": graph(3, [(0, 1)]),
        "P4": graph(4, [(0, 1), (1, 2), (2, 3)]),
        "C4": cycle(4),
        "star3": graph(4, [(0, 1), (0, 2), (0, 3)]),
        "paw": graph(4, [(0, 1), (1, 2), (0, 2), (2, 3)]),
        "K4": graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)]),
        "C5": cycle(5),
        "W4": wheel(4),
        "5K1": graph(5, []),
        "bull": graph(5, [(0, 1), (1, 2), (0, 2), (1, 3), (2, 4)]),
    }


def is_threshold(A: Structure) -> bool:
    """Brute force: repeatedly delete an isolated or universal vertex."""
    alive = set(A.atoms)
    E = A.rel("E")
    while alive:
        for v in sorted(alive):
            deg = sum(1 for w in alive if w != v and (v, w) in E)
            if deg == 0 or deg == len(alive) - 1:
                alive.remove(v)
                break
        else:
            return False
    return True


# --- programs ------------------------------------------------------------------------------------

def program_source(name: str) -> str:
    return resources.files("choiceless").joinpath("programs", f"{name}.bgs").read_text()


def load_program(name: str, entry: str | None = None) -> Program:
    prog = parse_program(program_source(name))
    return dataclasses.replace(prog, entry=entry) if entry else prog


# (program file, entry) pairs; entries whose body is a WSC take part in the
# exhaustive-tree checks
PROGRAMS = [
    ("threshold", None),
    ("threshold_core", None),
    ("twin_pick", None),
    ("maxdeg_pick", None),
    ("leaf_peel", None),
    ("no_witness", None),
    ("isolated_set", "how_many"),
    ("isolated_set", "collected"),
    ("triangle", None),
    ("even_size", None),
]


def program_battery() -> list[tuple[str, Program]]:
    out = []
    for name, entry in PROGRAMS:
        label = name if entry is None else f"{name}:{entry}"
        out.append((label, load_program(name, entry)))
    return out


def battery_pairs(max_size: int = 5):
    """All (program label, program, graph label, graph) pairs."""
    graphs = {k: g for k, g in named_graphs().items() if g.universe_size <= max_size}
    return [(pl, p, gl, g) for pl, p in program_battery() for gl, g in graphs.items()]


def entry_wsc(prog: Program) -> WSC | None:
    body = prog.binding(prog.entry).body
    return body if isinstance(body, WSC) else None


def exhaustive(prog: Program, A: Structure):
    node = entry_wsc(prog)
    if node is None:
        return None
    b = prog.binding(prog.entry)
    ev = Evaluator(A, prog)
    return ev.wsc_exhaustive(node, {}, b.bound or prog.default_bound)


# --- checks ---------------------------------------------------------------------------------------

def check_threshold() -> tuple[bool, str]:
    prog = load_program("threshold")
    bad = dag = 0
    graphs = atlas_graphs(7)
    for A in graphs:
        r = eval_program(prog, A)
        if r.is_dagger:
            dag += 1
        elif r.value != is_threshold(A):
            bad += 1
    return bad == 0 and dag == 0, f"{len(graphs)} graphs, {bad} disagreements, {dag} daggers"


def check_all_or_none() -> tuple[bool, str]:
    trees = violations = 0
    for pl, p, gl, g in battery_pairs():
        res = exhaustive(p, g)
        if res is None or res.dagger:
            continue
        trees += 1
        if not res.all_or_none:
            violations += 1
    return violations == 0, f"{trees} trees, {violations} violations"


def check_choice_independence(seeds: int = 20) -> tuple[bool, str]:
    pairs = diverge = 0
    for pl, p, gl, g in battery_pairs():
        first = eval_program(p, g, ChoicePolicy())
        if first.is_dagger:
            continue
        pairs += 1
        outs = {format_result(eval_program(p, g, ChoicePolicy.random(s))) for s in range(seeds)}
        outs.add(format_result(first))
        if len(outs) != 1:
            diverge += 1
    return diverge == 0, f"{pairs} dagger-free pairs x {seeds} seeds, {diverge} divergences"


def check_canon(n: int = 6) -> tuple[bool, str]:
    graphs = atlas_graphs(n)
    canons = [canonize.gurevich_canon(A).canon for A in graphs]
    bad = 0
    checks = 0
    for i in range(len(graphs)):
        for j in range(i + 1, len(graphs)):
            checks += 1
            if (canons[i] == canons[j]) != is_isomorphic(graphs[i], graphs[j]):
                bad += 1
    return bad == 0, f"{len(graphs)} graphs, {checks} pairs, {bad} disagreements"


def check_coherent(n: int = 6) -> tuple[bool, str]:
    bad = 0
    total = 0
    for k in range(1, n + 1):
        for A in atlas_graphs(k, connected=False):
            total += 1
            cc = coherent.refine_2wl(A)
            if coherent.check_axioms(A, cc) or cc.partition() != coherent.naive_closure(A):
                bad += 1
    return bad == 0, f"{total} graphs, {bad} failures"


def check_union(pairs: int = 50, seed: int = 0) -> tuple[bool, str]:
    rng = random.Random(seed)
    pool = [A for k in range(1, 7) for A in atlas_graphs(k, connected=False)]
    bad = 0
    for _ in range(pairs):
        A, B = rng.choice(pool), rng.choice(pool)
        if coherent.sketch_of_union(coherent.sketch(A), coherent.sketch(B)) != \
                coherent.sketch(disjoint_union(A, B)):
            bad += 1
    return bad == 0, f"{pairs} pairs, {bad} mismatches"


def check_cfi() -> tuple[bool, str]:
    bad = []
    for name, G in [("C3", cfi.cycle_base(3)), ("C4", cfi.cycle_base(4)),
                    ("paw", cfi.paw_base()), ("K4", cfi.complete_base(4))]:
        edges = cfi.base_edges(G)
        for flips in ([], [edges[0]], [edges[0], edges[-1]]):
            spec = cfi.CFISpec.make(G, flips)
            if cfi.cfi_query(cfi.build_cfi(spec)) != ("even" if cfi.parity(spec) == 0 else "odd"):
                bad.append(f"{name}{flips}")
    return not bad, "all agree with parity" if not bad else "failed: " + ", ".join(bad)


def check_canon_program() -> tuple[bool, str]:
    from .structure import GRAPH
    prog = parse_program(canonize.generate_canon_program(GRAPH))
    graphs = [wheel(4)] + [A for k in range(1, 5) for A in atlas_graphs(k)]
    bad = 0
    for A in graphs:
        r = eval_program(prog, A)
        native = canonize.gurevich_canon(A, witnesses=False).canon.rel("E")
        if r.is_dagger or canonize.decode_canon_value(r.value, GRAPH)[0] != native:
            bad += 1
    return bad == 0, f"{len(graphs)} graphs, {bad} mismatches"


def check_eliminability() -> tuple[bool, str]:
    bad = compared = 0
    span = Polynomial((8, 1))
    for pl, p, gl, g in battery_pairs():
        q = eliminate_outputs(p, span)
        if q == p:
            continue
        compared += 1
        if format_result(eval_program(p, g)) != format_result(eval_program(q, g)):
            bad += 1
    return bad == 0, f"{compared} pairs, {bad} mismatches"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "threshold": check_threshold,
    "all-or-none": check_all_or_none,
    "choice-independence": check_choice_independence,
    "canon": check_canon,
    "coherent": check_coherent,
    "union-sketch": check_union,
    "cfi": check_cfi,
    "canon-program": check_canon_program,
    "eliminability": check_eliminability,
}


def run_check(name: str) -> tuple[str, bool, str, float]:
    t = time.perf_counter()
    try:
        ok, detail = CHECKS[name]()
    except Exception as e:  # a crashing check is a failing check
        ok, detail = False, f"error: {type(e).__name__}: {e}"
    return name, ok, detail, time.perf_counter() - t
