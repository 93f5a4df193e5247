"""CFI graphs, their parity, and the CFI-query decided by canonization.

Vertex layout of ``CFI(G, g)`` (deterministic, so output is reproducible):
gadget vertices first, base vertex by base vertex, each gadget enumerating
the even-weight vectors over the sorted neighbor list in lexicographic
order; then two edge vertices (bit 0, bit 1) per directed base edge, in
sorted order of the directed edges.

Every vertex is colored by its kind and the color class of its origin, so a
totally ordered base gives one class per origin while an uncolored base gives
just two classes (gadget vertices and edge vertices).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

from .canonize import gurevich_canon, tuple_invariant
from .structure import (Structure, graph, graph_edges, orbits_k, parse_structure,
                        render_structure, is_isomorphic)
from . import hfset as hf


class CFIError(ValueError):
    pass


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class CFISpec:
    base: Structure
    g: Mapping[tuple[int, int], int]

    def __post_init__(self):
        edges = set(base_edges(self.base))
        keys = {_edge(*e) for e in self.g}
        if keys != edges:
            raise CFIError("the labeling must be defined on exactly the base edges")

    @classmethod
    def make(cls, base: Structure, flips: Sequence[tuple[int, int]] = ()) -> "CFISpec":
        g = {e: 0 for e in base_edges(base)}
        for u, v in flips:
            e = _edge(u, v)
            if e not in g:
                raise CFIError(f"{e} is not a base edge")
            g[e] ^= 1
        return cls(base, g)

    def label(self, u: int, v: int) -> int:
        return self.g[_edge(u, v)] % 2


def base_edges(G: Structure) -> list[tuple[int, int]]:
    return sorted({_edge(u, v) for u, v in graph_edges(G)})


def check_base(G: Structure) -> None:
    if G.signature.names != ["E"]:
        raise CFIError("a base graph has the single relation E")
    E = G.rel("E")
    if any(u == v for u, v in E) or any((v, u) not in E for u, v in E):
        raise CFIError("a base graph is simple and undirected")
    if not G.is_connected():
        raise CFIError("a base graph is connected")


@dataclass(frozen=True)
class CFIGraph:
    spec: CFISpec | None
    base: Structure
    structure: Structure
    # ("g", u, a) for gadget vertices, ("e", (u, v), i) for edge vertices
    origin: tuple[tuple, ...]

    def origin_of(self, x: int):
        o = self.origin[x]
        return o[1]


def _neighbors(G: Structure, u: int) -> list[int]:
    return sorted(v for (a, v) in G.rel("E") if a == u)


def build_cfi(spec: CFISpec) -> CFIGraph:
    G = spec.base
    check_base(G)
    origin: list[tuple] = []
    gadget: dict[int, list[tuple[int, tuple[int, ...]]]] = {}
    for u in range(G.universe_size):
        nb = _neighbors(G, u)
        for a in product((0, 1), repeat=len(nb)):
            if sum(a) % 2 == 0:
                gadget.setdefault(u, []).append((len(origin), a))
                origin.append(("g", u, a))
    evert: dict[tuple[tuple[int, int], int], int] = {}
    directed = sorted(G.rel("E"))
    for e in directed:
        for i in (0, 1):
            evert[(e, i)] = len(origin)
            origin.append(("e", e, i))
    edges = []
    for u in range(G.universe_size):
        nb = _neighbors(G, u)
        for x, a in gadget.get(u, []):
            for v, bit in zip(nb, a):
                edges.append((x, evert[((u, v), bit)]))
    for u, v in base_edges(G):
        for i in (0, 1):
            for j in (0, 1):
                if (i + j) % 2 == spec.label(u, v):
                    edges.append((evert[((u, v), i)], evert[((v, u), j)]))
    keys = sorted({_color_key(G, o) for o in origin})
    rank = {k: i for i, k in enumerate(keys)}
    classes: list[set[int]] = [set() for _ in keys]
    for x, o in enumerate(origin):
        classes[rank[_color_key(G, o)]].add(x)
    A = graph(len(origin), edges, colors=[frozenset(c) for c in classes])
    return CFIGraph(spec, G, A, tuple(origin))


def _color_key(G: Structure, o: tuple) -> tuple:
    if o[0] == "g":
        return (0, G.color_of(o[1]))
    (u, v) = o[1]
    return (1, G.color_of(u), G.color_of(v))


def parity(spec: CFISpec) -> int:
    return sum(spec.g.values()) % 2


def gadget_sizes(C: CFIGraph) -> dict[int, int]:
    out: dict[int, int] = {}
    for o in C.origin:
        if o[0] == "g":
            out[o[1]] = out.get(o[1], 0) + 1
    return out


def twist_equivalence(a: CFISpec, b: CFISpec, cap: int | None = 64) -> bool:
    """Isomorphism verdict of the brute-force oracle on the two CFI graphs."""
    if a.base != b.base:
        raise CFIError("specs over different bases")
    return is_isomorphic(build_cfi(a).structure, build_cfi(b).structure, cap)


# --- ready for individualization ---------------------------------------------------------------

def _refine_1wl(A: Structure, prefix: Sequence[int]) -> list[int]:
    """Canonically ranked stable colors of color refinement on ``(A, prefix)``."""
    n = A.universe_size
    pos = {a: i for i, a in enumerate(prefix)}
    nb = [sorted(A.neighbors(x)) for x in range(n)]

    def ranked(sig):
        order = {s: i for i, s in enumerate(sorted(set(sig)))}
        return [order[s] for s in sig]

    col = ranked([(A.color_of(x), pos.get(x, -1)) for x in range(n)])
    k = len(set(col))
    while True:
        new = ranked([(col[x], tuple(sorted(col[y] for y in nb[x]))) for x in range(n)])
        k2 = len(set(new))
        col = new
        if k2 == k:
            return col
        k = k2


class CFIChooser:
    """Orbit chooser for CFI graphs with known origins.

    1. If a base 2-orbit of directed edges lies on cycles of the base graph
       minus the origins of the prefix, the least such orbit gives the set of
       all edge vertices over it.
    2. Otherwise, the least nontrivial base 2-orbit of directed edges gives one
       edge vertex per edge: the one of smaller refinement color.
    3. Otherwise the least non-individualized vertex by refinement color.

    Base 2-orbits come from the brute-force oracle on the base graph with
    every origin of the prefix fixed; they are ranked by complete invariants
    of the base with the origins individualized, so the choice is canonical.
    """

    name = "cfi"

    def __init__(self, C: CFIGraph, cap: int | None = 64):
        self.C = C
        self.cap = cap
        self.by_origin: dict[tuple[int, int], list[int]] = {}
        for x, o in enumerate(C.origin):
            if o[0] == "e":
                self.by_origin.setdefault(o[1], []).append(x)
        self.last_case: int | None = None
        self._based: dict[tuple[int, ...], Structure] = {}
        self._ranks: dict[tuple, object] = {}

    def _base_context(self, prefix):
        enc: list[int] = []
        gone_vertices, gone_edges = set(), set()
        for x in prefix:
            o = self.C.origin[x]
            if o[0] == "g":
                enc.append(o[1])
                gone_vertices.add(o[1])
            else:
                enc.extend(o[1])
                gone_edges.add(_edge(*o[1]))
        return enc, gone_vertices, gone_edges

    def _on_cycle(self, edge, gone_vertices, gone_edges) -> bool:
        u, v = edge
        if u in gone_vertices or v in gone_vertices or _edge(u, v) in gone_edges:
            return False
        G = self.C.base
        seen, stack = {u}, [u]
        while stack:
            x = stack.pop()
            for y in _neighbors(G, x):
                if y in gone_vertices or _edge(x, y) in gone_edges or _edge(x, y) == _edge(u, v):
                    continue
                if y == v:
                    return True
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    def __call__(self, A: Structure, prefix: tuple[int, ...]) -> list[int] | None:
        if len(prefix) >= A.universe_size:
            return None
        G = self.C.base
        enc, gone_v, gone_e = self._base_context(prefix)
        fixed = tuple(sorted(set(enc)))
        if fixed not in self._based:
            self._based[fixed] = G.with_indiv(fixed)
        orbs = orbits_k(self._based[fixed], 2, self.cap)
        E = G.rel("E")
        edge_orbs = [O for O in orbs if O[0] in E]

        def rank(O):
            key = (tuple(enc), O[0])
            if key not in self._ranks:
                self._ranks[key] = hf.pure_sort_key(tuple_invariant(G, enc, O[0]))
            return self._ranks[key]

        cyc = [O for O in edge_orbs if self._on_cycle(O[0], gone_v, gone_e)]
        if cyc:
            self.last_case = 1
            O = min(cyc, key=rank)
            return sorted(x for e in O for x in self.by_origin[e])
        col = _refine_1wl(A, prefix)
        used = set(prefix)
        big = [O for O in edge_orbs if len(O) > 1]
        if big:
            self.last_case = 2
            O = min(big, key=rank)
            out = []
            for e in O:
                pair = self.by_origin[e]
                best = min(col[x] for x in pair)
                out.extend(x for x in pair if col[x] == best)
            if not used & set(out):
                return sorted(out)
        self.last_case = 3
        rest = [x for x in range(A.universe_size) if x not in used]
        best = min(col[x] for x in rest)
        return sorted(x for x in rest if col[x] == best)


def cfi_canon(C: CFIGraph, witnesses: bool = True, cap: int | None = 64):
    return gurevich_canon(C.structure, CFIChooser(C, cap), witnesses=witnesses)


def even_reference(base: Structure, witnesses: bool = True, cap: int | None = 64) -> Structure:
    """Canon of the untwisted instance over ``base``."""
    return cfi_canon(build_cfi(CFISpec.make(base)), witnesses, cap).canon


def cfi_query(C: CFIGraph, witnesses: bool = True, cap: int | None = 64,
              reference: Structure | None = None) -> str:
    """``even`` iff the canon equals the canon of the even instance over the same base.

    Pass ``reference`` (from :func:`even_reference`) to reuse it across queries.
    """
    if reference is None:
        reference = even_reference(C.base, witnesses, cap)
    mine = cfi_canon(C, witnesses, cap).canon
    return "even" if mine == reference else "odd"


# --- base graph families ---------------------------------------------------------------------------

def cycle_base(n: int) -> Structure:
    return graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_base(n: int) -> Structure:
    return graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def paw_base() -> Structure:
    return graph(4, [(0, 1), (1, 2), (0, 2), (2, 3)])


def clique_ring_base(n: int) -> Structure:
    """``n`` cliques of size ``n`` in a ring, consecutive cliques completely
    joined; each clique is a color class, in ring order."""
    if n < 3:
        raise CFIError("the clique ring needs n >= 3")
    V = lambda i, a: i * n + a  # noqa: E731
    edges = []
    for i in range(n):
        for a in range(n):
            for b in range(a + 1, n):
                edges.append((V(i, a), V(i, b)))
            for b in range(n):
                edges.append((V(i, a), V((i + 1) % n, b)))
    colors = [frozenset(V(i, a) for a in range(n)) for i in range(n)]
    return graph(n * n, edges, colors=colors)


def clique_ring_orbits(n: int, indiv: Sequence[int], k: int) -> list[list[tuple[int, ...]]]:
    """Orbits of k-tuples of the clique ring by the closed-form rule: each
    non-individualized vertex can move to any non-individualized vertex of
    its clique, and the equality pattern of the tuple is preserved."""
    fixed = set(indiv)

    def cls(v):
        return ("fixed", v) if v in fixed else ("free", v // n)

    groups: dict = {}
    for t in product(range(n * n), repeat=k):
        pattern = tuple(t.index(x) for x in t)
        groups.setdefault((tuple(cls(x) for x in t), pattern), []).append(t)
    return sorted(sorted(g) for g in groups.values())


def parse_base(text: str) -> Structure:
    """``cycle:n``, ``complete:n``, ``k4``, ``paw``, ``ring:n`` or a structure file's text."""
    t = text.strip()
    m = re.fullmatch(r"(cycle|complete|ring):(\d+)", t)
    if m:
        kind, n = m.group(1), int(m.group(2))
        return {"cycle": cycle_base, "complete": complete_base, "ring": clique_ring_base}[kind](n)
    if t == "k4":
        return complete_base(4)
    if t == "paw":
        return paw_base()
    return parse_structure(text)


# --- file format ----------------------------------------------------------------------------------

def render_cfi(C: CFIGraph) -> str:
    """Structure text followed by comment lines holding the base and origins.

    The labeling itself is not written, so a query cannot peek at it.
    """
    lines = [render_structure(C.structure).rstrip("\n")]
    base = render_structure(C.base).replace("\n", " ").strip()
    lines.append(f"// cfi-base: {base}")
    parts = []
    for o in C.origin:
        if o[0] == "g":
            parts.append(f"g{o[1]}")
        else:
            parts.append(f"e{o[1][0]},{o[1][1]}")
    lines.append("// cfi-origin: " + " ".join(parts))
    return "\n".join(lines) + "\n"


def parse_cfi(text: str) -> CFIGraph:
    base_txt = origin_txt = None
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("// cfi-base:"):
            base_txt = s[len("// cfi-base:"):]
        elif s.startswith("// cfi-origin:"):
            origin_txt = s[len("// cfi-origin:"):]
    if base_txt is None or origin_txt is None:
        raise CFIError("missing cfi-base or cfi-origin header")
    A = parse_structure(text)
    G = parse_structure(base_txt)
    check_base(G)
    origin = []
    for tok in origin_txt.split():
        if tok.startswith("g"):
            origin.append(("g", int(tok[1:]), None))
        elif tok.startswith("e"):
            u, v = tok[1:].split(",")
            origin.append(("e", (int(u), int(v)), None))
        else:
            raise CFIError(f"bad origin token {tok!r}")
    if len(origin) != A.universe_size:
        raise CFIError("origin list does not cover the universe")
    return CFIGraph(None, G, A, tuple(origin))
