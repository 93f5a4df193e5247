"""Finite relational structures and brute-force group-theoretic oracles.

A :class:`Structure` is immutable and hashable.  Relations are stored as
frozensets of atom tuples, aligned with the signature.  Colors, when
present, are an ordered sequence of classes partitioning the universe; the
order of the classes is part of the structure (a total preorder).

The oracles here (automorphisms, isomorphism, orbits) are exhaustive
backtracking searches.  They exist to cross-check the real algorithms and
refuse to run above a configurable universe size.
"""

from __future__ import annotations

import os
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from . import hfset as hf
from .hfset import HFValue

DEFAULT_ORACLE_CAP = 10


class StructureError(ValueError):
    """Malformed structure or structure text."""


class OracleCapExceeded(RuntimeError):
    """The brute-force oracle refused an instance above its size cap."""


def oracle_cap() -> int:
    raw = os.environ.get("CHOICELESS_ORACLE_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise StructureError(f"CHOICELESS_ORACLE_CAP is not an integer: {raw!r}")
    return DEFAULT_ORACLE_CAP


@dataclass(frozen=True)
class Signature:
    relations: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.relations]
        if len(set(names)) != len(names):
            raise StructureError("relation names must be unique")
        for n, k in self.relations:
            if k < 1:
                raise StructureError(f"relation {n} must have arity >= 1")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.relations]

    def arity(self, name: str) -> int:
        for n, k in self.relations:
            if n == name:
                return k
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.relations)


GRAPH = Signature((("E", 2),))


@dataclass(frozen=True)
class Structure:
    signature: Signature
    universe_size: int
    rel_sets: tuple[frozenset, ...]
    colors: tuple[frozenset, ...] | None = None
    indiv: tuple[int, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        n = self.universe_size
        if len(self.rel_sets) != len(self.signature.relations):
            raise StructureError("one tuple set per relation is required")
        for (name, k), tuples in zip(self.signature.relations, self.rel_sets):
            for t in tuples:
                if len(t) != k:
                    raise StructureError(f"tuple {t} in {name} does not have arity {k}")
                if any(not 0 <= a < n for a in t):
                    raise StructureError(f"tuple {t} in {name} leaves the universe")
        if len(set(self.indiv)) != len(self.indiv):
            raise StructureError("indiv must not contain duplicates")
        if any(not 0 <= a < n for a in self.indiv):
            raise StructureError("indiv atom outside the universe")
        if self.colors is not None:
            seen: set[int] = set()
            for cls in self.colors:
                if not cls:
                    raise StructureError("empty color class")
                if seen & cls:
                    raise StructureError("color classes overlap")
                seen |= cls
            if seen != set(range(n)):
                raise StructureError("color classes must partition the universe")

    # -- construction -------------------------------------------------------

    @classmethod
    def make(cls, signature: Signature, universe_size: int,
             relations: Mapping[str, Iterable[Sequence[int]]],
             colors: Iterable[Iterable[int]] | None = None,
             indiv: Sequence[int] = ()) -> "Structure":
        unknown = set(relations) - set(signature.names)
        if unknown:
            raise StructureError(f"unknown relations {sorted(unknown)}")
        rel_sets = tuple(frozenset(tuple(t) for t in relations.get(name, ()))
                         for name in signature.names)
        cols = None if colors is None else tuple(frozenset(c) for c in colors)
        return cls(signature, universe_size, rel_sets, cols, tuple(indiv))

    # -- access -------------------------------------------------------------

    @property
    def relations(self) -> dict[str, frozenset]:
        return dict(zip(self.signature.names, self.rel_sets))

    def rel(self, name: str) -> frozenset:
        return self.rel_sets[self.signature.names.index(name)]

    @property
    def atoms(self) -> range:
        return range(self.universe_size)

    def color_of(self, a: int) -> int:
        """Index of the color class of ``a`` (0 if uncolored)."""
        if self.colors is None:
            return 0
        table = self._cache.get("color_of")
        if table is None:
            table = {}
            for i, cls in enumerate(self.colors):
                for x in cls:
                    table[x] = i
            self._cache["color_of"] = table
        return table[a]

    def with_indiv(self, indiv: Sequence[int]) -> "Structure":
        return Structure(self.signature, self.universe_size, self.rel_sets,
                         self.colors, tuple(indiv))

    def with_colors(self, colors) -> "Structure":
        cols = None if colors is None else tuple(frozenset(c) for c in colors)
        return Structure(self.signature, self.universe_size, self.rel_sets,
                         cols, self.indiv)

    def reduct(self, keep: Iterable[str]) -> "Structure":
        keep = set(keep)
        sig = Signature(tuple((n, k) for n, k in self.signature.relations if n in keep))
        rels = tuple(s for (n, _), s in zip(self.signature.relations, self.rel_sets)
                     if n in keep)
        return Structure(sig, self.universe_size, rels, self.colors, self.indiv)

    def neighbors(self, a: int) -> set[int]:
        """Atoms sharing some relation tuple with ``a`` (Gaifman graph)."""
        adj = self._cache.get("gaifman")
        if adj is None:
            adj = [set() for _ in self.atoms]
            for tuples in self.rel_sets:
                for t in tuples:
                    for x in t:
                        for y in t:
                            if x != y:
                                adj[x].add(y)
            self._cache["gaifman"] = adj
        return adj[a]

    def components(self) -> list[list[int]]:
        """Connected components of the Gaifman graph, each sorted."""
        seen: set[int] = set()
        out = []
        for s in self.atoms:
            if s in seen:
                continue
            comp = []
            queue = deque([s])
            seen.add(s)
            while queue:
                v = queue.popleft()
                comp.append(v)
                for w in sorted(self.neighbors(v)):
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return self.universe_size <= 1 or len(self.components()) == 1

    def induced(self, atoms: Sequence[int]) -> tuple["Structure", list[int]]:
        """Substructure on ``atoms`` renumbered 0..; returns it with the old ids."""
        old = list(atoms)
        new = {a: i for i, a in enumerate(old)}
        rels = tuple(frozenset(tuple(new[x] for x in t) for t in s if all(x in new for x in t))
                     for s in self.rel_sets)
        cols = None
        if self.colors is not None:
            cols = tuple(frozenset(new[x] for x in c if x in new) for c in self.colors)
            cols = tuple(c for c in cols if c)
        indiv = tuple(new[a] for a in self.indiv if a in new)
        return Structure(self.signature, len(old), rels, cols, indiv), old

    def __repr__(self):
        return f"Structure(n={self.universe_size}, " + render_structure(self).replace("\n", " ") + ")"


def graph(n: int, edges: Iterable[tuple[int, int]], colors=None, indiv=()) -> Structure:
    """Undirected simple graph as a symmetric binary relation ``E``."""
    e = set()
    for u, v in edges:
        if u == v:
            raise StructureError("graphs here are loop-free")
        e.add((u, v))
        e.add((v, u))
    return Structure.make(GRAPH, n, {"E": e}, colors, indiv)


def graph_edges(A: Structure, name: str = "E") -> list[tuple[int, int]]:
    return sorted((u, v) for u, v in A.rel(name) if u < v)


def relabel(A: Structure, phi: Mapping[int, int] | Sequence[int]) -> Structure:
    """The image of ``A`` under the bijection ``phi`` of its universe."""
    if not isinstance(phi, Mapping):
        phi = dict(enumerate(phi))
    if sorted(phi) != list(A.atoms) or sorted(phi.values()) != list(A.atoms):
        raise StructureError("relabel needs a bijection of the universe")
    rels = tuple(frozenset(tuple(phi[x] for x in t) for t in s) for s in A.rel_sets)
    cols = None if A.colors is None else tuple(frozenset(phi[x] for x in c) for c in A.colors)
    return Structure(A.signature, A.universe_size, rels, cols, tuple(phi[a] for a in A.indiv))


def disjoint_union(A: Structure, B: Structure) -> Structure:
    """``A ⊎ B`` with B's atoms shifted by ``|A|``.

    Colors are merged class-by-class (class i of A with class i of B) when
    both sides are colored; indiv tuples are concatenated.  Which atoms came
    from which side is ``range(|A|)`` versus the rest.
    """
    if A.signature != B.signature:
        raise StructureError("disjoint union needs equal signatures")
    s = A.universe_size
    rels = tuple(a | frozenset(tuple(x + s for x in t) for t in b)
                 for a, b in zip(A.rel_sets, B.rel_sets))
    cols = None
    if A.colors is not None or B.colors is not None:
        ca = list(A.colors) if A.colors is not None else [frozenset(A.atoms)]
        cb = [frozenset(x + s for x in c) for c in
              (B.colors if B.colors is not None else [frozenset(B.atoms)])]
        cols = []
        for i in range(max(len(ca), len(cb))):
            cls = (ca[i] if i < len(ca) else frozenset()) | (cb[i] if i < len(cb) else frozenset())
            cols.append(cls)
        cols = tuple(c for c in cols if c)
    indiv = A.indiv + tuple(a + s for a in B.indiv)
    return Structure(A.signature, s + B.universe_size, rels, cols, indiv)


# --- text format --------------------------------------------------------------

_REL_HEAD = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:/(\d+))?$")


def parse_structure(text: str) -> Structure:
    """Parse ``universe N; E: (0,1) (1,2); colors: [0][1,2]; indiv: 0;``.

    Relation headers may carry an explicit arity (``R/3:``); otherwise it
    is taken from the first tuple (an empty relation without arity is
    binary).  Comments start with ``//`` or ``%``.
    """
    text = re.sub(r"(//|%)[^\n]*", "", text)
    stmts = [s.strip() for s in text.split(";")]
    stmts = [s for s in stmts if s]
    if not stmts or not stmts[0].startswith("universe"):
        raise StructureError("structure text must start with 'universe N;'")
    try:
        n = int(stmts[0][len("universe"):].strip())
    except ValueError:
        raise StructureError(f"bad universe header: {stmts[0]!r}")
    sig: list[tuple[str, int]] = []
    rels: dict[str, set] = {}
    colors = None
    indiv: tuple[int, ...] = ()
    for st in stmts[1:]:
        if ":" not in st:
            raise StructureError(f"expected 'name: ...' in {st!r}")
        head, body = (p.strip() for p in st.split(":", 1))
        if head == "colors":
            classes = re.findall(r"\[([^\]]*)\]", body)
            if re.sub(r"\[[^\]]*\]", "", body).strip():
                raise StructureError(f"bad colors clause: {body!r}")
            colors = [[int(x) for x in re.split(r"[\s,]+", c.strip()) if x] for c in classes]
            continue
        if head == "indiv":
            indiv = tuple(int(x) for x in re.split(r"[\s,]+", body) if x)
            continue
        m = _REL_HEAD.match(head)
        if not m:
            raise StructureError(f"bad relation name {head!r}")
        name = m.group(1)
        tuples = [tuple(int(x) for x in re.split(r"\s*,\s*", t.strip()) if x != "")
                  for t in re.findall(r"\(([^)]*)\)", body)]
        if re.sub(r"\([^)]*\)", "", body).strip():
            raise StructureError(f"bad tuple list for {name}: {body!r}")
        arity = int(m.group(2)) if m.group(2) else (len(tuples[0]) if tuples else 2)
        if name in rels:
            raise StructureError(f"relation {name} given twice")
        sig.append((name, arity))
        rels[name] = set(tuples)
    return Structure.make(Signature(tuple(sig)), n, rels, colors, indiv)


def render_structure(A: Structure) -> str:
    """Canonical text rendering (sorted tuples, one clause per line)."""
    lines = [f"universe {A.universe_size};"]
    for (name, k), tuples in zip(A.signature.relations, A.rel_sets):
        body = " ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(tuples))
        lines.append(f"{name}/{k}: {body};" if body else f"{name}/{k}: ;")
    if A.colors is not None:
        lines.append("colors: " + "".join("[" + ",".join(map(str, sorted(c))) + "]"
                                          for c in A.colors) + ";")
    if A.indiv:
        lines.append("indiv: " + " ".join(map(str, A.indiv)) + ";")
    return "\n".join(lines)


# --- backtracking isomorphism search -------------------------------------------

def _atom_invariant(A: Structure, a: int) -> tuple:
    pos = A.indiv.index(a) if a in A.indiv else -1
    counts = []
    for (_, k), tuples in zip(A.signature.relations, A.rel_sets):
        row = [0] * (k + 1)
        for t in tuples:
            for i, x in enumerate(t):
                if x == a:
                    row[i] += 1
            if k > 1 and all(x == a for x in t):
                row[k] += 1
        counts.append(tuple(row))
    return (A.color_of(a), pos, tuple(counts))


class _Index:
    """Per-atom tuple lists for incremental relation checks."""

    def __init__(self, A: Structure):
        self.A = A
        self.by_atom: list[list[tuple[int, tuple]]] = [[] for _ in A.atoms]
        for r, tuples in enumerate(A.rel_sets):
            for t in tuples:
                for x in set(t):
                    self.by_atom[x].append((r, t))
        self.inv = [_atom_invariant(A, a) for a in A.atoms]


def _index(A: Structure) -> _Index:
    ix = A._cache.get("index")
    if ix is None:
        ix = A._cache["index"] = _Index(A)
    return ix


def _bfs_order(A: Structure) -> list[int]:
    order: list[int] = []
    seen: set[int] = set()
    starts = sorted(A.atoms, key=lambda a: (a not in A.indiv, -len(A.neighbors(a)), a))
    for s in starts:
        if s in seen:
            continue
        queue = deque([s])
        seen.add(s)
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in sorted(A.neighbors(v), key=lambda w: (-len(A.neighbors(w)), w)):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return order


def _check_cap(A: Structure, cap: int | None) -> None:
    limit = oracle_cap() if cap is None else cap
    if A.universe_size > limit:
        raise OracleCapExceeded(
            f"universe of size {A.universe_size} exceeds the oracle cap {limit}")


def _search(A: Structure, B: Structure, forced: Mapping[int, int] | None = None,
            cap: int | None = None) -> Iterator[dict[int, int]]:
    """Enumerate isomorphisms A -> B respecting colors (by class position)
    and indiv tuples (positionally), extending ``forced``."""
    _check_cap(A, cap)
    if (A.signature != B.signature or A.universe_size != B.universe_size
            or len(A.indiv) != len(B.indiv)
            or (A.colors is None) != (B.colors is None)):
        return
    if A.colors is not None and [len(c) for c in A.colors] != [len(c) for c in B.colors]:
        return
    if [len(s) for s in A.rel_sets] != [len(s) for s in B.rel_sets]:
        return
    ia, ib = _index(A), _index(B)
    if sorted(ia.inv) != sorted(ib.inv):
        return
    fmap: dict[int, int] = dict(zip(A.indiv, B.indiv))
    if forced:
        for a, b in forced.items():
            if fmap.get(a, b) != b:
                return
            fmap[a] = b
        if len(set(fmap.values())) != len(fmap):
            return
    candidates_by_inv: dict[tuple, list[int]] = {}
    for b in B.atoms:
        candidates_by_inv.setdefault(ib.inv[b], []).append(b)
    order = A._cache.get("bfs")
    if order is None:
        order = A._cache["bfs"] = _bfs_order(A)
    order = list(order)
    order.sort(key=lambda a: a not in fmap)  # forced atoms first, BFS otherwise (stable)
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    relsA, relsB = A.rel_sets, B.rel_sets

    def consistent(a: int, b: int) -> bool:
        if ia.inv[a] != ib.inv[b]:
            return False
        for r, t in ia.by_atom[a]:
            img = []
            for x in t:
                y = b if x == a else fwd.get(x)
                if y is None:
                    break
                img.append(y)
            else:
                if tuple(img) not in relsB[r]:
                    return False
        for r, t in ib.by_atom[b]:
            pre = []
            for y in t:
                x = a if y == b else bwd.get(y)
                if x is None:
                    break
                pre.append(x)
            else:
                if tuple(pre) not in relsA[r]:
                    return False
        return True

    def rec(i: int) -> Iterator[dict[int, int]]:
        if i == len(order):
            yield dict(fwd)
            return
        a = order[i]
        if a in fmap:
            cands = [fmap[a]]
        else:
            cands = candidates_by_inv.get(ia.inv[a], [])
        for b in cands:
            if b in bwd or not consistent(a, b):
                continue
            fwd[a] = b
            bwd[b] = a
            yield from rec(i + 1)
            del fwd[a]
            del bwd[b]

    yield from rec(0)


def automorphisms(A: Structure, cap: int | None = None) -> list[dict[int, int]]:
    """All automorphisms of ``(A, colors, indiv)`` as dicts."""
    return list(_search(A, A, cap=cap))


def count_automorphisms(A: Structure, cap: int | None = None) -> int:
    return sum(1 for _ in _search(A, A, cap=cap))


def find_isomorphism(A: Structure, B: Structure, cap: int | None = None) -> dict[int, int] | None:
    return next(_search(A, B, cap=cap), None)


def is_isomorphic(A: Structure, B: Structure, cap: int | None = None) -> bool:
    """Exact isomorphism test respecting colors and indiv positionally."""
    return find_isomorphism(A, B, cap) is not None


def maps_tuple(A: Structure, src: Sequence[int], dst: Sequence[int],
               cap: int | None = None) -> dict[int, int] | None:
    """Some automorphism of ``A`` sending tuple ``src`` to ``dst`` (or None)."""
    forced: dict[int, int] = {}
    for a, b in zip(src, dst):
        if forced.get(a, b) != b:
            return None
        forced[a] = b
    if len(set(forced.values())) != len(forced):
        return None
    return next(_search(A, A, forced, cap=cap), None)


def orbits_k(A: Structure, k: int, cap: int | None = None) -> list[list[tuple[int, ...]]]:
    """Partition of ``A^k`` into orbits of ``Aut(A, colors, indiv)``.

    Classes are sorted internally and listed by their smallest tuple.
    """
    _check_cap(A, cap)
    memo = A._cache.setdefault("orbits", {})
    if k in memo:
        return [list(c) for c in memo[k]]
    from itertools import product
    tuples = list(product(A.atoms, repeat=k))
    parent = {t: t for t in tuples}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    # First collect a generating set lazily: any map found is applied to
    # every tuple, which usually merges many classes at once.
    for t in tuples:
        for s in tuples:
            if s <= t:
                continue
            if find(s) == find(t):
                continue
            phi = maps_tuple(A, t, s, cap)
            if phi is None:
                continue
            for u in tuples:
                img = tuple(phi[x] for x in u)
                ru, ri = find(u), find(img)
                if ru != ri:
                    parent[max(ru, ri)] = min(ru, ri)
    classes: dict[tuple, list] = {}
    for t in tuples:
        classes.setdefault(find(t), []).append(t)
    out = sorted((sorted(c) for c in classes.values()), key=lambda c: c[0])
    memo[k] = out
    return [list(c) for c in out]


def orbits_1(A: Structure, cap: int | None = None) -> list[list[int]]:
    return [[t[0] for t in cls] for cls in orbits_k(A, 1, cap)]


# --- witnesses -------------------------------------------------------------------

def encode_map(phi: Mapping[int, int]) -> HFValue:
    """A map on atoms as the HF set of Kuratowski pairs ``(a, phi(a))``."""
    return hf.make_set(hf.kuratowski_pair(hf.atom(a), hf.atom(b)) for a, b in phi.items())


def decode_witnesses(w: HFValue) -> tuple[list[dict[int, int]], list[str]]:
    """Decode each element of ``w`` that is a functional set of atom pairs.

    Returns the maps and a list of diagnostics for skipped elements.
    """
    maps: list[dict[int, int]] = []
    notes: list[str] = []
    if not w.is_set:
        return maps, [f"witness value is not a set: {hf.render(w)}"]
    for elem in w.children:
        if not elem.is_set:
            notes.append(f"skipped non-set witness {hf.render(elem)}")
            continue
        m: dict[int, int] = {}
        ok = True
        for p in elem.children:
            comps = hf.pair_components(p)
            if comps is None or not (comps[0].is_atom and comps[1].is_atom):
                ok = False
                break
            a, b = comps[0].index, comps[1].index
            if m.get(a, b) != b:
                ok = False
                break
            m[a] = b
        if ok:
            maps.append(m)
        else:
            notes.append(f"skipped malformed witness {hf.render(elem)}")
    return maps, notes


def is_automorphism(A: Structure, phi: Mapping[int, int]) -> bool:
    """Is ``phi`` a total bijection of A's universe preserving relations,
    color classes and the indiv tuple?"""
    n = A.universe_size
    if len(phi) != n or set(phi) != set(range(n)) or set(phi.values()) != set(range(n)):
        return False
    for tuples in A.rel_sets:
        for t in tuples:
            if tuple(phi[x] for x in t) not in tuples:
                return False
    if A.colors is not None:
        for cls in A.colors:
            if frozenset(phi[x] for x in cls) != cls:
                return False
    return all(phi[a] == a for a in A.indiv)


def is_orbit_witnessed(A: Structure, stabilize: Sequence[HFValue], N: HFValue,
                       M: Iterable[Mapping[int, int]]) -> bool:
    """Does ``M`` witness ``N`` as an orbit of ``(A, stabilize)``?

    Every map must be an automorphism of ``A`` fixing each value of
    ``stabilize`` (as HF sets), and every ordered pair of elements of ``N``
    must be connected by one of the maps.
    """
    if not N.is_set:
        return False
    maps = list(M)
    for phi in maps:
        if not is_automorphism(A, phi):
            return False
        for s in stabilize:
            if hf.apply_permutation(s, phi, check=False) is not s:
                return False
    elems = N.children
    if not elems:
        return True
    # b = c counts too: a singleton needs some map fixing its element
    reach: dict[HFValue, set[HFValue]] = {b: set() for b in elems}
    members = N.members()
    for phi in maps:
        for b in elems:
            c = hf.apply_permutation(b, phi, check=False)
            if c in members:
                reach[b].add(c)
    return all(len(reach[b]) == len(elems) for b in elems)
