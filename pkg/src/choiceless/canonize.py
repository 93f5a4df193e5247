"""Gurevich's canonization algorithm with witnessing automorphisms.

The algorithm repeatedly asks an *orbit chooser* for a 1-orbit of the
structure with the atoms individualized so far, individualizes one atom of
it, and stops when every atom is individualized.  The resulting labeling
``b`` induces the canon ``phi_b(A)``.  For every round, the labelings of
``(A, a u)`` and ``(A, a v)`` (with later choices resolved by the final
labeling) yield an automorphism sending ``u`` to ``v``; these maps certify
that each chosen set really was an orbit.

Choosers
--------
``LexChooser``
    The default.  Among all orderings of the atoms extending the
    individualized prefix, keep those with the lexicographically largest
    adjacency code; the chosen orbit is the set of atoms that such best
    orderings put next.  Best orderings are permuted among themselves by
    automorphisms and any two of them differ by an automorphism, so the set
    is exactly one orbit.
``BruteForceChooser``
    Orbits from the automorphism oracle, ranked by an optional
    caller-supplied key and then by best code.
``InvariantChooser``
    The first orbit of the preorder given by complete invariants.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import hfset as hf
from .hfset import HFValue
from .structure import (Signature, Structure, is_orbit_witnessed,
                        orbits_1, relabel)


class CanonError(RuntimeError):
    """A chooser broke its contract or witnessing failed."""


def _check_binary(A: Structure) -> None:
    # A k-ary relation R can be brought to this form first: add one new
    # element per tuple of R, coloured "R-tuple", and binary relations
    # P_i(t, a) saying that a is the i-th entry of tuple t.  That encoding
    # preserves automorphisms, but it is not built in here.
    for name, k in A.signature.relations:
        if k > 2:
            raise CanonError(f"relation {name} has arity {k}; only arity <= 2 is supported")


# --- best orderings ----------------------------------------------------------------

def _word(A: Structure, order: Sequence[int], j: int) -> tuple:
    """Code word contributed by position ``j`` of a (partial) ordering.

    Color class first (smaller is better, so it is negated), then for each
    earlier or equal position ``i`` and each relation the bits
    ``R(o_i, o_j)`` and, for ``i != j``, ``R(o_j, o_i)``.
    """
    a = order[j]
    w = [-A.color_of(a)]
    for i in range(j + 1):
        b = order[i]
        for (_, k), R in zip(A.signature.relations, A.rel_sets):
            if k == 1:
                if i == j:
                    w.append(1 if (a,) in R else 0)
            else:
                w.append(1 if (b, a) in R else 0)
                if i != j:
                    w.append(1 if (a, b) in R else 0)
    return tuple(w)


def best_orderings(A: Structure, prefix: Sequence[int]) -> list[tuple[int, ...]]:
    """All orderings extending ``prefix`` with maximal code (memoized on A)."""
    _check_binary(A)
    prefix = tuple(prefix)
    memo = A._cache.setdefault("best", {})
    hit = memo.get(prefix)
    if hit is not None:
        return hit
    if prefix:
        parent = memo.get(prefix[:-1])
        if parent is not None:
            k = len(prefix) - 1
            inherited = [o for o in parent if o[k] == prefix[-1]]
            if inherited:
                memo[prefix] = inherited
                return inherited
    n = A.universe_size
    frontier = [prefix]
    for j in range(len(prefix), n):
        best = None
        nxt: list[tuple[int, ...]] = []
        for pre in frontier:
            used = set(pre)
            for a in range(n):
                if a in used:
                    continue
                cand = pre + (a,)
                w = _word(A, cand, j)
                if best is None or w > best:
                    best, nxt = w, [cand]
                elif w == best:
                    nxt.append(cand)
        frontier = nxt
    memo[prefix] = frontier
    return frontier


def best_code(A: Structure, prefix: Sequence[int]) -> tuple:
    o = best_orderings(A, prefix)[0]
    return tuple(_word(A, o, j) for j in range(A.universe_size))


# --- choosers --------------------------------------------------------------------------

class LexChooser:
    """Next atoms of the best-code orderings extending the prefix."""

    name = "lex"

    def __call__(self, A: Structure, prefix: tuple[int, ...]) -> list[int] | None:
        if len(prefix) >= A.universe_size:
            return None
        k = len(prefix)
        return sorted({o[k] for o in best_orderings(A, prefix)})


RankKey = Callable[[Structure, tuple, Sequence[int]], object]


class BruteForceChooser:
    """Oracle orbits ranked by ``rank`` (if given), then by best code."""

    name = "brute"

    def __init__(self, rank: RankKey | None = None, cap: int | None = None):
        self.rank = rank
        self.cap = cap

    def __call__(self, A: Structure, prefix: tuple[int, ...]) -> list[int] | None:
        if len(prefix) >= A.universe_size:
            return None
        orbs = orbits_1(A.with_indiv(prefix), self.cap)
        used = set(prefix)
        cands = [O for O in orbs if not used & set(O)] or orbs

        def code_key(O):
            # larger code first: negate each word element
            return tuple(tuple(-x for x in w) for w in best_code(A, prefix + (O[0],)))

        if self.rank is None:
            return min(cands, key=code_key)
        return min(cands, key=lambda O: (self.rank(A, prefix, O), code_key(O)))


class InvariantChooser:
    """Least orbit of the complete-invariant preorder, disjoint from the prefix."""

    name = "invariant"

    def __call__(self, A: Structure, prefix: tuple[int, ...]) -> list[int] | None:
        if len(prefix) >= A.universe_size:
            return None
        used = set(prefix)
        classes = distinguishable_orbits(A.with_indiv(()), prefix, 1)
        for cls in classes:
            atoms = [t[0] for t in cls]
            if not used & set(atoms):
                return atoms
        return [t[0] for t in classes[0]]


DEFAULT_CHOOSER = LexChooser()


# --- the algorithm -----------------------------------------------------------------------

@dataclass
class Round:
    prefix: tuple[int, ...]
    orbit: tuple[int, ...]
    chosen: int
    witnesses: list[tuple[int, int, dict[int, int]]] = field(default_factory=list)


@dataclass
class CanonResult:
    order: tuple[int, ...]  # position -> atom
    canon: Structure
    rounds: list[Round]

    @property
    def position(self) -> dict[int, int]:
        """atom -> position"""
        return {a: i for i, a in enumerate(self.order)}


def _label_run(A: Structure, prefix: tuple[int, ...], chooser, rank_of: dict[int, int],
               memo: dict) -> tuple[int, ...]:
    """Complete ``prefix`` to a labeling, resolving choices by ``rank_of``."""
    hit = memo.get(prefix)
    if hit is not None:
        return hit
    cur = list(prefix)
    while len(cur) < A.universe_size:
        O = chooser(A, tuple(cur))
        if not O or set(O) & set(cur):
            raise CanonError(f"chooser returned {O} for prefix {cur}")
        cur.append(min(O, key=rank_of.__getitem__))
    res = tuple(cur)
    memo[prefix] = res
    return res


def witness_automorphisms(A: Structure, prefix: Sequence[int], u: int, v: int,
                          chooser=None, order: Sequence[int] | None = None,
                          memo: dict | None = None) -> dict[int, int]:
    """The map ``c_j -> d_j`` from the labelings of ``(A, prefix u)`` and
    ``(A, prefix v)``, both completed with choices resolved by ``order``."""
    chooser = chooser or DEFAULT_CHOOSER
    order = tuple(order) if order is not None else tuple(range(A.universe_size))
    rank_of = {a: i for i, a in enumerate(order)}
    memo = {} if memo is None else memo
    prefix = tuple(prefix)
    c = _label_run(A, prefix + (u,), chooser, rank_of, memo)
    d = _label_run(A, prefix + (v,), chooser, rank_of, memo)
    if len(c) != len(d):
        raise CanonError("labelings of different length")
    return {cj: dj for cj, dj in zip(c, d)}


def gurevich_canon(A: Structure, chooser=None, policy=None, witnesses: bool = True,
                   verify: bool = True) -> CanonResult:
    """Canonize ``(A, A.indiv)`` by iterated individualization.

    ``policy`` picks the atom within each orbit: ``None`` or a ChoicePolicy
    in first mode takes the smallest atom, random mode draws with its seed.
    With ``witnesses`` every round records one map per ordered pair of its
    orbit; with ``verify`` those maps are checked to witness the orbit.
    """
    _check_binary(A)
    chooser = chooser or DEFAULT_CHOOSER
    rng = None
    if policy is not None and getattr(policy, "mode", "first") == "random":
        rng = random.Random(policy.seed)
    cur = list(A.indiv)
    rounds: list[Round] = []
    while len(cur) < A.universe_size:
        O = chooser(A, tuple(cur))
        if not O:
            raise CanonError(f"chooser returned no orbit for prefix {cur}")
        if set(O) & set(cur):
            raise CanonError(f"chooser returned {O}, which meets the prefix {cur}")
        O = sorted(O)
        u = rng.choice(O) if rng is not None else O[0]
        rounds.append(Round(tuple(cur), tuple(O), u))
        cur.append(u)
    order = tuple(cur)
    pos = {a: i for i, a in enumerate(order)}
    canon = relabel(A, pos)
    if witnesses:
        memo: dict = {}
        for r in rounds:
            for x in r.orbit:
                for y in r.orbit:
                    phi = witness_automorphisms(A, r.prefix, x, y, chooser, order, memo)
                    r.witnesses.append((x, y, phi))
            if verify:
                maps = [phi for _, _, phi in r.witnesses]
                N = hf.make_set(hf.atom(a) for a in r.orbit)
                if not is_orbit_witnessed(A.with_indiv(r.prefix), [], N, maps):
                    raise CanonError(f"round with prefix {r.prefix}: orbit {r.orbit} not witnessed")
    return CanonResult(order, canon, rounds)


def canon(A: Structure, indiv: Sequence[int] | None = None, chooser=None) -> Structure:
    B = A if indiv is None else A.with_indiv(indiv)
    return gurevich_canon(B, chooser, witnesses=False).canon


# --- invariants ---------------------------------------------------------------------------

def _ordinal_tuple(t: Sequence[int]) -> HFValue:
    return hf.make_tuple([hf.von_neumann(x) for x in t])


def encode_pure(S: Structure) -> HFValue:
    """An ordered structure over ``[n]`` as an atom-free HF set."""
    rels = [hf.make_set(_ordinal_tuple(t) for t in R) for R in S.rel_sets]
    cols = hf.EMPTY if S.colors is None else hf.make_tuple(
        [hf.make_set(hf.von_neumann(a) for a in c) for c in S.colors])
    sig = hf.make_tuple([hf.von_neumann(k) for _, k in S.signature.relations])
    return hf.make_tuple([hf.von_neumann(S.universe_size), sig, hf.make_tuple(rels), cols,
                          _ordinal_tuple(S.indiv)])


def complete_invariant(A: Structure, indiv: Sequence[int] | None = None, chooser=None) -> HFValue:
    """The canon of ``(A, indiv)`` encoded in HF(∅)."""
    return encode_pure(canon(A, indiv, chooser))


def _dedup(t: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for a in t:
        if a not in out:
            out.append(a)
    return tuple(out)


def tuple_invariant(A: Structure, prefix: Sequence[int], u: Sequence[int]) -> HFValue:
    """Invariant of ``(A, prefix u)`` that also records where each ``u_i`` sits.

    Concatenation drops repeated atoms, so the canon of the deduplicated
    tuple alone would not tell ``(a, a)`` from ``(a, b)``; the position list
    restores that information.
    """
    full = _dedup(tuple(prefix) + tuple(u))
    where = [full.index(a) for a in u]
    return hf.make_tuple([complete_invariant(A, full), _ordinal_tuple(where)])


def distinguishable_orbits(A: Structure, prefix: Sequence[int], k: int) -> list[list[tuple[int, ...]]]:
    """The k-tuples of atoms grouped by invariant, classes in increasing order."""
    from itertools import product
    groups: dict[HFValue, list[tuple[int, ...]]] = {}
    for u in product(range(A.universe_size), repeat=k):
        groups.setdefault(tuple_invariant(A, prefix, u), []).append(u)
    return [sorted(groups[key]) for key in sorted(groups, key=hf.pure_sort_key)]


# --- isomorphism via canons -----------------------------------------------------------------

def canonical_form(A: Structure) -> tuple[Structure, tuple[int, ...]]:
    """Canon of ``A`` and its labeling; components are canonized separately
    and concatenated in invariant order when ``A`` is disconnected and has
    no individualized atoms."""
    if A.indiv or A.is_connected():
        res = gurevich_canon(A, witnesses=False)
        return res.canon, res.order
    parts = []
    for comp in A.components():
        sub, old = A.induced(comp)
        res = gurevich_canon(sub, witnesses=False)
        parts.append((hf.pure_sort_key(encode_pure(res.canon)), [old[i] for i in res.order]))
    parts.sort(key=lambda p: p[0])
    order = tuple(a for _, o in parts for a in o)
    return relabel(A, {a: i for i, a in enumerate(order)}), order


def iso_by_canon(A: Structure, B: Structure) -> bool:
    """Isomorphism test by canon equality."""
    if A.signature != B.signature or A.universe_size != B.universe_size:
        return False
    if len(A.indiv) != len(B.indiv):
        return False
    return canonical_form(A)[0] == canonical_form(B)[0]


# --- the generated CPT+WSC canonization program ------------------------------------------------

def generate_canon_program(signature: Signature) -> str:
    """Source of a BGS+WSC program computing the canon of a binary structure.

    The entry term evaluates to a tuple with one set of ordinal pairs per
    relation: the relation of the canon over ``[n]``.  The orbit term
    brute-forces the best-code orderings, so the program is exponential and
    meant for tiny structures.
    """
    for name, k in signature.relations:
        if k > 2:
            raise CanonError(f"relation {name} has arity {k}; only arity <= 2 is supported")
    out: list[str] = []
    w = out.append
    w("// Canonization by iterated individualization with witnessed choices.")
    w("// Generated program; the entry term yields the canon's relations.")
    w("signature { " + " ".join(f"{n}/{k};" for n, k in signature.relations) + " }")
    w("bound n^7 + 4096;")
    w("")
    w("term entries(t) := { snd(p) | p in t };")
    w("")
    w("// all tuples of distinct atoms extending iota, then the full-length ones")
    w("term prefixes(iota) :=")
    w("  iter s . {iota} cup union({ { concat(t, a) | a in atoms \\ entries(t) } | t in s });")
    w("term orderings(iota) := { t | t in prefixes(iota), card(t) = card(atoms) };")
    w("")
    w("// keep the orderings maximizing one bit of the adjacency code")
    refiners = []
    for name, k in signature.relations:
        if k == 1:
            fn = f"r_{name}"
            w(f"term {fn}(S, i, j) :=")
            w(f"  if i = j then (if (exists t in S . {name}(proj(t, j)))")
            w(f"                 then {{ t | t in S, {name}(proj(t, j)) }} else S) else S;")
            refiners.append(fn)
        else:
            fwd, bwd = f"r_{name}_in", f"r_{name}_out"
            w(f"term {fwd}(S, i, j) :=")
            w(f"  if (exists t in S . {name}(proj(t, i), proj(t, j)))")
            w(f"  then {{ t | t in S, {name}(proj(t, i), proj(t, j)) }} else S;")
            w(f"term {bwd}(S, i, j) :=")
            w("  if i = j then S else")
            w(f"  (if (exists t in S . {name}(proj(t, j), proj(t, i)))")
            w(f"   then {{ t | t in S, {name}(proj(t, j), proj(t, i)) }} else S);")
            refiners.extend([fwd, bwd])
    expr = "S"
    for fn in refiners:
        expr = f"{fn}({expr}, i, j)"
    w(f"term refine(S, i, j) := {expr};")
    w("")
    w("// bit positions (i, j) with i <= j, ordered by j and then i")
    w("term nextpos(i, j) := if i = j then kpair(#0, j cup {j}) else kpair(i cup {i}, j);")
    w("term advance(S, i, j, st) :=")
    w("  if j = card(atoms) then st else kpair(refine(S, i, j), nextpos(i, j));")
    w("term step(st, iota) :=")
    w("  if st = empty then kpair(orderings(iota), kpair(#0, #0))")
    w("  else advance(fst(st), fst(snd(st)), snd(snd(st)), st);")
    w("term best(iota) := fst(iter st . step(st, iota));")
    w("")
    w("// the orbit of the next atom of a best ordering")
    w("term s_orb(iota) :=")
    w("  if card(iota) = card(atoms) then empty else { proj(t, card(iota)) | t in best(iota) };")
    w("")
    w("// labeling with choices resolved by the order o")
    w("term t_label(o, iota) := dc x y (concat(iota, concat(x, y)); s_orb(concat(iota, x)); o);")
    w("term wmap(o, iota, u, v) :=")
    w("  { kpair(proj(t_label(o, concat(iota, u)), j), proj(t_label(o, concat(iota, v)), j))")
    w("    | j in card(atoms) };")
    w("term t_wit(o, iota) := union({ { wmap(o, iota, u, v) | v in s_orb(iota) } | u in s_orb(iota) });")
    w("")
    parts = []
    for name, k in signature.relations:
        if k == 1:
            w(f"formula psi_{name}(iota, i) :=")
            w("  wsc x y (concat(iota, concat(x, y)); s_orb(concat(iota, x));")
            w(f"           t_wit(y, concat(iota, x)); {name}(proj(x, i)));")
            w(f"term canon_{name}(iota) := {{ tup(i) | i in card(atoms), psi_{name}(iota, i) }};")
        else:
            w(f"formula psi_{name}(iota, i, j) :=")
            w("  wsc x y (concat(iota, concat(x, y)); s_orb(concat(iota, x));")
            w(f"           t_wit(y, concat(iota, x)); {name}(proj(x, i), proj(x, j)));")
            w(f"term canon_{name}(iota) :=")
            w(f"  union({{ {{ tup(i, j) | j in card(atoms), psi_{name}(iota, i, j) }} | i in card(atoms) }});")
        parts.append(f"canon_{name}(empty)")
    w("")
    w("term canon := tup(" + ", ".join(parts) + ");")
    w("entry canon;")
    return "\n".join(out) + "\n"


def decode_canon_value(v: HFValue, signature: Signature) -> list[frozenset]:
    """Turn the generated program's output into relation tuple sets."""
    items = hf.tuple_items(v)
    if items is None or len(items) != len(signature.relations):
        raise CanonError("program output is not a tuple of relations")
    out = []
    for rel in items:
        tuples = set()
        for t in rel.children:
            entries = hf.tuple_items(t)
            if entries is None:
                raise CanonError("malformed tuple in program output")
            tuples.add(tuple(hf.ordinal_value(e) for e in entries))
        out.append(frozenset(tuples))
    return out
