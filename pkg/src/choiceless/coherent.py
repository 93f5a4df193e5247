"""Coherent configurations (2-dimensional Weisfeiler-Leman) and algebraic sketches.

Colors are named canonically by rank: every refinement round builds, for each
pair, a signature made of current color ranks only, and the new ranks are the
positions of the signatures in sorted order.  Isomorphic structures therefore
get identical color names without any canonization.

The sketch of a structure is computed from its coloring, and two further
operations work on sketches alone: the sketch of a disjoint union from the
component sketches, and the sketch of an induced substructure reduct.  Both
run the same refinement "algebraically", on a coherent algebra known to
refine the target configuration, so their output coincides with the direct
computation on the concrete structure.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .structure import Structure

DIAG = "="


class CoherentError(ValueError):
    pass


def base_relations(A: Structure) -> list[str]:
    """Names of the relations a pair coloring must refine.

    ``=`` is the diagonal; vertex colors, individualized positions and unary
    relations become subsets of the diagonal.
    """
    names = [DIAG]
    for name, k in A.signature.relations:
        if k > 2:
            raise CoherentError(f"relation {name} has arity {k}; only arity <= 2 is supported")
        names.append(name)
    if A.colors is not None:
        names.extend(f"color:{i}" for i in range(len(A.colors)))
    names.extend(f"indiv:{i}" for i in range(len(A.indiv)))
    return names


def _initial(A: Structure) -> dict[tuple[int, int], tuple]:
    n = A.universe_size
    ind = {a: i for i, a in enumerate(A.indiv)}
    out = {}
    for u in range(n):
        for v in range(n):
            rels = []
            if u == v:
                rels.append(DIAG)
            for (name, k), R in zip(A.signature.relations, A.rel_sets):
                if (k == 2 and (u, v) in R) or (k == 1 and u == v and (u,) in R):
                    rels.append(name)
            if u == v:
                if A.colors is not None:
                    rels.append(f"color:{A.color_of(u)}")
                if u in ind:
                    rels.append(f"indiv:{ind[u]}")
            out[(u, v)] = (u == v, tuple(sorted(rels)))
    return out


def _rank(sigs: Mapping) -> dict:
    order = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
    return {k: order[s] for k, s in sigs.items()}


@dataclass(frozen=True)
class CoherentConfig:
    n: int
    color: tuple[tuple[int, ...], ...]   # color[u][v]
    k: int
    fibers: frozenset[int]
    inverse: tuple[int, ...]
    refines: tuple[frozenset[str], ...]   # color -> base relations containing it

    def classes(self) -> list[frozenset[tuple[int, int]]]:
        out = [set() for _ in range(self.k)]
        for u in range(self.n):
            for v in range(self.n):
                out[self.color[u][v]].add((u, v))
        return [frozenset(c) for c in out]

    def partition(self) -> frozenset[frozenset[tuple[int, int]]]:
        return frozenset(self.classes())

    def q(self, R: int, S: int, T: int) -> int:
        """Intersection number, read off one representative of ``R``."""
        u, v = next(iter(self.classes()[R]))
        return sum(1 for w in range(self.n) if self.color[u][w] == S and self.color[w][v] == T)


def _wl_signature(c: int, cinv: int, counts: Counter) -> tuple:
    return (c, cinv, tuple(sorted(counts.items())))


def refine_2wl(A: Structure) -> CoherentConfig:
    """Coarsest coherent configuration refining A, with canonical color names."""
    n = A.universe_size
    init = _initial(A)
    col = _rank(init)
    refines_of = {p: frozenset(init[p][1]) for p in init}
    classes = len(set(col.values()))
    while True:
        sigs = {}
        for u in range(n):
            for v in range(n):
                cnt = Counter((col[(u, w)], col[(w, v)]) for w in range(n))
                sigs[(u, v)] = _wl_signature(col[(u, v)], col[(v, u)], cnt)
        new = _rank(sigs)
        k = len(set(new.values()))
        col = new
        if k == classes:
            break
        classes = k
    matrix = tuple(tuple(col[(u, v)] for v in range(n)) for u in range(n))
    inverse = [0] * classes
    refines: list[frozenset[str]] = [frozenset()] * classes
    fibers = set()
    for (u, v), c in col.items():
        inverse[c] = col[(v, u)]
        refines[c] = refines_of[(u, v)]
        if u == v:
            fibers.add(c)
    return CoherentConfig(n, matrix, classes, frozenset(fibers), tuple(inverse), tuple(refines))


# --- sketches ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Sketch:
    tau: tuple[str, ...]
    sigma: int
    subset: frozenset[tuple[int, str]]
    q: tuple[tuple[tuple[int, int, int], int], ...]  # sorted, nonzero entries only

    def qmap(self) -> dict[tuple[int, int, int], int]:
        return dict(self.q)

    def render(self) -> str:
        lines = ["tau: " + " ".join(self.tau), f"sigma: {self.sigma} colors",
                 "subset: " + " ".join(f"({x},{r})" for x, r in sorted(self.subset,
                                                                      key=lambda p: (p[0], p[1])))]
        lines.append("q: " + " ".join(f"({r},{s},{t})={m}" for (r, s, t), m in self.q))
        return "\n".join(lines) + "\n"


def _sketch_from_q(tau, k, refines, qd) -> Sketch:
    subset = frozenset((c, r) for c in range(k) for r in refines[c])
    return Sketch(tuple(tau), k, subset, tuple(sorted((key, m) for key, m in qd.items() if m)))


def sketch(A: Structure) -> Sketch:
    cc = refine_2wl(A)
    n = A.universe_size
    qd: Counter = Counter()
    seen = set()
    for u in range(n):
        for v in range(n):
            R = cc.color[u][v]
            if R in seen:
                continue
            seen.add(R)
            for w in range(n):
                qd[(R, cc.color[u][w], cc.color[w][v])] += 1
    return _sketch_from_q(base_relations(A), cc.k, cc.refines, qd)


class _Algebra:
    """Structure constants of a coherent configuration, read from a sketch."""

    def __init__(self, s: Sketch):
        self.s = s
        self.q = s.qmap()
        self.colors = range(s.sigma)
        refines: list[set[str]] = [set() for _ in self.colors]
        for c, r in s.subset:
            refines[c].add(r)
        self.refines = [frozenset(r) for r in refines]
        self.fibers = [c for c in self.colors if DIAG in self.refines[c]]
        self.source = {}
        self.target = {}
        for (r, s_, t), m in self.q.items():
            if s_ in self.fibers and t == r and m:
                self.source[r] = s_
            if t in self.fibers and s_ == r and m:
                self.target[r] = t
        self.inverse = {}
        for R in self.colors:
            X = self.source[R]
            for T in self.colors:
                if self.q.get((X, R, T)):
                    self.inverse[R] = T
        self.valency = {R: self.q.get((self.source[R], R, self.inverse[R]), 0) for R in self.colors}
        self.size = {X: sum(self.valency[S] for S in self.colors
                            if self.source[S] == X and self.target[S] == X) for X in self.fibers}


def _algebraic_wl(colors: Sequence, init: Mapping, inverse: Mapping, q: Mapping) -> dict:
    """Run the refinement on a coherent algebra refining the target coloring.

    ``q`` maps each color ``R`` to a dict ``(S, T) -> q(R, S, T)``.  Returns
    the final rank of every algebra color, named exactly as the concrete
    refinement would name the corresponding pairs.
    """
    col = _rank({R: init[R] for R in colors})
    classes = len(set(col.values()))
    while True:
        sigs = {}
        for R in colors:
            cnt: Counter = Counter()
            for (S, T), m in q[R].items():
                cnt[(col[S], col[T])] += m
            sigs[R] = _wl_signature(col[R], col[inverse[R]], cnt)
        new = _rank(sigs)
        k = len(set(new.values()))
        col = new
        if k == classes:
            return col
        classes = k


def _coarsen(tau, colors, refines, inverse, q) -> Sketch:
    init = {R: (DIAG in refines[R], tuple(sorted(refines[R]))) for R in colors}
    final = _algebraic_wl(colors, init, inverse, q)
    k = len(set(final.values()))
    new_refines: list[frozenset[str]] = [frozenset()] * k
    rep = {}
    for R in colors:
        new_refines[final[R]] = refines[R]
        rep.setdefault(final[R], R)
    qd: Counter = Counter()
    for Rn, R in rep.items():
        for (S, T), m in q[R].items():
            qd[(Rn, final[S], final[T])] += m
    return _sketch_from_q(tau, k, new_refines, qd)


def sketch_of_union(sA: Sketch, sB: Sketch) -> Sketch:
    """Sketch of the disjoint union, from the component sketches alone.

    The direct sum of the two configurations, with one crossing color
    ``X x Y`` per pair of fibers from different sides, is coherent and
    refines the union's configuration; coarsening it yields the answer.
    """
    if sA.tau != sB.tau:
        raise CoherentError(f"signature mismatch: {sA.tau} vs {sB.tau}")
    A, B = _Algebra(sA), _Algebra(sB)
    colors: list = [("a", R) for R in A.colors] + [("b", R) for R in B.colors]
    colors += [("ab", X, Y) for X in A.fibers for Y in B.fibers]
    colors += [("ba", Y, X) for Y in B.fibers for X in A.fibers]
    side = {"a": A, "b": B}
    other = {"a": "b", "b": "a"}

    def src(c):
        return ("a" if c[0] in ("a", "ab") else "b"), (side[c[0]].source[c[1]] if len(c) == 2 else c[1])

    def tgt(c):
        if len(c) == 2:
            return c[0], side[c[0]].target[c[1]]
        return ("b" if c[0] == "ab" else "a"), c[2]

    def cross(p, P, r, Q):
        return ("ab" if p == "a" else "ba", P, Q)

    refines = {c: (side[c[0]].refines[c[1]] if len(c) == 2 else frozenset()) for c in colors}
    inverse = {}
    for c in colors:
        if len(c) == 2:
            inverse[c] = (c[0], side[c[0]].inverse[c[1]])
        else:
            inverse[c] = ("ba" if c[0] == "ab" else "ab", c[2], c[1])
    q: dict = {}
    for R in colors:
        p, P = src(R)
        r, Qf = tgt(R)
        entries: Counter = Counter()
        if len(R) == 2:
            # both ends on one side: middle vertex on the same side, or any fiber across
            alg = side[p]
            for (R0, S0, T0), m in alg.q.items():
                if R0 == R[1]:
                    entries[((p, S0), (p, T0))] += m
            o = other[p]
            for W in side[o].fibers:
                entries[(cross(p, P, o, W), cross(o, W, p, Qf))] += side[o].size[W]
        else:
            # u on side p in fiber P, v on side r in fiber Qf
            for S in side[p].colors:
                if side[p].source[S] == P:
                    W = side[p].target[S]
                    entries[((p, S), cross(p, W, r, Qf))] += side[p].valency[S]
            for T in side[r].colors:
                if side[r].target[T] == Qf:
                    W = side[r].source[T]
                    entries[(cross(p, P, r, W), (r, T))] += side[r].valency[side[r].inverse[T]]
        q[R] = dict(entries)
    return _coarsen(sA.tau, colors, refines, inverse, q)


def restrict_sketch(s: Sketch, keep: Iterable[str], C: Iterable[int]) -> Sketch:
    """Sketch of the substructure induced on the fibers ``C``, reduced to ``keep``.

    Names of base relations not in ``keep`` are dropped; the diagonal and
    vertex-class names stay.
    """
    alg = _Algebra(s)
    C = set(C)
    bad = C - set(alg.fibers)
    if bad:
        raise CoherentError(f"colors {sorted(bad)} are not fibers")
    keep = set(keep)
    dropped = {r for r in s.tau if r not in keep and r != DIAG
               and not r.startswith(("color:", "indiv:"))}
    tau = tuple(r for r in s.tau if r not in dropped)
    colors = [R for R in alg.colors if alg.source[R] in C and alg.target[R] in C]
    inside = set(colors)
    refines = {R: alg.refines[R] - dropped for R in colors}
    q = {R: {} for R in colors}
    for (R, S, T), m in alg.q.items():
        if R in inside and S in inside and T in inside:
            q[R][(S, T)] = m
    return _coarsen(tau, colors, refines, alg.inverse, q)


def fiber_sets(A: Structure, cc: CoherentConfig | None = None) -> dict[int, list[int]]:
    """Fiber color -> its vertices."""
    cc = cc or refine_2wl(A)
    out: dict[int, list[int]] = {}
    for u in range(A.universe_size):
        out.setdefault(cc.color[u][u], []).append(u)
    return out


# --- checks and oracles ------------------------------------------------------------------------

def check_axioms(A: Structure, cc: CoherentConfig) -> list[str]:
    """Violations of the coherent-configuration axioms, found by direct counting."""
    n = A.universe_size
    problems = []
    cls = cc.classes()
    init = _initial(A)
    for c, members in enumerate(cls):
        diag = {u == v for u, v in members}
        if len(diag) != 1:
            problems.append(f"color {c} meets the diagonal partially")
        inv = {(v, u) for u, v in members}
        if frozenset(inv) not in cc.partition():
            problems.append(f"color {c} has no inverse color")
        if len({init[p][1] for p in members}) != 1:
            problems.append(f"color {c} does not refine the base relations")
    for R, members in enumerate(cls):
        counts = None
        for u, v in members:
            cnt = Counter((cc.color[u][w], cc.color[w][v]) for w in range(n))
            if counts is None:
                counts = cnt
            elif cnt != counts:
                problems.append(f"intersection numbers not constant on color {R}")
                break
    return problems


def naive_closure(A: Structure) -> frozenset[frozenset[tuple[int, int]]]:
    """Coherent closure by forced splits, one class at a time.

    Start from the partition induced by the base relations and the diagonal;
    whenever the classes of a class's members under inversion or the
    triangle counts differ, split it.  Every split is forced, so the fixed
    point is the coarsest coherent partition.
    """
    n = A.universe_size
    init = _initial(A)
    groups: dict = {}
    for p, c in init.items():
        groups.setdefault(c, set()).add(p)
    parts = [frozenset(g) for g in groups.values()]
    changed = True
    while changed:
        changed = False
        where = {p: i for i, part in enumerate(parts) for p in part}
        for i, part in enumerate(parts):
            buckets: dict = {}
            for u, v in part:
                key = (where[(v, u)], frozenset(Counter(
                    (where[(u, w)], where[(w, v)]) for w in range(n)).items()))
                buckets.setdefault(key, set()).add((u, v))
            if len(buckets) > 1:
                parts = parts[:i] + [frozenset(b) for b in buckets.values()] + parts[i + 1:]
                changed = True
                break
    return frozenset(parts)
