"""Denotational evaluator for BGS+WSC with polynomial bounds.

The evaluator follows the set-theoretic semantics literally, with these
resource rules:

* every term value whose ``tc_size`` exceeds the active bound ``p(n)``
  raises :class:`BoundExceeded`; the innermost enclosing iteration or
  deterministic-choice operator turns it into the empty set, a WSC operator
  turns it into the error marker, and at top level it is the error marker;
* iteration stops with the empty set if no fixed point is reached within
  ``p(n)`` rounds;
* a WSC operator whose path is longer than ``p(n)`` or whose path is not
  witnessed yields the error marker, which propagates to the top.

WSC operators are evaluated along one path (the primary mode).
:meth:`Evaluator.wsc_exhaustive` materializes the whole choice tree for
small inputs and is used as an oracle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import hfset as hf
from . import syntax as S
from .hfset import DAGGER, EMPTY, HFValue
from .structure import Structure, decode_witnesses, is_orbit_witnessed
from .syntax import Polynomial


class Dagger(Exception):
    """Evaluation aborted with the error marker."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class BoundExceeded(Exception):
    """A value outgrew the polynomial bound."""


class TreeCapExceeded(RuntimeError):
    """The exhaustive oracle refused a choice tree above its node cap."""


@dataclass(frozen=True)
class ChoicePolicy:
    """How one element is picked from a choice set.

    ``first`` takes the least element in storage order, ``random`` draws
    with a seeded generator.  Results never depend on the policy unless the
    program fails witnessing, which is what the seed tests check.
    """

    mode: str = "first"
    seed: int = 0

    @staticmethod
    def random(seed: int) -> "ChoicePolicy":
        return ChoicePolicy("random", seed)


@dataclass
class EvalResult:
    value: Any  # HFValue, bool, or DAGGER
    trace: list[dict] = field(default_factory=list)
    reason: str | None = None

    @property
    def is_dagger(self) -> bool:
        return self.value is DAGGER


@dataclass
class ExhaustiveResult:
    """The fixed-point paths of one WSC tree and their witness verdicts."""

    paths: list[tuple[HFValue, ...]]
    verdicts: list[bool]
    finals: frozenset
    dagger: str | None = None

    @property
    def all_or_none(self) -> bool:
        return all(self.verdicts) or not any(self.verdicts)

    @property
    def denotation(self) -> frozenset | None:
        """The set of final values if every path is witnessed, else None."""
        if self.dagger is not None or not all(self.verdicts):
            return None
        return self.finals


_SORTED_FV: dict[int, tuple[S.Node, tuple[str, ...]]] = {}


def _sorted_fv(node: S.Node) -> tuple[str, ...]:
    hit = _SORTED_FV.get(id(node))
    if hit is not None and hit[0] is node:
        return hit[1]
    fv = tuple(sorted(S.free_vars(node)))
    _SORTED_FV[id(node)] = (node, fv)
    return fv


def _short(v, limit: int = 160) -> str:
    s = hf.render(v) if isinstance(v, HFValue) else str(v)
    return s if len(s) <= limit else s[:limit] + "..."


# --- native helpers mirroring the desugared definitions -------------------------

def _members(v: HFValue) -> tuple:
    return v.children if v.is_set else ()


def _unique(v: HFValue) -> HFValue:
    return v.children[0] if v.is_set and len(v.children) == 1 else EMPTY


def _union(v: HFValue) -> HFValue:
    out = []
    for c in _members(v):
        out.extend(_members(c))
    return hf.make_set(out)


def _card(v: HFValue) -> HFValue:
    return EMPTY if v.is_atom else hf.von_neumann(len(v.children))


def _fst(p: HFValue) -> HFValue:
    smalls = [z for z in _members(p) if z.is_set and len(z.children) == 1]
    return _unique(_unique(hf.make_set(smalls)))


def _snd(p: HFValue) -> HFValue:
    u = _union(p)
    if len(u.children) == 1:
        return u.children[0]
    first = _fst(p)
    return _unique(hf.make_set(z for z in u.children if z is not first))


def _proj(s: HFValue, i: HFValue) -> HFValue:
    return _unique(hf.make_set(_snd(z) for z in _members(s) if _fst(z) is i))


def _concat(s: HFValue, t: HFValue) -> HFValue:
    if t.is_atom:
        T = hf.singleton(hf.kuratowski_pair(EMPTY, t))
    elif _unique(t).is_atom:
        T = hf.singleton(hf.kuratowski_pair(EMPTY, _unique(t)))
    else:
        T = t
    tz = _members(T)
    entries = {_snd(w) for w in _members(s)}
    firsts = {z: _fst(z) for z in tz}
    seconds = {z: _snd(z) for z in tz}

    def kept(z):
        if seconds[z] in entries:
            return False
        fz = firsts[z]
        return not any(firsts[z2] in fz.members() and seconds[z2] is seconds[z]
                       for z2 in tz if fz.is_set)

    keep = [z for z in tz if kept(z)]
    n = len(_members(s))
    out = list(_members(s))
    for z in keep:
        fz = firsts[z]
        before = {firsts[z3] for z3 in keep if fz.is_set and firsts[z3] in fz.members()}
        out.append(hf.kuratowski_pair(hf.von_neumann(n + len(before)), seconds[z]))
    return hf.make_set(out)


def to_dag(z: HFValue) -> HFValue:
    """Edge set ``{(i, j) : v_i ∈ v_j}`` of the ordered DAG of a pure set.

    Vertices are the elements of ``{z} ∪ TC(z)`` numbered along the total
    order on atom-free sets; non-pure input gives the empty set.
    """
    if not z.is_set or not z.pure:
        return EMPTY
    verts = sorted(hf.transitive_closure(z) + [z], key=hf.pure_sort_key)
    idx = {v: i for i, v in enumerate(verts)}
    edges = []
    for v in verts:
        for c in v.children:
            edges.append(hf.kuratowski_pair(hf.von_neumann(idx[c]), hf.von_neumann(idx[v])))
    return hf.make_set(edges)


def from_dag(r: HFValue) -> HFValue:
    """Inverse of :func:`to_dag`; malformed input gives the empty set."""
    if not r.is_set or not r.children:
        return EMPTY
    inc: dict[int, list[int]] = {}
    seen: set[int] = set()
    for e in r.children:
        comps = hf.pair_components(e)
        if comps is None:
            return EMPTY
        i, j = hf.ordinal_value(comps[0]), hf.ordinal_value(comps[1])
        if i is None or j is None or i >= j:
            return EMPTY
        inc.setdefault(j, []).append(i)
        seen.update((i, j))
    built: dict[int, HFValue] = {}
    for k in sorted(seen):
        built[k] = hf.make_set(built[i] for i in inc.get(k, ()))
    return built[max(seen)]


# --- evaluator ------------------------------------------------------------------

class Evaluator:
    """Evaluates nodes of one program over one structure.

    Results are memoized on (node, bound, values of the node's free
    variables), so repeated subterms and calls are evaluated once.
    """

    def __init__(self, A: Structure, program: S.Program | None = None,
                 policy: ChoicePolicy | None = None, trace: bool = False,
                 tree_cap: int = 200_000):
        self.A = A
        self.n = A.universe_size
        self.program = program
        self.policy = policy or ChoicePolicy()
        self.rng = random.Random(self.policy.seed)
        self.atoms = hf.atoms_set(self.n)
        self.rel = {name: s for name, s in zip(A.signature.names, A.rel_sets)}
        self.bindings = {b.name: b for b in program.bindings} if program else {}
        self.memo: dict = {}
        self.paths: dict = {}
        self.verdicts: dict = {}
        self.trace: list[dict] | None = [] if trace else None
        self.tree_cap = tree_cap
        self.diagnostics: list[str] = []

    # -- entry points ------------------------------------------------------------

    def run(self, node: S.Node, env: Mapping[str, HFValue] | None = None,
            bound: Polynomial | int | None = None) -> EvalResult:
        p = self._cap(bound)
        env = dict(env or {})
        missing = S.free_vars(node) - set(env)
        if missing:
            raise ValueError(f"unbound variables {sorted(missing)}")
        try:
            v = self.ev(node, env, p)
        except Dagger as d:
            return EvalResult(DAGGER, self.trace or [], d.reason)
        except BoundExceeded:
            return EvalResult(DAGGER, self.trace or [], "bound exceeded outside any operator")
        return EvalResult(v, self.trace or [])

    def run_entry(self, args: Mapping[str, HFValue] | None = None) -> EvalResult:
        if self.program is None:
            raise ValueError("no program loaded")
        b = self.bindings[self.program.entry]
        env = dict(args or {})
        if set(env) != set(b.params):
            raise ValueError(f"entry {b.name} expects parameters {list(b.params)}")
        return self.run(b.body, env, b.bound)

    def _cap(self, bound) -> int:
        if bound is None:
            return 10 ** 9
        if isinstance(bound, Polynomial):
            return bound(self.n)
        return int(bound)

    # -- core dispatch -------------------------------------------------------------

    def ev(self, node: S.Node, env: Mapping[str, HFValue], p: int):
        fv = _sorted_fv(node)
        key = (id(node), p, tuple(env[v] for v in fv))
        hit = self.memo.get(key)
        if hit is not None:
            if isinstance(hit, BaseException):
                raise hit
            return hit
        try:
            v = self._ev(node, env, p)
        except (Dagger, BoundExceeded) as e:
            self.memo[key] = e
            raise
        if isinstance(v, HFValue) and v.tc_size > p:
            e = BoundExceeded()
            self.memo[key] = e
            raise e
        self.memo[key] = v
        return v

    def _ev(self, node: S.Node, env, p):
        ev = self.ev
        t = type(node)
        if t is S.Var:
            return env[node.name]
        if t is S.Empty:
            return EMPTY
        if t is S.Atoms:
            return self.atoms
        if t is S.Apply:
            args = [ev(a, env, p) for a in node.args]
            op = node.op
            if op == "pair":
                return hf.make_set(args)
            if op == "union":
                return _union(args[0])
            if op == "unique":
                return _unique(args[0])
            if op == "card":
                return _card(args[0])
            if op == "todag":
                return to_dag(args[0])
            if op == "fromdag":
                return from_dag(args[0])
            raise ValueError(f"unknown operator {op}")
        if t is S.Comp:
            dom = ev(node.domain, env, p)
            out = []
            for b in _members(dom):
                inner = dict(env)
                inner[node.var] = b
                if node.filter is None or ev(node.filter, inner, p):
                    out.append(ev(node.result, inner, p))
            return hf.make_set(out)
        if t is S.Iter:
            return self._iter(node, env, p)
        if t is S.WSC:
            return self._wsc(node, env, p)
        if t is S.DC:
            return self._dc(node, env, p)
        if t is S.Nat:
            return hf.von_neumann(node.poly(self.n))
        if t is S.Call:
            b = self.bindings.get(node.name)
            if b is None:
                raise ValueError(f"unknown binding {node.name}")
            vals = [ev(a, env, p) for a in node.args]
            return ev(b.body, dict(zip(b.params, vals)), b.bound(self.n))
        # formulas
        if t is S.Rel:
            vals = [ev(a, env, p) for a in node.args]
            if not all(v.is_atom for v in vals):
                return False
            return tuple(v.index for v in vals) in self.rel[node.name]
        if t is S.Eq:
            a = ev(node.left, env, p)
            b = ev(node.right, env, p)
            return a is b
        if t is S.Not:
            return not ev(node.arg, env, p)
        if t is S.And:
            a = ev(node.left, env, p)
            b = ev(node.right, env, p)
            return a and b
        if t is S.Or:
            a = ev(node.left, env, p)
            b = ev(node.right, env, p)
            return a or b
        if t is S.Bool:
            return node.value
        # sugar
        if t is S.Implies:
            a = ev(node.left, env, p)
            b = ev(node.right, env, p)
            return (not a) or b
        if t is S.In:
            e = ev(node.elem, env, p)
            c = ev(node.coll, env, p)
            return c.is_set and e in c
        if t is S.Quant:
            dom = ev(node.domain, env, p)
            results = []
            for b in _members(dom):
                inner = dict(env)
                inner[node.var] = b
                results.append(ev(node.body, inner, p))
            return any(results) if node.kind == "exists" else all(results)
        if t is S.SetOp:
            a = ev(node.left, env, p)
            b = ev(node.right, env, p)
            if node.op == "cup":
                return hf.make_set(_members(a) + _members(b))
            bm = b.members() if b.is_set else frozenset()
            if node.op == "cap":
                return hf.make_set(z for z in _members(a) if z in bm)
            return hf.make_set(z for z in _members(a) if z not in bm)
        if t is S.SetLit:
            return hf.make_set(ev(e, env, p) for e in node.elems)
        if t is S.Ord:
            return hf.von_neumann(node.n)
        if t is S.KPair:
            return hf.kuratowski_pair(ev(node.left, env, p), ev(node.right, env, p))
        if t is S.Fst:
            return _fst(ev(node.arg, env, p))
        if t is S.Snd:
            return _snd(ev(node.arg, env, p))
        if t is S.TupleLit:
            return hf.make_tuple([ev(e, env, p) for e in node.elems])
        if t is S.Proj:
            return _proj(ev(node.tup, env, p), ev(node.index, env, p))
        if t is S.Concat:
            return _concat(ev(node.left, env, p), ev(node.right, env, p))
        if t is S.IfThen:
            if ev(node.cond, env, p):
                return ev(node.then, env, p)
            return ev(node.other, env, p)
        raise TypeError(f"cannot evaluate {node!r}")

    # -- iteration ---------------------------------------------------------------------

    def _iter(self, node: S.Iter, env, p) -> HFValue:
        a = EMPTY
        inner = dict(env)
        try:
            for _ in range(p + 1):
                inner[node.var] = a
                nxt = self.ev(node.body, inner, p)
                if nxt is a:
                    return a
                a = nxt
        except BoundExceeded:
            return EMPTY
        return EMPTY

    # -- deterministic choice -----------------------------------------------------------------

    def _dc(self, node: S.DC, env, p) -> HFValue:
        order = self.ev(node.order, env, p)
        items = hf.tuple_items(order) or []
        rank = {a: i for i, a in enumerate(items) if a.is_atom}
        b = EMPTY
        inner = dict(env)
        try:
            for rnd in range(p + 1):
                inner[node.x] = b
                inner.pop(node.y, None)
                N = self.ev(node.choice, inner, p)
                cands = [c for c in _members(N) if c in rank]
                y = min(cands, key=rank.__getitem__) if cands else EMPTY
                inner[node.y] = y
                nxt = self.ev(node.step, inner, p)
                if self.trace is not None:
                    self.trace.append({"op": "dc", "round": rnd, "choice": _short(N),
                                       "pick": _short(y)})
                if nxt is b:
                    return b
                b = nxt
        except BoundExceeded:
            return EMPTY
        return EMPTY

    # -- witnessed symmetric choice --------------------------------------------------------------

    def _pick(self, N: HFValue) -> HFValue:
        elems = N.children
        if self.policy.mode == "random":
            return elems[self.rng.randrange(len(elems))]
        return elems[0]

    def _path(self, node: S.WSC, env, p):
        """Run one choice path; returns (stages, choice sets)."""
        key = (id(node), p, tuple(env[v] for v in sorted(S.path_vars(node))))
        hit = self.paths.get(key)
        if hit is not None:
            if isinstance(hit, Dagger):
                raise hit
            return hit
        try:
            res = self._compute_path(node, env, p)
        except Dagger as d:
            self.paths[key] = d
            raise
        self.paths[key] = res
        return res

    def _choice_set(self, node, inner, p) -> HFValue:
        N = self.ev(node.choice, inner, p)
        if not N.is_set:
            self.diagnostics.append(f"choice term returned an atom {_short(N)}; treated as empty")
            return EMPTY
        return N

    def _compute_path(self, node: S.WSC, env, p):
        stages = [EMPTY]
        choices = []
        inner = dict(env)
        try:
            while True:
                b = stages[-1]
                inner[node.x] = b
                inner.pop(node.y, None)
                N = self._choice_set(node, inner, p)
                choices.append(N)
                y = self._pick(N) if N.children else EMPTY
                inner[node.y] = y
                nxt = self.ev(node.step, inner, p)
                if self.trace is not None:
                    self.trace.append({"op": "wsc", "stage": len(stages) - 1,
                                       "choice": _short(N), "pick": _short(y)})
                if nxt is b:
                    break
                stages.append(nxt)
                if len(stages) + 1 > p:
                    raise Dagger(f"WSC path longer than the bound {p}")
        except BoundExceeded:
            raise Dagger(f"WSC stage exceeds the bound {p}")
        return tuple(stages), tuple(choices)

    def _witnessed(self, node: S.WSC, env, p, stages, choices) -> bool:
        ctx = [env[v] for v in _sorted_fv(node)]
        impure = tuple(v for v in ctx if not v.pure)
        key = (id(node), p, stages, impure)
        hit = self.verdicts.get(key)
        if hit is not None:
            if isinstance(hit, Dagger):
                raise hit
            return hit
        bn = stages[-1]
        inner = dict(env)
        inner[node.y] = bn
        ok = True
        try:
            for i, (bi, N) in enumerate(zip(stages, choices)):
                inner[node.x] = bi
                w = self.ev(node.wit, inner, p)
                maps, notes = decode_witnesses(w)
                self.diagnostics.extend(notes[:3])
                good = is_orbit_witnessed(self.A, list(impure) + list(stages[:i + 1]), N, maps)
                if self.trace is not None:
                    self.trace.append({"op": "witness", "stage": i, "maps": len(maps),
                                       "witnessed": good})
                if not good:
                    ok = False
                    break
        except BoundExceeded:
            d = Dagger(f"witnessing term exceeds the bound {p}")
            self.verdicts[key] = d
            raise d
        self.verdicts[key] = ok
        return ok

    def _output(self, node: S.WSC, env, p, bn: HFValue):
        inner = dict(env)
        inner[node.x] = bn
        inner.pop(node.y, None)
        v = self.ev(node.out, inner, p)
        if isinstance(v, bool):
            return v
        return v if v.pure else EMPTY

    def _wsc(self, node: S.WSC, env, p):
        stages, choices = self._path(node, env, p)
        if not self._witnessed(node, env, p, stages, choices):
            raise Dagger("choice set not witnessed as an orbit")
        return self._output(node, env, p, stages[-1])

    def wsc_output(self, node: S.WSC, final: HFValue, env: Mapping[str, HFValue] | None = None,
                   bound: Polynomial | int | None = None):
        """The operator's output at the fixed point ``final``."""
        return self._output(node, dict(env or {}), self._cap(bound), final)

    def wsc_exhaustive(self, node: S.WSC, env: Mapping[str, HFValue] | None = None,
                       bound: Polynomial | int | None = None) -> ExhaustiveResult:
        """Materialize every fixed-point path of the choice tree."""
        p = self._cap(bound)
        env = dict(env or {})
        paths: list[tuple[HFValue, ...]] = []
        seen_paths: set = set()
        counter = [0]
        inner = dict(env)

        def expand(stages: list[HFValue]):
            counter[0] += 1
            if counter[0] > self.tree_cap:
                raise TreeCapExceeded(f"choice tree exceeds {self.tree_cap} nodes")
            b = stages[-1]
            inner[node.x] = b
            inner.pop(node.y, None)
            N = self._choice_set(node, inner, p)
            ys = N.children or (EMPTY,)
            kids = []
            for y in ys:
                inner[node.x] = b
                inner[node.y] = y
                nxt = self.ev(node.step, inner, p)
                if nxt not in kids:
                    kids.append(nxt)
            for nxt in kids:
                if nxt is b:
                    path = tuple(stages) + (b,)
                    if path not in seen_paths:
                        seen_paths.add(path)
                        paths.append(path)
                else:
                    if len(stages) + 2 > p:
                        raise Dagger(f"WSC path longer than the bound {p}")
                    expand(stages + [nxt])

        try:
            expand([EMPTY])
        except Dagger as d:
            return ExhaustiveResult([], [], frozenset(), d.reason)
        except BoundExceeded:
            return ExhaustiveResult([], [], frozenset(), "bound exceeded")
        verdicts = []
        for path in paths:
            stages = path[:-1]
            choices = []
            for b in stages:
                inner[node.x] = b
                inner.pop(node.y, None)
                choices.append(self._choice_set(node, inner, p))
            try:
                verdicts.append(self._witnessed(node, env, p, stages, tuple(choices)))
            except Dagger as d:
                return ExhaustiveResult(paths, verdicts, frozenset(), d.reason)
        return ExhaustiveResult(paths, verdicts, frozenset(path[-1] for path in paths))


# --- convenience API -------------------------------------------------------------

def eval_term(A: Structure, env: Mapping[str, HFValue], t: S.Node,
              bound: Polynomial | int | None = None,
              policy: ChoicePolicy | None = None, program: S.Program | None = None,
              trace: bool = False) -> EvalResult:
    return Evaluator(A, program, policy, trace).run(t, env, bound)


def eval_program(program: S.Program, A: Structure, policy: ChoicePolicy | None = None,
                 trace: bool = False, args: Mapping[str, HFValue] | None = None) -> EvalResult:
    return Evaluator(A, program, policy, trace).run_entry(args)


def format_result(res: EvalResult) -> str:
    v = res.value
    if v is DAGGER:
        return "†"
    if isinstance(v, bool):
        return "true" if v else "false"
    return hf.render(v)
