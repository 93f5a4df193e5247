"""Abstract syntax of BGS+WSC terms and formulas.

Nodes are frozen dataclasses, so structural equality is ``==`` and ASTs can
be compared after a parse/render round trip.  A node is either a *term*
(denotes an HF value) or a *formula* (denotes a truth value); see
:func:`is_formula`.

Core constructs are the ones of BGS logic plus the two fixed-point
operators with choice.  The remaining node types are sugar that the
evaluator runs natively and :func:`desugar` rewrites into core.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterator

# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class Polynomial:
    """``c0 + c1*n + c2*n^2 + ...`` with natural coefficients."""

    coefficients: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.coefficients):
            raise ValueError("polynomial coefficients must be natural numbers")
        cs = list(self.coefficients)
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coefficients", tuple(cs))

    def __call__(self, n: int) -> int:
        out = 0
        for c in reversed(self.coefficients):
            out = out * n + c
        return out

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coefficients, other.coefficients
        if not a or not b:
            return Polynomial(())
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] += x * y
        return Polynomial(tuple(out))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coefficients, other.coefficients
        m = max(len(a), len(b))
        return Polynomial(tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
                                for i in range(m)))

    def render(self) -> str:
        parts = []
        for i in range(len(self.coefficients) - 1, -1, -1):
            c = self.coefficients[i]
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            else:
                mono = "n" if i == 1 else f"n^{i}"
                parts.append(mono if c == 1 else f"{c}*{mono}")
        return " + ".join(parts) if parts else "0"

    @staticmethod
    def const(c: int) -> "Polynomial":
        return Polynomial((c,))


# ---------------------------------------------------------------------------
# nodes


class Node:
    __slots__ = ()


# -- terms ------------------------------------------------------------------

@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Empty(Node):
    pass


@dataclass(frozen=True)
class Atoms(Node):
    pass


# Pair, Union, Unique, Card, and the primitive helpers toDAG/fromDAG.
CORE_OPS = {"pair": 2, "union": 1, "unique": 1, "card": 1}
PRIM_OPS = {"todag": 1, "fromdag": 1}


@dataclass(frozen=True)
class Apply(Node):
    op: str
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Comp(Node):
    """``{ result | var in domain, filter }``; ``filter`` may be None."""

    result: Node
    var: str
    domain: Node
    filter: Node | None


@dataclass(frozen=True)
class Iter(Node):
    """``iter var . body``: least fixed point from the empty set."""

    var: str
    body: Node


@dataclass(frozen=True)
class WSC(Node):
    """``wsc x y (step; choice; wit; out)``.

    ``x`` is bound in all four parts, ``y`` only in ``step`` and ``wit``.
    In ``wit``, ``x`` holds an intermediate stage and ``y`` the fixed point.
    The node is a formula when ``out`` is a formula and a term otherwise.
    """

    x: str
    y: str
    step: Node
    choice: Node
    wit: Node
    out: Node


@dataclass(frozen=True)
class DC(Node):
    """``dc x y (step; choice; order)`` with deterministic choice."""

    x: str
    y: str
    step: Node
    choice: Node
    order: Node


@dataclass(frozen=True)
class Nat(Node):
    """The ordinal ``p(|Atoms|)``."""

    poly: Polynomial


@dataclass(frozen=True)
class Call(Node):
    """Use of a named binding; ``kind`` is 'term' or 'formula'."""

    name: str
    args: tuple[Node, ...]
    kind: str


# -- term sugar -----------------------------------------------------------------

@dataclass(frozen=True)
class SetOp(Node):
    op: str  # 'cup' | 'cap' | 'minus'
    left: Node
    right: Node


@dataclass(frozen=True)
class SetLit(Node):
    elems: tuple[Node, ...]


@dataclass(frozen=True)
class Ord(Node):
    n: int


@dataclass(frozen=True)
class KPair(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Fst(Node):
    arg: Node


@dataclass(frozen=True)
class Snd(Node):
    arg: Node


@dataclass(frozen=True)
class TupleLit(Node):
    elems: tuple[Node, ...]


@dataclass(frozen=True)
class Concat(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Proj(Node):
    tup: Node
    index: Node


@dataclass(frozen=True)
class IfThen(Node):
    cond: Node
    then: Node
    other: Node


# -- formulas -------------------------------------------------------------------

@dataclass(frozen=True)
class Rel(Node):
    name: str
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Eq(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Not(Node):
    arg: Node


@dataclass(frozen=True)
class And(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Or(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Bool(Node):
    value: bool


# -- formula sugar --------------------------------------------------------------

@dataclass(frozen=True)
class In(Node):
    elem: Node
    coll: Node


@dataclass(frozen=True)
class Quant(Node):
    kind: str  # 'forall' | 'exists'
    var: str
    domain: Node
    body: Node


@dataclass(frozen=True)
class Implies(Node):
    left: Node
    right: Node


_FORMULA_TYPES = (Rel, Eq, Not, And, Or, Bool, In, Quant, Implies)


def is_formula(node: Node) -> bool:
    if isinstance(node, _FORMULA_TYPES):
        return True
    if isinstance(node, WSC):
        return is_formula(node.out)
    if isinstance(node, Call):
        return node.kind == "formula"
    return False


# ---------------------------------------------------------------------------
# generic traversal

def children(node: Node) -> Iterator[Node]:
    for f in node.__dataclass_fields__:
        v = getattr(node, f)
        if isinstance(v, Node):
            yield v
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, Node):
                    yield x


def walk(node: Node) -> Iterator[Node]:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(children(n))


_FV_CACHE: dict[int, tuple[Node, frozenset]] = {}


def free_vars(node: Node) -> frozenset:
    """Free variables under the binding rules of the logic (memoized)."""
    hit = _FV_CACHE.get(id(node))
    if hit is not None and hit[0] is node:
        return hit[1]
    out = _free_vars(node)
    _FV_CACHE[id(node)] = (node, out)
    return out


def _free_vars(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Comp):
        inner = free_vars(node.result)
        if node.filter is not None:
            inner = inner | free_vars(node.filter)
        return free_vars(node.domain) | (inner - {node.var})
    if isinstance(node, Quant):
        return free_vars(node.domain) | (free_vars(node.body) - {node.var})
    if isinstance(node, Iter):
        return free_vars(node.body) - {node.var}
    if isinstance(node, WSC):
        xy = {node.x, node.y}
        return ((free_vars(node.step) | free_vars(node.wit)) - xy) | \
               ((free_vars(node.choice) | free_vars(node.out)) - {node.x})
    if isinstance(node, DC):
        return (free_vars(node.step) - {node.x, node.y}) | \
               (free_vars(node.choice) - {node.x}) | free_vars(node.order)
    out: frozenset = frozenset()
    for c in children(node):
        out = out | free_vars(c)
    return out


def path_vars(node: WSC) -> frozenset:
    """Free variables the choice path of a WSC node depends on (not ``out``)."""
    xy = {node.x, node.y}
    return ((free_vars(node.step) | free_vars(node.wit)) - xy) | (free_vars(node.choice) - {node.x})


# ---------------------------------------------------------------------------
# programs

@dataclass(frozen=True)
class Binding:
    kind: str  # 'term' | 'formula'
    name: str
    params: tuple[str, ...]
    body: Node
    bound: Polynomial


@dataclass(frozen=True)
class Program:
    signature: tuple[tuple[str, int], ...]
    bindings: tuple[Binding, ...]
    entry: str
    default_bound: Polynomial | None = None

    def binding(self, name: str) -> Binding:
        for b in self.bindings:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.bindings]


# ---------------------------------------------------------------------------
# rendering (fully parenthesized, parseable)

_SETOP_SYM = {"cup": "cup", "cap": "cap", "minus": "\\"}


def render(node: Node) -> str:
    r = render
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Empty):
        return "empty"
    if isinstance(node, Atoms):
        return "atoms"
    if isinstance(node, Bool):
        return "true" if node.value else "false"
    if isinstance(node, Ord):
        return f"#{node.n}"
    if isinstance(node, Nat):
        return f"nat({node.poly.render()})"
    if isinstance(node, Apply):
        return f"{node.op}(" + ", ".join(r(a) for a in node.args) + ")"
    if isinstance(node, Call):
        if not node.args:
            return node.name
        return f"{node.name}(" + ", ".join(r(a) for a in node.args) + ")"
    if isinstance(node, Rel):
        return f"{node.name}(" + ", ".join(r(a) for a in node.args) + ")"
    if isinstance(node, Comp):
        f = "" if node.filter is None else ", " + r(node.filter)
        return "{ " + r(node.result) + " | " + node.var + " in " + r(node.domain) + f + " }"
    if isinstance(node, Iter):
        return f"(iter {node.var} . {r(node.body)})"
    if isinstance(node, WSC):
        return (f"wsc {node.x} {node.y} ({r(node.step)}; {r(node.choice)}; "
                f"{r(node.wit)}; {r(node.out)})")
    if isinstance(node, DC):
        return f"dc {node.x} {node.y} ({r(node.step)}; {r(node.choice)}; {r(node.order)})"
    if isinstance(node, SetOp):
        return f"({r(node.left)} {_SETOP_SYM[node.op]} {r(node.right)})"
    if isinstance(node, SetLit):
        return "{" + ", ".join(r(e) for e in node.elems) + "}" if node.elems else "{}"
    if isinstance(node, KPair):
        return f"kpair({r(node.left)}, {r(node.right)})"
    if isinstance(node, Fst):
        return f"fst({r(node.arg)})"
    if isinstance(node, Snd):
        return f"snd({r(node.arg)})"
    if isinstance(node, TupleLit):
        return "tup(" + ", ".join(r(e) for e in node.elems) + ")"
    if isinstance(node, Concat):
        return f"concat({r(node.left)}, {r(node.right)})"
    if isinstance(node, Proj):
        return f"proj({r(node.tup)}, {r(node.index)})"
    if isinstance(node, IfThen):
        return f"(if {r(node.cond)} then {r(node.then)} else {r(node.other)})"
    if isinstance(node, Eq):
        return f"({r(node.left)} = {r(node.right)})"
    if isinstance(node, In):
        return f"({r(node.elem)} in {r(node.coll)})"
    if isinstance(node, Not):
        return f"~{r(node.arg)}"
    if isinstance(node, And):
        return f"({r(node.left)} /\\ {r(node.right)})"
    if isinstance(node, Or):
        return f"({r(node.left)} \\/ {r(node.right)})"
    if isinstance(node, Implies):
        return f"({r(node.left)} -> {r(node.right)})"
    if isinstance(node, Quant):
        return f"({node.kind} {node.var} in {r(node.domain)} . {r(node.body)})"
    raise TypeError(f"cannot render {node!r}")


def render_program(prog: Program) -> str:
    lines = []
    if prog.signature:
        lines.append("signature { " + " ".join(f"{n}/{k};" for n, k in prog.signature) + " }")
    if prog.default_bound is not None:
        lines.append(f"bound {prog.default_bound.render()};")
    for b in prog.bindings:
        params = "(" + ", ".join(b.params) + ")" if b.params else ""
        lines.append(f"{b.kind} {b.name}{params} := {render(b.body)};")
        lines.append(f"bound {b.bound.render()};")
    lines.append(f"entry {prog.entry};")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# desugaring into core

_fresh_counter = itertools.count()


def _fresh() -> str:
    return f"_v{next(_fresh_counter)}"


def _union2(a: Node, b: Node) -> Node:
    return Apply("union", (Apply("pair", (a, b)),))


def _single(a: Node) -> Node:
    return Apply("pair", (a, a))


def _ne(a: Node, b: Node) -> Node:
    return Not(Eq(a, b))


def _member(a: Node, b: Node) -> Node:
    z = _fresh()
    return _ne(Comp(Var(z), z, b, Eq(Var(z), a)), Empty())


def _in_atoms(a: Node) -> Node:
    return _member(a, Atoms())


def _ordinal(n: int) -> Node:
    t: Node = Empty()
    for _ in range(n):
        t = _union2(t, _single(t))
    return t


def _kpair(a: Node, b: Node) -> Node:
    return Apply("pair", (_single(a), Apply("pair", (a, b))))


def _fst(p: Node) -> Node:
    z = _fresh()
    smalls = Comp(Var(z), z, p, Eq(Apply("card", (Var(z),)), _ordinal(1)))
    return Apply("unique", (Apply("unique", (smalls,)),))


def _ifthen(c: Node, s: Node, t: Node) -> Node:
    z1, z2 = _fresh(), _fresh()
    one = _single(Empty())
    return Apply("unique", (_union2(Comp(s, z1, one, c), Comp(t, z2, one, Not(c))),))


def _snd(p: Node) -> Node:
    u = Apply("union", (p,))
    z = _fresh()
    first = _fst(p)
    other = Apply("unique", (Comp(Var(z), z, u, _ne(Var(z), first)),))
    return _ifthen(Eq(Apply("card", (u,)), _ordinal(1)), Apply("unique", (u,)), other)


def _setlit(elems: list[Node]) -> Node:
    if not elems:
        return Empty()
    acc = _single(elems[0])
    for e in elems[1:]:
        acc = _union2(acc, _single(e))
    return acc


def _proj(s: Node, i: Node) -> Node:
    z = _fresh()
    return Apply("unique", (Comp(_snd(Var(z)), z, s, Eq(_fst(Var(z)), i)),))


def _concat(s: Node, t: Node) -> Node:
    # entries of t viewed as a tuple: atom b -> (b), {b} -> (b), else t itself
    T = _ifthen(_in_atoms(t), _single(_kpair(_ordinal(0), t)),
                _ifthen(_in_atoms(Apply("unique", (t,))),
                        _single(_kpair(_ordinal(0), Apply("unique", (t,)))), t))
    w = _fresh()
    entries_s = Comp(_snd(Var(w)), w, s, None)

    def kept(z: Node) -> Node:
        z2 = _fresh()
        earlier_same = Comp(Var(z2), z2, T,
                            And(_member(_fst(Var(z2)), _fst(z)), Eq(_snd(Var(z2)), _snd(z))))
        return And(Not(_member(_snd(z), entries_s)), Eq(earlier_same, Empty()))

    z, z3, w2 = _fresh(), _fresh(), _fresh()
    tagged_s = Comp(_kpair(_ordinal(0), Var(w2)), w2, s, None)
    tagged_t = Comp(_kpair(_ordinal(1), _fst(Var(z3))), z3, T,
                    And(_member(_fst(Var(z3)), _fst(Var(z))), kept(Var(z3))))
    pos = Apply("card", (_union2(tagged_s, tagged_t),))
    appended = Comp(_kpair(pos, _snd(Var(z))), z, T, kept(Var(z)))
    return _union2(s, appended)


def desugar(node: Node) -> Node:
    """Rewrite all sugar into core BGS+WSC constructs (bottom-up)."""
    d = desugar
    if isinstance(node, (Var, Empty, Atoms, Nat)):
        return node
    if isinstance(node, Bool):
        return Eq(Empty(), Empty()) if node.value else _ne(Empty(), Empty())
    if isinstance(node, Ord):
        return _ordinal(node.n)
    if isinstance(node, Apply):
        return Apply(node.op, tuple(d(a) for a in node.args))
    if isinstance(node, Call):
        return Call(node.name, tuple(d(a) for a in node.args), node.kind)
    if isinstance(node, Rel):
        return Rel(node.name, tuple(d(a) for a in node.args))
    if isinstance(node, Comp):
        return Comp(d(node.result), node.var, d(node.domain),
                    None if node.filter is None else d(node.filter))
    if isinstance(node, Iter):
        return Iter(node.var, d(node.body))
    if isinstance(node, WSC):
        return WSC(node.x, node.y, d(node.step), d(node.choice), d(node.wit), d(node.out))
    if isinstance(node, DC):
        return DC(node.x, node.y, d(node.step), d(node.choice), d(node.order))
    if isinstance(node, Eq):
        return Eq(d(node.left), d(node.right))
    if isinstance(node, Not):
        return Not(d(node.arg))
    if isinstance(node, And):
        return And(d(node.left), d(node.right))
    if isinstance(node, Or):
        return Or(d(node.left), d(node.right))
    if isinstance(node, Implies):
        return Or(Not(d(node.left)), d(node.right))
    if isinstance(node, In):
        return _member(d(node.elem), d(node.coll))
    if isinstance(node, Quant):
        dom, body = d(node.domain), d(node.body)
        if node.kind == "exists":
            return _ne(Comp(Var(node.var), node.var, dom, body), Empty())
        return Eq(Comp(Var(node.var), node.var, dom, Not(body)), Empty())
    if isinstance(node, SetOp):
        a, b = d(node.left), d(node.right)
        if node.op == "cup":
            return _union2(a, b)
        z = _fresh()
        test = _member(Var(z), b)
        return Comp(Var(z), z, a, test if node.op == "cap" else Not(test))
    if isinstance(node, SetLit):
        return _setlit([d(e) for e in node.elems])
    if isinstance(node, KPair):
        return _kpair(d(node.left), d(node.right))
    if isinstance(node, Fst):
        return _fst(d(node.arg))
    if isinstance(node, Snd):
        return _snd(d(node.arg))
    if isinstance(node, TupleLit):
        return _setlit([_kpair(_ordinal(i), d(e)) for i, e in enumerate(node.elems)])
    if isinstance(node, Proj):
        return _proj(d(node.tup), d(node.index))
    if isinstance(node, Concat):
        return _concat(d(node.left), d(node.right))
    if isinstance(node, IfThen):
        return _ifthen(d(node.cond), d(node.then), d(node.other))
    raise TypeError(f"cannot desugar {node!r}")


CORE_TYPES = (Var, Empty, Atoms, Apply, Comp, Iter, WSC, DC, Nat, Call,
              Rel, Eq, Not, And, Or)


def is_core(node: Node) -> bool:
    return all(isinstance(n, CORE_TYPES) for n in walk(node))


def desugar_program(prog: Program) -> Program:
    return Program(prog.signature,
                   tuple(Binding(b.kind, b.name, b.params, desugar(b.body), b.bound)
                         for b in prog.bindings),
                   prog.entry, prog.default_bound)


# ---------------------------------------------------------------------------
# eliminating term outputs of the WSC operator

def map_children(node: Node, f) -> Node:
    """Rebuild ``node`` with ``f`` applied to each direct child node."""
    changes = {}
    for name in node.__dataclass_fields__:
        v = getattr(node, name)
        if isinstance(v, Node):
            w = f(v)
            if w is not v:
                changes[name] = w
        elif isinstance(v, tuple) and any(isinstance(x, Node) for x in v):
            w = tuple(f(x) if isinstance(x, Node) else x for x in v)
            if any(a is not b for a, b in zip(v, w)):
                changes[name] = w
    return replace(node, **changes) if changes else node


def eliminate_output(node: WSC, span: Polynomial) -> Node:
    """An equivalent term whose WSC operators all have formula outputs.

    The output is encoded as the edge set of its ordered DAG, recovered edge
    by edge with one formula-output WSC per candidate pair ``(i, j)`` of
    ordinals below ``span``, and decoded again; a guard formula checks that
    the output is atom-free (otherwise the result is the empty set).
    """
    x, y, st, ch, wt, out = node.x, node.y, node.step, node.choice, node.wit, node.out
    dag = Apply("todag", (out,))
    guard = WSC(x, y, st, ch, wt,
                Implies(Not(Eq(out, Empty())), Not(Eq(dag, Empty()))))
    i, j, z = _fresh(), _fresh(), _fresh()
    edge = KPair(Var(i), Var(j))
    inner = Comp(edge, j, Nat(span), WSC(x, y, st, ch, wt, In(edge, dag)))
    r = Apply("union", (Comp(inner, i, Nat(span), None),))
    return Apply("unique", (Comp(Apply("fromdag", (r,)), z, SetLit((Empty(),)), guard),))


def eliminate_outputs_node(node: Node, span: Polynomial) -> Node:
    node = map_children(node, lambda c: eliminate_outputs_node(c, span))
    if isinstance(node, WSC) and not is_formula(node.out):
        return eliminate_output(node, span)
    return node


def eliminate_outputs(prog: Program, span: Polynomial | None = None) -> Program:
    """Rewrite every term-output WSC of the program.

    Candidate DAG vertices range below ``span`` (default: each binding's
    bound) and every rewritten binding gets the squared bound.
    """
    out = []
    for b in prog.bindings:
        bound = b.bound or prog.default_bound
        sp = span or bound
        body = eliminate_outputs_node(b.body, sp)
        nb = bound * bound if (body is not b.body and bound is not None) else b.bound
        out.append(Binding(b.kind, b.name, b.params, body, nb))
    return Program(prog.signature, tuple(out), prog.entry, prog.default_bound)
