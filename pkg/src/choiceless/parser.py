"""Recursive-descent parser for ``.bgs`` programs.

Grammar sketch (terms and formulas share one expression grammar and are
told apart afterwards)::

    program  := item*
    item     := 'signature' '{' (NAME '/' INT ';')* '}'
              | 'bound' poly ';'
              | ('term' | 'formula') NAME ['(' NAME,* ')'] ':=' expr ';'
              | 'entry' NAME ';'
    expr     := or ['->' expr]
    or       := and ('\\/' and)*
    and      := unary ('/\\' unary)*
    unary    := '~' unary | cmp
    cmp      := set [('=' | '!=' | 'in') set]
    set      := primary (('cup' | 'cap' | '\\' | '∪' | '∩') primary)*
    primary  := 'empty' | 'atoms' | 'true' | 'false' | '#' INT | NAME | NAME '(' expr,* ')'
              | '(' expr ')' | '{' '}' | '{' expr,+ '}' | '{' expr '|' NAME 'in' expr [',' expr] '}'
              | 'iter' NAME '.' expr
              | 'wsc' NAME NAME '(' expr ';' expr ';' expr ';' expr ')'
              | 'dc' NAME NAME '(' expr ';' expr ';' expr ')'
              | ('forall' | 'exists') NAME 'in' set '.' expr
              | 'if' expr 'then' expr 'else' expr
              | 'nat' '(' poly ')'

A ``bound`` right after a binding attaches to it; a ``bound`` before any
binding sets the default for bindings without their own.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import syntax as S
from .syntax import Polynomial


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


@dataclass
class Tok:
    kind: str  # 'name' | 'int' | 'ord' | 'sym' | 'eof'
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(//|%)[^\n]*)
  | (?P<ord>\#\d+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>:=|->|!=|\\/|/\\|[\\=~|,;(){}.*^+/#]|∪|∩|∧|∨|¬)
""", re.VERBOSE)

_UNICODE = {"∧": "/\\", "∨": "\\/", "¬": "~", "∪": "cup", "∩": "cap"}

KEYWORDS = {"empty", "atoms", "true", "false", "iter", "wsc", "dc", "forall", "exists",
            "if", "then", "else", "in", "nat", "cup", "cap", "signature", "bound",
            "term", "formula", "entry"}

SUGAR_FUNCS = {"kpair": 2, "fst": 1, "snd": 1, "concat": 2, "proj": 2}


def tokenize(text: str) -> list[Tok]:
    toks = []
    pos, line, lstart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            if kind == "sym" and s in _UNICODE:
                s = _UNICODE[s]
            toks.append(Tok(kind, s, line, pos - lstart + 1))
        nl = s.count("\n") if kind in ("ws", "comment") else 0
        if nl:
            line += nl
            lstart = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


# Raw (unresolved) nodes produced before name resolution.

@dataclass(frozen=True)
class _Name(S.Node):
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class _App(S.Node):
    name: str
    args: tuple
    line: int
    col: int


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "name") and t.text == text

    def error(self, msg: str, tok: Tok | None = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            self.error(f"expected an integer, found {t.text!r}")
        self.i += 1
        return int(t.text)

    # -- polynomials -------------------------------------------------------------

    def poly(self) -> Polynomial:
        total = Polynomial(())
        while True:
            total = total + self.monomial()
            if self.at("+"):
                self.i += 1
                continue
            return total

    def monomial(self) -> Polynomial:
        coef, deg = 1, 0
        while True:
            if self.tok.kind == "int":
                coef *= self.integer()
            elif self.at("n"):
                self.i += 1
                e = 1
                if self.at("^"):
                    self.i += 1
                    e = self.integer()
                deg += e
            else:
                self.error("expected a polynomial term (integer or n)")
            if self.at("*"):
                self.i += 1
                continue
            break
        cs = [0] * (deg + 1)
        cs[deg] = coef
        return Polynomial(tuple(cs))

    # -- expressions ----------------------------------------------------------------

    def expr(self) -> S.Node:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return S.Implies(left, self.expr())
        return left

    def disj(self) -> S.Node:
        left = self.conj()
        while self.at("\\/"):
            self.i += 1
            left = S.Or(left, self.conj())
        return left

    def conj(self) -> S.Node:
        left = self.unary()
        while self.at("/\\"):
            self.i += 1
            left = S.And(left, self.unary())
        return left

    def unary(self) -> S.Node:
        if self.at("~"):
            self.i += 1
            return S.Not(self.unary())
        return self.cmp()

    def cmp(self) -> S.Node:
        left = self.setexpr()
        if self.at("="):
            self.i += 1
            return S.Eq(left, self.setexpr())
        if self.at("!="):
            self.i += 1
            return S.Not(S.Eq(left, self.setexpr()))
        if self.at("in"):
            self.i += 1
            return S.In(left, self.setexpr())
        return left

    def setexpr(self) -> S.Node:
        left = self.primary()
        while True:
            if self.at("cup"):
                op = "cup"
            elif self.at("cap"):
                op = "cap"
            elif self.at("\\"):
                op = "minus"
            else:
                return left
            self.i += 1
            left = S.SetOp(op, left, self.primary())

    def primary(self) -> S.Node:
        t = self.tok
        if t.kind == "ord":
            self.i += 1
            return S.Ord(int(t.text[1:]))
        if t.kind == "int":
            self.error("bare integers are not terms; write #k for the ordinal k")
        if t.kind == "sym":
            if t.text == "(":
                self.i += 1
                e = self.expr()
                self.expect(")")
                return e
            if t.text == "{":
                return self.braces()
            self.error(f"unexpected {t.text!r}")
        if t.kind != "name":
            self.error("unexpected end of input")
        w = t.text
        if w == "empty":
            self.i += 1
            return S.Empty()
        if w == "atoms":
            self.i += 1
            return S.Atoms()
        if w in ("true", "false"):
            self.i += 1
            return S.Bool(w == "true")
        if w == "iter":
            self.i += 1
            v = self.name()
            self.expect(".")
            return S.Iter(v, self.expr())
        if w == "wsc":
            self.i += 1
            x, y = self.name(), self.name()
            self.expect("(")
            parts = [self.expr()]
            for _ in range(3):
                self.expect(";")
                parts.append(self.expr())
            self.expect(")")
            return S.WSC(x, y, *parts)
        if w == "dc":
            self.i += 1
            x, y = self.name(), self.name()
            self.expect("(")
            parts = [self.expr()]
            for _ in range(2):
                self.expect(";")
                parts.append(self.expr())
            self.expect(")")
            return S.DC(x, y, *parts)
        if w in ("forall", "exists"):
            self.i += 1
            v = self.name()
            self.expect("in")
            dom = self.setexpr()
            self.expect(".")
            return S.Quant(w, v, dom, self.expr())
        if w == "if":
            self.i += 1
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            return S.IfThen(c, a, self.expr())
        if w == "nat":
            self.i += 1
            self.expect("(")
            p = self.poly()
            self.expect(")")
            return S.Nat(p)
        if w in KEYWORDS:
            self.error(f"unexpected keyword {w!r}")
        self.i += 1
        if self.at("("):
            self.i += 1
            args = []
            if not self.at(")"):
                args.append(self.expr())
                while self.at(","):
                    self.i += 1
                    args.append(self.expr())
            self.expect(")")
            return _App(w, tuple(args), t.line, t.col)
        return _Name(w, t.line, t.col)

    def braces(self) -> S.Node:
        self.expect("{")
        if self.at("}"):
            self.i += 1
            return S.SetLit(())
        first = self.expr()
        if self.at("|"):
            self.i += 1
            v = self.name()
            self.expect("in")
            dom = self.expr()
            filt = None
            if self.at(","):
                self.i += 1
                filt = self.expr()
            self.expect("}")
            return S.Comp(first, v, dom, filt)
        elems = [first]
        while self.at(","):
            self.i += 1
            elems.append(self.expr())
        self.expect("}")
        return S.SetLit(tuple(elems))

    # -- program -------------------------------------------------------------------

    def program(self):
        signature: list[tuple[str, int]] = []
        raw: list[list] = []  # [kind, name, params, body, bound, tok]
        default = None
        entry = None
        while self.tok.kind != "eof":
            if self.at("signature"):
                self.i += 1
                self.expect("{")
                while not self.at("}"):
                    n = self.tok
                    name = self.name()
                    self.expect("/")
                    k = self.integer()
                    self.expect(";")
                    if any(name == m for m, _ in signature):
                        self.error(f"relation {name} declared twice", n)
                    signature.append((name, k))
                self.expect("}")
            elif self.at("bound"):
                self.i += 1
                p = self.poly()
                self.expect(";")
                if raw and raw[-1][4] is None:
                    raw[-1][4] = p
                elif not raw:
                    default = p
                else:
                    self.error("bound must follow a binding or precede all bindings")
            elif self.at("term") or self.at("formula"):
                kind = self.tok.text
                self.i += 1
                nt = self.tok
                name = self.name()
                params: list[str] = []
                if self.at("("):
                    self.i += 1
                    if not self.at(")"):
                        params.append(self.name())
                        while self.at(","):
                            self.i += 1
                            params.append(self.name())
                    self.expect(")")
                self.expect(":=")
                body = self.expr()
                self.expect(";")
                if any(r[1] == name for r in raw):
                    self.error(f"binding {name} defined twice", nt)
                raw.append([kind, name, tuple(params), body, None, nt])
            elif self.at("entry"):
                self.i += 1
                et = self.tok
                entry = (self.name(), et)
                self.expect(";")
            else:
                self.error(f"unexpected {self.tok.text!r} at top level")
        return signature, raw, default, entry


# ---------------------------------------------------------------------------
# name resolution and checking

BUILTIN_ARITY = {**S.CORE_OPS, **S.PRIM_OPS, **SUGAR_FUNCS}


class _Resolver:
    def __init__(self, signature, kinds: dict[str, tuple[str, int]]):
        self.sig = dict(signature)
        self.kinds = kinds

    def err(self, msg, node):
        raise ParseError(msg, getattr(node, "line", 0), getattr(node, "col", 0))

    def term(self, node, scope) -> S.Node:
        r = self.resolve(node, scope)
        if S.is_formula(r):
            self.err(f"expected a term, got formula {S.render(r)}", node)
        return r

    def formula(self, node, scope) -> S.Node:
        r = self.resolve(node, scope)
        if not S.is_formula(r):
            self.err(f"expected a formula, got term {S.render(r)}", node)
        return r

    def resolve(self, node, scope: frozenset) -> S.Node:
        T, F = self.term, self.formula
        if isinstance(node, _Name):
            if node.name in scope:
                return S.Var(node.name)
            if node.name in self.kinds:
                kind, arity = self.kinds[node.name]
                if arity != 0:
                    self.err(f"{node.name} expects {arity} arguments", node)
                return S.Call(node.name, (), kind)
            self.err(f"unbound variable {node.name!r}", node)
        if isinstance(node, _App):
            n, args = node.name, node.args
            if n in self.sig:
                if len(args) != self.sig[n]:
                    self.err(f"relation {n} has arity {self.sig[n]}, got {len(args)} arguments", node)
                return S.Rel(n, tuple(T(a, scope) for a in args))
            if n in self.kinds:
                kind, arity = self.kinds[n]
                if len(args) != arity:
                    self.err(f"{n} expects {arity} arguments, got {len(args)}", node)
                return S.Call(n, tuple(T(a, scope) for a in args), kind)
            if n == "tup":
                return S.TupleLit(tuple(T(a, scope) for a in args))
            if n in BUILTIN_ARITY:
                if len(args) != BUILTIN_ARITY[n]:
                    self.err(f"{n} expects {BUILTIN_ARITY[n]} arguments, got {len(args)}", node)
                a = tuple(T(x, scope) for x in args)
                if n in S.CORE_OPS or n in S.PRIM_OPS:
                    return S.Apply(n, a)
                return {"kpair": lambda: S.KPair(*a), "fst": lambda: S.Fst(*a),
                        "snd": lambda: S.Snd(*a), "concat": lambda: S.Concat(*a),
                        "proj": lambda: S.Proj(*a)}[n]()
            self.err(f"unknown identifier {n!r}", node)
        if isinstance(node, (S.Empty, S.Atoms, S.Bool, S.Ord, S.Nat)):
            return node
        if isinstance(node, S.Comp):
            inner = scope | {node.var}
            return S.Comp(T(node.result, inner), node.var, T(node.domain, scope),
                          None if node.filter is None else F(node.filter, inner))
        if isinstance(node, S.Quant):
            return S.Quant(node.kind, node.var, T(node.domain, scope),
                           F(node.body, scope | {node.var}))
        if isinstance(node, S.Iter):
            return S.Iter(node.var, T(node.body, scope | {node.var}))
        if isinstance(node, S.WSC):
            sx, sxy = scope | {node.x}, scope | {node.x, node.y}
            return S.WSC(node.x, node.y, T(node.step, sxy), T(node.choice, sx),
                         T(node.wit, sxy), self.resolve(node.out, sx))
        if isinstance(node, S.DC):
            sx, sxy = scope | {node.x}, scope | {node.x, node.y}
            return S.DC(node.x, node.y, T(node.step, sxy), T(node.choice, sx),
                        T(node.order, scope))
        if isinstance(node, S.SetOp):
            return S.SetOp(node.op, T(node.left, scope), T(node.right, scope))
        if isinstance(node, S.SetLit):
            return S.SetLit(tuple(T(e, scope) for e in node.elems))
        if isinstance(node, S.IfThen):
            return S.IfThen(F(node.cond, scope), T(node.then, scope), T(node.other, scope))
        if isinstance(node, S.Eq):
            return S.Eq(T(node.left, scope), T(node.right, scope))
        if isinstance(node, S.In):
            return S.In(T(node.elem, scope), T(node.coll, scope))
        if isinstance(node, S.Not):
            return S.Not(F(node.arg, scope))
        if isinstance(node, S.And):
            return S.And(F(node.left, scope), F(node.right, scope))
        if isinstance(node, S.Or):
            return S.Or(F(node.left, scope), F(node.right, scope))
        if isinstance(node, S.Implies):
            return S.Implies(F(node.left, scope), F(node.right, scope))
        raise TypeError(f"unexpected node {node!r}")


def parse_program(text: str) -> S.Program:
    """Parse a ``.bgs`` program; raises :class:`ParseError` with line:col."""
    p = _Parser(text)
    signature, raw, default, entry = p.program()
    kinds = {r[1]: (r[0], len(r[2])) for r in raw}
    for name, _ in signature:
        if name in kinds:
            raise ParseError(f"{name} is both a relation and a binding", raw[0][5].line, raw[0][5].col)
    res = _Resolver(signature, kinds)
    bindings = []
    for kind, name, params, body, bound, tok in raw:
        scope = frozenset(params)
        try:
            node = res.formula(body, scope) if kind == "formula" else res.term(body, scope)
        except ParseError as e:
            if e.line:
                raise
            # the offending node has no position of its own: point at the binding
            raise ParseError(f"in {kind} {name}: {e}", tok.line, tok.col) from None
        if bound is None:
            bound = default
        if bound is None:
            raise ParseError(f"binding {name} has no bound and no default bound is set",
                             tok.line, tok.col)
        bindings.append(S.Binding(kind, name, params, node, bound))
    if not bindings:
        raise ParseError("program has no bindings")
    if entry is None:
        entry_name = bindings[-1].name
    else:
        entry_name, et = entry
        if entry_name not in kinds:
            raise ParseError(f"entry {entry_name!r} is not a binding", et.line, et.col)
    return S.Program(tuple(signature), tuple(bindings), entry_name, default)


def parse_expr(text: str, signature=(), bindings: dict[str, tuple[str, int]] | None = None,
               scope=()) -> S.Node:
    """Parse a single term or formula with the given free variables in scope."""
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "eof":
        p.error(f"trailing input {p.tok.text!r}")
    return _Resolver(signature, bindings or {}).resolve(node, frozenset(scope))
