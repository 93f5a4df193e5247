"""Hash-consed hereditarily finite sets over a universe of atoms.

Every value is interned, so two structurally equal values are the same
Python object and equality is ``is``.  Sets keep their elements
deduplicated and in a canonical storage order: atoms first (by index),
then sets ordered by ``(tc_size, children)``.  That order is only a storage
detail; the single place where semantics look at it is :func:`compare_pure`,
which is restricted to atom-free values.
"""

from __future__ import annotations

import re
import threading
from typing import Iterable, Mapping, Sequence

ATOM = "atom"
SET = "set"
DAGGER_KIND = "dagger"


class HFError(ValueError):
    """Raised on misuse of the HF-set primitives."""


class HFValue:
    """An interned atom, set, or the error marker.

    Do not instantiate directly; use :func:`atom`, :func:`make_set` and
    friends.
    """

    __slots__ = ("kind", "index", "children", "tc_size", "pure", "key", "_members")

    def __init__(self, kind, index, children, tc_size, pure, key):
        self.kind = kind
        self.index = index
        self.children = children
        self.tc_size = tc_size
        self.pure = pure
        self.key = key
        self._members = None

    # interned: identity is equality
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __lt__(self, other):
        # storage order, handy for sorted() in diagnostics
        return self.key < other.key

    def __len__(self):
        return len(self.children)

    def __iter__(self):
        return iter(self.children)

    def __contains__(self, item):
        return item in self.members()

    def members(self) -> frozenset:
        m = self._members
        if m is None:
            m = self._members = frozenset(self.children)
        return m

    @property
    def is_atom(self) -> bool:
        return self.kind == ATOM

    @property
    def is_set(self) -> bool:
        return self.kind == SET

    @property
    def is_dagger(self) -> bool:
        return self.kind == DAGGER_KIND

    def __repr__(self):
        return render(self)


_LOCK = threading.RLock()
_ATOMS: dict[int, HFValue] = {}
_SETS: dict[tuple, HFValue] = {}
_ORDINALS: list[HFValue] = []

DAGGER = HFValue(DAGGER_KIND, None, (), 0, False, ("dagger",))


def atom(index: int) -> HFValue:
    """Return the interned atom with the given index."""
    if index < 0:
        raise HFError(f"atom index must be non-negative, got {index}")
    a = _ATOMS.get(index)
    if a is None:
        with _LOCK:
            a = _ATOMS.get(index)
            if a is None:
                a = HFValue(ATOM, index, (), 1, False, (0, index))
                _ATOMS[index] = a
    return a


def _tc_size(children: tuple) -> int:
    seen: set[int] = set()
    stack = list(children)
    while stack:
        v = stack.pop()
        if id(v) in seen:
            continue
        seen.add(id(v))
        stack.extend(v.children)
    return len(seen) + 1


def _intern(children: tuple) -> HFValue:
    ident = tuple(id(c) for c in children)
    s = _SETS.get(ident)
    if s is not None:
        return s
    with _LOCK:
        s = _SETS.get(ident)
        if s is None:
            tc = _tc_size(children)
            pure = all(c.pure for c in children)
            key = (1, tc, tuple(c.key for c in children))
            s = HFValue(SET, None, children, tc, pure, key)
            _SETS[ident] = s
    return s


def make_set(elems: Iterable[HFValue]) -> HFValue:
    """Build the set of ``elems`` (duplicates removed)."""
    uniq: dict[int, HFValue] = {}
    for e in elems:
        if not isinstance(e, HFValue):
            raise HFError(f"not an HF value: {e!r}")
        if e.kind == DAGGER_KIND:
            raise HFError("the error marker cannot be an element of a set")
        uniq[id(e)] = e
    children = tuple(sorted(uniq.values(), key=_storage_key))
    return _intern(children)


def _storage_key(v: HFValue):
    return v.key


def empty() -> HFValue:
    return EMPTY


EMPTY = _intern(())


def singleton(x: HFValue) -> HFValue:
    return make_set((x,))


def kuratowski_pair(x: HFValue, y: HFValue) -> HFValue:
    """``{{x}, {x, y}}``."""
    return make_set((make_set((x,)), make_set((x, y))))


def pair_components(p: HFValue) -> tuple[HFValue, HFValue] | None:
    """Invert :func:`kuratowski_pair`; ``None`` if ``p`` is not a pair."""
    if p.kind != SET or not 1 <= len(p.children) <= 2:
        return None
    parts = p.children
    if len(parts) == 1:
        only = parts[0]
        if only.kind != SET or len(only.children) != 1:
            return None
        x = only.children[0]
        return x, x
    a, b = parts
    if a.kind != SET or b.kind != SET:
        return None
    if len(a.children) == 1 and len(b.children) == 2:
        small, big = a, b
    elif len(b.children) == 1 and len(a.children) == 2:
        small, big = b, a
    else:
        return None
    x = small.children[0]
    if x not in big.members():
        return None
    y = big.children[0] if big.children[1] is x else big.children[1]
    return x, y


def von_neumann(n: int) -> HFValue:
    """The ordinal ``n`` as a pure set ``{0, ..., n-1}``."""
    if n < 0:
        raise HFError("ordinals are non-negative")
    if n < len(_ORDINALS):
        return _ORDINALS[n]
    with _LOCK:
        if not _ORDINALS:
            _ORDINALS.append(EMPTY)
        while len(_ORDINALS) <= n:
            _ORDINALS.append(make_set(_ORDINALS))
    return _ORDINALS[n]


def ordinal_value(x: HFValue) -> int | None:
    """Return ``n`` if ``x`` is the von Neumann ordinal ``n``, else ``None``."""
    if x.kind != SET or not x.pure:
        return None
    n = len(x.children)
    return n if von_neumann(n) is x else None


def tc_size(x: HFValue) -> int:
    """Number of distinct values in ``{x} | TC(x)``; an atom counts 1."""
    return x.tc_size


def transitive_closure(x: HFValue) -> list[HFValue]:
    """All values reachable from ``x`` through membership (``x`` excluded)."""
    seen: dict[int, HFValue] = {}
    stack = list(x.children)
    while stack:
        v = stack.pop()
        if id(v) in seen:
            continue
        seen[id(v)] = v
        stack.extend(v.children)
    return list(seen.values())


def compare_pure(x: HFValue, y: HFValue) -> int:
    """Total order on HF(empty): -1, 0 or 1.

    Smaller transitive closure first; ties broken by comparing the sorted
    element lists recursively.  Raises :class:`HFError` if an atom occurs.
    """
    if not (x.pure and y.pure):
        raise HFError("compare_pure is only defined on atom-free sets")
    if x is y:
        return 0
    return -1 if x.key < y.key else 1


def pure_sort_key(x: HFValue):
    if not x.pure:
        raise HFError("pure_sort_key is only defined on atom-free sets")
    return x.key


def atoms_of(x: HFValue) -> set[int]:
    """Indices of all atoms occurring anywhere in ``x``."""
    if x.kind == ATOM:
        return {x.index}
    out = set()
    for v in transitive_closure(x):
        if v.kind == ATOM:
            out.add(v.index)
    return out


def _check_bijection(phi: Mapping[int, int]) -> None:
    keys = set(phi)
    vals = set(phi.values())
    if len(vals) != len(phi) or keys != vals:
        raise HFError("permutation must be a bijection of a set of atoms")


def apply_permutation(x: HFValue, phi: Mapping[int, int] | Sequence[int],
                      check: bool = True) -> HFValue:
    """Rename atoms throughout ``x`` by ``phi``; unmapped atoms stay fixed."""
    if not isinstance(phi, Mapping):
        phi = dict(enumerate(phi))
    if check:
        _check_bijection(phi)
    memo: dict[int, HFValue] = {}

    def go(v: HFValue) -> HFValue:
        if v.kind == ATOM:
            j = phi.get(v.index, v.index)
            return v if j == v.index else atom(j)
        if v.pure or v.kind == DAGGER_KIND:
            return v
        r = memo.get(id(v))
        if r is None:
            r = make_set([go(c) for c in v.children])
            memo[id(v)] = r
        return r

    return go(x)


# --- tuples -----------------------------------------------------------------
# A tuple (t0, ..., t_{k-1}) is the set {<#i, t_i>} of Kuratowski pairs of a
# position ordinal and an entry.  The empty tuple is the empty set.

def make_tuple(items: Sequence[HFValue]) -> HFValue:
    return make_set(kuratowski_pair(von_neumann(i), v) for i, v in enumerate(items))


def tuple_items(x: HFValue) -> list[HFValue] | None:
    """Decode a tuple; ``None`` if ``x`` is not a well-formed tuple."""
    if x.kind != SET:
        return None
    k = len(x.children)
    out: list[HFValue | None] = [None] * k
    for p in x.children:
        comps = pair_components(p)
        if comps is None:
            return None
        i = ordinal_value(comps[0])
        if i is None or i >= k or out[i] is not None:
            return None
        out[i] = comps[1]
    return out  # type: ignore[return-value]


def atom_tuple(indices: Sequence[int]) -> HFValue:
    return make_tuple([atom(i) for i in indices])


def atoms_set(n: int) -> HFValue:
    return make_set(atom(i) for i in range(n))


# --- rendering ----------------------------------------------------------------

def render(x: HFValue, ordinals: bool = True) -> str:
    """Debug rendering: ``a3``, ``{a0, {}}``, ordinals as ``#n``."""
    if x.kind == DAGGER_KIND:
        return "†"
    if x.kind == ATOM:
        return f"a{x.index}"
    if ordinals and x.children:
        n = ordinal_value(x)
        if n is not None:
            return f"#{n}"
    return "{" + ", ".join(render(c, ordinals) for c in x.children) + "}"


_TOKEN = re.compile(r"\s*(?:(a\d+)|(#\d+)|([{},])|(†))")


def parse_value(text: str) -> HFValue:
    """Parse the rendering produced by :func:`render`."""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise HFError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    i = 0

    def value() -> HFValue:
        nonlocal i
        if i >= len(tokens):
            raise HFError("unexpected end of input")
        tok = tokens[i]
        i += 1
        if tok.startswith("a"):
            return atom(int(tok[1:]))
        if tok.startswith("#"):
            return von_neumann(int(tok[1:]))
        if tok == "†":
            return DAGGER
        if tok != "{":
            raise HFError(f"unexpected token {tok!r}")
        elems = []
        if i < len(tokens) and tokens[i] == "}":
            i += 1
            return EMPTY
        while True:
            elems.append(value())
            if i >= len(tokens):
                raise HFError("unterminated set")
            tok = tokens[i]
            i += 1
            if tok == "}":
                return make_set(elems)
            if tok != ",":
                raise HFError(f"expected ',' or '}}', got {tok!r}")

    v = value()
    if i != len(tokens):
        raise HFError("trailing input after value")
    return v
