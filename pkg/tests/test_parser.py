"""Program text, name resolution and the output-elimination rewrite."""

import pytest

from choiceless import syntax as S
from choiceless.battery import PROGRAMS, load_program, program_source
from choiceless.parser import ParseError, parse_expr, parse_program
from choiceless.syntax import Polynomial, eliminate_outputs


def test_polynomial_evaluation():
    p = Polynomial((64, 0, 0, 4))  # 4 n^3 + 64
    assert p(0) == 64 and p(2) == 96
    assert Polynomial.const(7)(100) == 7


def test_precedence_of_connectives():
    e = parse_expr("a = b \\/ b = c /\\ ~c = a", scope=["a", "b", "c"])
    assert isinstance(e, S.Or)
    assert isinstance(e.right, S.And)
    assert isinstance(e.right.right, S.Not)
    imp = parse_expr("a = b -> b = c -> a in c", scope=["a", "b", "c"])
    assert isinstance(imp, S.Implies) and isinstance(imp.right, S.Implies)


def test_set_operators_are_left_associative():
    e = parse_expr("a cup b \\ c", scope=["a", "b", "c"])
    assert isinstance(e, S.SetOp) and e.op == "minus"
    assert isinstance(e.left, S.SetOp) and e.left.op == "cup"


def test_wsc_binds_its_variables():
    e = parse_expr("wsc x y (x cup {y}; atoms \\ x; {}; x = atoms)")
    assert isinstance(e, S.WSC) and (e.x, e.y) == ("x", "y")


@pytest.mark.parametrize("text, fragment", [
    ("signature { E/2; } term t := foo(atoms); entry t;", "unknown identifier"),
    ("signature { E/2; } term t := E(atoms); entry t;", "E"),
    ("signature { E/2; } formula f := atoms; entry f;", "formula"),
    ("term t := {x | x in atoms; entry t;", ""),
    ("signature { E/2; } term t := wsc x y (x; atoms; {}; y); entry t;", "y"),
])
def test_errors_carry_positions(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_program(text)
    assert fragment in str(info.value)
    assert info.value.line >= 1


def test_every_bundled_program_parses():
    for name, entry in PROGRAMS:
        prog = load_program(name, entry)
        assert prog.binding(prog.entry) is not None
        assert "//" in program_source(name)  # each file explains itself


def test_bound_attaches_to_preceding_binding():
    prog = parse_program("bound n + 1; term a := atoms; bound n^2; term b := atoms; entry b;")
    assert prog.default_bound(3) == 4
    assert prog.binding("a").bound(3) == 9


def test_output_elimination_rewrites_only_term_outputs():
    prog = load_program("isolated_set", "how_many")
    q = eliminate_outputs(prog, Polynomial((8, 1)))
    assert q != prog
    assert "todag" in S.render(q.binding("how_many").body)
    # a formula-valued wsc has nothing to rewrite
    f = load_program("threshold")
    assert eliminate_outputs(f, Polynomial((8, 1))) == f
