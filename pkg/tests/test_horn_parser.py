import numpy as np
import pytest
import sympy

from qhorn.horn import Atom, Compound, HornError, Ket, Num, ParseError, Registry, Var, parse_goal, parse_program


def test_example_clause():
    prog = parse_program("@2 entangle(SQ,PQ) :- @2 hadamard(SQ,PQ), state(SQ) = psi.")
    assert len(prog.clauses) == 1
    c = prog.clauses[0]
    assert c.head.deco == 2 and c.head.functor == "entangle"
    assert c.head.args == (Var("SQ"), Var("PQ"))
    assert [p.functor for p in c.body] == ["hadamard", "="]
    assert c.body[1].args == (Compound("state", (Var("SQ"),)), Atom("psi"))


def test_empty_program():
    prog = parse_program("")
    assert prog.clauses == [] and prog.directives == []
    assert parse_program("% only a comment\n").clauses == []


def test_missing_comma_is_syntax_error():
    with pytest.raises(ParseError, match="line 1, column 14: expected ',' or '.'"):
        parse_program("p(X) :- q(X) r(X).")


def test_error_positions_and_decorations():
    with pytest.raises(ParseError, match="line 2"):
        parse_program("p(a).\np(.")
    with pytest.raises(ParseError, match="unknown decoration"):
        parse_program("@4 p(a).")
    with pytest.raises(ParseError, match="unknown directive"):
        parse_program("#thing x.")
    with pytest.raises(ParseError, match="negated"):
        parse_program("~p(a).")


def test_measurement_dagger_and_negation_flags():
    (p,) = parse_goal("measure(a,b,|01⟩)*")
    assert p.measured and p.args[2] == Ket.build([("01", 1)])
    (q,) = parse_goal("@2 u(a)^dag")
    assert q.dagger and q.deco == 2
    (r,) = parse_goal("~clone(X, Y)")
    assert r.negated


def test_commutator_constraint():
    (p,) = parse_goal("[heis(u, x), y] = 0")
    assert p.functor == "commutes"
    with pytest.raises(ParseError, match="= 0"):
        parse_goal("[x, y] = 1")


def test_ket_literals():
    (p,) = parse_goal("f(0.6|0⟩ - 0.8|1⟩, -|1>, 1/sqrt(2)*|0⟩)")
    k1, k2, k3 = p.args
    assert k1.coeff("0") == sympy.Rational(3, 5) and k1.coeff("1") == -sympy.Rational(4, 5)
    assert k2.coeff("1") == -1
    assert k3.coeff("0") == 1 / sympy.sqrt(2)
    with pytest.raises(ParseError):
        parse_goal("f(|⟩)")


def test_numbers_are_exact():
    (p,) = parse_goal("f(0.5, 2, 1e3)")
    assert [a.value for a in p.args] == [sympy.Rational(1, 2), 2, 1000]
    assert all(isinstance(a, Num) for a in p.args)


def test_params_become_symbols():
    (p,) = parse_goal("f(a|0⟩+b|1⟩)", params=["a", "b"])
    assert p.args[0].coeff("0") == sympy.Symbol("a")
    (q,) = parse_goal("f(a)")
    assert q.args[0] == Atom("a")


def test_directives():
    prog = parse_program(
        "#op u antiunitary [[0,1],[1,0]].\n#state s |0⟩+|1⟩.\n#system q 2 s.\n#param t 0.5.\n#walk w.\n#fock r 1.0 4."
    )
    kinds = [(d.kind, d.name) for d in prog.directives]
    assert kinds == [("op", "u"), ("state", "s"), ("system", "q"), ("param", "t"), ("walk", "w"), ("fock", "r")]
    mat, anti = prog.directives[0].args
    assert anti and np.array_equal(mat, [[0, 1], [1, 0]])
    assert prog.directives[2].args == (2, "s")
    with pytest.raises(ParseError, match="ragged"):
        parse_program("#op u [[1,0],[1]].")


def test_headless_clause():
    prog = parse_program(":- p(X), q(X).")
    assert prog.clauses[0].head is None and len(prog.clauses[0].body) == 2
    with pytest.raises(ParseError):
        parse_program(":- .")


def test_registry_load_errors():
    with pytest.raises(HornError, match="unbound operator name 'hadamard'"):
        Registry.from_source("#system q 2.\n@2 e(Q) :- @2 hadamard(Q).")
    with pytest.raises(HornError, match="already defined"):
        Registry.from_source("#op u [[1]].\n#op u [[1]].")
    with pytest.raises(HornError, match="unknown initial state"):
        Registry.from_source("#system q 2 nope.")
    with pytest.raises(HornError, match="not square"):
        Registry.from_source("#op u [[1,0]].")
    with pytest.raises(HornError, match="wrong dimension"):
        Registry.from_source("#state s |00⟩.\n#system q 2 s.")
