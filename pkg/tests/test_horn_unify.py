import sympy
from hypothesis import given
from hypothesis import strategies as st

from qhorn.horn import Atom, Compound, Ket, Num, Var, kets_equal, parse_goal, unify
from qhorn.horn.unify import resolve, unify_preds

X, Y, Z = Var("X"), Var("Y"), Var("Z")


def test_unify_example():
    (a,) = parse_goal("herald(X, nv2)")
    (b,) = parse_goal("herald(nv1, Y)")
    s = unify_preds(a, b, {})
    assert s == {X: Atom("nv1"), Y: Atom("nv2")}


def test_occurs_check():
    assert unify(Compound("f", (X,)), X, {}) is None
    assert unify(X, Compound("g", (Compound("f", (X,)),)), {}) is None
    s = unify(X, Y, {})
    assert unify(Y, Compound("f", (X,)), s) is None


def test_global_phase():
    phased = Ket.build([("0", sympy.exp(sympy.I * sympy.Rational(7, 10)))])
    plain = Ket.build([("0", 1)])
    assert unify(phased, plain, {}) == {}
    assert unify(Compound("state", (phased,)), Compound("state", (plain,)), {}) == {}
    assert unify(plain, Ket.build([("1", 1)]), {}) is None
    assert unify(plain, Ket.build([("00", 1)]), {}) is None


def test_kets_normalized_before_comparison():
    a = Ket.build([("0", 3), ("1", 4)])
    b = Ket.build([("0", sympy.Rational(3, 5)), ("1", sympy.Rational(4, 5))])
    assert kets_equal(a, b, {})
    params = {sympy.Symbol("a"): 0.6, sympy.Symbol("b"): 0.8}
    sym = Ket.build([("0", sympy.Symbol("a")), ("1", sympy.Symbol("b"))])
    assert kets_equal(sym, b, params)
    assert not kets_equal(sym, b, {})


def test_numbers():
    assert unify(Num(sympy.Rational(1, 2)), Num(sympy.Float(0.5)), {}) == {}
    one, two = Num(sympy.Integer(1)), Num(sympy.Integer(2))
    assert unify(one, two, {}) is None
    assert unify(one, Atom("one"), {}) is None


def test_bindings_compose():
    s = unify(Compound("f", (X, Y)), Compound("f", (Y, Atom("a"))), {})
    assert resolve(X, s) == Atom("a")
    assert unify(X, X, {}) == {}


terms = st.recursive(
    st.sampled_from([Atom("a"), Atom("b"), X, Y, Z]),
    lambda inner: st.builds(lambda f, args: Compound(f, tuple(args)), st.sampled_from(["f", "g"]), st.lists(inner, min_size=1, max_size=2)),
    max_leaves=6,
)


@given(terms, terms)
def test_unifier_makes_terms_equal(a, b):
    s = unify(a, b, {})
    if s is not None:
        assert resolve(a, s) == resolve(b, s)
    assert (s is None) == (unify(b, a, {}) is None)
