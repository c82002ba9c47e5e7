from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhorn.dynamics import wootters_concurrence
from qhorn.horn import (
    FIXTURE_QUERIES,
    Clause,
    HornError,
    Registry,
    compact,
    fixture_path,
    normalize_clause,
    parse_goal,
    parse_program,
    solve,
    stratum,
    uncompact,
)
from qhorn.horn.builtins import SUSPEND, Context, Fail, evaluate
from qhorn.selftest import run_fixture

TOY = """
#op sx [[0,1],[1,0]].
#op sz [[1,0],[0,-1]].
#op half [[1,0],[0,1/2]].
#op conj antiunitary [[1,0],[0,1]].
#state plusi |0⟩+i|1⟩.
#system q 2 plusi.
#system r 2.
loop(X) :- loop(X).
nat(0).
nat(N) :- nat(M), succ(M, N).
"""


@pytest.fixture
def toy():
    return Registry.from_source(TOY)


def outcome(reg, goal, **kw):
    return reg.solve(goal, **kw).outcome


# -- builtins


def test_commutes(toy):
    assert outcome(toy, "commutes(kron(sx,eye(2)), kron(eye(2),sz))") == "proved"
    t = toy.solve("[kron(sx,eye(2)), kron(sz,eye(2))] = 0")
    assert t.outcome == "failed" and "commutator norm 2" in t.reason


def test_state_eq_phase(toy):
    assert outcome(toy, "state_eq(|0⟩, exp(7/10*i)|0⟩)") == "proved"
    assert outcome(toy, "state_eq(|0⟩+|1⟩, 2|0⟩+2|1⟩)") == "proved"
    t = toy.solve("state_eq(|0⟩, |1⟩)")
    assert t.outcome == "failed" and "state mismatch" in t.reason


def test_decoration_violation(toy):
    with pytest.raises(HornError, match="decoration violation"):
        toy.solve("unitary_apply(half, q)")
    with pytest.raises(HornError, match="decoration violation"):
        toy.solve("@2 half(q)")
    with pytest.raises(HornError, match="decoration violation"):
        toy.solve("@0 sx(q)")
    with pytest.raises(HornError, match="decoration violation"):
        toy.solve("walk_step(w, V)")
    # a plain operator predicate may be non-unitary; the state is renormalized
    assert outcome(toy, "@1 half(q)") == "proved"


def test_dimension_errors_propagate(toy):
    with pytest.raises(HornError, match="does not fit"):
        toy.solve("@2 sx(q, r)")
    with pytest.raises(HornError, match="not a declared system"):
        toy.solve("@2 sx(nowhere)")


def test_antiunitary_conjugates_and_inverts(toy):
    t = toy.solve("@2 conj(q), reduced(q, X)")
    assert t.outcome == "proved"
    assert np.allclose(toy.world.psi[[0, 2]] * np.sqrt(2), [1, -1j])
    toy.solve("@2 conj(q)^dag")
    assert np.allclose(toy.world.psi[[0, 2]] * np.sqrt(2), [1, 1j])


def test_unitary_apply_and_dagger(toy):
    toy.solve("unitary_apply(sx, r)")
    assert abs(toy.world.reduced(["r"])[1, 1] - 1) < 1e-12
    toy.solve("@2 sx(r)^dag")
    assert abs(toy.world.reduced(["r"])[0, 0] - 1) < 1e-12


def test_measure_records_distribution(toy):
    t = toy.solve("measure(q, K)*")
    assert t.outcome == "proved"
    (rec,) = toy.world.log
    assert rec.sampled and dict(rec.distribution) == {"0": 0.5, "1": 0.5}
    assert rec.outcome == t.bindings["K"]
    again = Registry.from_source(TOY).solve("measure(q, K)*")
    assert again.bindings == t.bindings


def test_measure_impossible_outcome_is_contradiction(toy):
    toy.solve("measure(r, |0⟩)*")
    t = toy.solve("~measure(r, |1⟩)*")
    assert t.outcome == "refuted"
    assert any("probability" in c for c in t.contradictions)


def test_prob_and_reduced(toy):
    t = toy.solve("prob(q, |1⟩, P), reduced(q, r, Z)")
    assert t.outcome == "proved"
    assert float(t.bindings["P"]) == pytest.approx(0.5)
    assert t.bindings["Z"] == "0.707106781187|00⟩ + 0.707106781187*I|10⟩"


def test_cond_expect_and_commutant():
    reg = Registry.from_source("#op sz [[1,0],[0,-1]].\n#op sx [[0,1],[1,0]].\n#op d [[2,0],[0,5]].\n#state p 0.6|0⟩+0.8|1⟩.\n#system q 2 p.")
    assert outcome(reg, "in_commutant(d, sz)") == "proved"
    assert outcome(reg, "in_commutant(sx, sz)") == "failed"
    t = reg.solve("cond_expect(d, sz, q, E)")
    assert t.outcome == "proved"
    t = reg.solve("cond_expect(sx, sz, q, E)")
    assert t.outcome == "failed" and "not conditionable" in t.reason


def test_builtins_suspend_on_unbound_inputs(toy):
    ctx = Context(toy)
    (p,) = parse_goal("tensor(A, B, C)")
    assert evaluate(ctx, p, {}, toy.world) is SUSPEND
    (q,) = parse_goal("state_eq(|0⟩, |1⟩)")
    r = evaluate(ctx, q, {}, toy.world)
    assert isinstance(r, Fail) and r.contradiction


def test_flounder(toy):
    t = toy.solve("tensor(A, B, C)")
    assert t.outcome == "failed" and "insufficiently instantiated" in t.reason


def test_coroutining_orders_producer_first(toy):
    t = toy.solve("tensor(A, |1⟩, C), A = |0⟩")
    assert t.outcome == "proved"
    assert t.bindings["C"] == "|01⟩"


# -- engine


def test_depth_limit(toy):
    t = toy.solve("loop(1)", max_depth=10)
    assert t.outcome == "failed" and "depth limit 10" in t.reason
    assert toy.solve("~loop(1)", max_depth=10).outcome == "failed"


def test_step_limit(toy):
    t = toy.solve("nat(100000)", max_depth=1000, max_steps=50)
    assert t.outcome == "failed" and "step limit 50" in t.reason
    with pytest.raises(ValueError):
        toy.solve("nat(1)", max_steps=0)


def test_recursion_through_succ(toy):
    assert outcome(toy, "nat(5)") == "proved"


def test_negated_goal_must_be_single(toy):
    with pytest.raises(HornError):
        toy.solve("~nat(1), nat(2)")


def test_negation_of_provable_goal_fails(toy):
    t = toy.solve("~nat(0)")
    assert t.outcome == "failed"


def test_unmatched_goal_fails_softly(toy):
    t = toy.solve("~unknown(1)")
    assert t.outcome == "failed" and "no clause matches" in t.reason


def test_trace_text_format(toy):
    text = toy.solve("nat(1)").to_text()
    lines = text.splitlines()
    assert lines[0] == "goal: nat(1)"
    assert "outcome: proved" in lines
    assert any(line.startswith("call nat(1) via clause") for line in lines)
    assert any(line.startswith("  ") for line in lines)


def test_failed_proof_keeps_world(toy):
    before = toy.world
    toy.solve("@2 sx(r), state_eq(|0⟩, |1⟩)")
    assert toy.world is before


# -- braiding and compactness


def test_braiding_normalizes_identically():
    (c1,) = parse_program("p(X) :- p(X), r(X).").clauses
    (c2,) = parse_program("p(X) :- r(X), p(X).").clauses
    assert normalize_clause(c1).body == normalize_clause(c2).body
    (fact,) = parse_program("p(a).").clauses
    assert normalize_clause(fact) == fact


def test_strata_order():
    preds = parse_goal("reduced(a, X), measure(a, K)*, @2 u(a), helper(a), state_eq(|0⟩, |0⟩)")
    assert [stratum(p) for p in preds] == [4, 3, 1, 1, 0]


def test_compactness_round_trip():
    (c,) = parse_program("@1 p(X) :- @1 q(X), r(X).").clauses
    headless = compact(c)
    assert headless.head is None
    assert headless.body[-1].dagger and headless.body[-1].functor == "p"
    assert uncompact(headless) == c


def test_compactness_needs_operator_level_head():
    for src in ("@0 p(X) :- q(X).", "p(X) :- q(X)."):
        (c,) = parse_program(src).clauses
        with pytest.raises(HornError):
            compact(c)
    (c,) = parse_program("@2 p(X) :- q(X).").clauses
    with pytest.raises(HornError):
        compact(compact(c))
    with pytest.raises(HornError):
        uncompact(Clause(None, c.body, c.line))


@settings(max_examples=10)
@given(st.sampled_from(sorted(FIXTURE_QUERIES)), st.randoms(use_true_random=False))
def test_braiding_invariance_on_fixtures(name, rnd):
    base, base_reg = run_fixture(name)

    def shuffle(body):
        body = list(body)
        rnd.shuffle(body)
        return tuple(body)

    other, other_reg = run_fixture(name, permute=shuffle)
    assert [(r[1], r[2]) for r in base] == [(r[1], r[2]) for r in other]
    assert np.allclose(base_reg.world.psi, other_reg.world.psi, atol=1e-12)


@pytest.mark.parametrize("name", sorted(FIXTURE_QUERIES))
def test_determinism(name):
    a, _ = run_fixture(name, seed=5)
    b, _ = run_fixture(name, seed=5)
    assert [r[3] for r in a] == [r[3] for r in b]


# -- soundness on ground goals

GROUND = [
    "commutes(sx, sx)",
    "commutes(sx, sz)",
    "state_eq(|0⟩, exp(1/3*i)|0⟩)",
    "state_eq(|0⟩, |1⟩)",
    "basis(|1⟩)",
    "basis(|0⟩+|1⟩)",
    "tensor(|0⟩, |1⟩, |01⟩)",
    "tensor(|0⟩, |1⟩, |10⟩)",
    "in_commutant(sz, sz)",
    "in_commutant(sx, sz)",
    "succ(2, 3)",
    "succ(2, 2)",
    "|0⟩ = |0⟩",
    "prob(q, |0⟩, 1/2)",
]


def direct(reg, text):
    (p,) = parse_goal(text, [str(k) for k in reg.params])
    r = evaluate(Context(reg), p, {}, reg.world)
    return not isinstance(r, Fail) and r is not SUSPEND and len(r) > 0


@given(st.lists(st.sampled_from(GROUND), min_size=1, max_size=4))
def test_soundness_on_ground_conjunctions(goals):
    reg = Registry.from_source(TOY)
    want = all(direct(reg, g) for g in goals)
    assert (reg.solve(", ".join(goals)).outcome == "proved") == want


def test_soundness_on_fixture_ground_goals():
    reg = Registry.from_file(fixture_path("noclone.qh"))
    for g in ("basis(|0⟩)", "tensor(|1⟩, |1⟩, |11⟩)", "state_eq(a|0⟩+b|1⟩, 0.6|0⟩+0.8|1⟩)"):
        assert direct(reg, g)
        assert reg.solve(g).outcome == "proved"


# -- fixtures


def test_herald_fixture():
    results, reg = run_fixture("herald.qh")
    assert results[0][1] == "proved"
    rho = reg.world.reduced(["nv1", "nv2"])
    bell = np.array([0, 1, 1, 0]) / np.sqrt(2)
    assert abs(bell @ rho @ bell - 1) < 1e-10
    assert abs(wootters_concurrence(rho) - 1) < 1e-10
    (rec,) = reg.world.log
    assert rec.outcome == "|01⟩" and rec.probability == pytest.approx(0.25)


def test_noclone_fixture():
    results, _ = run_fixture("noclone.qh")
    (_, pos, _, text), (_, neg, _, _) = results
    assert pos == "failed" and neg == "refuted"
    for eq in ("a**2 = a", "a*b = 0", "b**2 = b"):
        assert eq in text


def test_noclone_basis_states_clone():
    reg = Registry.from_file(fixture_path("noclone.qh"))
    assert reg.solve("clone(|0⟩, |0⟩)").outcome == "proved"
    assert reg.solve("~clone(|1⟩, |1⟩)").outcome == "failed"


def test_probe_fixture():
    results, reg = run_fixture("probe.qh")
    assert [r[1] for r in results] == ["proved", "proved", "proved", "failed"]
    assert "disturbed" in results[3][3]
    assert "P(pointer agrees) = 0.5" in results[3][3]


def test_probe_without_disturbance_keeps_statistics():
    reg = Registry.from_file(fixture_path("probe.qh"))
    for g in ("probe(sz,pa)", "probe(sz,pb)", "same_stats(sz,s,pa)", "same_stats(sz,s,pb)"):
        assert reg.solve(g).outcome == "proved", g


def test_walk_fixture():
    results, _ = run_fixture("walk.qh")
    (_, d_out, d_bind, _), (_, p_out, _, _), (_, w_out, _, _) = results
    assert d_out == "proved" and p_out == "proved"
    values = [float(x) for x in d_bind["D"].split("[")[1].rstrip("]>").split(",")]
    assert values == pytest.approx([0.125, 0, 0.125, 0, 0.625, 0, 0.125])
    assert w_out == "refuted"


def test_solve_accepts_predicates(toy):
    preds = parse_goal("nat(2)")
    assert solve(preds, toy).outcome == "proved"
    assert solve(preds[0], toy).outcome == "proved"
