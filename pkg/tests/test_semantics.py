"""Tests for the evaluators: linear, relational and bounded branching time."""
import functools
import itertools
import sys

import pytest

from automata import CapExceeded
from models import KripkeTree, LassoTrace, TraceSet, trace
from semantics import (
    PositionSet, Valuation, Verdict, eval_branching, eval_linear, eval_linear_naive, eval_ltl,
    eval_relational_bounded, eval_relational_branching, eval_relational_linear, lasso_labelings, linear_witness,
)
from syntax import (
    And, Atom, Eventually, Exists, Forall, FormulaError, Globally, Iff, Next, Not, Or, Pred, Until,
    Var, parse,
)

LEVEL_AGREEMENT = "forall x. forall y. E(x, y) -> (P_a(x) <-> P_a(y))"


UNARY = (Not, Next, Eventually, Globally)
BINARY = (And, Or, Until, Iff)
PREFIXES = [(Exists, Exists), (Exists, Forall), (Forall, Exists), (Forall, Forall)]


@functools.cache
def _matrices(size: int) -> tuple:
    """Every HyperLTL matrix over a[p], a[q] with exactly ``size`` nodes."""
    if size == 1:
        return Atom("a", "p"), Atom("a", "q")
    out = [op(f) for op in UNARY for f in _matrices(size - 1)]
    for left in range(1, size - 1):
        out += [op(l, r) for op in BINARY for l in _matrices(left) for r in _matrices(size - 1 - left)]
    return tuple(out)


def _short_tracesets(bound: int) -> list[TraceSet]:
    """All sets of one or two distinct lassos over {a} with |u|+|v| ≤ bound."""
    lassos = [lab.map(lambda b: frozenset({"a"}) if b else frozenset()) for lab in lasso_labelings(bound)]
    return ([TraceSet(("a",), (t,)) for t in lassos]
            + [TraceSet(("a",), pair) for pair in itertools.combinations(lassos, 2)])


def test_eval_linear_agrees_with_naive_evaluator():
    """Test the automaton evaluator against explicit enumeration on every formula of up to six nodes."""
    sets = _short_tracesets(3)
    formulas = [outer("p", inner("q", m)) for size in range(1, 5) for m in _matrices(size)
                for outer, inner in PREFIXES]
    assert len(formulas) == 4 * (2 + 8 + 48 + 320)
    for n, f in enumerate(formulas):
        ts = sets[n % len(sets)]
        assert eval_linear(f, ts) == eval_linear_naive(f, ts), (f, ts)


def test_observational_determinism(two_traces):
    """Test that two traces differing at position 0 violate observational determinism."""
    f = parse("forall p1. forall p2. G (a[p1] <-> a[p2])", "hyperltl")
    assert not eval_linear(f, two_traces)
    assert eval_linear(f, TraceSet(("a",), (two_traces.traces[0],)))


def test_exists_forall_dominating_trace(two_traces):
    """Test an ∃∀ property: some trace carries a wherever any trace does."""
    f = parse("exists p. forall p2. G (a[p2] -> a[p])", "hyperltl")
    assert eval_linear(f, two_traces)
    assert eval_linear_naive(f, two_traces)
    empty = TraceSet(("a",), (trace([], [[]]), trace([["a"]], [[]]), trace([[]], [["a"]])))
    assert not eval_linear(f, empty)


def test_plain_ltl_must_hold_on_every_trace(two_traces):
    """Test that trace-quantifier-free formulas are checked on each trace."""
    assert eval_linear(parse("F a", "ltl"), two_traces)
    assert not eval_linear(parse("a", "ltl"), two_traces)
    assert eval_linear(parse("X G a", "ltl"), two_traces)


def test_linear_witness_names_the_traces(two_traces):
    """Test that the witness binds the leading existential quantifiers."""
    f = parse("exists p. exists p2. F (a[p] & !a[p2])", "hyperltl")
    assert linear_witness(f, two_traces) == {"p": two_traces.traces[0], "p2": two_traces.traces[1]}
    assert linear_witness(parse("forall p. F a[p]", "hyperltl"), two_traces) is None
    assert linear_witness(parse("exists p. G !a[p]", "hyperltl"), two_traces) is None


def test_hyperqptl_with_a_shared_proposition(two_traces):
    """Test a propositional quantifier shared by all trace quantifiers."""
    f = parse("exists q. forall p. F q & G (q -> a[p])", "hyperqptl")
    assert eval_linear(f, two_traces)
    g = parse("exists q. forall p. q & G (q -> a[p])", "hyperqptl")
    assert not eval_linear(g, two_traces)
    assert eval_linear_naive(g, two_traces, labeling_bound=3) is False


def test_linear_evaluation_rejects_bad_input(two_traces):
    """Test that free trace variables and non-prenex formulas are refused."""
    with pytest.raises(FormulaError):
        eval_linear(Globally(Atom("a", "p")), two_traces)
    with pytest.raises(FormulaError):
        eval_linear(And(Globally(Atom("a")), Exists("p", Atom("a", "p"))), two_traces)


def test_state_cap_is_enforced(two_traces):
    """Test that an alternation needing complementation reports the cap it hit."""
    f = parse("exists q. forall r. G (q <-> X r)", "qptl")
    with pytest.raises(CapExceeded):
        eval_linear(f, two_traces, cap=1)


def test_lasso_labelings_are_distinct():
    """Test that bounded labelings are normalized and pairwise different."""
    labs = lasso_labelings(3)
    assert len(labs) == len(set(labs))
    assert all(lab.span <= 3 for lab in labs)
    assert lasso_labelings(1) == [LassoTrace((), (False,)), LassoTrace((), (True,))]


def test_eval_ltl_positions():
    """Test evaluation at a later position of a lasso word."""
    w = trace([[]], [["a"], []])
    assert not eval_ltl(Atom("a"), w)
    assert eval_ltl(Atom("a"), w, 1)
    assert eval_ltl(parse("G F a & G F !a", "ltl"), w)


@pytest.mark.parametrize("single,expected", [(False, False), (True, True)])
def test_level_agreement(two_traces, single, expected):
    """Test an FO[<,E] formula comparing positions across traces."""
    ts = TraceSet(("a",), two_traces.traces[:1]) if single else two_traces
    f = parse(LEVEL_AGREEMENT, "foe")
    assert eval_relational_linear(f, ts) is expected
    assert eval_relational_bounded(f, ts, horizon=4) is expected


def test_relational_order_and_successor(two_traces):
    """Test the order and successor terms on a single trace."""
    f = parse("exists x. exists y. x < y & !P_a(x) & P_a(y)", "foe")
    assert eval_relational_linear(f, two_traces)
    g = parse("exists x. !P_a(x) & P_a(S(x)) & min(x) = x", "s1se")
    assert eval_relational_linear(g, two_traces)
    h = parse("exists x. exists y. x < y & P_a(x) & !P_a(y)", "foe")
    assert not eval_relational_linear(h, two_traces)


def test_free_first_order_values(two_traces):
    """Test explicit first-order values and the error for a missing one."""
    f = Pred("a", Var("x"))
    assert eval_relational_linear(f, two_traces, valuation=Valuation(fo={"x": (0, 0)}))
    assert not eval_relational_linear(f, two_traces, valuation=Valuation(fo={"x": (1, 0)}))
    assert eval_relational_linear(f, two_traces, valuation=Valuation(fo={"x": (1, 3)}))
    with pytest.raises(FormulaError):
        eval_relational_linear(f, two_traces)


def test_s1s_free_set_variables_read_propositions(two_traces):
    """Test that X_a defaults to the positions carrying a, and explicit sets override it."""
    f = parse("exists x. x in X_a & !P_a(x)", "s1se")
    assert not eval_relational_linear(f, two_traces)
    g = parse("forall x. x in Y -> P_a(x)", "s1se")
    evens = {0: PositionSet.finite([0, 2]), 1: PositionSet.finite([2])}
    assert eval_relational_linear(g, two_traces, valuation=Valuation(so={"Y": evens}))
    odd_start = {0: PositionSet.finite([]), 1: PositionSet.finite([0])}
    assert not eval_relational_linear(g, two_traces, valuation=Valuation(so={"Y": odd_start}))


def test_second_order_quantifier(two_traces):
    """Test an S1S[E] formula quantifying over a set of positions."""
    f = parse("exists X. (exists x. x in X & !P_a(x)) & (exists y. y in X & P_a(y))", "s1se")
    assert eval_relational_linear(f, two_traces)
    g = parse("exists X. (exists x. x in X & !P_a(x)) & (exists y. y in X & P_a(y) & !P_a(y))", "s1se")
    assert not eval_relational_linear(g, two_traces)


def test_bounded_second_order_cap_comes_from_settings(two_traces, fresh_settings):
    """Test that the second-order domain cap is read from the semantics settings."""
    f = parse("exists X. (exists x. x in X & !P_a(x)) & (exists y. y in X & P_a(y))", "s1se")
    assert fresh_settings.semantics.so_cap == 16
    assert eval_relational_bounded(f, two_traces, horizon=2)
    fresh_settings.semantics.so_cap = 3
    with pytest.raises(CapExceeded):
        eval_relational_bounded(f, two_traces, horizon=2)
    assert eval_relational_bounded(f, two_traces, horizon=2, so_cap=4)


@pytest.mark.parametrize("text,logic,expected", [
    ("E X G a", "ctlstar", Verdict.TRUE),
    ("A X G a", "ctlstar", Verdict.FALSE),
    ("A X (a | !a)", "ctlstar", Verdict.UNDECIDED),
    ("E X a & E X !a", "ctlstar", Verdict.TRUE),
    ("exists p. exists q. X (a[p] & !a[q])", "hyperctlstar", Verdict.TRUE),
    ("forall p. K{}[p] X a[p]", "hyperkctlstar", Verdict.FALSE),
])
def test_branching_verdicts(branching_tree, text, logic, expected):
    """Test three-valued verdicts on the two-branch tree."""
    assert eval_branching(parse(text, logic), branching_tree) is expected


def test_universal_verdict_on_a_deterministic_structure():
    """Test that a single-path structure makes universal path quantifiers exhaustive."""
    k = KripkeTree.linear(trace([], [["a"]]))
    assert eval_branching(parse("A G F a", "ctlstar"), k) is Verdict.TRUE
    assert eval_branching(parse("A F !a", "ctlstar"), k) is Verdict.FALSE


def test_knowledge_distinguishes_observations(branching_tree):
    """Test that observing a rules out the branch that lacks it, while observing nothing does not."""
    observing = parse("forall p. X (a[p] -> K{a}[p] a[p])", "hyperkctlstar")
    blind = parse("forall p. X (a[p] -> K{}[p] a[p])", "hyperkctlstar")
    assert eval_branching(observing, branching_tree) is Verdict.UNDECIDED
    assert eval_branching(blind, branching_tree) is Verdict.FALSE


def test_branching_input_errors(branching_tree):
    """Test the path bound check and temporal operators outside a path quantifier."""
    f = parse("E F a", "ctlstar")
    with pytest.raises(ValueError):
        eval_branching(f, branching_tree, path_bound=0)
    with pytest.raises(FormulaError):
        eval_branching(Globally(Atom("a")), branching_tree)


def test_definite_verdicts_are_stable_under_larger_bounds(branching_tree):
    """Test that raising the path bound never flips a definite verdict."""
    for text in ["E X G a", "A X G a", "E F (a & X a)", "A F G !a"]:
        f = parse(text, "ctlstar")
        low = eval_branching(f, branching_tree, path_bound=2)
        high = eval_branching(f, branching_tree, path_bound=5)
        if low.definite:
            assert high is low, text


@pytest.mark.parametrize("text,mple,expected", [
    ("exists x. P_a(x)", True, Verdict.TRUE),
    ("forall x. P_a(x)", True, Verdict.FALSE),
    ("exists X. exists x. x in X & P_a(x)", True, Verdict.TRUE),
    ("exists X. exists x. x in X & !P_a(x)", False, Verdict.TRUE),
])
def test_relational_branching(branching_tree, text, mple, expected):
    """Test MPL[E] and MSO[E] on the two-branch tree."""
    f = parse(text, "mple" if mple else "msoe")
    assert eval_relational_branching(f, branching_tree, mple=mple) is expected


def test_relational_branching_guarded_universal_is_exhaustive(branching_tree):
    """Test that a universal quantifier tied to a bound node gets a definite answer."""
    f = parse("exists x. P_a(x) & forall y. (y < x | y = x) -> (P_a(y) | !P_a(y))", "mple")
    assert eval_relational_branching(f, branching_tree, mple=True) is Verdict.TRUE
    with pytest.raises(FormulaError):
        eval_relational_branching(Pred("a", Var("x")), branching_tree, mple=True)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
