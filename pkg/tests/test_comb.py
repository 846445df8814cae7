"""Tests for combs: construction, frontiers, cuts, pumping, bounds and the bounded ∃* search."""
import itertools
import random
import sys
from collections import Counter

import pytest

import comb
from automata import TRUE_GUARD, BuchiAutomaton, Guard, membership, pair_automaton
from comb import (
    BoundOverflow, Comb, CombError, bound_b, bound_b_prime, build_comb, cut, cuttable, cuttable_counts,
    demo_decide_exists, diagonal, dump_comb, frontier, multiplicity, parse_comb, plan_cut, preserving_cut,
    pump, run_errors,
)
from models import KripkeTree, LassoTrace, trace, zip_traces
from sat import Outcome
from semantics import Verdict, eval_branching
from syntax import parse

A, E = frozenset({"a"}), frozenset()
COPY = "G (a[p] <-> a[q])"
INFINITELY_OFTEN = "(a[p] <-> a[q]) & G F a[q]"


def _automaton(text):
    return pair_automaton(parse(text, "hyperltl"), ("p", "q"))


def _copy_comb(depth):
    spine = trace([], [["a"], []])
    witnesses = [spine.suffix(i) for i in range(depth + 1)]
    return build_comb(spine, witnesses, _automaton(COPY), formula=COPY)


def _random_automaton(rng, n):
    """A TRUE-guarded cycle through all n states, so every pair is accepted, plus random literal edges."""
    vocab = ("a@p", "a@q")
    trans = [(i, TRUE_GUARD, (i + 1) % n) for i in range(n)]
    for _ in range(rng.randint(0, 2 * n)):
        trans.append((rng.randrange(n), Guard.literal(rng.choice(vocab), rng.random() < 0.5), rng.randrange(n)))
    accepting = frozenset(q for q in range(n) if rng.random() < 0.5) or frozenset({rng.randrange(n)})
    return BuchiAutomaton(tuple(range(n)), 0, vocab, tuple(trans), accepting, ("p", "q"))


def _random_lasso(rng, first, head, loop):
    prefix = (first,) + tuple(rng.choice([A, E]) for _ in range(rng.randint(0, head)))
    return LassoTrace(prefix, tuple(rng.choice([A, E]) for _ in range(rng.randint(1, loop))))


def _brute_force_model(f, aps, max_nodes):
    """First Kripke structure with at most ``max_nodes`` nodes on which ``f`` evaluates to TRUE."""
    letters = [frozenset(c) for r in range(len(aps) + 1) for c in itertools.combinations(aps, r)]
    for n in range(1, max_nodes + 1):
        pairs = [(i, j) for i in range(n) for j in range(n)]
        for chosen in itertools.product((False, True), repeat=len(pairs)):
            edges = [e for e, keep in zip(pairs, chosen) if keep]
            if {i for i, _ in edges} != set(range(n)):
                continue
            for labels in itertools.product(letters, repeat=n):
                k = KripkeTree.build(dict(enumerate(labels)), edges, 0)
                if eval_branching(f, k, path_bound=n + 1) is Verdict.TRUE:
                    return k
    return None


def test_build_comb_shapes_and_runs():
    """Test tooth lengths and that the stored runs are runs of the automaton."""
    c = _copy_comb(4)
    assert c.depth == 4 and c.dimension == 2
    assert [len(t) for t in c.teeth] == [5, 4, 3, 2, 1]
    assert run_errors(c) == []
    assert c.letter(1, 0) == frozenset()
    assert diagonal(c, 2) == [(0, 2), (1, 1), (2, 0)]
    assert sum(multiplicity(c, 3).values()) == 4


def test_build_comb_rejects_bad_witnesses():
    """Test that witnesses must branch off the spine and pair into accepted words."""
    spine = trace([], [["a"], []])
    with pytest.raises(CombError) as err:
        build_comb(spine, [spine, spine], _automaton(COPY))
    assert err.value.index == 1
    with pytest.raises(CombError):
        build_comb(spine, [trace([["a"]], [[]])], _automaton(COPY), depth=0)
    with pytest.raises(CombError):
        Comb(_copy_comb(2).automata, (A, E, A), ((A,),), ((0,),))


def test_frontier_and_cuttable_on_a_copy_comb():
    """Test frontiers and the multiplicity condition of cuttable diagonals."""
    c = _copy_comb(6)
    assert frontier(c, 2) == frontier(c, 4)
    assert cuttable(c, 2, 4)
    with pytest.raises(CombError):
        frontier(c, 7)
    with pytest.raises(CombError):
        cuttable(c, 3, 2)


@pytest.mark.parametrize("counts,counts2,nq,expected", [
    ({"q": 2}, {"q": 4}, 1, True),
    ({"q": 2}, {"q": 4}, 3, False),
    ({"q": 4}, {"q": 2}, 3, True),
    ({"q": 1}, {"q": 1, "r": 1}, 2, False),
])
def test_cuttable_counts(counts, counts2, nq, expected):
    """Test the counting condition: enough copies, or at least |Q| of them."""
    assert cuttable_counts(Counter(counts), Counter(counts2), nq) is expected


def test_cut_shortens_the_comb():
    """Test that a cut drops k'-k levels and keeps valid runs."""
    c = _copy_comb(6)
    out = cut(c, plan_cut(c, 2, 4))
    assert out.depth == 4
    assert run_errors(out) == []
    assert out.spine == c.spine[:3] + c.spine[5:]
    with pytest.raises(CombError):
        plan_cut(c, 2, 2)


def test_random_cuts_keep_runs_valid():
    """Test cuts between every cuttable pair of random combs."""
    rng = random.Random(17)
    a = _automaton(INFINITELY_OFTEN)
    for _ in range(10):
        loop = tuple(rng.choice([A, E]) for _ in range(rng.randint(1, 3))) + (A,)
        spine = LassoTrace(tuple(rng.choice([A, E]) for _ in range(rng.randint(0, 2))), loop)
        depth = rng.randint(3, 6)
        witnesses = []
        for i in range(depth + 1):
            head = (spine.letter_at(i),) + tuple(rng.choice([A, E]) for _ in range(rng.randint(0, 2)))
            witnesses.append(LassoTrace(head, (rng.choice([A, E]), A)))
        c = build_comb(spine, witnesses, a)
        for k in range(depth + 1):
            for k2 in range(k + 1, depth + 1):
                if cuttable(c, k, k2):
                    out = cut(c, plan_cut(c, k, k2))
                    assert out.depth == c.depth - (k2 - k)
                    assert run_errors(out) == []


def test_preserving_cut_keeps_the_later_frontier():
    """Test that a preserving cut moves F_k'' back unchanged."""
    c = _copy_comb(6)
    out = preserving_cut(c, 1, 3, 5)
    assert frontier(out, 3) == frontier(c, 5)
    with pytest.raises(CombError):
        plan_cut(c, 1, 3, preserve=2)


def test_random_combs_frontiers_cuts_and_pumps():
    """Test 1000 random combs: frontier count, the pigeonhole bound, cuts, preserving cuts and pumping."""
    rng = random.Random(23)
    pumped = preserved = 0
    for _ in range(1000):
        n = rng.randint(1, 3)
        a = _random_automaton(rng, n)
        depth = rng.randint(2, 10)
        spine = LassoTrace(tuple(rng.choice([A, E]) for _ in range(rng.randint(0, 2))),
                           tuple(rng.choice([A, E]) for _ in range(rng.randint(1, 3))))
        c = build_comb(spine, [_random_lasso(rng, spine.letter_at(i), 1, 2) for i in range(depth + 1)], a)
        assert run_errors(c) == []
        assert len({frontier(c, k) for k in range(depth + 1)}) <= 2 ** n
        pairs = [(k, k2) for k in range(depth + 1) for k2 in range(k + 1, depth + 1) if cuttable(c, k, k2)]
        if depth + 1 >= (n + 1) ** n + 1:
            assert pairs
        if not pairs:
            continue
        k, k2 = pairs[0]
        out = cut(c, plan_cut(c, k, k2))
        assert out.depth == depth - (k2 - k)
        assert run_errors(out) == []
        k3 = rng.randint(k2, depth)
        try:
            kept = preserving_cut(c, k, k2, k3)
        except CombError:
            pass
        else:
            preserved += 1
            assert run_errors(kept) == []
            assert frontier(kept, k3 - (k2 - k)) == frontier(c, k3)
        if not frontier(c, k2) <= frontier(c, k):
            continue
        designated = [i for i in range(k + 1)
                      if any(c.runs[i][j] in a.accepting for j in range(k - i + 1, k2 - i + 1))]
        try:
            p = pump(c, k, k2, designated)
        except CombError:
            continue
        pumped += 1
        assert all(membership(p.pair(i), a) for i in range(k2 + 3 * p.period + 1))
    assert pumped > 0 and preserved > 0


def test_three_dimensional_comb():
    """Test F_1 of a comb whose sub-combs copy the spine, a cut between its diagonals and a misplaced sub-comb."""
    t = pair_automaton(parse("G (a[p] <-> a[r])", "hyperltl"), ("p", "q", "r"), "triple")
    p = trace([], [["a"], []])
    depth = 4

    def sub(spine, i):
        pair = zip_traces(spine.suffix(i), spine.suffix(i))
        return build_comb(pair, [spine.suffix(i + j) for j in range(depth - i + 1)], t, depth=depth - i)

    subs = tuple(sub(p, i) for i in range(depth + 1))
    c = Comb((t,), tuple(p.unroll(depth + 1)), subs)
    assert c.dimension == 3 and c.state_count == t.size
    assert frontier(subs[0], 1) == frontier(subs[1], 0)
    assert frontier(c, 1) == frozenset({frontier(subs[0], 1)})
    assert len(diagonal(c, 1)) == 2
    assert cuttable(c, 1, 3)
    out = cut(c, plan_cut(c, 1, 3))
    assert out.dimension == 3 and out.depth == depth - 2
    assert run_errors(out) == []
    with pytest.raises(CombError) as err:
        Comb((t,), c.spine, (subs[0], sub(trace([], [[]]), 1)) + subs[2:])
    assert err.value.index == 1


def test_bounds():
    """Test the depth bounds on small sizes and the overflow guard."""
    assert bound_b(1) == 7
    assert bound_b(2) == 40
    assert bound_b_prime(1, 1, 1) == 1 + 2 + bound_b(3)
    with pytest.raises(ValueError):
        bound_b(0)
    with pytest.raises(BoundOverflow):
        bound_b(10 ** 6)


def test_bound_b_grows_with_the_automaton():
    """Test that the depth bound is strictly increasing up to five states."""
    values = [bound_b(n) for n in range(1, 6)]
    assert values == sorted(set(values))
    assert values[2] == 3 ** 3 + 5 * 4 ** 3


def test_pump_accepts_every_pair_for_three_periods():
    """Test pumping under an alternating automaton: pairs stay accepted for three periods."""
    a = BuchiAutomaton((0, 1), 0, (), ((0, TRUE_GUARD, 1), (1, TRUE_GUARD, 0)), frozenset({1}), ("p", "q"))
    spine = trace([], [[]])
    c = build_comb(spine, [spine] * 7, a)
    p = pump(c, 2, 4, designated=[0, 1, 2])
    assert p.period == 2
    assert all(membership(p.pair(i), a) for i in range(p.inf2 + 3 * p.period + 1))


def test_pump_needs_acceptance_inside_the_window():
    """Test that a run staying outside the accepting states between inf and inf' cannot be pumped."""
    seen = Guard.literal("a@q")
    a = BuchiAutomaton((0, 1), 0, ("a@q",), ((0, TRUE_GUARD, 0), (0, seen, 1), (1, seen, 1)), frozenset({1}),
                       ("p", "q"))
    c = build_comb(trace([], [[]]), [trace([[]], [["a"]])] * 4, a)
    assert all(q == 0 for run in c.runs for q in run)
    with pytest.raises(CombError, match="no accepting state") as err:
        pump(c, 1, 2, designated=[0, 1])
    assert err.value.index == 0


def test_pump_extends_a_comb_periodically():
    """Test that pumping repeats the window's teeth with the spine's period."""
    c = _copy_comb(6)
    pumped = pump(c, 2, 4, designated=[0, 1, 2])
    assert pumped.period == 2
    assert pumped.tooth(9) == pumped.tooth(7)
    assert pumped.pair(8).same_word(pumped.pair(2))
    k = pumped.kripke()
    assert isinstance(k, KripkeTree) and k.root == "s0"
    f = parse("exists p. G (exists q. G (a[p] <-> a[q]))", "hyperctlstar")
    assert eval_branching(f, k, path_bound=len(k.nodes) + 1) is not Verdict.FALSE
    with pytest.raises(CombError):
        pump(c, 4, 2, designated=[0])


def test_comb_file_format():
    """Test dump and parse of the comb format, and that bad runs are rejected."""
    c = _copy_comb(3)
    text = dump_comb(c)
    back = parse_comb(text)
    assert back.spine == c.spine and back.teeth == c.teeth and back.runs == c.runs
    no_runs = "\n".join(line for line in text.splitlines() if not line.startswith("run"))
    assert parse_comb(no_runs).teeth == c.teeth
    broken = text.replace("run 0: ", "run 0: 99 ")
    with pytest.raises(CombError):
        parse_comb(broken)
    with pytest.raises(CombError):
        parse_comb("spine: {a}\n")


@pytest.mark.parametrize("text,outcome", [
    ("exists p. G a[p]", Outcome.SAT),
    ("exists p. (a[p] & !a[p])", Outcome.UNSAT),
    ("exists p. G (exists q. F (a[q] & !a[q]))", Outcome.UNSAT),
    ("exists p. G (exists q. F a[q])", Outcome.SAT),
    ("exists p. (!a[p] U (exists q. X a[q]))", Outcome.SAT),
])
def test_demo_decide_exists(text, outcome):
    """Test the bounded ∃* search on release, until and spine-only formulas."""
    v = demo_decide_exists(parse(text, "hyperctlstar"), max_states=4)
    assert v.outcome is outcome, v.reason
    if outcome is Outcome.SAT:
        assert v.verified
        assert isinstance(v.witness, KripkeTree)


def test_demo_needs_a_leading_existential():
    """Test that formulas outside the demonstrated shapes stay undecided."""
    v = demo_decide_exists(parse("E X a & E X !a", "ctlstar"))
    assert v.outcome is Outcome.UNDECIDED


@pytest.mark.parametrize("text,max_states,max_depth", [
    ("exists p. G a[p]", 1, 4),
    ("exists p. F (exists q. G (a[p] <-> a[q]))", 2, 8),
])
def test_demo_within_small_caps(text, max_states, max_depth):
    """Test that the small examples are found, and verified, under tight caps."""
    v = demo_decide_exists(parse(text, "hyperctlstar"), max_states=max_states, max_depth=max_depth)
    assert v.outcome is Outcome.SAT, v.reason
    assert v.verified


def test_nested_globally_cuts_a_three_dimensional_comb(monkeypatch):
    """Test that nested G is decided through cuttable diagonals of a three-dimensional comb."""
    dimensions = []
    real = comb.cuttable

    def counting(c, k, k2):
        dimensions.append(c.dimension)
        return real(c, k, k2)

    monkeypatch.setattr(comb, "cuttable", counting)
    f = parse("exists p. G (exists q. G (exists r. G (a[p] <-> a[r])))", "hyperctlstar")
    v = demo_decide_exists(f, max_states=2, max_depth=2)
    assert v.outcome is Outcome.SAT, v.reason
    assert v.verified and isinstance(v.witness, KripkeTree)
    assert dimensions and set(dimensions) == {3}
    assert v.certificate.dimension == 3
    assert run_errors(v.certificate) == []
    assert _brute_force_model(f, ("a",), 1) is not None


def test_nested_globally_without_a_model_stays_open():
    """Test that an unsatisfiable nested G formula is never reported SAT."""
    f = parse("exists p. G (exists q. G (exists r. G (a[p] <-> !a[r])))", "hyperctlstar")
    v = demo_decide_exists(f, max_states=2, max_depth=2)
    assert v.outcome is Outcome.UNDECIDED
    assert "nested comb" in v.reason
    assert _brute_force_model(f, ("a",), 2) is None


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
