"""Tests for the expressiveness translations and the counter-machine encoding."""
import itertools
import random
import sys

import pytest

from automata import CapExceeded
from models import KripkeTree, ModelError, TraceSet, trace
from semantics import (
    Valuation, Verdict, eval_branching, eval_linear, eval_relational_bounded, eval_relational_branching,
    eval_relational_linear,
)
from syntax import (
    And, Atom, Eq, Eventually, Exists, ExistsFO, ExistsProp, Forall, ForallFO, Globally, Iff, Less, Level, Next,
    Not, Or, Pred, Succ, Until, Var, alpha_normalize, free_variables, is_closed_s1s, is_prenex, parse, render,
)
from translate import (
    Halt, Inc, Test, TranslationError, TwoCounterMachine, configuration_kripke, configuration_trace,
    configuration_traceset, decode_configuration, dump_machine, encode_2cm, halting_formula, hq, hqc, mpe, mse,
    parse_machine, run_machine, se, step, succ_formula,
)

COUNT_DOWN = """\
# c1 += 1, then count it back down
inc c1 goto 2
test c1 zero 3 else 2
halt
"""

HALT_ONLY = "halt\n"

INC_THEN_HALT = """\
inc c1 goto 2
halt
"""

# lassos constant from position 1: a horizon of two positions sees all of them
SHORT_TRACES = [trace([], [[]]), trace([], [["a"]]), trace([[]], [["a"]]), trace([["a"]], [[]])]
SHORT_SETS = [TraceSet(("a",), c) for r in (1, 2) for c in itertools.combinations(SHORT_TRACES, r)]


def random_fo(rng: random.Random, names: list[str], depth: int):
    if depth == 0 or rng.random() < 0.35:
        x, y = Var(rng.choice(names)), Var(rng.choice(names))
        return rng.choice([Pred("a", x), Less(x, y), Eq(x, y), Level(x, y)])
    kind = rng.choice((Not, And, Or))
    if kind is Not:
        return Not(random_fo(rng, names, depth - 1))
    return kind(random_fo(rng, names, depth - 1), random_fo(rng, names, depth - 1))


def random_fo_sentence(rng: random.Random, universal_share: float = 0.2):
    names = ["x", "y"][:rng.randint(1, 2)]
    f = random_fo(rng, names, 2)
    for name in reversed(names):
        f = (ForallFO if rng.random() < universal_share else ExistsFO)(name, f)
    return f


def random_path_formula(rng: random.Random, depth: int):
    """HyperLTL matrix over a[p], a[q] without X."""
    if depth == 0 or rng.random() < 0.3:
        return rng.choice([Atom("a", "p"), Atom("a", "q")])
    kind = rng.choice((Not, And, Or, Iff, Eventually, Globally, Until))
    if kind in (Not, Eventually, Globally):
        return kind(random_path_formula(rng, depth - 1))
    return kind(random_path_formula(rng, depth - 1), random_path_formula(rng, depth - 1))


def random_dag(rng: random.Random) -> KripkeTree:
    """Root, one middle node and a looping sink; random a-labels."""
    labels = {n: {"a"} if rng.random() < 0.5 else set() for n in ("r", "m", "s")}
    edges = [("r", "m"), ("m", "s"), ("s", "s")]
    if rng.random() < 0.5:
        edges.append(("r", "s"))
    return KripkeTree.build(labels, edges, "r")


@pytest.fixture
def single_trace(two_traces):
    return TraceSet(("a",), two_traces.traces[1:])


@pytest.mark.parametrize("text", [
    "exists x. P_a(x)",
    "forall x. P_a(x)",
    "exists x. exists y. x < y & !P_a(x) & P_a(y)",
    "exists x. exists y. x = y & P_a(x) & !P_a(y)",
    "forall x. forall y. E(x, y) -> (P_a(x) <-> P_a(y))",
    "exists x. exists y. E(x, y) & !(x = y)",
])
def test_hq_preserves_truth(two_traces, single_trace, text):
    """Test that the HyperQPTL translation agrees with direct relational evaluation."""
    f = parse(text, "foe")
    for ts in (two_traces, single_trace):
        g = hq(f, ts.aps)
        assert is_prenex(g)
        assert eval_linear(g, ts) == eval_relational_linear(f, ts), (text, ts)


def test_hq_names_follow_the_variables():
    """Test the pi_x / q_x naming and the rejection of S1S-only terms."""
    g = hq(parse("exists x. P_a(x)", "foe"))
    assert isinstance(g, Exists) and g.var == "pi_x"
    assert isinstance(g.body, ExistsProp) and g.body.var == "q_x"
    assert free_variables(g).closed
    with pytest.raises(TranslationError):
        hq(ExistsFO("x", Pred("a", Succ(Var("x")))))
    with pytest.raises(TranslationError):
        hq(Pred("a", Var("x")))


def test_hq_needs_aps_for_equality_and_order(two_traces):
    """Test that = and < are refused without the model's propositions."""
    f = parse("exists x. exists y. E(x, y) & !(x = y)", "foe")
    with pytest.raises(TranslationError, match="aps"):
        hq(f)
    with pytest.raises(TranslationError, match="aps"):
        hq(parse("exists x. exists y. x < y", "foe"))
    assert eval_linear(hq(f, two_traces.aps), two_traces)
    assert is_prenex(hq(parse("exists x. exists y. E(x, y) & P_a(y)", "foe")))


def test_hq_agrees_on_random_formulas():
    """Test hq against relational evaluation on 300 random FO[<,E] sentences."""
    rng = random.Random(11)
    sets = [SHORT_SETS[0], SHORT_SETS[4], SHORT_SETS[5], SHORT_SETS[-1]]
    checked = attempts = 0
    while checked < 300 and attempts < 600:
        attempts += 1
        f = random_fo_sentence(rng)
        ts = sets[attempts % len(sets)]
        try:
            expected = eval_relational_linear(f, ts)
            got = eval_linear(hq(f, ts.aps), ts)
        except CapExceeded:
            continue
        assert got == expected, (render(f), ts)
        checked += 1
    assert checked == 300


@pytest.mark.parametrize("text,logic", [
    ("exists p. !a[p]", "hyperltl"),
    ("forall p. a[p]", "hyperltl"),
    ("forall p. X a[p]", "hyperltl"),
    ("forall p. F a[p]", "hyperltl"),
    ("exists p. forall p2. X (a[p2] <-> a[p])", "hyperltl"),
    ("forall p. exists p2. !a[p2] & a[p]", "hyperltl"),
    ("exists q. forall p. q & (q -> a[p])", "hyperqptl"),
    ("exists q. forall p. X q & G (q -> a[p])", "hyperqptl"),
])
def test_se_preserves_truth_on_short_horizons(two_traces, text, logic):
    """Test the S1S[E] translation against direct evaluation where a short horizon is exact."""
    f = parse(text, logic)
    g = se(f)
    assert free_variables(g).so <= {"X_a"}
    assert eval_relational_bounded(g, two_traces, horizon=2) == eval_linear(f, two_traces), text


def test_se_output_parses_back():
    """Test that rendered S1S[E] output is accepted by the s1se parser."""
    g = se(parse("forall p. exists p2. G (a[p] <-> X a[p2])", "hyperltl"))
    assert alpha_normalize(parse(render(g), "s1se")) == alpha_normalize(g)
    with pytest.raises(TranslationError):
        se(Globally(Atom("a", "p")))


def test_se_agrees_on_random_formulas():
    """Test se on 300 random HyperLTL formulas over every short trace set."""
    rng = random.Random(5)
    for n in range(300):
        matrix = random_path_formula(rng, 3)
        if rng.random() < 0.25:
            matrix = Next(matrix)
        f = matrix
        for var in ("q", "p"):
            f = (Exists if rng.random() < 0.5 else Forall)(var, f)
        ts = SHORT_SETS[n % len(SHORT_SETS)]
        assert eval_relational_bounded(se(f), ts, horizon=2) == eval_linear(f, ts), (render(f), ts)


def test_mpe_and_mse_targets():
    """Test that the tree translations produce closed relational formulas and refuse foreign operators."""
    g = mpe(parse("exists p. F a[p]", "hyperctlstar"))
    assert free_variables(g).closed
    assert alpha_normalize(parse(render(g), "mple")) == alpha_normalize(g)
    k = mpe(parse("forall p. K{a}[p] F b[p]", "hyperkctlstar"))
    assert free_variables(k).closed
    h = mse(parse("exists q. E G q", "hyperqctlstar"))
    assert free_variables(h).closed
    with pytest.raises(TranslationError):
        mpe(ExistsProp("q", Exists("p", Atom("q", "p"))))
    with pytest.raises(TranslationError):
        mse(parse("forall p. K{a}[p] a[p]", "hyperkctlstar"))


def test_hqc_builds_hyperqctlstar():
    """Test the MSO[E] to HyperQCTL* translation shape and its input checks."""
    g = hqc(parse("exists x. exists y. x < y & P_a(y)", "msoe"))
    assert isinstance(g, Exists) and g.var == "pi_x"
    assert isinstance(g.body, ExistsProp) and g.body.var == "q_x"
    assert alpha_normalize(parse(render(g), "hyperqctlstar")) == alpha_normalize(g)
    with pytest.raises(TranslationError):
        hqc(parse("(exists x. P_a(x)) & (exists y. P_a(y))", "msoe"))
    with pytest.raises(TranslationError):
        hqc(ForallFO("x", Pred("a", Var("y"))))


def test_hqc_definite_on_a_small_dag():
    """Test that both sides find the a-labelled node of a DAG."""
    model = KripkeTree.build({"r": set(), "m": {"a"}, "s": set()}, [("r", "m"), ("m", "s"), ("s", "s")], "r")
    f = parse("exists x. P_a(x)", "msoe")
    assert eval_relational_branching(f, model, mple=False, depth_bound=2) is Verdict.TRUE
    assert eval_branching(hqc(f), model) is Verdict.TRUE


def test_tree_translations_never_contradict_on_random_instances():
    """Test 105 bounded hqc and mse instances: definite verdicts on both sides agree."""
    rng = random.Random(3)
    instances = 0
    for _ in range(75):
        model = random_dag(rng)
        f = random_fo_sentence(rng, universal_share=0.3)
        direct = eval_relational_branching(f, model, mple=False, depth_bound=2)
        translated = eval_branching(hqc(f), model)
        instances += 1
        if direct.definite and translated.definite:
            assert direct is translated, render(f)
    for _ in range(30):
        model = random_dag(rng)
        body = rng.choice([Eventually, Globally, Next])(Atom("a", "p"))
        g = (Exists if rng.random() < 0.5 else Forall)("p", body)
        direct = eval_branching(g, model)
        translated = eval_relational_branching(mse(g), model, mple=False, depth_bound=2)
        instances += 1
        if direct.definite and translated.definite:
            assert direct is translated, render(g)
    assert instances >= 100


def test_machine_file_format():
    """Test reading, writing and validating counter machines."""
    m = parse_machine(COUNT_DOWN)
    assert m.instructions == (Inc(1, 2), Test(1, 3, 2), Halt())
    assert parse_machine(dump_machine(m)) == m
    assert m.halt_index == 3


@pytest.mark.parametrize("text", [
    "inc c1 goto 2\nhalt\nhalt\n",
    "inc c1 goto 1\n",
    "inc c1 goto 5\nhalt\n",
    "inc c3 goto 2\nhalt\n",
    "jump 1\nhalt\n",
    "",
])
def test_machine_errors(text):
    """Test that malformed machines raise ModelError."""
    with pytest.raises(ModelError):
        parse_machine(text)


def test_machine_runs():
    """Test single steps and a run to the halt instruction."""
    m = parse_machine(COUNT_DOWN)
    assert step(m, (1, 0, 0)) == (2, 1, 0)
    assert step(m, (2, 1, 0)) == (2, 0, 0)
    assert step(m, (2, 0, 0)) == (3, 0, 0)
    assert step(m, (3, 0, 0)) is None
    assert run_machine(m, (1, 0, 0)) == [(1, 0, 0), (2, 1, 0), (2, 0, 0), (3, 0, 0)]
    loop = TwoCounterMachine((Inc(2, 1), Halt()))
    assert len(run_machine(loop, (1, 0, 0), max_steps=5)) == 6


def test_configuration_traces():
    """Test the configuration encoding and its inverse."""
    t = configuration_trace((2, 1, 0))
    assert t.unroll(4) == [frozenset({"c2"}), frozenset({"c1"}), frozenset({"l"}), frozenset()]
    assert decode_configuration(t) == (2, 1, 0)
    assert decode_configuration(trace([], [[]])) is None
    assert decode_configuration(trace([["l", "c1", "c2"]], [[]])) is None
    assert decode_configuration(trace([["c1", "c2"]], [["l"]])) is None
    with pytest.raises(ModelError):
        configuration_trace((0, 0, 0))


def test_configuration_kripke_generates_encodings():
    """Test that some paths of the generator decode to configurations."""
    k = configuration_kripke()
    assert isinstance(k, KripkeTree)
    assert k.label(k.root) == frozenset()
    target = configuration_trace((1, 0, 0))
    first = [n for n in k.successors(k.root) if k.label(n) == target.letter_at(0)]
    assert first
    second = [n for n in k.successors(first[0]) if k.label(n) == target.letter_at(1)]
    assert second


def test_succ_formula_relates_consecutive_configurations():
    """Test the successor relation on the trace minima of two encodings."""
    m = parse_machine(COUNT_DOWN)
    ts = configuration_traceset([(1, 0, 0), (2, 1, 0), (2, 0, 0)])
    f = succ_formula(m, "x", "x2")
    at = lambda i, j: Valuation(fo={"x": (i, 0), "x2": (j, 0)})
    assert eval_relational_bounded(f, ts, horizon=4, valuation=at(0, 1))
    assert eval_relational_bounded(f, ts, horizon=4, valuation=at(1, 2))
    assert not eval_relational_bounded(f, ts, horizon=4, valuation=at(1, 0))
    assert not eval_relational_bounded(f, ts, horizon=4, valuation=at(0, 2))


def test_halting_formula_on_the_run():
    """Test that the set of a halting run's encodings satisfies halting(X)."""
    m = parse_machine(COUNT_DOWN)
    run = run_machine(m, (1, 0, 0))
    ts = configuration_traceset(run)
    f = halting_formula(m, (1, 0, 0))
    whole = lambda count: frozenset((i, n) for i in range(count) for n in range(8))
    assert eval_relational_bounded(f, ts, horizon=5, valuation=Valuation(so={"X": whole(len(run))}))
    assert not eval_relational_bounded(f, ts, horizon=5, valuation=Valuation(so={"X": whole(len(run) - 1)}))


def test_machine_that_halts_at_once():
    """Test the encoding of a one-instruction machine and its single-configuration witness."""
    m = parse_machine(HALT_ONLY)
    assert run_machine(m, (1, 0, 0)) == [(1, 0, 0)]
    f = encode_2cm(m, (1, 0, 0))
    assert alpha_normalize(parse(render(f), "s1se")) == alpha_normalize(f)
    ts = configuration_traceset([(1, 0, 0)])
    halting = halting_formula(m, (1, 0, 0))
    witness = frozenset((0, n) for n in range(4))
    assert eval_relational_bounded(halting, ts, horizon=3, valuation=Valuation(so={"X": witness}))
    assert not eval_relational_bounded(halting, ts, horizon=3, valuation=Valuation(so={"X": frozenset()}))


def test_succ_formula_for_inc_then_halt():
    """Test the successor relation of a single increment, and perturbed pairs."""
    m = parse_machine(INC_THEN_HALT)
    assert step(m, (1, 0, 0)) == (2, 1, 0)
    ts = configuration_traceset([(1, 0, 0), (2, 1, 0), (2, 0, 0), (1, 1, 0)])
    f = succ_formula(m, "x", "x2")
    at = lambda i, j: Valuation(fo={"x": (i, 0), "x2": (j, 0)})
    assert eval_relational_bounded(f, ts, horizon=4, valuation=at(0, 1))
    assert not eval_relational_bounded(f, ts, horizon=4, valuation=at(0, 2))
    assert not eval_relational_bounded(f, ts, horizon=4, valuation=at(1, 0))
    assert not eval_relational_bounded(f, ts, horizon=4, valuation=at(0, 3))


def test_encode_2cm_is_closed():
    """Test that the encoding quantifies X and leaves only the proposition sets free."""
    m = parse_machine(COUNT_DOWN)
    f = encode_2cm(m, (1, 0, 0))
    assert is_closed_s1s(f)
    assert free_variables(f).so == frozenset({"X_c1", "X_c2", "X_l"})
    with pytest.raises(ModelError):
        encode_2cm(m, (4, 0, 0))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
