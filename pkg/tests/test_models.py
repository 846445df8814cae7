"""Tests for lasso traces, trace sets and Kripke structures."""
import random
import sys

import pytest

from models import (
    KripkeTree, LassoTrace, ModelError, PathAssignment, TraceSet, dump_kripke, dump_traceset,
    enumerate_lasso_paths, parse_kripke, parse_traceset, trace, zip_set, zip_traces,
)


def _random_lasso(rng, letters="ab", max_len=4):
    prefix = tuple(rng.choice(letters) for _ in range(rng.randint(0, max_len)))
    loop = tuple(rng.choice(letters) for _ in range(rng.randint(1, max_len)))
    return LassoTrace(prefix, loop)


def test_letter_at_and_suffix():
    """Test indexing into the loop and taking suffixes."""
    t = LassoTrace(("x",), ("a", "b"))
    assert t.unroll(6) == ["x", "a", "b", "a", "b", "a"]
    assert t.suffix(0) == t
    assert t.suffix(2).unroll(4) == ["b", "a", "b", "a"]
    assert t.position(5) == 1 and t.successor(2) == 1
    with pytest.raises(ModelError):
        LassoTrace(("a",), ())


def test_normalize_preserves_the_word():
    """Test that normalization yields a primitive loop and the same infinite word."""
    rng = random.Random(7)
    for _ in range(200):
        t = _random_lasso(rng)
        n = t.normalize()
        assert n.same_word(t)
        assert n.span <= t.span
        assert n.normalize() == n
    assert LassoTrace(("a", "b"), ("a", "b", "a", "b")).normalize() == LassoTrace((), ("a", "b"))


def test_suffix_agrees_with_unrolling():
    """Test that t.suffix(i) reads the letters of t from position i on."""
    rng = random.Random(11)
    for _ in range(100):
        t = _random_lasso(rng)
        i = rng.randint(0, 8)
        assert t.suffix(i).unroll(10) == t.unroll(i + 10)[i:]


def test_zip_traces_aligns_loops():
    """Test that zipping uses the larger prefix and the lcm of the periods."""
    t, t2 = LassoTrace(("x",), ("a", "b")), LassoTrace((), ("c", "d", "e"))
    z = zip_traces(t, t2)
    assert len(z.prefix) == 1 and z.period == 6
    for i in range(12):
        assert z.letter_at(i) == (t.letter_at(i), t2.letter_at(i))
    assert zip_set([t]).letter_at(3) == (t.letter_at(3),)
    with pytest.raises(ModelError):
        zip_set([])


def test_traceset_deduplicates_and_checks_aps():
    """Test that equal words collapse and unknown propositions are rejected."""
    ts = TraceSet(("a",), (trace([], [["a"]]), trace([["a"]], [["a"], ["a"]])))
    assert len(ts) == 1
    with pytest.raises(ModelError):
        TraceSet(("a",), (trace([], [["b"]]),))


def test_traceset_file_format():
    """Test reading and writing the 'prefix | loop' format."""
    text = "# two traces\naps: a b\n{a},{} | {a,b}\n | {}\n"
    ts = parse_traceset(text)
    assert ts.aps == ("a", "b")
    assert ts.traces[0] == trace([["a"], []], [["a", "b"]])
    assert ts.traces[1] == trace([], [[]])
    assert parse_traceset(dump_traceset(ts)) == ts


@pytest.mark.parametrize("text", [
    "{a} | {a}\n",
    "aps: a\n{a} {a}\n",
    "aps: a\n{a} |\n",
    "aps: a\n{a} x | {a}\n",
])
def test_traceset_format_errors(text):
    """Test that malformed trace-set files raise ModelError."""
    with pytest.raises(ModelError):
        parse_traceset(text)


def test_kripke_build_and_queries(branching_tree):
    """Test labels, successors and reachability."""
    k = branching_tree
    assert k.label("x") == frozenset({"a"})
    assert k.successors("r") == ["x", "y"]
    assert k.reachable("x") == {"x"}
    assert k.aps == ("a",)
    assert not k.is_deterministic_from("r") and k.is_deterministic_from("y")
    relabeled = k.relabel({"y": {"a"}})
    assert relabeled.label("y") == frozenset({"a"}) and k.label("y") == frozenset()


def test_kripke_rejects_dead_ends():
    """Test that every node needs a successor and edges need declared nodes."""
    with pytest.raises(ModelError):
        KripkeTree.build({"r": set(), "x": set()}, [("r", "x")], "r")
    with pytest.raises(ModelError):
        KripkeTree.build({"r": set()}, [("r", "z")], "r")
    with pytest.raises(ModelError):
        KripkeTree.build({"r": set()}, [("r", "r")], "q")


def test_kripke_file_format(branching_tree):
    """Test that dump and parse of a Kripke file agree."""
    text = dump_kripke(branching_tree)
    assert "root r" in text
    k = parse_kripke(text)
    assert k.root == "r"
    assert {n: k.label(n) for n in k.nodes} == {n: branching_tree.label(n) for n in branching_tree.nodes}
    assert {(a, b) for a in k.nodes for b in k.successors(a)} == \
        {(a, b) for a in branching_tree.nodes for b in branching_tree.successors(a)}
    with pytest.raises(ModelError):
        parse_kripke("node r {}\nedge r r\nloop r\n")


def test_linear_tree_follows_the_trace():
    """Test that the linear tree has exactly the given trace as its only path."""
    t = trace([["a"]], [[], ["a"]])
    k = KripkeTree.linear(t)
    assert k.is_deterministic_from(k.root)
    paths = enumerate_lasso_paths(k, k.root, 3)
    assert len(paths) == 1
    assert k.trace_of(paths[0]).same_word(t)


def test_enumerate_lasso_paths(branching_tree):
    """Test that lasso paths from the root cover both branches and start at the root."""
    paths = enumerate_lasso_paths(branching_tree, "r", 2)
    assert {p.letter_at(1) for p in paths} == {"x", "y"}
    assert all(p.letter_at(0) == "r" for p in paths)
    with pytest.raises(ModelError):
        enumerate_lasso_paths(branching_tree, "r", 0)


def test_path_assignment_tracks_last_binding():
    """Test bind, rebind and the ε path."""
    p, q = LassoTrace((), ("r",)), LassoTrace((), ("x",))
    env = PathAssignment().bind("p", p).bind("q", q)
    assert env.epsilon == q and env.variables == ("p", "q")
    env2 = env.rebind("p", q)
    assert env2["p"] == q and env2.last == "q"
    env3 = env.bind("p", q)
    assert env3.last == "p" and "q" in env3
    with pytest.raises(KeyError):
        PathAssignment()["p"]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
