"""Finite stand-ins for infinite semantic objects: lasso traces, trace sets, Kripke trees."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Sequence

import networkx as nx


class ModelError(ValueError):
    """Malformed trace, trace set, Kripke structure or model file."""


@dataclass(frozen=True)
class LassoTrace:
    """Ultimately periodic word ``prefix · loop^ω``.

    Letters are arbitrary hashables: sets of propositions for traces, node ids
    for paths through a Kripke structure, tuples for zipped traces.
    """

    prefix: tuple = ()
    loop: tuple = ((),)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "loop", tuple(self.loop))
        if not self.loop:
            raise ModelError("lasso loop must be nonempty")

    @property
    def period(self) -> int:
        return len(self.loop)

    @property
    def span(self) -> int:
        """Number of distinct positions: every index maps onto one below span."""
        return len(self.prefix) + len(self.loop)

    def letter_at(self, i: int):
        if i < 0:
            raise ModelError(f"negative position {i}")
        if i < len(self.prefix):
            return self.prefix[i]
        return self.loop[(i - len(self.prefix)) % len(self.loop)]

    def unroll(self, n: int) -> list:
        return [self.letter_at(i) for i in range(n)]

    def position(self, i: int) -> int:
        """Representative position below ``span`` for time ``i``."""
        if i < self.span:
            return i
        return len(self.prefix) + (i - len(self.prefix)) % len(self.loop)

    def successor(self, pos: int) -> int:
        return pos + 1 if pos + 1 < self.span else len(self.prefix)

    def suffix(self, i: int) -> LassoTrace:
        """The trace ``t[i, ∞]``."""
        if i <= len(self.prefix):
            return LassoTrace(self.prefix[i:], self.loop)
        shift = (i - len(self.prefix)) % len(self.loop)
        return LassoTrace((), self.loop[shift:] + self.loop[:shift])

    def normalize(self) -> LassoTrace:
        """Canonical representation: primitive loop, prefix rolled back maximally."""
        loop = self.loop
        n = len(loop)
        for d in range(1, n + 1):
            if n % d == 0 and loop == loop[:d] * (n // d):
                loop = loop[:d]
                break
        prefix = self.prefix
        while prefix and prefix[-1] == loop[-1]:
            prefix = prefix[:-1]
            loop = loop[-1:] + loop[:-1]
        return LassoTrace(prefix, loop)

    def same_word(self, other: LassoTrace) -> bool:
        n = max(len(self.prefix), len(other.prefix)) + math.lcm(self.period, other.period)
        return self.unroll(n) == other.unroll(n)

    def map(self, fn) -> LassoTrace:
        return LassoTrace(tuple(fn(x) for x in self.prefix), tuple(fn(x) for x in self.loop))


def zip_traces(t: LassoTrace, t2: LassoTrace) -> LassoTrace:
    """Pairwise zip; the result has the larger prefix and the lcm of both loops."""
    return zip_set([t, t2])


def zip_set(traces: Sequence[LassoTrace]) -> LassoTrace:
    """n-ary zip: letter i is the tuple of every trace's letter i."""
    if not traces:
        raise ModelError("zip of an empty trace list")
    p = max(len(t.prefix) for t in traces)
    loop_len = math.lcm(*(t.period for t in traces))
    prefix = tuple(tuple(t.letter_at(i) for t in traces) for i in range(p))
    loop = tuple(tuple(t.letter_at(p + j) for t in traces) for j in range(loop_len))
    return LassoTrace(prefix, loop)


@dataclass(frozen=True)
class TraceSet:
    aps: tuple[str, ...]
    traces: tuple[LassoTrace, ...]

    def __post_init__(self):
        object.__setattr__(self, "aps", tuple(self.aps))
        allowed = set(self.aps)
        seen: list[LassoTrace] = []
        for t in self.traces:
            for letter in t.prefix + t.loop:
                extra = set(letter) - allowed
                if extra:
                    raise ModelError(f"letter mentions {sorted(extra)} outside aps {list(self.aps)}")
            canon = t.normalize()
            if canon not in seen:
                seen.append(canon)
        object.__setattr__(self, "traces", tuple(seen))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[LassoTrace]:
        return iter(self.traces)

    def zipped(self) -> LassoTrace:
        return zip_set(self.traces)


def trace(prefix: Iterable[Iterable[str]], loop: Iterable[Iterable[str]]) -> LassoTrace:
    """Convenience constructor from iterables of proposition names."""
    return LassoTrace(tuple(frozenset(x) for x in prefix), tuple(frozenset(x) for x in loop))


# ---------------------------------------------------------------------------
# Trace-set file format
# ---------------------------------------------------------------------------

_LETTER = re.compile(r"\{([^}]*)\}")


def _parse_letters(chunk: str, lineno: int) -> tuple:
    chunk = chunk.strip()
    if not chunk:
        return ()
    letters = []
    for body in _LETTER.findall(chunk):
        letters.append(frozenset(p.strip() for p in body.split(",") if p.strip()))
    if _LETTER.sub("", chunk).replace(",", "").strip():
        raise ModelError(f"line {lineno}: cannot read letters {chunk!r}")
    return tuple(letters)


def _render_letter(letter) -> str:
    return "{" + ",".join(sorted(letter)) + "}"


def parse_traceset(text: str) -> TraceSet:
    aps: tuple[str, ...] | None = None
    traces = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("aps:"):
            aps = tuple(line[4:].split())
            continue
        if "|" not in line:
            raise ModelError(f"line {lineno}: expected 'prefix | loop'")
        left, right = line.split("|", 1)
        loop = _parse_letters(right, lineno)
        if not loop:
            raise ModelError(f"line {lineno}: empty loop")
        traces.append(LassoTrace(_parse_letters(left, lineno), loop))
    if aps is None:
        raise ModelError("missing 'aps:' header")
    return TraceSet(aps, tuple(traces))


def dump_traceset(ts: TraceSet) -> str:
    lines = ["aps: " + " ".join(ts.aps)]
    for t in ts.traces:
        left = ",".join(_render_letter(x) for x in t.prefix)
        right = ",".join(_render_letter(x) for x in t.loop)
        lines.append(f"{left} | {right}".strip())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Kripke structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KripkeTree:
    """Finite graph whose unrolling from ``root`` is the intended infinite tree.

    Node labels live in the ``label`` attribute of the networkx graph.
    """

    graph: nx.DiGraph
    root: Hashable

    def __post_init__(self):
        if self.root not in self.graph:
            raise ModelError(f"root {self.root!r} is not a node")
        for n in self.graph.nodes:
            if self.graph.out_degree(n) == 0:
                raise ModelError(f"node {n!r} has no successor")
            self.graph.nodes[n]["label"] = frozenset(self.graph.nodes[n].get("label", ()))

    @classmethod
    def build(cls, labels: dict, edges: Iterable[tuple], root: Hashable) -> KripkeTree:
        g = nx.DiGraph()
        for n, lab in labels.items():
            g.add_node(n, label=frozenset(lab))
        for a, b in edges:
            if a not in g or b not in g:
                raise ModelError(f"edge {a!r} -> {b!r} uses an undeclared node")
            g.add_edge(a, b)
        return cls(g, root)

    @classmethod
    def linear(cls, t: LassoTrace) -> KripkeTree:
        """The linear tree whose only path is ``t``."""
        labels = {i: t.letter_at(i) for i in range(t.span)}
        edges = [(i, t.successor(i)) for i in range(t.span)]
        return cls.build(labels, edges, 0)

    @property
    def nodes(self) -> list:
        return sorted(self.graph.nodes, key=repr)

    @property
    def aps(self) -> tuple[str, ...]:
        return tuple(sorted(set().union(*(self.label(n) for n in self.graph.nodes))))

    def label(self, n) -> frozenset:
        return self.graph.nodes[n]["label"]

    def successors(self, n) -> list:
        return sorted(self.graph.successors(n), key=repr)

    def reachable(self, start) -> set:
        return {start} | nx.descendants(self.graph, start)

    def relabel(self, labels: dict) -> KripkeTree:
        g = self.graph.copy()
        for n in g.nodes:
            g.nodes[n]["label"] = frozenset(labels.get(n, g.nodes[n]["label"]))
        return KripkeTree(g, self.root)

    def is_deterministic_from(self, start) -> bool:
        return all(self.graph.out_degree(n) == 1 for n in self.reachable(start))

    def trace_of(self, path: LassoTrace) -> LassoTrace:
        """Label sequence along a node path."""
        return path.map(self.label)


def parse_kripke(text: str) -> KripkeTree:
    labels, edges, root = {}, [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        if kind == "node":
            m = re.fullmatch(r"(\S+)\s*(\{[^}]*\})?", rest.strip())
            if not m:
                raise ModelError(f"line {lineno}: expected 'node <id> {{labels}}'")
            letters = _parse_letters(m.group(2) or "{}", lineno)
            labels[m.group(1)] = letters[0] if letters else frozenset()
        elif kind == "edge":
            parts = rest.split()
            if len(parts) != 2:
                raise ModelError(f"line {lineno}: expected 'edge <id> <id>'")
            edges.append(tuple(parts))
        elif kind == "root":
            root = rest.strip()
        else:
            raise ModelError(f"line {lineno}: unknown directive {kind!r}")
    if root is None:
        raise ModelError("missing 'root' line")
    return KripkeTree.build(labels, edges, root)


def dump_kripke(k: KripkeTree) -> str:
    lines = [f"node {n} {_render_letter(k.label(n))}" for n in k.nodes]
    lines += [f"edge {a} {b}" for a in k.nodes for b in k.successors(a)]
    lines.append(f"root {k.root}")
    return "\n".join(lines) + "\n"


def enumerate_lasso_paths(k: KripkeTree, start, max_len: int) -> list[LassoTrace]:
    """All lasso paths ``u·v^ω`` from ``start`` with ``|u|+|v| ≤ max_len``.

    Paths are LassoTraces over node ids, deduplicated by their canonical form.
    """
    if max_len < 1:
        raise ModelError("max_len must be at least 1")
    found: dict[LassoTrace, None] = {}

    def walk(nodes: list):
        last = nodes[-1]
        succ = k.successors(last)
        for j, n in enumerate(nodes):
            if n in succ:
                found.setdefault(LassoTrace(tuple(nodes[:j]), tuple(nodes[j:])).normalize(), None)
        if len(nodes) < max_len:
            for n in succ:
                walk(nodes + [n])

    walk([start])
    return list(found)


@dataclass(frozen=True)
class PathAssignment:
    """Immutable variable-to-path map remembering the last binding (ε)."""

    bindings: tuple[tuple[str, LassoTrace], ...] = field(default_factory=tuple)
    last: str | None = None

    def bind(self, var: str, path: LassoTrace) -> PathAssignment:
        rest = tuple((v, p) for v, p in self.bindings if v != var)
        return PathAssignment(rest + ((var, path),), var)

    def rebind(self, var: str, path: LassoTrace) -> PathAssignment:
        """Replace a binding without moving ε."""
        return PathAssignment(tuple((v, path if v == var else p) for v, p in self.bindings), self.last)

    def __getitem__(self, var: str) -> LassoTrace:
        for v, p in self.bindings:
            if v == var:
                return p
        raise KeyError(var)

    def __contains__(self, var: str) -> bool:
        return any(v == var for v, _ in self.bindings)

    @property
    def epsilon(self) -> LassoTrace | None:
        return self[self.last] if self.last is not None else None

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.bindings)
