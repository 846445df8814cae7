"""Büchi automata over symbolic propositional alphabets.

Letters are sets of proposition keys. A key is a plain proposition ``a`` or a
trace-indexed one ``a@pi``, so the same automaton type reads words, zipped
pairs and zipped triples.
"""
from __future__ import annotations

import functools
import itertools
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

from config import get_settings
from models import LassoTrace
from syntax import (
    And, Atom, Const, Eventually, ExistsProp, ForallProp, FormulaError, Globally, Knows, Next, Node, Not,
    Or, QUANTIFIERS, Release, Until, to_nnf, walk,
)

logger = logging.getLogger(__name__)


class AutomatonError(ValueError):
    """Invalid automaton construction request."""


class CapExceeded(RuntimeError):
    """A configured size cap was hit; the caller must report 'undecided'."""

    def __init__(self, what: str, cap: int):
        super().__init__(f"{what} exceeds cap {cap}")
        self.what = what
        self.cap = cap


def prop_key(atom: Atom) -> str:
    return atom.name if atom.var is None else f"{atom.name}@{atom.var}"


def all_letters(vocabulary: Sequence[str]) -> list[frozenset]:
    vocab = sorted(vocabulary)
    return [frozenset(p for p, bit in zip(vocab, bits) if bit)
            for bits in itertools.product((False, True), repeat=len(vocab))]


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Guard:
    """Propositional letter constraint in DNF; a cube is a set of (key, polarity)."""

    cubes: frozenset = frozenset()

    @staticmethod
    def literal(key: str, positive: bool = True) -> Guard:
        return Guard(frozenset({frozenset({(key, positive)})}))

    @staticmethod
    def cube(literals: Iterable[tuple[str, bool]]) -> Guard:
        lits = frozenset(literals)
        keys = [k for k, _ in lits]
        if len(keys) != len(set(keys)):
            return FALSE_GUARD
        return Guard(frozenset({lits}))

    @property
    def is_false(self) -> bool:
        return not self.cubes

    @property
    def is_true(self) -> bool:
        return frozenset() in self.cubes

    def props(self) -> set[str]:
        return {k for c in self.cubes for k, _ in c}

    def holds(self, letter: Iterable[str]) -> bool:
        letter = letter if isinstance(letter, (set, frozenset)) else set(letter)
        return any(all((k in letter) == v for k, v in c) for c in self.cubes)

    def conj(self, other: Guard) -> Guard:
        out = set()
        for c1 in self.cubes:
            for c2 in other.cubes:
                merged = c1 | c2
                if len({k for k, _ in merged}) == len(merged):
                    out.add(merged)
        return Guard(frozenset(out))

    def disj(self, other: Guard) -> Guard:
        if self.is_true or other.is_true:
            return TRUE_GUARD
        return Guard(self.cubes | other.cubes)

    def exists(self, key: str) -> Guard:
        return Guard(frozenset(frozenset(l for l in c if l[0] != key) for c in self.cubes))

    def witness(self) -> frozenset:
        """Some letter satisfying the guard (positive literals of the first cube)."""
        if self.is_false:
            raise AutomatonError("unsatisfiable guard has no witness letter")
        first = min(self.cubes, key=lambda c: sorted(c))
        return frozenset(k for k, v in first if v)

    @staticmethod
    def from_letters(letters: Iterable[frozenset], vocabulary: Sequence[str]) -> Guard:
        vocab = sorted(vocabulary)
        cubes = {frozenset((p, p in l) for p in vocab) for l in letters}
        changed = True
        while changed:
            changed = False
            for c1, c2 in itertools.combinations(sorted(cubes, key=sorted), 2):
                diff = c1 ^ c2
                if len(diff) == 2 and len({k for k, _ in diff}) == 1:
                    cubes -= {c1, c2}
                    cubes.add(c1 & c2)
                    changed = True
                    break
        return Guard(frozenset(cubes))

    def render(self) -> str:
        if self.is_false:
            return "false"
        if self.is_true:
            return "true"
        parts = []
        for c in sorted(self.cubes, key=sorted):
            parts.append(" & ".join(k if v else f"!{k}" for k, v in sorted(c)))
        return " | ".join(parts)


TRUE_GUARD = Guard(frozenset({frozenset()}))
FALSE_GUARD = Guard(frozenset())


# ---------------------------------------------------------------------------
# Automata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuchiAutomaton:
    states: tuple[int, ...]
    initial: int
    vocabulary: tuple[str, ...]
    transitions: tuple[tuple[int, Guard, int], ...]
    accepting: frozenset
    slots: tuple[str, ...] = ()

    def __post_init__(self):
        allowed = set(self.vocabulary)
        for src, g, dst in self.transitions:
            if not g.props() <= allowed:
                raise AutomatonError(f"guard {g.render()} leaves vocabulary {list(self.vocabulary)}")

    @property
    def size(self) -> int:
        return len(self.states)

    @functools.cached_property
    def _out(self) -> dict[int, list[tuple[Guard, int]]]:
        out: dict[int, list] = defaultdict(list)
        for src, g, dst in self.transitions:
            out[src].append((g, dst))
        return out

    def out(self, q: int) -> list[tuple[Guard, int]]:
        return self._out.get(q, [])

    def step(self, q: int, letter: frozenset) -> set[int]:
        return {dst for g, dst in self.out(q) if g.holds(letter)}

    def step_tuple(self, q: int, letter: tuple) -> set[int]:
        """Step on a tuple of node labels, one per slot."""
        return self.step(q, decode_letter(self, letter))

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.states)
        g.add_edges_from((s, d) for s, gd, d in self.transitions if not gd.is_false)
        return g


def decode_letter(a: BuchiAutomaton, labels: tuple) -> frozenset:
    """Tuple of node labels (one per slot) to the set of true keys."""
    if len(labels) != len(a.slots):
        raise AutomatonError(f"expected {len(a.slots)} labels, got {len(labels)}")
    return frozenset(f"{p}@{slot}" for slot, label in zip(a.slots, labels) for p in label)


def universal_automaton(vocabulary: Sequence[str] = (), slots: tuple[str, ...] = ()) -> BuchiAutomaton:
    return BuchiAutomaton((0,), 0, tuple(sorted(vocabulary)), ((0, TRUE_GUARD, 0),), frozenset({0}), slots)


def empty_automaton(vocabulary: Sequence[str] = (), slots: tuple[str, ...] = ()) -> BuchiAutomaton:
    return BuchiAutomaton((0,), 0, tuple(sorted(vocabulary)), (), frozenset(), slots)


def _renumber(a: BuchiAutomaton, keep: Iterable[int]) -> BuchiAutomaton:
    keep = set(keep)
    if a.initial not in keep:
        return empty_automaton(a.vocabulary, a.slots)
    order = [a.initial] + sorted(keep - {a.initial})
    index = {q: i for i, q in enumerate(order)}
    trans = tuple((index[s], g, index[d]) for s, g, d in a.transitions if s in keep and d in keep)
    return BuchiAutomaton(tuple(range(len(order))), 0, a.vocabulary, trans,
                          frozenset(index[q] for q in a.accepting if q in keep), a.slots)


def prune(a: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states that are unreachable or cannot reach an accepting cycle."""
    g = a.graph()
    reach = {a.initial} | nx.descendants(g, a.initial)
    good = set()
    for scc in nx.strongly_connected_components(g):
        if scc & a.accepting and (len(scc) > 1 or any(g.has_edge(q, q) for q in scc)):
            good |= scc
    alive = set(good)
    for q in good:
        alive |= nx.ancestors(g, q)
    return _renumber(a, reach & alive)


def dump_automaton(a: BuchiAutomaton) -> str:
    lines = [f"init: {a.initial}", "accepting: " + " ".join(str(q) for q in sorted(a.accepting))]
    if a.vocabulary:
        lines.append("vocabulary: " + " ".join(a.vocabulary))
    for s, g, d in sorted(a.transitions, key=lambda t: (t[0], t[2], t[1].render())):
        lines.append(f"{s} --[{g.render()}]--> {d}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# LTL to Büchi (tableau expansion plus counter degeneralization)
# ---------------------------------------------------------------------------

def _expand(obligations: frozenset) -> list[tuple[frozenset, frozenset, frozenset]]:
    covers: set[tuple[frozenset, frozenset, frozenset]] = set()

    def go(todo: list, lits: frozenset, nxt: frozenset, pending: frozenset):
        if not todo:
            covers.add((lits, nxt, pending))
            return
        f, rest = todo[0], todo[1:]
        if isinstance(f, Const):
            if f.value:
                go(rest, lits, nxt, pending)
        elif isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.arg, Atom)):
            atom, val = (f, True) if isinstance(f, Atom) else (f.arg, False)
            key = prop_key(atom)
            if (key, not val) not in lits:
                go(rest, lits | {(key, val)}, nxt, pending)
        elif isinstance(f, And):
            go([f.left, f.right] + rest, lits, nxt, pending)
        elif isinstance(f, Or):
            go([f.left] + rest, lits, nxt, pending)
            go([f.right] + rest, lits, nxt, pending)
        elif isinstance(f, Next):
            go(rest, lits, nxt | {f.arg}, pending)
        elif isinstance(f, Until):
            go([f.right] + rest, lits, nxt, pending)
            go([f.left] + rest, lits, nxt | {f}, pending | {f})
        elif isinstance(f, Eventually):
            go([f.arg] + rest, lits, nxt, pending)
            go(rest, lits, nxt | {f}, pending | {f})
        elif isinstance(f, Release):
            go([f.left, f.right] + rest, lits, nxt, pending)
            go([f.right] + rest, lits, nxt | {f}, pending)
        elif isinstance(f, Globally):
            go([f.arg] + rest, lits, nxt | {f}, pending)
        else:
            raise AutomatonError(f"{type(f).__name__} is not a quantifier-free temporal formula")

    go(sorted(obligations, key=repr), frozenset(), frozenset(), frozenset())
    return sorted(covers, key=repr)


def ltl_to_nba(f: Node, vocabulary: Iterable[str] = (), slots: tuple[str, ...] = ()) -> BuchiAutomaton:
    """Tableau construction for a quantifier-free formula; atoms ``a[π]`` become keys ``a@π``."""
    if any(isinstance(n, QUANTIFIERS + (Knows,)) for n in walk(f)):
        raise AutomatonError("ltl_to_nba needs a quantifier-free formula")
    g = to_nnf(f)
    keys = {prop_key(n) for n in walk(g) if isinstance(n, Atom)}
    vocab = tuple(sorted(keys | set(vocabulary)))
    untils = sorted({n for n in walk(g) if isinstance(n, (Until, Eventually))}, key=repr)
    m = len(untils)

    start = (frozenset({g}), 0)
    index = {start: 0}
    queue = deque([start])
    edges: dict[tuple[int, int], Guard] = {}
    cover_cache: dict[frozenset, list] = {}
    while queue:
        node, level = queue.popleft()
        src = index[(node, level)]
        if node not in cover_cache:
            cover_cache[node] = _expand(node)
        for lits, nxt, pending in cover_cache[node]:
            j = 0 if level == m else level
            while j < m and untils[j] not in pending:
                j += 1
            dst_key = (nxt, j)
            if dst_key not in index:
                index[dst_key] = len(index)
                queue.append(dst_key)
            dst = index[dst_key]
            guard = Guard.cube(lits)
            edges[(src, dst)] = edges[(src, dst)].disj(guard) if (src, dst) in edges else guard
    accepting = frozenset(i for (node, level), i in index.items() if level == m)
    trans = tuple((s, gd, d) for (s, d), gd in sorted(edges.items()))
    a = BuchiAutomaton(tuple(range(len(index))), 0, vocab, trans, accepting, slots)
    logger.debug("[automata] ltl_to_nba: %d states for %d untils", a.size, m)
    return a


def pair_automaton(psi: Node, slots: Sequence[str], mode: str = "pair") -> BuchiAutomaton:
    """Automaton over tuples of node labels, one slot per path variable.

    ``mode`` is ``pair`` (π, π''), ``triple`` (π, π', π'') or ``top``
    (universal, ignores ``psi``).
    """
    slots = tuple(slots)
    expected = {"pair": 2, "triple": 3, "top": None}
    if mode not in expected:
        raise AutomatonError(f"unknown mode {mode!r}")
    if mode == "top":
        return universal_automaton((), slots)
    if len(slots) != expected[mode]:
        raise AutomatonError(f"mode {mode} needs {expected[mode]} path variables, got {len(slots)}")
    for n in walk(psi):
        if isinstance(n, Atom) and n.var not in slots:
            raise AutomatonError(f"atom {n.name}[{n.var}] uses unknown path variable {n.var!r}")
    return ltl_to_nba(psi, slots=slots)


# ---------------------------------------------------------------------------
# Closure operations
# ---------------------------------------------------------------------------

def intersect(a: BuchiAutomaton, b: BuchiAutomaton) -> BuchiAutomaton:
    """Product with the three-phase flag: wait for A-accepting, then B-accepting."""
    vocab = tuple(sorted(set(a.vocabulary) | set(b.vocabulary)))
    start = (a.initial, b.initial, 0)
    index = {start: 0}
    queue = deque([start])
    trans = []
    while queue:
        p, q, x = queue.popleft()
        src = index[(p, q, x)]
        for g1, p2 in a.out(p):
            for g2, q2 in b.out(q):
                g = g1.conj(g2)
                if g.is_false:
                    continue
                y = x
                if x == 0 and p2 in a.accepting:
                    y = 1
                elif x == 1 and q2 in b.accepting:
                    y = 2
                elif x == 2:
                    y = 1 if p2 in a.accepting else 0
                key = (p2, q2, y)
                if key not in index:
                    index[key] = len(index)
                    queue.append(key)
                trans.append((src, g, index[key]))
    accepting = frozenset(i for (p, q, x), i in index.items() if x == 2)
    return BuchiAutomaton(tuple(range(len(index))), 0, vocab, tuple(trans), accepting, a.slots or b.slots)


def union(a: BuchiAutomaton, b: BuchiAutomaton) -> BuchiAutomaton:
    vocab = tuple(sorted(set(a.vocabulary) | set(b.vocabulary)))
    off_a, off_b = 1, 1 + a.size
    trans = [(s + off_a, g, d + off_a) for s, g, d in a.transitions]
    trans += [(s + off_b, g, d + off_b) for s, g, d in b.transitions]
    trans += [(0, g, d + off_a) for g, d in a.out(a.initial)]
    trans += [(0, g, d + off_b) for g, d in b.out(b.initial)]
    accepting = frozenset({q + off_a for q in a.accepting} | {q + off_b for q in b.accepting})
    return BuchiAutomaton(tuple(range(1 + a.size + b.size)), 0, vocab, tuple(trans), accepting,
                          a.slots or b.slots)


def project(a: BuchiAutomaton, key: str) -> BuchiAutomaton:
    """Existentially eliminate ``key`` from every guard."""
    if key not in a.vocabulary:
        raise AutomatonError(f"{key!r} is not in the vocabulary {list(a.vocabulary)}")
    vocab = tuple(p for p in a.vocabulary if p != key)
    trans = tuple((s, g.exists(key), d) for s, g, d in a.transitions)
    return BuchiAutomaton(a.states, a.initial, vocab, trans, a.accepting, a.slots)


# ---------------------------------------------------------------------------
# Complementation: subset phase, then tight level rankings with a breakpoint
# ---------------------------------------------------------------------------

def _tight_rankings(states: frozenset, accepting: frozenset, bounds: dict | None, rank: int | None):
    order = sorted(states)
    nonacc = sum(1 for s in order if s not in accepting)
    ranks = [rank] if rank is not None else range(1, 2 * nonacc, 2)
    for r in ranks:
        needed = (r + 1) // 2
        if needed > nonacc:
            continue
        assignment: list[int] = []

        def go(i: int, used_odd: frozenset, free_nonacc: int):
            if needed - len(used_odd) > free_nonacc:
                return
            if i == len(order):
                if len(used_odd) == needed:
                    yield tuple(zip(order, assignment))
                return
            s = order[i]
            top = r if bounds is None else min(r, bounds[s])
            is_acc = s in accepting
            for k in range(top + 1):
                if is_acc and k % 2:
                    continue
                assignment.append(k)
                yield from go(i + 1, used_odd | {k} if k % 2 else used_odd, free_nonacc - (0 if is_acc else 1))
                assignment.pop()

        yield from go(0, frozenset(), nonacc)


def complement(a: BuchiAutomaton, cap: int | None = None, max_states: int | None = None) -> BuchiAutomaton:
    """Language complement; raises :class:`CapExceeded` instead of truncating."""
    settings = get_settings().automata
    cap = cap or settings.state_cap
    max_states = max_states or settings.max_output_states
    a = prune(a)
    if not a.accepting:
        return universal_automaton(a.vocabulary, a.slots)
    if a.size > cap:
        raise CapExceeded(f"complement input of {a.size} states", cap)
    if len(a.vocabulary) > settings.max_letters_vocabulary:
        raise CapExceeded(f"complement vocabulary of {len(a.vocabulary)} propositions",
                          settings.max_letters_vocabulary)
    letters = all_letters(a.vocabulary)
    succ = {q: {l: frozenset(a.step(q, l)) for l in letters} for q in a.states}
    acc = a.accepting

    sink = ("R", (), frozenset())
    start = ("S", frozenset({a.initial}))
    index = {start: 0}
    queue = deque([start])
    table: dict[int, dict[frozenset, set[int]]] = defaultdict(lambda: defaultdict(set))

    def add(state) -> int:
        if state not in index:
            if len(index) >= max_states:
                raise CapExceeded("complement output", max_states)
            index[state] = len(index)
            queue.append(state)
        return index[state]

    while queue:
        st = queue.popleft()
        i = index[st]
        for l in letters:
            targets = []
            if st[0] == "S":
                nxt = frozenset().union(*(succ[q][l] for q in st[1]))
                if not nxt:
                    targets.append(sink)
                else:
                    targets.append(("S", nxt))
                    targets += [("R", g, frozenset()) for g in _tight_rankings(nxt, acc, None, None)]
            else:
                _, g, owing = st
                ranks = dict(g)
                nxt = frozenset().union(*(succ[q][l] for q in ranks)) if ranks else frozenset()
                if not nxt:
                    targets.append(sink)
                else:
                    bounds = {s2: min(ranks[s] for s in ranks if s2 in succ[s][l]) for s2 in nxt}
                    for g2 in _tight_rankings(nxt, acc, bounds, max(ranks.values())):
                        evens = frozenset(s for s, k in g2 if k % 2 == 0)
                        if owing:
                            owing2 = frozenset().union(*(succ[s][l] for s in owing)) & evens
                        else:
                            owing2 = evens
                        targets.append(("R", g2, owing2))
            for t in targets:
                table[i][l].add(add(t))

    accepting = {i for st, i in index.items() if st[0] == "R" and not st[2]}
    explicit = _Explicit(len(index), 0, {i: dict(row) for i, row in table.items()}, accepting, letters)
    result = explicit.reduce().to_automaton(a.vocabulary, a.slots)
    logger.debug("[automata] complement: %d -> %d states (%d before reduction)", a.size, result.size, len(index))
    return result


@dataclass
class _Explicit:
    """Letter-explicit automaton used while reducing complements."""

    n: int
    initial: int
    table: dict[int, dict[frozenset, set[int]]]
    accepting: set[int]
    letters: list[frozenset]

    def succ(self, q: int, l: frozenset) -> set[int]:
        return self.table.get(q, {}).get(l, set())

    def useful(self) -> set[int]:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n))
        for q, row in self.table.items():
            for targets in row.values():
                g.add_edges_from((q, d) for d in targets)
        reach = {self.initial} | nx.descendants(g, self.initial)
        good = set()
        for scc in nx.strongly_connected_components(g):
            if scc & self.accepting and (len(scc) > 1 or any(g.has_edge(q, q) for q in scc)):
                good |= scc
        alive = set(good)
        for q in good:
            alive |= nx.ancestors(g, q)
        return reach & alive

    def restrict(self, keep: set[int]) -> _Explicit:
        table = {q: {l: {d for d in ds if d in keep} for l, ds in row.items()}
                 for q, row in self.table.items() if q in keep}
        return _Explicit(self.n, self.initial, table, self.accepting & keep, self.letters)

    def simulation(self, states: list[int]) -> set[tuple[int, int]]:
        rel = {(p, q) for p in states for q in states if p not in self.accepting or q in self.accepting}
        changed = True
        while changed:
            changed = False
            for p, q in list(rel):
                for l in self.letters:
                    if any(all((p2, q2) not in rel for q2 in self.succ(q, l)) for p2 in self.succ(p, l)):
                        rel.discard((p, q))
                        changed = True
                        break
        return rel

    def reduce(self) -> _Explicit:
        keep = self.useful()
        if self.initial not in keep:
            return _Explicit(1, 0, {}, set(), self.letters)
        cur = self.restrict(keep)
        states = sorted(keep)
        if len(states) > 400:
            return cur
        rel = cur.simulation(states)
        rep = {}
        for q in states:
            rep[q] = min(p for p in states if (p, q) in rel and (q, p) in rel)
        table: dict[int, dict[frozenset, set[int]]] = defaultdict(lambda: defaultdict(set))
        for q in states:
            for l, ds in cur.table.get(q, {}).items():
                targets = {rep[d] for d in ds}
                # drop targets simulated by a sibling target
                kept = {d for d in targets
                        if not any(e != d and (d, e) in rel and (e, d) not in rel for e in targets)}
                table[rep[q]][l] |= kept
        reps = set(rep.values())
        merged = _Explicit(self.n, rep[self.initial], {q: dict(r) for q, r in table.items()},
                           {q for q in reps if q in self.accepting}, self.letters)
        return merged.restrict(merged.useful())

    def to_automaton(self, vocabulary: Sequence[str], slots: tuple[str, ...]) -> BuchiAutomaton:
        live = {self.initial} | set(self.table)
        order = [self.initial] + sorted(live - {self.initial})
        index = {q: i for i, q in enumerate(order)}
        grouped: dict[tuple[int, int], list[frozenset]] = defaultdict(list)
        for q, row in self.table.items():
            for l, ds in row.items():
                for d in ds:
                    if d in index:
                        grouped[(index[q], index[d])].append(l)
        trans = tuple((s, Guard.from_letters(ls, vocabulary), d) for (s, d), ls in sorted(grouped.items()))
        return BuchiAutomaton(tuple(range(len(order))), 0, tuple(sorted(vocabulary)), trans,
                              frozenset(index[q] for q in self.accepting if q in index), slots)


# ---------------------------------------------------------------------------
# Emptiness and membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LassoWitness:
    stem: tuple[frozenset, ...]
    cycle: tuple[frozenset, ...]
    stem_run: tuple[int, ...]
    cycle_run: tuple[int, ...]

    def as_lasso(self) -> LassoTrace:
        return LassoTrace(self.stem, self.cycle)


def _edge_letter(a: BuchiAutomaton, src: int, dst: int) -> frozenset:
    guards = sorted((g for g, d in a.out(src) if d == dst and not g.is_false), key=lambda g: g.render())
    return guards[0].witness()


def is_empty(a: BuchiAutomaton) -> LassoWitness | None:
    """None when the language is empty, else a lasso whose run is checkable."""
    g = a.graph()
    dist = nx.single_source_shortest_path_length(g, a.initial)
    best = None
    for scc in nx.strongly_connected_components(g):
        if len(scc) == 1 and not any(g.has_edge(q, q) for q in scc):
            continue
        for f in sorted(scc & a.accepting):
            if f in dist and (best is None or (dist[f], f) < (dist[best[0]], best[0])):
                best = (f, scc)
    if best is None:
        return None
    f, scc = best
    stem_path = nx.shortest_path(g, a.initial, f)
    sub = g.subgraph(scc)
    cycle_path = None
    for s in sorted(sub.successors(f)):
        path = [f] + nx.shortest_path(sub, s, f)
        if cycle_path is None or len(path) < len(cycle_path):
            cycle_path = path
    stem = tuple(_edge_letter(a, u, v) for u, v in zip(stem_path, stem_path[1:]))
    cycle = tuple(_edge_letter(a, u, v) for u, v in zip(cycle_path, cycle_path[1:]))
    return LassoWitness(stem, cycle, tuple(stem_path), tuple(cycle_path))


def check_run(a: BuchiAutomaton, w: LassoWitness) -> bool:
    """Independent re-validation of an emptiness witness."""
    if not w.cycle or not w.stem_run or not w.cycle_run:
        return False
    if w.stem_run[0] != a.initial or w.stem_run[-1] != w.cycle_run[0] or w.cycle_run[-1] != w.cycle_run[0]:
        return False
    if len(w.stem_run) != len(w.stem) + 1 or len(w.cycle_run) != len(w.cycle) + 1:
        return False
    steps = list(zip(w.stem_run, w.stem, w.stem_run[1:])) + list(zip(w.cycle_run, w.cycle, w.cycle_run[1:]))
    if any(dst not in a.step(src, letter) for src, letter, dst in steps):
        return False
    return any(q in a.accepting for q in w.cycle_run)


def membership(w: LassoTrace, a: BuchiAutomaton) -> bool:
    """Product of the word's positions with ``a``, then accepting-cycle search."""
    start = (a.initial, 0)
    seen = {start}
    queue = deque([start])
    g = nx.DiGraph()
    g.add_node(start)
    while queue:
        q, pos = queue.popleft()
        letter = w.letter_at(pos)
        nxt_pos = w.successor(pos)
        for q2 in a.step(q, letter):
            node = (q2, nxt_pos)
            g.add_edge((q, pos), node)
            if node not in seen:
                seen.add(node)
                queue.append(node)
    for scc in nx.strongly_connected_components(g):
        if any(q in a.accepting for q, _ in scc):
            if len(scc) > 1 or any(g.has_edge(n, n) for n in scc):
                return True
    return False


# ---------------------------------------------------------------------------
# Formulas with propositional quantifiers under Boolean connectives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lang:
    """An automaton together with the polarity it represents."""

    automaton: BuchiAutomaton
    negated: bool = False

    def contains(self, w: LassoTrace) -> bool:
        return membership(w, self.automaton) != self.negated

    def positive(self, cap: int | None = None, max_states: int | None = None) -> BuchiAutomaton:
        return complement(self.automaton, cap, max_states) if self.negated else self.automaton

    def negative(self, cap: int | None = None, max_states: int | None = None) -> BuchiAutomaton:
        """Automaton for the complement language."""
        return self.automaton if self.negated else complement(self.automaton, cap, max_states)


def formula_automaton(f: Node, cap: int | None = None, max_states: int | None = None) -> Lang:
    """Compile a formula whose propositional quantifiers sit under Boolean connectives.

    Each subformula is built positively or negatively, whichever its context
    consumes without complementing; complementation happens only where
    quantifiers alternate.
    """
    g = to_nnf(f)

    def quantified(n: Node) -> bool:
        return any(isinstance(k, (ExistsProp, ForallProp)) for k in walk(n))

    def go(n: Node, want_negated: bool) -> Lang:
        if not quantified(n):
            if want_negated:
                return Lang(ltl_to_nba(Not(n)), True)
            return Lang(ltl_to_nba(n), False)
        if isinstance(n, (And, Or)):
            left, right = go(n.left, want_negated), go(n.right, want_negated)
            if left.negated != right.negated:
                # bring the smaller one to the other's polarity
                small, big = sorted((left, right), key=lambda l: l.automaton.size)
                small = Lang(complement(small.automaton, cap, max_states), not small.negated)
                left, right = small, big
            positive_and = isinstance(n, And) != left.negated
            op = intersect if positive_and else union
            return Lang(op(left.automaton, right.automaton), left.negated)
        if isinstance(n, ExistsProp):
            body = go(n.body, False).positive(cap, max_states)
            return Lang(project(body, n.var) if n.var in body.vocabulary else body, False)
        if isinstance(n, ForallProp):
            body = go(n.body, True).negative(cap, max_states)
            return Lang(project(body, n.var) if n.var in body.vocabulary else body, True)
        raise FormulaError(f"propositional quantifier below {type(n).__name__} is not supported here")

    return go(g, False)
