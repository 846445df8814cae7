"""Comb-shaped models behind the ∃* HyperCTL* decision procedure.

A comb has a spine path ``p`` and, for every position ``i``, a witness path
``p_i`` branching off at ``p[i]``. Each tooth carries a run of the designated
automaton on the pair ``(p[i,∞], p_i)``; node ``p_i[j]`` is labeled with the
state reached after reading its letter. Combs are materialized up to a depth
``D``: the spine has ``D+1`` letters and tooth ``i`` has ``D-i+1``.

Higher dimensions nest: the teeth of a d-comb are (d-1)-combs whose spine
letters are tuples of the outer letters they run alongside.
"""
from __future__ import annotations

import itertools
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Hashable, Sequence

import networkx as nx

from automata import (
    BuchiAutomaton, decode_letter, is_empty, ltl_to_nba, membership, pair_automaton, prune,
)
from config import get_settings
from logging_utils import log_call
from models import KripkeTree, LassoTrace, zip_set, zip_traces
from sat import Outcome, SatVerdict
from semantics import Verdict, eval_branching
from syntax import (
    FALSE, TRUE, And, Atom, Exists, Eventually, Globally, Knows, Node, QUANTIFIERS, Release, Until, bind_state_atoms,
    Logic, children, map_children, parse, to_nnf, walk,
)

logger = logging.getLogger(__name__)


class CombError(ValueError):
    def __init__(self, reason: str, index: int | None = None):
        super().__init__(reason)
        self.reason = reason
        self.index = index


class BoundOverflow(CombError, OverflowError):
    """The requested bound has more bits than ``comb.max_bound_bits`` allows."""


def _flat(letter) -> tuple:
    return letter if isinstance(letter, tuple) else (letter,)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def accepting_run(a: BuchiAutomaton, word: LassoTrace, length: int) -> tuple[int, ...] | None:
    """States after each of the first ``length`` letters of some accepting run on ``word``."""
    start = (a.initial, 0)
    g = nx.DiGraph()
    g.add_node(start)
    todo = [start]
    while todo:
        q, pos = todo.pop()
        for q2 in a.step(q, word.letter_at(pos)):
            node = (q2, word.successor(pos))
            if node not in g:
                todo.append(node)
            g.add_edge((q, pos), node)
    good = set()
    for scc in nx.strongly_connected_components(g):
        if any(q in a.accepting for q, _ in scc) and (len(scc) > 1 or any(g.has_edge(n, n) for n in scc)):
            good |= scc
    alive = set(good)
    for n in good:
        alive |= nx.ancestors(g, n)
    if start not in alive:
        return None
    node, run = start, []
    for _ in range(length):
        node = min((s for s in g.successors(node) if s in alive), key=repr)
        run.append(node[0])
    return tuple(run)


def find_run(a: BuchiAutomaton, letters: Sequence[frozenset]) -> tuple[int, ...] | None:
    """Some run (not necessarily extendable) on a finite word, or None."""
    layers = [{a.initial}]
    for letter in letters:
        layers.append({d for q in layers[-1] for d in a.step(q, letter)})
        if not layers[-1]:
            return None
    if not letters:
        return ()
    run = [min(layers[-1])]
    for t in range(len(letters) - 1, 0, -1):
        run.append(min(q for q in layers[t] if run[-1] in a.step(q, letters[t])))
    return tuple(reversed(run))


# ---------------------------------------------------------------------------
# Combs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Comb:
    automata: tuple[BuchiAutomaton, ...]
    spine: tuple
    teeth: tuple
    runs: tuple = ()
    owner: tuple = ()          # automaton index per tooth; empty when there is one automaton
    formula: str = ""          # pair formula the automaton was built from, kept for dump_comb

    def __post_init__(self):
        d = self.depth
        if len(self.teeth) != d + 1:
            raise CombError(f"expected {d + 1} teeth for depth {d}, got {len(self.teeth)}")
        if self.dimension == 2:
            if len(self.runs) != d + 1:
                raise CombError(f"expected {d + 1} runs, got {len(self.runs)}")
            for i, tooth in enumerate(self.teeth):
                if len(tooth) != d - i + 1:
                    raise CombError(f"tooth {i} has {len(tooth)} letters, expected {d - i + 1}", i)
                if len(self.runs[i]) != d - i + 1:
                    raise CombError(f"run {i} has {len(self.runs[i])} states, expected {d - i + 1}", i)
        else:
            for i, sub in enumerate(self.teeth):
                if sub.depth != d - i:
                    raise CombError(f"sub-comb {i} has depth {sub.depth}, expected {d - i}", i)
                if any(_flat(sub.spine[j])[:-1] != _flat(self.spine[i + j]) for j in range(sub.depth + 1)):
                    raise CombError(f"sub-comb {i} does not run alongside the spine", i)

    @property
    def depth(self) -> int:
        return len(self.spine) - 1

    @property
    def dimension(self) -> int:
        if self.teeth and isinstance(self.teeth[0], Comb):
            return self.teeth[0].dimension + 1
        return 2

    @property
    def automaton(self) -> BuchiAutomaton:
        return self.automata[0]

    def automaton_of(self, i: int) -> BuchiAutomaton:
        return self.automata[self.owner[i]] if self.owner else self.automata[0]

    def state(self, i: int, j: int) -> Hashable:
        """Run state at ``p_i[j]``; tagged with the automaton index when there are several."""
        q = self.runs[i][j]
        return q if len(self.automata) == 1 else (self.owner[i] if self.owner else 0, q)

    def letter(self, i: int, j: int) -> frozenset:
        return decode_letter(self.automaton_of(i), _flat(self.spine[i + j]) + _flat(self.teeth[i][j]))

    @property
    def state_count(self) -> int:
        if self.dimension > 2:
            return self.teeth[0].state_count
        return sum(a.size for a in self.automata)


def run_errors(c: Comb) -> list[tuple[int, int]]:
    """Positions ``(i, j)`` where the run label is not a transition of the automaton."""
    if c.dimension > 2:
        return [(i, j) for i, sub in enumerate(c.teeth) for j, _ in run_errors(sub)[:1]]
    bad = []
    for i, run in enumerate(c.runs):
        a = c.automaton_of(i)
        prev = a.initial
        for j, q in enumerate(run):
            if q not in a.step(prev, c.letter(i, j)):
                bad.append((i, j))
                break
            prev = q
    return bad


@log_call
def build_comb(spine: LassoTrace, witnesses: Sequence[LassoTrace], automaton: BuchiAutomaton,
               depth: int | None = None, formula: str = "") -> Comb:
    """Label spine and witnesses with prefixes of accepting runs of ``automaton``."""
    d = len(witnesses) - 1 if depth is None else depth
    if d < 0 or len(witnesses) < d + 1:
        raise CombError(f"need {d + 1} witnesses for depth {d}")
    teeth, runs = [], []
    for i in range(d + 1):
        w = witnesses[i]
        if w.letter_at(0) != _flat(spine.letter_at(i))[-1]:
            raise CombError(f"witness {i} does not branch off the spine at p[{i}]", i)
        pair = zip_traces(spine.suffix(i), w).map(lambda t: decode_letter(automaton, _flat(t[0]) + (t[1],)))
        run = accepting_run(automaton, pair, d - i + 1)
        if run is None:
            raise CombError(f"pair {i} is not accepted by the automaton", i)
        teeth.append(tuple(w.unroll(d - i + 1)))
        runs.append(run)
    return Comb((automaton,), tuple(spine.unroll(d + 1)), tuple(teeth), tuple(runs), formula=formula)


def frontier(c: Comb, k: int) -> frozenset:
    if not 0 <= k <= c.depth:
        raise CombError(f"level {k} is outside the materialized depth {c.depth}")
    if c.dimension == 2:
        return frozenset(c.state(i, k - i) for i in range(k + 1))
    return frozenset(frontier(c.teeth[i], k - i) for i in range(k + 1))


def diagonal(c: Comb, k: int) -> list:
    """Node references ``(i, k-i)`` on ``D_k``; nested lists per sub-comb for d > 2."""
    if not 0 <= k <= c.depth:
        raise CombError(f"level {k} is outside the materialized depth {c.depth}")
    if c.dimension == 2:
        return [(i, k - i) for i in range(k + 1)]
    return [diagonal(c.teeth[i], k - i) for i in range(k + 1)]


def multiplicity(c: Comb, k: int) -> Counter:
    """How many entries of ``D_k`` carry each state (each sub-frontier for d > 2)."""
    if c.dimension == 2:
        return Counter(c.state(i, k - i) for i in range(k + 1))
    return Counter(frontier(c.teeth[i], k - i) for i in range(k + 1))


def cuttable_counts(counts: Counter, counts2: Counter, state_count: int) -> bool:
    """Same support, and every item occurs on the first diagonal as often as on the second or |Q| times."""
    if set(counts) != set(counts2):
        return False
    return all(counts[q] >= counts2[q] or counts[q] >= state_count for q in counts2)


def _cuttable_between(a: Comb, la: int, b: Comb, lb: int, nq: int) -> bool:
    if frontier(a, la) != frontier(b, lb):
        return False
    if not cuttable_counts(multiplicity(a, la), multiplicity(b, lb), nq):
        return False
    if a.dimension == 2:
        return True
    return all(any(_cuttable_between(a.teeth[i], la - i, b.teeth[j], lb - j, nq) for j in range(lb + 1))
               for i in range(la + 1))


def cuttable(c: Comb, k: int, k2: int) -> bool:
    if not 0 <= k <= k2 <= c.depth:
        raise CombError(f"need 0 ≤ k ≤ k' ≤ {c.depth}, got {k}, {k2}")
    return _cuttable_between(c, k, c, k2, c.state_count)


# ---------------------------------------------------------------------------
# Cuts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutPlan:
    """``mapping[i]`` names the tooth on ``D_k'`` whose suffix continues tooth ``i`` of ``D_k``.

    For d > 2 each entry is ``(i', inner plan)``.
    """

    k: int
    k2: int
    mapping: tuple
    preserve: int | None = None
    representatives: tuple = ()


def _match(a: Comb, la: int, b: Comb, lb: int) -> tuple:
    """Default mapping between two diagonals with equal frontiers."""
    if a.dimension == 2:
        out = []
        for i in range(la + 1):
            q = a.state(i, la - i)
            partner = next((j for j in range(lb + 1) if b.state(j, lb - j) == q), None)
            if partner is None:
                raise CombError(f"state {q!r} of D_{la} does not occur on D_{lb}", i)
            out.append(partner)
        return tuple(out)
    nq = a.state_count
    out = []
    for i in range(la + 1):
        partner = next((j for j in range(lb + 1)
                        if _cuttable_between(a.teeth[i], la - i, b.teeth[j], lb - j, nq)), None)
        if partner is None:
            raise CombError(f"sub-comb {i} of D_{la} has no cuttable partner on D_{lb}", i)
        inner = _match(a.teeth[i], la - i, b.teeth[partner], lb - partner)
        out.append((partner, CutPlan(la - i, lb - partner, inner)))
    return tuple(out)


def plan_cut(c: Comb, k: int, k2: int, preserve: int | None = None) -> CutPlan:
    """A cut from ``D_k'`` back to ``D_k``; with ``preserve`` it keeps ``F_preserve`` intact."""
    if not 0 <= k < k2 <= c.depth:
        raise CombError(f"need 0 ≤ k < k' ≤ {c.depth}, got {k}, {k2}")
    if frontier(c, k) != frontier(c, k2):
        raise CombError(f"frontiers of D_{k} and D_{k2} differ")
    if preserve is None:
        return CutPlan(k, k2, _match(c, k, c, k2))
    if c.dimension != 2:
        raise CombError("preserving cuts are implemented for two-dimensional combs")
    if not k2 <= preserve <= c.depth:
        raise CombError(f"preserved level must lie in [{k2}, {c.depth}]")
    mapping: list[int | None] = [None] * (k + 1)
    reps: dict = {}
    free = list(range(k + 1))
    for q in sorted(frontier(c, preserve), key=repr):
        # positions after k' survive the cut untouched
        outside = [i for i in range(k2 + 1, preserve + 1) if c.state(i, preserve - i) == q]
        if outside:
            reps[q] = outside[0]
            continue
        for r in (i for i in range(k2 + 1) if c.state(i, preserve - i) == q):
            src = next((i for i in free if c.state(i, k - i) == c.state(r, k2 - r)), None)
            if src is not None:
                mapping[src] = r
                free.remove(src)
                reps[q] = r
                break
        else:
            raise CombError(f"no representative for state {q!r} survives the cut")
    default = _match(c, k, c, k2)
    full = tuple(default[i] if m is None else m for i, m in enumerate(mapping))
    return CutPlan(k, k2, full, preserve, tuple(sorted(reps.items(), key=repr)))


def _cross_cut(a: Comb, la: int, b: Comb, lb: int, mapping: tuple) -> Comb:
    """Keep ``a`` up to ``D_la`` and continue with ``b`` after ``D_lb``."""
    spine = a.spine[:la + 1] + b.spine[lb + 1:]
    if a.dimension > 2:
        teeth = []
        for i, (j, inner) in enumerate(mapping):
            teeth.append(_cross_cut(a.teeth[i], la - i, b.teeth[j], lb - j, inner.mapping))
        teeth += list(b.teeth[lb + 1:])
        return Comb(a.automata, spine, tuple(teeth), formula=a.formula)
    teeth, runs, owner = [], [], []
    for i, j in enumerate(mapping):
        if a.state(i, la - i) != b.state(j, lb - j):
            raise CombError(f"tooth {i} and tooth {j} meet in different states", i)
        teeth.append(a.teeth[i][:la - i + 1] + b.teeth[j][lb - j + 1:])
        runs.append(a.runs[i][:la - i + 1] + b.runs[j][lb - j + 1:])
        owner.append(a.owner[i] if a.owner else 0)
    for j in range(lb + 1, b.depth + 1):
        teeth.append(b.teeth[j])
        runs.append(b.runs[j])
        owner.append(b.owner[j] if b.owner else 0)
    out = Comb(a.automata, spine, tuple(teeth), tuple(runs), tuple(owner) if a.owner else (), a.formula)
    return _revalidate(out)


def _revalidate(c: Comb) -> Comb:
    bad = {i for i, _ in run_errors(c)}
    if not bad:
        return c
    runs = list(c.runs)
    for i in sorted(bad):
        letters = [c.letter(i, j) for j in range(len(c.teeth[i]))]
        fresh = find_run(c.automaton_of(i), letters)
        if fresh is None:
            raise CombError(f"tooth {i} has no run after the cut", i)
        logger.warning(f"[comb] re-labeled the run of transplanted tooth {i}")
        runs[i] = fresh
    return replace(c, runs=tuple(runs))


@log_call
def cut(c: Comb, plan: CutPlan) -> Comb:
    if not 0 <= plan.k < plan.k2 <= c.depth or len(plan.mapping) != plan.k + 1:
        raise CombError("cut plan does not fit the comb")
    return _cross_cut(c, plan.k, c, plan.k2, plan.mapping)


@log_call
def preserving_cut(c: Comb, k: int, k2: int, k3: int) -> Comb:
    """Cut ``D_k'`` back to ``D_k`` so that ``F_k''`` reappears unchanged at ``k''-(k'-k)``."""
    if not cuttable(c, k, k2):
        raise CombError(f"D_{k} and D_{k2} are not cuttable")
    out = cut(c, plan_cut(c, k, k2, preserve=k3))
    if frontier(out, k3 - (k2 - k)) != frontier(c, k3):
        raise CombError(f"cut lost part of F_{k3}")
    return out


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def _check_bits(bits: float, what: str) -> None:
    limit = get_settings().comb.max_bound_bits
    if bits > limit:
        raise BoundOverflow(f"{what} needs about {int(bits)} bits, above max_bound_bits={limit}")


def bound_b(n: int) -> int:
    """Depth bound ``|Q|^|Q| + (2+|Q|)(|Q|+1)^|Q|`` for a comb prefix."""
    if n < 1:
        raise ValueError("automaton size must be at least 1")
    _check_bits(n * math.log2(n + 1) + math.log2(n + 2) + 2, f"bound_b({n})")
    return n ** n + (2 + n) * (n + 1) ** n


def bound_b_prime(n: int, n_pair: int, n_top: int) -> int:
    """Bound with a release point: ``|Q|^|Q| + (|Q|+1)^|Q|`` plus the bound over all three automata."""
    if min(n, n_pair, n_top) < 1:
        raise ValueError("automaton sizes must be at least 1")
    total = n + n_pair + n_top
    _check_bits(total * math.log2(total + 1) + math.log2(total + 2) + 3, f"bound_b_prime({n}, {n_pair}, {n_top})")
    return n ** n + (n + 1) ** n + bound_b(total)


# ---------------------------------------------------------------------------
# Pumping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PumpedComb:
    """Infinite comb: spine lasso, teeth up to ``inf'``, teeth after it repeat with the spine's period."""

    automaton: BuchiAutomaton
    spine: LassoTrace
    teeth: tuple[LassoTrace, ...]
    inf: int
    inf2: int

    @property
    def period(self) -> int:
        return self.inf2 - self.inf

    def tooth(self, i: int) -> LassoTrace:
        if i <= self.inf2:
            return self.teeth[i]
        return self.teeth[self.inf + 1 + (i - self.inf - 1) % self.period]

    def pair(self, i: int) -> LassoTrace:
        return zip_traces(self.spine.suffix(i), self.tooth(i)).map(
            lambda t: decode_letter(self.automaton, _flat(t[0]) + (t[1],)))

    def kripke(self, with_teeth: bool = True) -> KripkeTree:
        labels, edges = {}, []
        for j in range(self.spine.span):
            labels[f"s{j}"] = self.spine.letter_at(j)
            edges.append((f"s{j}", f"s{self.spine.successor(j)}"))
        if with_teeth:
            for i, tooth in enumerate(self.teeth):
                name = lambda j, i=i: f"t{i}_{j}"
                for j in range(tooth.span):
                    labels[name(j)] = tooth.letter_at(j)
                    edges.append((name(j), name(tooth.successor(j))))
                edges.append((f"s{i}", name(tooth.successor(0))))
        k = KripkeTree.build(labels, edges, "s0")
        keep = k.reachable("s0")
        return KripkeTree(k.graph.subgraph(keep).copy(), "s0")


@log_call
def pump(c: Comb, inf: int, inf2: int, designated: Sequence[int]) -> PumpedComb:
    """Extend a comb prefix ending at ``D_inf'`` into an ultimately periodic infinite comb."""
    if c.dimension != 2 or len(c.automata) != 1:
        raise CombError("pumping needs a two-dimensional comb over one automaton")
    if not 0 <= inf < inf2 <= c.depth:
        raise CombError(f"need 0 ≤ inf < inf' ≤ {c.depth}, got {inf}, {inf2}")
    a = c.automaton
    reps: dict = {}
    for i in sorted(set(designated)):
        if i > inf:
            raise CombError(f"designated position {i} is not on D_{inf}", i)
        if not any(c.runs[i][j] in a.accepting for j in range(inf - i + 1, inf2 - i + 1)):
            raise CombError(f"run {i} has no accepting state between inf and inf'", i)
        reps.setdefault(c.state(i, inf - i), i)
    missing = frontier(c, inf2) - set(reps)
    if missing:
        raise CombError(f"no designated position for states {sorted(missing, key=repr)}")

    def segment(q) -> tuple[tuple, Hashable]:
        r = reps[q]
        return c.teeth[r][inf - r + 1:inf2 - r + 1], c.state(r, inf2 - r)

    teeth = []
    for i in range(inf2 + 1):
        head = c.teeth[i][:inf2 - i + 1]
        q = c.state(i, inf2 - i)
        order: list = []
        while q not in order:
            order.append(q)
            q = segment(q)[1]
        start = order.index(q)
        prefix = head + sum((segment(s)[0] for s in order[:start]), ())
        loop = sum((segment(s)[0] for s in order[start:]), ())
        teeth.append(LassoTrace(prefix, loop))
    pumped = PumpedComb(a, LassoTrace(c.spine[:inf + 1], c.spine[inf + 1:inf2 + 1]), tuple(teeth), inf, inf2)
    for i in range(inf2 + 3 * pumped.period + 1):
        if not membership(pumped.pair(i), a):
            raise CombError(f"pumped pair {i} is not accepted", i)
    return pumped


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_LETTER = re.compile(r"\{([^}]*)\}")


def _letters(chunk: str, lineno: int) -> tuple[frozenset, ...]:
    rest = _LETTER.sub("", chunk).replace(",", " ").strip()
    if rest:
        raise CombError(f"line {lineno}: unexpected text {rest!r}")
    return tuple(frozenset(p.strip() for p in m.group(1).split(",") if p.strip()) for m in _LETTER.finditer(chunk))


def _render(letter: frozenset) -> str:
    return "{" + ",".join(sorted(letter)) + "}"


def dump_comb(c: Comb) -> str:
    if c.dimension != 2 or len(c.automata) != 1:
        raise CombError("only two-dimensional combs over one automaton have a file format")
    lines = ["# hlk comb", f"formula: {c.formula}", "slots: " + " ".join(c.automaton.slots),
             "spine: " + " ".join(_render(l) for l in c.spine)]
    lines += [f"tooth {i}: " + " ".join(_render(l) for l in t) for i, t in enumerate(c.teeth)]
    lines += [f"run {i}: " + " ".join(str(q) for q in r) for i, r in enumerate(c.runs)]
    return "\n".join(lines) + "\n"


def parse_comb(text: str) -> Comb:
    formula, slots, spine = None, None, None
    teeth: dict[int, tuple] = {}
    runs: dict[int, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise CombError(f"line {lineno}: expected 'key: value'")
        words = key.split()
        if words == ["formula"]:
            formula = value.strip()
        elif words == ["slots"]:
            slots = tuple(value.split())
        elif words == ["spine"]:
            spine = _letters(value, lineno)
        elif len(words) == 2 and words[0] in ("tooth", "run") and words[1].isdigit():
            if words[0] == "tooth":
                teeth[int(words[1])] = _letters(value, lineno)
            else:
                try:
                    runs[int(words[1])] = tuple(int(q) for q in value.split())
                except ValueError:
                    raise CombError(f"line {lineno}: run states must be integers") from None
        else:
            raise CombError(f"line {lineno}: unknown key {key.strip()!r}")
    if formula is None or slots is None or spine is None:
        raise CombError("comb file needs formula, slots and spine lines")
    a = pair_automaton(parse(formula, Logic.HYPERLTL), slots, "pair" if len(slots) == 2 else "triple")
    if sorted(teeth) != list(range(len(spine))):
        raise CombError(f"expected teeth 0..{len(spine) - 1}")
    tooth_list = tuple(teeth[i] for i in range(len(spine)))
    run_list = []
    for i, tooth in enumerate(tooth_list):
        if i in runs:
            run_list.append(runs[i])
            continue
        letters = [decode_letter(a, (spine[i + j], tooth[j])) for j in range(len(tooth))]
        found = find_run(a, letters)
        if found is None:
            raise CombError(f"tooth {i} has no run", i)
        run_list.append(found)
    c = Comb((a,), spine, tooth_list, tuple(run_list), formula=formula)
    bad = run_errors(c)
    if bad:
        raise CombError(f"run {bad[0][0]} is not a run at letter {bad[0][1]}", bad[0][0])
    return c


# ---------------------------------------------------------------------------
# Decision demonstration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Operand:
    var: str | None       # witness path; None when the operand talks about the spine only
    body: Node


def _quantifier_free(f: Node) -> bool:
    return not any(isinstance(n, QUANTIFIERS + (Knows,)) for n in walk(f))


def _path_vars(f: Node) -> set[str]:
    return {n.var for n in walk(f) if isinstance(n, Atom) and n.var is not None}


def _operand(f: Node, spine: str) -> _Operand | None:
    if isinstance(f, Exists) and _quantifier_free(f.body) and _path_vars(f.body) <= {spine, f.var}:
        return _Operand(f.var, f.body)
    if _quantifier_free(f) and _path_vars(f) <= {spine}:
        return _Operand(None, f)
    return None


def _quantifier_depth(f: Node) -> int:
    inner = max((_quantifier_depth(k) for k in children(f)), default=0)
    return inner + (1 if isinstance(f, Exists) else 0)


class _Search:
    """Spine lassos up to the depth cap, each checked for a pumpable or releasing comb."""

    def __init__(self, f: Exists, aps: tuple[str, ...], max_states: int, max_depth: int):
        self.f = f
        self.spine_var = f.var
        self.letters = [frozenset(c) for r in range(len(aps) + 1) for c in itertools.combinations(aps, r)]
        self.max_states = max_states
        self.max_depth = max_depth

    def automaton(self, op: _Operand) -> BuchiAutomaton:
        slot = op.var or f"{self.spine_var}_anon"
        return prune(pair_automaton(op.body, (self.spine_var, slot), "pair"))

    def decode(self, a: BuchiAutomaton, spine_letter, t: frozenset) -> frozenset:
        return decode_letter(a, _flat(spine_letter) + (t,))

    def spines(self):
        for total in range(2, self.max_depth + 2):
            for word in itertools.product(self.letters, repeat=total):
                for cut in range(1, total):
                    yield LassoTrace(word[:cut], word[cut:])

    # -- witnesses for a single tooth -------------------------------------

    def tooth_witness(self, a: BuchiAutomaton, spine: LassoTrace, i: int) -> LassoTrace | None:
        """A path from ``p[i]`` that pairs with ``p[i,∞]`` into an accepted word."""
        suffix = spine.suffix(i)
        first = _flat(spine.letter_at(i))[-1]
        g = nx.DiGraph()
        labels: dict = {}
        start = ("init", a.initial, 0)
        g.add_node(start)
        todo = [start]
        while todo:
            node = todo.pop()
            _, q, pos = node
            for t in [first] if node is start else self.letters:
                for q2 in a.step(q, self.decode(a, suffix.letter_at(pos), t)):
                    nxt = ("run", q2, suffix.successor(pos))
                    if nxt not in g:
                        todo.append(nxt)
                    g.add_edge(node, nxt)
                    labels.setdefault((node, nxt), t)
        for scc in sorted(nx.strongly_connected_components(g), key=lambda s: sorted(map(repr, s))):
            hits = sorted((n for n in scc if n[0] == "run" and n[1] in a.accepting), key=repr)
            if not hits or not (len(scc) > 1 or g.has_edge(hits[0], hits[0])):
                continue
            target = hits[0]
            stem = nx.shortest_path(g, start, target)
            sub = g.subgraph(scc)
            cycle = min(([target] + nx.shortest_path(sub, s, target) for s in sub.successors(target)), key=len)
            stem_letters = tuple(labels[e] for e in zip(stem, stem[1:]))
            cycle_letters = tuple(labels[e] for e in zip(cycle, cycle[1:]))
            return LassoTrace(stem_letters, cycle_letters)
        return None

    # -- Case 1: infinitely many witnesses ----------------------------------

    def segments(self, a: BuchiAutomaton, loop: tuple) -> dict:
        """Per state, runs over one spine period keyed by (end state, accepting seen).

        Values are (tooth letters, states after each letter).
        """
        out: dict = {}
        for q in a.states:
            paths = {(q, False): ((), ())}
            for s in loop:
                nxt: dict = {}
                for (p, acc), (word, run) in sorted(paths.items(), key=repr):
                    for t in self.letters:
                        for p2 in sorted(a.step(p, self.decode(a, s, t))):
                            nxt.setdefault((p2, acc or p2 in a.accepting), (word + (t,), run + (p2,)))
                paths = nxt
            out[q] = paths
        return out

    def prefix_teeth(self, a: BuchiAutomaton, spine: LassoTrace, upto: int, good: set) -> list | None:
        """For every ``i ≤ upto``, a tooth from ``p[i]`` to diagonal ``upto`` whose run ends in ``good``."""
        teeth = []
        for i in range(upto + 1):
            first = _flat(spine.letter_at(i))[-1]
            paths = {q: ((first,), (q,)) for q in sorted(a.step(a.initial, self.decode(a, spine.letter_at(i), first)))}
            for j in range(i + 1, upto + 1):
                nxt: dict = {}
                for p, (word, run) in sorted(paths.items()):
                    for t in self.letters:
                        for p2 in sorted(a.step(p, self.decode(a, spine.letter_at(j), t))):
                            nxt.setdefault(p2, (word + (t,), run + (p2,)))
                paths = nxt
            ends = sorted(q for q in paths if q in good)
            if not ends:
                return None
            teeth.append(paths[ends[0]])
        return teeth

    def case_one(self, a: BuchiAutomaton, spine: LassoTrace) -> PumpedComb | None:
        """Witnesses at every position: states that can repeat a period visiting acceptance, forever."""
        segs = self.segments(a, spine.loop)
        good = set(a.states)
        while True:
            keep = {q for q in good if any(acc and e in good for e, acc in segs[q])}
            if keep == good:
                break
            good = keep
        if not good:
            return None
        heads = self.prefix_teeth(a, spine, spine.span - 1, good)
        if heads is None:
            return None
        choice = {q: segs[q][min((e, acc) for e, acc in segs[q] if acc and e in good)] for q in good}
        return self.materialize(a, spine, heads, choice)

    def materialize(self, a: BuchiAutomaton, spine: LassoTrace, heads: list, choice: dict) -> PumpedComb | None:
        """Unroll the chosen segments into a finite comb, then find a pumpable window."""
        inf2, period = spine.span - 1, spine.period
        rounds = len(choice) + 2
        depth = inf2 + rounds * period
        teeth, runs = [], []
        for i in range(depth + 1):
            if i > inf2:
                teeth.append(teeth[i - period][:depth - i + 1])
                runs.append(runs[i - period][:depth - i + 1])
                continue
            word, run = heads[i]
            while len(word) < depth - i + 1:
                seg_word, seg_run = choice[run[-1]]
                word, run = word + seg_word, run + seg_run
            teeth.append(word[:depth - i + 1])
            runs.append(run[:depth - i + 1])
        c = Comb((a,), tuple(spine.unroll(depth + 1)), tuple(teeth), tuple(runs))
        for r in range(1, rounds):
            lo, hi = inf2 + (r - 1) * period, inf2 + r * period
            if frontier(c, hi) <= frontier(c, lo):
                designated = [i for i in range(lo + 1)
                              if any(c.runs[i][j] in a.accepting for j in range(lo - i + 1, hi - i + 1))]
                try:
                    return pump(c, lo, hi, designated)
                except CombError as e:
                    logger.debug(f"[comb] window {lo}..{hi} not pumpable: {e}")
        return None


def _spine_with_teeth(spine: LassoTrace, teeth: list[tuple[int, LassoTrace]]) -> KripkeTree:
    labels, edges = {}, []
    for j in range(spine.span):
        labels[f"s{j}"] = spine.letter_at(j)
        edges.append((f"s{j}", f"s{spine.successor(j)}"))
    for n, (i, tooth) in enumerate(teeth):
        for j in range(tooth.span):
            labels[f"w{n}_{j}"] = tooth.letter_at(j)
            edges.append((f"w{n}_{j}", f"w{n}_{tooth.successor(j)}"))
        edges.append((f"s{i}", f"w{n}_{tooth.successor(0)}"))
    k = KripkeTree.build(labels, edges, "s0")
    return KripkeTree(k.graph.subgraph(k.reachable("s0")).copy(), "s0")


def release_comb(spine: LassoTrace, holds: Sequence[LassoTrace], released: LassoTrace, goal: LassoTrace,
                 a_holds: BuchiAutomaton, a_zipped: BuchiAutomaton) -> Comb:
    """Comb for an obligation released at ``n = len(holds)``.

    Teeth before ``n`` witness the held operand, tooth ``n`` zips the held
    witness with the releasing one, and one dummy ``∅^ω`` tooth follows.
    """
    n = len(holds)
    depth = n + 1
    top = pair_automaton(TRUE, (a_holds.slots[0], "top"), "top")
    teeth, runs, owner = [], [], []
    for i, (a, word, idx) in enumerate(
            [(a_holds, (w,), 0) for w in holds] + [(a_zipped, (released, goal), 1),
                                                   (top, (LassoTrace((), (frozenset(),)),), 2)]):
        letters = zip_set([spine.suffix(i), *word])
        run = accepting_run(a, letters.map(lambda t: decode_letter(a, t)), depth - i + 1)
        if run is None:
            raise CombError(f"tooth {i} is not accepted by its automaton", i)
        unrolled = letters.unroll(depth - i + 1)
        teeth.append(tuple(t[1] if len(t) == 2 else t[1:] for t in unrolled))
        runs.append(run)
        owner.append(idx)
    return Comb((a_holds, a_zipped, top), tuple(spine.unroll(depth + 1)), tuple(teeth), tuple(runs), tuple(owner))


def _verified(f: Node, model: KripkeTree) -> bool:
    return eval_branching(f, model, path_bound=len(model.nodes) + 1) is Verdict.TRUE


# ---------------------------------------------------------------------------
# Nested G: three-dimensional combs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _NestedShape:
    mid: str
    inner: str
    body: Node


class _NestedSearch:
    """``∃p. G (∃q. G (∃r. ψ))``: a q-witness per spine position, each carrying a pumped comb of r-witnesses.

    The sub-comb at ``p[i]`` has the pair path ``(p[i,∞], q_i)`` as its spine.
    Spine positions past the span reuse the witness of their representative,
    so the outer level repeats with the spine's period.
    """

    def __init__(self, search: _Search, a: BuchiAutomaton, tooth_span: int):
        self.search = search
        self.a = a
        self.tooth_span = tooth_span

    def candidates(self, first: frozenset):
        for total in range(1, self.tooth_span + 1):
            for rest in itertools.product(self.search.letters, repeat=total - 1):
                word = (first,) + rest
                for cut in range(total):
                    yield LassoTrace(word[:cut], word[cut:])

    def teeth(self, spine: LassoTrace) -> list[tuple[LassoTrace, PumpedComb]] | None:
        out = []
        for i in range(spine.span):
            for q in self.candidates(spine.letter_at(i)):
                pumped = self.search.case_one(self.a, zip_traces(spine.suffix(i), q))
                if pumped is not None:
                    out.append((q, pumped))
                    break
            else:
                return None
        return out

    def comb(self, spine: LassoTrace, teeth: list, depth: int) -> Comb:
        subs = []
        for i in range(depth + 1):
            _, pumped = teeth[spine.position(i)]
            d = depth - i
            inner, runs = [], []
            for j in range(d + 1):
                run = accepting_run(self.a, pumped.pair(j), d - j + 1)
                if run is None:
                    raise CombError(f"pumped pair {j} of sub-comb {i} is not accepted", i)
                inner.append(tuple(pumped.tooth(j).unroll(d - j + 1)))
                runs.append(run)
            subs.append(Comb((self.a,), tuple(pumped.spine.unroll(d + 1)), tuple(inner), tuple(runs)))
        return Comb((self.a,), tuple(spine.unroll(depth + 1)), tuple(subs))

    @staticmethod
    def window(c: Comb, spine: LassoTrace) -> tuple[int, int] | None:
        """First cuttable pair of diagonals a whole number of spine periods apart, past the prefix."""
        for k in range(len(spine.prefix), c.depth + 1):
            for k2 in range(k + spine.period, c.depth + 1, spine.period):
                if cuttable(c, k, k2):
                    return k, k2
        return None


def nested_kripke(spine: LassoTrace, teeth: Sequence[tuple[LassoTrace, PumpedComb]]) -> KripkeTree:
    """Spine nodes ``s``, q-witness nodes ``t`` and r-witness nodes ``u``, reachable part only."""
    labels, edges = {}, []
    for j in range(spine.span):
        labels[f"s{j}"] = spine.letter_at(j)
        edges.append((f"s{j}", f"s{spine.successor(j)}"))
    hung: set = set()
    for i, (q, pumped) in enumerate(teeth):
        for m in range(q.span):
            labels[f"t{i}_{m}"] = q.letter_at(m)
            edges.append((f"t{i}_{m}", f"t{i}_{q.successor(m)}"))
        edges.append((f"s{i}", f"t{i}_{q.successor(0)}"))
        for j in range(pumped.inf2 + 1):
            at = f"s{i}" if j == 0 else f"t{i}_{q.position(j)}"
            r = pumped.tooth(j)
            if (at, r) in hung:
                continue
            hung.add((at, r))
            base = f"u{i}_{len(hung)}"
            for m in range(r.span):
                labels[f"{base}_{m}"] = r.letter_at(m)
                edges.append((f"{base}_{m}", f"{base}_{r.successor(m)}"))
            edges.append((at, f"{base}_{r.successor(0)}"))
    k = KripkeTree.build(labels, edges, "s0")
    return KripkeTree(k.graph.subgraph(k.reachable("s0")).copy(), "s0")


def _decide_nested(g: Exists, aps: tuple[str, ...], shape: _NestedShape, max_states: int,
                   max_depth: int) -> SatVerdict:
    settings = get_settings().comb
    search = _Search(g, aps, max_states, max_depth)
    a = prune(pair_automaton(shape.body, (g.var, shape.mid, shape.inner), "triple"))
    if a.size > max_states:
        return SatVerdict(Outcome.UNDECIDED, reason=f"witness automaton has {a.size} states, above max_states={max_states}")
    if is_empty(a) is None:
        return SatVerdict(Outcome.UNSAT, reason="the innermost witness automaton is empty")
    nested = _NestedSearch(search, a, settings.max_tooth_span)
    for p in search.spines():
        teeth = nested.teeth(p)
        if teeth is None:
            continue
        c = nested.comb(p, teeth, p.span - 1 + (a.size + 2) * p.period)
        window = nested.window(c, p)
        if window is None:
            logger.debug(f"[comb] no cuttable diagonals for spine {p}")
            continue
        try:
            certificate = cut(c, plan_cut(c, *window))
        except CombError as e:
            logger.debug(f"[comb] cut {window} rejected for spine {p}: {e}")
            continue
        model = nested_kripke(p, teeth)
        if _verified(g, model):
            logger.info(f"[comb] nested model found with spine {p}, cut {window[1]}->{window[0]}")
            return SatVerdict(Outcome.SAT, model, verified=True, certificate=certificate)
    return SatVerdict(Outcome.UNDECIDED, reason=f"no nested comb with spine length ≤ {max_depth + 1} "
                                                f"and witness span ≤ {nested.tooth_span}")


@log_call
def demo_decide_exists(f: Node, *, max_states: int | None = None, max_depth: int | None = None) -> SatVerdict:
    """Bounded satisfiability for ∃* HyperCTL* via comb-shaped models.

    Complete only relative to the caps: spines are lassos of at most
    ``max_depth + 1`` letters and witness automata have at most
    ``max_states`` states. UNSAT answers are exact.
    """
    settings = get_settings().comb
    max_states = max_states or settings.max_states
    max_depth = max_depth or settings.max_depth
    g = to_nnf(bind_state_atoms(f))
    aps = tuple(sorted({n.name for n in walk(g) if isinstance(n, Atom)}))
    if not isinstance(g, Exists):
        return SatVerdict(Outcome.UNDECIDED, reason="the demonstration needs a formula of the form ∃π. φ")
    spine, body = g.var, g.body

    if _quantifier_free(body) and _path_vars(body) <= {spine}:
        w = is_empty(ltl_to_nba(_drop_index(body)))
        if w is None:
            return SatVerdict(Outcome.UNSAT, reason="the spine formula has an empty language")
        return _result(f, KripkeTree.linear(w.as_lasso().map(lambda l: frozenset(l) & set(aps))))

    shape = _release_or_until(body, spine)
    if shape is None:
        nested = _nested_globally(body, spine)
        if nested is not None:
            return _decide_nested(g, aps, nested, max_states, max_depth)
        d = _quantifier_depth(g)
        why = f"quantifier depth {d} exceeds 3" if d > 3 else "formula is not of a supported comb shape"
        return SatVerdict(Outcome.UNDECIDED, reason=f"{why}; the demonstration covers release, until and nested G")

    kind, left, right = shape
    search = _Search(g, aps, max_states, max_depth)
    a_left, a_right = search.automaton(left), search.automaton(right)
    big = max(a_left.size, a_right.size)
    if big > max_states:
        return SatVerdict(Outcome.UNDECIDED, reason=f"witness automaton has {big} states, above max_states={max_states}")
    # release needs the right operand at time 0, until needs it eventually
    if is_empty(a_right) is None:
        return SatVerdict(Outcome.UNSAT, reason="the witness automaton of the right operand is empty")
    try:
        logger.debug(f"[comb] depth bound for {a_right.size} states: {bound_b(a_right.size)}")
    except BoundOverflow as e:
        logger.debug(f"[comb] {e}")

    for p in search.spines():
        model, certificate = None, None
        if kind == "release":
            pumped = search.case_one(a_right, p)
            if pumped is not None:
                model = pumped.kripke(with_teeth=right.var is not None)
        if model is None and not (kind == "release" and left.body == FALSE):
            model, certificate = _finitely_many(search, kind, left, right, a_left, a_right, p)
        if model is not None and _verified(g, model):
            logger.info(f"[comb] model found with spine {p}")
            return SatVerdict(Outcome.SAT, model, verified=True, certificate=certificate)
    return SatVerdict(Outcome.UNDECIDED, reason=f"no comb-shaped model with spine length ≤ {max_depth + 1}")


def _finitely_many(search: _Search, kind: str, left: _Operand, right: _Operand, a_left: BuchiAutomaton,
                   a_right: BuchiAutomaton, p: LassoTrace) -> tuple[KripkeTree | None, Comb | None]:
    """The obligation is released, or the goal reached, at some ``n`` on the spine."""
    holds_op, goal_op = (right, left) if kind == "release" else (left, right)
    a_holds, a_goal = (a_right, a_left) if kind == "release" else (a_left, a_right)
    for n in range(p.span):
        upto = n + 1 if kind == "release" else n
        held = [search.tooth_witness(a_holds, p, i) for i in range(upto)]
        if any(w is None for w in held):
            continue
        goal = search.tooth_witness(a_goal, p, n)
        if goal is None:
            continue
        teeth = [(i, w) for i, w in enumerate(held) if holds_op.var is not None]
        if goal_op.var is not None:
            teeth.append((n, goal))
        certificate = None
        if kind == "release" and holds_op.var is not None and goal_op.var is not None:
            slots = (search.spine_var, holds_op.var, goal_op.var)
            zipped = pair_automaton(And(holds_op.body, goal_op.body), slots, "triple")
            try:
                certificate = release_comb(p, held[:n], held[n], goal, a_holds, zipped)
            except CombError as e:
                logger.warning(f"[comb] release comb at n={n} rejected: {e}")
                continue
        return _spine_with_teeth(p, teeth), certificate
    return None, None


def _drop_index(f: Node) -> Node:
    if isinstance(f, Atom):
        return Atom(f.name)
    return map_children(f, _drop_index)


def _release_or_until(body: Node, spine: str):
    if isinstance(body, Globally):
        parts = ("release", FALSE, body.arg)
    elif isinstance(body, Release):
        parts = ("release", body.left, body.right)
    elif isinstance(body, Eventually):
        parts = ("until", TRUE, body.arg)
    elif isinstance(body, Until):
        parts = ("until", body.left, body.right)
    else:
        return None
    left, right = _operand(parts[1], spine), _operand(parts[2], spine)
    if left is None or right is None:
        return None
    return parts[0], left, right


def _nested_globally(body: Node, spine: str) -> _NestedShape | None:
    if not (isinstance(body, Globally) and isinstance(body.arg, Exists)):
        return None
    mid = body.arg
    inner = mid.body
    if not (isinstance(inner, Globally) and isinstance(inner.arg, Exists)):
        return None
    psi = inner.arg.body
    if not (_quantifier_free(psi) and _path_vars(psi) <= {spine, mid.var, inner.arg.var}):
        return None
    return _NestedShape(mid.var, inner.arg.var, psi)


def _result(f: Node, model: KripkeTree) -> SatVerdict:
    verified = _verified(f, model)
    reason = "" if verified else "the bounded evaluator could not confirm the model"
    return SatVerdict(Outcome.SAT, model, verified=verified, reason=reason)
