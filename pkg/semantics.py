"""Executable semantics for every logic over finite models.

Linear-time formulas are decided exactly (automata over the zipped trace set,
cross-checked by a naive evaluator). Branching-time formulas are evaluated
over a bounded basis of lasso paths and answer ``true``, ``false`` or
``undecided``; a definite answer never changes when the bound grows.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from automata import CapExceeded, formula_automaton
from config import get_settings
from logging_utils import log_call
from models import KripkeTree, LassoTrace, ModelError, PathAssignment, TraceSet, enumerate_lasso_paths, zip_set
from syntax import (
    FALSE, TRUE, And, Atom, Const, Eq, Eventually, Exists, ExistsFO, ExistsProp, ExistsSO, Forall, ForallFO,
    ForallProp, ForallSO, FormulaError, Globally, Iff, Implies, In, Knows, Less, Level, Min, Next, Node, Not, Or,
    PROP_QUANTIFIERS, Pred, QUANTIFIERS, Release, Succ, TRACE_QUANTIFIERS, UNARY_TEMPORAL, Until, Var,
    bind_state_atoms, children, conj, disj, free_variables, is_prenex, map_children, substitute_trace, walk,
)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    TRUE = "true"
    FALSE = "false"
    UNDECIDED = "undecided"

    @classmethod
    def of(cls, value: bool) -> Verdict:
        return cls.TRUE if value else cls.FALSE

    @property
    def definite(self) -> bool:
        return self is not Verdict.UNDECIDED

    def negate(self) -> Verdict:
        return {Verdict.TRUE: Verdict.FALSE, Verdict.FALSE: Verdict.TRUE}.get(self, Verdict.UNDECIDED)

    @staticmethod
    def all(items: Iterable[Verdict]) -> Verdict:
        result = Verdict.TRUE
        for v in items:
            if v is Verdict.FALSE:
                return Verdict.FALSE
            if v is Verdict.UNDECIDED:
                result = Verdict.UNDECIDED
        return result

    @staticmethod
    def any(items: Iterable[Verdict]) -> Verdict:
        result = Verdict.FALSE
        for v in items:
            if v is Verdict.TRUE:
                return Verdict.TRUE
            if v is Verdict.UNDECIDED:
                result = Verdict.UNDECIDED
        return result


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PositionSet:
    """Ultimately periodic set of positions of one trace.

    ``prefix`` lists the members below ``start``; from ``start`` on, position
    ``n`` is a member iff ``(n - start) % period`` is in ``loop``.
    """

    prefix: frozenset = frozenset()
    loop: frozenset = frozenset()
    start: int = 0
    period: int = 1

    def __post_init__(self):
        if self.period < 1:
            raise ModelError("period must be positive")
        if any(n >= self.start or n < 0 for n in self.prefix):
            raise ModelError("prefix members must lie below start")
        if any(n >= self.period or n < 0 for n in self.loop):
            raise ModelError("loop offsets must lie below the period")

    @classmethod
    def finite(cls, members: Iterable[int]) -> PositionSet:
        members = frozenset(members)
        return cls(members, frozenset(), max(members, default=-1) + 1, 1)

    @classmethod
    def everything(cls) -> PositionSet:
        return cls(frozenset(), frozenset({0}), 0, 1)

    def __contains__(self, n: int) -> bool:
        if n < self.start:
            return n in self.prefix
        return (n - self.start) % self.period in self.loop

    def as_trace(self, key: str) -> LassoTrace:
        mark = lambda yes: frozenset({key}) if yes else frozenset()
        return LassoTrace(tuple(mark(n in self) for n in range(self.start)),
                          tuple(mark(o in self.loop) for o in range(self.period)))


@dataclass(frozen=True)
class PathSet:
    """Second-order value holding exactly the tree nodes of one full path."""

    path: LassoTrace

    def contains_node(self, node: tuple) -> bool:
        return tuple(self.path.unroll(len(node))) == node


@dataclass(frozen=True)
class NodeSet:
    """Graph-periodic second-order value: every tree node ending in one of ``nodes``."""

    nodes: frozenset

    def contains_node(self, node: tuple) -> bool:
        return node[-1] in self.nodes


@dataclass
class Valuation:
    """Explicit values for free first- and second-order variables.

    Linear time: ``fo[x] = (trace index, position)`` and
    ``so[X] = {trace index: PositionSet}``. Branching time: ``fo[x]`` is a
    tree node (tuple of graph nodes from the root) and ``so[X]`` a
    :class:`PathSet` or :class:`NodeSet`.
    """

    fo: dict = field(default_factory=dict)
    so: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvalContext:
    model: KripkeTree
    assignment: PathAssignment = PathAssignment()
    time: int = 0

    def at(self, time: int) -> EvalContext:
        return EvalContext(self.model, self.assignment, time)

    def bind(self, var: str, path: LassoTrace) -> EvalContext:
        return EvalContext(self.model, self.assignment.bind(var, path), self.time)

    def relabel(self, model: KripkeTree) -> EvalContext:
        return EvalContext(model, self.assignment, self.time)


# ---------------------------------------------------------------------------
# Direct LTL evaluation on lasso words
# ---------------------------------------------------------------------------

def keyed_word(traces: Sequence[LassoTrace], names: Sequence[str]) -> LassoTrace:
    """Zip traces into one word over keys ``a@name``."""
    if not traces:
        return LassoTrace((), (frozenset(),))
    z = zip_set(list(traces))
    return z.map(lambda tup: frozenset(f"{a}@{n}" for n, letter in zip(names, tup) for a in letter))


def merge_words(words: Sequence[LassoTrace]) -> LassoTrace:
    """Letterwise union of key-set words."""
    if not words:
        return LassoTrace((), (frozenset(),))
    return zip_set(list(words)).map(lambda tup: frozenset().union(*tup))


def eval_ltl(f: Node, word: LassoTrace, pos: int = 0) -> bool:
    """Quantifier-free formula on a word whose letters are key sets."""
    n = word.span
    succ = [word.successor(p) for p in range(n)]
    everywhere = frozenset(range(n))
    memo: dict[Node, frozenset] = {}

    def sat(g: Node) -> frozenset:
        if g in memo:
            return memo[g]
        if isinstance(g, Const):
            out = everywhere if g.value else frozenset()
        elif isinstance(g, Atom):
            key = g.name if g.var is None else f"{g.name}@{g.var}"
            out = frozenset(p for p in range(n) if key in word.letter_at(p))
        elif isinstance(g, Not):
            out = everywhere - sat(g.arg)
        elif isinstance(g, And):
            out = sat(g.left) & sat(g.right)
        elif isinstance(g, Or):
            out = sat(g.left) | sat(g.right)
        elif isinstance(g, Implies):
            out = (everywhere - sat(g.left)) | sat(g.right)
        elif isinstance(g, Iff):
            l, r = sat(g.left), sat(g.right)
            out = (l & r) | (everywhere - l - r)
        elif isinstance(g, Next):
            inner = sat(g.arg)
            out = frozenset(p for p in range(n) if succ[p] in inner)
        elif isinstance(g, (Until, Eventually)):
            left = sat(g.left) if isinstance(g, Until) else everywhere
            right = sat(g.right) if isinstance(g, Until) else sat(g.arg)
            out = right
            while True:
                grown = out | frozenset(p for p in left if succ[p] in out)
                if grown == out:
                    break
                out = grown
        elif isinstance(g, (Release, Globally)):
            left = sat(g.left) if isinstance(g, Release) else frozenset()
            right = sat(g.right) if isinstance(g, Release) else sat(g.arg)
            out = right
            while True:
                shrunk = frozenset(p for p in out if p in left or succ[p] in out)
                if shrunk == out:
                    break
                out = shrunk
        else:
            raise FormulaError(f"{type(g).__name__} cannot be evaluated on a single word")
        memo[g] = out
        return out

    return word.position(pos) in sat(f)


# ---------------------------------------------------------------------------
# Linear time: automata-based and naive
# ---------------------------------------------------------------------------

def _has_trace_quantifiers(f: Node) -> bool:
    return any(isinstance(n, TRACE_QUANTIFIERS) for n in walk(f))


def _ground(f: Node, count: int) -> Node:
    """Replace trace quantifiers by finite conjunctions/disjunctions over trace indices."""
    if isinstance(f, TRACE_QUANTIFIERS):
        parts = [_ground(substitute_trace(f.body, f.var, str(i)), count) for i in range(count)]
        return disj(parts) if isinstance(f, Exists) else conj(parts)
    return map_children(f, lambda k: _ground(k, count))


def _check_linear_input(f: Node) -> None:
    fv = free_variables(f)
    if fv.traces:
        raise FormulaError(f"free trace variables {sorted(fv.traces)}")
    if _has_trace_quantifiers(f) and not is_prenex(f):
        raise FormulaError("linear-time evaluation needs a prenex formula")


@log_call
def eval_linear(f: Node, traces: TraceSet, *, cap: int | None = None) -> bool:
    """Decide ``T ⊨ f`` for LTL, QPTL, HyperLTL and HyperQPTL.

    Trace quantifiers are grounded over T; what remains has propositional
    quantifiers under Boolean connectives and is decided by an automaton over
    the zipped trace set. ``CapExceeded`` propagates.
    """
    _check_linear_input(f)
    if not _has_trace_quantifiers(f):
        # plain LTL/QPTL: every trace must satisfy the formula
        lang = formula_automaton(f, cap)
        return all(lang.contains(t) for t in traces)
    grounded = _ground(f, len(traces))
    lang = formula_automaton(grounded, cap)
    return lang.contains(keyed_word(traces.traces, [str(i) for i in range(len(traces))]))


def linear_witness(f: Node, traces: TraceSet, *, cap: int | None = None) -> dict[str, LassoTrace] | None:
    """Traces chosen for the leading ∃ trace quantifiers, or None when there is no such choice."""
    _check_linear_input(f)
    lead, body = [], f
    while isinstance(body, Exists):
        lead.append(body.var)
        body = body.body
    if not lead or not len(traces):
        return None
    word = keyed_word(traces.traces, [str(i) for i in range(len(traces))])
    for choice in itertools.product(range(len(traces)), repeat=len(lead)):
        g = body
        for var, i in zip(lead, choice):
            g = substitute_trace(g, var, str(i))
        if formula_automaton(_ground(g, len(traces)), cap).contains(word):
            return {var: traces.traces[i] for var, i in zip(lead, choice)}
    return None


def lasso_labelings(bound: int) -> list[LassoTrace]:
    """All single-proposition lassos with ``|u|+|v| ≤ bound``, deduplicated."""
    found: dict[LassoTrace, None] = {}
    for total in range(1, bound + 1):
        for bits in itertools.product((False, True), repeat=total):
            for cut in range(total):
                found.setdefault(LassoTrace(bits[:cut], bits[cut:]).normalize(), None)
    return list(found)


@log_call
def eval_linear_naive(f: Node, traces: TraceSet, *, labeling_bound: int | None = None) -> bool:
    """Direct evaluator: explicit trace enumeration and q-labelings of bounded lasso size."""
    _check_linear_input(f)
    bound = labeling_bound or get_settings().semantics.labeling_bound
    labelings = lasso_labelings(bound)

    def word(env_t: dict, env_q: dict, plain: LassoTrace | None) -> LassoTrace:
        parts = [t.map(lambda l, v=v: frozenset(f"{a}@{v}" for a in l)) for v, t in env_t.items()]
        parts += [lab.map(lambda b, q=q: frozenset({q}) if b else frozenset()) for q, lab in env_q.items()]
        if plain is not None:
            parts.append(plain.map(frozenset))
        return merge_words(parts)

    def quantified(g: Node) -> bool:
        return any(isinstance(n, QUANTIFIERS) for n in walk(g))

    def holds(g: Node, env_t: dict, env_q: dict, plain: LassoTrace | None) -> bool:
        if not quantified(g):
            return eval_ltl(g, word(env_t, env_q, plain))
        if isinstance(g, Exists):
            return any(holds(g.body, {**env_t, g.var: t}, env_q, plain) for t in traces)
        if isinstance(g, Forall):
            return all(holds(g.body, {**env_t, g.var: t}, env_q, plain) for t in traces)
        if isinstance(g, ExistsProp):
            return any(holds(g.body, env_t, {**env_q, g.var: lab}, plain) for lab in labelings)
        if isinstance(g, ForallProp):
            return all(holds(g.body, env_t, {**env_q, g.var: lab}, plain) for lab in labelings)
        if isinstance(g, Not):
            return not holds(g.arg, env_t, env_q, plain)
        if isinstance(g, And):
            return holds(g.left, env_t, env_q, plain) and holds(g.right, env_t, env_q, plain)
        if isinstance(g, Or):
            return holds(g.left, env_t, env_q, plain) or holds(g.right, env_t, env_q, plain)
        if isinstance(g, Implies):
            return not holds(g.left, env_t, env_q, plain) or holds(g.right, env_t, env_q, plain)
        if isinstance(g, Iff):
            return holds(g.left, env_t, env_q, plain) == holds(g.right, env_t, env_q, plain)
        raise FormulaError(f"quantifier below {type(g).__name__} is not supported")

    if not _has_trace_quantifiers(f):
        return all(holds(f, {}, {}, t) for t in traces)
    return holds(f, {}, {}, None)


# ---------------------------------------------------------------------------
# Relational linear time (FO[<,E], S1S[E])
# ---------------------------------------------------------------------------

def once(marker: Node) -> Node:
    """``(¬m) U (m ∧ X G ¬m)``: the marker holds exactly once."""
    return Until(Not(marker), And(marker, Next(Globally(Not(marker)))))


def _nexts(f: Node, k: int) -> Node:
    for _ in range(k):
        f = Next(f)
    return f


@dataclass(frozen=True)
class _Term:
    trace: int
    marker: Node | None   # None: the trace's minimal position
    offset: int


class _RelationalCompiler:
    """Compile a relational formula into a QPTL-style formula over the zipped trace set."""

    def __init__(self, count: int, valuation: Valuation):
        self.count = count
        self.valuation = valuation
        self.fresh = itertools.count()

    def marker(self, var: str) -> Atom:
        return Atom(f"#{var}.{next(self.fresh)}")

    def term(self, t: Node, env: dict) -> _Term:
        if isinstance(t, Var):
            if t.name not in env:
                raise FormulaError(f"unbound first-order variable {t.name!r}")
            trace, marker = env[t.name]
            return _Term(trace, marker, 0)
        if isinstance(t, Min):
            if t.var not in env:
                raise FormulaError(f"unbound first-order variable {t.var!r}")
            return _Term(env[t.var][0], None, 0)
        if isinstance(t, Succ):
            inner = self.term(t.arg, env)
            return _Term(inner.trace, inner.marker, inner.offset + 1)
        raise FormulaError(f"{type(t).__name__} is not a term")

    @staticmethod
    def at(t: _Term, f: Node) -> Node:
        if t.marker is None:
            return _nexts(f, t.offset)
        return Eventually(And(t.marker, _nexts(f, t.offset)))

    @staticmethod
    def time_relation(a: _Term, b: _Term, strict_less: bool) -> Node:
        """``pos(b) - pos(a) == d`` (equality) or ``>= d`` (order), d from the offsets."""
        d = a.offset - b.offset + (1 if strict_less else 0)
        ma, mb = a.marker, b.marker
        if ma is None and mb is None:
            return TRUE if (0 >= d if strict_less else d == 0) else FALSE
        if not strict_less:
            if ma is not None and mb is not None:
                return Eventually(And(ma, _nexts(mb, d))) if d >= 0 else Eventually(And(mb, _nexts(ma, -d)))
            if ma is None:
                return _nexts(mb, d) if d >= 0 else FALSE
            return _nexts(ma, -d) if d <= 0 else FALSE
        if ma is not None and mb is not None:
            if d >= 0:
                return Eventually(And(ma, _nexts(Eventually(mb), d)))
            return Not(Eventually(And(mb, _nexts(Eventually(ma), -d + 1))))
        if ma is None:
            return TRUE if d <= 0 else _nexts(Eventually(mb), d)
        if -d < 0:
            return FALSE
        return Not(_nexts(Eventually(ma), -d + 1))

    def so_key(self, name: str, trace: int, env: dict) -> Atom:
        if name in env:
            return env[name][trace]
        if name in self.valuation.so:
            return Atom(name, str(trace))
        if name.startswith("X_") and len(name) > 2:
            return Atom(name[2:], str(trace))
        raise FormulaError(f"free second-order variable {name!r} has no value")

    def compile(self, f: Node, env: dict) -> Node:
        if isinstance(f, Const):
            return f
        if isinstance(f, Not):
            return Not(self.compile(f.arg, env))
        if isinstance(f, (And, Or, Implies, Iff)):
            return type(f)(self.compile(f.left, env), self.compile(f.right, env))
        if isinstance(f, Pred):
            t = self.term(f.term, env)
            return self.at(t, Atom(f.name, str(t.trace)))
        if isinstance(f, In):
            t = self.term(f.term, env)
            return self.at(t, self.so_key(f.setvar, t.trace, env))
        if isinstance(f, (Eq, Less, Level)):
            a, b = self.term(f.left, env), self.term(f.right, env)
            if not isinstance(f, Level) and a.trace != b.trace:
                return FALSE
            return self.time_relation(a, b, isinstance(f, Less))
        if isinstance(f, (ExistsFO, ForallFO)):
            parts = []
            for i in range(self.count):
                m = self.marker(f.var)
                body = self.compile(f.body, {**env, f.var: (i, m)})
                if isinstance(f, ExistsFO):
                    parts.append(ExistsProp(m.name, And(once(m), body)))
                else:
                    parts.append(ForallProp(m.name, Implies(once(m), body)))
            return disj(parts) if isinstance(f, ExistsFO) else conj(parts)
        if isinstance(f, (ExistsSO, ForallSO)):
            tag = next(self.fresh)
            tracks = {i: Atom(f"{f.var}.{tag}@{i}") for i in range(self.count)}
            out = self.compile(f.body, {**env, f.var: tracks})
            quant = ExistsProp if isinstance(f, ExistsSO) else ForallProp
            for i in reversed(range(self.count)):
                out = quant(tracks[i].name, out)
            return out
        raise FormulaError(f"{type(f).__name__} is not part of a relational formula")


def _valuation_word(traces: TraceSet, valuation: Valuation) -> LassoTrace:
    words = [keyed_word(traces.traces, [str(i) for i in range(len(traces))])]
    for x, (i, pos) in valuation.fo.items():
        words.append(LassoTrace(tuple(frozenset({f"#{x}"} if n == pos else ()) for n in range(pos + 1)),
                                (frozenset(),)))
    for name, per_trace in valuation.so.items():
        for i, positions in per_trace.items():
            words.append(positions.as_trace(f"{name}@{i}"))
    return merge_words(words)


@log_call
def eval_relational_linear(f: Node, traces: TraceSet, *, valuation: Valuation | None = None,
                           cap: int | None = None) -> bool:
    """Decide an FO[<,E] or S1S[E] formula on T via automata over the zipped traces."""
    valuation = valuation or Valuation()
    fv = free_variables(f)
    missing = [x for x in fv.fo if x not in valuation.fo]
    if missing:
        raise FormulaError(f"free first-order variables {sorted(missing)} have no value")
    for x, (i, pos) in valuation.fo.items():
        if not 0 <= i < len(traces) or pos < 0:
            raise ModelError(f"first-order value {x} = {(i, pos)} is outside the trace set")
    compiler = _RelationalCompiler(len(traces), valuation)
    env = {x: (i, Atom(f"#{x}")) for x, (i, _) in valuation.fo.items()}
    compiled = compiler.compile(f, env)
    lang = formula_automaton(compiled, cap)
    return lang.contains(_valuation_word(traces, valuation))


@log_call
def eval_relational_bounded(f: Node, traces: TraceSet, *, horizon: int | None = None,
                            valuation: Valuation | None = None, so_cap: int | None = None) -> bool:
    """Brute-force evaluation with positions restricted to ``[0, horizon)``.

    Exact on formulas whose quantified positions stay below the horizon; the
    bounded check for hand-built witnesses.
    """
    settings = get_settings().semantics
    h = horizon or settings.horizon
    so_cap = so_cap or settings.so_cap
    valuation = valuation or Valuation()
    positions = [(i, n) for i in range(len(traces)) for n in range(h)]

    def term(t: Node, fo: dict) -> tuple[int, int]:
        if isinstance(t, Var):
            if t.name not in fo:
                raise FormulaError(f"unbound first-order variable {t.name!r}")
            return fo[t.name]
        if isinstance(t, Min):
            return fo[t.var][0], 0
        if isinstance(t, Succ):
            i, n = term(t.arg, fo)
            return i, n + 1
        raise FormulaError(f"{type(t).__name__} is not a term")

    def member(pos: tuple[int, int], name: str, so: dict) -> bool:
        if name in so:
            value = so[name]
            if isinstance(value, frozenset):
                return pos in value
            return pos[0] in value and pos[1] in value[pos[0]]
        if name.startswith("X_"):
            return name[2:] in traces.traces[pos[0]].letter_at(pos[1])
        raise FormulaError(f"free second-order variable {name!r} has no value")

    def holds(g: Node, fo: dict, so: dict) -> bool:
        if isinstance(g, Const):
            return g.value
        if isinstance(g, Not):
            return not holds(g.arg, fo, so)
        if isinstance(g, And):
            return holds(g.left, fo, so) and holds(g.right, fo, so)
        if isinstance(g, Or):
            return holds(g.left, fo, so) or holds(g.right, fo, so)
        if isinstance(g, Implies):
            return not holds(g.left, fo, so) or holds(g.right, fo, so)
        if isinstance(g, Iff):
            return holds(g.left, fo, so) == holds(g.right, fo, so)
        if isinstance(g, Pred):
            i, n = term(g.term, fo)
            return g.name in traces.traces[i].letter_at(n)
        if isinstance(g, In):
            return member(term(g.term, fo), g.setvar, so)
        if isinstance(g, Eq):
            return term(g.left, fo) == term(g.right, fo)
        if isinstance(g, Less):
            (i, n), (j, m) = term(g.left, fo), term(g.right, fo)
            return i == j and n < m
        if isinstance(g, Level):
            return term(g.left, fo)[1] == term(g.right, fo)[1]
        if isinstance(g, (ExistsFO, ForallFO)):
            results = (holds(g.body, {**fo, g.var: p}, so) for p in positions)
            return any(results) if isinstance(g, ExistsFO) else all(results)
        if isinstance(g, (ExistsSO, ForallSO)):
            if len(positions) > so_cap:
                raise CapExceeded(f"second-order domain over {len(positions)} positions", so_cap)
            subsets = (frozenset(c) for r in range(len(positions) + 1)
                       for c in itertools.combinations(positions, r))
            results = (holds(g.body, fo, {**so, g.var: s}) for s in subsets)
            return any(results) if isinstance(g, ExistsSO) else all(results)
        raise FormulaError(f"{type(g).__name__} is not part of a relational formula")

    return holds(f, dict(valuation.fo), dict(valuation.so))


# ---------------------------------------------------------------------------
# Branching time: bounded three-valued evaluation
# ---------------------------------------------------------------------------

class _PathBasis:
    """Lasso paths and exhaustiveness facts of one graph structure."""

    def __init__(self, model: KripkeTree, bound: int):
        self.model = model
        self.bound = bound
        self._paths: dict[tuple, list[LassoTrace]] = {}
        self._exhaustive: dict[tuple, bool] = {}

    def paths(self, node, bound: int | None = None) -> list[LassoTrace]:
        bound = bound or self.bound
        key = (node, bound)
        if key not in self._paths:
            self._paths[key] = enumerate_lasso_paths(self.model, node, bound)
        return self._paths[key]

    def exhaustive(self, node, bound: int | None = None) -> bool:
        """True when the lasso basis from ``node`` holds every path there is."""
        bound = bound or self.bound
        key = (node, bound)
        if key not in self._exhaustive:
            self._exhaustive[key] = (self.model.is_deterministic_from(node)
                                     and len(self.model.reachable(node)) <= bound)
        return self._exhaustive[key]


def _check_branching_input(f: Node) -> None:
    fv = free_variables(f)
    if fv.traces:
        raise FormulaError(f"free path variables {sorted(fv.traces)}")

    def go(n: Node, inside_path: bool) -> None:
        if isinstance(n, UNARY_TEMPORAL + (Until, Release)) and not inside_path:
            raise FormulaError("temporal operator outside every path quantifier")
        inside = inside_path or isinstance(n, TRACE_QUANTIFIERS)
        for k in children(n):
            go(k, inside)

    go(f, False)


class _BranchingEvaluator:
    def __init__(self, basis: _PathBasis):
        self.basis = basis

    def window(self, ctx: EvalContext) -> range:
        paths = [p for _, p in ctx.assignment.bindings]
        if not paths:
            raise FormulaError("temporal operator outside every path quantifier")
        span = max(len(p.prefix) for p in paths) + math.lcm(*(p.period for p in paths))
        return range(ctx.time, ctx.time + span)

    def eval(self, f: Node, ctx: EvalContext) -> Verdict:
        if isinstance(f, Const):
            return Verdict.of(f.value)
        if isinstance(f, Atom):
            if f.var is None:
                eps = ctx.assignment.epsilon
                node = ctx.model.root if eps is None else eps.letter_at(ctx.time)
            else:
                if f.var not in ctx.assignment:
                    raise FormulaError(f"unbound path variable {f.var!r}")
                node = ctx.assignment[f.var].letter_at(ctx.time)
            return Verdict.of(f.name in ctx.model.label(node))
        if isinstance(f, Not):
            return self.eval(f.arg, ctx).negate()
        if isinstance(f, And):
            return Verdict.all(self.eval(k, ctx) for k in (f.left, f.right))
        if isinstance(f, Or):
            return Verdict.any(self.eval(k, ctx) for k in (f.left, f.right))
        if isinstance(f, Implies):
            return Verdict.any(v for v in (self.eval(f.left, ctx).negate(), self.eval(f.right, ctx)))
        if isinstance(f, Iff):
            l, r = self.eval(f.left, ctx), self.eval(f.right, ctx)
            if not (l.definite and r.definite):
                return Verdict.UNDECIDED
            return Verdict.of(l is r)
        if isinstance(f, Next):
            return self.eval(f.arg, ctx.at(ctx.time + 1))
        if isinstance(f, Eventually):
            return Verdict.any(self.eval(f.arg, ctx.at(j)) for j in self.window(ctx))
        if isinstance(f, Globally):
            return Verdict.all(self.eval(f.arg, ctx.at(j)) for j in self.window(ctx))
        if isinstance(f, Until):
            return self.until(f.left, f.right, ctx)
        if isinstance(f, Release):
            return self.until(Not(f.left), Not(f.right), ctx).negate()
        if isinstance(f, TRACE_QUANTIFIERS):
            return self.path_quantifier(f, ctx)
        if isinstance(f, Knows):
            return self.knows(f, ctx)
        if isinstance(f, PROP_QUANTIFIERS):
            return self.prop_quantifier(f, ctx)
        raise FormulaError(f"{type(f).__name__} is not part of a branching-time formula")

    def until(self, left: Node, right: Node, ctx: EvalContext) -> Verdict:
        result, prefix_ok = Verdict.FALSE, Verdict.TRUE
        for j in self.window(ctx):
            here = ctx.at(j)
            result = Verdict.any((result, Verdict.all((prefix_ok, self.eval(right, here)))))
            if result is Verdict.TRUE:
                return result
            prefix_ok = Verdict.all((prefix_ok, self.eval(left, here)))
            if prefix_ok is Verdict.FALSE:
                break
        return result

    def candidates(self, ctx: EvalContext) -> tuple[list[LassoTrace], bool]:
        eps = ctx.assignment.epsilon
        if eps is None:
            start, prefix = ctx.model.root, ()
        else:
            start, prefix = eps.letter_at(ctx.time), tuple(eps.unroll(ctx.time))
        paths = [LassoTrace(prefix + p.prefix, p.loop) for p in self.basis.paths(start)]
        return paths, self.basis.exhaustive(start)

    def path_quantifier(self, f: Node, ctx: EvalContext) -> Verdict:
        paths, exhaustive = self.candidates(ctx)
        results = (self.eval(f.body, ctx.bind(f.var, p)) for p in paths)
        return self._quantify(results, isinstance(f, Exists), exhaustive)

    def knows(self, f: Knows, ctx: EvalContext) -> Verdict:
        if f.var not in ctx.assignment:
            raise FormulaError(f"unbound path variable {f.var!r}")
        ref = ctx.assignment[f.var]
        model, t = ctx.model, ctx.time
        bound = self.basis.bound + t

        def observed(p: LassoTrace) -> list[frozenset]:
            return [model.label(n) & f.aps for n in p.unroll(t + 1)]

        target = observed(ref)
        paths = [ref] + [p for p in self.basis.paths(model.root, bound) if p != ref and observed(p) == target]
        results = (self.eval(f.body, ctx.bind(f.var, p)) for p in paths)
        return self._quantify(results, False, self.basis.exhaustive(model.root, bound))

    def prop_quantifier(self, f: Node, ctx: EvalContext) -> Verdict:
        model = ctx.model
        nodes = model.nodes
        if len(nodes) > 12:
            raise CapExceeded(f"relabelings of {len(nodes)} nodes", 12)

        def relabeled(chosen: tuple) -> KripkeTree:
            return model.relabel({n: (model.label(n) - {f.var}) | ({f.var} if n in chosen else set())
                                  for n in nodes})

        subsets = (c for r in range(len(nodes) + 1) for c in itertools.combinations(nodes, r))
        results = (self.eval(f.body, ctx.relabel(relabeled(c))) for c in subsets)
        # graph-periodic labelings only: never exhaustive
        return self._quantify(results, isinstance(f, ExistsProp), False)

    @staticmethod
    def _quantify(results: Iterator[Verdict], existential: bool, exhaustive: bool) -> Verdict:
        seen_undecided = False
        for v in results:
            if v is (Verdict.TRUE if existential else Verdict.FALSE):
                return v
            if v is Verdict.UNDECIDED:
                seen_undecided = True
        if exhaustive and not seen_undecided:
            return Verdict.FALSE if existential else Verdict.TRUE
        return Verdict.UNDECIDED


@log_call
def eval_branching(f: Node, model: KripkeTree, *, path_bound: int | None = None) -> Verdict:
    """Evaluate CTL*, HyperCTL*, HyperQCTL* or HyperKCTL* on the tree unrolled from ``model``."""
    bound = path_bound or get_settings().semantics.path_bound
    if bound < 1:
        raise ValueError("path_bound must be at least 1")
    g = bind_state_atoms(f)
    _check_branching_input(g)
    verdict = _BranchingEvaluator(_PathBasis(model, bound)).eval(g, EvalContext(model))
    logger.debug("[semantics] eval_branching at bound %d: %s", bound, verdict.value)
    return verdict


# ---------------------------------------------------------------------------
# MPL[E] / MSO[E] on trees
# ---------------------------------------------------------------------------

def is_full_path(model: KripkeTree, value) -> bool:
    """Does a second-order value denote exactly one full path from the root?"""
    if isinstance(value, PathSet):
        nodes = value.path.prefix + value.path.loop
        if not nodes or nodes[0] != model.root:
            return False
        return all(value.path.letter_at(j + 1) in model.successors(value.path.letter_at(j))
                   for j in range(value.path.span))
    if isinstance(value, NodeSet):
        s = value.nodes
        if model.root not in s:
            return False
        if any(len([v for v in model.successors(u) if v in s]) != 1 for u in s):
            return False
        reach = model.reachable(model.root)
        return not any(v in s and u not in s for u in reach for v in model.successors(u))
    return False


def second_order_domain(model: KripkeTree, logic_is_mple: bool, basis: _PathBasis) -> list:
    paths = [PathSet(p) for p in basis.paths(model.root)]
    if logic_is_mple:
        return paths
    nodes = model.nodes
    sets = [NodeSet(frozenset(c)) for r in range(len(nodes) + 1) for c in itertools.combinations(nodes, r)]
    return sets + paths


class _TreeEvaluator:
    def __init__(self, model: KripkeTree, depth_bound: int, basis: _PathBasis, mple: bool):
        self.model = model
        self.depth_bound = depth_bound
        self.basis = basis
        self.mple = mple
        self._levels: list[list[tuple]] = [[(model.root,)]]

    def level(self, d: int) -> list[tuple]:
        while len(self._levels) <= d:
            self._levels.append([n + (s,) for n in self._levels[-1] for s in self.model.successors(n[-1])])
        return self._levels[d]

    def all_nodes(self) -> list[tuple]:
        return [n for d in range(self.depth_bound + 1) for n in self.level(d)]

    def domain(self, var: str, body: Node, universal: bool, fo: dict) -> tuple[list[tuple], bool]:
        """Quantifier domain; exhaustive when a guard ties ``var`` to a bound node."""
        guards: list[Node] = []
        if universal:
            if isinstance(body, Implies):
                guards = _conjuncts(body.left)
            elif isinstance(body, Or):
                guards = [d.arg for d in _disjuncts(body) if isinstance(d, Not)]
        else:
            guards = _conjuncts(body)
        for g in guards:
            found = self.guard_domain(var, g, fo)
            if found is not None:
                return found, True
        return self.all_nodes(), False

    def guard_domain(self, var: str, g: Node, fo: dict) -> list[tuple] | None:
        def other(a: Node, b: Node) -> str | None:
            if isinstance(a, Var) and a.name == var and isinstance(b, Var) and b.name in fo:
                return b.name
            return None

        if isinstance(g, Or) and isinstance(g.left, Less) and isinstance(g.right, Eq):
            y = other(g.left.left, g.left.right)
            if y is not None:
                node = fo[y]
                return [node[:j] for j in range(1, len(node) + 1)]
        if isinstance(g, Less):
            y = other(g.left, g.right)
            if y is not None:
                node = fo[y]
                return [node[:j] for j in range(1, len(node))]
        if isinstance(g, Eq):
            y = other(g.left, g.right) or other(g.right, g.left)
            if y is not None:
                return [fo[y]]
        if isinstance(g, Level):
            y = other(g.left, g.right) or other(g.right, g.left)
            if y is not None:
                return self.level(len(fo[y]) - 1)
        return None

    def holds(self, g: Node, fo: dict, so: dict) -> Verdict:
        if isinstance(g, Const):
            return Verdict.of(g.value)
        if isinstance(g, Not):
            return self.holds(g.arg, fo, so).negate()
        if isinstance(g, And):
            return Verdict.all(self.holds(k, fo, so) for k in (g.left, g.right))
        if isinstance(g, Or):
            return Verdict.any(self.holds(k, fo, so) for k in (g.left, g.right))
        if isinstance(g, Implies):
            return Verdict.any(v for v in (self.holds(g.left, fo, so).negate(), self.holds(g.right, fo, so)))
        if isinstance(g, Iff):
            l, r = self.holds(g.left, fo, so), self.holds(g.right, fo, so)
            return Verdict.of(l is r) if l.definite and r.definite else Verdict.UNDECIDED
        if isinstance(g, REL_TREE_ATOMS):
            return Verdict.of(self.atom(g, fo, so))
        if isinstance(g, (ExistsFO, ForallFO)):
            universal = isinstance(g, ForallFO)
            nodes, exhaustive = self.domain(g.var, g.body, universal, fo)
            results = (self.holds(g.body, {**fo, g.var: n}, so) for n in nodes)
            return _BranchingEvaluator._quantify(results, not universal, exhaustive)
        if isinstance(g, (ExistsSO, ForallSO)):
            values = second_order_domain(self.model, self.mple, self.basis)
            exhaustive = self.mple and self.basis.exhaustive(self.model.root)
            results = (self.holds(g.body, fo, {**so, g.var: v}) for v in values)
            return _BranchingEvaluator._quantify(results, isinstance(g, ExistsSO), exhaustive)
        raise FormulaError(f"{type(g).__name__} is not part of a tree formula")

    def atom(self, g: Node, fo: dict, so: dict) -> bool:
        def node(t: Node) -> tuple:
            if not isinstance(t, Var):
                raise FormulaError("tree formulas use plain first-order variables only")
            if t.name not in fo:
                raise FormulaError(f"unbound first-order variable {t.name!r}")
            return fo[t.name]

        if isinstance(g, Pred):
            return g.name in self.model.label(node(g.term)[-1])
        if isinstance(g, In):
            if g.setvar not in so:
                raise FormulaError(f"unbound second-order variable {g.setvar!r}")
            return so[g.setvar].contains_node(node(g.term))
        a, b = node(g.left), node(g.right)
        if isinstance(g, Eq):
            return a == b
        if isinstance(g, Less):
            return len(a) < len(b) and b[:len(a)] == a
        return len(a) == len(b)


REL_TREE_ATOMS = (Pred, In, Eq, Less, Level)


def _conjuncts(f: Node) -> list[Node]:
    if isinstance(f, And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def _disjuncts(f: Node) -> list[Node]:
    if isinstance(f, Or):
        return _disjuncts(f.left) + _disjuncts(f.right)
    return [f]


@log_call
def eval_relational_branching(f: Node, model: KripkeTree, *, mple: bool, depth_bound: int | None = None,
                              path_bound: int | None = None, valuation: Valuation | None = None) -> Verdict:
    """Evaluate an MPL[E] (``mple=True``) or MSO[E] formula on the tree unrolled from ``model``.

    First-order variables range over tree nodes up to ``depth_bound``;
    second-order variables over lasso paths (and, for MSO[E], graph-periodic
    node sets).
    """
    settings = get_settings().semantics
    depth = depth_bound if depth_bound is not None else settings.depth_bound
    valuation = valuation or Valuation()
    fv = free_variables(f)
    if fv.fo - set(valuation.fo) or fv.so - set(valuation.so):
        raise FormulaError(f"free variables without value: {sorted((fv.fo | fv.so) - set(valuation.fo) - set(valuation.so))}")
    if mple:
        for name, value in valuation.so.items():
            if not is_full_path(model, value):
                raise ModelError(f"{name} is not a full path, as MPL[E] requires")
    basis = _PathBasis(model, path_bound or settings.path_bound)
    return _TreeEvaluator(model, depth, basis, mple).holds(f, dict(valuation.fo), dict(valuation.so))
