"""Expressiveness translations between the logics, and the counter-machine encoding.

Every translation is a syntax-directed rewrite over the AST. Bound names in
the output follow the subscript conventions of the source variables:
``pi_x``/``q_x`` for a first-order ``x``, ``X_q`` for a proposition ``q``,
``X_p`` for a path ``p`` and ``q_X`` for a set variable ``X``.
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from logging_utils import log_call
from models import KripkeTree, LassoTrace, ModelError, TraceSet
from semantics import once
from syntax import (
    And, Atom, Const, Eq, Eventually, Exists, ExistsFO, ExistsProp, ExistsSO, Forall, ForallFO,
    ForallProp, ForallSO, Globally, Iff, Implies, In, Knows, Less, Level, Min, Next, Node, Not, Or,
    Pred, Release, SO_QUANTIFIERS, Succ, Until, Var, bind_state_atoms, conj, disj, free_variables, fresh_name,
    is_prenex, names_in, prefix_and_matrix, to_nnf, walk,
)

logger = logging.getLogger(__name__)

SE_REPAIR_NOTE = (
    "trace atoms are read as level-matched membership on the trace's own positions; "
    "propositions as membership of some position on the current level"
)


class TranslationError(ValueError):
    """Input outside the domain of a translation."""


def _le(a: Node, b: Node) -> Node:
    return Or(Less(a, b), Eq(a, b))


# ---------------------------------------------------------------------------
# FO[<,E] -> HyperQPTL
# ---------------------------------------------------------------------------

@log_call
def hq(f: Node, aps: Iterable[str] | None = None) -> Node:
    """Translate a prenex FO[<,E] formula into HyperQPTL.

    Each first-order ``x`` becomes a trace ``pi_x`` and a proposition ``q_x``
    marking the position exactly once; ``aps`` lists the propositions whose
    agreement makes two positions lie on the same trace. Formulas using
    ``=`` or ``<`` need ``aps``: without the full set two distinct traces
    would count as one.
    """
    if not is_prenex(f):
        raise TranslationError("hq needs a formula in prenex normal form")
    for n in walk(f):
        if isinstance(n, (Min, Succ, In) + SO_QUANTIFIERS):
            raise TranslationError(f"{type(n).__name__} is not part of FO[<,E]")
    if free_variables(f).fo:
        raise TranslationError(f"free first-order variables {sorted(free_variables(f).fo)}")
    if aps is None and any(isinstance(n, (Eq, Less)) for n in walk(f)):
        raise TranslationError("hq needs the model's propositions (aps) to translate = and <")
    props = sorted(set(aps or ()) | {n.name for n in walk(f) if isinstance(n, Pred)})
    taken = names_in(f) | set(props)
    names: dict[str, tuple[str, str]] = {}

    def bind(x: str) -> tuple[str, str]:
        names[x] = (fresh_name(f"pi_{x}", taken), fresh_name(f"q_{x}", taken))
        return names[x]

    def same_trace(x: str, y: str) -> Node:
        return Globally(conj(Iff(Atom(a, names[x][0]), Atom(a, names[y][0])) for a in props))

    def var(t: Node) -> str:
        if not isinstance(t, Var):
            raise TranslationError(f"{type(t).__name__} terms are not part of FO[<,E]")
        return t.name

    def go(g: Node) -> Node:
        if isinstance(g, Const):
            return g
        if isinstance(g, Not):
            return Not(go(g.arg))
        if isinstance(g, (And, Or, Implies, Iff)):
            return type(g)(go(g.left), go(g.right))
        if isinstance(g, Pred):
            pi, q = names[var(g.term)]
            return Eventually(And(Atom(q), Atom(g.name, pi)))
        if isinstance(g, (Less, Eq, Level)):
            x, y = var(g.left), var(g.right)
            qx, qy = Atom(names[x][1]), Atom(names[y][1])
            if isinstance(g, Less):
                return And(Eventually(And(qx, Next(Eventually(qy)))), same_trace(x, y))
            if isinstance(g, Eq):
                return And(Eventually(And(qx, qy)), same_trace(x, y))
            return Eventually(And(qx, qy))
        raise TranslationError(f"{type(g).__name__} is not part of FO[<,E]")

    prefix, matrix = prefix_and_matrix(f)
    bound = [bind(q.var) for q in prefix]
    # guards nest inside-out so the quantifier block stays prenex
    out = go(matrix)
    for q, (pi, qx) in zip(reversed(prefix), reversed(bound)):
        out = And(once(Atom(qx)), out) if isinstance(q, ExistsFO) else Implies(once(Atom(qx)), out)
    for q, (pi, qx) in zip(reversed(prefix), reversed(bound)):
        out = Exists(pi, ExistsProp(qx, out)) if isinstance(q, ExistsFO) else Forall(pi, ForallProp(qx, out))
    return out


# ---------------------------------------------------------------------------
# HyperQPTL -> S1S[E]
# ---------------------------------------------------------------------------

@log_call
def se(f: Node) -> Node:
    """Translate a closed prenex HyperQPTL formula into S1S[E].

    Free second-order variables of the result are exactly ``X_a`` for the
    propositions ``a`` the formula mentions.
    """
    fv = free_variables(f)
    if fv.traces or fv.props:
        raise TranslationError("se needs a closed formula")
    if not is_prenex(f):
        raise TranslationError("se needs a formula in prenex normal form")
    aps = {n.name for n in walk(f) if isinstance(n, Atom) and n.var is not None}
    taken = names_in(f) | {f"X_{a}" for a in aps}
    traces: dict[str, str] = {}
    props: dict[str, str] = {}

    def fresh(base: str) -> str:
        return fresh_name(base, taken)

    def same_trace(u: Node, v: Node) -> Node:
        return Or(Or(Less(u, v), Eq(u, v)), Less(v, u))

    def go(g: Node, y: Node) -> Node:
        if isinstance(g, Const):
            return g
        if isinstance(g, Atom):
            x = Var(fresh("x"))
            if g.var is None:
                if g.name not in props:
                    raise TranslationError(f"unbound proposition {g.name!r}")
                return ExistsFO(x.name, And(Level(y, x), In(x, props[g.name])))
            return ExistsFO(x.name, And(And(same_trace(Var(traces[g.var]), x), Level(y, x)), In(x, f"X_{g.name}")))
        if isinstance(g, Not):
            return Not(go(g.arg, y))
        if isinstance(g, (And, Or, Implies, Iff)):
            return type(g)(go(g.left, y), go(g.right, y))
        if isinstance(g, Next):
            return go(g.arg, Succ(y))
        if isinstance(g, Eventually):
            yj = Var(fresh("y"))
            return ExistsFO(yj.name, And(_le(y, yj), go(g.arg, yj)))
        if isinstance(g, Globally):
            yj = Var(fresh("y"))
            return ForallFO(yj.name, Implies(_le(y, yj), go(g.arg, yj)))
        if isinstance(g, Until):
            yj, yk = Var(fresh("y")), Var(fresh("y"))
            between = And(_le(y, yk), Less(yk, yj))
            return ExistsFO(yj.name, And(And(_le(y, yj), go(g.right, yj)),
                                         ForallFO(yk.name, Implies(between, go(g.left, yk)))))
        if isinstance(g, Release):
            yj, yk = Var(fresh("y")), Var(fresh("y"))
            between = And(_le(y, yk), Less(yk, yj))
            return ForallFO(yj.name, Implies(_le(y, yj), Or(go(g.right, yj),
                                                              ExistsFO(yk.name, And(between, go(g.left, yk))))))
        if isinstance(g, (Exists, Forall)):
            traces[g.var] = fresh(f"x_{g.var}")
            quant = ExistsFO if isinstance(g, Exists) else ForallFO
            return quant(traces[g.var], go(g.body, y))
        if isinstance(g, (ExistsProp, ForallProp)):
            props[g.var] = fresh(f"X_{g.var}")
            quant = ExistsSO if isinstance(g, ExistsProp) else ForallSO
            return quant(props[g.var], go(g.body, y))
        raise TranslationError(f"{type(g).__name__} is not part of HyperQPTL")

    y0, yb = Var(fresh("y0")), Var(fresh("y"))
    return ExistsFO(y0.name, And(Not(ExistsFO(yb.name, Less(yb, y0))), go(f, y0)))


# ---------------------------------------------------------------------------
# HyperCTL* / HyperKCTL* -> MPL[E], HyperQCTL* -> MSO[E]
# ---------------------------------------------------------------------------

class _TreeTranslator:
    """Shared clause tables of the two tree translations; ``with_paths`` adds path(X) for MSO[E]."""

    def __init__(self, f: Node, with_paths: bool):
        self.with_paths = with_paths
        self.taken = names_in(f)

    def fresh(self, base: str) -> str:
        return fresh_name(base, self.taken)

    def succ(self, x: Node, x2: Node) -> Node:
        mid = Var(self.fresh("x"))
        return And(Less(x, x2), Not(ExistsFO(mid.name, And(Less(x, mid), Less(mid, x2)))))

    def path(self, name: str) -> Node:
        """X is exactly one full path: the root, closed upwards, one child per member."""
        x, x1, x2, r = (Var(self.fresh("x")) for _ in range(4))
        is_root = lambda v: Not(ExistsFO(r.name, Less(r, v)))
        has_root = ExistsFO(x.name, And(In(x, name), is_root(x)))
        one_child = ForallFO(x.name, Implies(In(x, name), ExistsFO(x1.name, And(
            And(In(x1, name), self.succ(x, x1)),
            Not(ExistsFO(x2.name, And(And(In(x2, name), self.succ(x, x2)), Not(Eq(x2, x1)))))))))
        parent = ForallFO(x.name, Implies(In(x, name), Or(is_root(x), ExistsFO(
            x1.name, And(In(x1, name), self.succ(x1, x))))))
        return And(And(has_root, one_child), parent)

    def prefix(self, new: str, eps: str, y: Node) -> Node:
        """``new`` and ``eps`` agree on every level up to ``y``."""
        y1, x = Var(self.fresh("y")), Var(self.fresh("x"))
        return ForallFO(y1.name, Implies(_le(y1, y), ForallFO(x.name, Implies(
            Level(x, y1), Iff(In(x, new), In(x, eps))))))

    def eq_prefix(self, ref: str, other: str, y: Node, aps: frozenset) -> Node:
        """Both paths carry the same ``aps``-observations on every level up to ``y``."""
        x, x1, y1 = Var(self.fresh("x")), Var(self.fresh("x")), Var(self.fresh("y"))
        same_level = ExistsFO(y1.name, And(And(_le(y1, y), Level(x, y1)), Level(x1, y1)))
        agree = conj(Iff(Pred(a, x), Pred(a, x1)) for a in sorted(aps))
        return ForallFO(x.name, ForallFO(x1.name, Implies(And(And(In(x, ref), In(x1, other)), same_level), agree)))

    def go(self, g: Node, y: Node, env: dict, eps: str | None) -> Node:
        if isinstance(g, Const):
            return g
        if isinstance(g, Atom):
            if g.var is None:
                return In(y, env[g.name]) if g.name in env else Pred(g.name, y)
            if g.var not in env:
                raise TranslationError(f"unbound path variable {g.var!r}")
            x = Var(self.fresh("x"))
            label = In(x, env[g.name]) if g.name in env else Pred(g.name, x)
            return ExistsFO(x.name, And(And(In(x, env[g.var]), Level(x, y)), label))
        if isinstance(g, Not):
            return Not(self.go(g.arg, y, env, eps))
        if isinstance(g, (And, Or)):
            return type(g)(self.go(g.left, y, env, eps), self.go(g.right, y, env, eps))
        if isinstance(g, Next):
            yj, yk = Var(self.fresh("y")), Var(self.fresh("y"))
            child = And(Less(y, yj), Not(ExistsFO(yk.name, And(Less(y, yk), Less(yk, yj)))))
            return ExistsFO(yj.name, And(child, self.go(g.arg, yj, env, eps)))
        if isinstance(g, Eventually):
            yj = Var(self.fresh("y"))
            return ExistsFO(yj.name, And(_le(y, yj), self.go(g.arg, yj, env, eps)))
        if isinstance(g, Globally):
            yj = Var(self.fresh("y"))
            return ForallFO(yj.name, Implies(_le(y, yj), self.go(g.arg, yj, env, eps)))
        if isinstance(g, Until):
            yj, yk = Var(self.fresh("y")), Var(self.fresh("y"))
            between = And(_le(y, yk), Less(yk, yj))
            return ExistsFO(yj.name, And(And(_le(y, yj), self.go(g.right, yj, env, eps)),
                                         ForallFO(yk.name, Implies(between, self.go(g.left, yk, env, eps)))))
        if isinstance(g, Release):
            yj, yk = Var(self.fresh("y")), Var(self.fresh("y"))
            between = And(_le(y, yk), Less(yk, yj))
            return ForallFO(yj.name, Implies(_le(y, yj), Or(
                self.go(g.right, yj, env, eps),
                ExistsFO(yk.name, And(between, self.go(g.left, yk, env, eps))))))
        if isinstance(g, (Exists, Forall)):
            name = self.fresh(f"X_{g.var}")
            guards = []
            if self.with_paths:
                guards.append(self.path(name))
            if eps is not None:
                guards.append(self.prefix(name, eps, y))
            body = self.go(g.body, y, {**env, g.var: name}, name)
            if isinstance(g, Exists):
                return ExistsSO(name, And(conj(guards), body) if guards else body)
            return ForallSO(name, Implies(conj(guards), body) if guards else body)
        if isinstance(g, Knows):
            if g.var not in env:
                raise TranslationError(f"unbound path variable {g.var!r}")
            name = self.fresh(f"X_{g.var}")
            guard = self.eq_prefix(env[g.var], name, y, g.aps)
            return ForallSO(name, Implies(guard, self.go(g.body, y, {**env, g.var: name}, name)))
        if isinstance(g, (ExistsProp, ForallProp)):
            if not self.with_paths:
                raise TranslationError("propositional quantifiers need the MSO[E] target")
            name = self.fresh(f"X_{g.var}")
            quant = ExistsSO if isinstance(g, ExistsProp) else ForallSO
            return quant(name, self.go(g.body, y, {**env, g.var: name}, eps))
        raise TranslationError(f"{type(g).__name__} cannot be translated to a tree formula")

    def translate(self, f: Node) -> Node:
        y0, yb = Var(self.fresh("y0")), Var(self.fresh("y"))
        return ExistsFO(y0.name, And(Not(ExistsFO(yb.name, Less(yb, y0))), self.go(f, y0, {}, None)))


@log_call
def mpe(f: Node) -> Node:
    """HyperCTL* or HyperKCTL* (CTL* after binding state atoms) into MPL[E]."""
    g = to_nnf(bind_state_atoms(f))
    if any(isinstance(n, (ExistsProp, ForallProp)) for n in walk(g)):
        raise TranslationError("propositional quantifiers are not part of HyperKCTL*")
    return _TreeTranslator(g, with_paths=False).translate(g)


@log_call
def mse(f: Node) -> Node:
    """HyperQCTL* into MSO[E]; path variables are constrained to full paths."""
    g = to_nnf(bind_state_atoms(f))
    if any(isinstance(n, Knows) for n in walk(g)):
        raise TranslationError("the knowledge operator is not part of HyperQCTL*")
    return _TreeTranslator(g, with_paths=True).translate(g)


# ---------------------------------------------------------------------------
# MSO[E] -> HyperQCTL*
# ---------------------------------------------------------------------------

@log_call
def hqc(f: Node) -> Node:
    """Translate a prenex MSO[E] formula into HyperQCTL*."""
    if not is_prenex(f):
        raise TranslationError("hqc needs a formula in prenex normal form")
    fv = free_variables(f)
    if fv.fo or fv.so:
        raise TranslationError("hqc needs a closed formula")
    taken = names_in(f)
    fo: dict[str, tuple[str, str]] = {}
    so: dict[str, str] = {}

    def marker(x: str) -> Atom:
        pi, q = fo[x]
        return Atom(q, pi)

    def var(t: Node) -> str:
        if not isinstance(t, Var):
            raise TranslationError(f"{type(t).__name__} terms are not part of MSO[E]")
        return t.name

    def go(g: Node) -> Node:
        if isinstance(g, Const):
            return g
        if isinstance(g, Not):
            return Not(go(g.arg))
        if isinstance(g, (And, Or, Implies, Iff)):
            return type(g)(go(g.left), go(g.right))
        if isinstance(g, Pred):
            x = var(g.term)
            return Eventually(And(marker(x), Atom(g.name, fo[x][0])))
        if isinstance(g, In):
            x = var(g.term)
            return Eventually(And(marker(x), Atom(so[g.setvar], fo[x][0])))
        if isinstance(g, Level):
            return Eventually(And(marker(var(g.left)), marker(var(g.right))))
        if isinstance(g, (Less, Eq)):
            x, y = var(g.left), var(g.right)
            q = fresh_name("q", taken)
            px, py = fo[x][0], fo[y][0]
            if isinstance(g, Less):
                # px and py agree up to x's node: every labeling sees the same value there
                order = Eventually(And(marker(x), Next(Eventually(marker(y)))))
                agree = ForallProp(q, Eventually(And(marker(x), Iff(Atom(q, px), Atom(q, py)))))
            else:
                order = Eventually(And(marker(x), marker(y)))
                agree = ForallProp(q, Globally(Iff(Atom(q, px), Atom(q, py))))
            return And(order, agree)
        if isinstance(g, (ExistsFO, ForallFO)):
            fo[g.var] = (fresh_name(f"pi_{g.var}", taken), fresh_name(f"q_{g.var}", taken))
            pi, q = fo[g.var]
            if isinstance(g, ExistsFO):
                return Exists(pi, ExistsProp(q, And(once(marker(g.var)), go(g.body))))
            return Forall(pi, ForallProp(q, Implies(once(marker(g.var)), go(g.body))))
        if isinstance(g, (ExistsSO, ForallSO)):
            so[g.var] = fresh_name(f"q_{g.var}", taken)
            quant = ExistsProp if isinstance(g, ExistsSO) else ForallProp
            return quant(so[g.var], go(g.body))
        raise TranslationError(f"{type(g).__name__} is not part of MSO[E]")

    return go(f)


# ---------------------------------------------------------------------------
# Two-counter machines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Inc:
    counter: int
    goto: int


@dataclass(frozen=True)
class Test:
    """``if c = 0 goto zero else (c -= 1; goto other)``."""

    counter: int
    zero: int
    other: int


@dataclass(frozen=True)
class Halt:
    pass


@dataclass(frozen=True)
class TwoCounterMachine:
    instructions: tuple

    def __post_init__(self):
        k = len(self.instructions)
        if not k or not isinstance(self.instructions[-1], Halt):
            raise ModelError("the last instruction must be halt")
        for j, ins in enumerate(self.instructions, 1):
            if isinstance(ins, Halt) and j != k:
                raise ModelError(f"instruction {j}: halt is only allowed last")
            targets = (ins.goto,) if isinstance(ins, Inc) else (ins.zero, ins.other) if isinstance(ins, Test) else ()
            if any(not 1 <= t <= k for t in targets):
                raise ModelError(f"instruction {j}: goto target outside 1..{k}")
            if isinstance(ins, (Inc, Test)) and ins.counter not in (1, 2):
                raise ModelError(f"instruction {j}: counter must be c1 or c2")

    @property
    def halt_index(self) -> int:
        return len(self.instructions)


Configuration = tuple[int, int, int]   # (instruction, c1, c2)

_INC = re.compile(r"inc\s+c([12])\s+goto\s+(\d+)")
_TEST = re.compile(r"test\s+c([12])\s+zero\s+(\d+)\s+else\s+(\d+)")


def parse_machine(text: str) -> TwoCounterMachine:
    instructions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _INC.fullmatch(line):
            instructions.append(Inc(int(m.group(1)), int(m.group(2))))
        elif m := _TEST.fullmatch(line):
            instructions.append(Test(int(m.group(1)), int(m.group(2)), int(m.group(3))))
        elif line == "halt":
            instructions.append(Halt())
        else:
            raise ModelError(f"line {lineno}: expected 'inc cN goto L', 'test cN zero L else L' or 'halt'")
    return TwoCounterMachine(tuple(instructions))


def dump_machine(m: TwoCounterMachine) -> str:
    lines = []
    for ins in m.instructions:
        if isinstance(ins, Inc):
            lines.append(f"inc c{ins.counter} goto {ins.goto}")
        elif isinstance(ins, Test):
            lines.append(f"test c{ins.counter} zero {ins.zero} else {ins.other}")
        else:
            lines.append("halt")
    return "\n".join(lines) + "\n"


def step(m: TwoCounterMachine, s: Configuration) -> Configuration | None:
    i, c1, c2 = s
    ins = m.instructions[i - 1]
    counters = [c1, c2]
    if isinstance(ins, Halt):
        return None
    if isinstance(ins, Inc):
        counters[ins.counter - 1] += 1
        return (ins.goto, *counters)
    if counters[ins.counter - 1] == 0:
        return (ins.zero, *counters)
    counters[ins.counter - 1] -= 1
    return (ins.other, *counters)


def run_machine(m: TwoCounterMachine, s0: Configuration, max_steps: int = 1000) -> list[Configuration]:
    """Configurations from ``s0`` until halt or ``max_steps``."""
    run = [s0]
    while len(run) <= max_steps:
        nxt = step(m, run[-1])
        if nxt is None:
            break
        run.append(nxt)
    return run


def configuration_trace(s: Configuration) -> LassoTrace:
    """c1 exactly at position c1, c2 at c2, l at the instruction index, then ∅^ω."""
    i, c1, c2 = s
    if i < 1 or c1 < 0 or c2 < 0:
        raise ModelError(f"not a configuration: {s}")
    length = max(i, c1, c2) + 1
    letters = tuple(frozenset(name for name, at in (("c1", c1), ("c2", c2), ("l", i)) if at == n)
                    for n in range(length))
    return LassoTrace(letters, (frozenset(),))


def configuration_traceset(configs: Iterable[Configuration]) -> TraceSet:
    return TraceSet(("c1", "c2", "l"), tuple(configuration_trace(s) for s in configs))


def decode_configuration(t: LassoTrace) -> Configuration | None:
    """Inverse of :func:`configuration_trace`; None when ``t`` encodes no configuration."""
    seen: dict[str, list[int]] = {"c1": [], "c2": [], "l": []}
    for n in range(t.span):
        for a in t.letter_at(n):
            if a not in seen:
                return None
            seen[a].append(n)
    if any(t.letter_at(n) for n in range(len(t.prefix), t.span)):
        return None
    if any(len(v) != 1 for v in seen.values()) or seen["l"][0] == 0:
        return None
    return seen["l"][0], seen["c1"][0], seen["c2"][0]


def configuration_kripke() -> KripkeTree:
    """Regular generator: after a dummy root, every encoding is a path.

    Paths that stop adding propositions forever encode nothing; filter them
    with :func:`decode_configuration`.
    """
    props = ("c1", "c2", "l")
    letters = [frozenset(c) for r in range(4) for c in itertools.combinations(props, r)]
    g = nx.DiGraph()
    g.add_node("root", label=frozenset())
    name = lambda seen, letter: "n_" + ("".join(sorted(seen)) or "0") + "_" + ("".join(sorted(letter)) or "0")
    frontier = []
    for letter in letters:
        if "l" not in letter:
            node = (frozenset(), letter)
            g.add_node(name(*node), label=letter)
            g.add_edge("root", name(*node))
            frontier.append(node)
    done = set()
    while frontier:
        seen, letter = frontier.pop()
        if (seen, letter) in done:
            continue
        done.add((seen, letter))
        now = seen | letter
        for nxt in letters:
            if nxt & now:
                continue
            node = (now, nxt)
            if name(*node) not in g:
                g.add_node(name(*node), label=nxt)
                frontier.append(node)
            g.add_edge(name(seen, letter), name(*node))
    return KripkeTree(g, "root")


def _nth_succ(t: Node, k: int) -> Node:
    for _ in range(k):
        t = Succ(t)
    return t


def _at(x: Node, k: int, setvar: str) -> Node:
    return In(_nth_succ(x, k), setvar)


def _counter_relation(c: int, x: Var, x2: Var, offset: tuple[int, int], taken: set[str]) -> Node:
    """Counter c of the trace starting at ``x`` relates to the one at ``x2`` by level offsets."""
    u, v = Var(fresh_name("u", taken)), Var(fresh_name("v", taken))
    setvar = f"X_c{c}"
    located = conj([In(u, setvar), Eq(Min(u.name), x), In(v, setvar), Eq(Min(v.name), x2)])
    return ExistsFO(u.name, ExistsFO(v.name, And(located, Level(_nth_succ(u, offset[0]), _nth_succ(v, offset[1])))))


def succ_formula(m: TwoCounterMachine, x: str, x2: str) -> Node:
    """Configuration encoded from trace minimum ``x2`` is the successor of the one at ``x``."""
    taken = {x, x2}
    vx, vx2 = Var(x), Var(x2)
    same = lambda c: _counter_relation(c, vx, vx2, (0, 0), taken)
    inc = lambda c: _counter_relation(c, vx, vx2, (1, 0), taken)
    dec = lambda c: _counter_relation(c, vx, vx2, (0, 1), taken)
    cases = []
    for j, ins in enumerate(m.instructions, 1):
        here = _at(vx, j, "X_l")
        if isinstance(ins, Inc):
            other = 3 - ins.counter
            cases.append(conj([here, _at(vx2, ins.goto, "X_l"), inc(ins.counter), same(other)]))
        elif isinstance(ins, Test):
            c, other = ins.counter, 3 - ins.counter
            zero = In(vx, f"X_c{c}")
            cases.append(And(here, Or(conj([zero, _at(vx2, ins.zero, "X_l"), same(c), same(other)]),
                                      conj([Not(zero), _at(vx2, ins.other, "X_l"), dec(c), same(other)]))))
    return disj(cases)


def halting_formula(m: TwoCounterMachine, s0: Configuration, setvar: str = "X") -> Node:
    """``halting(X)``: X is a finite, predecessor-closed set of whole encodings reaching halt."""
    i0, m0, n0 = s0
    X = setvar
    x, y, b, z = Var("x"), Var("y"), Var("b"), Var("z")
    whole = ForallFO("x", Implies(In(x, X), And(In(Min("x"), X), In(Succ(x), X))))
    marked = disj([In(x, "X_c1"), In(x, "X_c2"), In(x, "X_l")])
    bounded = ExistsFO("b", ForallFO("x", Implies(And(In(x, X), marked),
                                                    ExistsFO("z", And(Level(z, b), Less(x, z))))))
    is_start = lambda v: Eq(v, Min(v.name))
    init = conj([_at(x, m0, "X_c1"), _at(x, n0, "X_c2"), _at(x, i0, "X_l")])
    has_pred = ExistsFO("y", conj([In(y, X), is_start(y), succ_formula(m, "y", "x")]))
    pred_closed = ForallFO("x", Implies(And(In(x, X), is_start(x)), Or(init, has_pred)))
    has_halt = ExistsFO("x", conj([In(x, X), is_start(x), _at(x, m.halt_index, "X_l")]))
    return conj([whole, bounded, pred_closed, has_halt])


@log_call
def encode_2cm(m: TwoCounterMachine, s0: Configuration) -> Node:
    """Closed S1S[E] formula that holds on the set of all encodings iff M halts from ``s0``."""
    if s0[0] < 1 or s0[0] > len(m.instructions) or s0[1] < 0 or s0[2] < 0:
        raise ModelError(f"not a configuration of this machine: {s0}")
    return ExistsSO("X", halting_formula(m, s0, "X"))
