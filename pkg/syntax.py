"""Abstract syntax, parsing, printing and normal forms for the hyperlogics.

Two AST families share the Boolean connectives:

* temporal-style formulas (LTL, QPTL, CTL*, HyperLTL, HyperQPTL, HyperCTL*,
  HyperQCTL*, HyperKCTL*) built from :class:`Atom`, temporal operators and
  trace/path and propositional quantifiers;
* predicate-style formulas (FO[<,E], S1S[E], MPL[E], MSO[E]) built from terms,
  relational atoms and first/second-order quantifiers.

Concrete syntax::

    forall p1. forall p2. G (a[p1] <-> a[p2])       # HyperLTL
    exists q. forall p. F q & (!q U a[p])           # HyperQPTL
    E X a                                           # CTL*
    forall x. forall y. E(x, y) -> (P_a(x) <-> P_a(y))   # FO[<,E]

Quantified names are classified by use: a name used as an index (``a[p]``) is a
trace/path variable, a name used as a proposition is a propositional variable.
``exists q:prop.`` forces the propositional reading for unused names.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Callable, Iterator, NamedTuple

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError


class FormulaError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class Logic(str, Enum):
    LTL = "ltl"
    QPTL = "qptl"
    CTLSTAR = "ctlstar"
    HYPERLTL = "hyperltl"
    HYPERQPTL = "hyperqptl"
    HYPERCTLSTAR = "hyperctlstar"
    HYPERQCTLSTAR = "hyperqctlstar"
    HYPERKCTLSTAR = "hyperkctlstar"
    FOLTE = "foe"
    S1SE = "s1se"
    MPLE = "mple"
    MSOE = "msoe"

    @classmethod
    def parse(cls, name: str) -> Logic:
        key = name.strip().lower().replace("*", "star").replace("[", "").replace("]", "").replace("-", "")
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise FormulaError(f"unknown logic {name!r}; expected one of {', '.join(m.value for m in cls)}")

    @property
    def relational(self) -> bool:
        return self in (Logic.FOLTE, Logic.S1SE, Logic.MPLE, Logic.MSOE)

    @property
    def branching(self) -> bool:
        return self in (Logic.CTLSTAR, Logic.HYPERCTLSTAR, Logic.HYPERQCTLSTAR, Logic.HYPERKCTLSTAR,
                        Logic.MPLE, Logic.MSOE)

    @property
    def hyper(self) -> bool:
        return self in (Logic.HYPERLTL, Logic.HYPERQPTL, Logic.HYPERCTLSTAR, Logic.HYPERQCTLSTAR,
                        Logic.HYPERKCTLSTAR)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Node:
    """Base class of every AST node; subclasses are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: bool


@dataclass(frozen=True)
class Atom(Node):
    """``a[π]`` when ``var`` is set, a plain proposition otherwise."""

    name: str
    var: str | None = None


@dataclass(frozen=True)
class Not(Node):
    arg: Node


@dataclass(frozen=True)
class And(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Or(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Implies(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Iff(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Next(Node):
    arg: Node


@dataclass(frozen=True)
class Until(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Release(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Eventually(Node):
    arg: Node


@dataclass(frozen=True)
class Globally(Node):
    arg: Node


@dataclass(frozen=True)
class Exists(Node):
    """Trace (linear time) or path (branching time) quantifier."""

    var: str
    body: Node


@dataclass(frozen=True)
class Forall(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class ExistsProp(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class ForallProp(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class Knows(Node):
    """``K_{A,π} φ``: φ holds on every path A-indistinguishable from π so far."""

    aps: frozenset
    var: str
    body: Node


# relational terms


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Min(Node):
    var: str


@dataclass(frozen=True)
class Succ(Node):
    arg: Node


# relational atoms


@dataclass(frozen=True)
class Pred(Node):
    name: str
    term: Node


@dataclass(frozen=True)
class In(Node):
    term: Node
    setvar: str


@dataclass(frozen=True)
class Eq(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Less(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Level(Node):
    """The equal-level predicate ``E(t1, t2)``."""

    left: Node
    right: Node


@dataclass(frozen=True)
class ExistsFO(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class ForallFO(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class ExistsSO(Node):
    var: str
    body: Node


@dataclass(frozen=True)
class ForallSO(Node):
    var: str
    body: Node


HyperFormula = Node
RelationalFormula = Node

TRUE, FALSE = Const(True), Const(False)

TRACE_QUANTIFIERS = (Exists, Forall)
PROP_QUANTIFIERS = (ExistsProp, ForallProp)
FO_QUANTIFIERS = (ExistsFO, ForallFO)
SO_QUANTIFIERS = (ExistsSO, ForallSO)
QUANTIFIERS = TRACE_QUANTIFIERS + PROP_QUANTIFIERS + FO_QUANTIFIERS + SO_QUANTIFIERS
BINARY = (And, Or, Implies, Iff, Until, Release)
UNARY_TEMPORAL = (Next, Eventually, Globally)
REL_ATOMS = (Pred, In, Eq, Less, Level)
TERMS = (Var, Min, Succ)
DUAL = {Exists: Forall, Forall: Exists, ExistsProp: ForallProp, ForallProp: ExistsProp,
        ExistsFO: ForallFO, ForallFO: ExistsFO, ExistsSO: ForallSO, ForallSO: ExistsSO}


# ---------------------------------------------------------------------------
# Generic traversal
# ---------------------------------------------------------------------------

def children(f: Node) -> tuple[Node, ...]:
    return tuple(v for fl in fields(f) if isinstance(v := getattr(f, fl.name), Node))


def map_children(f: Node, fn: Callable[[Node], Node]) -> Node:
    changes = {fl.name: fn(v) for fl in fields(f) if isinstance(v := getattr(f, fl.name), Node)}
    return replace(f, **changes) if changes else f


def walk(f: Node) -> Iterator[Node]:
    yield f
    for k in children(f):
        yield from walk(k)


def size(f: Node) -> int:
    return sum(1 for _ in walk(f))


def conj(parts) -> Node:
    parts = list(parts)
    if not parts:
        return TRUE
    return _fold(And, parts)


def disj(parts) -> Node:
    parts = list(parts)
    if not parts:
        return FALSE
    return _fold(Or, parts)


def _fold(op, parts: list) -> Node:
    # balanced, so deep conjunctions do not hit the recursion limit
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return op(_fold(op, parts[:mid]), _fold(op, parts[mid:]))


def names_in(f: Node) -> set[str]:
    """Every identifier the formula mentions, bound or free."""
    out: set[str] = set()
    for n in walk(f):
        if isinstance(n, Atom):
            out.add(n.name)
            if n.var:
                out.add(n.var)
        elif isinstance(n, Knows):
            out.add(n.var)
            out.update(n.aps)
        elif isinstance(n, QUANTIFIERS + (_Pending,)):
            out.add(n.var)
        elif isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Min):
            out.add(n.var)
        elif isinstance(n, In):
            out.add(n.setvar)
        elif isinstance(n, Pred):
            out.add(n.name)
    return out


def fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        taken.add(base)
        return base
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in taken:
            taken.add(cand)
            return cand
    raise AssertionError("unreachable")


def rename_free(f: Node, old: str, new: str) -> Node:
    """Rename free occurrences of ``old`` (index, proposition or variable)."""
    if isinstance(f, QUANTIFIERS) and f.var == old:
        return f
    if isinstance(f, Atom):
        return Atom(new if f.name == old else f.name, new if f.var == old else f.var)
    if isinstance(f, Knows):
        return Knows(f.aps, new if f.var == old else f.var, rename_free(f.body, old, new))
    if isinstance(f, Var):
        return Var(new) if f.name == old else f
    if isinstance(f, Min):
        return Min(new) if f.var == old else f
    if isinstance(f, In):
        return In(rename_free(f.term, old, new), new if f.setvar == old else f.setvar)
    return map_children(f, lambda k: rename_free(k, old, new))


def substitute_trace(f: Node, old: str, new: str) -> Node:
    """Replace the trace index ``old`` by ``new`` in every atom."""
    if isinstance(f, TRACE_QUANTIFIERS) and f.var == old:
        return f
    if isinstance(f, Atom):
        return Atom(f.name, new) if f.var == old else f
    if isinstance(f, Knows) and f.var == old:
        return Knows(f.aps, new, substitute_trace(f.body, old, new))
    return map_children(f, lambda k: substitute_trace(k, old, new))


# ---------------------------------------------------------------------------
# Grammars
# ---------------------------------------------------------------------------

HYPER_GRAMMAR = r"""
?start: formula

?formula: iff

?iff: implies
    | implies "<->" iff                                  -> iff

?implies: disj
    | disj "->" implies                                  -> implies

?disj: conj
    | disj "|" conj                                      -> or_

?conj: binary
    | conj "&" binary                                    -> and_

?binary: unary
    | unary "U" binary                                   -> until
    | unary "R" binary                                   -> release

?unary: "!" unary                                        -> neg
    | "X" unary                                          -> next
    | "F" unary                                          -> eventually
    | "G" unary                                          -> globally
    | "K" "{" names? "}" "[" NAME "]" unary              -> knows
    | "E" formula                                        -> path_exists
    | "A" formula                                        -> path_forall
    | "exists" binder "." formula                        -> exists
    | "forall" binder "." formula                        -> forall
    | "(" formula ")"
    | atom

names: NAME ("," NAME)*
binder: NAME (":" NAME)?

atom: NAME "[" NAME "]"                                  -> indexed
    | NAME                                               -> plain
    | "true"                                             -> true
    | "false"                                            -> false

NAME: /[a-z][a-zA-Z0-9_]*/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

RELATIONAL_GRAMMAR = r"""
?start: formula

?formula: iff

?iff: implies
    | implies "<->" iff                                  -> iff

?implies: disj
    | disj "->" implies                                  -> implies

?disj: conj
    | disj "|" conj                                      -> or_

?conj: unary
    | conj "&" unary                                     -> and_

?unary: "!" unary                                        -> neg
    | "exists" VAR "." formula                           -> exists_fo
    | "forall" VAR "." formula                           -> forall_fo
    | "exists" SETVAR "." formula                        -> exists_so
    | "forall" SETVAR "." formula                        -> forall_so
    | "(" formula ")"
    | atom

atom: PRED "(" term ")"                                  -> pred
    | term "in" SETVAR                                   -> member
    | term "=" term                                      -> eq
    | term "<" term                                      -> less
    | "E" "(" term "," term ")"                          -> level
    | "true"                                             -> true
    | "false"                                            -> false

?term: VAR                                               -> var
    | "min" "(" VAR ")"                                  -> min_
    | "S" "(" term ")"                                   -> succ

PRED.2: /P_[a-zA-Z0-9_]+/
VAR: /[a-z][a-zA-Z0-9_]*/
SETVAR: /[A-Z][a-zA-Z0-9_]*/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""


@dataclass(frozen=True)
class _Pending(Node):
    """Quantifier whose trace/propositional kind is decided after parsing."""

    universal: bool
    var: str
    hint: str | None
    body: Node


@v_args(inline=True)
class _HyperBuilder(Transformer):
    def iff(self, a, b):
        return Iff(a, b)

    def implies(self, a, b):
        return Implies(a, b)

    def or_(self, a, b):
        return Or(a, b)

    def and_(self, a, b):
        return And(a, b)

    def until(self, a, b):
        return Until(a, b)

    def release(self, a, b):
        return Release(a, b)

    def neg(self, a):
        return Not(a)

    def next(self, a):
        return Next(a)

    def eventually(self, a):
        return Eventually(a)

    def globally(self, a):
        return Globally(a)

    def names(self, *toks):
        return [str(t) for t in toks]

    def knows(self, *args):
        *aps, var, body = args
        return Knows(frozenset(aps[0] if aps else ()), str(var), body)

    def path_exists(self, body):
        return Exists("", body)

    def path_forall(self, body):
        return Forall("", body)

    def binder(self, name, kind=None):
        if kind is not None and str(kind) not in ("prop", "trace"):
            raise FormulaError(f"unknown binder kind {kind!s}; use ':prop' or ':trace'", kind.line, kind.column)
        return str(name), (str(kind) if kind is not None else None)

    def exists(self, binder, body):
        return _Pending(False, binder[0], binder[1], body)

    def forall(self, binder, body):
        return _Pending(True, binder[0], binder[1], body)

    def indexed(self, name, var):
        return Atom(str(name), str(var))

    def plain(self, name):
        return Atom(str(name))

    def true(self):
        return TRUE

    def false(self):
        return FALSE


@v_args(inline=True)
class _RelationalBuilder(Transformer):
    def iff(self, a, b):
        return Iff(a, b)

    def implies(self, a, b):
        return Implies(a, b)

    def or_(self, a, b):
        return Or(a, b)

    def and_(self, a, b):
        return And(a, b)

    def neg(self, a):
        return Not(a)

    def exists_fo(self, v, body):
        return ExistsFO(str(v), body)

    def forall_fo(self, v, body):
        return ForallFO(str(v), body)

    def exists_so(self, v, body):
        return ExistsSO(str(v), body)

    def forall_so(self, v, body):
        return ForallSO(str(v), body)

    def pred(self, p, t):
        return Pred(str(p)[2:], t)

    def member(self, t, s):
        return In(t, str(s))

    def eq(self, a, b):
        return Eq(a, b)

    def less(self, a, b):
        return Less(a, b)

    def level(self, a, b):
        return Level(a, b)

    def true(self):
        return TRUE

    def false(self):
        return FALSE

    def var(self, v):
        return Var(str(v))

    def min_(self, v):
        return Min(str(v))

    def succ(self, t):
        return Succ(t)


_HYPER_PARSER = Lark(HYPER_GRAMMAR, parser="lalr", transformer=_HyperBuilder())
_RELATIONAL_PARSER = Lark(RELATIONAL_GRAMMAR, parser="lalr", transformer=_RelationalBuilder())


def parse(text: str, logic: Logic | str) -> Node:
    """Parse ``text`` as a formula of ``logic`` and check well-formedness."""
    logic = Logic.parse(logic) if isinstance(logic, str) else logic
    parser = _RELATIONAL_PARSER if logic.relational else _HYPER_PARSER
    try:
        raw = parser.parse(text)
    except UnexpectedInput as e:
        raise FormulaError(f"syntax error: {str(e).splitlines()[0]}", e.line, e.column) from None
    except VisitError as e:
        if isinstance(e.orig_exc, FormulaError):
            raise e.orig_exc from None
        raise
    if logic.relational:
        f = _alpha_unique(raw)
    else:
        f = _resolve_kinds(_alpha_unique(_name_path_quantifiers(raw)), logic)
    check_wellformed(f, logic)
    return f


def _name_path_quantifiers(f: Node) -> Node:
    counter = itertools.count(1)

    def go(n: Node) -> Node:
        n = map_children(n, go)
        if isinstance(n, (Exists, Forall)) and n.var == "":
            return type(n)(f"_e{next(counter)}", n.body)
        return n

    return go(f)


def _alpha_unique(f: Node) -> Node:
    """Rename bound names so no name is bound twice along a root-to-leaf path."""
    taken = names_in(f)

    def go(n: Node, bound: frozenset) -> Node:
        if isinstance(n, QUANTIFIERS + (_Pending,)):
            var, body = n.var, n.body
            if var in bound:
                new = fresh_name(var, taken)
                body = rename_free(body, var, new) if not isinstance(n, _Pending) else _rename_pending(body, var, new)
                var = new
            return replace(n, var=var, body=go(body, bound | {var}))
        return map_children(n, lambda k: go(k, bound))

    return go(f, frozenset())


def _rename_pending(f: Node, old: str, new: str) -> Node:
    if isinstance(f, _Pending):
        if f.var == old:
            return f
        return replace(f, body=_rename_pending(f.body, old, new))
    if isinstance(f, Atom):
        return Atom(new if f.name == old else f.name, new if f.var == old else f.var)
    if isinstance(f, Knows):
        return Knows(f.aps, new if f.var == old else f.var, _rename_pending(f.body, old, new))
    return map_children(f, lambda k: _rename_pending(k, old, new))


def _usage(f: Node, var: str) -> set[str]:
    out: set[str] = set()
    for n in walk(f):
        if isinstance(n, Atom):
            if n.var == var:
                out.add("trace")
            if n.name == var:
                out.add("prop")
        elif isinstance(n, Knows) and n.var == var:
            out.add("trace")
    return out


def _resolve_kinds(f: Node, logic: Logic) -> Node:
    default = "prop" if logic in (Logic.LTL, Logic.QPTL) else "trace"

    def go(n: Node) -> Node:
        if isinstance(n, _Pending):
            used = _usage(n.body, n.var)
            if len(used) > 1:
                raise FormulaError(f"{n.var!r} is used both as a trace index and as a proposition")
            kind = n.hint or (used.pop() if used else default)
            if n.hint and used and n.hint not in used:
                raise FormulaError(f"{n.var!r} is declared :{n.hint} but used as a {used.pop()}")
            body = go(n.body)
            if kind == "prop":
                return (ForallProp if n.universal else ExistsProp)(n.var, body)
            return (Forall if n.universal else Exists)(n.var, body)
        return map_children(n, go)

    return go(f)


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------

def is_prenex(f: Node) -> bool:
    while isinstance(f, QUANTIFIERS):
        f = f.body
    return not any(isinstance(n, QUANTIFIERS) for n in walk(f))


def prefix_and_matrix(f: Node) -> tuple[list[Node], Node]:
    """Split a prenex formula into its quantifier list and matrix."""
    prefix = []
    while isinstance(f, QUANTIFIERS):
        prefix.append(f)
        f = f.body
    return prefix, f


def check_wellformed(f: Node, logic: Logic) -> None:
    if logic.relational:
        _check_relational(f, logic)
        return
    allowed: tuple = ()
    if logic in (Logic.QPTL,):
        allowed = PROP_QUANTIFIERS
    elif logic in (Logic.CTLSTAR, Logic.HYPERLTL, Logic.HYPERCTLSTAR, Logic.HYPERKCTLSTAR):
        allowed = TRACE_QUANTIFIERS
    elif logic in (Logic.HYPERQPTL, Logic.HYPERQCTLSTAR):
        allowed = TRACE_QUANTIFIERS + PROP_QUANTIFIERS
    props = {n.var for n in walk(f) if isinstance(n, PROP_QUANTIFIERS)}
    for n in walk(f):
        if isinstance(n, REL_ATOMS + TERMS + FO_QUANTIFIERS + SO_QUANTIFIERS):
            raise FormulaError(f"{type(n).__name__} is not part of {logic.value}")
        if isinstance(n, QUANTIFIERS) and not isinstance(n, allowed):
            kind = "propositional" if isinstance(n, PROP_QUANTIFIERS) else "trace/path"
            raise FormulaError(f"{kind} quantifier over {n.var!r} is not allowed in {logic.value}")
        if isinstance(n, TRACE_QUANTIFIERS) and n.var.startswith("_") != (logic is Logic.CTLSTAR):
            raise FormulaError("E/A path quantifiers belong to ctlstar; hyperlogics name their paths")
        if isinstance(n, Knows) and logic is not Logic.HYPERKCTLSTAR:
            raise FormulaError(f"knowledge operator is not allowed in {logic.value}")
        if isinstance(n, Atom):
            _check_atom(n, logic, props)
    if logic in (Logic.QPTL, Logic.HYPERLTL, Logic.HYPERQPTL) and not is_prenex(f):
        raise FormulaError(f"{logic.value} quantifiers must form a prenex prefix")


def _check_atom(n: Atom, logic: Logic, props: set[str]) -> None:
    if logic in (Logic.LTL, Logic.QPTL, Logic.CTLSTAR):
        if n.var is not None:
            raise FormulaError(f"indexed atom {n.name}[{n.var}] is not allowed in {logic.value}")
        return
    if logic is Logic.HYPERQPTL:
        if n.name in props and n.var is not None:
            raise FormulaError(f"quantified proposition {n.name!r} takes no trace index in hyperqptl")
        if n.name not in props and n.var is None:
            raise FormulaError(f"atom {n.name!r} needs a trace index")
        return
    if n.var is None:
        raise FormulaError(f"atom {n.name!r} needs a trace index")
    if n.name in props and logic is not Logic.HYPERQCTLSTAR:
        raise FormulaError(f"{n.name!r} is a quantified proposition")


def _check_relational(f: Node, logic: Logic) -> None:
    for n in walk(f):
        if isinstance(n, (Atom,) + TRACE_QUANTIFIERS + PROP_QUANTIFIERS + UNARY_TEMPORAL + (Until, Release, Knows)):
            raise FormulaError(f"{type(n).__name__} is not part of {logic.value}")
        if logic is not Logic.S1SE and isinstance(n, (Min, Succ)):
            raise FormulaError(f"min/S terms are only allowed in s1se, not {logic.value}")
        if logic is Logic.FOLTE and isinstance(n, (In,) + SO_QUANTIFIERS):
            raise FormulaError("second-order variables are not part of foe")


def so_path_restricted(logic: Logic) -> bool:
    """MPL[E] quantifies second-order variables over full paths only."""
    return logic is Logic.MPLE


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_OPS = {And: "&", Or: "|", Implies: "->", Iff: "<->", Until: "U", Release: "R"}
_UNARY = {Not: "!", Next: "X ", Eventually: "F ", Globally: "G "}


def render(f: Node) -> str:
    """Canonical concrete syntax; ``parse(render(f))`` gives ``f`` back up to bound names."""
    return _render(f, top=True)


def _render(f: Node, top: bool = False) -> str:
    if isinstance(f, QUANTIFIERS) or isinstance(f, Knows):
        text = _render_binder(f)
        return text if top else f"({text})"
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name if f.var is None else f"{f.name}[{f.var}]"
    if isinstance(f, tuple(_UNARY)):
        return _UNARY[type(f)] + _render(f.arg)
    if isinstance(f, tuple(_OPS)):
        return f"({_render(f.left)} {_OPS[type(f)]} {_render(f.right)})"
    if isinstance(f, Pred):
        return f"P_{f.name}({_render(f.term)})"
    if isinstance(f, In):
        return f"{_render(f.term)} in {f.setvar}"
    if isinstance(f, Eq):
        return f"{_render(f.left)} = {_render(f.right)}"
    if isinstance(f, Less):
        return f"{_render(f.left)} < {_render(f.right)}"
    if isinstance(f, Level):
        return f"E({_render(f.left)}, {_render(f.right)})"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Min):
        return f"min({f.var})"
    if isinstance(f, Succ):
        return f"S({_render(f.arg)})"
    raise FormulaError(f"cannot render {type(f).__name__}")


def _render_binder(f: Node) -> str:
    if isinstance(f, Knows):
        return f"K{{{','.join(sorted(f.aps))}}}[{f.var}] {_render(f.body)}"
    if isinstance(f, TRACE_QUANTIFIERS) and f.var.startswith("_"):
        return ("E " if isinstance(f, Exists) else "A ") + _render(f.body, top=True)
    word = "exists" if isinstance(f, (Exists, ExistsProp, ExistsFO, ExistsSO)) else "forall"
    hint = ""
    if isinstance(f, PROP_QUANTIFIERS) and "prop" not in _usage(f.body, f.var):
        hint = ":prop"
    return f"{word} {f.var}{hint}. {_render(f.body, top=True)}"


# ---------------------------------------------------------------------------
# Normal forms
# ---------------------------------------------------------------------------

def to_nnf(f: Node) -> Node:
    """Push negations onto atoms (knowledge literals stay as negated units)."""
    return _nnf(f, False)


def _nnf(f: Node, neg: bool) -> Node:
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, Const):
        return Const(f.value != neg)
    if isinstance(f, (Atom,) + REL_ATOMS):
        return Not(f) if neg else f
    if isinstance(f, Knows):
        k = Knows(f.aps, f.var, _nnf(f.body, False))
        return Not(k) if neg else k
    if isinstance(f, (And, Or)):
        op = type(f) if not neg else (Or if isinstance(f, And) else And)
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Implies):
        return _nnf(Or(Not(f.left), f.right), neg)
    if isinstance(f, Iff):
        if neg:
            return Or(And(_nnf(f.left, False), _nnf(f.right, True)),
                      And(_nnf(f.left, True), _nnf(f.right, False)))
        return Or(And(_nnf(f.left, False), _nnf(f.right, False)),
                  And(_nnf(f.left, True), _nnf(f.right, True)))
    if isinstance(f, Next):
        return Next(_nnf(f.arg, neg))
    if isinstance(f, (Until, Release)):
        op = type(f) if not neg else (Release if isinstance(f, Until) else Until)
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, (Eventually, Globally)):
        op = type(f) if not neg else (Globally if isinstance(f, Eventually) else Eventually)
        return op(_nnf(f.arg, neg))
    if isinstance(f, QUANTIFIERS):
        op = DUAL[type(f)] if neg else type(f)
        return op(f.var, _nnf(f.body, neg))
    raise FormulaError(f"cannot normalize {type(f).__name__}")


def bind_state_atoms(f: Node) -> Node:
    """Index plain CTL* atoms by the innermost enclosing path variable."""

    def go(n: Node, current: str | None) -> Node:
        if isinstance(n, TRACE_QUANTIFIERS):
            return type(n)(n.var, go(n.body, n.var))
        if isinstance(n, Atom) and n.var is None and current is not None:
            return Atom(n.name, current)
        return map_children(n, lambda k: go(k, current))

    return go(f, None)


def alpha_normalize(f: Node) -> Node:
    """Rename every bound name canonically in binding order."""
    counter = itertools.count()

    def go(n: Node) -> Node:
        if isinstance(n, QUANTIFIERS):
            new = f"_v{next(counter)}"
            return type(n)(new, go(rename_free(n.body, n.var, new)))
        return map_children(n, go)

    return go(f)


# ---------------------------------------------------------------------------
# Fragments and free variables
# ---------------------------------------------------------------------------

class Shape(str, Enum):
    FORALL_STAR = "ForallStar"
    EXISTS_STAR = "ExistsStar"
    EXISTS_FORALL_STAR = "ExistsStarForallStar"
    FORALL_EXISTS = "ForallExists"
    OTHER = "Other"


@dataclass(frozen=True)
class FragmentClass:
    shape: Shape
    prop_quantifiers: tuple[tuple[int, str, str], ...] = ()

    @property
    def has_prop_quantifiers(self) -> bool:
        return bool(self.prop_quantifiers)


def classify_fragment(f: Node, logic: Logic | None = None) -> FragmentClass:
    """Classify by trace/path quantification; propositional quantifiers are listed apart."""
    if logic in (Logic.HYPERLTL, Logic.HYPERQPTL, Logic.QPTL) and not is_prenex(f):
        raise FormulaError(f"{logic.value} input must be prenex to classify")
    g = to_nnf(f)
    words: set[str] = set()
    props: list[tuple[int, str, str]] = []
    index = itertools.count()

    def go(n: Node, seq: str) -> None:
        if isinstance(n, TRACE_QUANTIFIERS):
            next(index)
            letter = "E" if isinstance(n, Exists) else "A"
            seq = seq if seq.endswith(letter) else seq + letter
        elif isinstance(n, Knows):
            next(index)
            seq = seq if seq.endswith("A") else seq + "A"
        elif isinstance(n, PROP_QUANTIFIERS):
            props.append((next(index), "exists" if isinstance(n, ExistsProp) else "forall", n.var))
        kids = children(n)
        if not kids:
            words.add(seq)
        for k in kids:
            go(k, seq)

    go(g, "")
    if words <= {"", "A"}:
        shape = Shape.FORALL_STAR
    elif words <= {"", "E"}:
        shape = Shape.EXISTS_STAR
    elif words <= {"", "A", "E", "EA"}:
        shape = Shape.EXISTS_FORALL_STAR
    elif words <= {"", "A", "E", "EA", "AE"}:
        shape = Shape.FORALL_EXISTS
    else:
        shape = Shape.OTHER
    return FragmentClass(shape, tuple(props))


class FreeVariables(NamedTuple):
    traces: frozenset
    props: frozenset
    fo: frozenset
    so: frozenset

    @property
    def closed(self) -> bool:
        return not (self.traces or self.props or self.fo or self.so)


def free_variables(f: Node) -> FreeVariables:
    traces, props, fo, so = set(), set(), set(), set()

    def go(n: Node, bound: frozenset) -> None:
        if isinstance(n, QUANTIFIERS):
            go(n.body, bound | {n.var})
            return
        if isinstance(n, Atom):
            if n.var is not None and n.var not in bound:
                traces.add(n.var)
            if n.var is None and n.name not in bound:
                props.add(n.name)
        elif isinstance(n, Knows) and n.var not in bound:
            traces.add(n.var)
        elif isinstance(n, Var) and n.name not in bound:
            fo.add(n.name)
        elif isinstance(n, Min) and n.var not in bound:
            fo.add(n.var)
        elif isinstance(n, In) and n.setvar not in bound:
            so.add(n.setvar)
        for k in children(n):
            go(k, bound)

    go(f, frozenset())
    return FreeVariables(frozenset(traces), frozenset(props), frozenset(fo), frozenset(so))


def is_closed_s1s(f: Node) -> bool:
    """Closed S1S[E]: the only free variables are second-order ``X_a``."""
    fv = free_variables(f)
    return not fv.fo and not fv.traces and all(x.startswith("X_") and len(x) > 2 for x in fv.so)
