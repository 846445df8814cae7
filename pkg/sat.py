"""Satisfiability for the decidable fragments, with witnesses re-checked by the evaluators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from automata import CapExceeded, formula_automaton, is_empty, ltl_to_nba
from config import get_settings
from logging_utils import log_call
from models import KripkeTree, LassoTrace, TraceSet
from semantics import Verdict, eval_branching, eval_linear
from syntax import (
    Atom, Exists, ExistsProp, Forall, ForallProp, FormulaError, Knows, Logic, Node, Not, PROP_QUANTIFIERS, Shape, conj,
    classify_fragment, free_variables, fresh_name, is_prenex, map_children, names_in, prefix_and_matrix,
    bind_state_atoms, substitute_trace, to_nnf, walk,
)

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    REFUSED = "REFUSED"
    UNDECIDED = "UNDECIDED"


# hlk exit status per outcome; an unverified SAT exits like UNDECIDED
EXIT_CODES = {Outcome.SAT: 0, Outcome.UNSAT: 1, Outcome.REFUSED: 2, Outcome.UNDECIDED: 3}


@dataclass(frozen=True)
class SatVerdict:
    outcome: Outcome
    witness: TraceSet | KripkeTree | None = None
    reason: str = ""
    fragment: str = ""
    verified: bool = False
    certificate: object = None

    @property
    def exit_code(self) -> int:
        if self.outcome is Outcome.SAT and not self.verified:
            return EXIT_CODES[Outcome.UNDECIDED]
        return EXIT_CODES[self.outcome]


class FragmentError(ValueError):
    """The procedure was called on a formula outside its fragment."""


def _verify_linear(f: Node, witness: TraceSet, cap: int | None) -> bool:
    try:
        return eval_linear(f, witness, cap=cap)
    except CapExceeded as e:
        logger.warning(f"[sat] could not re-check the witness: {e}")
        return False


# ---------------------------------------------------------------------------
# QPTL
# ---------------------------------------------------------------------------

@log_call
def qptl_sat(f: Node, *, cap: int | None = None, max_states: int | None = None,
             aps: tuple[str, ...] = ()) -> SatVerdict:
    """Emptiness of the formula automaton; the witness is one trace over the free propositions."""
    fv = free_variables(f)
    if fv.traces:
        raise FormulaError(f"free trace variables {sorted(fv.traces)} in a QPTL formula")
    try:
        a = formula_automaton(f, cap, max_states).positive(cap, max_states)
    except CapExceeded as e:
        return SatVerdict(Outcome.UNDECIDED, reason=str(e), fragment="QPTL")
    w = is_empty(a)
    if w is None:
        return SatVerdict(Outcome.UNSAT, fragment="QPTL")
    props = set(fv.props) | set(aps)
    t = w.as_lasso().map(lambda letter: frozenset(letter) & props)
    witness = TraceSet(tuple(sorted(props)), (t,))
    return SatVerdict(Outcome.SAT, witness, fragment="QPTL", verified=_verify_linear(f, witness, cap))


# ---------------------------------------------------------------------------
# HyperQPTL
# ---------------------------------------------------------------------------

def drop_trace_variables(f: Node) -> Node:
    """Remove trace quantifiers and indices: on a single trace every quantifier picks it."""
    if isinstance(f, (Exists, Forall)):
        return drop_trace_variables(f.body)
    if isinstance(f, Knows):
        return drop_trace_variables(f.body)
    if isinstance(f, Atom) and f.var is not None:
        return Atom(f.name)
    return map_children(f, drop_trace_variables)


def _trace_aps(f: Node) -> tuple[str, ...]:
    return tuple(sorted({n.name for n in walk(f) if isinstance(n, Atom) and n.var is not None}))


@log_call
def sat_hyperqptl_forall(f: Node, *, cap: int | None = None, max_states: int | None = None) -> SatVerdict:
    """∀* formulas are satisfiable iff they hold on some single trace."""
    if classify_fragment(f, Logic.HYPERQPTL).shape is not Shape.FORALL_STAR:
        raise FragmentError("sat_hyperqptl_forall needs a ∀* formula")
    aps = _trace_aps(f)
    v = qptl_sat(drop_trace_variables(f), cap=cap, max_states=max_states, aps=aps)
    if v.outcome is not Outcome.SAT:
        return SatVerdict(v.outcome, reason=v.reason, fragment="HyperQPTL ∀*")
    witness = TraceSet(aps, v.witness.traces)
    return SatVerdict(Outcome.SAT, witness, fragment="HyperQPTL ∀*", verified=_verify_linear(f, witness, cap))


@dataclass(frozen=True)
class Reduction:
    """∃*∀* HyperQPTL brought down to QPTL.

    ``conjuncts`` are the instances of the universal block, before the
    propositional quantifiers behind it are hoisted; ``qptl`` is the final
    closed formula and ``names`` maps ``(proposition, trace)`` to the
    proposition encoding it.
    """

    existentials: tuple[str, ...]
    conjuncts: tuple[Node, ...]
    qptl: Node
    names: dict = field(default_factory=dict)


def _has_trace_quantifier(f: Node) -> bool:
    return any(isinstance(n, (Exists, Forall)) for n in walk(f))


def _instances(f: Node, existentials: list[str]) -> list[Node]:
    """Expand each ∀π in place into one copy per existential trace."""
    if isinstance(f, Forall):
        return [c for pi in existentials for c in _instances(substitute_trace(f.body, f.var, pi), existentials)]
    if isinstance(f, PROP_QUANTIFIERS) and _has_trace_quantifier(f.body):
        return [type(f)(f.var, conj(_instances(f.body, existentials)))]
    if isinstance(f, Exists):
        raise FragmentError("an ∃ trace quantifier follows a ∀ trace quantifier")
    return [f]


def _hoist(conjuncts: list[Node], taken: set[str]) -> Node:
    """Pull an ∃*∀* propositional block out of the conjunction.

    Existential propositions get a fresh copy per conjunct; universal ones
    are shared. Other blocks stay inside their conjunct.
    """
    blocks = []
    for c in conjuncts:
        prefix, matrix = prefix_and_matrix(c)
        blocks.append((prefix, matrix))
    kinds = ["E" if isinstance(q, ExistsProp) else "A" for q in blocks[0][0]]
    shared = all([type(q) for q in p] == [type(q) for q in blocks[0][0]] and
                 [q.var for q in p] == [q.var for q in blocks[0][0]] for p, _ in blocks)
    word = "".join(kinds)
    if not shared or "AE" in word or any(not isinstance(q, PROP_QUANTIFIERS) for q in blocks[0][0]):
        return conj(_rename_bound(c, taken) for c in conjuncts)
    exists_vars, matrices = [], []
    for prefix, matrix in blocks:
        for q in prefix:
            if isinstance(q, ExistsProp):
                new = fresh_name(q.var, taken)
                taken.add(new)
                exists_vars.append(new)
                matrix = _rename_prop(matrix, q.var, new)
        matrices.append(matrix)
    out = conj(matrices)
    for q in reversed([q for q in blocks[0][0] if isinstance(q, ForallProp)]):
        out = ForallProp(q.var, out)
    for v in reversed(exists_vars):
        out = ExistsProp(v, out)
    return out


def _rename_prop(f: Node, old: str, new: str) -> Node:
    if isinstance(f, Atom) and f.var is None and f.name == old:
        return Atom(new)
    if isinstance(f, PROP_QUANTIFIERS) and f.var == old:
        return f
    return map_children(f, lambda k: _rename_prop(k, old, new))


def _rename_bound(f: Node, taken: set[str]) -> Node:
    if isinstance(f, PROP_QUANTIFIERS):
        new = fresh_name(f.var, taken)
        taken.add(new)
        return type(f)(new, _rename_bound(_rename_prop(f.body, f.var, new), taken))
    return map_children(f, lambda k: _rename_bound(k, taken))


def _encode_traces(f: Node, names: dict) -> Node:
    if isinstance(f, Atom) and f.var is not None:
        return Atom(names[(f.name, f.var)])
    return map_children(f, lambda k: _encode_traces(k, names))


def reduce_exists_forall(f: Node) -> Reduction:
    """Eliminate the universal trace block, then replace traces by fresh propositions."""
    if not is_prenex(f):
        raise FormulaError("HyperQPTL satisfiability needs prenex input")
    shape = classify_fragment(f, Logic.HYPERQPTL).shape
    if shape not in (Shape.EXISTS_STAR, Shape.EXISTS_FORALL_STAR):
        raise FragmentError(f"reduce_exists_forall needs an ∃*∀* formula, got {shape.value}")
    prefix, matrix = prefix_and_matrix(f)
    cut = next((i for i, q in enumerate(prefix) if isinstance(q, Forall)), len(prefix))
    head = prefix[:cut]
    existentials = [q.var for q in head if isinstance(q, Exists)]
    if cut < len(prefix) and not existentials:
        raise FragmentError("no existential trace to instantiate the universal block with")
    tail = matrix
    for q in reversed(prefix[cut:]):
        tail = type(q)(q.var, tail)
    conjuncts = _instances(tail, existentials)
    taken = names_in(f)
    body = _hoist(conjuncts, taken)
    aps = _trace_aps(f)
    names = {}
    for pi in existentials:
        for a in aps:
            names[(a, pi)] = fresh_name(f"{a}_{pi}", taken)
            taken.add(names[(a, pi)])
    out = _encode_traces(body, names)
    for q in reversed(head):
        if isinstance(q, Exists):
            for a in reversed(aps):
                out = ExistsProp(names[(a, q.var)], out)
        else:
            out = type(q)(q.var, out)
    return Reduction(tuple(existentials), tuple(conjuncts), out, names)


@log_call
def sat_hyperqptl_exists_forall(f: Node, *, cap: int | None = None, max_states: int | None = None) -> SatVerdict:
    red = reduce_exists_forall(f)
    # leading existential propositions stay free so the witness can be read off
    free_block, g = [], red.qptl
    while isinstance(g, ExistsProp):
        free_block.append(g.var)
        g = g.body
    v = qptl_sat(g, cap=cap, max_states=max_states, aps=tuple(red.names.values()))
    if v.outcome is not Outcome.SAT:
        return SatVerdict(v.outcome, reason=v.reason, fragment="HyperQPTL ∃*∀*")
    if not set(red.names.values()) <= set(free_block):
        return SatVerdict(Outcome.SAT, fragment="HyperQPTL ∃*∀*",
                          reason="a universal proposition precedes an existential trace; no witness extracted")
    word: LassoTrace = v.witness.traces[0]
    aps = _trace_aps(f)
    traces = tuple(word.map(lambda l, pi=pi: frozenset(a for a in aps if red.names[(a, pi)] in l))
                   for pi in red.existentials)
    witness = TraceSet(aps, traces)
    return SatVerdict(Outcome.SAT, witness, fragment="HyperQPTL ∃*∀*", verified=_verify_linear(f, witness, cap))


# ---------------------------------------------------------------------------
# HyperCTL*
# ---------------------------------------------------------------------------

@log_call
def sat_hyperctl_forall(f: Node) -> SatVerdict:
    """∀* formulas have a model iff they have a linear one; linear trees collapse all paths."""
    g = to_nnf(bind_state_atoms(f))
    if classify_fragment(g).shape is not Shape.FORALL_STAR:
        raise FragmentError("sat_hyperctl_forall needs a ∀* formula")
    w = is_empty(ltl_to_nba(drop_trace_variables(g)))
    if w is None:
        return SatVerdict(Outcome.UNSAT, fragment="HyperCTL* ∀*")
    aps = {n.name for n in walk(g) if isinstance(n, Atom)}
    model = KripkeTree.linear(w.as_lasso().map(lambda l: frozenset(l) & aps))
    verdict = eval_branching(f, model, path_bound=len(model.nodes) + 1)
    return SatVerdict(Outcome.SAT, model, fragment="HyperCTL* ∀*", verified=verdict is Verdict.TRUE)


class _NoScope(Exception):
    pass


def _instantiate_universals(f: Node, scope: tuple[str, ...]) -> Node:
    if isinstance(f, Exists):
        return Exists(f.var, _instantiate_universals(f.body, scope + (f.var,)))
    if isinstance(f, Forall):
        if not scope:
            raise _NoScope(f.var)
        return conj(_instantiate_universals(substitute_trace(f.body, f.var, pi), scope) for pi in scope)
    if isinstance(f, Knows):
        # the observed path is among the observationally equivalent ones
        return _instantiate_universals(f.body, scope)
    if isinstance(f, Not) and isinstance(f.arg, Knows):
        return f
    return map_children(f, lambda k: _instantiate_universals(k, scope))


@log_call
def sat_hyperctl_exists_forall(f: Node, *, max_states: int | None = None, max_depth: int | None = None) -> SatVerdict:
    """Instantiate universals with the existentials in scope, then search comb-shaped models.

    An unsatisfiable instance proves the original unsatisfiable; a model of
    the instance counts only once the original holds on it.
    """
    from comb import demo_decide_exists

    g = to_nnf(bind_state_atoms(f))
    shape = classify_fragment(g).shape
    if shape not in (Shape.EXISTS_STAR, Shape.EXISTS_FORALL_STAR):
        raise FragmentError(f"sat_hyperctl_exists_forall needs an ∃*∀* formula, got {shape.value}")
    try:
        h = _instantiate_universals(g, ())
    except _NoScope as e:
        return SatVerdict(Outcome.UNDECIDED, fragment="HyperCTL* ∃*∀*",
                          reason=f"universal path {e} has no existential path in scope")
    v = demo_decide_exists(h, max_states=max_states, max_depth=max_depth)
    if v.outcome is not Outcome.SAT:
        return replace(v, fragment="HyperCTL* ∃*∀*")
    model = v.witness
    verdict = eval_branching(f, model, path_bound=len(model.nodes) + 1)
    reason = "" if verdict is Verdict.TRUE else f"the original formula evaluates to {verdict.value} on the model"
    return SatVerdict(Outcome.SAT, model, reason=reason, fragment="HyperCTL* ∃*∀*",
                      verified=verdict is Verdict.TRUE, certificate=v.certificate)


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------

_UNDECIDABLE = {
    Shape.FORALL_EXISTS: "∀∃ quantification is undecidable: it already encodes the recurrence problem "
                         "for two-counter machines",
    Shape.OTHER: "quantifier alternation beyond ∃*∀* is undecidable",
}


def refuse_undecidable(f: Node, logic: Logic, why: str | None = None) -> SatVerdict:
    shape = classify_fragment(f).shape
    reason = why or _UNDECIDABLE.get(shape, "no decision procedure for this fragment")
    logger.info(f"[sat] refusing {logic.value} {shape.value}: {reason}")
    return SatVerdict(Outcome.REFUSED, reason=reason, fragment=f"{logic.value} {shape.value}")


@log_call
def decide(f: Node, logic: Logic, *, cap: int | None = None, max_states: int | None = None,
           max_depth: int | None = None) -> SatVerdict:
    """Route to the procedure for the formula's fragment, refusing undecidable ones."""
    if logic.relational:
        raise FragmentError(f"satisfiability is decided for the temporal logics, not {logic.value}")
    settings = get_settings()
    cap = cap or settings.automata.state_cap
    if logic in (Logic.LTL, Logic.QPTL):
        return qptl_sat(f, cap=cap, max_states=max_states)
    if logic in (Logic.HYPERLTL, Logic.HYPERQPTL):
        shape = classify_fragment(f, logic).shape
        if shape is Shape.FORALL_STAR:
            return sat_hyperqptl_forall(f, cap=cap, max_states=max_states)
        if shape in (Shape.EXISTS_STAR, Shape.EXISTS_FORALL_STAR):
            return sat_hyperqptl_exists_forall(f, cap=cap, max_states=max_states)
        return refuse_undecidable(f, logic)
    if logic is Logic.HYPERQCTLSTAR and classify_fragment(f).has_prop_quantifiers:
        return refuse_undecidable(f, logic, "propositional quantification over tree nodes is not decided here")
    g = bind_state_atoms(f)
    shape = classify_fragment(g).shape
    if shape is Shape.FORALL_STAR:
        return sat_hyperctl_forall(f)
    if shape in (Shape.EXISTS_STAR, Shape.EXISTS_FORALL_STAR):
        return sat_hyperctl_exists_forall(f, max_states=max_states, max_depth=max_depth)
    return refuse_undecidable(f, logic)
