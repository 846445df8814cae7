"""hlk: command line front end.

Subcommands mirror the library modules: parse, classify, eval, translate,
encode-2cm, sat and comb (demo, cut). Primary output goes to stdout; every
run ends with one ``key=value`` report line on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from automata import AutomatonError, CapExceeded
from comb import CombError, demo_decide_exists, dump_comb, parse_comb, plan_cut, cut, preserving_cut
from config import get_settings
from logging_utils import configure_logging
from models import ModelError, TraceSet, dump_kripke, dump_traceset, parse_kripke, parse_traceset
from sat import FragmentError, Outcome, SatVerdict, decide
from semantics import (
    Verdict, eval_branching, eval_linear, eval_relational_branching, eval_relational_linear, linear_witness,
)
from syntax import FormulaError, Logic, Node, classify_fragment, parse, render
from translate import SE_REPAIR_NOTE, TranslationError, encode_2cm, hq, hqc, mpe, mse, parse_machine, se

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_NO, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2, 3

# logic by file suffix when neither --logic nor a '# logic:' header says otherwise
SUFFIXES = {
    ".ltl": Logic.LTL, ".qptl": Logic.QPTL, ".ctl": Logic.CTLSTAR, ".hltl": Logic.HYPERLTL,
    ".hq": Logic.HYPERQPTL, ".hctl": Logic.HYPERCTLSTAR, ".hqctl": Logic.HYPERQCTLSTAR,
    ".hkctl": Logic.HYPERKCTLSTAR, ".fo": Logic.FOLTE, ".s1s": Logic.S1SE, ".mple": Logic.MPLE,
    ".mso": Logic.MSOE,
}
_HEADER = re.compile(r"^\s*#\s*logic:\s*(\S+)", re.MULTILINE)

TRANSLATIONS = {
    (Logic.FOLTE, Logic.HYPERQPTL): hq,
    (Logic.HYPERLTL, Logic.S1SE): se,
    (Logic.HYPERQPTL, Logic.S1SE): se,
    (Logic.CTLSTAR, Logic.MPLE): mpe,
    (Logic.HYPERCTLSTAR, Logic.MPLE): mpe,
    (Logic.HYPERKCTLSTAR, Logic.MPLE): mpe,
    (Logic.HYPERCTLSTAR, Logic.MSOE): mse,
    (Logic.HYPERQCTLSTAR, Logic.MSOE): mse,
    (Logic.MSOE, Logic.HYPERQCTLSTAR): hqc,
}


@dataclass
class RunReport:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    verdict: str = ""
    output: str = "-"
    elapsed_ms: int = 0
    caps: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def line(self) -> str:
        items = {"subcommand": self.subcommand, "inputs": ",".join(self.inputs), "verdict": self.verdict,
                 "output": self.output, "elapsed_ms": self.elapsed_ms, **self.caps}
        if self.warnings:
            items["warnings"] = "; ".join(self.warnings)
        return " ".join(f"{k}={_quote(v)}" for k, v in items.items())


def _quote(v) -> str:
    s = str(v)
    return json.dumps(s, ensure_ascii=False) if not s or re.search(r"[\s\"=]", s) else s


def read_formula(path: str, logic: str | None) -> tuple[Node, Logic]:
    text = Path(path).read_text(encoding="utf-8")
    if logic:
        chosen = Logic.parse(logic)
    elif m := _HEADER.search(text):
        chosen = Logic.parse(m.group(1))
    elif Path(path).suffix in SUFFIXES:
        chosen = SUFFIXES[Path(path).suffix]
    else:
        raise FormulaError(f"{path}: cannot tell the logic; pass --logic or add a '# logic: <id>' line")
    return parse(text, chosen), chosen


def _write(text: str, target: str | None, report: RunReport) -> None:
    if target:
        Path(target).write_text(text, encoding="utf-8")
        report.output = target
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_parse(args, report: RunReport) -> int:
    f, logic = read_formula(args.file, args.logic)
    print(render(f))
    report.verdict = logic.value
    return EXIT_OK


def cmd_classify(args, report: RunReport) -> int:
    f, logic = read_formula(args.file, args.logic)
    if logic.relational:
        raise FragmentError(f"fragments are defined for the temporal logics, not {logic.value}")
    cls = classify_fragment(f, logic)
    print(f"shape: {cls.shape.value}")
    for index, kind, var in cls.prop_quantifiers:
        print(f"prop {index} {kind} {var}")
    report.verdict = cls.shape.value
    return EXIT_OK


def cmd_eval(args, report: RunReport) -> int:
    f, logic = read_formula(args.file, args.logic)
    model_text = Path(args.model).read_text(encoding="utf-8")
    report.inputs.append(args.model)
    report.caps["path_bound"] = args.path_bound or get_settings().semantics.path_bound
    if logic.branching:
        k = parse_kripke(model_text)
        if logic.relational:
            verdict = eval_relational_branching(f, k, mple=logic is Logic.MPLE, depth_bound=args.depth_bound,
                                                path_bound=args.path_bound)
        else:
            verdict = eval_branching(f, k, path_bound=args.path_bound)
        print(verdict.value)
        report.verdict = verdict.value
        return {Verdict.TRUE: EXIT_OK, Verdict.FALSE: EXIT_NO}.get(verdict, EXIT_UNDECIDED)
    traces = parse_traceset(model_text)
    if logic.relational:
        holds = eval_relational_linear(f, traces, cap=args.cap_states)
    else:
        holds = eval_linear(f, traces, cap=args.cap_states)
    print("true" if holds else "false")
    report.verdict = "true" if holds else "false"
    if holds and not logic.relational:
        for var, t in (linear_witness(f, traces, cap=args.cap_states) or {}).items():
            print(f"{var}: " + dump_traceset(TraceSet(traces.aps, (t,))).splitlines()[1])
    return EXIT_OK if holds else EXIT_NO


def cmd_translate(args, report: RunReport) -> int:
    source, target = Logic.parse(getattr(args, "from")), Logic.parse(args.to)
    fn = TRANSLATIONS.get((source, target))
    if fn is None:
        known = ", ".join(f"{a.value}->{b.value}" for a, b in TRANSLATIONS)
        raise TranslationError(f"no translation {source.value}->{target.value}; known: {known}")
    f, _ = read_formula(args.file, source.value)
    aps = [a for a in args.aps.split(",") if a] if args.aps is not None else None
    if fn is hq:
        out = hq(f, aps)
    else:
        if aps is not None:
            report.warnings.append(f"--aps is ignored by {source.value}->{target.value}")
        out = fn(f)
    if fn is se:
        report.warnings.append(SE_REPAIR_NOTE)
    _write(render(out) + "\n", args.output, report)
    report.verdict = f"{source.value}->{target.value}"
    return EXIT_OK


def cmd_encode_2cm(args, report: RunReport) -> int:
    machine = parse_machine(Path(args.file).read_text(encoding="utf-8"))
    try:
        s0 = tuple(int(x) for x in args.start.split(","))
    except ValueError:
        raise ModelError(f"--start must be 'instruction,c1,c2', got {args.start!r}") from None
    if len(s0) != 3:
        raise ModelError(f"--start must be 'instruction,c1,c2', got {args.start!r}")
    _write(render(encode_2cm(machine, s0)) + "\n", args.output, report)
    report.verdict = "s1se"
    return EXIT_OK


def _emit_verdict(v: SatVerdict, target: str | None, report: RunReport) -> int:
    print(v.outcome.value + (f": {v.reason}" if v.reason else ""))
    if v.fragment:
        report.caps["fragment"] = v.fragment
    report.verdict = v.outcome.value if v.verified or v.outcome is not Outcome.SAT else "SAT-unverified"
    if v.witness is not None:
        text = dump_traceset(v.witness) if isinstance(v.witness, TraceSet) else dump_kripke(v.witness)
        _write(text, target, report)
    return v.exit_code


def cmd_sat(args, report: RunReport) -> int:
    f, logic = read_formula(args.file, args.logic)
    report.caps.update(state_cap=args.cap_states or get_settings().automata.state_cap,
                       max_depth=args.comb_depth or get_settings().comb.max_depth)
    v = decide(f, logic, cap=args.cap_states, max_states=args.max_states, max_depth=args.comb_depth)
    return _emit_verdict(v, args.witness, report)


def cmd_comb_demo(args, report: RunReport) -> int:
    f, logic = read_formula(args.file, args.logic or Logic.HYPERCTLSTAR.value)
    report.caps.update(max_states=args.max_states or get_settings().comb.max_states,
                       max_depth=args.max_depth or get_settings().comb.max_depth)
    v = demo_decide_exists(f, max_states=args.max_states, max_depth=args.max_depth)
    return _emit_verdict(v, args.emit_model, report)


def cmd_comb_cut(args, report: RunReport) -> int:
    c = parse_comb(Path(args.file).read_text(encoding="utf-8"))
    k, k2 = getattr(args, "from"), args.to
    if args.preserve is not None:
        out = preserving_cut(c, k, k2, args.preserve)
    else:
        out = cut(c, plan_cut(c, k, k2))
    _write(dump_comb(out), args.output, report)
    report.verdict = f"depth {c.depth}->{out.depth}"
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hlk", description="Hyperlogics: parse, evaluate, translate, decide.")
    ap.add_argument("-v", "--verbose", action="store_true", help="also log to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and print a formula")
    p.add_argument("--logic", help="logic id (default: header or file suffix)")
    p.add_argument("file")
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser("classify", help="print the quantifier shape")
    p.add_argument("--logic")
    p.add_argument("file")
    p.set_defaults(run=cmd_classify)

    p = sub.add_parser("eval", help="evaluate a formula on a model file")
    p.add_argument("--logic")
    p.add_argument("--model", required=True, help="trace-set or Kripke file")
    p.add_argument("--path-bound", type=int)
    p.add_argument("--depth-bound", type=int)
    p.add_argument("--cap-states", type=int)
    p.add_argument("file")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("translate", help="translate between logics")
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--aps", help="comma-separated propositions of the models (needed by foe->hyperqptl for = and <)")
    p.add_argument("-o", "--output")
    p.add_argument("file")
    p.set_defaults(run=cmd_translate)

    p = sub.add_parser("encode-2cm", help="S1S[E] halting formula of a two-counter machine")
    p.add_argument("--start", default="1,0,0", help="initial configuration 'instruction,c1,c2'")
    p.add_argument("-o", "--output")
    p.add_argument("file")
    p.set_defaults(run=cmd_encode_2cm)

    p = sub.add_parser("sat", help="decide satisfiability")
    p.add_argument("--logic")
    p.add_argument("--cap-states", type=int, help="complementation state cap")
    p.add_argument("--max-states", type=int, help="witness automaton size cap for the comb search")
    p.add_argument("--comb-depth", type=int)
    p.add_argument("--witness", help="write the witness model here")
    p.add_argument("file")
    p.set_defaults(run=cmd_sat)

    comb = sub.add_parser("comb", help="comb structures").add_subparsers(dest="comb_command", required=True)
    p = comb.add_parser("demo", help="bounded ∃* HyperCTL* satisfiability")
    p.add_argument("--logic")
    p.add_argument("--max-states", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--emit-model")
    p.add_argument("file")
    p.set_defaults(run=cmd_comb_demo)
    p = comb.add_parser("cut", help="cut a comb file between two levels")
    p.add_argument("--from", type=int, required=True)
    p.add_argument("--to", type=int, required=True)
    p.add_argument("--preserve", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("file")
    p.set_defaults(run=cmd_comb_cut)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(verbose=args.verbose)
    name = args.command + (f" {args.comb_command}" if args.command == "comb" else "")
    report = RunReport(name, [args.file])
    start = time.perf_counter()
    try:
        code = args.run(args, report)
    except CapExceeded as e:
        print("undecided")
        report.verdict, code = "undecided", EXIT_UNDECIDED
        report.warnings.append(str(e))
    except (FormulaError, ModelError, TranslationError, FragmentError, CombError, AutomatonError, OSError) as e:
        logger.error(f"[cli] {name}: {e}")
        report.verdict, code = "error", EXIT_ERROR
        report.warnings.append(str(e))
    report.elapsed_ms = round((time.perf_counter() - start) * 1000)
    print(report.line(), file=sys.stderr)
    return code
