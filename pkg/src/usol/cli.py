"""Command-line interface.

Exit codes: 0 certified/holds, 1 refused/fails, 2 unknown (truncated),
3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import certify as cert_mod
from .desugar import desugar_values
from .divergence import (
    ALL_INNOCUOUS, DIVERGENCE_FREE, NON_INNOCUOUS, analyze_divergences, syntactic_criterion,
)
from .equations import check_guardedness, syntactic_solution, unfold
from .equiv import UnsupportedRelationError, decide
from .lts import Env, UnguardedRecursionError, UnknownConstantError, explore
from .parser import CCSError, Program, parse_process, parse_program
from .terms import NameCaptureWarning

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3


class InputError(Exception):
    pass


def _load(path: str) -> Program:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return parse_program(text)
    except CCSError as exc:
        raise InputError("\n".join(f"{path}:{d}" for d in exc.diagnostics)) from None


def _term(text: str, program: Program):
    try:
        return parse_process(text, program)
    except CCSError as exc:
        raise InputError("\n".join(f"<term>:{d}" for d in exc.diagnostics)) from None


def _system(program: Program, name: str):
    try:
        return program.equation_system(name)
    except KeyError:
        raise InputError(f"unknown system {name!r}") from None


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def _config(args) -> cert_mod.Config:
    return cert_mod.Config(args.max_states, args.max_unfold, not args.no_cross_check)


# -- subcommands --------------------------------------------------------------


def cmd_parse(args) -> int:
    program = _load(args.file)
    pure = desugar_values(program)
    print(program, end="")
    print(f"-- {len(pure.constants)} constants, {len(pure.systems)} systems, "
          f"{len(pure.candidates)} candidate tuples after desugaring")
    return EXIT_OK


def cmd_lts(args) -> int:
    program = _load(args.file)
    pure = desugar_values(program)
    env = Env.from_program(pure)
    lts = explore(_term(args.term, program), args.max_states, env)
    _write(args.dot, lts.to_dot())
    _write(args.json, lts.to_json() + "\n")
    status = "complete" if lts.complete else f"truncated at {lts.limit} states"
    print(f"{lts.num_states} states, {lts.num_transitions} transitions, {status}")
    if args.show:
        for t in lts.edges():
            extra = f" [{t.count}]" if t.count else ""
            print(f"  {t.src} --{t.label}{extra}--> {t.dst}")
    return EXIT_OK if lts.complete else EXIT_UNKNOWN


def cmd_equiv(args) -> int:
    program = _load(args.file)
    env = Env.from_program(desugar_values(program))
    res = decide(args.rel, _term(args.lhs, program), _term(args.rhs, program), args.max_states, env)
    print(f"{res.relation}: {res.verdict}" + (f" ({res.reason})" if res.reason else ""))
    if res.witness:
        print(json.dumps(res.witness, indent=2))
    return {"holds": EXIT_OK, "fails": EXIT_FAIL}.get(res.verdict, EXIT_UNKNOWN)


def cmd_unfold(args) -> int:
    program = desugar_values(_load(args.file))
    system = _system(program, args.system)
    if args.n < 1:
        raise InputError("-n must be at least 1")
    print(unfold(system, args.n))
    rep = check_guardedness(unfold(system, args.n), args.max_unfold)
    print(f"-- guarded: {rep.guarded}, strongly guarded: {rep.strongly_guarded}, "
          f"sequential: {rep.sequential}")
    return EXIT_OK


def cmd_diverge(args) -> int:
    program = desugar_values(_load(args.file))
    system = _system(program, args.system)
    env = Env.from_program(program)
    guard = check_guardedness(system, args.max_unfold)
    if not guard.guarded:
        if guard.depth is None:
            print(f"system {system.name} is not guarded within {args.max_unfold} unfoldings")
            return EXIT_FAIL
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NameCaptureWarning)
            system = unfold(system, guard.depth)
        print(f"-- using unfolding {guard.depth}")
    crit = syntactic_criterion(system, args.max_unfold, env)
    print(f"syntactic criterion: {'satisfied' if crit.satisfied else 'not satisfied'}")
    sol = syntactic_solution(system, taken=env.defs)
    rep = analyze_divergences(sol, args.max_states, env, max_unfold=args.max_unfold)
    print(f"divergences: {rep.cls}" + (f" (basis: {rep.basis})" if rep.basis else ""))
    for row in rep.equations:
        state = "complete" if row["complete"] else "truncated"
        print(f"  {row['variable']}: {row['class']}, {row['states']} states, {state}")
    if rep.witness is not None:
        print(f"witness: {rep.witness}")
        print(json.dumps(rep.witness.to_dict(), indent=2))
    elif rep.zero_cycle is not None:
        print(f"innocuous cycle: {rep.zero_cycle}")
    if rep.cls == NON_INNOCUOUS:
        return EXIT_FAIL
    return EXIT_OK if rep.cls in (DIVERGENCE_FREE, ALL_INNOCUOUS) else EXIT_UNKNOWN


def _emit_certificate(args, cert) -> int:
    print(cert.summary())
    text = cert.to_json()
    if args.cert:
        _write(args.cert, text)
    if args.print_cert:
        print(text, end="")
    return cert.exit_code


def cmd_check(args) -> int:
    program = _load(args.file)
    names = [c.strip() for c in args.candidates.split(",") if c.strip()]
    cert = cert_mod.certify_unique_solution(program, args.system, names, args.rel, _config(args))
    return _emit_certificate(args, cert)


def cmd_preorder(args) -> int:
    program = _load(args.file)
    cand = args.candidate
    if cand != cert_mod.SOLUTION:
        try:
            program.candidate(cand)
        except KeyError:
            if not any(c.name == cand for c in program.constants):
                cand = _term(cand, program)
    cert = cert_mod.certify_preorder(program, args.system, cand, args.direction, args.rel, _config(args))
    return _emit_certificate(args, cert)


def cmd_replay(args) -> int:
    program = _load(args.file)
    try:
        data = json.loads(Path(args.cert_file).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"{args.cert_file}: {exc}") from None
    report = cert_mod.replay(data, program)
    if report.ok:
        print("certificate replayed: all premises re-established")
        return EXIT_OK
    for m in report.mismatches:
        print(f"mismatch: {m}")
    return EXIT_FAIL


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="usol", description="Unique-solution checks for CCS equations.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, unfold_opt=True):
        p.add_argument("file")
        p.add_argument("--max-states", type=int, default=None,
                       help="exploration bound (default: $USOL_MAX_STATES or 100000)")
        if unfold_opt:
            p.add_argument("--max-unfold", type=int, default=8)

    p = sub.add_parser("parse", help="parse and validate a program")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("lts", help="explore the LTS of a term")
    common(p, unfold_opt=False)
    p.add_argument("--term", required=True)
    p.add_argument("--dot")
    p.add_argument("--json")
    p.add_argument("--show", action="store_true", help="list transitions")
    p.set_defaults(func=cmd_lts)

    p = sub.add_parser("equiv", help="decide a behavioural relation between two terms")
    common(p, unfold_opt=False)
    p.add_argument("--lhs", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--rel", default="bisim")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("unfold", help="print the n-th unfolding of a system")
    p.add_argument("file")
    p.add_argument("--system", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--max-unfold", type=int, default=8)
    p.set_defaults(func=cmd_unfold)

    p = sub.add_parser("diverge", help="classify the divergences of a syntactic solution")
    common(p)
    p.add_argument("--system", required=True)
    p.set_defaults(func=cmd_diverge)

    def cert_opts(p):
        p.add_argument("--cert", help="write the JSON certificate here")
        p.add_argument("--print-cert", action="store_true", help="also print the JSON certificate")
        p.add_argument("--no-cross-check", action="store_true")

    p = sub.add_parser("check", help="certify that candidate tuples are the unique solution")
    common(p)
    p.add_argument("--system", required=True)
    p.add_argument("--candidates", required=True, help="C1 or C1,C2")
    p.add_argument("--rel", default="bisim")
    cert_opts(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("preorder", help="bound a candidate by the syntactic solution")
    common(p)
    p.add_argument("--system", required=True)
    p.add_argument("--candidate", required=True, help="name, term, or '#sol'")
    p.add_argument("--direction", choices=("max", "min"), default="max")
    p.add_argument("--rel", default="trace-incl")
    cert_opts(p)
    p.set_defaults(func=cmd_preorder)

    p = sub.add_parser("replay", help="re-execute the premises of a certificate")
    p.add_argument("file")
    p.add_argument("cert_file")
    p.set_defaults(func=cmd_replay)
    return ap


def run_cli(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (CCSError, cert_mod.CertificationError, UnsupportedRelationError,
            UnknownConstantError, UnguardedRecursionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


def main() -> None:
    sys.exit(run_cli())
