"""End-to-end certification of unique solutions and pre-equation bounds.

A certificate records every premise that was established (guardedness,
divergence analysis, solution checks) and the conclusion drawn from them.
Its canonical JSON form has sorted keys and no timings, so equal inputs give
byte-identical certificates.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .desugar import desugar_values
from .divergence import (
    ALL_INNOCUOUS, DIVERGENCE_FREE, NON_INNOCUOUS,
    CRITERION_PROBE, analyze_divergences, syntactic_criterion,
)
from .equations import (
    EquationSystem, GuardReport, check_guardedness, syntactic_solution, unfold,
)
from .equiv import (
    FAILS, HOLDS, TRACE_EQ, TRACE_INCL, WEAK_BISIM, WEAK_SIM,
    EquivResult, UnsupportedRelationError, check_solution, decide, normalise_relation,
)
from .lts import Env, UnguardedRecursionError, default_bound
from .parser import CCSError, Program, parse_term
from .terms import ConstRef, NameCaptureWarning, Term, substitute

SCHEMA = "usol-cert/1"

CERTIFIED_EQUAL = "certified-equal"
CERTIFIED_BELOW = "certified-below-syntactic-solution"
CERTIFIED_ABOVE = "certified-above-syntactic-solution"
REFUSED = "refused"
UNKNOWN = "unknown"

THM_DIVERGENCE_FREE = "unique-solution/divergence-free"
THM_INNOCUOUS = "unique-solution/innocuous-divergences"
THM_MILNER = "unique-solution/strongly-guarded-sequential"
THM_TRACE = "unique-solution/trace-equivalence/innocuous-divergences"
THM_PRE_MAX = "pre-equation/syntactic-solution-is-maximal"
THM_PRE_MIN = "pre-equation/syntactic-solution-is-minimal"

SOLUTION = "#sol"

# exploration budgets for evidence that is recorded but not needed for a verdict
CROSS_CHECK_BOUND = 300


class CertificationError(ValueError):
    """Bad request: unknown system or candidates, wrong arity, bad relation."""


@dataclass
class Config:
    max_states: int | None = None
    max_unfold: int = 8
    cross_check: bool = True

    @property
    def bound(self) -> int:
        return self.max_states or default_bound()

    def to_dict(self) -> dict:
        return {"max_states": self.bound, "max_unfold": self.max_unfold,
                "cross_check": self.cross_check}


@dataclass
class Certificate:
    kind: str
    system: str
    relation: str
    verdict: str
    reason: str = ""
    theorem: str | None = None
    conclusion: dict | None = None
    guard: dict | None = None
    milner: dict | None = None
    divergence: dict | None = None
    candidates: list[dict] = field(default_factory=list)
    solution_checks: list[dict] = field(default_factory=list)
    cross_checks: list[dict] = field(default_factory=list)
    failed_premise: dict | None = None
    config: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict.startswith("certified")

    @property
    def exit_code(self) -> int:
        if self.certified:
            return 0
        return 1 if self.verdict == REFUSED else 2

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "schema": SCHEMA,
            "kind": self.kind,
            "system": self.system,
            "relation": self.relation,
            "verdict": self.verdict,
            "reason": self.reason,
            "theorem": self.theorem,
            "conclusion": self.conclusion,
            "premises": {
                "guard": self.guard,
                "milner": self.milner,
                "divergence": self.divergence,
                "solution_checks": self.solution_checks,
            },
            "candidates": self.candidates,
            "cross_checks": self.cross_checks,
            "failed_premise": self.failed_premise,
            "config": self.config,
        }
        if timing:
            out["stats"] = self.stats
        return out

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [f"system {self.system}: {self.verdict}" + (f" ({self.reason})" if self.reason else "")]
        if self.guard:
            lines.append(f"  guard route: {self.guard['route']}")
        if self.divergence:
            lines.append(f"  divergence route: {self.divergence.get('route')} "
                         f"[{self.divergence.get('class')}]")
        if self.milner and self.milner.get("applicable"):
            lines.append("  strongly guarded and sequential: classical route also applies")
        for chk in self.solution_checks:
            lines.append(f"  {chk['candidate']}.{chk['equation']}: {chk['verdict']}")
        for chk in self.cross_checks:
            lines.append(f"  cross-check {chk['what']}: {chk['verdict']}")
        if self.theorem:
            lines.append(f"  theorem: {self.theorem}")
        if self.failed_premise:
            lines.append(f"  failed premise: {self.failed_premise['premise']}")
        return "\n".join(lines)


# -- shared pipeline pieces ---------------------------------------------------


def _prepare(program: Program, system_name: str) -> tuple[Program, EquationSystem, Env]:
    prog = desugar_values(program)
    try:
        system = prog.equation_system(system_name)
    except KeyError:
        raise CertificationError(f"unknown system {system_name!r}") from None
    return prog, system, Env.from_program(prog)


def _resolve_candidates(prog: Program, system: EquationSystem, spec) -> tuple[str, tuple[Term, ...]]:
    if isinstance(spec, str):
        try:
            decl = prog.candidate(spec)
        except KeyError:
            decl = None
        if decl is not None:
            if decl.system != system.name:
                raise CertificationError(f"candidates {spec} are declared for system {decl.system}")
            terms = decl.processes
        elif len(system) == 1 and any(c.name == spec for c in prog.constants):
            terms = (ConstRef(spec),)
        else:
            raise CertificationError(f"unknown candidates {spec!r}")
        name = spec
    else:
        terms = tuple(spec)
        name = "(" + ", ".join(t.key for t in terms) + ")"
    if len(terms) != len(system):
        raise CertificationError(
            f"candidates {name} have {len(terms)} components, system {system.name} has {len(system)} equations"
        )
    return name, tuple(terms)


def _guard_premise(system: EquationSystem, max_unfold: int) -> tuple[GuardReport, dict, EquationSystem | None]:
    report = check_guardedness(system, max_unfold)
    info = report.to_dict()
    if report.guarded:
        info["route"] = "syntactic"
        return report, info, system
    if report.depth is not None:
        info["route"] = f"unfolded({report.depth})"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NameCaptureWarning)
            work = unfold(system, report.depth)
        return report, info, work
    info["route"] = None
    return report, info, None


def _guard_failure(report: GuardReport) -> dict:
    occ = [
        {"equation": o.equation, "variable": o.variable, "path": list(o.path)}
        for o in report.unguarded()
    ]
    return {"premise": "guardedness",
            "witness": {"unguarded_occurrences": occ, "max_unfold": report.max_unfold}}


def _divergence_premise(work: EquationSystem, system: EquationSystem, env: Env, cfg: Config,
                        milner_ok: bool):
    """Returns (info dict, syntactic solution, failure or None, unknown reason or None)."""
    crit = syntactic_criterion(work, cfg.max_unfold, env)
    sol = syntactic_solution(work, taken=env.defs, source=system)
    bound = min(cfg.bound, CRITERION_PROBE) if crit.satisfied else cfg.bound
    rep = analyze_divergences(sol, bound, env, use_criterion=False, max_unfold=cfg.max_unfold)
    info = rep.to_dict()
    info["criterion"] = crit.to_dict()
    info["exploration_bound"] = bound
    info["solution_constants"] = list(sol.names)
    if rep.cls == NON_INNOCUOUS:
        info["route"] = None
        return info, sol, {"premise": "divergence", "witness": info.get("witness")}, None
    if rep.cls == DIVERGENCE_FREE:
        info["route"] = "divergence-free"
    elif rep.cls == ALL_INNOCUOUS:
        info["route"] = "innocuous-only"
    elif crit.satisfied:
        info["route"] = "syntactic-criterion"
        info["class"] = ALL_INNOCUOUS
        info["basis"] = "syntactic-criterion"
    elif milner_ok:
        info["route"] = "milner-sequential"
    else:
        info["route"] = None
        return info, sol, None, f"divergence analysis truncated at {bound} states"
    return info, sol, None, None


def _check_record(label: str, res: EquivResult) -> dict:
    out = {"candidate": label, "equation": res.stats.get("equation"), **res.to_dict()}
    out["stats"] = {k: v for k, v in out["stats"].items() if k != "equation"}
    return out


def _theorem(route: str, relation: str) -> str:
    if route == "milner-sequential":
        return THM_MILNER
    if relation == TRACE_EQ:
        return THM_TRACE
    return THM_DIVERGENCE_FREE if route == "divergence-free" else THM_INNOCUOUS


# -- unique solutions ---------------------------------------------------------


def certify_unique_solution(program: Program, system_name: str, candidates: Sequence,
                            relation: str = WEAK_BISIM, config: Config | None = None) -> Certificate:
    """Certify that the candidate tuples are solutions and hence equivalent.

    ``candidates`` holds one or two entries; each entry is the name of a
    ``candidates`` declaration (or, for one-equation systems, of a constant)
    or a tuple of terms. With one entry the conclusion relates it to the
    syntactic solution.
    """
    t0 = time.perf_counter()
    cfg = config or Config()
    relation = normalise_relation(relation)
    if relation not in (WEAK_BISIM, TRACE_EQ):
        raise UnsupportedRelationError("unique solutions are certified for weak-bisim or trace-eq")
    if not 1 <= len(candidates) <= 2:
        raise CertificationError("give one or two candidate tuples")
    prog, system, env = _prepare(program, system_name)
    tuples = [_resolve_candidates(prog, system, c) for c in candidates]
    cert = Certificate("unique-solution", system.name, relation, UNKNOWN, config=cfg.to_dict())
    cert.candidates = [{"name": n, "processes": [t.key for t in ts]} for n, ts in tuples]

    def done() -> Certificate:
        cert.stats["seconds"] = round(time.perf_counter() - t0, 6)
        return cert

    report, cert.guard, work = _guard_premise(system, cfg.max_unfold)
    milner_ok = report.milner_applicable
    cert.milner = {"applicable": milner_ok, "used": False}
    if work is None:
        cert.verdict, cert.reason = REFUSED, "guardedness"
        cert.failed_premise = _guard_failure(report)
        return done()

    info, sol, failure, unknown = _divergence_premise(work, system, env, cfg, milner_ok)
    cert.divergence = info
    if failure is not None:
        cert.verdict, cert.reason, cert.failed_premise = REFUSED, "non-innocuous divergence", failure
        return done()
    if unknown is not None:
        cert.verdict, cert.reason = UNKNOWN, unknown
        return done()
    if info["route"] == "milner-sequential":
        cert.milner["used"] = True

    full_env = env.with_solution(sol)
    pending = None
    for name, terms in tuples:
        for res in check_solution(system, terms, relation, cfg.bound, full_env):
            rec = _check_record(name, res)
            cert.solution_checks.append(rec)
            if res.fails and cert.failed_premise is None:
                cert.failed_premise = {"premise": "solution", "candidate": name,
                                       "equation": rec["equation"], "witness": res.witness}
            elif res.unknown and pending is None:
                pending = f"solution check {name}.{rec['equation']} truncated"
    if cert.failed_premise is not None:
        cert.verdict, cert.reason = REFUSED, "candidate is not a solution"
        return done()
    if pending is not None:
        cert.verdict, cert.reason = UNKNOWN, pending
        return done()

    cert.verdict = CERTIFIED_EQUAL
    cert.theorem = _theorem(info["route"], relation)
    lhs = tuples[0]
    if len(tuples) == 2:
        rhs_name, rhs_terms = tuples[1]
    else:
        rhs_name, rhs_terms = "syntactic-solution", tuple(sol.refs())
    cert.conclusion = {
        "relation": relation,
        "pairs": [{"equation": v, "lhs": a.key, "rhs": b.key}
                  for v, a, b in zip(system.variables, lhs[1], rhs_terms)],
        "lhs": lhs[0],
        "rhs": rhs_name,
    }
    if cfg.cross_check:
        probe = min(cfg.bound, CROSS_CHECK_BOUND)
        for v, a, b in zip(system.variables, lhs[1], rhs_terms):
            res = decide(relation, a, b, probe, full_env)
            if res.unknown:
                continue
            cert.cross_checks.append({"what": f"{lhs[0]}.{v} vs {rhs_name}.{v}",
                                      "verdict": res.verdict})
    return done()


# -- pre-equations ------------------------------------------------------------


def certify_preorder(program: Program, system_name: str, candidate, direction: str = "max",
                     preorder: str = TRACE_INCL, config: Config | None = None) -> Certificate:
    """Bound a candidate by the syntactic solution of a one-equation system.

    ``max``: from ``x <= E[x]`` conclude ``x <= Ksol`` (needs guardedness and
    innocuous divergences). ``min``: from ``E[x] <= x`` conclude ``Ksol <= x``
    (no divergence premise). ``candidate`` is a term, a constant or candidate
    name, or ``"#sol"`` for the syntactic solution itself.
    """
    t0 = time.perf_counter()
    cfg = config or Config()
    preorder = normalise_relation(preorder)
    if preorder not in (TRACE_INCL, WEAK_SIM):
        raise UnsupportedRelationError("pre-equations are certified for trace-incl or weak-sim")
    if direction not in ("max", "min"):
        raise CertificationError("direction must be max or min")
    prog, system, env = _prepare(program, system_name)
    if len(system) != 1:
        raise CertificationError("pre-equations are supported for one-equation systems only")
    cert = Certificate(f"preorder-{direction}", system.name, preorder, UNKNOWN, config=cfg.to_dict())

    def done() -> Certificate:
        cert.stats["seconds"] = round(time.perf_counter() - t0, 6)
        return cert

    report, cert.guard, work = _guard_premise(system, cfg.max_unfold)
    cert.milner = {"applicable": report.milner_applicable, "used": False}
    if work is None:
        cert.verdict, cert.reason = REFUSED, "guardedness"
        cert.failed_premise = _guard_failure(report)
        return done()

    if direction == "max":
        info, sol, failure, unknown = _divergence_premise(work, system, env, cfg, report.milner_applicable)
        cert.divergence = info
        if failure is not None:
            cert.verdict, cert.reason, cert.failed_premise = REFUSED, "non-innocuous divergence", failure
            return done()
        if unknown is not None:
            cert.verdict, cert.reason = UNKNOWN, unknown
            return done()
    else:
        sol = syntactic_solution(work, taken=env.defs, source=system)
    full_env = env.with_solution(sol)
    ksol = sol.refs()[0]

    if isinstance(candidate, str) and candidate == SOLUTION:
        cand, cand_name = ksol, SOLUTION
    elif isinstance(candidate, str):
        cand_name, terms = _resolve_candidates(prog, system, candidate)
        cand = terms[0]
    else:
        cand, cand_name = candidate, candidate.key
    cert.candidates = [{"name": cand_name, "processes": [cand.key]}]

    # the premise is checked against the original body; for an unfolded system
    # x <= E[x] gives x <= E^k[x] because both preorders are precongruences
    image = substitute(system.bodies[0], {system.variables[0]: cand})
    lhs, rhs = (cand, image) if direction == "max" else (image, cand)
    res = decide(preorder, lhs, rhs, cfg.bound, full_env)
    res.stats["equation"] = system.variables[0]
    rec = _check_record(cand_name, res)
    rec["direction"] = "candidate <= body" if direction == "max" else "body <= candidate"
    cert.solution_checks.append(rec)
    if res.fails:
        cert.verdict, cert.reason = REFUSED, "pre-equation premise fails"
        cert.failed_premise = {"premise": "solution", "candidate": cand_name,
                               "equation": system.variables[0], "witness": res.witness}
        return done()
    if not res.holds:
        cert.verdict, cert.reason = UNKNOWN, "pre-equation premise truncated"
        return done()

    if direction == "max":
        cert.verdict, cert.theorem = CERTIFIED_BELOW, THM_PRE_MAX
        pair = (cand, ksol)
    else:
        cert.verdict, cert.theorem = CERTIFIED_ABOVE, THM_PRE_MIN
        pair = (ksol, cand)
    cert.conclusion = {"relation": preorder, "lhs": pair[0].key, "rhs": pair[1].key}
    if cfg.cross_check:
        probe = min(cfg.bound, CROSS_CHECK_BOUND)
        direct = decide(preorder, pair[0], pair[1], probe, full_env)
        if not direct.unknown:
            cert.cross_checks.append({"what": f"{pair[0].key} <= {pair[1].key}",
                                      "verdict": direct.verdict})
    return done()


# -- replay -------------------------------------------------------------------


def _recorded_candidate(entry: dict, program: Program, kind: str):
    name = entry["name"]
    if name == SOLUTION or any(c.name == name for c in program.constants):
        return name
    try:
        program.candidate(name)
        return name
    except KeyError:
        pass
    terms = tuple(parse_term(p) for p in entry["processes"])
    return terms[0] if kind.startswith("preorder") else terms


@dataclass
class ReplayReport:
    ok: bool
    mismatches: list[str]


def replay(cert: dict | Certificate, program: Program, candidates: Sequence | None = None) -> ReplayReport:
    """Re-execute every premise recorded in a certificate and compare.

    The certificate's own config is used. Candidates that were given as
    terms are rebuilt from the recorded process keys unless ``candidates``
    is passed.
    """
    data = cert.to_dict() if isinstance(cert, Certificate) else cert
    problems: list[str] = []
    if data.get("schema") != SCHEMA:
        return ReplayReport(False, [f"unsupported schema {data.get('schema')!r}"])
    cfg = Config(data["config"]["max_states"], data["config"]["max_unfold"],
                 data["config"].get("cross_check", True))
    try:
        names = candidates or [_recorded_candidate(c, program, data["kind"]) for c in data["candidates"]]
    except CCSError as exc:
        return ReplayReport(False, [f"cannot rebuild candidate: {exc}"])
    try:
        if data["kind"] == "unique-solution":
            again = certify_unique_solution(program, data["system"], names, data["relation"], cfg)
        else:
            direction = data["kind"].split("-", 1)[1]
            cand = names[0]
            again = certify_preorder(program, data["system"], cand, direction, data["relation"], cfg)
    except (CertificationError, UnsupportedRelationError, UnguardedRecursionError) as exc:
        return ReplayReport(False, [f"replay failed: {exc}"])
    fresh = again.to_dict()
    for key in ("verdict", "theorem", "conclusion", "failed_premise"):
        if fresh[key] != data[key]:
            problems.append(f"{key} differs")
    for key in ("guard", "milner", "divergence"):
        if fresh["premises"][key] != data["premises"][key]:
            problems.append(f"premise {key} differs")
    old_checks = data["premises"]["solution_checks"]
    new_checks = fresh["premises"]["solution_checks"]
    if len(old_checks) != len(new_checks):
        problems.append("number of solution checks differs")
    for old, new in zip(old_checks, new_checks):
        if (old["candidate"], old["equation"], old["verdict"]) != (new["candidate"], new["equation"], new["verdict"]):
            problems.append(f"solution check {old['candidate']}.{old['equation']} differs")
    for chk in fresh["cross_checks"]:
        if chk["verdict"] == FAILS:
            problems.append(f"cross-check {chk['what']} contradicts the conclusion")
    if data["verdict"].startswith("certified"):
        prem = data["premises"]
        if not prem["guard"] or not prem["guard"].get("route"):
            problems.append("certified without a guard route")
        if data["kind"] != "preorder-min" and not (prem["divergence"] or {}).get("route"):
            problems.append("certified without a divergence route")
        if not prem["solution_checks"] or any(c["verdict"] != HOLDS for c in prem["solution_checks"]):
            problems.append("certified without all solution checks holding")
    return ReplayReport(not problems, problems)
