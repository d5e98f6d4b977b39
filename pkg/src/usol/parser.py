"""Concrete syntax for CCS programs.

Grammar (precedence, loosest first: ``+``, ``|``, restriction, prefix)::

    program    := decl*
    decl       := 'const' CNAME params? '=' proc ';'
                | 'chan' name ':' INT '..' INT ';'
                | 'system' CNAME '{' (CNAME params? '=' proc ';')* '}'
                | 'candidates' CNAME 'for' CNAME '=' '(' proc (',' proc)* ')' ';'
    proc       := par ('+' par)*
    par        := res ('|' res)*
    res        := 'new' names 'in' res | '(^' names ')' res | prefix
    prefix     := action ('.' res)? | atom
    action     := name | "'" name | 'tau' | name '<' iexpr '>' | "'" name '<' iexpr '>'
                | name '(' name (':' INT '..' INT)? ')'
    atom       := '0' | CNAME ('(' iexpr (',' iexpr)* ')')? | '(' proc ')'

Line comments start with ``--``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .terms import (
    IN, NIL, OUT, TAU_ACTION, Action, ConstRef, IndexedPrefix, IntExpr, IntLit,
    IntOp, IntRef, Nil, Par, Prefix, PREFIX_LIKE, Res, Span, Sum, Term,
    ValueInput, Var, int_vars, make_sum, rebuild,
)

KEYWORDS = {"const", "system", "candidates", "for", "new", "in", "tau", "chan"}


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    span: Span | None = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.kind}: {self.message}"


class CCSError(Exception):
    """Raised with one or more diagnostics when input is rejected."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        super().__init__("; ".join(map(str, self.diagnostics)))


@dataclass(frozen=True)
class Param:
    name: str
    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def __str__(self) -> str:
        return f"{self.name}: {self.lo}..{self.hi}"


@dataclass(frozen=True)
class ConstDef:
    name: str
    params: tuple[Param, ...]
    body: Term
    span: Span | None = field(default=None, compare=False)

    def __str__(self) -> str:
        ps = f"({', '.join(map(str, self.params))})" if self.params else ""
        return f"const {self.name}{ps} = {self.body} ;"


@dataclass(frozen=True)
class ChannelDecl:
    name: str
    lo: int
    hi: int
    span: Span | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"chan {self.name} : {self.lo}..{self.hi} ;"


@dataclass(frozen=True)
class EquationDecl:
    var: str
    params: tuple[Param, ...]
    body: Term
    span: Span | None = field(default=None, compare=False)

    def __str__(self) -> str:
        ps = f"({', '.join(map(str, self.params))})" if self.params else ""
        return f"{self.var}{ps} = {self.body} ;"


@dataclass(frozen=True)
class SystemDecl:
    name: str
    equations: tuple[EquationDecl, ...]
    span: Span | None = field(default=None, compare=False)

    def expanded_variables(self) -> list[str]:
        names = []
        for eq in self.equations:
            if not eq.params:
                names.append(eq.var)
                continue
            for combo in _domain_product(eq.params):
                names.append(indexed_name(eq.var, combo))
        return names

    def __str__(self) -> str:
        body = " ".join(str(e) for e in self.equations)
        return f"system {self.name} {{ {body} }}"


@dataclass(frozen=True)
class CandidateDecl:
    name: str
    system: str
    processes: tuple[Term, ...]
    span: Span | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"candidates {self.name} for {self.system} = ({', '.join(map(str, self.processes))}) ;"


@dataclass(frozen=True)
class Program:
    constants: tuple[ConstDef, ...] = ()
    systems: tuple[SystemDecl, ...] = ()
    candidates: tuple[CandidateDecl, ...] = ()
    channels: tuple[ChannelDecl, ...] = ()

    def constant(self, name: str) -> ConstDef:
        for c in self.constants:
            if c.name == name:
                return c
        raise KeyError(name)

    def system_decl(self, name: str) -> SystemDecl:
        for s in self.systems:
            if s.name == name:
                return s
        raise KeyError(name)

    def candidate(self, name: str) -> CandidateDecl:
        for c in self.candidates:
            if c.name == name:
                return c
        raise KeyError(name)

    def channel(self, name: str) -> ChannelDecl | None:
        for c in self.channels:
            if c.name == name:
                return c
        return None

    @property
    def is_pure(self) -> bool:
        if any(c.params for c in self.constants):
            return False
        if any(eq.params for s in self.systems for eq in s.equations):
            return False
        terms = [c.body for c in self.constants]
        terms += [eq.body for s in self.systems for eq in s.equations]
        terms += [p for c in self.candidates for p in c.processes]
        return all(_is_pure_term(t) for t in terms)

    def equation_system(self, name: str):
        """The named system as an :class:`~usol.equations.EquationSystem`."""
        from .equations import EquationSystem

        decl = self.system_decl(name)
        if any(eq.params for eq in decl.equations):
            raise ValueError(f"system {name} is parametrised; desugar the program first")
        return EquationSystem(
            tuple(eq.var for eq in decl.equations),
            tuple(eq.body for eq in decl.equations),
            name=name,
        )

    def definitions(self) -> dict[str, Term]:
        """Constant name to body, for pure programs."""
        out: dict[str, Term] = {}
        for c in self.constants:
            if c.params:
                raise ValueError(f"constant {c.name} is parametrised; desugar first")
            out[c.name] = c.body
        return out

    def __str__(self) -> str:
        lines = [str(c) for c in self.channels]
        lines += [str(c) for c in self.constants]
        lines += [str(s) for s in self.systems]
        lines += [str(c) for c in self.candidates]
        return "\n".join(lines) + ("\n" if lines else "")


def _is_pure_term(t: Term) -> bool:
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, (ValueInput, IndexedPrefix)):
            return False
        if isinstance(x, (ConstRef, Var)) and x.args:
            return False
        stack.extend(x.children())
    return True


def indexed_name(base: str, values: Iterable[int]) -> str:
    return "_".join([base, *map(str, values)])


def _domain_product(params: tuple[Param, ...]):
    combos: list[tuple[int, ...]] = [()]
    for p in params:
        combos = [c + (v,) for c in combos for v in range(p.lo, p.hi + 1)]
    return combos


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<lname>[a-z][A-Za-z0-9_]*)
  | (?P<uname>[A-Z][A-Za-z0-9_]*)
  | (?P<sym>\.\.|[.+|(),;='<>:^{}\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int, lname, uname, kw, sym, eof
    text: str
    span: Span


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        span = Span(line, pos - line_start + 1)
        if m is None:
            raise CCSError([Diagnostic("lexical error", f"unexpected character {text[pos]!r}", span)])
        kind = m.lastgroup
        tok = m.group()
        if kind == "lname" and tok in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok, span))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            line_start = pos + tok.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, pos - line_start + 1)))
    return tokens


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self._describe(self.tok)}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            self.fail(f"expected {what}, found {self._describe(self.tok)}")
        return self.advance()

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def fail(self, msg: str, span: Span | None = None, kind: str = "syntax error"):
        raise CCSError([Diagnostic(kind, msg, span or self.tok.span)])

    # program level
    def program(self) -> Program:
        consts, systems, cands, chans = [], [], [], []
        while self.tok.kind != "eof":
            if self.at("const"):
                consts.append(self.const_decl())
            elif self.at("system"):
                systems.append(self.system_decl())
            elif self.at("candidates"):
                cands.append(self.candidates_decl())
            elif self.at("chan"):
                chans.append(self.chan_decl())
            else:
                self.fail(f"expected a declaration, found {self._describe(self.tok)}")
        return Program(tuple(consts), tuple(systems), tuple(cands), tuple(chans))

    def const_decl(self) -> ConstDef:
        span = self.expect("const").span
        name = self.expect_kind("uname", "constant name").text
        params = self.params()
        self.expect("=")
        body = self.proc()
        self.expect(";")
        return ConstDef(name, params, body, span)

    def chan_decl(self) -> ChannelDecl:
        span = self.expect("chan").span
        name = self.expect_kind("lname", "channel name").text
        self.expect(":")
        lo, hi = self.domain()
        self.expect(";")
        return ChannelDecl(name, lo, hi, span)

    def system_decl(self) -> SystemDecl:
        span = self.expect("system").span
        name = self.expect_kind("uname", "system name").text
        self.expect("{")
        eqs = []
        while not self.at("}"):
            espan = self.tok.span
            var = self.expect_kind("uname", "equation variable").text
            params = self.params()
            self.expect("=")
            body = self.proc()
            self.expect(";")
            eqs.append(EquationDecl(var, params, body, espan))
        self.expect("}")
        self.expect_optional(";")
        variables = {e.var for e in eqs}
        eqs = [EquationDecl(e.var, e.params, _bind_vars(e.body, variables), e.span) for e in eqs]
        return SystemDecl(name, tuple(eqs), span)

    def candidates_decl(self) -> CandidateDecl:
        span = self.expect("candidates").span
        name = self.expect_kind("uname", "candidates name").text
        self.expect("for")
        system = self.expect_kind("uname", "system name").text
        self.expect("=")
        self.expect("(")
        procs = [self.proc()]
        while self.at(","):
            self.advance()
            procs.append(self.proc())
        self.expect(")")
        self.expect(";")
        return CandidateDecl(name, system, tuple(procs), span)

    def expect_optional(self, text: str) -> None:
        if self.at(text):
            self.advance()

    def params(self) -> tuple[Param, ...]:
        if not self.at("("):
            return ()
        self.advance()
        ps = [self.param()]
        while self.at(","):
            self.advance()
            ps.append(self.param())
        self.expect(")")
        return tuple(ps)

    def param(self) -> Param:
        name = self.expect_kind("lname", "parameter name").text
        self.expect(":")
        lo, hi = self.domain()
        return Param(name, lo, hi)

    def domain(self) -> tuple[int, int]:
        span = self.tok.span
        lo = int(self.expect_kind("int", "integer").text)
        self.expect("..")
        hi = int(self.expect_kind("int", "integer").text)
        if hi < lo:
            self.fail(f"empty domain {lo}..{hi}", span, kind="domain error")
        return lo, hi

    # processes
    def proc(self) -> Term:
        span = self.tok.span
        first_span = span
        parts = [self.par()]
        spans = [first_span]
        while self.at("+"):
            self.advance()
            spans.append(self.tok.span)
            parts.append(self.par())
        if len(parts) == 1:
            return parts[0]
        summands: list[Term] = []
        for part, pspan in zip(parts, spans):
            if isinstance(part, Sum):
                summands.extend(part.summands)
            elif isinstance(part, PREFIX_LIKE):
                summands.append(part)
            elif isinstance(part, Nil):
                continue
            else:
                self.fail(
                    f"unguarded summand {part}: every summand must start with a prefix",
                    pspan,
                    kind="unguarded summand",
                )
        if len(summands) < 2:
            return make_sum(summands)
        return Sum(summands, span)

    def par(self) -> Term:
        span = self.tok.span
        parts = [self.res()]
        while self.at("|"):
            self.advance()
            parts.append(self.res())
        return parts[0] if len(parts) == 1 else Par(parts, span)

    def res(self) -> Term:
        span = self.tok.span
        if self.at("new"):
            self.advance()
            names = self.names()
            self.expect("in")
            body = self.res()
            return _restrict(names, body, span)
        if self.at("(") and self.peek().kind == "sym" and self.peek().text == "^":
            self.advance()
            self.advance()
            names = self.names()
            self.expect(")")
            body = self.res()
            return _restrict(names, body, span)
        return self.prefix()

    def names(self) -> list[str]:
        names = [self.expect_kind("lname", "name").text]
        while self.at(","):
            self.advance()
            names.append(self.expect_kind("lname", "name").text)
        return names

    def prefix(self) -> Term:
        t = self.tok
        span = t.span
        if t.kind == "kw" and t.text == "tau":
            self.advance()
            return Prefix(TAU_ACTION, self.continuation(), span)
        if t.kind == "sym" and t.text == "'":
            self.advance()
            name = self.expect_kind("lname", "name after '").text
            if self.at("<"):
                index = self.index()
                return IndexedPrefix(OUT, name, index, self.continuation(), span)
            return Prefix(Action(OUT, name), self.continuation(), span)
        if t.kind == "lname":
            self.advance()
            if self.at("<"):
                index = self.index()
                return IndexedPrefix(IN, t.text, index, self.continuation(), span)
            if self.at("("):
                self.advance()
                var = self.expect_kind("lname", "value variable").text
                domain = None
                if self.at(":"):
                    self.advance()
                    domain = self.domain()
                self.expect(")")
                return ValueInput(t.text, var, domain, self.continuation(), span)
            return Prefix(Action(IN, t.text), self.continuation(), span)
        return self.atom()

    def index(self) -> IntExpr:
        self.expect("<")
        e = self.iexpr()
        self.expect(">")
        return e

    def continuation(self) -> Term:
        if self.at("."):
            self.advance()
            return self.res()
        return NIL

    def atom(self) -> Term:
        t = self.tok
        if t.kind == "int":
            if t.text != "0":
                self.fail(f"unexpected number {t.text}; only 0 denotes a process")
            self.advance()
            return Nil(t.span)
        if t.kind == "uname":
            self.advance()
            args: tuple[IntExpr, ...] = ()
            if self.at("("):
                self.advance()
                a = [self.iexpr()]
                while self.at(","):
                    self.advance()
                    a.append(self.iexpr())
                self.expect(")")
                args = tuple(a)
            return ConstRef(t.text, args, t.span)
        if self.at("("):
            self.advance()
            inner = self.proc()
            self.expect(")")
            return inner
        self.fail(f"expected a process, found {self._describe(t)}")

    # integer expressions
    def iexpr(self) -> IntExpr:
        e = self.iterm()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            e = IntOp(op, e, self.iterm())
        return e

    def iterm(self) -> IntExpr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text))
        if t.kind == "lname":
            self.advance()
            return IntRef(t.text)
        if self.at("-"):
            self.advance()
            return IntOp("-", IntLit(0), self.iterm())
        if self.at("("):
            self.advance()
            e = self.iexpr()
            self.expect(")")
            return e
        self.fail(f"expected an integer expression, found {self._describe(t)}")


def _restrict(names: list[str], body: Term, span: Span) -> Term:
    for n in reversed(names):
        body = Res(n, body, span)
    return body


def _bind_vars(t: Term, variables: set[str]) -> Term:
    """Turn references to system variables into ``Var`` nodes."""
    if isinstance(t, ConstRef) and t.name in variables:
        return Var(t.name, t.args, t.span)
    kids = t.children()
    if not kids:
        return t
    new = tuple(_bind_vars(k, variables) for k in kids)
    if all(a is b for a, b in zip(new, kids)):
        return t
    return rebuild(t, new)


# -- validation --------------------------------------------------------------


class _Validator:
    def __init__(self, program: Program):
        self.p = program
        self.diags: list[Diagnostic] = []
        self.const_arity: dict[str, int] = {}

    def err(self, kind: str, msg: str, span: Span | None) -> None:
        self.diags.append(Diagnostic(kind, msg, span))

    def run(self) -> None:
        p = self.p
        seen: set[str] = set()
        for ch in p.channels:
            if ch.name in seen:
                self.err("duplicate", f"channel {ch.name} declared twice", ch.span)
            seen.add(ch.name)
        for c in p.constants:
            if c.name in self.const_arity:
                self.err("duplicate", f"constant {c.name} defined twice", c.span)
            self.const_arity[c.name] = len(c.params)
            self._dup_params(c.params, c.span)
        for c in p.constants:
            scope = {q.name for q in c.params}
            self.term(c.body, scope, {}, c.span, where=f"constant {c.name}")
        sys_vars: dict[str, int] = {}
        seen = set()
        for s in p.systems:
            if s.name in seen:
                self.err("duplicate", f"system {s.name} defined twice", s.span)
            seen.add(s.name)
            arities: dict[str, int] = {}
            for eq in s.equations:
                if eq.var in arities:
                    self.err("duplicate", f"variable {eq.var} has two equations in {s.name}", eq.span)
                if eq.var in self.const_arity:
                    self.err("duplicate", f"variable {eq.var} clashes with a constant", eq.span)
                arities[eq.var] = len(eq.params)
                self._dup_params(eq.params, eq.span)
            for eq in s.equations:
                scope = {q.name for q in eq.params}
                self.term(eq.body, scope, arities, eq.span, where=f"equation {eq.var}")
            sys_vars[s.name] = len(s.expanded_variables())
        seen = set()
        for cd in p.candidates:
            if cd.name in seen:
                self.err("duplicate", f"candidates {cd.name} defined twice", cd.span)
            seen.add(cd.name)
            if cd.system not in sys_vars:
                self.err("unknown system", f"candidates {cd.name} refer to unknown system {cd.system}", cd.span)
            elif len(cd.processes) != sys_vars[cd.system]:
                self.err(
                    "arity mismatch",
                    f"candidates {cd.name} has {len(cd.processes)} processes but system "
                    f"{cd.system} has {sys_vars[cd.system]} equations",
                    cd.span,
                )
            for proc in cd.processes:
                self.term(proc, set(), {}, cd.span, where=f"candidates {cd.name}")

    def _dup_params(self, params, span) -> None:
        names = [q.name for q in params]
        if len(set(names)) != len(names):
            self.err("duplicate", "repeated parameter name", span)

    def term(self, t: Term, scope: set[str], variables: dict[str, int],
             span: Span | None, where: str) -> None:
        stack = [(t, frozenset(scope))]
        while stack:
            x, sc = stack.pop()
            loc = x.span or span
            if isinstance(x, ConstRef):
                if x.name not in self.const_arity:
                    self.err("unknown constant", f"{x.name} is not defined (in {where})", loc)
                elif self.const_arity[x.name] != len(x.args):
                    self.err(
                        "arity mismatch",
                        f"{x.name} expects {self.const_arity[x.name]} argument(s), got {len(x.args)}",
                        loc,
                    )
                self._ints(x.args, sc, loc)
            elif isinstance(x, Var):
                if x.name not in variables:
                    self.err("unknown variable", f"{x.name} (in {where})", loc)
                elif variables[x.name] != len(x.args):
                    self.err(
                        "arity mismatch",
                        f"variable {x.name} expects {variables[x.name]} argument(s), got {len(x.args)}",
                        loc,
                    )
                self._ints(x.args, sc, loc)
            elif isinstance(x, IndexedPrefix):
                self._ints((x.index,), sc, loc)
            elif isinstance(x, ValueInput):
                if x.domain is None and self.p.channel(x.chan) is None:
                    self.err(
                        "unbounded domain",
                        f"input {x.chan}({x.var}) needs a domain or a chan declaration",
                        loc,
                    )
                stack.append((x.cont, sc | {x.var}))
                continue
            stack.extend((k, sc) for k in x.children())

    def _ints(self, exprs, scope, span) -> None:
        for e in exprs:
            unbound = int_vars(e) - scope
            if unbound:
                self.err("unbound value", f"{', '.join(sorted(unbound))} not in scope", span)


def validate(program: Program) -> list[Diagnostic]:
    v = _Validator(program)
    v.run()
    return v.diags


def parse_program(text: str) -> Program:
    """Parse and validate a program; raises :class:`CCSError` on any problem."""
    program = _Parser(text).program()
    diags = validate(program)
    if diags:
        raise CCSError(diags)
    return program


def parse_term(text: str, variables: Iterable[str] = ()) -> Term:
    """Parse a single process/expression. Names in ``variables`` become ``Var``."""
    p = _Parser(text)
    t = p.proc()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p._describe(p.tok)} after term")
    variables = set(variables)
    return _bind_vars(t, variables) if variables else t


def parse_process(text: str, program: Program | None = None) -> Term:
    """Parse a closed process, resolving constants against ``program``.

    Parametrised references such as ``SL(0)`` are expanded to the names the
    desugarer generates, so the result can be used with a desugared program.
    """
    t = parse_term(text)
    if program is None:
        return t
    v = _Validator(program)
    v.const_arity = {c.name: len(c.params) for c in program.constants}
    v.term(t, set(), {}, None, where="term")
    if v.diags:
        raise CCSError(v.diags)
    from .desugar import desugar_term

    return desugar_term(t, program)
