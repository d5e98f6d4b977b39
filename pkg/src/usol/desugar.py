"""Translation of finite value passing into pure CCS.

Values live in finite integer domains ``lo..hi`` and arithmetic wraps around
inside the domain of whatever receives the value (a constant parameter, an
equation parameter or a declared channel). An input ``c(z).P`` becomes the
choice ``c_lo.P{lo/z} + ... + c_hi.P{hi/z}``; an output ``'c<e>.P`` becomes an
output on the indexed name ``c_v``; a parametrised constant ``A(n)`` becomes one
constant ``A_v`` per domain element.
"""

from __future__ import annotations

from .parser import (
    CandidateDecl, CCSError, ConstDef, Diagnostic, EquationDecl, Param, Program,
    SystemDecl, _domain_product, indexed_name,
)
from .terms import (
    ConstRef, IndexedPrefix, IntExpr, IntLit, Par, Prefix, Res, Span, Sum, Term,
    ValueInput, Var, Action, eval_int, make_sum,
)


def _wrap(value: int, lo: int, hi: int) -> int:
    return lo + (value - lo) % (hi - lo + 1)


class _Desugarer:
    def __init__(self, program: Program):
        self.p = program
        self.const_params = {c.name: c.params for c in program.constants}
        self.valued = self._valued_channels()
        self.var_params: dict[str, tuple[Param, ...]] = {}

    def _valued_channels(self) -> set[str]:
        found = {c.name for c in self.p.channels}
        terms = [c.body for c in self.p.constants]
        terms += [e.body for s in self.p.systems for e in s.equations]
        for t in terms:
            stack = [t]
            while stack:
                x = stack.pop()
                if isinstance(x, (IndexedPrefix, ValueInput)):
                    found.add(x.chan)
                stack.extend(x.children())
        return found

    def fail(self, msg: str, span: Span | None, kind: str = "domain error"):
        raise CCSError([Diagnostic(kind, msg, span)])

    def arg(self, expr: IntExpr, env: dict[str, int], lo: int, hi: int, span, what: str) -> int:
        if isinstance(expr, IntLit) and not lo <= expr.value <= hi:
            self.fail(f"literal {expr.value} outside domain {lo}..{hi} of {what}", span,
                      kind="out-of-domain literal")
        return _wrap(eval_int(expr, env), lo, hi)

    def channel_value(self, chan: str, expr: IntExpr, env, span) -> int:
        decl = self.p.channel(chan)
        if decl is not None:
            return self.arg(expr, env, decl.lo, decl.hi, span, f"channel {chan}")
        value = eval_int(expr, env)
        if value < 0:
            self.fail(f"negative value {value} on channel {chan} without a declared domain", span)
        return value

    def term(self, t: Term, env: dict[str, int]) -> Term:
        if isinstance(t, Prefix):
            return Prefix(t.action, self.term(t.cont, env), t.span)
        if isinstance(t, IndexedPrefix):
            v = self.channel_value(t.chan, t.index, env, t.span)
            return Prefix(Action(t.kind, indexed_name(t.chan, [v])), self.term(t.cont, env), t.span)
        if isinstance(t, ValueInput):
            if t.domain is not None:
                lo, hi = t.domain
            else:
                decl = self.p.channel(t.chan)
                if decl is None:
                    self.fail(f"input {t.chan}({t.var}) has no finite domain", t.span,
                              kind="unbounded domain")
                lo, hi = decl.lo, decl.hi
            branches = []
            for v in range(lo, hi + 1):
                inner = dict(env)
                inner[t.var] = v
                branches.append(Prefix(Action("in", indexed_name(t.chan, [v])), self.term(t.cont, inner), t.span))
            return make_sum(branches)
        if isinstance(t, Sum):
            return make_sum(self.term(s, env) for s in t.summands)
        if isinstance(t, Par):
            return Par([self.term(x, env) for x in t.parts], t.span)
        if isinstance(t, Res):
            body = self.term(t.body, env)
            decl = self.p.channel(t.name)
            if decl is not None:
                for v in range(decl.hi, decl.lo - 1, -1):
                    body = Res(indexed_name(t.name, [v]), body, t.span)
                return body
            if t.name in self.valued:
                self.fail(f"restricting valued channel {t.name} requires a chan declaration", t.span)
            return Res(t.name, body, t.span)
        if isinstance(t, ConstRef):
            params = self.const_params.get(t.name, ())
            if not params:
                return t if not t.args else ConstRef(t.name, (), t.span)
            vals = [self.arg(a, env, p.lo, p.hi, t.span, f"{t.name}.{p.name}") for a, p in zip(t.args, params)]
            return ConstRef(indexed_name(t.name, vals), (), t.span)
        if isinstance(t, Var):
            params = self.var_params.get(t.name, ())
            if not params:
                return t
            vals = [self.arg(a, env, p.lo, p.hi, t.span, f"{t.name}.{p.name}") for a, p in zip(t.args, params)]
            return Var(indexed_name(t.name, vals), (), t.span)
        return t

    def program(self) -> Program:
        consts: list[ConstDef] = []
        names = {c.name for c in self.p.constants if not c.params}
        for c in self.p.constants:
            if not c.params:
                consts.append(ConstDef(c.name, (), self.term(c.body, {}), c.span))
                continue
            for combo in _domain_product(c.params):
                name = indexed_name(c.name, combo)
                if name in names:
                    self.fail(f"generated constant {name} clashes with a user constant", c.span,
                              kind="duplicate")
                names.add(name)
                env = {p.name: v for p, v in zip(c.params, combo)}
                consts.append(ConstDef(name, (), self.term(c.body, env), c.span))
        systems = []
        for s in self.p.systems:
            self.var_params = {e.var: e.params for e in s.equations}
            eqs = []
            for e in s.equations:
                if not e.params:
                    eqs.append(EquationDecl(e.var, (), self.term(e.body, {}), e.span))
                    continue
                for combo in _domain_product(e.params):
                    env = {p.name: v for p, v in zip(e.params, combo)}
                    eqs.append(EquationDecl(indexed_name(e.var, combo), (), self.term(e.body, env), e.span))
            systems.append(SystemDecl(s.name, tuple(eqs), s.span))
        self.var_params = {}
        cands = [
            CandidateDecl(c.name, c.system, tuple(self.term(x, {}) for x in c.processes), c.span)
            for c in self.p.candidates
        ]
        return Program(tuple(consts), tuple(systems), tuple(cands), ())


def desugar_values(program: Program) -> Program:
    """Expand every value-passing construct; the result is pure CCS."""
    if program.is_pure and not program.channels:
        return program
    return _Desugarer(program).program()


def desugar_term(t: Term, program: Program) -> Term:
    """Desugar a closed term in the context of ``program``'s declarations."""
    return _Desugarer(program).term(t, {})
