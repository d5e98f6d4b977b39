"""Abstract syntax for CCS processes and equation expressions.

Terms are immutable and hashable. Structural equality ignores source spans.
``Process`` and ``Expression`` share the node classes; a process is simply a
term without ``Var`` nodes. The value-passing nodes (``ValueInput``,
``IndexedPrefix`` and parametrised references) only exist before
:func:`usol.desugar.desugar_values` has run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Union

IN, OUT, TAU = "in", "out", "tau"


class Action(NamedTuple):
    kind: str
    name: str | None = None

    @property
    def visible(self) -> bool:
        return self.kind != TAU

    def complement(self) -> Action:
        if self.kind == IN:
            return Action(OUT, self.name)
        if self.kind == OUT:
            return Action(IN, self.name)
        return self

    def __str__(self) -> str:
        if self.kind == TAU:
            return "tau"
        if self.kind == OUT:
            return "'" + self.name
        return self.name

    @classmethod
    def parse(cls, text: str) -> Action:
        text = text.strip()
        if text == "tau":
            return TAU_ACTION
        if text.startswith("'"):
            return cls(OUT, text[1:])
        return cls(IN, text)


TAU_ACTION = Action(TAU)


def inp(name: str) -> Action:
    return Action(IN, name)


def out(name: str) -> Action:
    return Action(OUT, name)


# -- integer expressions (value passing sugar) ------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class IntRef:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class IntOp:
    op: str
    left: IntExpr
    right: IntExpr

    def __str__(self) -> str:
        right = f"({self.right})" if isinstance(self.right, IntOp) else str(self.right)
        return f"{self.left} {self.op} {right}"


IntExpr = Union[IntLit, IntRef, IntOp]


def eval_int(expr: IntExpr, env: Mapping[str, int]) -> int:
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, IntRef):
        return env[expr.name]
    left, right = eval_int(expr.left, env), eval_int(expr.right, env)
    return left + right if expr.op == "+" else left - right


def int_vars(expr: IntExpr) -> set[str]:
    if isinstance(expr, IntRef):
        return {expr.name}
    if isinstance(expr, IntOp):
        return int_vars(expr.left) | int_vars(expr.right)
    return set()


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# -- term nodes --------------------------------------------------------------


class Term:
    """Base class of every process/expression node."""

    __slots__ = ("_hash", "_key", "span")
    _fields: tuple[str, ...] = ()

    def _init(self, span: Span | None) -> None:
        object.__setattr__(self, "span", span)
        object.__setattr__(self, "_key", None)
        object.__setattr__(
            self, "_hash", hash((type(self).__name__,) + self._values())
        )

    def _values(self) -> tuple:
        return tuple(getattr(self, f) for f in self._fields)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._values() == other._values()

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return self._hash

    @property
    def key(self) -> str:
        """Standalone textual rendering, also used as the canonical sort key."""
        k = self._key
        if k is None:
            k = self._render()
            object.__setattr__(self, "_key", k)
        return k

    def _render(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    def __str__(self) -> str:
        return self.key

    def __repr__(self) -> str:
        args = ", ".join(repr(v) for v in self._values())
        return f"{type(self).__name__}({args})"

    def __reduce__(self):
        return (type(self), self._values())

    def children(self) -> tuple[Term, ...]:
        return ()


class Nil(Term):
    __slots__ = ()

    def __init__(self, span: Span | None = None):
        self._init(span)

    def _render(self) -> str:
        return "0"


NIL = Nil()


class Prefix(Term):
    __slots__ = ("action", "cont")
    _fields = ("action", "cont")

    def __init__(self, action: Action, cont: Term, span: Span | None = None):
        object.__setattr__(self, "action", action)
        object.__setattr__(self, "cont", cont)
        self._init(span)

    def _render(self) -> str:
        return f"{self.action}.{_wrap(self.cont)}"

    def children(self):
        return (self.cont,)


class Sum(Term):
    """Guarded choice; every summand is prefix-like."""

    __slots__ = ("summands",)
    _fields = ("summands",)

    def __init__(self, summands: Iterable[Term], span: Span | None = None):
        summands = tuple(summands)
        if len(summands) < 2:
            raise ValueError("a Sum needs at least two summands; use make_sum")
        for s in summands:
            if not isinstance(s, PREFIX_LIKE):
                raise ValueError(f"unguarded summand: {s}")
        object.__setattr__(self, "summands", summands)
        self._init(span)

    def _render(self) -> str:
        return " + ".join(s.key for s in self.summands)

    def children(self):
        return self.summands


class Par(Term):
    """Parallel composition of two or more components."""

    __slots__ = ("parts",)
    _fields = ("parts",)

    def __init__(self, parts: Iterable[Term], span: Span | None = None):
        parts = tuple(parts)
        if len(parts) < 2:
            raise ValueError("a Par needs at least two components; use make_par")
        object.__setattr__(self, "parts", parts)
        self._init(span)

    def _render(self) -> str:
        return " | ".join([f"({p.key})" if isinstance(p, (Sum, Par)) else p.key for p in self.parts])

    def children(self):
        return self.parts


class Res(Term):
    __slots__ = ("name", "body")
    _fields = ("name", "body")

    def __init__(self, name: str, body: Term, span: Span | None = None):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "body", body)
        self._init(span)

    def _render(self) -> str:
        return f"new {self.name} in {_wrap(self.body)}"

    def children(self):
        return (self.body,)


class ConstRef(Term):
    __slots__ = ("name", "args")
    _fields = ("name", "args")

    def __init__(self, name: str, args: Iterable[IntExpr] = (), span: Span | None = None):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(args))
        self._init(span)

    def _render(self) -> str:
        if self.args:
            return f"{self.name}({', '.join(map(str, self.args))})"
        return self.name


class Var(Term):
    """Equation variable."""

    __slots__ = ("name", "args")
    _fields = ("name", "args")

    def __init__(self, name: str, args: Iterable[IntExpr] = (), span: Span | None = None):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(args))
        self._init(span)

    def _render(self) -> str:
        if self.args:
            return f"{self.name}({', '.join(map(str, self.args))})"
        return self.name


class ValueInput(Term):
    """``c(x: lo..hi).P``: input of a value bound to ``x``."""

    __slots__ = ("chan", "var", "domain", "cont")
    _fields = ("chan", "var", "domain", "cont")

    def __init__(self, chan: str, var: str, domain: tuple[int, int] | None,
                 cont: Term, span: Span | None = None):
        object.__setattr__(self, "chan", chan)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "cont", cont)
        self._init(span)

    def _render(self) -> str:
        dom = f": {self.domain[0]}..{self.domain[1]}" if self.domain else ""
        return f"{self.chan}({self.var}{dom}).{_wrap(self.cont)}"

    def children(self):
        return (self.cont,)


class IndexedPrefix(Term):
    """``a<e>.P`` or ``'a<e>.P``: prefix on the indexed name ``a_e``."""

    __slots__ = ("kind", "chan", "index", "cont")
    _fields = ("kind", "chan", "index", "cont")

    def __init__(self, kind: str, chan: str, index: IntExpr, cont: Term,
                 span: Span | None = None):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "chan", chan)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "cont", cont)
        self._init(span)

    def _render(self) -> str:
        mark = "'" if self.kind == OUT else ""
        return f"{mark}{self.chan}<{self.index}>.{_wrap(self.cont)}"

    def children(self):
        return (self.cont,)


PREFIX_LIKE = (Prefix, ValueInput, IndexedPrefix)

Process = Term
Expression = Term


def _wrap(t: Term) -> str:
    if isinstance(t, (Sum, Par)):
        return f"({t.key})"
    return t.key


def make_sum(summands: Iterable[Term]) -> Term:
    """Build a choice, collapsing to ``0`` or a single prefix where possible."""
    flat: list[Term] = []
    for s in summands:
        if isinstance(s, Sum):
            flat.extend(s.summands)
        elif not isinstance(s, Nil):
            flat.append(s)
    if not flat:
        return NIL
    if len(flat) == 1:
        return flat[0]
    return Sum(flat)


def make_par(parts: Iterable[Term]) -> Term:
    parts = [p for p in parts if not isinstance(p, Nil)]
    if not parts:
        return NIL
    if len(parts) == 1:
        return parts[0]
    return Par(parts)


def pretty(t: Term) -> str:
    return t.key


# -- traversals --------------------------------------------------------------


def rebuild(t: Term, children: tuple[Term, ...]) -> Term:
    """Copy of ``t`` with new children, keeping its span."""
    if isinstance(t, Prefix):
        return Prefix(t.action, children[0], t.span)
    if isinstance(t, Sum):
        return Sum(children, t.span)
    if isinstance(t, Par):
        return Par(children, t.span)
    if isinstance(t, Res):
        return Res(t.name, children[0], t.span)
    if isinstance(t, ValueInput):
        return ValueInput(t.chan, t.var, t.domain, children[0], t.span)
    if isinstance(t, IndexedPrefix):
        return IndexedPrefix(t.kind, t.chan, t.index, children[0], t.span)
    return t


def free_variables(e: Term) -> frozenset[str]:
    """Equation variables occurring in ``e``; constants contribute none."""
    found: set[str] = set()
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            found.add(t.name)
        else:
            stack.extend(t.children())
    return frozenset(found)


def is_process(t: Term) -> bool:
    return not free_variables(t)


def syntactic_names(t: Term) -> frozenset[str]:
    """Free names of ``t`` without looking inside constant definitions."""
    if isinstance(t, Prefix):
        base = syntactic_names(t.cont)
        return base | {t.action.name} if t.action.visible else base
    if isinstance(t, Res):
        return syntactic_names(t.body) - {t.name}
    if isinstance(t, (ValueInput, IndexedPrefix)):
        return syntactic_names(t.cont) | {t.chan}
    out_: frozenset[str] = frozenset()
    for c in t.children():
        out_ |= syntactic_names(c)
    return out_


class UnboundVariableError(KeyError):
    pass


class NameCaptureWarning(UserWarning):
    """A substitution placed a free name under a restriction of that name."""


def substitute(e: Term, binding: Mapping[str, Term]) -> Term:
    """Replace every variable of ``e`` by its image in ``binding``.

    Purely syntactic: restrictions are not binders, so nothing is renamed. A
    :class:`NameCaptureWarning` is emitted when a substituted term has a free
    name that ends up under a restriction of the same name.
    """
    cache: dict[Term, Term] = {}

    def go(t: Term, restricted: frozenset[str]) -> Term:
        if isinstance(t, Var):
            if t.name not in binding:
                raise UnboundVariableError(t.name)
            if t.args:
                raise ValueError(f"parametrised variable {t}; desugar first")
            image = binding[t.name]
            if restricted:
                clash = restricted & syntactic_names(image)
                if clash:
                    warnings.warn(
                        f"substituting {image} for {t.name} places free name(s) "
                        f"{', '.join(sorted(clash))} under a restriction",
                        NameCaptureWarning,
                        stacklevel=3,
                    )
            return image
        kids = t.children()
        if not kids:
            return t
        ck = (t, restricted)
        hit = cache.get(ck)
        if hit is not None:
            return hit
        inner = restricted | {t.name} if isinstance(t, Res) else restricted
        new_kids = tuple(go(k, inner) for k in kids)
        res = t if all(a is b for a, b in zip(new_kids, kids)) else rebuild(t, new_kids)
        cache[ck] = res
        return res

    return go(e, frozenset())


def const_refs(t: Term) -> set[str]:
    found: set[str] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, ConstRef):
            found.add(x.name)
        stack.extend(x.children())
    return found


def term_size(t: Term) -> int:
    return 1 + sum(term_size(c) for c in t.children())
