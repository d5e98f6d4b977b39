"""Explicit-state labelled transition systems for CCS.

States are canonical terms. A canonical term is either ``0``, a single
component, or a ``Par`` of components sorted by their textual key, where a
component is a prefix, a sorted choice, a constant reference or a restriction
whose body mentions the restricted name in every component. Constants are
kept folded in states and unfolded on demand by :func:`step`, which also
counts how often the unfolding rule was applied to syntactic-solution
constants while deriving each transition.
"""

from __future__ import annotations

import json
import os
from bisect import insort
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .equations import SyntacticSolution
from .terms import (
    NIL, TAU_ACTION, Action, ConstRef, Nil, Par, Prefix, Res, Sum, Term,
    ValueInput, IndexedPrefix, Var, const_refs, free_variables, make_par,
)

DEFAULT_LIMIT = 100_000


def default_bound() -> int:
    """Exploration limit: ``USOL_MAX_STATES`` if set, else 100 000."""
    raw = os.environ.get("USOL_MAX_STATES", "").strip()
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError("USOL_MAX_STATES must be positive")
        return value
    return DEFAULT_LIMIT


class UnknownConstantError(LookupError):
    pass


class UnguardedRecursionError(ValueError):
    pass


class TruncatedLtsError(ValueError):
    pass


Move = tuple  # (Action, tuple[Term, ...], int)


def _key(t: Term) -> str:
    return t.key


class Env:
    """Constant definitions plus the set of syntactic-solution constants.

    Holds memo tables for canonical forms, sorts and component moves; these
    only ever grow, so an ``Env`` can be shared between explorations.
    """

    def __init__(self, definitions: Mapping[str, Term] | None = None,
                 solution: Iterable[str] = ()):
        self.defs: dict[str, Term] = dict(definitions or {})
        self.solution = frozenset(solution)
        for name, body in self.defs.items():
            if free_variables(body):
                raise ValueError(f"constant {name} contains equation variables")
            for ref in const_refs(body):
                if ref not in self.defs:
                    raise UnknownConstantError(f"{ref} (used by {name}) is not defined")
        missing = self.solution - self.defs.keys()
        if missing:
            raise UnknownConstantError(f"solution constants without definition: {sorted(missing)}")
        self._check_guarded()
        self._canon: dict[Term, tuple[Term, ...]] = {}
        self._bodies: dict[str, tuple[Term, ...]] = {}
        self._moves: dict[Term, tuple[Move, ...]] = {}
        self._sorts: dict[Term, frozenset[Action]] = {}
        self._intern: dict[Term, Term] = {}
        self._const_sorts = self._solve_sorts()

    @classmethod
    def from_program(cls, program, *solutions: SyntacticSolution) -> Env:
        defs = program.definitions()
        names: set[str] = set()
        for sol in solutions:
            defs.update(sol.definitions())
            names.update(sol.names)
        return cls(defs, names)

    def with_solution(self, sol: SyntacticSolution) -> Env:
        defs = dict(self.defs)
        defs.update(sol.definitions())
        return Env(defs, self.solution | set(sol.names))

    def is_solution(self, name: str) -> bool:
        return name in self.solution

    def body(self, name: str) -> Term:
        try:
            return self.defs[name]
        except KeyError:
            raise UnknownConstantError(name) from None

    # -- static checks ---------------------------------------------------

    def _check_guarded(self) -> None:
        def unguarded_refs(t: Term) -> set[str]:
            if isinstance(t, ConstRef):
                return {t.name}
            if isinstance(t, (Prefix, Sum, ValueInput, IndexedPrefix)):
                return set()
            out: set[str] = set()
            for c in t.children():
                out |= unguarded_refs(c)
            return out

        graph = {n: unguarded_refs(b) for n, b in self.defs.items()}
        state: dict[str, int] = {}

        def visit(n: str, path: list[str]) -> None:
            state[n] = 1
            for m in sorted(graph[n]):
                if state.get(m) == 1:
                    cycle = path[path.index(m):] + [m] if m in path else [n, m]
                    raise UnguardedRecursionError(
                        "unguarded recursion through " + " -> ".join(cycle)
                    )
                if m not in state:
                    visit(m, path + [m])
            state[n] = 2

        for n in sorted(graph):
            if n not in state:
                visit(n, [n])

    def _solve_sorts(self) -> dict[str, frozenset[Action]]:
        table = {n: frozenset() for n in self.defs}

        def local(t: Term) -> frozenset[Action]:
            if isinstance(t, Prefix):
                rest = local(t.cont)
                return rest | {t.action} if t.action.visible else rest
            if isinstance(t, ConstRef):
                return table.get(t.name, frozenset())
            if isinstance(t, Res):
                return frozenset(a for a in local(t.body) if a.name != t.name)
            acc: frozenset[Action] = frozenset()
            for c in t.children():
                acc |= local(c)
            return acc

        changed = True
        while changed:
            changed = False
            for n, b in self.defs.items():
                s = local(b)
                if s != table[n]:
                    table[n] = s
                    changed = True
        return table

    # -- sorts -------------------------------------------------------------

    def sort(self, t: Term) -> frozenset[Action]:
        """Visible actions ``t`` or any of its derivatives may perform."""
        hit = self._sorts.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Prefix):
            rest = self.sort(t.cont)
            s = rest | {t.action} if t.action.visible else rest
        elif isinstance(t, ConstRef):
            if t.name not in self._const_sorts:
                raise UnknownConstantError(t.name)
            s = self._const_sorts[t.name]
        elif isinstance(t, Res):
            s = frozenset(a for a in self.sort(t.body) if a.name != t.name)
        else:
            s = frozenset()
            for c in t.children():
                s |= self.sort(c)
        self._sorts[t] = s
        return s

    def names(self, t: Term) -> frozenset[str]:
        return frozenset(a.name for a in self.sort(t))

    # -- canonical forms ---------------------------------------------------

    def components(self, t: Term) -> tuple[Term, ...]:
        """Sorted canonical components of ``t``."""
        hit = self._canon.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Nil):
            comps: tuple[Term, ...] = ()
        elif isinstance(t, Prefix):
            inner = self.canon(t.cont)
            comps = (t if inner is t.cont else Prefix(t.action, inner),)
        elif isinstance(t, Sum):
            summands = sorted((self.components(s)[0] for s in t.summands), key=_key)
            comps = (Sum(summands) if len(summands) > 1 else summands[0],)
        elif isinstance(t, Par):
            acc: list[Term] = []
            for p in t.parts:
                acc.extend(self.components(p))
            acc.sort(key=_key)
            comps = tuple(acc)
        elif isinstance(t, Res):
            comps = self.restrict(t.name, self.components(t.body))
        elif isinstance(t, (ConstRef, Var)):
            comps = (t,)
        else:
            raise TypeError(f"cannot canonicalise {type(t).__name__}; desugar values first")
        self._canon[t] = comps
        return comps

    def canon(self, t: Term) -> Term:
        return make_par(self.components(t))

    def restrict(self, name: str, comps: Sequence[Term]) -> tuple[Term, ...]:
        """Restrict ``name`` over canonical components, narrowing its scope."""
        inside = [c for c in comps if name in self.names(c)]
        outside = [c for c in comps if name not in self.names(c)]
        if inside:
            only = inside[0]
            if len(inside) == 1 and isinstance(only, Res) and only.name < name:
                pushed = self.restrict(name, self.components(only.body))
                outside.extend(self.restrict(only.name, pushed))
            else:
                outside.append(Res(name, make_par(inside)))
        outside.sort(key=_key)
        return tuple(outside)

    def canonical_body(self, name: str) -> tuple[Term, ...]:
        hit = self._bodies.get(name)
        if hit is None:
            hit = self.components(self.body(name))
            self._bodies[name] = hit
        return hit

    # -- transitions -------------------------------------------------------

    def component_moves(self, c: Term) -> tuple[Move, ...]:
        hit = self._moves.get(c)
        if hit is not None:
            return hit
        if isinstance(c, Prefix):
            moves: tuple[Move, ...] = ((c.action, self.components(c.cont), 0),)
        elif isinstance(c, Sum):
            moves = tuple((s.action, self.components(s.cont), 0) for s in c.summands)
        elif isinstance(c, ConstRef):
            bump = 1 if c.name in self.solution else 0
            moves = tuple(
                (mu, d, k + bump) for mu, d, k in self.state_moves(self.canonical_body(c.name))
            )
        elif isinstance(c, Res):
            moves = tuple(
                (mu, self.restrict(c.name, d), k)
                for mu, d, k in self.state_moves(self.components(c.body))
                if mu.name != c.name
            )
        elif isinstance(c, Var):
            moves = ()
        else:
            raise TypeError(f"unexpected component {c!r}")
        self._moves[c] = moves
        return moves

    def state_moves(self, comps: tuple[Term, ...]) -> list[Move]:
        """All moves of the parallel composition of canonical ``comps``."""
        groups: list[tuple[int, Term, int]] = []
        for i, c in enumerate(comps):
            if groups and groups[-1][1] == c:
                first, _, mult = groups[-1]
                groups[-1] = (first, c, mult + 1)
            else:
                groups.append((i, c, 1))
        n = len(comps)
        seen: set = set()
        out: list[Move] = []

        def emit(mu: Action, drop: tuple[int, ...], add: Iterable[Term], k: int) -> None:
            rest = list(comps)
            for j in sorted(drop, reverse=True):
                del rest[j]
            for c in add:
                insort(rest, c, key=_key)
            move = (mu, tuple(rest), k)
            if move not in seen:
                seen.add(move)
                out.append(move)

        per_group = [self.component_moves(c) for _, c, _ in groups]
        for (i, _, _), moves in zip(groups, per_group):
            for mu, d, k in moves:
                emit(mu, (i,), d, k)
        for gi, (i, _, mult_i) in enumerate(groups):
            moves_i = per_group[gi]
            if not moves_i:
                continue
            if mult_i > 1:
                for mu, d1, k1 in moves_i:
                    if mu.kind != "in":
                        continue
                    co = mu.complement()
                    for nu, d2, k2 in moves_i:
                        if nu == co:
                            emit(TAU_ACTION, (i, i + 1), (*d1, *d2), k1 + k2)
            for gj in range(gi + 1, len(groups)):
                j = groups[gj][0]
                moves_j = per_group[gj]
                for mu, d1, k1 in moves_i:
                    if not mu.visible:
                        continue
                    co = mu.complement()
                    for nu, d2, k2 in moves_j:
                        if nu == co:
                            emit(TAU_ACTION, (i, j), (*d1, *d2), k1 + k2)
        return out

    def successors(self, state: Term) -> list[tuple[Action, Term, int]]:
        """Canonically ordered moves of a canonical state."""
        intern = self._intern
        moves = []
        for mu, d, k in self.state_moves(components_of(state)):
            t = make_par(d)
            moves.append((mu, intern.setdefault(t, t), k))
        moves.sort(key=lambda m: (str(m[0]), m[1].key, m[2]))
        return moves


def components_of(state: Term) -> tuple[Term, ...]:
    if isinstance(state, Nil):
        return ()
    if isinstance(state, Par):
        return state.parts
    return (state,)


def canonicalize(p: Term, env: Env | None = None) -> Term:
    """Normal form modulo AC1 of ``|``, AC of ``+`` and useless restrictions.

    Without an environment, constants are assumed to use every name, so no
    restriction around a constant is ever removed.
    """
    if env is None:
        env = _OpaqueEnv()
    return env.canon(p)


class _OpaqueEnv(Env):
    def __init__(self):
        super().__init__({})

    def names(self, t: Term) -> frozenset[str]:
        if const_refs(t):
            return _Everything()
        return super().names(t)

    def sort(self, t: Term) -> frozenset[Action]:
        if isinstance(t, ConstRef):
            return frozenset()
        return super().sort(t)


class _Everything(frozenset):
    def __contains__(self, item) -> bool:
        return True


def step(p: Term, env: Env | None = None) -> list[tuple[Action, Term, int]]:
    """Transitions of ``p``: (label, canonical derivative, solution unfoldings)."""
    env = env or Env()
    return env.successors(env.canon(p))


# -- explicit exploration ----------------------------------------------------


class Transition(NamedTuple):
    src: int
    label: Action
    dst: int
    count: int


@dataclass(frozen=True, eq=False)
class AnnotatedLts:
    states: tuple[Term, ...]
    transitions: tuple[tuple[Transition, ...], ...]
    initial: int
    complete: bool
    limit: int
    frontier: frozenset[int] = frozenset()
    env: Env | None = field(default=None, repr=False)

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_transitions(self) -> int:
        return sum(len(t) for t in self.transitions)

    def edges(self) -> Iterator[Transition]:
        for out in self.transitions:
            yield from out

    def out(self, s: int) -> tuple[Transition, ...]:
        return self.transitions[s]

    def state_id(self, term: Term) -> int:
        for i, s in enumerate(self.states):
            if s == term:
                return i
        raise KeyError(term)

    def labels(self) -> list[Action]:
        """Visible labels, sorted by their text."""
        return sorted({t.label for t in self.edges() if t.label.visible}, key=str)

    def to_dict(self) -> dict:
        return {
            "states": [s.key for s in self.states],
            "transitions": [
                {"src": t.src, "label": str(t.label), "dst": t.dst, "count": t.count}
                for t in self.edges()
            ],
            "initial": self.initial,
            "complete": self.complete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_dot(self) -> str:
        lines = ["digraph lts {", "  rankdir=LR;", '  node [shape=box, fontname="monospace"];']
        for i, s in enumerate(self.states):
            shape = ", peripheries=2" if i == self.initial else ""
            lines.append(f"  s{i} [label={_dot_quote(s.key)}{shape}];")
        for t in self.edges():
            label = str(t.label) + (f" [{t.count}]" if t.count else "")
            style = ", style=dashed" if not t.label.visible else ""
            lines.append(f"  s{t.src} -> s{t.dst} [label={_dot_quote(label)}{style}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def explore(p: Term, limit: int | None = None, env: Env | None = None) -> AnnotatedLts:
    """Breadth-first exploration of the states reachable from ``p``.

    At most ``limit`` states are kept; transitions towards states that did not
    fit are dropped and the result is marked incomplete.
    """
    if limit is None:
        limit = default_bound()
    if limit < 1:
        raise ValueError("limit must be at least 1")
    env = env or Env()
    root = env.canon(p)
    states: list[Term] = [root]
    index: dict[Term, int] = {root: 0}
    trans: list[tuple[Transition, ...]] = []
    frontier: set[int] = set()
    i = 0
    while i < len(states):
        succ = []
        for mu, d, k in env.successors(states[i]):
            j = index.get(d)
            if j is None:
                if len(states) >= limit:
                    frontier.add(i)
                    continue
                j = len(states)
                states.append(d)
                index[d] = j
            succ.append(Transition(i, mu, j, k))
        trans.append(tuple(succ))
        i += 1
    return AnnotatedLts(tuple(states), tuple(trans), 0, not frontier, limit,
                        frozenset(frontier), env)


# -- weak transitions --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeakLts:
    """Saturated transition relation of a complete LTS.

    Label index 0 stands for ``=>`` (reflexive-transitive tau closure, i.e. the
    hatted weak tau move); index ``k >= 1`` stands for ``=>a=>`` with ``a``
    the ``k``-th entry of ``labels``.
    """

    lts: AnnotatedLts
    labels: tuple[Action, ...]
    indptr: np.ndarray
    edge_label: np.ndarray
    edge_dst: np.ndarray

    @property
    def num_states(self) -> int:
        return self.lts.num_states

    def label_index(self, action: Action) -> int:
        if not action.visible:
            return 0
        try:
            return self.labels.index(action) + 1
        except ValueError:
            return -1

    def label_of(self, idx: int) -> Action:
        return TAU_ACTION if idx == 0 else self.labels[idx - 1]

    def edges(self):
        """``(src, label index, dst)`` triples of the saturated graph."""
        for s in range(self.num_states):
            for e in range(self.indptr[s], self.indptr[s + 1]):
                yield s, int(self.edge_label[e]), int(self.edge_dst[e])

    def _targets(self, s: int, idx: int) -> frozenset[int]:
        lo, hi = self.indptr[s], self.indptr[s + 1]
        lbl = self.edge_label[lo:hi]
        return frozenset(int(x) for x in self.edge_dst[lo:hi][lbl == idx])

    def closure(self, s: int) -> frozenset[int]:
        """States reachable by zero or more tau steps."""
        return self._targets(s, 0)

    def weak_hat(self, s: int, action: Action) -> frozenset[int]:
        idx = self.label_index(action)
        return frozenset() if idx < 0 else self._targets(s, idx)

    def weak(self, s: int, action: Action) -> frozenset[int]:
        """``s =mu=> s'``; for tau at least one tau step is required."""
        if action.visible:
            return self.weak_hat(s, action)
        out: set[int] = set()
        for t in self.closure(s):
            for tr in self.lts.out(t):
                if not tr.label.visible:
                    out |= self.closure(tr.dst)
        return frozenset(out)


def _csr(n: int, pairs: Iterable[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(n)]
    for a, b in pairs:
        buckets[a].append(b)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, bk in enumerate(buckets):
        indptr[i + 1] = indptr[i] + len(bk)
    indices = np.fromiter((b for bk in buckets for b in sorted(bk)), dtype=np.int64,
                          count=int(indptr[-1]))
    return indptr, indices


def label_table(lts: AnnotatedLts, extra: Iterable[Action] = ()) -> tuple[Action, ...]:
    labels = {t.label for t in lts.edges() if t.label.visible} | {a for a in extra if a.visible}
    return tuple(sorted(labels, key=str))


def saturate(lts: AnnotatedLts, labels: Sequence[Action] | None = None) -> WeakLts:
    if not lts.complete:
        raise TruncatedLtsError("refusing to saturate a truncated LTS")
    labels = tuple(labels) if labels is not None else label_table(lts)
    lbl_index = {a: i + 1 for i, a in enumerate(labels)}
    n = lts.num_states
    tau_ptr, tau_idx = _csr(n, ((t.src, t.dst) for t in lts.edges() if not t.label.visible))
    clo_ptr, clo_idx = kernels.tau_closure(n, tau_ptr, tau_idx)
    vis = [(t.src, lbl_index[t.label], t.dst) for t in lts.edges() if t.label.visible]
    vis.sort()
    vis_ptr = np.zeros(n + 1, dtype=np.int64)
    for s, _, _ in vis:
        vis_ptr[s + 1] += 1
    np.cumsum(vis_ptr, out=vis_ptr)
    vis_lbl = np.array([v[1] for v in vis], dtype=np.int64)
    vis_dst = np.array([v[2] for v in vis], dtype=np.int64)
    indptr, elbl, edst = kernels.saturate(n, len(labels) + 1, clo_ptr, clo_idx, vis_ptr, vis_lbl, vis_dst)
    return WeakLts(lts, labels, indptr, elbl, edst)


def disjoint_union(a: AnnotatedLts, b: AnnotatedLts) -> AnnotatedLts:
    """Both LTSs side by side; ``b``'s states are shifted by ``len(a.states)``."""
    off = a.num_states
    trans = list(a.transitions)
    trans += [tuple(Transition(t.src + off, t.label, t.dst + off, t.count) for t in out)
              for out in b.transitions]
    return AnnotatedLts(a.states + b.states, tuple(trans), a.initial,
                        a.complete and b.complete, a.limit + b.limit,
                        a.frontier | {f + off for f in b.frontier}, a.env)
