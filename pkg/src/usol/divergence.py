"""Divergences of syntactic solutions.

A divergence is an infinite run of tau steps, possibly after finitely many
visible ones. It is innocuous when the run unfolds solution constants only
finitely often. On a finite graph every infinite tau run ends up looping
inside one strongly connected component of the tau subgraph, so a reachable
divergence is non-innocuous exactly when some reachable tau-SCC contains a
tau edge whose unfolding count is positive.
"""

from __future__ import annotations

import time
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .equations import EquationSystem, SyntacticSolution, unfold
from .lts import AnnotatedLts, Env, Transition, default_bound, explore
from .terms import (
    Action, ConstRef, IndexedPrefix, NameCaptureWarning, Prefix, Term, ValueInput, Var,
    const_refs,
)

DIVERGENCE_FREE = "divergence-free"
ALL_INNOCUOUS = "all-innocuous"
NON_INNOCUOUS = "non-innocuous"
UNKNOWN = "unknown-truncated"

COMPLETE_EXPLORATION = "complete-exploration"
WITNESS_FOUND = "witness-found"
SYNTACTIC_CRITERION = "syntactic-criterion"


class Step(NamedTuple):
    src: int
    label: Action
    dst: int
    count: int


@dataclass(frozen=True)
class Lasso:
    """A path from the initial state followed by a tau cycle."""

    prefix: tuple[Step, ...]
    cycle: tuple[Step, ...]
    terms: dict = field(compare=False, repr=False)

    @property
    def annotated(self) -> bool:
        return any(s.count > 0 for s in self.cycle)

    def labels(self) -> tuple[list[str], list[str]]:
        return [str(s.label) for s in self.prefix], [str(s.label) for s in self.cycle]

    def to_dict(self) -> dict:
        def step(s: Step) -> dict:
            return {"from": self.terms[s.src], "label": str(s.label),
                    "to": self.terms[s.dst], "count": s.count}
        return {
            "prefix": [step(s) for s in self.prefix],
            "cycle": [step(s) for s in self.cycle],
            "annotated": self.annotated,
        }

    def __str__(self) -> str:
        pre, cyc = self.labels()
        counts = ",".join(str(s.count) for s in self.cycle)
        return f"prefix [{' '.join(pre)}] then cycle [{' '.join(cyc)}] counts [{counts}]"


def _tau_graph(lts: AnnotatedLts):
    n = lts.num_states
    rows = [sorted({t.dst for t in lts.out(s) if not t.label.visible}) for s in range(n)]
    indptr = np.zeros(n + 1, dtype=np.int64)
    for s, r in enumerate(rows):
        indptr[s + 1] = indptr[s] + len(r)
    indices = np.fromiter((d for r in rows for d in r), dtype=np.int64, count=int(indptr[-1]))
    return indptr, indices


def cycle_edges(lts: AnnotatedLts) -> list[Transition]:
    """Tau transitions lying on some tau cycle (both ends in one tau-SCC)."""
    indptr, indices = _tau_graph(lts)
    comp, _ = kernels.tau_scc(lts.num_states, indptr, indices)
    return [t for t in lts.edges() if not t.label.visible and comp[t.src] == comp[t.dst]]


def _bfs_path(lts: AnnotatedLts, start: int, goals: set[int], allowed=None) -> list[Transition] | None:
    """Shortest path from ``start`` to a goal; ``allowed`` filters edges."""
    if start in goals:
        return []
    parent: dict[int, Transition] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in lts.out(s):
            if allowed is not None and not allowed(t):
                continue
            if t.dst in seen:
                continue
            seen.add(t.dst)
            parent[t.dst] = t
            if t.dst in goals:
                path = []
                x = t.dst
                while x != start:
                    e = parent[x]
                    path.append(e)
                    x = e.src
                return path[::-1]
            queue.append(t.dst)
    return None


def find_divergence_witness(lts: AnnotatedLts) -> Lasso | None:
    """Shortest prefix to a tau-SCC plus an explicit tau cycle in it.

    Cycles through a positively annotated edge are preferred.
    """
    edges = cycle_edges(lts)
    if not edges:
        return None
    indptr, indices = _tau_graph(lts)
    comp, _ = kernels.tau_scc(lts.num_states, indptr, indices)
    annotated = [t for t in edges if t.count > 0]
    chosen = annotated or edges
    goals = {t.src for t in chosen}
    prefix = _bfs_path(lts, lts.initial, goals)
    if prefix is None:  # pragma: no cover - every state is reachable by construction
        return None
    entry = prefix[-1].dst if prefix else lts.initial
    edge = min((t for t in chosen if t.src == entry), key=lambda t: (-t.count, t.dst, str(t.label)))
    scc = comp[entry]
    inside = lambda t: (not t.label.visible) and comp[t.src] == scc and comp[t.dst] == scc  # noqa: E731
    back = _bfs_path(lts, edge.dst, {entry}, inside)
    assert back is not None
    cycle = [edge] + back
    used = {lts.initial} | {t.src for t in prefix + cycle} | {t.dst for t in prefix + cycle}
    terms = {s: lts.states[s].key for s in used}
    as_step = lambda t: Step(t.src, t.label, t.dst, t.count)  # noqa: E731
    return Lasso(tuple(map(as_step, prefix)), tuple(map(as_step, cycle)), terms)


def replay_lasso(lasso: Lasso, lts: AnnotatedLts, env: Env) -> bool:
    """Re-derive every step of the lasso with :meth:`Env.successors`."""
    steps = list(lasso.prefix) + list(lasso.cycle)
    if lasso.prefix and lasso.prefix[0].src != lts.initial:
        return False
    if lasso.cycle and lasso.cycle[0].src != lasso.cycle[-1].dst:
        return False
    for s in steps:
        src, dst = lts.states[s.src], lts.states[s.dst]
        if (s.label, dst, s.count) not in set(env.successors(src)):
            return False
    return all(not s.label.visible for s in lasso.cycle)


# -- syntactic criterion -----------------------------------------------------


@dataclass(frozen=True)
class EquationEvidence:
    variable: str
    depth: int | None
    guards: tuple[tuple[str, str], ...]
    blocking: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {"variable": self.variable, "depth": self.depth,
               "guards": [{"occurrence": v, "guard": a} for v, a in self.guards]}
        if self.blocking:
            out["unguarded_occurrences"] = list(self.blocking)
        return out


@dataclass(frozen=True)
class CriterionReport:
    satisfied: bool
    equations: tuple[EquationEvidence, ...]
    forbidden: tuple[str, ...]
    max_unfold: int

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "max_unfold": self.max_unfold,
            "actions_present": list(self.forbidden),
            "equations": [e.to_dict() for e in self.equations],
        }


def _actions_in(t: Term, env: Env | None) -> set[Action]:
    found: set[Action] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Prefix) and x.action.visible:
            found.add(x.action)
        elif isinstance(x, (ValueInput, IndexedPrefix)):
            raise ValueError("desugar value passing before checking the criterion")
        stack.extend(x.children())
    refs = const_refs(t)
    if refs:
        if env is None:
            raise ValueError(f"constants {sorted(refs)} need an environment")
        for name in refs:
            found |= env.sort(ConstRef(name))
    return found


def _guards(body: Term, good: set[Action]) -> tuple[list[tuple[str, str]], list[str]]:
    guarded: list[tuple[str, str]] = []
    bare: list[str] = []

    def go(t: Term, guard: Action | None) -> None:
        if isinstance(t, Var):
            if guard is None:
                bare.append(t.name)
            else:
                guarded.append((t.name, str(guard)))
            return
        if guard is None and isinstance(t, Prefix) and t.action in good:
            guard = t.action
        for c in t.children():
            go(c, guard)

    go(body, None)
    return guarded, bare


def syntactic_criterion(system: EquationSystem, max_unfold: int = 8,
                        env: Env | None = None) -> CriterionReport:
    """Sufficient condition for all divergences of the solution to be innocuous.

    Equation ``i`` passes at depth ``n`` when every variable occurrence in the
    ``n``-th unfolding of its body sits under a visible prefix whose
    complement occurs nowhere in the system (constants used by the system are
    included through their sorts).
    """
    present: set[Action] = set()
    for b in system.bodies:
        present |= _actions_in(b, env)
    good = {a for a in present if a.complement() not in present}
    # An occurrence in E^(k+1) is unprotected iff it arises from an unprotected
    # occurrence in E^k replaced by a body with an unprotected occurrence, so
    # equation i needs depth n iff the graph of unprotected occurrences has no
    # walk of length n from i. No unfolding has to be built to find n.
    bare = {}
    edges: dict[str, set[str]] = {}
    for var, body in zip(system.variables, system.bodies):
        _, bare[var] = _guards(body, good)
        edges[var] = set(bare[var])
    depths: dict[str, int] = {}
    walkers = {v for v, succ in edges.items() if succ}
    for n in range(1, max_unfold + 1):
        for v in system.variables:
            if v not in walkers and v not in depths:
                depths[v] = n
        walkers = {v for v, succ in edges.items() if succ & walkers}
    unfolded: dict[int, EquationSystem] = {}
    for n in sorted(set(depths.values())):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NameCaptureWarning)
            unfolded[n] = system if n == 1 else unfold(system, n)
    final = []
    for i, var in enumerate(system.variables):
        n = depths.get(var)
        if n is None:
            final.append(EquationEvidence(var, None, (), tuple(bare[var])))
            continue
        guarded, _ = _guards(unfolded[n].bodies[i], good)
        final.append(EquationEvidence(var, n, tuple(guarded)))
    final = tuple(final)
    return CriterionReport(
        satisfied=all(e.depth is not None for e in final),
        equations=final,
        forbidden=tuple(sorted(str(a) for a in present)),
        max_unfold=max_unfold,
    )


# -- analysis ----------------------------------------------------------------


@dataclass
class DivergenceReport:
    cls: str
    basis: str | None
    witness: Lasso | None = None
    equations: list[dict] = field(default_factory=list)
    criterion: CriterionReport | None = None
    zero_cycle: Lasso | None = None
    stats: dict = field(default_factory=dict)

    @property
    def innocuous_only(self) -> bool:
        return self.cls in (DIVERGENCE_FREE, ALL_INNOCUOUS)

    def to_dict(self, timing: bool = False) -> dict:
        out = {"class": self.cls, "basis": self.basis, "equations": self.equations}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        if self.zero_cycle is not None:
            out["innocuous_cycle"] = self.zero_cycle.to_dict()
        if self.criterion is not None:
            out["criterion"] = self.criterion.to_dict()
        if timing:
            out["stats"] = self.stats
        return out


def classify(lts: AnnotatedLts) -> tuple[str, Lasso | None]:
    """Classification of one explored LTS (ignoring any syntactic criterion)."""
    edges = cycle_edges(lts)
    if any(t.count > 0 for t in edges):
        return NON_INNOCUOUS, find_divergence_witness(lts)
    if not lts.complete:
        return UNKNOWN, find_divergence_witness(lts)
    if edges:
        return ALL_INNOCUOUS, find_divergence_witness(lts)
    return DIVERGENCE_FREE, None


FIRST_BOUND = 1_000
CRITERION_PROBE = 500


def _deepening(ref: Term, bound: int, env: Env):
    """Explore with growing bounds, stopping at the first decisive answer.

    A BFS fragment for a small bound is a subgraph of the fragment for any
    larger bound, so a non-innocuous cycle found early stays valid.
    """
    limit = min(bound, FIRST_BOUND)
    while True:
        lts = explore(ref, limit, env)
        cls, lasso = classify(lts)
        if cls != UNKNOWN or limit >= bound:
            return cls, lasso, lts
        limit = min(bound, limit * 10)


_RANK = {NON_INNOCUOUS: 0, UNKNOWN: 1, ALL_INNOCUOUS: 2, DIVERGENCE_FREE: 3}


def analyze_divergences(sol: SyntacticSolution, bound: int | None = None, env: Env | None = None,
                        use_criterion: bool = True, max_unfold: int = 8) -> DivergenceReport:
    """Classify the divergences of every solution constant.

    ``env`` holds the user constants; the solution constants are added here.
    With ``use_criterion`` the criterion is evaluated first. When it holds no
    non-innocuous divergence exists, so only a probe of ``CRITERION_PROBE``
    states is explored (to classify finite cases exactly and to record an
    innocuous cycle) and a truncated probe is settled by the criterion.
    """
    t0 = time.perf_counter()
    bound = bound or default_bound()
    env = (env or Env()).with_solution(sol)
    criterion = None
    if use_criterion:
        criterion = syntactic_criterion(sol.system, max_unfold, env)
        if criterion.satisfied:
            bound = min(bound, CRITERION_PROBE)
    overall = DIVERGENCE_FREE
    witness: Lasso | None = None
    zero: Lasso | None = None
    rows = []
    for var, ref in zip(sol.system.variables, sol.refs()):
        cls, lasso, lts = _deepening(ref, bound, env)
        rows.append({"variable": var, "class": cls, "states": lts.num_states,
                     "complete": lts.complete})
        if _RANK[cls] < _RANK[overall]:
            overall = cls
        if cls == NON_INNOCUOUS and witness is None:
            witness = lasso
        if lasso is not None and not lasso.annotated and zero is None:
            zero = lasso
    basis = COMPLETE_EXPLORATION
    if overall == NON_INNOCUOUS:
        basis = WITNESS_FOUND
    if overall == UNKNOWN:
        basis = None
        if criterion is not None and criterion.satisfied:
            overall, basis = ALL_INNOCUOUS, SYNTACTIC_CRITERION
    stats = {"seconds": round(time.perf_counter() - t0, 6),
             "states": sum(r["states"] for r in rows)}
    return DivergenceReport(overall, basis, witness, rows, criterion, zero, stats)
