"""Weak bisimilarity, weak similarity and finite-trace relations.

Exact decisions work on complete explorations: the two LTSs are saturated
and handed to the partition-refinement or simulation kernel. Negative
answers come with a distinguishing formula rebuilt from the refinement
rounds (or a trace, for trace relations).

When an exploration is truncated, :func:`weak_bisim` tries an on-the-fly
game on pairs of states, working up to identical parallel components that
cannot talk to the rest of the pair. That route can only prove
bisimilarity; when it gets stuck the answer is ``unknown-truncated``.
"""

from __future__ import annotations

import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .equations import EquationSystem
from .lts import (
    AnnotatedLts, Env, WeakLts, components_of, default_bound, disjoint_union,
    explore, label_table, saturate,
)
from .terms import TAU_ACTION, Action, Term, make_par, substitute

HOLDS, FAILS, UNKNOWN = "holds", "fails", "unknown-truncated"

WEAK_BISIM, WEAK_SIM, TRACE_INCL, TRACE_EQ = "weak-bisim", "weak-sim", "trace-incl", "trace-eq"
RELATIONS = (WEAK_BISIM, WEAK_SIM, TRACE_INCL, TRACE_EQ)
_ALIASES = {"bisim": WEAK_BISIM, "sim": WEAK_SIM, "incl": TRACE_INCL, "eq": TRACE_EQ}
_INFINITARY = {"inf-trace", "inf-trace-incl", "inf-trace-eq", "infinitary-trace",
               "infinitary-trace-incl", "infinitary-trace-eq", "omega-trace"}

INFINITARY_REASON = (
    "infinitary trace relations are not supported: for X = a + a.X the syntactic "
    "solution has no divergence, yet solutions are not unique once infinite traces "
    "are observed, so no unique-solution argument applies"
)

PROBE_STATES = 2_000
GAME_STATES = 500


class UnsupportedRelationError(ValueError):
    pass


def normalise_relation(rel: str) -> str:
    r = rel.strip().lower()
    r = _ALIASES.get(r, r)
    if r in _INFINITARY or "infinit" in r:
        raise UnsupportedRelationError(INFINITARY_REASON)
    if r not in RELATIONS:
        raise UnsupportedRelationError(f"unknown relation {rel!r}; expected one of {', '.join(RELATIONS)}")
    return r


# -- distinguishing formulas -------------------------------------------------


class Formula:
    """Weak Hennessy-Milner formula. ``<<a>>`` is read over ``=>a=>``;
    ``<<tau>>`` means "after zero or more internal steps"."""

    __slots__ = ()

    def depth(self) -> int:
        raise NotImplementedError

    def holds(self, weak: WeakLts, state: int) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Top(Formula):
    def depth(self) -> int:
        return 0

    def holds(self, weak, state) -> bool:
        return True

    def __str__(self) -> str:
        return "true"


TRUE = Top()


@dataclass(frozen=True)
class Diamond(Formula):
    label: Action
    body: tuple[Formula, ...] = ()

    def depth(self) -> int:
        return 1 + max((f.depth() for f in self.body), default=0)

    def holds(self, weak, state) -> bool:
        return any(all(f.holds(weak, t) for f in self.body) for t in weak.weak_hat(state, self.label))

    def __str__(self) -> str:
        head = f"<<{self.label}>>"
        if not self.body:
            return head + "true"
        if len(self.body) == 1:
            return head + _atom(self.body[0])
        return head + "(" + " & ".join(_atom(f) for f in self.body) + ")"

    def moves(self) -> list[str]:
        """Labels along the first branch of the formula."""
        out = [str(self.label)]
        for f in self.body:
            while isinstance(f, Neg):
                f = f.body
            if isinstance(f, Diamond):
                return out + f.moves()
        return out


@dataclass(frozen=True)
class Neg(Formula):
    body: Formula

    def depth(self) -> int:
        return self.body.depth()

    def holds(self, weak, state) -> bool:
        return not self.body.holds(weak, state)

    def __str__(self) -> str:
        return "not " + _atom(self.body)


def _atom(f: Formula) -> str:
    s = str(f)
    return f"({s})" if " & " in s and not s.startswith("<<") else s


def _conj(parts: list[Formula]) -> tuple[Formula, ...]:
    seen: dict[str, Formula] = {}
    for f in parts:
        if not isinstance(f, Top):
            seen.setdefault(str(f), f)
    return tuple(seen[k] for k in sorted(seen, key=lambda s: (len(s), s)))


# -- results -----------------------------------------------------------------


@dataclass
class EquivResult:
    relation: str
    verdict: str
    witness: dict | None = None
    stats: dict = field(default_factory=dict)
    reason: str = ""
    formula: Formula | None = field(default=None, repr=False, compare=False)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict == FAILS

    @property
    def unknown(self) -> bool:
        return self.verdict == UNKNOWN

    def to_dict(self, timing: bool = False) -> dict:
        stats = {k: v for k, v in self.stats.items() if timing or k != "seconds"}
        out = {"relation": self.relation, "verdict": self.verdict, "stats": stats}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.reason:
            out["reason"] = self.reason
        return out


def _result(rel, verdict, t0, stats, **kw) -> EquivResult:
    stats = dict(stats)
    stats["seconds"] = round(time.perf_counter() - t0, 6)
    return EquivResult(rel, verdict, stats=stats, **kw)


def _pair_stats(lp: AnnotatedLts, lq: AnnotatedLts, method: str) -> dict:
    return {
        "method": method,
        "lhs_states": lp.num_states,
        "rhs_states": lq.num_states,
        "lhs_complete": lp.complete,
        "rhs_complete": lq.complete,
    }


# -- weak bisimilarity -------------------------------------------------------


def _first_split(rounds: list[np.ndarray], a: int, b: int) -> int | None:
    for r, blocks in enumerate(rounds):
        if blocks[a] != blocks[b]:
            return r
    return None


def _edges_by_label(weak: WeakLts, s: int) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    lo, hi = weak.indptr[s], weak.indptr[s + 1]
    for lbl, dst in zip(weak.edge_label[lo:hi].tolist(), weak.edge_dst[lo:hi].tolist()):
        out.setdefault(lbl, []).append(dst)
    return out


def bisim_formula(weak: WeakLts, rounds: list[np.ndarray], p: int, q: int) -> Formula:
    """Formula true at ``p`` and false at ``q``, of minimal modal depth."""
    memo: dict[tuple[int, int], Formula] = {}

    def dist(a: int, b: int) -> Formula:
        key = (a, b)
        hit = memo.get(key)
        if hit is not None:
            return hit
        r = _first_split(rounds, a, b)
        if r is None or r == 0:
            raise ValueError("states are not separated by refinement")
        prev = rounds[r - 1]
        ea, eb = _edges_by_label(weak, a), _edges_by_label(weak, b)
        sig_b = {(lbl, prev[t]) for lbl, ts in eb.items() for t in ts}
        for lbl in sorted(ea):
            for t in ea[lbl]:
                if (lbl, prev[t]) not in sig_b:
                    body = _conj([dist(t, u) for u in eb.get(lbl, [])])
                    f: Formula = Diamond(weak.label_of(lbl), body)
                    memo[key] = f
                    return f
        f = Neg(dist(b, a))
        memo[key] = f
        return f

    return dist(p, q)


def _exact_bisim(lp: AnnotatedLts, lq: AnnotatedLts, t0: float) -> EquivResult:
    union = disjoint_union(lp, lq)
    weak = saturate(union)
    n = union.num_states
    rounds = kernels.refine(n, weak.indptr, weak.edge_label, weak.edge_dst, np.zeros(n, dtype=np.int64))
    a, b = lp.initial, lp.num_states + lq.initial
    stats = _pair_stats(lp, lq, "partition-refinement")
    stats["rounds"] = len(rounds) - 1
    if rounds[-1][a] == rounds[-1][b]:
        return _result(WEAK_BISIM, HOLDS, t0, stats)
    f = bisim_formula(weak, rounds, a, b)
    witness = {"kind": "formula", "formula": str(f), "depth": f.depth(), "satisfied_by": "lhs"}
    if isinstance(f, Diamond):
        witness["moves"] = f.moves()
    return _result(WEAK_BISIM, FAILS, t0, stats, witness=witness, formula=f)


def _explore_both(p: Term, q: Term, bound: int, env: Env) -> tuple[AnnotatedLts, AnnotatedLts]:
    return explore(p, bound, env), explore(q, bound, env)


def weak_bisim(p: Term, q: Term, bound: int | None = None, env: Env | None = None,
               upto: bool = True) -> EquivResult:
    t0 = time.perf_counter()
    bound = bound or default_bound()
    env = env or Env()
    probe = min(bound, PROBE_STATES) if upto else bound
    lp, lq = _explore_both(p, q, probe, env)
    if lp.complete and lq.complete:
        return _exact_bisim(lp, lq, t0)
    if upto:
        game = UpToBisimGame(env, min(bound, GAME_STATES))
        if game.run(env.canon(p), env.canon(q)):
            stats = {"method": "on-the-fly-upto-inert-context", **game.stats()}
            return _result(WEAK_BISIM, HOLDS, t0, stats)
        if probe < bound:
            lp, lq = _explore_both(p, q, bound, env)
            if lp.complete and lq.complete:
                return _exact_bisim(lp, lq, t0)
    stats = _pair_stats(lp, lq, "partition-refinement")
    return _result(WEAK_BISIM, UNKNOWN, t0, stats,
                   reason=f"state space exceeds {bound} states")


class UpToBisimGame:
    """Weak bisimulation game explored on the fly.

    Pairs are normalised by removing identical parallel components whose sort
    cannot synchronise with anything else in the pair; identical pairs count
    as won. If the initial pair survives the greatest-fixpoint pruning, the
    surviving pairs, closed under such inert contexts, form a weak
    bisimulation. A lost game proves nothing.
    """

    def __init__(self, env: Env, budget: int):
        self.env = env
        self.budget = budget
        self._closure: dict[Term, frozenset[Term]] = {}
        self._moves: dict[Term, list[tuple[Action, Term, int]]] = {}
        self.pairs: dict[tuple[Term, Term], list[list[tuple[Term, Term]]]] = {}
        self.exhausted = False

    def stats(self) -> dict:
        return {"pairs": len(self.pairs), "states": len(self._moves)}

    def moves(self, s: Term):
        hit = self._moves.get(s)
        if hit is None:
            if len(self._moves) >= self.budget:
                raise _Budget()
            hit = self.env.successors(s)
            self._moves[s] = hit
        return hit

    def closure(self, s: Term) -> frozenset[Term]:
        hit = self._closure.get(s)
        if hit is not None:
            return hit
        seen = {s}
        todo = [s]
        while todo:
            x = todo.pop()
            for mu, d, _ in self.moves(x):
                if not mu.visible and d not in seen:
                    seen.add(d)
                    todo.append(d)
        hit = frozenset(seen)
        self._closure[s] = hit
        return hit

    def weak_hat(self, s: Term, mu: Action) -> set[Term]:
        if not mu.visible:
            return set(self.closure(s))
        out: set[Term] = set()
        for x in self.closure(s):
            for nu, d, _ in self.moves(x):
                if nu == mu:
                    out |= self.closure(d)
        return out

    def normalise(self, p: Term, q: Term) -> tuple[Term, Term]:
        if p == q:
            return p, q
        pc, qc = Counter(components_of(p)), Counter(components_of(q))
        common = pc & qc
        if not common:
            return p, q
        pr, qr = pc - common, qc - common
        strip = list(common.elements())
        kept: list[Term] = []
        while True:
            rest = list(pr.elements()) + list(qr.elements()) + kept
            co: set[Action] = set()
            for c in rest:
                co |= {a.complement() for a in self.env.sort(c)}
            moved = [c for c in strip if self.env.sort(c) & co]
            if not moved:
                break
            kept += moved
            strip = [c for c in strip if not (self.env.sort(c) & co)]
        key = lambda t: t.key  # noqa: E731
        lhs = make_par(sorted(list(pr.elements()) + kept, key=key))
        rhs = make_par(sorted(list(qr.elements()) + kept, key=key))
        return lhs, rhs

    def _challenges(self, p: Term, q: Term, flip: bool) -> list[list[tuple[Term, Term]]] | None:
        out = []
        for mu, p2, _ in self.moves(p):
            cands = []
            won = False
            for q2 in sorted(self.weak_hat(q, mu), key=lambda t: t.key):
                pair = self.normalise(q2, p2) if flip else self.normalise(p2, q2)
                if pair[0] == pair[1]:
                    won = True
                    break
                cands.append(pair)
            if won:
                continue
            if not cands:
                return None
            out.append(cands)
        return out

    def run(self, p: Term, q: Term) -> bool:
        start = self.normalise(p, q)
        if start[0] == start[1]:
            return True
        queue = deque([start])
        dead: set[tuple[Term, Term]] = set()
        try:
            while queue:
                pair = queue.popleft()
                if pair in self.pairs or pair in dead:
                    continue
                left = self._challenges(pair[0], pair[1], False)
                right = self._challenges(pair[1], pair[0], True) if left is not None else None
                if left is None or right is None:
                    dead.add(pair)
                    if pair == start:
                        return False
                    continue
                self.pairs[pair] = left + right
                if len(self.pairs) > self.budget:
                    raise _Budget()
                for cands in left + right:
                    for c in cands:
                        if c not in self.pairs and c not in dead:
                            queue.append(c)
        except _Budget:
            self.exhausted = True
            return False
        alive = set(self.pairs)
        changed = True
        while changed:
            changed = False
            for pair in list(alive):
                if any(not any(c in alive for c in cands) for cands in self.pairs[pair]):
                    alive.discard(pair)
                    changed = True
        return start in alive


class _Budget(Exception):
    pass


# -- weak similarity ---------------------------------------------------------


def sim_formula(wp: WeakLts, wq: WeakLts, removed: np.ndarray, p: int, q: int) -> Formula:
    """Negation-free formula true at ``p`` (in ``wp``) and false at ``q``."""
    memo: dict[tuple[int, int], Formula] = {}

    def present(a: int, b: int, rnd: int) -> bool:
        r = removed[a, b]
        return r == 0 or r >= rnd

    def dist(a: int, b: int) -> Formula:
        hit = memo.get((a, b))
        if hit is not None:
            return hit
        rnd = int(removed[a, b])
        ea, eb = _edges_by_label(wp, a), _edges_by_label(wq, b)
        for lbl in sorted(ea):
            for t in ea[lbl]:
                us = eb.get(lbl, [])
                if not any(present(t, u, rnd) for u in us):
                    f = Diamond(wp.label_of(lbl), _conj([dist(t, u) for u in us]))
                    memo[(a, b)] = f
                    return f
        raise ValueError("pair was not removed by the simulation kernel")

    return dist(p, q)


def weak_sim(p: Term, q: Term, bound: int | None = None, env: Env | None = None) -> EquivResult:
    """Does ``q`` weakly simulate ``p``?"""
    t0 = time.perf_counter()
    bound = bound or default_bound()
    env = env or Env()
    lp, lq = _explore_both(p, q, bound, env)
    stats = _pair_stats(lp, lq, "simulation-fixpoint")
    if not (lp.complete and lq.complete):
        return _result(WEAK_SIM, UNKNOWN, t0, stats, reason=f"state space exceeds {bound} states")
    labels = label_table(lp, label_table(lq))
    wp, wq = saturate(lp, labels), saturate(lq, labels)
    removed = kernels.simulation(lp.num_states, wp.indptr, wp.edge_label, wp.edge_dst,
                                 lq.num_states, wq.indptr, wq.edge_label, wq.edge_dst)
    if removed[lp.initial, lq.initial] == 0:
        return _result(WEAK_SIM, HOLDS, t0, stats)
    f = sim_formula(wp, wq, removed, lp.initial, lq.initial)
    witness = {"kind": "formula", "formula": str(f), "depth": f.depth(),
               "satisfied_by": "lhs", "moves": f.moves()}
    return _result(WEAK_SIM, FAILS, t0, stats, witness=witness, formula=f)


# -- finite traces -----------------------------------------------------------


def _label_masks(weak: WeakLts) -> list[list[int]]:
    """``masks[lbl][s]``: bitmask of the ``lbl``-successors of ``s``."""
    masks = [[0] * weak.num_states for _ in range(len(weak.labels) + 1)]
    src = np.repeat(np.arange(weak.num_states), np.diff(weak.indptr))
    for s, lbl, d in zip(src.tolist(), weak.edge_label.tolist(), weak.edge_dst.tolist()):
        masks[lbl][s] |= 1 << d
    return masks


def _trace_inclusion(wp: WeakLts, wq: WeakLts) -> list[str] | None:
    """Shortest visible trace of ``wp`` missing from ``wq``, or ``None``.

    Breadth-first subset construction on ``wq`` with antichain pruning: a pair
    ``(p, S)`` is skipped when some visited ``(p, S')`` has ``S' <= S``.
    Subsets are bitmasks over the states of ``wq``.
    """
    masks = _label_masks(wq)
    post: dict[tuple[int, int], int] = {}

    def step(subset: int, lbl: int) -> int:
        key = (subset, lbl)
        if key not in post:
            row, out, rest = masks[lbl], 0, subset
            while rest:
                low = rest & -rest
                out |= row[low.bit_length() - 1]
                rest ^= low
            post[key] = out
        return post[key]

    edges = [_edges_by_label(wp, p) for p in range(wp.num_states)]
    start_set = masks[0][wq.lts.initial]
    visited: dict[int, list[int]] = {wp.lts.initial: [start_set]}
    queue = deque([(wp.lts.initial, start_set, ())])
    while queue:
        p, subset, trace = queue.popleft()
        for lbl in sorted(k for k in edges[p] if k > 0):
            s2 = step(subset, lbl)
            trace2 = trace + (str(wp.label_of(lbl)),)
            if not s2:
                return list(trace2)
            for p2 in edges[p][lbl]:
                seen = visited.setdefault(p2, [])
                if any(old & ~s2 == 0 for old in seen):
                    continue
                seen[:] = [old for old in seen if s2 & ~old]
                seen.append(s2)
                queue.append((p2, s2, trace2))
    return None


def trace_relation(p: Term, q: Term, mode: str = "incl", bound: int | None = None,
                   env: Env | None = None) -> EquivResult:
    t0 = time.perf_counter()
    rel = normalise_relation({"incl": TRACE_INCL, "eq": TRACE_EQ}.get(mode, mode))
    if rel not in (TRACE_INCL, TRACE_EQ):
        raise UnsupportedRelationError(f"mode must be incl or eq, not {mode!r}")
    bound = bound or default_bound()
    env = env or Env()
    lp, lq = _explore_both(p, q, bound, env)
    stats = _pair_stats(lp, lq, "antichain-subset-construction")
    if not (lp.complete and lq.complete):
        return _result(rel, UNKNOWN, t0, stats, reason=f"state space exceeds {bound} states")
    labels = label_table(lp, label_table(lq))
    wp, wq = saturate(lp, labels), saturate(lq, labels)
    missing = _trace_inclusion(wp, wq)
    if missing is not None:
        return _result(rel, FAILS, t0, stats,
                       witness={"kind": "trace", "trace": missing, "has_trace": "lhs"})
    if rel == TRACE_EQ:
        missing = _trace_inclusion(wq, wp)
        if missing is not None:
            return _result(rel, FAILS, t0, stats,
                           witness={"kind": "trace", "trace": missing, "has_trace": "rhs"})
    return _result(rel, HOLDS, t0, stats)


def decide(rel: str, p: Term, q: Term, bound: int | None = None, env: Env | None = None) -> EquivResult:
    rel = normalise_relation(rel)
    if rel == WEAK_BISIM:
        return weak_bisim(p, q, bound, env)
    if rel == WEAK_SIM:
        return weak_sim(p, q, bound, env)
    return trace_relation(p, q, "incl" if rel == TRACE_INCL else "eq", bound, env)


def check_solution(system: EquationSystem, candidates: Sequence[Term], relation: str = WEAK_BISIM,
                   bound: int | None = None, env: Env | None = None) -> list[EquivResult]:
    """Decide ``P_i R E_i[P]`` for every equation ``i``."""
    relation = normalise_relation(relation)
    if relation not in (WEAK_BISIM, TRACE_EQ):
        raise UnsupportedRelationError("solutions are checked for weak-bisim or trace-eq")
    instances = system.instantiate(tuple(candidates))
    results = []
    for var, lhs, rhs in zip(system.variables, candidates, instances):
        res = decide(relation, lhs, rhs, bound, env)
        res.stats["equation"] = var
        results.append(res)
    return results
