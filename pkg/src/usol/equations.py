"""Systems of equations: guardedness, unfoldings and syntactic solutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .terms import (
    ConstRef, IndexedPrefix, Par, Prefix, Res, Sum, Term, ValueInput, Var,
    free_variables, substitute,
)

DEFAULT_MAX_UNFOLD = 8

UNGUARDED = "unguarded"
WEAKLY_GUARDED = "weakly-guarded"
STRONGLY_GUARDED = "strongly-guarded"


@dataclass(frozen=True)
class EquationSystem:
    variables: tuple[str, ...]
    bodies: tuple[Term, ...]
    name: str = "S"

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "bodies", tuple(self.bodies))
        if len(self.variables) != len(self.bodies):
            raise ValueError("one body per variable is required")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("equation variables must be pairwise distinct")
        known = set(self.variables)
        for var, body in zip(self.variables, self.bodies):
            stray = free_variables(body) - known
            if stray:
                raise ValueError(f"body of {var} uses undeclared variable(s) {sorted(stray)}")

    @classmethod
    def of(cls, equations: Mapping[str, Term] | Iterable[tuple[str, Term]], name: str = "S"):
        items = list(equations.items()) if isinstance(equations, Mapping) else list(equations)
        return cls(tuple(v for v, _ in items), tuple(b for _, b in items), name)

    def __len__(self) -> int:
        return len(self.variables)

    def body(self, var: str) -> Term:
        return self.bodies[self.variables.index(var)]

    def binding(self, terms: Sequence[Term]) -> dict[str, Term]:
        if len(terms) != len(self.variables):
            raise ValueError(f"expected {len(self.variables)} terms, got {len(terms)}")
        return dict(zip(self.variables, terms))

    def instantiate(self, terms: Sequence[Term]) -> tuple[Term, ...]:
        """``E_i[terms]`` for every equation ``i``."""
        b = self.binding(terms)
        return tuple(substitute(e, b) for e in self.bodies)

    def __str__(self) -> str:
        eqs = " ".join(f"{v} = {b} ;" for v, b in zip(self.variables, self.bodies))
        return f"system {self.name} {{ {eqs} }}"


# -- guardedness -------------------------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    equation: str
    variable: str
    status: str
    sequential: bool
    path: tuple[str, ...]


@dataclass(frozen=True)
class GuardReport:
    occurrences: tuple[Occurrence, ...]
    guarded: bool
    strongly_guarded: bool
    sequential: bool
    depth: int | None
    strong_depth: int | None
    max_unfold: int

    @property
    def guardable(self) -> bool:
        return self.depth is not None

    @property
    def milner_applicable(self) -> bool:
        return self.strongly_guarded and self.sequential

    def unguarded(self) -> list[Occurrence]:
        return [o for o in self.occurrences if o.status == UNGUARDED]

    def to_dict(self) -> dict:
        return {
            "guarded": self.guarded,
            "strongly_guarded": self.strongly_guarded,
            "sequential": self.sequential,
            "depth": self.depth,
            "strong_depth": self.strong_depth,
            "max_unfold": self.max_unfold,
            "occurrences": [
                {
                    "equation": o.equation,
                    "variable": o.variable,
                    "status": o.status,
                    "sequential": o.sequential,
                    "path": list(o.path),
                }
                for o in self.occurrences
            ],
        }


def _node_kind(t: Term) -> str:
    if isinstance(t, Prefix):
        return str(t.action)
    if isinstance(t, (ValueInput, IndexedPrefix)):
        return t.chan
    if isinstance(t, Res):
        return f"new {t.name}"
    return {Sum: "+", Par: "|"}.get(type(t), type(t).__name__)


def occurrences(equation: str, body: Term) -> list[Occurrence]:
    """Walk ``body`` and classify every variable occurrence."""
    found: list[Occurrence] = []

    def go(t: Term, guard: str, seq: bool, path: tuple[str, ...]) -> None:
        if isinstance(t, Var):
            found.append(Occurrence(equation, t.name, guard, seq, path))
            return
        if isinstance(t, Prefix):
            if t.action.visible:
                guard = STRONGLY_GUARDED
            elif guard == UNGUARDED:
                guard = WEAKLY_GUARDED
        elif isinstance(t, (ValueInput, IndexedPrefix)):
            guard = STRONGLY_GUARDED
        elif not isinstance(t, Sum):
            seq = False
        for c in t.children():
            go(c, guard, seq, path + (_node_kind(t),))

    go(body, UNGUARDED, True, ())
    return found


def _first_guarded_depth(system: EquationSystem, bad: set[str], limit: int) -> int | None:
    """Smallest ``k <= limit`` with ``E^k`` free of ``bad`` occurrences.

    An occurrence of ``X_j`` in ``E_i^(k+1)`` is bad exactly when it comes from
    a bad ``X_m`` in ``E_i^k`` whose body has a bad ``X_j``, so ``E^k`` has a bad
    occurrence iff the graph of bad occurrences has a walk of length ``k``.
    Returns 0 when ``E`` itself is fine.
    """
    edges: dict[str, set[str]] = {v: set() for v in system.variables}
    for var, body in zip(system.variables, system.bodies):
        for occ in occurrences(var, body):
            if occ.status in bad:
                edges[var].add(occ.variable)
    walkers = {v for v, succ in edges.items() if succ}
    if not walkers:
        return 0
    for k in range(2, limit + 1):
        walkers = {v for v, succ in edges.items() if succ & walkers}
        if not walkers:
            return k
    return None


def check_guardedness(system: EquationSystem, max_unfold: int = DEFAULT_MAX_UNFOLD) -> GuardReport:
    occs: list[Occurrence] = []
    for var, body in zip(system.variables, system.bodies):
        occs.extend(occurrences(var, body))
    guarded = all(o.status != UNGUARDED for o in occs)
    strong = all(o.status == STRONGLY_GUARDED for o in occs)
    sequential = all(o.sequential for o in occs)
    return GuardReport(
        occurrences=tuple(occs),
        guarded=guarded,
        strongly_guarded=strong,
        sequential=sequential,
        depth=_first_guarded_depth(system, {UNGUARDED}, max_unfold),
        strong_depth=_first_guarded_depth(system, {UNGUARDED, WEAKLY_GUARDED}, max_unfold),
        max_unfold=max_unfold,
    )


# -- unfolding ---------------------------------------------------------------


def unfold(system: EquationSystem, n: int) -> EquationSystem:
    """The ``n``-th unfolding: ``E^1 = E`` and ``E^(k+1) = E^k[E]``."""
    if n < 1:
        raise ValueError("unfolding depth must be positive")
    binding = dict(zip(system.variables, system.bodies))
    bodies = system.bodies
    for _ in range(n - 1):
        bodies = tuple(substitute(b, binding) for b in bodies)
    return EquationSystem(system.variables, bodies, system.name)


# -- syntactic solutions -----------------------------------------------------

SOL_PREFIX = "#sol."


def is_solution_constant(name: str) -> bool:
    return name.startswith(SOL_PREFIX)


@dataclass(frozen=True)
class SyntacticSolution:
    """Mutually recursive constants ``K_i = E_i[K]``, one per equation."""

    system: EquationSystem
    names: tuple[str, ...]
    bodies: tuple[Term, ...]
    source: EquationSystem | None = field(default=None, compare=False)

    def ref(self, var: str) -> ConstRef:
        return ConstRef(self.names[self.system.variables.index(var)])

    def refs(self) -> tuple[ConstRef, ...]:
        return tuple(ConstRef(n) for n in self.names)

    def definitions(self) -> dict[str, Term]:
        return dict(zip(self.names, self.bodies))

    def __str__(self) -> str:
        return "\n".join(f"const {n} = {b} ;" for n, b in zip(self.names, self.bodies))


def syntactic_solution(system: EquationSystem, taken: Iterable[str] = (),
                       source: EquationSystem | None = None) -> SyntacticSolution:
    """Turn the system into constants ``#sol.<system>.<var>``.

    ``taken`` lists constant names already in use; clashes are resolved by
    appending primes.
    """
    taken = set(taken)
    names = []
    for var in system.variables:
        base = f"{SOL_PREFIX}{system.name}.{var}"
        name = base
        for _ in range(64):
            if name not in taken:
                break
            name += "'"
        else:
            raise ValueError(f"cannot find a fresh name for the solution of {var}")
        taken.add(name)
        names.append(name)
    binding = {v: ConstRef(n) for v, n in zip(system.variables, names)}
    bodies = tuple(substitute(b, binding) for b in system.bodies)
    return SyntacticSolution(system, tuple(names), bodies, source or system)
