"""Random equation systems for property tests."""

from __future__ import annotations

import random

from usol.equations import EquationSystem
from usol.terms import NIL, TAU_ACTION, Prefix, Res, Term, Var, inp, make_par, make_sum, out

VARS = ("X", "Y")


def _body(rng: random.Random, depth: int, vars_, actions, guarded: bool, par_rate: float) -> Term:
    """Random expression; with ``guarded`` every variable sits under a prefix."""
    if depth <= 0 or rng.random() < 0.2:
        if not guarded and rng.random() < 0.6:
            return Var(rng.choice(vars_))
        return NIL
    roll = rng.random()
    if roll < 0.45:
        cont = (Var(rng.choice(vars_)) if rng.random() < 0.5
                else _body(rng, depth - 1, vars_, actions, False, par_rate))
        return Prefix(rng.choice(actions), cont)
    if roll < 0.7:
        parts = [_body(rng, depth - 1, vars_, actions, guarded, par_rate) for _ in range(2)]
        parts = [p if isinstance(p, Prefix) else Prefix(rng.choice(actions), p) for p in parts]
        return make_sum(parts)
    if roll < 0.7 + par_rate:
        return make_par([_body(rng, depth - 1, vars_, actions, guarded, par_rate) for _ in range(2)])
    return Res(rng.choice("ab"), _body(rng, depth - 1, vars_, actions, guarded, par_rate))


def random_system(rng: random.Random, guarded: bool = False, par_rate: float = 0.1) -> EquationSystem:
    n = rng.randint(1, 2)
    vars_ = VARS[:n]
    actions = [inp("a"), out("a"), inp("b"), out("b"), TAU_ACTION]
    bodies = [_body(rng, 3, vars_, actions, guarded, par_rate) for _ in vars_]
    return EquationSystem(tuple(vars_), tuple(bodies), name="R")


def random_criterion_system(rng: random.Random) -> EquationSystem:
    """Random system over a random action subset, biased towards the criterion."""
    pool = [inp("a"), out("a"), inp("b"), out("b"), inp("c"), out("c"), TAU_ACTION]
    actions = rng.sample(pool, rng.randint(2, 5))
    if TAU_ACTION not in actions and rng.random() < 0.5:
        actions.append(TAU_ACTION)
    n = rng.randint(1, 2)
    vars_ = VARS[:n]
    bodies = [_body(rng, 3, vars_, actions, rng.random() < 0.7, 0.2) for _ in vars_]
    return EquationSystem(tuple(vars_), tuple(bodies), name="G")
