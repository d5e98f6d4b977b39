import json
import random

import pytest

from oracles import brute_classify, random_graph, synthetic_lts
from usol.divergence import (
    ALL_INNOCUOUS, COMPLETE_EXPLORATION, DIVERGENCE_FREE, NON_INNOCUOUS, SYNTACTIC_CRITERION,
    UNKNOWN, WITNESS_FOUND, Lasso, Step, analyze_divergences, classify, cycle_edges,
    find_divergence_witness, replay_lasso, syntactic_criterion,
)
from usol.equations import syntactic_solution
from usol.lts import Env, explore
from usol.parser import parse_program
from usol.terms import TAU_ACTION, inp


def _solution(program, name):
    return syntactic_solution(program.equation_system(name), taken=program.definitions())


def _analyze(program, name, bound=1000, **kw):
    return analyze_divergences(_solution(program, name), bound, Env.from_program(program), **kw)


def _check_lasso(lasso, lts):
    steps = list(lasso.prefix) + list(lasso.cycle)
    assert (steps[0].src if steps else lts.initial) == lts.initial
    for a, b in zip(steps, steps[1:]):
        assert a.dst == b.src
    assert lasso.cycle and lasso.cycle[0].src == lasso.cycle[-1].dst
    assert all(not s.label.visible for s in lasso.cycle)
    edges = {(t.src, t.label, t.dst, t.count) for t in lts.edges()}
    assert all(tuple(s) in edges for s in steps)


def test_classification_matches_brute_force():
    rng = random.Random(21)
    seen = set()
    for _ in range(300):
        n = rng.randint(1, 40)
        edges = random_graph(rng, n, rng.uniform(0.3, 2.5), annotate=rng.choice([0.0, 0.3]))
        lts = synthetic_lts(n, edges)
        cls, lasso = classify(lts)
        assert cls == brute_classify(n, edges)
        seen.add(cls)
        if cls == DIVERGENCE_FREE:
            assert lasso is None
        else:
            _check_lasso(lasso, lts)
            assert lasso.annotated == (cls == NON_INNOCUOUS)
    assert seen == {DIVERGENCE_FREE, ALL_INNOCUOUS, NON_INNOCUOUS}


def test_witness_prefix_is_shortest():
    rng = random.Random(22)
    for _ in range(100):
        n = rng.randint(2, 30)
        lts = synthetic_lts(n, random_graph(rng, n, 2.0, annotate=0.5))
        lasso = find_divergence_witness(lts)
        if lasso is None:
            assert not cycle_edges(lts)
            continue
        # no state with a qualifying cycle edge is closer to the root
        goals = {t.src for t in cycle_edges(lts) if t.count > 0} or {t.src for t in cycle_edges(lts)}
        dist = {lts.initial: 0}
        frontier = [lts.initial]
        while frontier:
            nxt = []
            for s in frontier:
                for t in lts.out(s):
                    if t.dst not in dist:
                        dist[t.dst] = dist[s] + 1
                        nxt.append(t.dst)
            frontier = nxt
        assert len(lasso.prefix) == min(dist[g] for g in goals)


@pytest.mark.parametrize("name,satisfied", [
    ("S1", True), ("Innoc", True), ("Pre", True),
    ("Strange", False), ("Tau", False), ("DivL", False), ("Milner", False),
])
def test_criterion_examples(paper, name, satisfied):
    env = Env.from_program(paper)
    rep = syntactic_criterion(paper.equation_system(name), env=env)
    assert rep.satisfied == satisfied
    if satisfied:
        assert all(e.depth is not None and e.guards for e in rep.equations)
    else:
        assert any(e.blocking for e in rep.equations)


def test_criterion_sees_constant_sorts():
    prog = parse_program("const Q = 'a.0 ; system S { X = a.X | Q ; }")
    assert not syntactic_criterion(prog.equation_system("S"), env=Env.from_program(prog)).satisfied


def test_criterion_depth_through_unfolding():
    prog = parse_program("system S { X = tau.Y ; Y = a.X ; }")
    rep = syntactic_criterion(prog.equation_system("S"))
    assert rep.satisfied
    assert [e.depth for e in rep.equations] == [2, 1]


def test_analysis_examples(paper):
    s1 = _analyze(paper, "S1")
    assert (s1.cls, s1.basis) == (DIVERGENCE_FREE, COMPLETE_EXPLORATION)
    tau = _analyze(paper, "Tau")
    assert (tau.cls, tau.basis) == (NON_INNOCUOUS, WITNESS_FOUND)
    assert tau.witness.labels() == ([], ["tau"]) and tau.witness.cycle[0].count == 1
    innoc = _analyze(paper, "Innoc")
    assert (innoc.cls, innoc.basis) == (ALL_INNOCUOUS, SYNTACTIC_CRITERION)
    assert innoc.zero_cycle is not None and not innoc.zero_cycle.annotated


def test_without_criterion_infinite_innocuous_is_unknown(paper):
    rep = _analyze(paper, "Innoc", bound=200, use_criterion=False)
    assert rep.cls == UNKNOWN and rep.basis is None
    assert rep.equations[0]["states"] == 200 and not rep.equations[0]["complete"]


def test_witness_replays(paper):
    env = Env.from_program(paper)
    for name in ("Strange", "DivL", "Tau", "Milner"):
        sol = _solution(paper, name)
        full = env.with_solution(sol)
        lts = explore(sol.refs()[0], 1000, full)
        cls, lasso = classify(lts)
        assert cls == NON_INNOCUOUS
        assert replay_lasso(lasso, lts, full)
        # tampering with a count breaks the replay
        bad = lasso.cycle[0]._replace(count=lasso.cycle[0].count + 1)
        forged = Lasso(lasso.prefix, (bad,) + lasso.cycle[1:], lasso.terms)
        assert not replay_lasso(forged, lts, full)


def test_report_serialises(paper):
    d = _analyze(paper, "DivL").to_dict()
    json.dumps(d)
    assert d["class"] == NON_INNOCUOUS
    assert [s["label"] for s in d["witness"]["prefix"]] == ["a"]
    assert d["witness"]["annotated"] and "criterion" in d
    assert "stats" not in d and "stats" in _analyze(paper, "S1").to_dict(timing=True)


def test_lasso_text():
    lasso = Lasso((Step(0, inp("a"), 1, 0),), (Step(1, TAU_ACTION, 1, 2),), {})
    assert str(lasso) == "prefix [a] then cycle [tau] counts [2]"
