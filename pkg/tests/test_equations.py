import random

import pytest

from gen_systems import random_system
from usol.equations import (
    STRONGLY_GUARDED, UNGUARDED, WEAKLY_GUARDED, EquationSystem, check_guardedness,
    is_solution_constant, syntactic_solution, unfold,
)
from usol.parser import parse_term
from usol.terms import ConstRef, Prefix, free_variables, inp

pytestmark = pytest.mark.filterwarnings("ignore::usol.terms.NameCaptureWarning")


def system(**eqs):
    vars_ = set(eqs)
    return EquationSystem.of({v: parse_term(b, variables=vars_) for v, b in eqs.items()})


def test_system_validation():
    with pytest.raises(ValueError):
        EquationSystem(("X",), ())
    with pytest.raises(ValueError):
        EquationSystem(("X", "X"), (parse_term("0"), parse_term("0")))
    with pytest.raises(ValueError):
        EquationSystem(("X",), (parse_term("a.Y", variables={"Y"}),))


@pytest.mark.parametrize("name,guarded,strong,sequential", [
    ("S1", True, True, True),
    ("Tau", True, False, True),
    ("Loop", False, False, True),
    ("ParA", False, False, False),
    ("Milner", True, True, False),
    ("Strange", True, True, False),
])
def test_guard_report_examples(paper, name, guarded, strong, sequential):
    r = check_guardedness(paper.equation_system(name))
    assert (r.guarded, r.strongly_guarded, r.sequential) == (guarded, strong, sequential)
    assert r.milner_applicable == (strong and sequential)


def test_occurrence_statuses():
    r = check_guardedness(system(X="(a.X + tau.X + tau.a.X) | X"))
    assert [o.status for o in r.occurrences] == [
        STRONGLY_GUARDED, WEAKLY_GUARDED, STRONGLY_GUARDED, UNGUARDED,
    ]
    assert r.unguarded()[0].path == ("|",)
    assert not r.sequential


def test_loop_is_never_guardable(paper):
    r = check_guardedness(paper.equation_system("Loop"), max_unfold=8)
    assert r.depth is None and not r.guardable


def test_unguarded_system_fixed_by_unfolding():
    s = system(X="Y", Y="a.X")
    r = check_guardedness(s)
    assert not r.guarded and r.depth == 2
    assert check_guardedness(unfold(s, 2)).guarded


def test_strong_depth_counts_weak_guards():
    s = system(X="tau.Y", Y="a.X")
    r = check_guardedness(s)
    assert r.guarded and not r.strongly_guarded
    assert r.depth == 0 and r.strong_depth == 2


def test_guard_depth_is_exact_on_random_systems():
    rng = random.Random(5)
    for _ in range(150):
        s = random_system(rng)
        r = check_guardedness(s, max_unfold=5)
        for k in range(1, 6):
            ok = check_guardedness(unfold(s, k)).guarded
            if r.depth is not None and k >= max(r.depth, 1):
                assert ok
            if r.depth is None or k < r.depth:
                assert not ok


def test_unfold_basics():
    s = system(X="a.X")
    assert unfold(s, 1) == s
    assert unfold(s, 3).body("X") == parse_term("a.a.a.X", variables={"X"})
    with pytest.raises(ValueError):
        unfold(s, 0)


def test_unfold_composes():
    rng = random.Random(9)
    for _ in range(100):
        s = random_system(rng)
        for m, n in ((1, 2), (2, 2), (3, 1)):
            lhs = unfold(s, m * n)
            rhs = unfold(unfold(s, m), n)
            assert lhs.bodies == rhs.bodies


def test_syntactic_solution_names_and_bodies(paper):
    s = paper.equation_system("S1")
    sol = syntactic_solution(s)
    assert sol.names == ("#sol.S1.X",)
    assert is_solution_constant(sol.names[0]) and not is_solution_constant("K")
    body = sol.definitions()["#sol.S1.X"]
    assert not free_variables(body)
    assert body == Prefix(inp("a"), ConstRef("#sol.S1.X"))


def test_syntactic_solution_avoids_taken_names():
    s = system(X="a.X")
    sol = syntactic_solution(s, taken={"#sol.S.X"})
    assert sol.names == ("#sol.S.X'",)
    assert sol.ref("X") == ConstRef("#sol.S.X'")


def test_instantiate_substitutes_all_equations():
    s = system(X="a.Y", Y="b.X")
    got = s.instantiate([parse_term("0"), parse_term("c.0")])
    assert got == (parse_term("a.c.0"), parse_term("b.0"))
    with pytest.raises(ValueError):
        s.instantiate([parse_term("0")])


def test_guard_report_serialises():
    d = check_guardedness(system(X="tau.X")).to_dict()
    assert d["guarded"] and not d["strongly_guarded"]
    assert d["occurrences"][0]["path"] == ["tau"]
