import random
import warnings

import pytest

from oracles import random_term
from usol.desugar import desugar_values
from usol.parser import CCSError, parse_process, parse_program, parse_term
from usol.terms import (
    NIL, TAU_ACTION, Action, ConstRef, NameCaptureWarning, Par, Prefix, Res, Sum, Var, inp, out,
    substitute,
)


def test_parallel_part_cannot_be_a_summand():
    with pytest.raises(CCSError):
        parse_term("a.b.0 + 'c.0 | tau")
    t = parse_term("(a.b.0 + 'c.0) | tau")
    assert isinstance(t, Par) and len(t.parts) == 2


def test_sum_of_prefixes():
    t = parse_term("a.0 + 'b.0 + tau.0")
    assert isinstance(t, Sum)
    assert [s.action for s in t.summands] == [inp("a"), out("b"), TAU_ACTION]


def test_parallel_and_restriction():
    t = parse_term("new a in (a.0 | 'a.0)")
    assert isinstance(t, Res) and t.name == "a"
    assert isinstance(t.body, Par)
    assert parse_term("(^a)(a.0 | 'a.0)") == t


def test_multi_name_restriction_nests():
    t = parse_term("new a, b in a.b.0")
    assert isinstance(t, Res) and isinstance(t.body, Res)
    assert {t.name, t.body.name} == {"a", "b"}


def test_trailing_prefix_means_nil():
    assert parse_term("a") == Prefix(inp("a"), NIL)


def test_variables_only_where_declared():
    t = parse_term("a.X", variables={"X"})
    assert t == Prefix(inp("a"), Var("X"))
    assert parse_term("a.X") == Prefix(inp("a"), ConstRef("X"))


@pytest.mark.parametrize("text", ["a.0 | ", "a.(b.0", "new in a.0", "1", "a.0 + b.0 | c.0 +", "+ a.0"])
def test_syntax_errors(text):
    with pytest.raises(CCSError) as info:
        parse_term(text)
    d = info.value.diagnostics[0]
    assert d.span is not None and d.span.line == 1


def test_unguarded_summand_rejected():
    with pytest.raises(CCSError) as info:
        parse_term("a.0 + (b.0 | c.0)")
    assert info.value.diagnostics[0].kind == "unguarded summand"


def test_program_declarations(paper):
    assert paper.constant("K").body == parse_term("tau.a.a.K")
    s1 = paper.system_decl("S1")
    assert [eq.var for eq in s1.equations] == ["X"]
    assert paper.candidate("CK").system == "S1"


def test_comments_and_layout():
    prog = parse_program("""
        -- a comment
        const P = a.P ;   -- trailing
        system S { X = a.X ; }
    """)
    assert [c.name for c in prog.constants] == ["P"]


def test_located_error_in_program():
    with pytest.raises(CCSError) as info:
        parse_program("const P = a.0 ;\nconst Q = b.(c.0 | ;\n")
    d = info.value.diagnostics[0]
    assert (d.span.line, d.span.col) == (2, 20)
    assert str(d).startswith("2:20: syntax error")


@pytest.mark.parametrize("text,kind", [
    ("const P = a.Q ;", "unknown constant"),
    ("const P = a.0 ; const P = b.0 ;", "duplicate"),
    ("candidates C for S = (0) ;", "unknown system"),
    ("system S { X = a.X ; X = b.X ; }", "duplicate"),
])
def test_validation_errors(text, kind):
    with pytest.raises(CCSError) as info:
        parse_program(text)
    assert any(d.kind == kind for d in info.value.diagnostics)


def test_several_errors_reported_together():
    with pytest.raises(CCSError) as info:
        parse_program("const P = a.Q ; const R = b.S ;")
    assert len(info.value.diagnostics) == 2


def test_constant_bodies_cannot_use_variables():
    with pytest.raises(CCSError):
        parse_program("system S { X = a.X ; } const P = a.X ;")


def test_print_parse_roundtrip_program(paper, server):
    for prog in (paper, server):
        again = parse_program(str(prog))
        assert str(again) == str(prog)
        if prog.is_pure:
            assert again.definitions() == prog.definitions()


def test_print_parse_roundtrip_random_terms():
    rng = random.Random(1)
    for _ in range(300):
        t = random_term(rng, 5, consts=("P", "Q"))
        assert parse_term(t.key) == t


def test_parse_process_checks_constants(paper):
    assert parse_process("K | H", paper) == Par([ConstRef("K"), ConstRef("H")])
    with pytest.raises(CCSError):
        parse_process("Nope", paper)


# -- value passing ---------------------------------------------------------


def test_server_desugars_to_pure_ccs(server):
    pure = desugar_values(server)
    assert pure.is_pure
    system = pure.equation_system("Server")
    assert system.variables == ("X_0", "X_1", "X_2", "X_3")
    # c(z:0..3) becomes a four-way choice over c_0 .. c_3
    body = system.body("X_0")
    assert isinstance(body, Sum) and len(body.summands) == 4
    assert {s.action for s in body.summands} == {inp(f"c_{z}") for z in range(4)}


def test_indices_wrap_modulo_domain(server):
    pure = desugar_values(server)
    defs = pure.definitions()
    # A(n) = 'a<n>.A(n+1) and A(3) continues as A(0)
    assert defs["A_3"] == Prefix(out("a_3"), ConstRef("A_0"))


def test_candidate_ranges_expand(server):
    pure = desugar_values(server)
    assert [str(p) for p in pure.candidate("Lazy").processes] == [f"SL_{n}" for n in range(4)]


def test_domain_error_located():
    with pytest.raises(CCSError) as info:
        desugar_values(parse_program("const A(n: 0..3) = a.A(7) ;"))
    assert info.value.diagnostics[0].span is not None


# -- substitution ----------------------------------------------------------


def test_substitution_is_syntactic():
    e = parse_term("a.X | new b in X", variables={"X"})
    r = substitute(e, {"X": parse_term("c.0")})
    assert r == parse_term("a.c.0 | new b in c.0")


def test_name_capture_warns():
    e = parse_term("new a in (X | 'a.0)", variables={"X"})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        substitute(e, {"X": parse_term("a.0")})
    assert any(issubclass(w.category, NameCaptureWarning) for w in caught)


def test_action_text():
    assert str(inp("a")) == "a" and str(out("a")) == "'a" and str(TAU_ACTION) == "tau"
    for a in (inp("a"), out("b"), TAU_ACTION):
        assert Action.parse(str(a)) == a
    assert out("a").complement() == inp("a")
