import random

import pytest
from hypothesis import given, settings, strategies as st

from qurts.fuzz import generate_program
from qurts.syntax import (EIf, ELifted, EMeas, EQif, ParseError, SCoerce, SDrop, SLet, TOwn, TQbit,
                          ValidationError, parse_program, pretty_print, tokenize)

from conftest import corpus_files


def test_toy_program_shape():
    p = parse_program((__import__("conftest").CORPUS / "toy.qrt").read_text())
    f = p.get("main")
    kinds = [type(s).__name__ for s in f.body.stmts]
    assert kinds[:3] == ["SLet", "SCoerce", "SLet"]
    assert isinstance(f.body.stmts[0].expr, ELifted) and f.body.stmts[0].expr.table == "0"


def test_kets_are_lifted_constants():
    p = parse_program("fn main() -> #'static qbit { let x = ket1; x }")
    (s,) = p.get("main").body.stmts
    assert s.expr == ELifted("1", (), s.expr.span)


def test_meas_with_and_without_parens():
    for form in ("meas x", "meas(x)"):
        p = parse_program(f"fn main() -> #'static bool {{ let x = ket0; x as #'0 qbit; let b = {form}; b }}")
        assert isinstance(p.get("main").body.stmts[2].expr, EMeas)


def test_result_expression_sugar():
    p = parse_program("fn main() -> #'static bool { let x = ket0; x as #'0 qbit; meas x }")
    f = p.get("main")
    assert isinstance(f.body.stmts[-1], SLet)
    assert f.body.result == f.body.stmts[-1].target


def test_types():
    p = parse_program("fn f<'a != '0>(x: #'a qbit, y: &'a (qbit, qbit)) -> #'a qbit { drop y; x }")
    f = p.get("f")
    assert f.params[0].ty == TOwn(f.params[0].ty.lft, TQbit())
    assert f.nonempty == ("a",)


def test_qif_and_if_parse():
    src = ("fn main() -> #'static bool { let c = ket0; c as #'0 qbit; newlft 'a; let r = &'a c;"
           " let y = qif r { let o = ket1; o } else { let z = ket0; z }; drop y; drop r; endlft 'a;"
           " let b = meas c; let d = if b { let t = true; t } else { let t = false; t }; drop b; d }")
    stmts = parse_program(src).get("main").body.stmts
    assert any(isinstance(s, SLet) and isinstance(s.expr, EQif) for s in stmts)
    assert any(isinstance(s, SLet) and isinstance(s.expr, EIf) for s in stmts)
    assert any(isinstance(s, SDrop) for s in stmts)


def test_parse_error_position():
    with pytest.raises(ParseError) as ei:
        parse_program("fn main() {\n  let x = ;\n}")
    assert ei.value.line == 2


def test_reference_with_empty_lifetime_rejected():
    with pytest.raises(ValidationError):
        parse_program("fn main() { let x = ket0; let r = &'0 x; drop r; drop x; () }")


def test_duplicate_binding_rejected():
    with pytest.raises(ValidationError):
        parse_program("fn main() { let x = ket0; let x = ket1; drop x; () }")


def test_call_to_later_function_rejected():
    with pytest.raises(ValidationError):
        parse_program("fn main() { let u = g(); u } fn g() { () }")


def test_comments_and_primes_in_names():
    toks = tokenize("let y' = x; // trailing\n/* block */ drop y';")
    assert [t.text for t in toks if t.kind == "ident"] == ["y'", "x", "y'"]


def test_unknown_character():
    with pytest.raises(ParseError):
        tokenize("let x = $;")


def test_phase_angle_expression():
    p = parse_program("fn main() { let p = phase(-pi / 4)(); p }")
    e = p.get("main").body.stmts[0].expr
    assert abs(e.params[0] + 3.141592653589793 / 4) < 1e-12


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.name)
def test_pretty_print_round_trip_on_corpus(path):
    p = parse_program(path.read_text())
    assert parse_program(pretty_print(p)) == p


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_pretty_print_round_trip_on_generated_programs(seed):
    src = generate_program(random.Random(seed))
    p = parse_program(src)
    text = pretty_print(p)
    assert parse_program(text) == p
    assert pretty_print(parse_program(text)) == text


def test_coercion_statement():
    p = parse_program("fn main() { let x = ket0; x as #'static qbit; drop x; () }")
    assert isinstance(p.get("main").body.stmts[1], SCoerce)
