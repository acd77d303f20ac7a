import random

import pytest
from hypothesis import given, settings, strategies as st

from qurts.fuzz import generate_program
from qurts.syntax import EMPTY, STATIC, LVar, TOwn, TPair, TQbit, TRef, parse_program
from qurts.typecheck import (LftPreorder, canon, check_program, classify_leaf, is_copy, is_drop,
                             subtype)

from conftest import REJECTED, corpus_files, load

Q = TQbit()
A = LVar("a")
B = LVar("b")


def rules(src):
    return [d.rule for d in check_program(parse_program(src))]


ACCEPTED = ["cx_chain.qrt", "and.qrt", "and3.qrt", "forget.qrt", "reinitialise.qrt", "my_cnot.qrt",
            "good_forget.qrt"]


@pytest.mark.parametrize("name", ACCEPTED)
def test_golden_accepted(name):
    assert check_program(load(name)) == []


def test_double_qif_rejected_by_drop_rule():
    diags = check_program(load("double_qif.qrt"))
    assert [d.rule for d in diags] == ["typ drop"]
    assert "q" in diags[0].message


def test_bad_forget_rejected_at_call():
    diags = check_program(load("bad_forget.qrt"))
    assert [d.rule for d in diags] == ["typ fn call"]


@pytest.mark.parametrize("path", [p for p in corpus_files() if p.name not in REJECTED],
                         ids=lambda p: p.name)
def test_corpus_well_typed(path):
    assert check_program(load(path)) == []


def test_diagnostic_json_has_rule_and_position():
    (d,) = check_program(load("double_qif.qrt"))
    j = d.to_json()
    assert j["rule"] == "typ drop" and j["line"] > 0 and j["function"] == "main"


def test_linear_qubit_cannot_be_dropped():
    assert rules("fn main() { let x = ket0; x as #'0 qbit; drop x; () }") == ["typ drop"]


def test_static_qubit_can_be_dropped():
    assert rules("fn main() { let x = ket0; drop x; () }") == []


def test_leftover_linear_variable():
    assert rules("fn main() { let x = ket0; x as #'0 qbit; () }") == ["typ block"]


def test_use_after_move():
    src = "fn main() -> #'0 qbit { let x = ket0; x as #'0 qbit; let y = H(x); let z = H(x); z }"
    assert rules(src) == ["typ unitary"]


def test_frozen_owner_cannot_be_used():
    src = ("fn main() -> #'0 qbit { let x = ket0; x as #'0 qbit; newlft 'a; let r = &'a x;"
           " let y = H(x); drop r; endlft 'a; y }")
    assert check_program(parse_program(src))[0].code == "E-FROZEN"


def test_endlft_with_live_reference():
    src = ("fn main() -> #'0 qbit { let x = ket0; x as #'0 qbit; newlft 'a; let r = &'a x;"
           " endlft 'a; drop r; x }")
    assert rules(src) == ["typ end lft"]


def test_measurement_under_quantum_control_rejected():
    src = ("fn main() -> #'0 qbit { let x = ket0; x as #'0 qbit; let t = ket0; t as #'0 qbit;"
           " newlft 'a; let r = &'a x;"
           " let y = qif r { let b = meas t; drop b; let z = ket0; z as #'0 qbit; z }"
           " else { t }; drop r; y as #'0 qbit; endlft 'a; let u = (x, y); drop u; () }")
    assert "typ qif" in rules(src)


def test_qif_branches_must_agree():
    src = ("fn main() { let x = ket0; x as #'0 qbit; let t = ket0; newlft 'a; let r = &'a x;"
           " let y = qif r { t } else { drop t; () }; drop r; drop y; endlft 'a; let m = meas x; drop m; () }")
    assert "typ qif" in rules(src)


def test_lifted_args_share_lifetime():
    src = ("fn main() { newlft 'a; let x = ket0; x as #'a qbit; let y = ket0; y as #'0 qbit;"
           " let p = [cnot](x, y); drop p; endlft 'a; () }")
    assert "typ lifted" in rules(src)


def test_unknown_lifted_table():
    assert "typ lifted" in rules("fn main() { let x = [nope](); drop x; () }")


def test_unitary_needs_linear_qubits():
    assert rules("fn main() { let x = ket0; let y = H(x); drop y; () }") == ["typ unitary"]


def test_borrow_for_external_lifetime_rejected():
    src = "fn f<'a>(x: #'0 qbit) -> #'0 qbit { let r = &'a x; drop r; x }"
    assert rules(src) == ["typ borrow"]


def test_signature_result_mismatch():
    assert rules("fn main() -> #'0 qbit { let x = ket0; x }") == ["typ fn"]


def test_coercion_must_be_subtype():
    assert rules("fn main() { let x = ket0; x as #'0 qbit; x as #'static qbit; drop x; () }") \
        == ["stmt coercion"]


def test_copy_of_qubit_rejected():
    assert "expr copy" in rules("fn main() { let x = ket0; let y = copy x; drop x; drop y; () }")


def test_classical_if_condition_must_be_bool():
    src = "fn main() { let x = ket0; let y = if x { () } else { () }; drop x; drop y; () }"
    assert "expr classical if" in rules(src)


def test_nonempty_lifetime_required_at_call():
    src = ("fn f<'a != '0>(x: #'a qbit) { drop x; }"
           " fn main() { let x = ket0; x as #'0 qbit; let u = f(x); drop u; () }")
    assert rules(src) == ["typ fn call"]


# -- subtyping and capabilities

def preorder():
    P = LftPreorder()
    P.add_var("a")
    P.add_var("b")
    P.add_leq(B, A)
    return P


def test_subtype_affine_to_linear():
    P = preorder()
    assert subtype(P, TOwn(A, Q), TOwn(EMPTY, Q))
    assert not subtype(P, TOwn(EMPTY, Q), TOwn(A, Q))


def test_subtype_shortens_lifetimes():
    P = preorder()
    assert subtype(P, TOwn(A, Q), TOwn(B, Q))
    assert not subtype(P, TOwn(B, Q), TOwn(A, Q))
    assert subtype(P, TOwn(STATIC, Q), TOwn(A, Q))


def test_reference_over_owned_collapses():
    P = preorder()
    assert subtype(P, TRef(A, TOwn(EMPTY, Q)), TRef(A, Q))


def test_canon_pushes_pointers_to_leaves():
    assert canon(TOwn(A, TPair(Q, Q))) == canon(TPair(TOwn(A, Q), TOwn(A, Q)))


def test_copy_and_drop_capabilities():
    P = preorder()
    assert is_copy(TRef(A, Q))
    assert not is_copy(TOwn(A, Q))
    assert is_drop(P, TOwn(A, Q), owned=True)
    assert not is_drop(P, TOwn(EMPTY, Q), owned=True)


def test_classify_leaf():
    live = lambda lf: lf == STATIC or lf == A
    assert classify_leaf((("#", A),), live) == "affine"
    assert classify_leaf((("#", B),), live) == "linear"
    assert classify_leaf((("&", A),), live) == "ref"
    assert classify_leaf((), live) == "linear"


LFTS = [EMPTY, STATIC, A, B]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(LFTS), st.sampled_from(LFTS), st.sampled_from(LFTS))
def test_subtype_is_transitive(x, y, z):
    P = preorder()
    t1, t2, t3 = TOwn(x, Q), TOwn(y, Q), TOwn(z, Q)
    if subtype(P, t1, t2) and subtype(P, t2, t3):
        assert subtype(P, t1, t3)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(LFTS))
def test_subtype_is_reflexive(x):
    assert subtype(preorder(), TOwn(x, Q), TOwn(x, Q))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_generated_programs_are_well_typed(seed):
    p = parse_program(generate_program(random.Random(seed)))
    assert check_program(p) == []
