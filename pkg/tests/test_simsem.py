import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qurts import qstate as qs
from qurts.simsem import (Env, SimulationError, check_well_formed, eval_program, eval_statement,
                          eval_with_depgraph, outcome_bits, well_formed_state)
from qurts.syntax import LVar, TOwn, TQbit, parse_program
from qurts.typecheck import Entry, LftPreorder, TyState

from conftest import checked, load, well_typed_files

S2 = 1 / math.sqrt(2)


def test_toy_trace_states():
    (b0, b1) = eval_program(load("toy.qrt"))
    steps = {t.stmt.split("\n")[0]: t for t in b0.trace}
    assert np.allclose(steps["let x0 = [0]()"].q.vector(), [1, 0])
    assert np.allclose(steps["let x1 = H(x0)"].q.vector(), [S2, S2])
    assert np.allclose(steps["let y = qif r {"].q.vector(), [S2, 0, 0, S2])
    assert np.allclose(steps["drop y"].q.vector(), [S2, S2])
    assert abs(b0.probability - 0.5) < 1e-9 and abs(b1.probability - 0.5) < 1e-9
    assert outcome_bits(b0) == (0,) and outcome_bits(b1) == (1,)


def test_entry_inputs_as_basis_bits():
    p = load("toffoli.qrt")
    for x in (0, 1):
        for z in (0, 1):
            (b,) = eval_program(p, inputs=[x, z])
            res = b.env.loc["result"]
            vec = b.env.q.vector(tuple(res))
            idx = int(np.argmax(np.abs(vec)))
            bits = [(idx >> (2 - i)) & 1 for i in range(3)]
            assert bits == [x, z, x & z]


def test_measurement_splits_branches():
    branches = eval_program(load("ghz.qrt"))
    live = [b for b in branches if not b.zero]
    assert sorted(outcome_bits(b) for b in live) == [(0, 0, 0), (1, 1, 1)]
    assert all(abs(b.probability - 0.5) < 1e-9 for b in live)


def test_classical_if_follows_measurement():
    for b in eval_program(load("meas_then_qif.qrt")):
        assert b.probability > 0


def test_grover_marked_string():
    branches = {outcome_bits(b): b.probability for b in eval_program(load("grover3.qrt"))}
    assert abs(branches[(1, 0, 1)] - 121 / 128) < 1e-9


@pytest.mark.parametrize("path", well_typed_files(), ids=lambda p: p.name)
def test_probability_conserved_with_dependency_checks(path):
    branches = eval_with_depgraph(load(path))
    assert abs(sum(b.probability for b in branches) - 1) < 1e-9


def test_qif_with_swapped_results():
    p = load("qif_swap.qrt")
    (b0, b1) = eval_program(p)
    assert abs(b0.probability + b1.probability - 1) < 1e-9


def test_well_formed_state_detects_entangled_affine():
    bell = qs.QState.from_vector((0, 1), [S2, 0, 0, S2])
    assert well_formed_state(bell, frozen=[0], linear=[], affine=[1])
    assert not well_formed_state(bell, frozen=[], linear=[0], affine=[1])


def test_check_well_formed_env():
    A = LftPreorder()
    A.add_var("a")
    st_ = TyState({"x": Entry(TOwn(LVar("a"), TQbit()))}, A)
    plus = qs.QState.from_vector((0,), [S2, S2])
    zero = qs.QState.basis((0,), (0,))
    assert check_well_formed(Env({"x": [0]}, zero, {}), st_)
    assert not check_well_formed(Env({"x": [0]}, plus, {}), st_)


def test_eval_statement_single_step():
    A = LftPreorder()
    st_ = TyState({}, A)
    (env,) = eval_statement(Env({}, qs.QState.scalar(), {}), parse_program(
        "fn main() { let x = ket1; drop x; () }").get("main").body.stmts[0], st_)
    assert np.allclose(env.q.vector(), [0, 1])
    assert list(env.loc) == ["x"]


def test_interpreter_stops_at_ill_typed_statement():
    from qurts.typecheck import TypeDiagnostic
    with pytest.raises(TypeDiagnostic) as ei:
        eval_program(load("double_qif.qrt"))
    assert ei.value.rule == "typ drop"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.floats(0, 2 * math.pi))
def test_phase_under_qif_is_controlled(bits, theta):
    src = ("fn main() -> (#'0 qbit, #'0 qbit) {"
           " let a = ket0; a as #'0 qbit; let b = ket0; b as #'0 qbit; let a1 = H(a); let b1 = H(b);"
           " newlft 'x; let ra = &'x a1; let rb = &'x b1;"
           f" let u = qif ra {{ let v = qif rb {{ let p = phase({theta!r})(); p }} else {{ noop; () }};"
           " drop rb; v } else { drop rb; () };"
           " drop u; drop ra; endlft 'x; let r = (a1, b1); r }")
    (b,) = eval_program(checked(src))
    vec = b.env.q.vector(tuple(b.env.loc["result"]))
    want = np.array([0.5, 0.5, 0.5, 0.5 * np.exp(1j * theta)])
    assert np.allclose(vec, want)
