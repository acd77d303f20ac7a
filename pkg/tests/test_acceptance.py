"""End-to-end acceptance checks, one test per criterion.

Each test records PASS or FAIL with its wall time; the session summary
prints one line per criterion.
"""

import contextlib
import itertools
import math
import random
import time

import numpy as np
import pytest

from qurts import qstate as qs
from qurts.fuzz import generate_corpus
from qurts.pebble import InvalidMove, inverse, load_strategy, step, validate_classic_strategy
from qurts.simsem import eval_program, eval_with_depgraph, outcome_bits
from qurts.synth import normalize_qif_locations
from qurts.typecheck import check_program
from qurts.uncsem import compare_with_simulation, run_eager, verify_interleavings

from conftest import ACCEPTANCE, CORPUS, NESTED, checked, load, well_typed_files
from pebble_walk import Walk

S2 = 1 / math.sqrt(2)


@contextlib.contextmanager
def criterion(n, budget):
    t = time.perf_counter()
    note = []
    try:
        yield note
    except BaseException:
        ACCEPTANCE[n] = (False, time.perf_counter() - t, budget, " ".join(note))
        raise
    secs = time.perf_counter() - t
    ok = secs < budget
    ACCEPTANCE[n] = (ok, secs, budget, " ".join(note) if ok else "over budget")
    assert ok, f"criterion {n} took {secs:.2f} s, budget {budget} s"


def test_criterion_1_toy_trace():
    with criterion(1, 1):
        b0, b1 = eval_program(load("toy.qrt"))
        steps = {t.stmt.split("\n")[0]: t.q.vector() for t in b0.trace}
        want = [("let x0 = [0]()", [1, 0]),
                ("let x1 = H(x0)", [S2, S2]),
                ("let y = qif r {", [S2, 0, 0, S2]),
                ("drop y", [S2, S2])]
        for stmt, vec in want:
            assert np.max(np.abs(steps[stmt] - np.array(vec))) < 1e-9, stmt
        assert abs(b0.probability - 0.5) < 1e-9 and abs(b1.probability - 0.5) < 1e-9


def test_criterion_2_typechecker_goldens():
    with criterion(2, 1):
        for name in ["double_qif.qrt", "bad_forget.qrt"]:
            diags = check_program(load(name))
            assert diags and all(d.rule for d in diags), name
        assert check_program(load("double_qif.qrt"))[0].rule == "typ drop"
        assert check_program(load("bad_forget.qrt"))[0].rule == "typ fn call"
        for name in ["cx_chain", "and", "and3", "forget", "reinitialise", "my_cnot", "good_forget"]:
            assert check_program(load(f"{name}.qrt")) == [], name


def test_criterion_3_drop_sum_exceeds_one():
    with criterion(3, 1):
        s = qs.QState.from_vector((0, 1), [S2, S2, 0, 0])
        assert abs(qs.norm2(qs.drop_sum(s, [1])) - 2.0) < 1e-9


def test_criterion_4_toffoli_circuit():
    with criterion(4, 1):
        b, = run_eager(normalize_qif_locations(load("toffoli.qrt")))
        for x, z, t in itertools.product((0, 1), repeat=3):
            s = b.circuit.replay(qs.QState.basis((0, 1), (x, z)), init_bits={2: t})
            assert set(s.labels) == {0, 1, 2}
            v = s.reorder(tuple(b.result)).vector()
            want = np.zeros(8)
            want[(x << 2) | (z << 1) | (t ^ (x & z))] = 1
            assert np.array_equal(np.round(v, 12), want)


def test_criterion_5_classic_pebbling():
    with criterion(5, 1):
        def strat(name):
            return load_strategy((CORPUS / "strategies" / f"{name}.json").read_text())
        r = validate_classic_strategy(*strat("naive"))
        assert (r.peak, r.steps) == (5, 9)
        r = validate_classic_strategy(*strat("optimized"))
        assert (r.peak, r.steps) == (4, 11)
        with pytest.raises(InvalidMove):
            validate_classic_strategy(*strat("illegal"))


def test_criterion_6_semantics_agree():
    with criterion(6, 60) as note:
        files = well_typed_files()
        assert len(files) >= 20
        branches = 0
        for f in files:
            report = compare_with_simulation(normalize_qif_locations(load(f)))
            assert max(report.values()) < 1e-9, f.name
            branches += len(report)
        note.append(f"{len(files)} programs, {branches} branches")


def test_criterion_7_probability_conserved():
    with criterion(7, 120) as note:
        progs = [load(f) for f in well_typed_files()]
        progs += [checked(src) for src in generate_corpus(200, seed=2024)]
        for p in progs:
            total = sum(b.probability for b in eval_with_depgraph(p))
            assert abs(total - 1) < 1e-9
        note.append(f"{len(progs)} programs")


def test_criterion_8_interleavings():
    with criterion(8, 60) as note:
        assert len(NESTED) >= 5
        for name in NESTED:
            rep = verify_interleavings(normalize_qif_locations(load(name)), n=20, seed=0)
            assert rep["distinct_schedules"] >= 10, name
            assert rep["max_distance"] < 1e-9, name
        note.append(f"{len(NESTED)} programs")


def grover_oracle(marked, iterations):
    """Plain state-vector Grover on three qubits."""
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    h3 = np.kron(np.kron(h, h), h)
    psi = h3 @ np.eye(8)[0]
    for _ in range(iterations):
        psi[marked] *= -1
        psi = h3 @ psi
        psi[1:] *= -1
        psi = h3 @ psi
    return abs(psi[marked]) ** 2


def test_criterion_9_grover():
    with criterion(9, 5):
        probs = {outcome_bits(b): b.probability for b in eval_program(load("grover3.qrt"))}
        want = grover_oracle(0b101, 2)
        assert abs(probs[(1, 0, 1)] - want) < 1e-9
        assert abs(sum(probs.values()) - 1) < 1e-9


def test_criterion_10_pebble_reversibility():
    with criterion(10, 30) as note:
        rng = np.random.default_rng(2024)
        w = Walk(rng)
        done = 0
        while done < 1000:
            r = w.applicable()
            if r is None or rng.random() < 0.02:
                w = Walk(rng)
                continue
            move, ((s2, p2), _) = r
            (s3, p3), _ = step(None, w.G, (s2, p2), inverse(move))
            assert p3.same(w.peb)
            assert set(s3.labels) == set(w.q.labels)
            assert qs.allclose(s3.reorder(w.q.labels), w.q)
            w.q, w.peb = s2, p2
            done += 1
        note.append(f"{done} moves")
