import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qurts import qstate as qs
from qurts.pebble import (CircuitGraph, GateMove, Guard, Init, InvalidMove, Pebble, Pebbling,
                          PremiseViolation, Release, Split, check_valid, entailment_oracle,
                          evaluate, guard_entailment, inverse, load_strategy, step,
                          validate_classic_strategy)

from conftest import CORPUS
from pebble_walk import Walk


# -- circuit graphs

def test_gate_reuse_and_undo():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    b0 = G.init("b")
    g1 = G.gate(b0, [Guard(a, True)])
    assert G.gate(b0, [Guard(a, True)]) == g1
    assert G.gate(g1, [Guard(a, True)]) == b0


def test_negation_pair_is_canonical():
    G = CircuitGraph()
    a = G.init("a")
    na = G.neg(a)
    assert G.canon(na) == (a, False)
    assert G.guard_of(na, True) == Guard(a, False)
    assert G.neg(na) == a


def test_gate_premises():
    G = CircuitGraph()
    a0 = G.init("a")
    a1 = G.neg(a0)
    with pytest.raises(PremiseViolation):
        G.gate(a0, [Guard(a0, True)])
    with pytest.raises(PremiseViolation):
        G.gate(G.init("b"), [Guard(a1, True)])


def test_merge_swaps_inputs_for_negated_guard():
    G = CircuitGraph()
    c = G.init("c")
    nc = G.neg(c)
    x0 = G.init("x")
    x1 = G.neg(x0)
    m = G.merge(x0, x1, nc, None)
    assert G.inputs[m] == (x1, x0) and G.guard[m] == (c, None)
    val = evaluate(G, {})
    assert val[m] == val[x1] == 1


def test_evaluate_gate_chain():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    b = G.linear("b", input=True)
    t = G.gate(G.init("t"), [Guard(a, True), Guard(b, False)])
    for fa in (0, 1):
        for fb in (0, 1):
            assert evaluate(G, {a: fa, b: fb})[t] == (fa and not fb)


def test_valid_acyclic_graph():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    G.gate(G.init("t"), [Guard(a, True)])
    assert check_valid(G)


def mutual_merges(second_inputs_swapped):
    G = CircuitGraph()
    a0 = G.init("a")
    a1 = G.neg(a0)
    b0 = G.init("b")
    b1 = G.neg(b0)
    c = G.init("c")
    m1 = G.merge(a0, a1, c, None)
    m2 = G.merge(b0, b1, m1, None)
    # close the cycle by hand: m1 is now guarded by m2
    G.guard[m1] = (m2, None)
    if second_inputs_swapped:
        G.inputs[m2] = (b1, b0)
    return G


def test_mutually_guarding_merges_are_invalid():
    assert not check_valid(mutual_merges(False))   # two solutions
    assert not check_valid(mutual_merges(True))    # no solution


def test_structural_errors_reported():
    G = CircuitGraph()
    a = G.init("a")
    b = G.init("b")
    m = G.merge(G.init("x"), G.neg(G.init("x")), a, None)
    G.inputs[m] = (G.init("x"), b)
    assert G.structural_errors()
    assert not check_valid(G)


def test_graph_json_round_trips_through_json():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    G.gate(G.init("t"), [Guard(a, True)])
    assert json.loads(json.dumps(G.to_json()))["vertices"][0]["kind"] == "linear"


# -- pebblings

G1 = Guard(7, True)
G2 = Guard(8, False)


def test_twin_fragments_merge():
    p = Pebbling.empty().add(1, Pebble("x", frozenset({G1}))).add(1, Pebble("x", frozenset({G1.negate()})))
    assert p.on(1) == [Pebble("x")]


def test_remove_splits_coarse_fragment():
    p = Pebbling.empty().add(1, Pebble("x"))
    q = p.remove(1, Pebble("x", frozenset({G1, G2})))
    assert q.same(Pebbling.empty().add(1, Pebble("x", frozenset({G1.negate()})))
                  .add(1, Pebble("x", frozenset({G1, G2.negate()}))))
    assert q.has(1, Pebble("x", frozenset({G1.negate(), G2})))
    assert not q.has(1, Pebble("x", frozenset({G1, G2})))


def test_remove_missing_pebble_raises():
    with pytest.raises(PremiseViolation):
        Pebbling.empty().add(1, Pebble("x")).remove(2, Pebble("x"))


guards = st.frozensets(st.builds(Guard, st.integers(10, 13), st.booleans(), st.none()), max_size=3).filter(
    lambda gs: len({g.vertex for g in gs}) == len(gs))


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from("xy"), guards), max_size=5),
       st.integers(0, 3), st.sampled_from("xy"), guards)
def test_add_then_remove_restores(base, v, lab, gs):
    p = Pebbling.empty()
    for u, l, g in base:
        p = p.add(u, Pebble(l, g))
    q = p.add(v, Pebble(lab, gs)).remove(v, Pebble(lab, gs))
    assert q.same(p)


# -- entailment against the truth-table oracle

def entail_instance(rng):
    G = CircuitGraph()
    base = [G.linear(("l", k), input=True) for k in range(6)]
    negs = {v: G.neg(v) for v in base}
    k = int(rng.integers(1, 4))
    gvs = rng.choice(6, size=k, replace=False)
    goal = [Guard(base[i], bool(rng.integers(2)), None) for i in sorted(gvs)]
    peb = Pebbling.empty()
    frags = []
    for w in range(k):
        mine = []
        for _ in range(int(rng.integers(1, 4))):
            i = int(rng.integers(6)) if rng.random() < 0.3 else int(gvs[min(w, k - 1)])
            pol = bool(rng.random() < 0.8)
            others = [j for j in range(6) if j != i]
            gsel = rng.choice(others, size=int(rng.integers(0, 3)), replace=False)
            gs = frozenset(Guard(base[j], bool(rng.integers(2)), None) for j in gsel)
            vertex = base[i] if pol else negs[base[i]]
            peb = peb.add(vertex, Pebble(("w", w), gs))
            mine.append((base[i], pol, gs))
        frags.append(mine)
    return G, peb, [("w", w) for w in range(k)], goal, frags


def test_entailment_matches_oracle_on_random_instances():
    rng = np.random.default_rng(1234)
    agree = positives = 0
    for _ in range(1000):
        G, peb, wits, goal, frags = entail_instance(rng)
        got = guard_entailment(None, G, peb, wits, goal)
        assert got == entailment_oracle(goal, frags)
        agree += 1
        positives += got
    assert agree == 1000 and 50 < positives < 950


def test_entailment_requires_live_goal_lifetimes():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    peb = Pebbling.empty().add(a, Pebble("w"))
    goal = [Guard(a, True, "g0")]
    assert guard_entailment({"g0"}, G, peb, ["w"], goal)
    assert not guard_entailment(set(), G, peb, ["w"], goal)


def test_entailment_negative_witness_uses_negative_control():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    na = G.neg(a)
    peb = Pebbling.empty().add(na, Pebble("w"))
    from qurts.pebble import _entail
    assert _entail(None, G, peb, ["w"], [Guard(a, True)]) == [("w", False)]


# -- moves

def test_init_gate_release_cycle():
    G = CircuitGraph()
    c = G.linear("c", input=True)
    t0 = G.init("t")
    t1 = G.gate(t0, [Guard(c, True)])
    s = qs.QState.basis(("c",), (1,))
    peb = Pebbling.empty().add(c, Pebble("c"))
    (s, peb), eff = step(None, G, (s, peb), Init("t", t0))
    assert eff.kind == "init"
    (s, peb), eff = step(None, G, (s, peb), GateMove(Pebble("t"), t0, t1, ("c",)))
    assert eff.controls == (("c", True),)
    assert np.allclose(s.vector(("c", "t")), [0, 0, 0, 1])
    with pytest.raises(PremiseViolation):
        step(None, G, (s, peb), Release("t", t0))
    (s, peb), _ = step(None, G, (s, peb), GateMove(Pebble("t"), t1, t0, ("c",)))
    (s, peb), eff = step(None, G, (s, peb), Release("t", t0))
    assert eff.kind == "release" and s.labels == ("c",)


def test_gate_move_without_entailment_rejected():
    G = CircuitGraph()
    c = G.linear("c", input=True)
    d = G.linear("d", input=True)
    t0 = G.init("t")
    t1 = G.gate(t0, [Guard(c, True)])
    s = qs.QState.basis(("c", "d", "t"), (0, 0, 0))
    peb = Pebbling.empty().add(c, Pebble("c")).add(d, Pebble("d")).add(t0, Pebble("t"))
    with pytest.raises(PremiseViolation):
        step(None, G, (s, peb), GateMove(Pebble("t"), t0, t1, ("d",)))


def test_release_requires_zero_state():
    G = CircuitGraph()
    t0 = G.init("t")
    s = qs.QState.from_vector(("t",), [0.6, 0.8])
    peb = Pebbling.empty().add(t0, Pebble("t"))
    with pytest.raises(PremiseViolation):
        step(None, G, (s, peb), Release("t", t0))


def test_split_then_join_is_identity():
    G = CircuitGraph()
    a = G.linear("a", input=True)
    b = G.linear("b", input=True)
    peb = Pebbling.empty().add(a, Pebble("a")).add(b, Pebble("b"))
    s = qs.QState.basis(("a", "b"), (0, 1))
    mv = Split(a, Pebble("a"), Guard(b, True))
    (s2, p2), _ = step(None, G, (s, peb), mv)
    assert len(p2.on(a)) == 2
    (s3, p3), _ = step(None, G, (s2, p2), inverse(mv))
    assert p3.same(peb)


def test_random_moves_are_reversible():
    rng = np.random.default_rng(7)
    w = Walk(rng)
    kinds = set()
    for _ in range(300):
        r = w.applicable()
        if r is None:
            w = Walk(rng)
            continue
        move, ((s2, p2), _) = r
        (s3, p3), _ = step(None, w.G, (s2, p2), inverse(move))
        assert p3.same(w.peb)
        assert set(s3.labels) == set(w.q.labels)
        assert qs.allclose(s3.reorder(w.q.labels), w.q)
        kinds.add(type(move).__name__)
        w.q, w.peb = s2, p2
    assert {"Split", "Join", "Init", "Release", "GateMove", "CopyDelete", "MergeGuard"} <= kinds


# -- classic game

def strategy(name):
    return load_strategy((CORPUS / "strategies" / f"{name}.json").read_text())


def test_classic_naive_strategy():
    rep = validate_classic_strategy(*strategy("naive"))
    assert (rep.valid, rep.peak, rep.steps) == (True, 5, 9)


def test_classic_optimized_strategy():
    rep = validate_classic_strategy(*strategy("optimized"))
    assert (rep.valid, rep.peak, rep.steps) == (True, 4, 11)


def test_classic_illegal_strategy():
    with pytest.raises(InvalidMove) as ei:
        validate_classic_strategy(*strategy("illegal"))
    assert ei.value.index == 8


def test_classic_wrong_goal():
    dag, moves, _ = strategy("naive")
    with pytest.raises(InvalidMove):
        validate_classic_strategy(dag, moves[:-1], ["w"])


def test_classic_cycle_rejected():
    with pytest.raises(ValueError):
        validate_classic_strategy({"a": ["b"], "b": ["a"]}, [])


def test_classic_accepts_networkx_graph():
    import networkx as nx
    d = nx.DiGraph([("x", "y")])
    rep = validate_classic_strategy(d, [("place", "x"), ("place", "y"), ("remove", "x")])
    assert rep.final == frozenset({"y"})
