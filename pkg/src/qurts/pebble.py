"""Circuit graphs and the guarded reversible pebble game played on them.

A circuit graph records how each quantum location evolves.  A pebble is a
qubit label sitting on a vertex, meaning the qubit currently holds that
vertex's value.  Pebbles may be fragmented by guards (vertex, polarity,
lifetime), each fragment covering the part of the state where the guards
hold.  Moves transform the quantum state and the pebbling together.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import networkx as nx
import numpy as np

from . import qstate as Q


class PremiseViolation(RuntimeError):
    """A move was attempted whose premise does not hold."""

    def __init__(self, premise: str, detail: str = ""):
        super().__init__(f"{premise}: {detail}" if detail else premise)
        self.premise = premise


class InvalidMove(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"move {index}: {reason}")
        self.index = index
        self.reason = reason


# ------------------------------------------------------------------ graph

INIT, GATE, MERGE, LINEAR = "init", "gate", "merge", "linear"


class Guard(NamedTuple):
    """``vertex`` holds ``pol`` while ``lft`` is live.  ``vertex`` is always
    the canonical member of its negation pair."""
    vertex: int
    pol: bool
    lft: object = None

    def negate(self) -> "Guard":
        return Guard(self.vertex, not self.pol, self.lft)


class CircuitGraph:
    """Vertices carry a kind and a location.

    gate: ``src`` (same location) and ``controls``, a tuple of guards on
    other locations.  merge: ordered ``inputs`` (v0, v1) and a guard
    ``(vertex, lifetime)``; input i is taken when the guard vertex is i.
    linear: incoming edges each carry a frozenset of guards.
    """

    def __init__(self):
        self.kind: dict = {}
        self.loc: dict = {}
        self.src: dict = {}
        self.controls: dict = {}
        self.inputs: dict = {}
        self.guard: dict = {}
        self.lin_in: dict = {}
        self.input_vertices: set = set()
        self.init_of: dict = {}
        self.linear_of: dict = {}
        self._gates: dict = {}
        self._merges: dict = {}
        self._neg: dict = {}

    def copy(self) -> "CircuitGraph":
        g = CircuitGraph()
        for k, v in self.__dict__.items():
            g.__dict__[k] = {a: (list(b) if isinstance(b, list) else b) for a, b in v.items()} \
                if isinstance(v, dict) else set(v)
        return g

    def _new(self, kind, loc) -> int:
        v = len(self.kind)
        self.kind[v] = kind
        self.loc[v] = loc
        return v

    @property
    def vertices(self):
        return list(self.kind)

    # construction

    def init(self, loc) -> int:
        if loc not in self.init_of:
            self.init_of[loc] = self._new(INIT, loc)
        return self.init_of[loc]

    def linear(self, loc, input: bool = False) -> int:
        if loc not in self.linear_of:
            v = self._new(LINEAR, loc)
            self.linear_of[loc] = v
            self.lin_in[v] = []
            if input:
                self.input_vertices.add(v)
        return self.linear_of[loc]

    def add_linear_edge(self, v: int, lin: int, guards=frozenset()):
        if self.kind[lin] != LINEAR or self.loc[v] != self.loc[lin]:
            raise PremiseViolation("linear edge", f"{v} -> {lin}")
        e = (v, frozenset(guards))
        if e not in self.lin_in[lin]:
            self.lin_in[lin].append(e)

    def canon(self, v: int, pol: bool = True):
        """The canonical vertex of ``v``'s negation pair with adjusted polarity."""
        w = self._neg.get(v)
        if w is not None and w < v:
            return w, not pol
        return v, pol

    def guard_of(self, v: int, pol: bool = True, lft=None) -> Guard:
        c, p = self.canon(v, pol)
        return Guard(c, p, lft)

    def gate(self, src: int, controls=()) -> int:
        """The vertex reached from ``src`` by a flip under ``controls``.

        Reuses an existing vertex with the same source and controls, and
        undoes the gate that produced ``src`` when the controls repeat it.
        """
        controls = tuple(sorted(set(Guard(*c) for c in controls)))
        for c in controls:
            if self.canon(c.vertex)[0] != c.vertex:
                raise PremiseViolation("canonical controls", repr(c))
            if self.loc[c.vertex] == self.loc[src]:
                raise PremiseViolation("control on target location", repr(c))
        if len({self.loc[c.vertex] for c in controls}) != len(controls):
            raise PremiseViolation("controls share a location", repr(controls))
        if self.kind[src] == GATE and self.controls[src] == controls:
            return self.src[src]
        key = (src, controls)
        if key in self._gates:
            return self._gates[key]
        v = self._new(GATE, self.loc[src])
        self.src[v] = src
        self.controls[v] = controls
        self._gates[key] = v
        if not controls:
            self._neg[v] = src
            self._neg[src] = v
        return v

    def neg(self, v: int) -> int:
        return self.gate(v, ())

    def merge(self, v0: int, v1: int, guard_vertex: int, lft) -> int:
        if v0 == v1:
            return v0
        if self.loc[v0] != self.loc[v1]:
            raise PremiseViolation("merge inputs share a location", f"{v0}, {v1}")
        gv, pol = self.canon(guard_vertex)
        if not pol:
            v0, v1 = v1, v0
        key = (v0, v1, gv, lft)
        if key in self._merges:
            return self._merges[key]
        m = self._new(MERGE, self.loc[v0])
        self.inputs[m] = (v0, v1)
        self.guard[m] = (gv, lft)
        self._merges[key] = m
        return m

    # structure

    def preds(self, v: int):
        """Value dependencies of ``v`` (linear vertices have none)."""
        k = self.kind[v]
        if k == GATE:
            return [self.src[v]] + [c.vertex for c in self.controls[v]]
        if k == MERGE:
            return list(self.inputs[v]) + [self.guard[v][0]]
        return []

    def edges(self):
        out = []
        for v, k in self.kind.items():
            if k == GATE:
                out.append((self.src[v], v))
                out += [(c.vertex, v) for c in self.controls[v]]
            elif k == MERGE:
                out += [(u, v) for u in self.inputs[v]]
            elif k == LINEAR:
                out += [(u, v) for u, _ in self.lin_in[v]]
        return out

    def structural_errors(self):
        errs = []
        inits = Counter(self.loc[v] for v, k in self.kind.items() if k == INIT)
        lins = Counter(self.loc[v] for v, k in self.kind.items() if k == LINEAR)
        errs += [f"location {l} has {n} init vertices" for l, n in inits.items() if n > 1]
        errs += [f"location {l} has {n} linear vertices" for l, n in lins.items() if n > 1]
        for v, k in self.kind.items():
            if k == GATE:
                if self.loc[self.src[v]] != self.loc[v]:
                    errs.append(f"gate {v} source in another location")
                locs = [self.loc[c.vertex] for c in self.controls[v]]
                if self.loc[v] in locs or len(set(locs)) != len(locs):
                    errs.append(f"gate {v} controls overlap")
            elif k == MERGE:
                if len(self.inputs[v]) != 2 or any(self.loc[u] != self.loc[v] for u in self.inputs[v]):
                    errs.append(f"merge {v} needs two same-location inputs")
                if self.loc[self.guard[v][0]] == self.loc[v]:
                    errs.append(f"merge {v} guarded by its own location")
            elif k == LINEAR:
                if any(self.loc[u] != self.loc[v] for u, _ in self.lin_in[v]):
                    errs.append(f"linear {v} entered from another location")
        return errs

    def to_json(self):
        vs = []
        for v, k in self.kind.items():
            d = {"id": v, "kind": k, "loc": _jsonable(self.loc[v])}
            if k == GATE:
                d["src"] = self.src[v]
                d["controls"] = [{"v": c.vertex, "pol": c.pol, "lft": str(c.lft)} for c in self.controls[v]]
            elif k == MERGE:
                d["inputs"] = list(self.inputs[v])
                d["guard"] = {"v": self.guard[v][0], "lft": str(self.guard[v][1])}
            elif k == LINEAR:
                d["in"] = [{"v": u, "guards": [[g.vertex, g.pol, str(g.lft)] for g in sorted(gs)]}
                           for u, gs in self.lin_in[v]]
                d["input"] = v in self.input_vertices
            vs.append(d)
        return {"vertices": vs}


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


# ------------------------------------------------------------- valuation

def evaluate(G: CircuitGraph, f=None):
    """Value of every vertex given ``f``: linear vertex → bit.

    Requires the value dependencies to be acyclic; see ``check_valid``.
    """
    f = f or {}
    val = {}
    order = list(nx.topological_sort(_dep_graph(G)))
    for v in order:
        val[v] = _eval_vertex(G, v, val, f)
    return val


def _eval_vertex(G, v, val, f):
    k = G.kind[v]
    if k == INIT:
        return 0
    if k == LINEAR:
        return int(f.get(v, 0))
    if k == GATE:
        fire = all(val[c.vertex] == int(c.pol) for c in G.controls[v])
        return val[G.src[v]] ^ int(fire)
    v0, v1 = G.inputs[v]
    return val[v1] if val[G.guard[v][0]] else val[v0]


def _dep_graph(G):
    d = nx.DiGraph()
    d.add_nodes_from(G.kind)
    for v in G.kind:
        for u in G.preds(v):
            d.add_edge(u, v)
    return d


def check_valid(G: CircuitGraph, max_inputs: int = 12) -> bool:
    """Structurally well formed and every linear assignment has exactly one
    consistent valuation."""
    if G.structural_errors():
        return False
    d = _dep_graph(G)
    if nx.is_directed_acyclic_graph(d):
        return True
    cond = nx.condensation(d)
    order = [cond.nodes[c]["members"] for c in nx.topological_sort(cond)]
    lin = [v for v, k in G.kind.items() if k == LINEAR]
    if len(lin) > max_inputs:
        raise ValueError("too many linear vertices for exhaustive validity check")
    for bits in itertools.product((0, 1), repeat=len(lin)):
        f = dict(zip(lin, bits))
        val = {}
        for members in order:
            members = sorted(members)
            if len(members) == 1 and not d.has_edge(members[0], members[0]):
                val[members[0]] = _eval_vertex(G, members[0], val, f)
                continue
            sols = []
            for guess in itertools.product((0, 1), repeat=len(members)):
                trial = dict(val)
                trial.update(zip(members, guess))
                if all(_eval_vertex(G, v, trial, f) == trial[v] for v in members):
                    sols.append(guess)
            if len(sols) != 1:
                return False
            val.update(zip(members, sols[0]))
    return True


# ---------------------------------------------------------------- pebbles

class Pebble(NamedTuple):
    label: object
    guards: frozenset = frozenset()

    def __repr__(self):
        gs = " & ".join(f"{'' if g.pol else '!'}{g.vertex}@{g.lft}" for g in sorted(self.guards, key=repr))
        return f"{self.label!r}{{{gs}}}"


def _consistent(guards) -> bool:
    seen = {}
    for g in guards:
        if seen.setdefault(g.vertex, g.pol) != g.pol:
            return False
    return True


@dataclass(frozen=True)
class Pebbling:
    """Vertex → multiset of pebbles, kept merged: fragments ``p{G & g}`` and
    ``p{G & !g}`` on the same vertex collapse to ``p{G}``."""
    slots: tuple = ()

    @staticmethod
    def empty() -> "Pebbling":
        return Pebbling(())

    def as_dict(self):
        return {v: list(ps) for v, ps in self.slots}

    def on(self, v):
        for w, ps in self.slots:
            if w == v:
                return list(ps)
        return []

    def fragments(self, label):
        """``(vertex, guards)`` for every fragment of ``label``."""
        return [(v, p.guards) for v, ps in self.slots for p in ps if p.label == label]

    def labels(self):
        return {p.label for _, ps in self.slots for p in ps}

    def where(self, label):
        return {v for v, _ in self.fragments(label)}

    def _with(self, d) -> "Pebbling":
        return Pebbling(tuple(sorted(((v, tuple(sorted(ps, key=repr))) for v, ps in d.items() if ps),
                                     key=lambda x: x[0])))

    def add(self, v, pebble: Pebble) -> "Pebbling":
        d = self.as_dict()
        ps = d.setdefault(v, [])
        p = pebble
        while True:
            for g in p.guards:
                twin = Pebble(p.label, (p.guards - {g}) | {g.negate()})
                if twin in ps:
                    ps.remove(twin)
                    p = Pebble(p.label, p.guards - {g})
                    break
            else:
                break
        ps.append(p)
        return self._with(d)

    def remove(self, v, pebble: Pebble) -> "Pebbling":
        """Take ``pebble`` off ``v``, splitting a coarser fragment if needed."""
        d = self.as_dict()
        ps = d.get(v, [])
        if pebble in ps:
            ps.remove(pebble)
            return self._with(d)
        for q in ps:
            if q.label == pebble.label and q.guards <= pebble.guards:
                ps.remove(q)
                rest = self._with(d)
                cur = set(q.guards)
                for g in sorted(pebble.guards - q.guards, key=repr):
                    rest = rest.add(v, Pebble(q.label, frozenset(cur | {g.negate()})))
                    cur.add(g)
                return rest
        # general case: refine every fragment of the label to minterms
        mine = [q for q in ps if q.label == pebble.label]
        atoms = sorted({(g.vertex, g.lft) for q in mine for g in q.guards}
                       | {(g.vertex, g.lft) for g in pebble.guards}, key=repr)
        have = Counter()
        for q in mine:
            for m in _minterms(q.guards, atoms):
                have[m] += 1
        want = _minterms(pebble.guards, atoms)
        if any(have[m] < 1 for m in want):
            raise PremiseViolation("pebble present", f"{pebble!r} on {v}")
        for m in want:
            have[m] -= 1
        d[v] = [q for q in ps if q.label != pebble.label]
        out = self._with(d)
        for m, n in have.items():
            for _ in range(n):
                out = out.add(v, Pebble(pebble.label, frozenset(m)))
        return out

    def has(self, v, pebble: Pebble) -> bool:
        try:
            self.remove(v, pebble)
            return True
        except PremiseViolation:
            return False

    def canonical(self):
        """Per label: minterm over all its guard atoms → multiset of vertices."""
        out = {}
        for lab in sorted(self.labels(), key=repr):
            frs = self.fragments(lab)
            atoms = sorted({(g.vertex, g.lft) for _, gs in frs for g in gs}, key=repr)
            c = Counter()
            for v, gs in frs:
                for m in _minterms(gs, atoms):
                    c[(m, v)] += 1
            out[lab] = (atoms, c)
        return out

    def same(self, other: "Pebbling") -> bool:
        """Equality as functions from guard valuations to positions."""
        if self.labels() != other.labels():
            return False
        for lab in self.labels():
            a = self.fragments(lab) + other.fragments(lab)
            atoms = sorted({(g.vertex, g.lft) for _, gs in a for g in gs}, key=repr)

            def spread(frs):
                c = Counter()
                for v, gs in frs:
                    for m in _minterms(gs, atoms):
                        c[(m, v)] += 1
                return c
            if spread(self.fragments(lab)) != spread(other.fragments(lab)):
                return False
        return True

    def to_json(self):
        return {str(v): [repr(p) for p in ps] for v, ps in self.slots}


def _minterms(guards, atoms):
    fixed = {(g.vertex, g.lft): g.pol for g in guards}
    free = [a for a in atoms if a not in fixed]
    out = []
    for bits in itertools.product((False, True), repeat=len(free)):
        m = dict(fixed)
        m.update(zip(free, bits))
        out.append(frozenset(Guard(a[0], m[a], a[1]) for a in atoms))
    return out


# ------------------------------------------------------------ entailment

def _is_live(live, lft) -> bool:
    if lft is None or live is None:
        return True
    if callable(live):
        return bool(live(lft))
    if hasattr(live, "is_live"):
        return live.is_live(lft)
    return lft in live


def _entail(live, G: CircuitGraph, peb: Pebbling, witnesses, goal):
    """Controls ``[(label, polarity)]`` realising ``goal`` or None.

    A witness qubit holds the value of whichever of its fragments has its
    guards satisfied, and an unknown value where none has.  Vertex values
    are independent except that a vertex and its negation are opposite.
    The controls must fire exactly when every goal guard holds, for every
    assignment and every value of the unknowns.  Witness i is expected to
    sit on the vertex of goal guard i, which suggests its polarity; other
    polarities are tried as well.
    """
    goal = list(goal)
    witnesses = list(witnesses)
    if len(witnesses) != len(goal) or len(set(witnesses)) != len(witnesses):
        return None
    if not all(_is_live(live, g.lft) for g in goal):
        return None
    frs = []
    for w in witnesses:
        frs.append([(G.canon(v), gs) for v, gs in peb.fragments(w)])
    atoms = sorted({g.vertex for g in goal}
                   | {c for fr in frs for (c, _), _ in fr}
                   | {a.vertex for fr in frs for _, gs in fr for a in gs})
    if len(atoms) > 20:
        raise ValueError("entailment instance too large")
    rows = []
    for bits in itertools.product((0, 1), repeat=len(atoms)):
        val = dict(zip(atoms, bits))
        want = all(val[g.vertex] == int(g.pol) for g in goal)
        vals = []
        for fr in frs:
            seen = {val[c] ^ (not p) for (c, p), gs in fr
                    if all(val[a.vertex] == int(a.pol) for a in gs)}
            vals.append(seen.pop() if len(seen) == 1 else None)
        rows.append((want, vals))
    hint = []
    against = {(g.vertex, not g.pol) for g in goal}
    for fr, g in zip(frs, goal):
        ps = {g.pol == p for (c, p), gs in fr
              if c == g.vertex and not any((a.vertex, a.pol) in against for a in gs)}
        hint.append(ps.pop() if len(ps) == 1 else True)
    combos = [tuple(hint)] + [c for c in itertools.product((True, False), repeat=len(goal))
                              if c != tuple(hint)]
    for pols in combos:
        if all(_fires_exactly(want, vals, pols) for want, vals in rows):
            return list(zip(witnesses, pols))
    return None


def _fires_exactly(want, vals, pols) -> bool:
    known = [None if v is None else (v == int(p)) for v, p in zip(vals, pols)]
    if want:
        return all(k is True for k in known)
    return any(k is False for k in known)


def guard_entailment(live, G: CircuitGraph, peb: Pebbling, witnesses, goal) -> bool:
    """True iff the witness labels, used as controls, fire exactly when the
    goal guards hold and every goal lifetime is live."""
    return _entail(live, G, peb, witnesses, goal) is not None


def entailment_oracle(goal, frags):
    """Reference check by truth table.  ``frags[i]`` lists ``(vertex, pol,
    guards)`` for every fragment of witness i: where ``guards`` hold the
    witness equals ``vertex`` (negated when ``pol`` is false).  True iff
    some choice of control polarities fires exactly on the goal."""
    atoms = sorted({g.vertex for g in goal} | {v for fr in frags for v, _, _ in fr}
                   | {a.vertex for fr in frags for _, _, gs in fr for a in gs})
    for pols in itertools.product((False, True), repeat=len(goal)):
        good = True
        for bits in itertools.product((0, 1), repeat=len(atoms)):
            val = dict(zip(atoms, bits))
            want = all(val[g.vertex] == int(g.pol) for g in goal)
            opts = []
            for fr in frags:
                vs = {val[v] if p else 1 - val[v] for v, p, gs in fr
                      if all(val[a.vertex] == int(a.pol) for a in gs)}
                opts.append([vs.pop()] if len(vs) == 1 else [0, 1])
            for choice in itertools.product(*opts):
                fires = all(c == int(p) for c, p in zip(choice, pols))
                if fires != want:
                    good = False
                    break
            if not good:
                break
        if good:
            return True
    return False


def pick_witnesses(G: CircuitGraph, peb: Pebbling, goal, prefer=()):
    """A witness label per goal atom: one with a fragment on the atom's
    vertex or its negation, preferring labels in ``prefer``."""
    out = []
    for g in goal:
        found = []
        for v, ps in peb.slots:
            if G.canon(v)[0] == g.vertex:
                found += [p.label for p in ps]
        found = sorted(set(found) - set(out), key=lambda l: (l not in prefer, repr(l)))
        if not found:
            return None
        out.append(found[0])
    return out


# ------------------------------------------------------------------ moves

@dataclass(frozen=True)
class Split:
    vertex: int
    pebble: Pebble
    guard: Guard


@dataclass(frozen=True)
class Join:
    vertex: int
    pebble: Pebble
    guard: Guard


@dataclass(frozen=True)
class Init:
    label: object
    vertex: int


@dataclass(frozen=True)
class Release:
    label: object
    vertex: int


@dataclass(frozen=True)
class GateMove:
    """Move ``pebble`` between ``frm`` and ``to``, one the gate successor of
    the other, controlled by ``witnesses`` (one per goal atom)."""
    pebble: Pebble
    frm: int
    to: int
    witnesses: tuple


@dataclass(frozen=True)
class CopyDelete:
    """Copy (``to_init=False``) moves ``target`` from the init vertex to
    ``vertex`` by xoring in ``source``; delete moves it back."""
    source: object
    target: object
    guards: frozenset
    vertex: int
    to_init: bool
    witnesses: tuple


@dataclass(frozen=True)
class MergeGuard:
    """Move ``pebble`` between input ``i`` of ``merge`` and ``merge``."""
    pebble: Pebble
    merge: int
    i: int
    forward: bool = True


@dataclass(frozen=True)
class LinearGuard:
    pebble: Pebble
    frm: int
    to: int


def inverse(move):
    if isinstance(move, Split):
        return Join(move.vertex, move.pebble, move.guard)
    if isinstance(move, Join):
        return Split(move.vertex, move.pebble, move.guard)
    if isinstance(move, Init):
        return Release(move.label, move.vertex)
    if isinstance(move, Release):
        return Init(move.label, move.vertex)
    if isinstance(move, GateMove):
        return GateMove(move.pebble, move.to, move.frm, move.witnesses)
    if isinstance(move, CopyDelete):
        return CopyDelete(move.source, move.target, move.guards, move.vertex,
                          not move.to_init, move.witnesses)
    if isinstance(move, MergeGuard):
        return MergeGuard(move.pebble, move.merge, move.i, not move.forward)
    raise PremiseViolation("invertible move", type(move).__name__)


@dataclass
class MoveEffect:
    """What a move did to the quantum state, for circuit extraction."""
    kind: str
    label: object = None
    controls: tuple = ()
    bit: int = 0


def step(live, G: CircuitGraph, state, move, main_labels=None):
    """Apply ``move`` to ``(QState, Pebbling)``; returns the new pair and the
    quantum effect (or None)."""
    s, peb = state
    if isinstance(move, (Split, Join)):
        p, g = move.pebble, move.guard
        if g.vertex in {a.vertex for a in p.guards}:
            raise PremiseViolation("split guard is fresh", repr(g))
        halves = (Pebble(p.label, p.guards | {g}), Pebble(p.label, p.guards | {g.negate()}))
        if isinstance(move, Split):
            peb = peb.remove(move.vertex, p)
            # adding the halves one by one would re-merge them
            d = peb.as_dict()
            d.setdefault(move.vertex, []).extend(halves)
            return (s, peb._with(d)), None
        for h in halves:
            peb = peb.remove(move.vertex, h)
        return (s, peb.add(move.vertex, p)), None

    if isinstance(move, Init):
        if G.kind.get(move.vertex) != INIT:
            raise PremiseViolation("init vertex", str(move.vertex))
        if move.label in s.labels or move.label in peb.labels():
            raise PremiseViolation("label is fresh", repr(move.label))
        s = Q.adjoin_zero(s, move.label)
        return (s, peb.add(move.vertex, Pebble(move.label))), MoveEffect("init", move.label)

    if isinstance(move, Release):
        if G.kind.get(move.vertex) != INIT:
            raise PremiseViolation("init vertex", str(move.vertex))
        if peb.where(move.label) != {move.vertex} or not peb.has(move.vertex, Pebble(move.label)):
            raise PremiseViolation("whole pebble on init", repr(move.label))
        if Q.norm2(Q.project(s, move.label, 1)) > Q.TOL:
            raise PremiseViolation("released qubit is |0>", repr(move.label))
        s = Q.project(s, move.label, 0)
        return (s, peb.remove(move.vertex, Pebble(move.label))), MoveEffect("release", move.label)

    if isinstance(move, GateMove):
        p, a, b = move.pebble, move.frm, move.to
        if G.kind.get(b) == GATE and G.src[b] == a:
            gv = b
        elif G.kind.get(a) == GATE and G.src[a] == b:
            gv = a
        else:
            raise PremiseViolation("gate edge", f"{a} -> {b}")
        if not peb.has(a, p):
            raise PremiseViolation("pebble on source", f"{p!r} on {a}")
        goal = _goal(G.controls[gv], p.guards)
        if goal is None:
            raise PremiseViolation("consistent guards")
        ctrls = _entail(live, G, peb, move.witnesses, goal)
        if ctrls is None:
            raise PremiseViolation("guard entailment", f"{p!r} along {a} -> {b}")
        if p.label in move.witnesses:
            raise PremiseViolation("target not among controls", repr(p.label))
        s = Q.apply_single_target(s, p.label, ctrls)
        peb = peb.remove(a, p).add(b, p)
        return (s, peb), MoveEffect("ctrlx", p.label, tuple(ctrls))

    if isinstance(move, CopyDelete):
        v = move.vertex
        init = G.init_of.get(G.loc[v])
        if init is None or init == v:
            raise PremiseViolation("copy needs a non-init vertex", str(v))
        src_p = Pebble(move.source, move.guards)
        tgt_p = Pebble(move.target, move.guards)
        frm, to = (v, init) if move.to_init else (init, v)
        if not peb.has(v, src_p):
            raise PremiseViolation("copy source on vertex", f"{src_p!r} on {v}")
        if not peb.has(frm, tgt_p):
            raise PremiseViolation("copy target in place", f"{tgt_p!r} on {frm}")
        c, pol = G.canon(v)
        goal = _goal((Guard(c, pol, None),), move.guards)
        wits = tuple(move.witnesses) + (move.source,)
        goal_l = [a for a in goal if a.vertex != c] + [Guard(c, pol, None)]
        ctrls = _entail(live, G, peb, wits, goal_l)
        if ctrls is None or move.target in wits:
            raise PremiseViolation("guard entailment", "copy/delete")
        s = Q.apply_single_target(s, move.target, ctrls)
        peb = peb.remove(frm, tgt_p).add(to, tgt_p)
        return (s, peb), MoveEffect("ctrlx", move.target, tuple(ctrls))

    if isinstance(move, MergeGuard):
        m = move.merge
        if G.kind.get(m) != MERGE:
            raise PremiseViolation("merge vertex", str(m))
        p = move.pebble
        gv, lft = G.guard[m]
        if not any(g.vertex == gv and g.pol == bool(move.i) for g in p.guards):
            raise PremiseViolation("merge guard carried", f"{p!r} into {m} via {move.i}")
        vi = G.inputs[m][move.i]
        frm, to = (vi, m) if move.forward else (m, vi)
        if not peb.has(frm, p):
            raise PremiseViolation("pebble present", f"{p!r} on {frm}")
        return (s, peb.remove(frm, p).add(to, p)), None

    if isinstance(move, LinearGuard):
        p, a, b = move.pebble, move.frm, move.to
        if G.kind.get(b) != LINEAR:
            raise PremiseViolation("linear vertex", str(b))
        if main_labels is not None and main_labels.get(G.loc[b]) != p.label:
            raise PremiseViolation("main label only", repr(p.label))
        if not any(u == a and gs <= p.guards for u, gs in G.lin_in[b]):
            raise PremiseViolation("linear edge guards", f"{p!r} along {a} -> {b}")
        if not peb.has(a, p):
            raise PremiseViolation("pebble present", f"{p!r} on {a}")
        return (s, peb.remove(a, p).add(b, p)), None

    raise PremiseViolation("known move", repr(move))


def _goal(controls, guards):
    out = {}
    for g in list(controls) + sorted(guards, key=repr):
        key = g.vertex
        if key in out and out[key].pol != g.pol:
            return None
        if key not in out or (out[key].lft is None and g.lft is not None):
            out[key] = g
    return [out[k] for k in sorted(out)]


def gate_goal(G: CircuitGraph, frm: int, to: int, guards):
    """Goal atoms of a gate move, in witness order."""
    gv = to if G.kind.get(to) == GATE and G.src[to] == frm else frm
    return _goal(G.controls[gv], guards)


# ---------------------------------------------------- classic pebble game

@dataclass
class ClassicReport:
    valid: bool
    peak: int
    steps: int
    final: frozenset = field(default_factory=frozenset)


def validate_classic_strategy(dag, moves, goal=None) -> ClassicReport:
    """Check a strategy for the classic reversible pebble game.

    ``dag`` maps each vertex to its predecessors (or is a networkx DiGraph).
    ``moves`` are ``("place" | "remove", vertex)``.  Both kinds require all
    predecessors to be pebbled.  ``goal``, when given, must be the final
    pebbled set.
    """
    if isinstance(dag, nx.DiGraph):
        preds = {v: list(dag.predecessors(v)) for v in dag.nodes}
    else:
        preds = {v: list(ps) for v, ps in dag.items()}
        for ps in list(preds.values()):
            for u in ps:
                preds.setdefault(u, [])
    d = nx.DiGraph([(u, v) for v, ps in preds.items() for u in ps])
    d.add_nodes_from(preds)
    if not nx.is_directed_acyclic_graph(d):
        raise ValueError("graph has a cycle")
    pebbled, peak = set(), 0
    for i, (kind, v) in enumerate(moves):
        if v not in preds:
            raise InvalidMove(i, f"unknown vertex {v!r}")
        missing = [u for u in preds[v] if u not in pebbled]
        if missing:
            raise InvalidMove(i, f"predecessors of {v!r} not pebbled: {missing}")
        if kind == "place":
            if v in pebbled:
                raise InvalidMove(i, f"{v!r} already pebbled")
            pebbled.add(v)
        elif kind == "remove":
            if v not in pebbled:
                raise InvalidMove(i, f"{v!r} not pebbled")
            pebbled.remove(v)
        else:
            raise InvalidMove(i, f"unknown move kind {kind!r}")
        peak = max(peak, len(pebbled))
    if goal is not None and set(goal) != pebbled:
        raise InvalidMove(len(moves), f"final pebbles {sorted(map(repr, pebbled))} differ from goal")
    return ClassicReport(True, peak, len(moves), frozenset(pebbled))


def load_strategy(text: str):
    """Parse ``{"dag": {v: [preds]}, "moves": [["place", v], ...], "goal": [...]}``."""
    d = json.loads(text)
    return d["dag"], [tuple(m) for m in d["moves"]], d.get("goal")


def unitary_of(events_apply, n_labels, labels):
    """Matrix of a basis-state map, for small oracles in tests."""
    dim = 2 ** n_labels
    M = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        bits = [(x >> (n_labels - 1 - i)) & 1 for i in range(n_labels)]
        out = events_apply(Q.QState.basis(labels, bits))
        M[:, x] = out.vector(labels)
    return M
