"""Random applicable pebble moves over a growing circuit graph."""

import numpy as np

from qurts import qstate as qs
from qurts.pebble import (CircuitGraph, CopyDelete, GateMove, Guard, Init, Join, MergeGuard,
                          Pebble, Pebbling, PremiseViolation, Release, Split, gate_goal,
                          pick_witnesses, step)


MAX_LABELS = 10


class Walk:
    """A pebbling game with input qubits in a random state."""

    def __init__(self, rng, n_inputs=3):
        self.rng = rng
        self.G = CircuitGraph()
        v = rng.normal(size=2 ** n_inputs) + 1j * rng.normal(size=2 ** n_inputs)
        labels = tuple(f"i{k}" for k in range(n_inputs))
        self.q = qs.QState.from_vector(labels, v / np.linalg.norm(v))
        self.peb = Pebbling.empty()
        for k, lab in enumerate(labels):
            self.peb = self.peb.add(self.G.linear(("loc", k), input=True), Pebble(lab))
        self.nloc = n_inputs
        self.naux = 0

    @property
    def state(self):
        return self.q, self.peb

    def frags(self):
        return [(v, p) for v, ps in self.peb.slots for p in ps]

    def candidates(self):
        """A shuffled list of candidate moves; some may not be applicable."""
        rng, G = self.rng, self.G
        out = []
        frags = self.frags()
        # init a fresh label on a fresh or existing location, keeping the
        # state small enough to simulate
        if self.q.n < MAX_LABELS:
            if frags and rng.random() < 0.6:
                loc = G.loc[frags[rng.integers(len(frags))][0]]
            else:
                loc = ("loc", int(rng.integers(0, self.nloc + 1)))
                if loc[1] == self.nloc:
                    self.nloc += 1
            self.naux += 1
            out.append(Init(("a", self.naux), G.init(loc)))
        for v, p in frags:
            if G.kind[v] == "init" and not p.guards:
                out.append(Release(p.label, v))
        if frags:
            v, p = frags[rng.integers(len(frags))]
            # split on a guard from another location
            others = [u for u in G.vertices if G.loc[u] != G.loc[v]]
            if others:
                u = others[rng.integers(len(others))]
                c, pol = G.canon(u, bool(rng.integers(2)))
                g = Guard(c, pol, None)
                if c not in {a.vertex for a in p.guards}:
                    out.append(Split(v, p, g))
                    # a join of the two halves of a split fragment
                    out.append(Join(v, Pebble(p.label, p.guards - {g}), g)
                               if g in p.guards else Split(v, p, g))
            if p.guards:
                g = sorted(p.guards)[0]
                out.append(Join(v, Pebble(p.label, p.guards - {g}), g))
            # gate move controlled by whole pebbles on other locations
            ctl = [(u, q) for u, q in frags
                   if G.loc[u] != G.loc[v] and not q.guards and q.label != p.label]
            k = int(rng.integers(0, min(2, len(ctl)) + 1))
            picks = [ctl[i] for i in rng.choice(len(ctl), size=k, replace=False)] if k else []
            if len({G.loc[u] for u, _ in picks}) == len(picks):
                controls = []
                for u, _ in picks:
                    c, pol = G.canon(u, bool(rng.integers(2)))
                    controls.append(Guard(c, pol, None))
                try:
                    w = G.gate(v, controls)
                    goal = gate_goal(G, v, w, p.guards)
                    if goal is not None:
                        wits = pick_witnesses(G, self.peb, goal, prefer=[q.label for _, q in picks])
                        if wits is not None:
                            out.append(GateMove(p, v, w, tuple(wits)))
                except PremiseViolation:
                    pass
            # merge a guarded half into a merge vertex
            if p.guards:
                g = sorted(p.guards)[0]
                same = [u for u in G.vertices if G.loc[u] == G.loc[v] and u != v]
                if same:
                    other = same[rng.integers(len(same))]
                    v0, v1 = (v, other) if not g.pol else (other, v)
                    m = G.merge(v0, v1, g.vertex, g.lft)
                    i = G.inputs[m].index(v)
                    out.append(MergeGuard(p, m, i, True))
        # copy a whole pebble into a label on the init vertex of its
        # location, or delete such a copy again
        for v, p in frags:
            init = G.init_of.get(G.loc[v])
            if p.guards or init is None or init == v:
                continue
            for u, q in frags:
                if q.label == p.label or q.guards:
                    continue
                if u == init:
                    out.append(CopyDelete(p.label, q.label, frozenset(), v, False, ()))
                elif u == v:
                    out.append(CopyDelete(p.label, q.label, frozenset(), v, True, ()))
        for v, p in frags:
            if self.G.kind[v] == "merge":
                for i in (0, 1):
                    out.append(MergeGuard(p, v, i, False))
        rng.shuffle(out)
        return out

    def applicable(self):
        """One applicable move, its kind drawn uniformly among the kinds
        that have one; returns (move, (state, effect)) or None."""
        by_kind = {}
        for m in self.candidates():
            if type(m) in by_kind:
                continue
            r = self.try_move(m)
            if r is not None:
                by_kind[type(m)] = (m, r)
        if not by_kind:
            return None
        kinds = sorted(by_kind, key=lambda k: k.__name__)
        return by_kind[kinds[self.rng.integers(len(kinds))]]

    def try_move(self, move):
        try:
            return step(None, self.G, self.state, move)
        except PremiseViolation:
            return None
