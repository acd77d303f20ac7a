"""Uncomputation semantics.

Programs run as a set of threads.  Executing a statement grows a circuit
graph and records effects; after every step the eager uncomputer plays
pebble moves so that each thread's current vertices are pebbled by the
fragments of their main labels under the thread's control guards.  The
quantum state only changes through pebble moves and checked statements,
and every change is recorded as a circuit event.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pebble as pb
from . import qstate as qs
from .pebble import GATE, INIT, LINEAR, MERGE, CircuitGraph, Guard, Pebble, Pebbling, PremiseViolation
from .simsem import Frame, SimulationError, _glob, _input_state
from .syntax import (
    BOOL, EBool, ECall, ECopy, EIf, EMeas, EQif, ETuple, EUnit, EUnitary, ELifted, EVar,
    EMPTY, STATIC, LVar, Program, SCoerce, SDrop, SEndLft, SFreeze, SLet, SLetPair,
    SLftLeq, SNewLft, SNoop, TPair, block_free,
)
from .synth import BUILTIN_TABLES, Gate as TableGate, decompose
from .typecheck import (
    Checker, Entry, TyState, canon, classify_leaf, control_lifetime, leaves, signature_state,
)

READY, CHECK, AWAIT, DONE = "ready", "check", "await", "terminated"


def _is_q(l) -> bool:
    return isinstance(l, int)


# ----------------------------------------------------------------- circuit

@dataclass
class Circuit:
    """Gate events over qubit labels; ``inputs`` are the entry qubits."""
    inputs: tuple
    events: list

    def labels(self):
        seen = list(self.inputs)
        for ev in self.events:
            for l in _event_labels(ev):
                if l not in seen:
                    seen.append(l)
        return seen

    def to_json(self):
        idx = {l: i for i, l in enumerate(self.labels())}
        out = []
        for ev in self.events:
            k = ev["kind"]
            if k in ("init", "release"):
                out.append({"kind": k, "q": idx[ev["q"]]})
            elif k == "ctrlx":
                out.append({"kind": "ctrlx", "target": idx[ev["target"]],
                            "controls": [{"q": idx[c], "neg": not p} for c, p in ev["controls"]]})
            elif k == "unitary":
                m = np.asarray(ev["matrix"])
                out.append({"kind": "unitary", "targets": [idx[t] for t in ev["targets"]],
                            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
                            "controls": [{"q": idx[c], "neg": not p} for c, p in ev["controls"]]})
            elif k == "project":
                out.append({"kind": "project", "q": idx[ev["q"]], "bit": ev["bit"]})
        return {"qubits": len(idx), "inputs": [idx[l] for l in self.inputs], "events": out}

    def to_text(self):
        lines = []
        for ev in self.events:
            k = ev["kind"]
            if k == "ctrlx":
                cs = ", ".join(("" if p else "!") + str(c) for c, p in ev["controls"])
                lines.append(f"x {ev['target']}" + (f" if {cs}" if cs else ""))
            elif k == "unitary":
                cs = ", ".join(("" if p else "!") + str(c) for c, p in ev["controls"])
                lines.append(f"u {ev['name']} {list(ev['targets'])}" + (f" if {cs}" if cs else ""))
            elif k == "project":
                lines.append(f"project {ev['q']} {ev['bit']}")
            else:
                lines.append(f"{k} {ev['q']}")
        return "\n".join(lines)

    def replay(self, initial: qs.QState, init_bits=None) -> qs.QState:
        """Apply the events to ``initial``.  ``init_bits`` starts chosen
        allocated labels from 1 instead of 0, for basis-state tables."""
        s = initial
        init_bits = dict(init_bits or {})
        for ev in self.events:
            k = ev["kind"]
            if k == "init":
                s = qs.adjoin_zero(s, ev["q"])
                if init_bits.pop(ev["q"], 0):
                    s = qs.apply_single_target(s, ev["q"])
            elif k == "release":
                s = qs.project(s, ev["q"], 0)
            elif k == "ctrlx":
                s = qs.apply_single_target(s, ev["target"], ev["controls"])
            elif k == "unitary":
                s = qs.apply_unitary(s, ev["matrix"], ev["targets"], ev["controls"])
            elif k == "project":
                s = qs.project(s, ev["q"], ev["bit"])
        return s


def _event_labels(ev):
    k = ev["kind"]
    if k == "ctrlx":
        return [c for c, _ in ev["controls"]] + [ev["target"]]
    if k == "unitary":
        return [c for c, _ in ev["controls"]] + list(ev["targets"])
    return [ev["q"]]


# ------------------------------------------------------------------ state

@dataclass
class Thread:
    tid: int
    stmts: tuple
    result: Optional[str]
    frame: Frame
    now: dict
    control: frozenset
    parent: Optional[int] = None
    pc: int = 0
    status: str = READY
    pending: object = None
    free: list = field(default_factory=list)
    counter: int = 0
    res: Optional[list] = None

    def copy(self) -> "Thread":
        pend = self.pending
        if isinstance(pend, dict):
            pend = dict(pend)
            if "frame" in pend:
                pend["frame"] = pend["frame"].copy()
        return Thread(self.tid, self.stmts, self.result, self.frame.copy(), dict(self.now),
                      self.control, self.parent, self.pc, self.status, pend, list(self.free),
                      self.counter, None if self.res is None else list(self.res))


@dataclass
class SystemState:
    threads: dict
    G: CircuitGraph
    q: qs.QState
    c: dict
    peb: Pebbling
    live: set = field(default_factory=set)
    lcount: int = 0
    ccount: int = 0
    aux: int = 0
    tcount: int = 0
    events: list = field(default_factory=list)
    outcomes: tuple = ()
    inputs: tuple = ()
    aux_loc: dict = field(default_factory=dict)
    effects: list = field(default_factory=list)
    schedule: list = field(default_factory=list)

    def copy(self) -> "SystemState":
        return SystemState({k: t.copy() for k, t in self.threads.items()}, self.G.copy(), self.q,
                           dict(self.c), self.peb, set(self.live), self.lcount, self.ccount,
                           self.aux, self.tcount, list(self.events), self.outcomes, self.inputs,
                           dict(self.aux_loc), list(self.effects), list(self.schedule))

    def is_live(self, lf) -> bool:
        if lf is None or lf == STATIC:
            return True
        if lf == EMPTY:
            return False
        return lf.name in self.live

    def fresh_lifetime(self):
        name = f"g{self.lcount}"
        self.lcount += 1
        self.live.add(name)
        return LVar(name)

    def fresh_classical(self):
        k = f"c{self.ccount}"
        self.ccount += 1
        return k

    @property
    def circuit(self) -> Circuit:
        return Circuit(self.inputs, list(self.events))


# ------------------------------------------------------------- uncomputer

class Uncomputer:
    """Pebble moves that restore the eagerly computed pebbling."""

    def __init__(self, sys: SystemState):
        self.sys = sys

    def do(self, move, log=None):
        s = self.sys
        mains = {l: l for l in s.G.linear_of}
        (q, peb), eff = pb.step(s.is_live, s.G, (s.q, s.peb), move, main_labels=mains)
        s.q, s.peb = q, peb
        if eff is not None:
            if eff.kind == "ctrlx":
                s.events.append({"kind": "ctrlx", "target": eff.label, "controls": list(eff.controls)})
            else:
                s.events.append({"kind": eff.kind, "q": eff.label})
        if log is not None:
            log.append(move)

    def undo(self, log):
        for m in reversed(log):
            self.do(pb.inverse(m))

    def new_aux(self, loc):
        s = self.sys
        lab = ("aux", s.aux)
        s.aux += 1
        s.aux_loc[lab] = loc
        return lab

    def holder(self, vertex, allowed, exclude):
        """A label with a fragment on ``vertex`` or its negation whose guards
        lie within ``allowed``; main labels first."""
        G, peb = self.sys.G, self.sys.peb
        keys = {(g.vertex, g.pol) for g in allowed}
        found = []
        for v, ps in peb.slots:
            if G.canon(v)[0] != vertex:
                continue
            for p in ps:
                if p.label in exclude:
                    continue
                if all((g.vertex, g.pol) in keys for g in p.guards):
                    found.append(p.label)
        main = G.loc[vertex]
        found = sorted(set(found), key=lambda l: (l != main, repr(l)))
        return found[0] if found else None

    def witnesses(self, goal, D, log, target=None):
        wits = []
        for a in goal:
            lab = self.holder(a.vertex, set(goal) | set(D), set(wits) | {target})
            if lab is None:
                lab = self.new_aux(self.sys.G.loc[a.vertex])
                self.place(lab, frozenset(D), a.vertex, log)
            wits.append(lab)
        return tuple(wits)

    def place(self, label, D, v, log):
        """Bring fragment ``label{D}`` from the init vertex of ``v``'s
        location to ``v``; every move is appended to ``log``."""
        s = self.sys
        G = s.G
        k = G.kind[v]
        if k == INIT:
            if label not in s.q.labels:
                self.do(pb.Init(label, v), log)
            return
        if k == GATE:
            u = G.src[v]
            self.place(label, D, u, log)
            goal = pb.gate_goal(G, u, v, D)
            if goal is None:
                raise PremiseViolation("consistent guards", f"placing {label!r} on {v}")
            wits = self.witnesses(goal, D, log, target=label)
            self.do(pb.GateMove(Pebble(label, frozenset(D)), u, v, wits), log)
            return
        if k == MERGE:
            gv, lft = G.guard[v]
            pols = {g.pol for g in D if g.vertex == gv}
            if len(pols) == 1:
                i = int(pols.pop())
                self.place(label, D, G.inputs[v][i], log)
                self.do(pb.MergeGuard(Pebble(label, frozenset(D)), v, i), log)
                return
            for i in (0, 1):
                Di = frozenset(D) | {Guard(gv, bool(i), lft)}
                self.place(label, Di, G.inputs[v][i], log)
                self.do(pb.MergeGuard(Pebble(label, Di), v, i), log)
            return
        raise PremiseViolation("uncomputable vertex", f"cannot reach {k} vertex {v} from init")

    def controls_for(self, C, log, target=None):
        """Control list realising guard set ``C``, adding auxiliary pebbles
        to ``log`` if needed."""
        goal = pb._goal((), C)
        wits = self.witnesses(goal, C, log, target)
        ctrls = pb._entail(self.sys.is_live, self.sys.G, self.sys.peb, wits, goal)
        if ctrls is None:
            raise PremiseViolation("guard entailment", f"controls for {sorted(C)}")
        return ctrls

    # effects

    def apply(self, eff):
        kind = eff[0]
        s = self.sys
        if kind == "alloc":
            _, loc, C = eff
            v = s.G.init(loc)
            if loc not in s.q.labels:
                self.do(pb.Init(loc, v))
            if not s.peb.has(v, Pebble(loc, C)):
                raise PremiseViolation("allocated location is free", str(loc))
        elif kind == "gate":
            _, loc, frm, to, C = eff
            goal = pb.gate_goal(s.G, frm, to, C)
            log = []
            wits = self.witnesses(goal, C, log, target=loc)
            self.do(pb.GateMove(Pebble(loc, C), frm, to, wits))
            self.undo(log)
        elif kind == "linearize":
            _, loc, frm, lin, C = eff
            if frm != lin:
                self.do(pb.LinearGuard(Pebble(loc, C), frm, lin))
        elif kind == "merge":
            _, loc, m, C, g = eff
            for h in (g, g.negate()):
                self.do(pb.MergeGuard(Pebble(loc, C | {h}), m, int(h.pol)))
        elif kind == "drop":
            _, loc, v, C = eff
            if s.G.kind[v] == INIT:
                return
            log = []
            a = self.new_aux(loc)
            self.place(a, C, v, log)
            goal = pb._goal((), C)
            wits = self.witnesses(goal, C, log, target=loc)
            self.do(pb.CopyDelete(a, loc, C, v, True, wits))
            self.undo(log)
        else:
            raise SimulationError(f"unknown effect {kind}")

    def release(self):
        s = self.sys
        busy = set()
        for t in s.threads.values():
            busy |= set(t.now)
        for l in list(s.q.labels):
            if not _is_q(l) or l in busy:
                continue
            init = s.G.init_of.get(l)
            if init is not None and s.peb.where(l) == {init} and s.peb.has(init, Pebble(l)):
                self.do(pb.Release(l, init))

    def run(self):
        s = self.sys
        while s.effects:
            self.apply(s.effects.pop(0))
        self.release()


def eager_violations(sys: SystemState):
    """Owned quantum locations whose main-label fragment is not on the
    owning thread's current vertex."""
    out = []
    for t in sys.threads.values():
        for x, locs in t.frame.vars.items():
            ent = t.frame.st.ctx.get(x)
            if ent is None:
                continue
            for (chain, _), l in zip(leaves(ent.ty), locs):
                if not _is_q(l) or any(k == "&" for k, _ in chain):
                    continue
                v = t.now.get(l)
                if v is None or not sys.peb.has(v, Pebble(l, t.control)):
                    out.append((t.tid, x, l, v))
    return out


# ------------------------------------------------------------- execution

class Machine:
    def __init__(self, program: Program, tables=None, gates=None):
        self.program = program
        self.tables = dict(BUILTIN_TABLES)
        if tables:
            self.tables.update(tables)
        self.gates = {k: np.asarray(v, dtype=complex) for k, v in (gates or {}).items()}
        arities = {k: int(round(np.log2(v.shape[0]))) for k, v in self.gates.items()}
        self.checker = Checker(program, self.tables, arities)
        self.checker.fns = {f.name: f for f in program.fns}
        self._decomp = {}

    def decomposition(self, name):
        if name not in self._decomp:
            self._decomp[name] = decompose(self.tables[name])
        return self._decomp[name]

    # -- setup
    def initial(self, entry="main", inputs=None) -> SystemState:
        f = self.program.get(entry)
        sys = SystemState({}, CircuitGraph(), qs.QState.scalar(1.0), {}, Pebbling.empty())
        frame = Frame({}, signature_state(f), {}, f)
        for a in f.lfts:
            frame.lmap[a] = sys.fresh_lifetime()
        qlocs, now = [], {}
        for p in f.params:
            locs = []
            for _chain, base in leaves(p.ty):
                if base == BOOL:
                    k = sys.fresh_classical()
                    sys.c[k] = False
                    locs.append(k)
                else:
                    l = len(qlocs)
                    qlocs.append(l)
                    locs.append(l)
            frame.vars[p.name] = locs
        for l in qlocs:
            v = sys.G.linear(l, input=True)
            now[l] = v
            sys.peb = sys.peb.add(v, Pebble(l))
        sys.q = _input_state(qlocs, inputs) if qlocs else qs.QState.scalar(1.0)
        sys.inputs = tuple(qlocs)
        root = Thread(0, f.body.stmts, f.body.result, frame, now, frozenset(), counter=len(qlocs))
        sys.threads[0] = root
        sys.tcount = 1
        return sys

    # -- scheduler
    def executable(self, sys: SystemState, t: Thread) -> bool:
        if t.status == READY:
            return True
        if t.status == DONE:
            return False
        if t.status == AWAIT:
            return all(sys.threads[c].status == DONE for c in t.pending["children"])
        kind = t.pending[0]
        C = t.control
        if kind == "lin":
            return all(sys.peb.has(sys.G.linear_of[l], Pebble(l, C)) for l in t.pending[1])
        if kind == "meas":
            l = t.pending[2]
            lin = sys.G.linear_of.get(l)
            return (not C and lin is not None and t.now.get(l) == lin
                    and sys.peb.where(l) == {lin} and sys.peb.has(lin, Pebble(l)))
        if kind in ("unitary", "lifted"):
            return all(t.now.get(l) == sys.G.linear_of.get(l)
                       and sys.peb.has(t.now[l], Pebble(l, C)) for l in t.pending[2])
        raise SimulationError(f"unknown check {kind}")

    def choices(self, sys: SystemState):
        return sorted(tid for tid, t in sys.threads.items() if self.executable(sys, t))

    def exec(self, sys: SystemState, tid: int):
        """One scheduler step of thread ``tid`` followed by the uncomputer;
        returns the successor systems (two after a measurement)."""
        t = sys.threads[tid]
        if not self.executable(sys, t):
            raise PremiseViolation("executable thread", str(tid))
        sys.schedule.append(tid)
        if t.status == AWAIT:
            self._wake(sys, t)
            outs = [sys]
        elif t.status == CHECK:
            outs = self._checked(sys, t)
        else:
            outs = self._step(sys, t)
        for s in outs:
            Uncomputer(s).run()
        return outs

    # -- helpers
    def _owned_kinds(self, sys, frame):
        out = {}
        for x, locs in frame.vars.items():
            ent = frame.st.ctx.get(x)
            if ent is None:
                continue
            for (chain, _), l in zip(leaves(ent.ty), locs):
                if not _is_q(l):
                    continue
                gchain = tuple((k, _glob(frame, lf)) for k, lf in chain)
                kind = classify_leaf(gchain, sys.is_live)
                if kind != "ref":
                    out[l] = kind
        return out

    def _alloc(self, sys, t):
        if t.free:
            l = t.free.pop(0)
        else:
            l = t.counter
            t.counter += 1
        v = sys.G.init(l)
        t.now[l] = v
        sys.effects.append(("alloc", l, t.control))
        return l

    def _refresh_now(self, t):
        live = {l for locs in t.frame.vars.values() for l in locs if _is_q(l)}
        t.now = {l: v for l, v in t.now.items() if l in live}

    def _post(self, t, s):
        self.checker.fn = t.frame.fn
        return self.checker.check_statement(s, t.frame.st)

    def _linearize(self, sys, t, locs):
        for l in locs:
            lin = sys.G.linear(l)
            frm = t.now[l]
            if frm != lin:
                sys.G.add_linear_edge(frm, lin, t.control)
                sys.effects.append(("linearize", l, frm, lin, t.control))
            t.now[l] = lin

    # -- statements
    def _step(self, sys, t):
        if t.pc == len(t.stmts):
            V = t.frame.vars
            if t.result is None:
                res, rest = [], set(V)
            else:
                res, rest = list(V[t.result]), set(V) - {t.result}
            if rest:
                raise SimulationError(f"variables left at block end: {sorted(rest)}")
            t.res = res
            t.status = DONE
            return [sys]
        s = t.stmts[t.pc]
        fr = t.frame
        V = fr.vars
        if isinstance(s, (SNoop, SLftLeq)):
            fr.st = self._post(t, s)
        elif isinstance(s, SNewLft):
            fr.st = self._post(t, s)
            fr.lmap[s.lft] = sys.fresh_lifetime()
        elif isinstance(s, (SEndLft, SCoerce)):
            before = self._owned_kinds(sys, fr)
            fr.st = self._post(t, s)
            if isinstance(s, SEndLft):
                g = fr.lmap[s.lft]
                sys.live.discard(g.name)
            after = self._owned_kinds(sys, fr)
            W = [l for l, k in before.items() if k == "affine" and after.get(l) == "linear"]
            if W:
                self._linearize(sys, t, W)
                t.status, t.pending = CHECK, ("lin", W)
                return [sys]
        elif isinstance(s, SFreeze):
            fr.st = self._post(t, s)
            V[s.target] = list(V[s.source])
        elif isinstance(s, SLetPair):
            ty = fr.st.ctx[s.source].ty
            c = ty if isinstance(ty, TPair) else canon(ty)
            k = len(leaves(c.left))
            fr.st = self._post(t, s)
            locs = V.pop(s.source)
            V[s.left], V[s.right] = locs[:k], locs[k:]
        elif isinstance(s, SDrop):
            ent = fr.st.ctx[s.name]
            for (chain, _), l in zip(leaves(ent.ty), V[s.name]):
                if any(k == "&" for k, _ in chain):
                    continue
                if _is_q(l):
                    sys.effects.append(("drop", l, t.now.pop(l), t.control))
                    t.free.append(l)
                else:
                    sys.c.pop(l, None)
            fr.st = self._post(t, s)
            del V[s.name]
        elif isinstance(s, SLet):
            return self._let(sys, t, s)
        else:
            raise SimulationError(f"unknown statement {s!r}")
        t.pc += 1
        self._refresh_now(t)
        return [sys]

    def _let(self, sys, t, s):
        e = s.expr
        fr = t.frame
        V = fr.vars
        y = s.target
        if isinstance(e, (EMeas, EUnitary)):
            locs = []
            for a in ([e.name] if isinstance(e, EMeas) else e.args):
                locs += V[a]
            t.status = CHECK
            t.pending = ("meas", s, locs[0]) if isinstance(e, EMeas) else ("unitary", s, locs)
            return [sys]
        if isinstance(e, (ECall, EIf, EQif)):
            return self._spawn(sys, t, s)
        post = self._post(t, s)
        if isinstance(e, EVar):
            V[y] = V.pop(e.name)
        elif isinstance(e, EBool):
            k = sys.fresh_classical()
            sys.c[k] = bool(e.value)
            V[y] = [k]
        elif isinstance(e, EUnit):
            V[y] = []
        elif isinstance(e, ETuple):
            V[y] = V.pop(e.left) + V.pop(e.right)
        elif isinstance(e, ECopy):
            ent = fr.st.ctx[e.name]
            locs = []
            for (chain, _), l in zip(leaves(ent.ty), V[e.name]):
                if not _is_q(l) and all(k != "&" for k, _ in chain):
                    n = sys.fresh_classical()
                    sys.c[n] = sys.c[l]
                    locs.append(n)
                else:
                    locs.append(l)
            V[y] = locs
        elif isinstance(e, ELifted):
            return self._lifted(sys, t, s, post)
        else:
            raise SimulationError(f"unknown expression {e!r}")
        fr.st = post
        t.pc += 1
        self._refresh_now(t)
        return [sys]

    def _lifted(self, sys, t, s, post):
        e = s.expr
        fr = t.frame
        table = self.tables[e.table]
        ins = []
        for a in e.args:
            ins += fr.vars.pop(a)
        fresh = [self._alloc(sys, t) for _ in range(table.m - table.n)]
        outs = ins + fresh
        fr.vars[s.target] = outs
        fr.st = post
        kinds = self._owned_kinds(sys, fr)
        chain = leaves(post.ctx[s.target].ty)[0][0] if outs else ()
        lft = _glob(fr, chain[0][1]) if chain else STATIC
        if all(kinds.get(l) == "affine" for l in outs):
            for ev in self.decomposition(e.table):
                if not isinstance(ev, TableGate):
                    continue
                tl = outs[ev.target]
                K = set(t.control)
                for ci, pol in ev.controls:
                    K.add(sys.G.guard_of(t.now[outs[ci]], pol, lft))
                frm = t.now[tl]
                to = sys.G.gate(frm, K)
                t.now[tl] = to
                sys.effects.append(("gate", tl, frm, to, t.control))
            t.pc += 1
            self._refresh_now(t)
            return [sys]
        self._linearize(sys, t, [l for l in outs if t.now[l] != sys.G.linear_of.get(l)])
        t.status, t.pending = CHECK, ("lifted", s, outs)
        return [sys]

    def _checked(self, sys, t):
        kind = t.pending[0]
        C = t.control
        fr = t.frame
        unc = Uncomputer(sys)
        if kind == "lin":
            pass
        elif kind == "meas":
            s, l = t.pending[1], t.pending[2]
            if C:
                raise PremiseViolation("measurement outside quantum control", str(l))
            post = self._post(t, s)
            lin = sys.G.linear_of[l]
            outs = []
            for bit in (0, 1):
                w = sys.copy() if bit == 0 else sys
                u = w.threads[t.tid]
                w.q = qs.project(w.q, l, bit)
                w.peb = w.peb.remove(lin, Pebble(l))
                k = w.fresh_classical()
                w.c[k] = bool(bit)
                w.outcomes = w.outcomes + (bit,)
                w.events.append({"kind": "project", "q": l, "bit": bit})
                u.frame.vars.pop(s.expr.name)
                u.frame.vars[s.target] = [k]
                u.frame.st = post
                u.pc += 1
                u.status, u.pending = READY, None
                self._refresh_now(u)
                outs.append(w)
            return outs
        elif kind == "unitary":
            s, locs = t.pending[1], t.pending[2]
            e = s.expr
            post = self._post(t, s)
            U = self.gates[e.gate] if e.gate in self.gates else qs.gate_matrix(e.gate, e.params)
            log = []
            ctrls = unc.controls_for(C, log)
            sys.q = qs.apply_unitary(sys.q, U, locs, ctrls)
            sys.events.append({"kind": "unitary", "name": e.gate, "targets": list(locs),
                               "matrix": np.asarray(U), "controls": list(ctrls)})
            unc.undo(log)
            for a in e.args:
                fr.vars.pop(a)
            fr.vars[s.target] = list(locs)
            fr.st = post
        elif kind == "lifted":
            s, outs = t.pending[1], t.pending[2]
            log = []
            base = unc.controls_for(C, log)
            for ev in self.decomposition(s.expr.table):
                if isinstance(ev, TableGate):
                    ctrls = list(base) + [(outs[ci], pol) for ci, pol in ev.controls]
                    sys.q = qs.apply_single_target(sys.q, outs[ev.target], ctrls)
                    sys.events.append({"kind": "ctrlx", "target": outs[ev.target],
                                       "controls": ctrls})
            unc.undo(log)
        t.pc += 1
        t.status, t.pending = READY, None
        self._refresh_now(t)
        return [sys]

    # -- threads
    def _child(self, sys, t, frame, block, control):
        tid = sys.tcount
        sys.tcount += 1
        now = {l: t.now[l] for locs in frame.vars.values() for l in locs if _is_q(l)}
        c = Thread(tid, block.stmts, block.result, frame, now, control, parent=t.tid,
                   counter=t.counter)
        sys.threads[tid] = c
        return tid

    def _gamma(self, e):
        gamma = []
        for blk in (e.then, e.other):
            for x in block_free(blk):
                if x not in gamma:
                    gamma.append(x)
        return gamma

    def _subframe(self, frame, gamma):
        ctx = {x: Entry(frame.st.ctx[x].ty) for x in gamma}
        return Frame({x: list(frame.vars[x]) for x in gamma}, TyState(ctx, frame.st.A.copy()),
                     dict(frame.lmap), frame.fn)

    def _spawn(self, sys, t, s):
        e = s.expr
        fr = t.frame
        post = self._post(t, s)
        info = {"stmt": s, "frame": fr.copy(), "post": post}
        if isinstance(e, ECall):
            f = self.checker.fns[e.func]
            self.checker.fn = fr.fn
            sigma = self.checker.call_sigma(f, e, fr.st)
            child = Frame({}, signature_state(f), {}, f)
            for a in f.lfts:
                child.lmap[a] = _glob(fr, sigma[LVar(a)])
            for p, x in zip(f.params, e.args):
                child.vars[p.name] = list(fr.vars[x])
            taken = list(e.args)
            info["children"] = [self._child(sys, t, child, f.body, t.control)]
        elif isinstance(e, EIf):
            (l,) = fr.vars[e.cond]
            taken = self._gamma(e)
            blk = e.then if sys.c[l] else e.other
            info["children"] = [self._child(sys, t, self._subframe(fr, taken), blk, t.control)]
        else:
            (lx,) = fr.vars[e.cond]
            taken = self._gamma(e)
            lf = control_lifetime(fr.st.A, fr.st.ctx[e.cond].ty)
            lft = _glob(fr, lf) if lf is not None else STATIC
            g = sys.G.guard_of(t.now[lx], True, lft)
            fixed = [a for a in t.control if a.vertex == g.vertex]
            if fixed:
                blk = e.then if fixed[0].pol == g.pol else e.other
                info["children"] = [self._child(sys, t, self._subframe(fr, taken), blk, t.control)]
            else:
                c1 = self._child(sys, t, self._subframe(fr, taken), e.then, t.control | {g})
                c0 = self._child(sys, t, self._subframe(fr, taken), e.other,
                                 t.control | {g.negate()})
                info["children"] = [c1, c0]
                info["guard"] = g
        info["taken"] = taken
        t.frame = fr.view_without(set(taken))
        self._refresh_now(t)
        t.status, t.pending = AWAIT, info
        return [sys]

    def _wake(self, sys, t):
        info = t.pending
        kids = [sys.threads.pop(c) for c in info["children"]]
        s = info["stmt"]
        fr = info["frame"]
        for x in info["taken"]:
            del fr.vars[x]
        if len(kids) == 1:
            (k,) = kids
            res = k.res
            for l in res:
                if _is_q(l):
                    t.now[l] = k.now[l]
            t.counter = k.counter
        else:
            k1, k0 = kids
            g = info["guard"]
            if k1.res != k0.res:
                raise PremiseViolation(
                    "branch results occupy the same locations",
                    f"{k1.res} / {k0.res}; insert swaps with normalize_qif_locations")
            res = k1.res
            for l in res:
                if not _is_q(l):
                    continue
                v1, v0 = k1.now[l], k0.now[l]
                if v1 == v0:
                    t.now[l] = v1
                    continue
                a, b = (v0, v1) if g.pol else (v1, v0)
                m = sys.G.merge(a, b, g.vertex, g.lft)
                t.now[l] = m
                sys.effects.append(("merge", l, m, t.control, g))
            t.counter = max(k1.counter, k0.counter)
        fr.vars[s.target] = list(res)
        fr.st = info["post"]
        t.frame = fr
        t.pc += 1
        t.status, t.pending = READY, None
        self._refresh_now(t)


# ------------------------------------------------------------ front ends

@dataclass
class EagerBranch:
    q: qs.QState
    c: dict
    result: list
    probability: float
    outcomes: tuple
    circuit: Circuit
    system: SystemState

    @property
    def quantum_result(self):
        return [l for l in self.result if _is_q(l)]

    def result_bits(self):
        return tuple(int(self.c[l]) for l in self.result if not _is_q(l))


def _drive(m: Machine, sys: SystemState, pick):
    finished = []
    stack = [sys]
    while stack:
        s = stack.pop()
        while True:
            ch = m.choices(s)
            if not ch:
                break
            outs = m.exec(s, pick(s, ch))
            s = outs[-1]
            stack.extend(outs[:-1])
        root = s.threads.get(0)
        if root is None or root.status != DONE:
            raise PremiseViolation("scheduler deadlock",
                                   ", ".join(f"{t.tid}:{t.status}" for t in s.threads.values()))
        finished.append(s)
    finished.sort(key=lambda s: s.outcomes)
    out = []
    for s in finished:
        root = s.threads[0]
        out.append(EagerBranch(s.q, dict(s.c), list(root.res), qs.norm2(s.q), s.outcomes,
                               s.circuit, s))
    return out


def run_eager(p: Program, entry: str = "main", inputs=None, tables=None, gates=None):
    """Every measurement branch under the eager strategy with the
    lowest-id scheduling policy."""
    m = Machine(p, tables, gates)
    return _drive(m, m.initial(entry, inputs), lambda s, ch: ch[0])


def run_schedule(p: Program, entry="main", inputs=None, tables=None, gates=None, seed=0):
    """Like :func:`run_eager` with a seeded random choice among executable
    threads."""
    m = Machine(p, tables, gates)
    rng = random.Random(seed)
    return _drive(m, m.initial(entry, inputs), lambda s, ch: rng.choice(ch))


def result_state(b) -> qs.QState:
    """The final state ordered by result qubits then remaining labels."""
    res = [l for l in b.result if _is_q(l)] if isinstance(b, EagerBranch) \
        else [l for l in b.env.loc["result"] if l not in b.env.c]
    q = b.q if isinstance(b, EagerBranch) else b.env.q
    rest = sorted((l for l in q.labels if l not in res), key=repr)
    return q.reorder(tuple(res) + tuple(rest))


def branch_distance(a, b) -> float:
    """Elementwise distance of two final states, comparing result qubits in
    order; inf when their shapes differ."""
    sa, sb = result_state(a), result_state(b)
    if sa.n != sb.n:
        return float("inf")
    return float(np.max(np.abs(sa.vector() - sb.vector()), initial=0.0))


def compare_with_simulation(p: Program, entry="main", inputs=None, tables=None, gates=None):
    """Per measurement branch, the distance between the eager run and the
    simulation semantics."""
    from .simsem import eval_program
    sim = {b.outcomes: b for b in eval_program(p, entry, inputs, tables, gates)}
    unc = {b.outcomes: b for b in run_eager(p, entry, inputs, tables, gates)}
    report = {}
    for k in sorted(set(sim) | set(unc)):
        if k not in sim or k not in unc:
            present = sim.get(k) or unc.get(k)
            prob = present.probability
            report[k] = 0.0 if prob <= qs.TOL else float("inf")
            continue
        report[k] = branch_distance(sim[k], unc[k])
    return report


def verify_interleavings(p: Program, entry="main", n=10, inputs=None, tables=None, gates=None,
                         seed=0):
    """Run ``n`` seeded random schedules and report the largest distance of
    any branch from the default schedule."""
    base = {b.outcomes: b for b in run_eager(p, entry, inputs, tables, gates)}
    schedules = set()
    worst = 0.0
    per = {k: 0.0 for k in base}
    for i in range(n):
        runs = run_schedule(p, entry, inputs, tables, gates, seed=seed + i)
        for b in runs:
            schedules.add(tuple(b.system.schedule))
            ref = base.get(b.outcomes)
            d = branch_distance(ref, b) if ref is not None else float("inf")
            per[b.outcomes] = max(per.get(b.outcomes, 0.0), d)
            worst = max(worst, d)
    return {"runs": n, "distinct_schedules": len(schedules), "max_distance": worst,
            "per_branch": per}
