"""Simulation semantics: a direct interpreter over dense states.

Each function activation is a :class:`Frame` holding the location lists of
its variables together with the static typing state, advanced statement by
statement by the type checker.  The typing state tells which locations are
frozen, affinely owned or linearly owned; that is what the well-formedness
and dependency-graph checks need.

Static lifetime names are mapped to run-wide lifetime names so that
liveness can be decided across frames.
"""

from __future__ import annotations

import copy as _copy
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from . import qstate as qs
from .syntax import (
    BOOL, EBool, ECall, ECopy, EIf, EMeas, EQif, ETuple, EUnit, EUnitary, ELifted, EVar,
    EMPTY, STATIC, LVar, Program, SCoerce, SDrop, SEndLft, SFreeze, SLet, SLetPair,
    SLftLeq, SNewLft, SNoop, TPair, block_free, fmt_stmt,
)
from .synth import BUILTIN_TABLES
from .typecheck import (
    Checker, Entry, TyState, canon, classify_leaf, leaves, signature_state,
)


class SimulationError(RuntimeError):
    """An internal invariant failed; never reachable from well-typed input."""


class WellFormednessError(SimulationError):
    pass


class DepGraphError(SimulationError):
    pass


# ------------------------------------------------------------------ values

@dataclass
class Env:
    """Variable locations, quantum state and classical store."""
    loc: dict
    q: qs.QState
    c: dict


@dataclass
class Frame:
    vars: dict              # variable -> list of locations
    st: TyState
    lmap: dict              # static lifetime name -> run-wide lifetime
    fn: object = None

    def copy(self):
        return Frame({k: list(v) for k, v in self.vars.items()}, self.st.copy(),
                     dict(self.lmap), self.fn)

    def view_without(self, names):
        """The frame as seen from a nested scope that took ``names``."""
        keep = {k: v for k, v in self.vars.items() if k not in names}
        ctx = {k: v for k, v in self.st.ctx.items() if k not in names}
        return Frame(keep, TyState(ctx, self.st.A), self.lmap, self.fn)


@dataclass
class DepGraph:
    """Dependency functions of affinely owned locations.

    ``funcs[l] = (sources, fn)`` where ``fn`` maps an assignment of the
    source locations to the bit location ``l`` must hold.  Edges of the
    graph run from every source to ``l``.
    """
    funcs: dict = field(default_factory=dict)

    def edges(self):
        return sorted((s, l) for l, (src, _) in self.funcs.items() for s in src)

    @property
    def D(self):
        return set(self.funcs)


@dataclass
class TraceStep:
    stmt: str
    loc: dict
    q: qs.QState
    c: dict


@dataclass
class World:
    q: qs.QState
    c: dict
    counter: int = 0
    lcount: int = 0
    live: set = field(default_factory=set)
    dep: DepGraph = field(default_factory=DepGraph)
    fixed: dict = field(default_factory=dict)      # control locations fixed inside qif branches
    tainted: set = field(default_factory=set)      # locations derived from external inputs
    outcomes: tuple = ()
    trace: list = field(default_factory=list)

    def fork(self):
        w = World(self.q, dict(self.c), self.counter, self.lcount, set(self.live),
                  DepGraph(dict(self.dep.funcs)), dict(self.fixed), set(self.tainted),
                  self.outcomes, list(self.trace))
        return w

    def fresh(self, k=1):
        out = list(range(self.counter, self.counter + k))
        self.counter += k
        return out

    def fresh_lifetime(self):
        name = f"g{self.lcount}"
        self.lcount += 1
        self.live.add(name)
        return LVar(name)

    def is_live(self, lf):
        if lf == STATIC:
            return True
        if lf == EMPTY:
            return False
        return lf.name in self.live


@dataclass
class Branch:
    """One measurement branch of a run."""
    env: Env
    probability: float
    outcomes: tuple
    trace: list
    dep: Optional[DepGraph] = None

    @property
    def zero(self) -> bool:
        return self.probability <= qs.TOL

    def __iter__(self):
        yield self.env
        yield self.probability


# ---------------------------------------------------------- ownership view

def _glob(frame: Frame, lf):
    if isinstance(lf, LVar):
        try:
            return frame.lmap[lf.name]
        except KeyError:
            raise SimulationError(f"lifetime {lf} has no run-time counterpart") from None
    return lf


@dataclass
class Ownership:
    frozen: list
    linear: list
    affine: list
    affine_all: set     # affinely owned by any frame, frozen or not
    owner: dict


def ownership(world: World, stack, frame: Frame) -> Ownership:
    """Classify every quantum location of the state.

    Outer frames (and the parts of the current frame handed to a nested
    scope) are read-only for the current scope, so their locations count
    as frozen here; locations owned by nobody are frozen too.
    """
    owner = {}
    cls = {}
    affine_all = set()
    for fr in tuple(stack) + (frame,):
        current = fr is frame
        for x, locs in fr.vars.items():
            ent = fr.st.ctx.get(x)
            if ent is None:
                raise SimulationError(f"variable {x} has locations but no type")
            ls = leaves(ent.ty)
            if len(ls) != len(locs):
                raise SimulationError(
                    f"{x}: {ent.ty} has {len(ls)} leaves but {len(locs)} locations")
            for (chain, _base), l in zip(ls, locs):
                gchain = tuple((k, _glob(fr, lf)) for k, lf in chain)
                kind = classify_leaf(gchain, world.is_live)
                if kind == "ref":
                    continue
                if l in owner:
                    raise WellFormednessError(f"location {l} owned by {owner[l]} and {x}")
                owner[l] = x
                if l in world.tainted:
                    kind = "external"
                if kind == "affine" and l not in world.c:
                    affine_all.add(l)
                if current and ent.frozen is None:
                    cls[l] = kind
    frozen, linear, affine = [], [], []
    for l in world.q.labels:
        k = cls.get(l)
        if k == "linear":
            linear.append(l)
        elif k == "affine":
            affine.append(l)
        else:
            frozen.append(l)
    return Ownership(frozen, linear, affine, affine_all, owner)


def well_formed_state(q: qs.QState, frozen, linear, affine, tol=qs.TOL) -> bool:
    """``Σ_i |i⟩_frozen |φ_i⟩_linear |f(i)⟩_affine`` for some function f."""
    if not affine:
        return True
    t = q.reorder(tuple(frozen) + tuple(linear) + tuple(affine)).tensor
    t = t.reshape(2 ** len(frozen), 2 ** len(linear), 2 ** len(affine))
    mass = np.abs(t).max(axis=1) > tol          # (frozen, affine) support
    return bool(np.all(mass.sum(axis=1) <= 1))


def check_well_formed(env: Env, st: TyState, live=None) -> bool:
    """Well-formedness of a single-scope environment against its context.

    ``live`` decides liveness of lifetimes (defaults to the static
    preorder's judgement).
    """
    live = live or st.A.is_live
    owned = {}
    for x, locs in env.loc.items():
        ent = st.ctx.get(x)
        if ent is None:
            return False
        ls = leaves(ent.ty)
        if len(ls) != len(locs):
            return False
        for (chain, _), l in zip(ls, locs):
            kind = classify_leaf(chain, live)
            if kind == "ref":
                continue
            if l in owned:
                return False
            owned[l] = "frozen" if ent.frozen is not None else kind
    frozen = [l for l in env.q.labels if owned.get(l, "frozen") == "frozen"]
    linear = [l for l in env.q.labels if owned.get(l) == "linear"]
    affine = [l for l in env.q.labels if owned.get(l) == "affine"]
    return well_formed_state(env.q, frozen, linear, affine)


def _dep_check(world: World, own: Ownership, where: str):
    funcs = world.dep.funcs
    # prune dependency functions of locations that stopped being affine
    for l in list(funcs):
        if l not in own.affine_all:
            del funcs[l]
    for l in own.affine_all:
        if l not in funcs and l not in world.tainted:
            raise DepGraphError(f"{where}: affine location {l} has no dependency function")
    frozen = set(own.frozen) | set(world.fixed)
    labels = set(world.q.labels)
    for l, (src, _) in funcs.items():
        for s in src:
            if s not in frozen:
                raise DepGraphError(f"{where}: edge {s} -> {l} leaves a location that is not frozen")
            if s not in labels and s not in world.fixed:
                raise DepGraphError(f"{where}: source {s} of {l} is not allocated")
    # acyclicity
    state = {}

    def visit(v):
        if state.get(v) == 1:
            raise DepGraphError(f"{where}: dependency graph has a cycle through {v}")
        if state.get(v) == 2:
            return
        state[v] = 1
        for s in funcs.get(v, (frozenset(), None))[0]:
            visit(s)
        state[v] = 2
    for v in funcs:
        visit(v)
    if not funcs:
        return
    labs = world.q.labels
    nz = np.argwhere(np.abs(world.q.tensor) > qs.TOL) if labs else np.zeros((1, 0), int)
    for idx in nz:
        assign = dict(world.fixed)
        assign.update({lab: int(b) for lab, b in zip(labs, idx)})
        for l, (_, fn) in funcs.items():
            if l in assign and assign[l] != fn(assign):
                raise DepGraphError(f"{where}: location {l} is not determined by its sources")


# --------------------------------------------------------------- interpreter

class Interpreter:
    def __init__(self, program: Program, tables=None, gates=None, check=True, depgraph=False,
                 record_trace=True):
        self.program = program
        self.tables = dict(BUILTIN_TABLES)
        if tables:
            self.tables.update(tables)
        self.gates = {k: np.asarray(v, dtype=complex) for k, v in (gates or {}).items()}
        arities = {k: int(round(np.log2(v.shape[0]))) for k, v in self.gates.items()}
        self.checker = Checker(program, self.tables, arities)
        self.checker.fns = {f.name: f for f in program.fns}
        self.check = check
        self.depgraph = depgraph
        self.record_trace = record_trace

    # -- entry
    def run(self, entry="main", inputs=None):
        f = self.program.get(entry)
        world = World(qs.QState.scalar(1.0), {})
        frame = Frame({}, signature_state(f), {}, f)
        for a in f.lfts:
            frame.lmap[a] = world.fresh_lifetime()
        qlocs = []
        for p in f.params:
            locs = []
            for _chain, base in leaves(p.ty):
                (l,) = world.fresh()
                locs.append(l)
                if base == BOOL:
                    world.c[l] = False
                else:
                    qlocs.append(l)
            frame.vars[p.name] = locs
        if qlocs:
            world.q = _input_state(qlocs, inputs)
            world.tainted |= set(qlocs)
        outs = self.eval_block(world, (), frame, f.body, top=True)
        branches = []
        for w, fr, res in outs:
            env = Env({"result": res}, w.q, dict(w.c))
            branches.append(Branch(env, qs.norm2(w.q), w.outcomes, w.trace,
                                   w.dep if self.depgraph else None))
        return branches

    # -- blocks
    def eval_block(self, world, stack, frame, block, top=False):
        """All outcomes ``(world, frame, result locations)`` of a block."""
        self.checker.fn = frame.fn
        states = [(world, frame)]
        for s in block.stmts:
            nxt = []
            for w, fr in states:
                nxt.extend(self.eval_statement(w, stack, fr, s))
            states = nxt
            if top and self.record_trace:
                for w, fr in states:
                    w.trace.append(TraceStep(fmt_stmt(s), {k: list(v) for k, v in fr.vars.items()},
                                             w.q, dict(w.c)))
        out = []
        for w, fr in states:
            if block.result is None:
                res = []
                rest = set(fr.vars)
            else:
                res = fr.vars.get(block.result)
                if res is None:
                    raise SimulationError(f"block result {block.result} is unbound")
                rest = set(fr.vars) - {block.result}
            if rest:
                raise SimulationError(f"variables left at block end: {sorted(rest)}")
            out.append((w, fr, list(res)))
        return out

    def _after(self, world, stack, frame, s):
        if not (self.check or self.depgraph):
            return
        own = ownership(world, stack, frame)
        where = f"{getattr(frame.fn, 'name', '?')}: {fmt_stmt(s)}"
        if self.check and not well_formed_state(world.q, own.frozen, own.linear, own.affine):
            raise WellFormednessError(f"environment not well formed after {where}")
        if self.depgraph:
            _dep_check(world, own, where)

    # -- statements
    def eval_statement(self, world, stack, frame, s):
        """Evaluate ``s``; the returned worlds and frames are fresh copies."""
        world = world.fork()
        frame = frame.copy()
        self.checker.fn = frame.fn
        pre = frame.st
        results = self._stmt(world, stack, frame, s)
        out = []
        for w, fr in results:
            fr.st = self.checker.check_statement(s, pre)
            self._after(w, stack, fr, s)
            out.append((w, fr))
        return out

    def _stmt(self, world, stack, frame, s):
        V = frame.vars
        if isinstance(s, (SNoop, SLftLeq, SCoerce)):
            return [(world, frame)]
        if isinstance(s, SNewLft):
            frame.lmap[s.lft] = world.fresh_lifetime()
            return [(world, frame)]
        if isinstance(s, SEndLft):
            # the mapping stays so that types still naming the ended
            # lifetime resolve to a dead run-time lifetime
            g = frame.lmap[s.lft]
            world.live.discard(g.name)
            return [(world, frame)]
        if isinstance(s, SFreeze):
            V[s.target] = list(V[s.source])
            return [(world, frame)]
        if isinstance(s, SLetPair):
            t = frame.st.ctx[s.source].ty
            c = t if isinstance(t, TPair) else canon(t)
            k = len(leaves(c.left))
            locs = V.pop(s.source)
            V[s.left], V[s.right] = locs[:k], locs[k:]
            return [(world, frame)]
        if isinstance(s, SDrop):
            self._drop(world, frame, s.name)
            return [(world, frame)]
        if isinstance(s, SLet):
            return self._let(world, stack, frame, s)
        raise SimulationError(f"unknown statement {s!r}")

    def _owned(self, world, frame, x):
        ent = frame.st.ctx[x]
        out = []
        for (chain, base), l in zip(leaves(ent.ty), frame.vars[x]):
            if all(k != "&" for k, _ in chain):
                out.append((l, base))
        return out

    def _drop(self, world, frame, x):
        owned = self._owned(world, frame, x)
        ql = [l for l, _ in owned if l not in world.c]
        for l, _ in owned:
            world.c.pop(l, None)
        world.q = qs.drop_sum(world.q, ql)
        for l in ql:
            world.dep.funcs.pop(l, None)
            world.tainted.discard(l)
        del frame.vars[x]

    def _let(self, world, stack, frame, s):
        e = s.expr
        V = frame.vars
        y = s.target
        if isinstance(e, EVar):
            V[y] = V.pop(e.name)
            return [(world, frame)]
        if isinstance(e, EBool):
            (l,) = world.fresh()
            world.c[l] = bool(e.value)
            V[y] = [l]
            return [(world, frame)]
        if isinstance(e, EUnit):
            V[y] = []
            return [(world, frame)]
        if isinstance(e, ETuple):
            V[y] = V.pop(e.left) + V.pop(e.right)
            return [(world, frame)]
        if isinstance(e, ECopy):
            ent = frame.st.ctx[e.name]
            locs = []
            for (chain, _), l in zip(leaves(ent.ty), V[e.name]):
                if l in world.c and all(k != "&" for k, _ in chain):
                    (n,) = world.fresh()
                    world.c[n] = world.c[l]
                    locs.append(n)
                else:
                    locs.append(l)
            V[y] = locs
            return [(world, frame)]
        if isinstance(e, EMeas):
            (l,) = V.pop(e.name)
            (lc,) = world.fresh()
            world.dep.funcs.pop(l, None)
            outs = []
            for bit, sub in qs.measure(world.q, l):
                w = world.fork() if bit == 0 else world
                fr = frame.copy() if bit == 0 else frame
                w.q = sub
                w.c[lc] = bool(bit)
                w.outcomes = w.outcomes + (bit,)
                fr.vars[y] = [lc]
                outs.append((w, fr))
            return outs
        if isinstance(e, EUnitary):
            locs = []
            for a in e.args:
                locs += V.pop(a)
            if e.gate in self.gates:
                U = self.gates[e.gate]
            else:
                U = qs.gate_matrix(e.gate, e.params)
            world.q = qs.apply_unitary(world.q, U, locs)
            V[y] = locs
            return [(world, frame)]
        if isinstance(e, ELifted):
            table = self.tables[e.table]
            ins = []
            for a in e.args:
                ins += V.pop(a)
            fresh = world.fresh(table.m - table.n)
            world.q = qs.apply_lifted(world.q, table, ins, fresh)
            outs = ins + fresh
            if any(l in world.tainted for l in ins):
                world.tainted |= set(outs)
            elif self.depgraph:
                self._lifted_deps(world, table, ins, outs)
            V[y] = outs
            return [(world, frame)]
        if isinstance(e, ECall):
            return self._call(world, stack, frame, s)
        if isinstance(e, EIf):
            return self._if(world, stack, frame, s)
        if isinstance(e, EQif):
            return self._qif(world, stack, frame, s)
        raise SimulationError(f"unknown expression {e!r}")

    def _lifted_deps(self, world, table, ins, outs):
        funcs = world.dep.funcs
        if not all(l in funcs for l in ins):
            for l in ins:
                funcs.pop(l, None)
            return
        parts = [funcs[l] for l in ins]
        src = frozenset().union(*[p[0] for p in parts]) if parts else frozenset()
        fns = [p[1] for p in parts]
        m = table.m

        def make(j):
            def fn(a):
                x = 0
                for g in fns:
                    x = (x << 1) | g(a)
                return (table.image(x) >> (m - 1 - j)) & 1
            return fn
        for l in ins:
            del funcs[l]
        for j, l in enumerate(outs):
            funcs[l] = (src, make(j))

    # -- calls and branches
    def _call(self, world, stack, frame, s):
        e = s.expr
        f = self.checker.fns[e.func]
        sigma = self.checker.call_sigma(f, e, frame.st)
        child = Frame({}, signature_state(f), {}, f)
        for a in f.lfts:
            child.lmap[a] = _glob(frame, sigma[LVar(a)])
        for p, x in zip(f.params, e.args):
            child.vars[p.name] = list(frame.vars[x])
        outer = stack + (frame.view_without(set(e.args)),)
        outs = []
        for w, fr_end, res in self.eval_block(world, outer, child, f.body):
            self.checker.fn = frame.fn
            fr = frame.copy()
            for x in e.args:
                del fr.vars[x]
            fr.vars[s.target] = res
            outs.append((w, fr))
        return outs

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

    def _if(self, world, stack, frame, s):
        e = s.expr
        (l,) = frame.vars[e.cond]
        gamma = self._gamma(e)
        blk = e.then if world.c[l] else e.other
        child = self._subframe(frame, gamma)
        outer = stack + (frame.view_without(set(gamma)),)
        outs = []
        for w, _fr, res in self.eval_block(world, outer, child, blk):
            self.checker.fn = frame.fn
            fr = frame.copy()
            for x in gamma:
                del fr.vars[x]
            fr.vars[s.target] = res
            outs.append((w, fr))
        return outs

    def _qif(self, world, stack, frame, s):
        e = s.expr
        (lx,) = frame.vars[e.cond]
        gamma = self._gamma(e)
        outer = stack + (frame.view_without(set(gamma)),)
        start = world.counter
        ends = {}
        branches = ((1, e.then), (0, e.other))
        if lx in world.fixed:
            # nested quantum if on the same control: only one branch is live
            branches = tuple(b for b in branches if b[0] == world.fixed[lx])
        for i, blk in branches:
            w = world.fork()
            w.counter = start
            if lx in w.q.labels:
                w.q = qs.project(w.q, lx, i)
            elif w.fixed.get(lx, i) != i:
                raise SimulationError("control fixed to the other value")
            w.fixed[lx] = i
            child = self._subframe(frame, gamma)
            res = self.eval_block(w, outer, child, blk)
            if len(res) != 1:
                raise SimulationError("measurement under quantum control")
            ends[i] = res[0]
        self.checker.fn = frame.fn
        if len(ends) == 1:
            return self._qif_single(world, frame, gamma, s, ends)
        (w1, f1, r1), (w0, f0, r0) = ends[1], ends[0]
        if len(r0) != len(r1):
            raise SimulationError("branch results have different layouts")
        if w0.c != w1.c:
            raise SimulationError("classical stores differ between quantum branches")
        if not set(w0.c) <= set(world.c):
            raise SimulationError("quantum branch left new classical data")
        if w0.live != world.live or w1.live != world.live:
            raise SimulationError("quantum branch changed the set of live lifetimes")
        world.counter = max(w0.counter, w1.counter)
        L = world.fresh(len(r0))
        qres = [k for k, l in enumerate(r0) if l not in world.c]
        ren0 = {r0[k]: L[k] for k in qres}
        ren1 = {r1[k]: L[k] for k in qres}
        psi0 = w0.q.relabel(ren0)
        psi1 = w1.q.relabel(ren1)
        if set(psi0.labels) != set(psi1.labels):
            raise SimulationError(
                f"quantum branches end on different locations {psi0.labels} / {psi1.labels}")
        psi1 = psi1.reorder(psi0.labels)
        t = np.stack([psi0.tensor, psi1.tensor], axis=0)
        combined = qs.QState((lx,) + psi0.labels, t)
        pre = [l for l in world.q.labels if l in combined.labels]
        rest = [l for l in combined.labels if l not in pre]
        world.q = combined.reorder(tuple(pre + rest))
        world.tainted = (w0.tainted - set(r0)) | {L[k] for k in qres
                                                  if r0[k] in w0.tainted or r1[k] in w1.tainted}
        self._qif_deps(world, w0, w1, r0, r1, L, qres, lx)
        fr = frame.copy()
        for x in gamma:
            del fr.vars[x]
        fr.vars[s.target] = L
        return [(world, fr)]

    def _qif_single(self, world, frame, gamma, s, ends):
        ((i, (w, _f, r)),) = ends.items()
        counter = w.counter
        L = list(range(counter, counter + len(r)))
        ren = {l: L[k] for k, l in enumerate(r) if l not in w.c}
        w.counter = counter + len(r)
        w.q = w.q.relabel(ren)
        w.fixed = dict(world.fixed)
        w.tainted = {ren.get(l, l) for l in w.tainted}
        w.dep.funcs = {ren.get(l, l): v for l, v in w.dep.funcs.items()}
        fr = frame.copy()
        for x in gamma:
            del fr.vars[x]
        fr.vars[s.target] = L
        return [(w, fr)]

    def _qif_deps(self, world, w0, w1, r0, r1, L, qres, lx):
        if not self.depgraph:
            return
        F0, F1 = w0.dep.funcs, w1.dep.funcs
        base = {l: v for l, v in F0.items() if l not in r0}
        other = {l: v for l, v in F1.items() if l not in r1}
        if set(base) != set(other):
            raise DepGraphError("quantum branches disagree on affine locations outside the result")
        funcs = dict(base)
        fixed_val = world.fixed.get(lx)
        for k in qres:
            a, b = F0.get(r0[k]), F1.get(r1[k])
            if a is None or b is None:
                continue
            src = frozenset({lx}) | a[0] | b[0]
            funcs[L[k]] = (src, _select(lx, b[1], a[1]))
        world.dep.funcs = funcs


def _select(lx, then_fn, else_fn):
    def fn(a):
        return then_fn(a) if a[lx] else else_fn(a)
    return fn


def _input_state(qlocs, inputs):
    n = len(qlocs)
    if inputs is None:
        return qs.QState.basis(qlocs, [0] * n)
    if isinstance(inputs, qs.QState):
        return inputs.relabel(dict(zip(inputs.labels, qlocs)))
    arr = list(inputs)
    if len(arr) == n and all(b in (0, 1) for b in arr) and n != 2 ** n:
        return qs.QState.basis(qlocs, arr)
    return qs.QState.from_vector(qlocs, arr)


# ----------------------------------------------------------------- front ends

def eval_program(p: Program, entry: str = "main", inputs=None, tables=None, gates=None,
                 check=True):
    """Every measurement branch of running ``entry``."""
    return Interpreter(p, tables, gates, check=check).run(entry, inputs)


def eval_with_depgraph(p: Program, entry: str = "main", inputs=None, tables=None, gates=None):
    """Like :func:`eval_program` but also maintains and checks the
    dependency graph after every statement."""
    return Interpreter(p, tables, gates, check=True, depgraph=True).run(entry, inputs)


def eval_statement(env: Env, s, st: TyState, program: Optional[Program] = None, fn=None,
                   tables=None, gates=None):
    """Evaluate one statement in a single-scope environment.

    Lifetime variables of ``st`` are treated as live run-wide lifetimes.
    """
    program = program or Program(())
    it = Interpreter(program, tables, gates, check=False)
    world = World(env.q, dict(env.c))
    world.counter = 1 + max([l for v in env.loc.values() for l in v] + list(env.q.labels)
                            + list(env.c) + [-1])
    frame = Frame({k: list(v) for k, v in env.loc.items()}, st.copy(), {}, fn)
    for a in st.A.vars:
        frame.lmap[a] = LVar(a)
        world.live.add(a)
    out = []
    for w, fr in it.eval_statement(world, (), frame, s):
        out.append(Env(fr.vars, w.q, w.c))
    return out


def outcome_bits(branch: Branch):
    """Classical values of the result of a branch, in layout order."""
    return tuple(int(branch.env.c[l]) for l in branch.env.loc["result"] if l in branch.env.c)
