"""Classical injection tables, their reversible decomposition, and the
pass that aligns the result locations of quantum-if branches."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .syntax import (
    Block, EIf, ELifted, EQif, ETuple, FnDef, Program, SLet, SLetPair,
)

MAX_DECOMPOSE_BITS = 8


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class InjectionTable:
    """An injective map ``{0,1}^n → {0,1}^m``; ``mapping[x]`` is the image of
    ``x``, most significant bit first."""
    n: int
    m: int
    mapping: tuple
    name: str = ""

    def __post_init__(self):
        if self.m < self.n:
            raise TableError("an injection needs m >= n")
        if len(self.mapping) != 2 ** self.n:
            raise TableError(f"table needs {2 ** self.n} entries")
        if any(not 0 <= y < 2 ** self.m for y in self.mapping):
            raise TableError("output out of range")
        if len(set(self.mapping)) != len(self.mapping):
            raise TableError("table is not injective")

    def image(self, x: int) -> int:
        return self.mapping[x]

    def compose(self, other: "InjectionTable") -> "InjectionTable":
        """``other ∘ self`` (apply self first)."""
        if other.n != self.m:
            raise TableError("arity mismatch in composition")
        return InjectionTable(self.n, other.m, tuple(other.image(y) for y in self.mapping))

    @staticmethod
    def from_bits(n, m, rows, name=""):
        return InjectionTable(n, m, tuple(int(r, 2) if r else 0 for r in rows), name)

    def to_json(self):
        return {"n": self.n, "m": self.m,
                "map": [format(y, f"0{self.m}b") if self.m else "" for y in self.mapping]}


def load_table(text: str, name: str = "") -> InjectionTable:
    d = json.loads(text)
    try:
        return InjectionTable.from_bits(int(d["n"]), int(d["m"]), d["map"], name)
    except (KeyError, TypeError) as e:
        raise TableError(f"malformed table: {e}") from None


BUILTIN_TABLES = {
    "0": InjectionTable.from_bits(0, 1, ["0"], "0"),
    "1": InjectionTable.from_bits(0, 1, ["1"], "1"),
    "not": InjectionTable.from_bits(1, 1, ["1", "0"], "not"),
    "cnot": InjectionTable.from_bits(2, 2, ["00", "01", "11", "10"], "cnot"),
    "swap": InjectionTable.from_bits(2, 2, ["00", "10", "01", "11"], "swap"),
    "toffoli": InjectionTable.from_bits(
        3, 3, ["000", "001", "010", "011", "100", "101", "111", "110"], "toffoli"),
}


# ------------------------------------------------------------ decomposition

@dataclass(frozen=True)
class Init:
    """Allocate bit ``index`` (counted over the m output positions) in |0⟩."""
    index: int


@dataclass(frozen=True)
class Gate:
    """Flip ``target`` when every ``(bit, polarity)`` control matches."""
    target: int
    controls: tuple


def _bit(v, i, m):
    return (v >> (m - 1 - i)) & 1


def decompose(c: InjectionTable):
    """Init events for the m - n fresh bits, then single-target gates
    realising the injection on the padded input.

    Uses transformation-based synthesis on a bijection extending the
    padded injection.  Bit ``i`` is position ``i`` of the m-bit word,
    most significant first; the fresh bits are positions n..m-1.
    """
    n, m = c.n, c.m
    if m > MAX_DECOMPOSE_BITS:
        raise TableError(f"decomposition limited to {MAX_DECOMPOSE_BITS} bits")
    pad = m - n
    perm = [None] * (2 ** m)
    used = set()
    for x in range(2 ** n):
        perm[x << pad] = c.image(x)
        used.add(c.image(x))
    spare = iter(y for y in range(2 ** m) if y not in used)
    for i in range(2 ** m):
        if perm[i] is None:
            perm[i] = next(spare)
    gates = _tbs(perm, m)
    return [Init(n + k) for k in range(pad)] + gates


def _tbs(perm, m):
    """Transformation-based synthesis: output-side gates turning ``perm``
    into the identity, returned in circuit order."""
    f = list(perm)
    out_gates = []

    def apply_gate(g):
        for i in range(len(f)):
            v = f[i]
            if all(_bit(v, c, m) == 1 for c, _ in g.controls):
                f[i] = v ^ (1 << (m - 1 - g.target))

    for i in range(2 ** m):
        if f[i] == i:
            continue
        v = f[i]
        # bits to set: present in i, absent in v
        for b in range(m):
            if _bit(i, b, m) and not _bit(v, b, m):
                ctrls = tuple((k, True) for k in range(m) if _bit(v, k, m) and k != b)
                g = Gate(b, ctrls)
                apply_gate(g)
                out_gates.append(g)
                v = f[i]
        for b in range(m):
            if _bit(v, b, m) and not _bit(i, b, m):
                ctrls = tuple((k, True) for k in range(m) if _bit(i, k, m) and k != b)
                g = Gate(b, ctrls)
                apply_gate(g)
                out_gates.append(g)
                v = f[i]
        assert f[i] == i
    # gates applied after perm map it to identity, so the circuit is the
    # reverse sequence (each gate is self-inverse)
    return list(reversed(out_gates))


def replay(events, m, x, n):
    """Run a decomposition on input ``x`` (n bits) and return the m-bit word."""
    v = x << (m - n)
    for ev in events:
        if isinstance(ev, Gate):
            if all(_bit(v, c, m) == (1 if p else 0) for c, p in ev.controls):
                v ^= 1 << (m - 1 - ev.target)
    return v


# ---------------------------------------------------- qif location alignment

class NormalizationError(ValueError):
    """Quantum-if branches end on locations that are not a permutation of
    each other."""


class _Unknown(Exception):
    pass


@dataclass
class _Abs:
    """Symbolic locations of a thread: ``env`` maps variables to location
    symbols, fresh locations are ``("f", k)`` for the k-th counter value."""
    env: dict
    counter: int = 0
    free: list = None

    def __post_init__(self):
        if self.free is None:
            self.free = []

    def alloc(self):
        if self.free:
            return self.free.pop(0)
        k = ("f", self.counter)
        self.counter += 1
        return k


class _Normalizer:
    def __init__(self, p: Program, tables, gates=None):
        from .typecheck import Checker
        self.tables = dict(BUILTIN_TABLES, **(tables or {}))
        self.checker = Checker(p, self.tables, gates)
        self.fns = {f.name: f for f in p.fns}
        self.checker.fns = dict(self.fns)
        self.k = 0
        self.used = set()
        self.depth = 0

    def fresh(self, hint):
        while True:
            name = f"_{hint}{self.k}"
            self.k += 1
            if name not in self.used:
                self.used.add(name)
                return name

    def run(self, p: Program) -> Program:
        from .typecheck import signature_state
        out = []
        for f in p.fns:
            self.checker.fn = f
            body = self.block(f.body, signature_state(f))
            g = FnDef(f.name, f.lfts, f.leq, f.nonempty, f.params, f.ret, body, f.span)
            self.fns[f.name] = g
            self.checker.fns[f.name] = g
            out.append(g)
        return Program(tuple(out))

    # rewriting

    def block(self, b: Block, st) -> Block:
        stmts = []
        for s in b.stmts:
            if isinstance(s, SLet) and isinstance(s.expr, (EIf, EQif)):
                e = s.expr
                sub = self.branch_state(e, st)
                then = self.block(e.then, sub)
                other = self.block(e.other, sub)
                if isinstance(e, EQif):
                    other = self.align(then, other, sub)
                s = SLet(s.target, type(e)(e.cond, then, other, e.span), s.span)
            st = self.checker.check_statement(s, st)
            stmts.append(s)
        return Block(tuple(stmts), b.result, b.span)

    @staticmethod
    def branch_state(e, st):
        from .syntax import block_free
        from .typecheck import Entry, TyState
        sub = TyState({}, st.A.copy())
        for blk in (e.then, e.other):
            for x in block_free(blk):
                if x in st.ctx and x not in sub.ctx:
                    sub.ctx[x] = Entry(st.ctx[x].ty)
        return sub

    def align(self, then: Block, other: Block, sub) -> Block:
        from .typecheck import leaves
        try:
            r1 = self.result_locations(then, sub)
            r0 = self.result_locations(other, sub)
        except _Unknown:
            return other
        if r1 == r0:
            return other
        if sorted(r1, key=repr) != sorted(r0, key=repr):
            raise NormalizationError(
                f"quantum-if branches end on different locations: {r1} / {r0}")
        ty = self.checker.check_block(other, sub)
        ls = leaves(ty)
        quantum = [i for i, (_, base) in enumerate(ls) if base.__class__.__name__ == "TQbit"]
        if len(quantum) != len(ls) or len({ch for ch, _ in ls}) != 1:
            raise NormalizationError("only results made of qubits of one type can be swapped")
        out = self.permute(other, r0, r1, ty)
        self.checker.check_block(out, sub)
        return out

    def permute(self, b: Block, have, want, ty) -> Block:
        """Swap values between locations until result position k sits at
        ``want[k]``, then rebuild the result with the shape of ``ty``."""
        from .typecheck import canon
        stmts = list(b.stmts)
        leaf_vars = []

        def split(var, t):
            c = canon(t)
            if c.__class__.__name__ == "TPair":
                l, r = self.fresh("l"), self.fresh("r")
                stmts.append(SLetPair(l, r, var))
                return (split(l, c.left), split(r, c.right))
            leaf_vars.append(var)
            return len(leaf_vars) - 1

        shape = split(b.result, ty)
        at = {loc: (leaf_vars[i], i) for i, loc in enumerate(have)}
        for k, target in enumerate(want):
            src = next(loc for loc, (_, val) in at.items() if val == k)
            if src == target:
                continue
            (va, a), (vb, bb) = at[src], at[target]
            out, na, nb = self.fresh("s"), self.fresh("l"), self.fresh("r")
            stmts.append(SLet(out, ELifted("swap", (va, vb))))
            stmts.append(SLetPair(na, nb, out))
            at[src], at[target] = (na, bb), (nb, a)
        final = [at[w][0] for w in want]

        def build(node):
            if isinstance(node, int):
                return final[node]
            left, right = build(node[0]), build(node[1])
            t = self.fresh("t")
            stmts.append(SLet(t, ETuple(left, right)))
            return t

        res = build(shape)
        return Block(tuple(stmts), res, b.span)

    # abstract allocation

    def result_locations(self, b: Block, st):
        from .typecheck import leaves
        env = {x: [("in", x, i) for i in range(len(leaves(e.ty)))] for x, e in st.ctx.items()}
        a = _Abs(env)
        res = self.abstract_block(b, st, a)
        return [l for l in res if l[0] != "c"]

    def abstract_block(self, b: Block, st, a: _Abs):
        for s in b.stmts:
            self.abstract_stmt(s, st, a)
            st = self.checker.check_statement(s, st)
        if b.result is None:
            return []
        return list(a.env[b.result])

    def abstract_stmt(self, s, st, a: _Abs):
        from .syntax import (
            ECall, ECopy, EIf, EMeas, EQif, EUnitary, EVar, SDrop, SFreeze,
        )
        from .typecheck import canon, leaves
        env = a.env
        if isinstance(s, SFreeze):
            env[s.target] = list(env[s.source])
        elif isinstance(s, SLetPair):
            t = st.ctx[s.source].ty
            c = t if t.__class__.__name__ == "TPair" else canon(t)
            k = len(leaves(c.left))
            locs = env.pop(s.source)
            env[s.left], env[s.right] = locs[:k], locs[k:]
        elif isinstance(s, SDrop):
            for (chain, base), l in zip(leaves(st.ctx[s.name].ty), env.pop(s.name)):
                if l[0] != "c" and all(k != "&" for k, _ in chain):
                    a.free.append(l)
        elif isinstance(s, SLet):
            e = s.expr
            y = s.target
            if isinstance(e, EVar):
                env[y] = env.pop(e.name)
            elif isinstance(e, ETuple):
                env[y] = env.pop(e.left) + env.pop(e.right)
            elif isinstance(e, ECopy):
                env[y] = [("c",) if l[0] == "c" else l for l in env[e.name]]
            elif isinstance(e, EMeas):
                env.pop(e.name)
                env[y] = [("c",)]
            elif isinstance(e, EUnitary):
                locs = []
                for x in e.args:
                    locs += env.pop(x)
                env[y] = locs
            elif isinstance(e, ELifted):
                ins = []
                for x in e.args:
                    ins += env.pop(x)
                table = self.tables[e.table]
                env[y] = ins + [a.alloc() for _ in range(table.m - table.n)]
            elif isinstance(e, ECall):
                env[y] = self.abstract_call(e, st, a)
                for x in e.args:
                    env.pop(x, None)
            elif isinstance(e, (EIf, EQif)):
                gamma = []
                for blk in (e.then, e.other):
                    from .syntax import block_free
                    gamma += [x for x in block_free(blk) if x not in gamma]
                sub = self.branch_state(e, st)
                outs = []
                for blk in (e.then, e.other):
                    child = _Abs({x: list(env[x]) for x in gamma}, a.counter)
                    outs.append((self.abstract_block(blk, sub, child), child.counter))
                (r1, c1), (r0, c0) = outs
                if r1 != r0 or (isinstance(e, EIf) and c1 != c0):
                    raise _Unknown()
                for x in gamma:
                    env.pop(x, None)
                a.counter = max(c1, c0)
                env[y] = r1
            else:
                env[y] = [("c",)] * (1 if e.__class__.__name__ == "EBool" else 0)

    def abstract_call(self, e, st, a: _Abs):
        from .syntax import LVar
        from .typecheck import signature_state
        f = self.fns[e.func]
        self.depth += 1
        if self.depth > 32:
            self.depth -= 1
            raise _Unknown()
        try:
            env = {p.name: list(a.env[x]) for p, x in zip(f.params, e.args)}
            child = _Abs(env, a.counter)
            saved = self.checker.fn
            self.checker.fn = f
            res = self.abstract_block(f.body, signature_state(f), child)
            self.checker.fn = saved
        finally:
            self.depth -= 1
        a.counter = child.counter
        return res


def normalize_qif_locations(p: Program, tables=None, gates=None) -> Program:
    """Insert ``[swap]`` calls so both branches of every quantum if leave
    their result in the same locations, aligning the else branch to the
    then branch.  Locations are those the eager machine would allocate.
    ``gates`` maps user gate names to their arity."""
    return _Normalizer(p, tables, gates).run(p)
