"""Type checker: lifetimes, subtyping, capabilities and typing rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .syntax import (
    BOOL, EMPTY, QBIT, STATIC, UNIT, Block, EBool, ECall, ECopy, EIf, ELifted, EMeas,
    EQif, ETuple, EUnit, EUnitary, EVar, FnDef, LEmpty, LStatic, LVar, NOSPAN, Program,
    SCoerce, SDrop, SEndLft, SFreeze, SLet, SLetPair, SLftLeq, SNewLft, SNoop, Span,
    TBool, TOwn, TPair, TQbit, TRef, TUnit, block_free, qbits,
)


class TypeDiagnostic(Exception):
    """A rejected judgement, tagged with the name of the rule that failed."""

    def __init__(self, rule: str, message: str, span: Span = NOSPAN, code: str = "E-TYPE",
                 function: Optional[str] = None):
        self.rule = rule
        self.message = message
        self.span = span
        self.code = code
        self.function = function
        super().__init__(f"[{rule}] {message}")

    def to_json(self):
        return {"code": self.code, "rule": self.rule, "message": self.message,
                "line": self.span.line, "col": self.span.col, "function": self.function}

    def __str__(self):
        where = f"{self.span} " if self.span.line else ""
        fn = f"in fn {self.function}: " if self.function else ""
        return f"{where}{fn}[{self.rule}] {self.message}"


# ------------------------------------------------------------ lifetimes

class LftPreorder:
    """Lifetime variables with a preorder, liveness and the external set.

    ``vars`` holds every lifetime variable currently in scope.  A variable
    is *live* (strictly above the empty lifetime) if it is declared
    non-empty or lies above a non-empty one.  Function parameters that are
    neither constrained ``!= '0`` nor used under a reference may be
    instantiated with ``'0`` and so are not known to be live.
    """

    def __init__(self, vars=(), nonempty=(), leq=(), external=()):
        self.vars = set(vars)
        self.nonempty = set(nonempty)
        self.external = set(external)
        self._edges = set()
        for lo, hi in leq:
            self._edges.add((lo, hi))
        self._close()

    def copy(self) -> "LftPreorder":
        c = LftPreorder.__new__(LftPreorder)
        c.vars = set(self.vars)
        c.nonempty = set(self.nonempty)
        c.external = set(self.external)
        c._edges = set(self._edges)
        c._closure = set(self._closure)
        return c

    def _close(self):
        nodes = {LVar(v) for v in self.vars} | {EMPTY, STATIC}
        rel = {(a, a) for a in nodes}
        for a in nodes:
            rel.add((EMPTY, a))
            rel.add((a, STATIC))
        rel |= {e for e in self._edges if e[0] in nodes and e[1] in nodes}
        changed = True
        while changed:
            changed = False
            for (a, b) in list(rel):
                for (c, d) in list(rel):
                    if b == c and (a, d) not in rel:
                        rel.add((a, d))
                        changed = True
        self._closure = rel

    def key(self):
        return (frozenset(self.vars), frozenset(self.nonempty), frozenset(self._closure))

    def __eq__(self, other):
        return isinstance(other, LftPreorder) and self.key() == other.key()

    def leq(self, a, b) -> bool:
        if a == b or a == EMPTY or b == STATIC:
            return True
        return (a, b) in self._closure

    def is_live(self, a) -> bool:
        """``a ∈ A``: in scope and strictly above the empty lifetime."""
        if a == STATIC:
            return True
        if a == EMPTY or not isinstance(a, LVar) or a.name not in self.vars:
            return False
        if a.name in self.nonempty:
            return True
        if (STATIC, a) in self._closure:
            return True
        return any(self.leq(LVar(n), a) for n in self.nonempty)

    def known(self, a) -> bool:
        return a in (EMPTY, STATIC) or (isinstance(a, LVar) and a.name in self.vars)

    def add_var(self, name: str, nonempty: bool = True, below_external: bool = True):
        self.vars.add(name)
        if nonempty:
            self.nonempty.add(name)
        if below_external:
            for b in self.external:
                self._edges.add((LVar(name), LVar(b)))
        self._close()

    def add_leq(self, a, b):
        self._edges.add((a, b))
        self._close()

    def remove(self, name: str):
        self.vars.discard(name)
        self.nonempty.discard(name)
        v = LVar(name)
        self._edges = {e for e in self._edges if v not in e}
        self._close()

    def minimal(self, name: str) -> bool:
        a = LVar(name)
        for n in self.vars:
            b = LVar(n)
            if b != a and self.leq(b, a) and not self.leq(a, b):
                return False
        return True

    def all_lifetimes(self):
        return [LVar(v) for v in sorted(self.vars)] + [EMPTY, STATIC]

    def __repr__(self):
        rel = sorted(f"{a}<={b}" for a, b in self._closure
                     if a != b and a != EMPTY and b != STATIC)
        return f"LftPreorder(vars={sorted(self.vars)}, live={sorted(self.nonempty)}, {rel})"


# ------------------------------------------------------------ type helpers

def leaves(t):
    """Non-unit leaves in layout order as (pointer chain, base type).

    The chain lists ``("&", lft)`` / ``("#", lft)`` from the outside in.
    """
    out = []

    def go(t, chain):
        if isinstance(t, TPair):
            go(t.left, chain)
            go(t.right, chain)
        elif isinstance(t, TRef):
            go(t.inner, chain + (("&", t.lft),))
        elif isinstance(t, TOwn):
            go(t.inner, chain + (("#", t.lft),))
        elif isinstance(t, TUnit):
            pass
        else:
            out.append((chain, t))
    go(t, ())
    return out


def wrap(chain, base):
    for kind, lf in reversed(chain):
        base = TRef(lf, base) if kind == "&" else TOwn(lf, base)
    return base


def _flatten_pair(t):
    if isinstance(t, TPair):
        return _flatten_pair(t.left) + _flatten_pair(t.right)
    return [t]


def _right_nest(items):
    t = items[-1]
    for it in reversed(items[:-1]):
        t = TPair(it, t)
    return t


def _qbit_leaf(t):
    while isinstance(t, (TRef, TOwn)):
        t = t.inner
    return isinstance(t, TQbit)


@lru_cache(maxsize=None)
def canon(t):
    """Normal form modulo the type isomorphisms.

    Pointers are pushed to the leaves, pointers over ``()`` vanish, and
    tuples of qubits sharing a pointer chain are right-nested.
    """
    def go(t, chain):
        if isinstance(t, TPair):
            left, right = go(t.left, chain), go(t.right, chain)
            pair = TPair(left, right)
            items = _flatten_pair(pair)
            if all(_qbit_leaf(i) for i in items) and len(set(items)) == 1:
                return _right_nest(items)
            return pair
        if isinstance(t, TRef):
            return go(t.inner, chain + (("&", t.lft),))
        if isinstance(t, TOwn):
            return go(t.inner, chain + (("#", t.lft),))
        if isinstance(t, TUnit):
            return UNIT
        return wrap(chain, t)
    return go(t, ())


def ty_equal(a, b) -> bool:
    return canon(a) == canon(b)


def ref_lifetimes(t):
    """Lifetimes ``γ`` with ``&γ`` occurring in ``t``."""
    out = set()
    for chain, _ in leaves(t):
        for kind, lf in chain:
            if kind == "&":
                out.add(lf)
    return out


def lifetimes_of(t):
    out = set()
    for chain, _ in leaves(t):
        for _, lf in chain:
            out.add(lf)
    return out


def subst_ty(t, sigma):
    if isinstance(t, TPair):
        return TPair(subst_ty(t.left, sigma), subst_ty(t.right, sigma))
    if isinstance(t, TRef):
        return TRef(sigma.get(t.lft, t.lft), subst_ty(t.inner, sigma))
    if isinstance(t, TOwn):
        return TOwn(sigma.get(t.lft, t.lft), subst_ty(t.inner, sigma))
    return t


def is_qbits(t) -> Optional[int]:
    """Number of qubits if ``t`` is a plain ``qbit^n``."""
    c = canon(t)
    if c == UNIT:
        return 0
    items = _flatten_pair(c)
    if all(i == QBIT for i in items):
        return len(items)
    return None


# --------------------------------------------------------------- subtyping

def _chain_steps(chain, A: LftPreorder):
    lfts = set(A.all_lifetimes()) | {lf for _, lf in chain}
    out = set()
    n = len(chain)
    for i, (kind, a) in enumerate(chain):
        for b in lfts:
            if b != a and A.leq(b, a) and not (kind == "&" and b == EMPTY):
                out.add(chain[:i] + ((kind, b),) + chain[i + 1:])
    for i in range(n - 1):
        (k0, a0), (k1, a1) = chain[i], chain[i + 1]
        if k0 == k1:
            for c in lfts:
                if A.leq(c, a0) and A.leq(c, a1) and not (k0 == "&" and c == EMPTY):
                    out.add(chain[:i] + ((k0, c),) + chain[i + 2:])
        if k0 == "&" and k1 == "#":
            out.add(chain[:i + 1] + chain[i + 2:])
        if k0 == "#" and k1 == "&":
            out.add(chain[:i] + chain[i + 1:])
    return out


def chain_sub(A: LftPreorder, c1, c2) -> bool:
    """Pointer-chain subtyping, decided by search over the rewrite rules."""
    if c1 == c2:
        return True
    seen = {c1}
    todo = [c1]
    while todo:
        c = todo.pop()
        for d in _chain_steps(c, A):
            if d == c2:
                return True
            if d not in seen and len(d) >= len(c2):
                seen.add(d)
                todo.append(d)
    return False


def subtype(A: LftPreorder, t1, t2) -> bool:
    """``t1 ≤ t2`` under the lifetime preorder ``A``."""
    c1, c2 = canon(t1), canon(t2)
    if c1 == c2:
        return True
    return _sub(A, c1, c2)


def _sub(A, c1, c2) -> bool:
    if isinstance(c1, TPair) and isinstance(c2, TPair):
        if _sub(A, c1.left, c2.left) and _sub(A, c1.right, c2.right):
            return True
    if isinstance(c1, TPair) or isinstance(c2, TPair):
        f1, f2 = _flatten_pair(c1), _flatten_pair(c2)
        if (len(f1) == len(f2) and all(_qbit_leaf(x) for x in f1 + f2)):
            return all(_sub(A, x, y) for x, y in zip(f1, f2))
        return False
    if c1 == c2:
        return True
    l1, l2 = leaves(c1), leaves(c2)
    if len(l1) != 1 or len(l2) != 1:
        return c1 == c2
    (ch1, b1), (ch2, b2) = l1[0], l2[0]
    if b1 != b2:
        return False
    return chain_sub(A, ch1, ch2)


# ------------------------------------------------------------ capabilities

def is_copy(t) -> bool:
    if isinstance(t, (TBool, TUnit, TRef)):
        return True
    if isinstance(t, TOwn):
        return is_copy(t.inner)
    if isinstance(t, TPair):
        return is_copy(t.left) and is_copy(t.right)
    return False


def is_drop(A: LftPreorder, t, owned: bool = False) -> bool:
    """Every qubit leaf must sit under owning pointers whose lifetimes are
    all live; references and booleans can always be dropped."""
    if isinstance(t, (TBool, TUnit, TRef)):
        return True
    if isinstance(t, TQbit):
        return owned
    if isinstance(t, TOwn):
        if all(b != QBIT for _, b in leaves(t)):
            return True
        return A.is_live(t.lft) and is_drop(A, t.inner, True)
    if isinstance(t, TPair):
        return is_drop(A, t.left, owned) and is_drop(A, t.right, owned)
    return False


def is_pq_type(t) -> bool:
    if isinstance(t, (TQbit, TUnit)):
        return True
    if isinstance(t, TOwn):
        return is_pq_type(t.inner)
    if isinstance(t, TPair):
        return is_pq_type(t.left) and is_pq_type(t.right)
    return False


def is_pq(subject, program: Optional[Program] = None, _memo=None) -> bool:
    """Purely-quantum judgement for types, expressions, statements,
    blocks and function definitions."""
    memo = {} if _memo is None else _memo
    if isinstance(subject, (TBool, TQbit, TUnit, TPair, TRef, TOwn)):
        return is_pq_type(subject)
    if isinstance(subject, FnDef):
        if subject.name in memo:
            return memo[subject.name]
        memo[subject.name] = False
        ok = is_pq(subject.body, program, memo)
        memo[subject.name] = ok
        return ok
    if isinstance(subject, Block):
        return all(is_pq(s, program, memo) for s in subject.stmts)
    if isinstance(subject, (tuple, list)):
        return all(is_pq(s, program, memo) for s in subject)
    if isinstance(subject, SLet):
        return is_pq(subject.expr, program, memo)
    if isinstance(subject, (SNoop, SNewLft, SEndLft, SLftLeq, SCoerce, SFreeze, SLetPair, SDrop)):
        return True
    if isinstance(subject, EMeas):
        return False
    if isinstance(subject, ECall):
        if program is None:
            return False
        try:
            f = program.get(subject.func)
        except KeyError:
            return False
        return is_pq(f, program, memo)
    if isinstance(subject, (EIf, EQif)):
        return is_pq(subject.then, program, memo) and is_pq(subject.other, program, memo)
    return True


# ------------------------------------------------------------- contexts

@dataclass
class Entry:
    ty: object
    frozen: Optional[str] = None   # lifetime name while frozen


@dataclass
class TyState:
    """A typing context paired with its lifetime preorder."""
    ctx: dict
    A: LftPreorder

    def copy(self) -> "TyState":
        return TyState({k: Entry(v.ty, v.frozen) for k, v in self.ctx.items()}, self.A.copy())

    def active(self, name):
        e = self.ctx.get(name)
        return e is not None and e.frozen is None

    def signature(self):
        return ({k: (canon(v.ty), v.frozen) for k, v in self.ctx.items()}, self.A.key())


def signature_state(f: FnDef) -> TyState:
    """Initial context of a function body, induced by its signature."""
    nonempty = set(f.nonempty)
    for p in f.params:
        for lf in ref_lifetimes(p.ty):
            if isinstance(lf, LVar):
                nonempty.add(lf.name)
    for lf in ref_lifetimes(f.ret):
        if isinstance(lf, LVar):
            nonempty.add(lf.name)
    A = LftPreorder(f.lfts, nonempty & set(f.lfts), f.leq, f.lfts)
    ctx = {p.name: Entry(p.ty) for p in f.params}
    return TyState(ctx, A)


def required_live(f: FnDef):
    """Lifetime parameters that must be live at every call site."""
    out = set(f.nonempty)
    for p in f.params:
        out |= {lf.name for lf in ref_lifetimes(p.ty) if isinstance(lf, LVar)}
    out |= {lf.name for lf in ref_lifetimes(f.ret) if isinstance(lf, LVar)}
    return out


def control_lifetime(A: LftPreorder, t):
    """``α`` when ``t ≤ &α qbit`` with ``α`` the outermost reference, else None."""
    ls = leaves(canon(t))
    if len(ls) != 1 or ls[0][1] != QBIT or not ls[0][0] or ls[0][0][0][0] != "&":
        return None
    chain = ls[0][0]
    a = chain[0][1]
    return a if chain_sub(A, chain, (("&", a),)) else None


def wrap_own(A: LftPreorder, a, t):
    """The result type ``#a T`` of a quantum if, with ``#a #b`` collapsed
    to ``#a`` whenever ``a ≤ b``."""
    if isinstance(t, TPair):
        return TPair(wrap_own(A, a, t.left), wrap_own(A, a, t.right))
    if isinstance(t, TUnit):
        return UNIT
    if isinstance(t, TOwn) and A.leq(a, t.lft):
        return TOwn(a, t.inner)
    return TOwn(a, t)


class Checker:
    """Checks a program function by function.

    Each statement rule maps a :class:`TyState` to a new one and raises
    :class:`TypeDiagnostic` when a premise fails.
    """

    def __init__(self, program: Program, tables=None, gates=None):
        from .synth import BUILTIN_TABLES
        from .qstate import gate_arity
        self.program = program
        self.tables = dict(BUILTIN_TABLES)
        if tables:
            self.tables.update(tables)
        self.gate_arity = gate_arity
        self.user_gates = dict(gates or {})
        self.fns = {}
        self.fn = None
        self._pq_memo = {}

    # -- helpers
    def err(self, rule, msg, span=NOSPAN, code="E-TYPE"):
        raise TypeDiagnostic(rule, msg, span, code, self.fn.name if self.fn else None)

    def take(self, st: TyState, x, rule, span):
        e = st.ctx.get(x)
        if e is None:
            self.err(rule, f"variable {x} is not available", span, "E-UNBOUND")
        if e.frozen is not None:
            self.err(rule, f"variable {x} is frozen by lifetime '{e.frozen}", span, "E-FROZEN")
        del st.ctx[x]
        return e.ty

    def bind(self, st: TyState, x, ty, rule, span):
        if x in st.ctx:
            self.err(rule, f"variable {x} is already bound", span, "E-REBIND")
        st.ctx[x] = Entry(ty)

    # -- programs
    def check_program(self):
        diags = []
        for f in self.program.fns:
            try:
                self.check_fn(f)
            except TypeDiagnostic as d:
                diags.append(d)
            self.fns[f.name] = f
        self.fn = None
        return diags

    def check_fn(self, f: FnDef):
        self.fn = f
        st = signature_state(f)
        for lo, hi in f.leq:
            for lf in (lo, hi):
                if isinstance(lf, LVar) and lf.name not in f.lfts:
                    self.err("typ fn", f"unknown lifetime {lf} in constraint", f.span)
        for a in f.nonempty:
            if a not in f.lfts:
                self.err("typ fn", f"unknown lifetime '{a} in constraint", f.span)
        for p in f.params:
            self._check_wf(st.A, p.ty, f.span)
        self._check_wf(st.A, f.ret, f.span)
        t = self.check_block(f.body, st)
        if not ty_equal(t, f.ret):
            self.err("typ fn", f"body has type {t} but the signature returns {f.ret}", f.body.span)
        return t

    def _check_wf(self, A, ty, span):
        for lf in lifetimes_of(ty):
            if isinstance(lf, LVar) and lf.name not in A.vars:
                self.err("typ fn", f"unknown lifetime {lf}", span)

    def check_block(self, b: Block, st: TyState):
        """Type of block ``b`` started in ``st`` (which is not modified)."""
        st = st.copy()
        before = st.A.copy()
        for s in b.stmts:
            st = self.check_statement(s, st)
        if b.result is None:
            rest = list(st.ctx)
            ty = UNIT
        else:
            e = st.ctx.get(b.result)
            if e is None:
                self.err("typ block", f"result variable {b.result} is not available", b.span,
                         "E-UNBOUND")
            if e.frozen is not None:
                self.err("typ block", f"result variable {b.result} is still frozen", b.span,
                         "E-FROZEN")
            ty = e.ty
            rest = [k for k in st.ctx if k != b.result]
        if rest:
            self.err("typ block", "leftover variables at end of block: " + ", ".join(rest),
                     b.span, "LeftoverVariables")
        if st.A.vars != before.vars:
            extra = sorted(st.A.vars - before.vars)
            self.err("typ block", "lifetimes not ended in block: "
                     + ", ".join("'" + a for a in extra), b.span, "E-LIFETIME")
        return ty

    # -- statements
    def check_statement(self, s, st: TyState) -> TyState:
        st = st.copy()
        sp = s.span
        A = st.A
        if isinstance(s, SNoop):
            return st
        if isinstance(s, SNewLft):
            if s.lft in A.vars:
                self.err("typ new lft", f"lifetime '{s.lft} already exists", sp)
            A.add_var(s.lft)
            return st
        if isinstance(s, SEndLft):
            a = LVar(s.lft)
            if s.lft not in A.vars:
                self.err("typ end lft", f"lifetime '{s.lft} is not alive", sp)
            if s.lft in A.external:
                self.err("typ end lft", f"lifetime '{s.lft} is external to the function", sp)
            if not A.minimal(s.lft):
                self.err("typ end lft", f"lifetime '{s.lft} is not minimal", sp)
            for x, e in st.ctx.items():
                if a in ref_lifetimes(e.ty):
                    self.err("typ end lft", f"reference {x}: {e.ty} still uses '{s.lft}", sp)
            for e in st.ctx.values():
                if e.frozen == s.lft:
                    e.frozen = None
            A.remove(s.lft)
            return st
        if isinstance(s, SLftLeq):
            for lf in (s.lo, s.hi):
                if isinstance(lf, LVar):
                    if lf.name in A.external:
                        self.err("stmt lft ineq", f"lifetime {lf} is external", sp)
                    if lf.name not in A.vars:
                        self.err("stmt lft ineq", f"lifetime {lf} is not alive", sp)
            A.add_leq(s.lo, s.hi)
            return st
        if isinstance(s, SCoerce):
            u = self.take(st, s.name, "stmt coercion", sp)
            self._check_wf(A, s.ty, sp)
            if not subtype(A, u, s.ty):
                self.err("stmt coercion", f"{s.name}: {u} is not a subtype of {s.ty}", sp)
            st.ctx[s.name] = Entry(s.ty)
            return st
        if isinstance(s, SFreeze):
            e = st.ctx.get(s.source)
            if e is None or e.frozen is not None:
                self.err("typ borrow", f"variable {s.source} is not available to borrow", sp)
            if s.lft not in A.vars:
                self.err("typ borrow", f"lifetime '{s.lft} is not alive", sp)
            if s.lft in A.external:
                self.err("typ borrow", f"cannot borrow for external lifetime '{s.lft}", sp)
            a = LVar(s.lft)
            for g in ref_lifetimes(e.ty):
                if not A.leq(a, g):
                    self.err("typ borrow", f"'{s.lft} may outlive inner reference lifetime {g}", sp)
            t = e.ty
            e.frozen = s.lft
            self.bind(st, s.target, TRef(a, t), "typ borrow", sp)
            return st
        if isinstance(s, SLetPair):
            t = self.take(st, s.source, "stmt proj", sp)
            c = t if isinstance(t, TPair) else canon(t)
            if not isinstance(c, TPair):
                self.err("stmt proj", f"{s.source}: {t} is not a pair", sp)
            self.bind(st, s.left, c.left, "stmt proj", sp)
            self.bind(st, s.right, c.right, "stmt proj", sp)
            return st
        if isinstance(s, SDrop):
            t = self.take(st, s.name, "typ drop", sp)
            if not is_drop(A, t):
                self.err("typ drop", f"{s.name}: {t} cannot be dropped here", sp)
            return st
        if isinstance(s, SLet):
            t = self.check_expr(s.expr, st)
            self.bind(st, s.target, t, "stmt expr", sp)
            return st
        raise TypeError(f"unknown statement {s!r}")

    # -- expressions (consume from st in place, return the type)
    def check_expr(self, e, st: TyState):
        sp = e.span
        A = st.A
        if isinstance(e, EVar):
            return self.take(st, e.name, "expr var", sp)
        if isinstance(e, EBool):
            return TOwn(STATIC, BOOL)
        if isinstance(e, EUnit):
            return UNIT
        if isinstance(e, ETuple):
            if e.left == e.right:
                self.err("expr tuple", f"{e.left} used twice", sp)
            t0 = self.take(st, e.left, "expr tuple", sp)
            t1 = self.take(st, e.right, "expr tuple", sp)
            return TPair(t0, t1)
        if isinstance(e, ECopy):
            ent = st.ctx.get(e.name)
            if ent is None or ent.frozen is not None:
                self.err("expr copy", f"variable {e.name} is not available", sp)
            if not is_copy(ent.ty):
                self.err("expr copy", f"{e.name}: {ent.ty} is not copyable", sp)
            return ent.ty
        if isinstance(e, EMeas):
            t = self.take(st, e.name, "typ meas", sp)
            if canon(t) != TOwn(EMPTY, QBIT):
                self.err("typ meas", f"measured variable {e.name} has type {t}, expected #'0 qbit", sp)
            return TOwn(STATIC, BOOL)
        if isinstance(e, EUnitary):
            n = self._gate_arity(e, sp)
            got = 0
            for x in e.args:
                t = self.take(st, x, "typ unitary", sp)
                k = self._own_qbits(t, EMPTY)
                if k is None:
                    self.err("typ unitary", f"argument {x}: {t} is not #'0 qbit^n", sp)
                got += k
            if got != n:
                self.err("typ unitary", f"gate {e.gate} acts on {n} qubits, given {got}", sp)
            return qbits(n, EMPTY) if n else UNIT
        if isinstance(e, ELifted):
            table = self.tables.get(e.table)
            if table is None:
                self.err("typ lifted", f"unknown lifted function [{e.table}]", sp)
            lft, got = None, 0
            for x in e.args:
                t = self.take(st, x, "typ lifted", sp)
                ls = leaves(canon(t))
                if not ls or any(b != QBIT or len(ch) != 1 or ch[0][0] != "#" for ch, b in ls):
                    self.err("typ lifted", f"argument {x}: {t} is not #'a qbit^n", sp)
                for ch, _ in ls:
                    if lft is None:
                        lft = ch[0][1]
                    elif ch[0][1] != lft:
                        self.err("typ lifted", "arguments of a lifted function must share a lifetime", sp)
                got += len(ls)
            if got != table.n:
                self.err("typ lifted", f"[{e.table}] takes {table.n} qubits, given {got}", sp)
            return qbits(table.m, STATIC if lft is None else lft)
        if isinstance(e, ECall):
            return self._check_call(e, st)
        if isinstance(e, EIf):
            ent = st.ctx.get(e.cond)
            if ent is None or ent.frozen is not None:
                self.err("expr classical if", f"condition {e.cond} is not available", sp)
            ls = leaves(ent.ty)
            if len(ls) != 1 or ls[0][1] != BOOL or any(k == "&" for k, _ in ls[0][0]):
                self.err("expr classical if", f"condition {e.cond}: {ent.ty} is not bool", sp)
            return self._branches(e, st, "expr classical if")
        if isinstance(e, EQif):
            ent = st.ctx.get(e.cond)
            if ent is None or ent.frozen is not None:
                self.err("typ qif", f"control {e.cond} is not available", sp)
            a = control_lifetime(A, ent.ty)
            if a is None:
                self.err("typ qif", f"control {e.cond}: {ent.ty} is not &'a qbit", sp)
            if not A.is_live(a):
                self.err("typ qif", f"control lifetime {a} is not alive", sp)
            t = self._branches(e, st, "typ qif")
            if not is_pq_type(t):
                self.err("typ qif", f"branch type {t} is not purely quantum", sp)
            for blk in (e.then, e.other):
                if not is_pq(blk, self._fnprog(), self._pq_memo):
                    self.err("typ qif", "branch is not purely quantum (measurement under quantum control)", sp)
            return wrap_own(A, a, t)
        raise TypeError(f"unknown expression {e!r}")

    def _fnprog(self):
        return Program(tuple(self.fns.values()))

    def _gate_arity(self, e, sp):
        if e.gate in self.user_gates:
            return self.user_gates[e.gate]
        try:
            return self.gate_arity(e.gate)
        except KeyError:
            self.err("typ unitary", f"unknown gate {e.gate}", sp)

    @staticmethod
    def _own_qbits(t, lft):
        ls = leaves(canon(t))
        if all(b == QBIT and ch == (("#", lft),) for ch, b in ls):
            return len(ls)
        return None

    def _branches(self, e, st: TyState, rule):
        gamma = []
        for blk in (e.then, e.other):
            for x in block_free(blk):
                if x not in gamma:
                    gamma.append(x)
        if e.cond in gamma:
            self.err(rule, f"control {e.cond} may not be used inside the branches (copy it first)", e.span)
        sub = TyState({}, st.A.copy())
        for x in gamma:
            ent = st.ctx.get(x)
            if ent is None:
                self.err(rule, f"variable {x} is not available", e.span, "E-UNBOUND")
            if ent.frozen is not None:
                self.err(rule, f"variable {x} is frozen", e.span, "E-FROZEN")
            sub.ctx[x] = Entry(ent.ty)
        t1 = self.check_block(e.then, sub)
        t0 = self.check_block(e.other, sub)
        if not ty_equal(t1, t0):
            self.err(rule, f"branches have different types {t1} and {t0}", e.span)
        for x in gamma:
            del st.ctx[x]
        return t1

    def call_sigma(self, f: FnDef, e: ECall, st: TyState, arg_types=None):
        """Lifetime instantiation of a call, inferred when omitted."""
        if e.lfts:
            if len(e.lfts) != len(f.lfts):
                self.err("typ fn call", f"{f.name} expects {len(f.lfts)} lifetime arguments", e.span)
            return {LVar(a): b for a, b in zip(f.lfts, e.lfts)}
        sigma = {}
        if arg_types is None:
            arg_types = [st.ctx[x].ty for x in e.args if x in st.ctx]
        for p, t in zip(f.params, arg_types):
            _match(canon(p.ty), canon(t), sigma, set(LVar(a) for a in f.lfts))
        for a in f.lfts:
            if LVar(a) not in sigma:
                self.err("typ fn call", f"cannot infer lifetime '{a} for {f.name}", e.span)
        return sigma

    def _check_call(self, e: ECall, st: TyState):
        sp = e.span
        f = self.fns.get(e.func)
        if f is None:
            self.err("typ fn call", f"function {e.func} is not defined before use", sp)
        if len(e.args) != len(f.params):
            self.err("typ fn call", f"{f.name} expects {len(f.params)} arguments", sp)
        if len(set(e.args)) != len(e.args):
            self.err("typ fn call", "an argument is passed twice", sp)
        for x in e.args:
            if not st.active(x):
                self.err("typ fn call", f"argument {x} is not available", sp)
        sigma = self.call_sigma(f, e, st)
        A = st.A
        for lf in sigma.values():
            if not A.known(lf):
                self.err("typ fn call", f"lifetime {lf} is not alive", sp)
        for lo, hi in f.leq:
            if not A.leq(sigma.get(lo, lo), sigma.get(hi, hi)):
                self.err("typ fn call", f"constraint {lo} <= {hi} does not hold at the call", sp)
        for a in required_live(f):
            if not A.is_live(sigma[LVar(a)]):
                self.err("typ fn call", f"lifetime '{a} must be alive, got {sigma[LVar(a)]}", sp)
        for x, p in zip(e.args, f.params):
            t = self.take(st, x, "typ fn call", sp)
            want = subst_ty(p.ty, sigma)
            if not ty_equal(t, want):
                self.err("typ fn call", f"argument {x} has type {t}, expected {want}", sp)
        return subst_ty(f.ret, sigma)


def _match(pt, at, sigma, params):
    if isinstance(pt, TPair) and isinstance(at, TPair):
        _match(pt.left, at.left, sigma, params)
        _match(pt.right, at.right, sigma, params)
    elif isinstance(pt, (TRef, TOwn)) and type(pt) is type(at):
        if pt.lft in params and pt.lft not in sigma:
            sigma[pt.lft] = at.lft
        _match(pt.inner, at.inner, sigma, params)


def check_program(p: Program, tables=None, gates=None):
    """All diagnostics of ``p`` (empty list when it is well typed)."""
    return Checker(p, tables, gates).check_program()


def check_statement(s, st: TyState, program: Program, fn: FnDef, tables=None, gates=None) -> TyState:
    c = Checker(program, tables, gates)
    c.fn = fn
    c.fns = {g.name: g for g in program.fns}
    return c.check_statement(s, st)


def check_block(b: Block, st: TyState, program: Program, fn: FnDef, tables=None, gates=None):
    c = Checker(program, tables, gates)
    c.fn = fn
    c.fns = {g.name: g for g in program.fns}
    return c.check_block(b, st)


# --------------------------------------------------------------- ownership

def classify_leaf(chain, live) -> str:
    """``affine``, ``linear`` or ``ref`` for one leaf of an owned variable.

    ``live`` decides liveness of an ``Own`` lifetime.
    """
    if any(k == "&" for k, _ in chain):
        return "ref"
    if not chain:
        return "linear"
    return "affine" if all(live(lf) for _, lf in chain) else "linear"
