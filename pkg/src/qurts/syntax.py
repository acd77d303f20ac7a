"""Abstract syntax, parser and pretty-printer for the core language.

The concrete grammar (EBNF, ``?`` optional, ``*`` repetition)::

    program    ::= fndef*
    fndef      ::= "fn" IDENT generics? "(" params? ")" ("->" type)? block
    generics   ::= "<" lftparam ("," lftparam)* ("|" constraint ("," constraint)*)? ">"
    lftparam   ::= LFT ("!=" "'0")?
    constraint ::= LFT "<=" LFT | LFT "!=" "'0"
    params     ::= IDENT ":" type ("," IDENT ":" type)*
    type       ::= "bool" | "qbit" | "(" ")" | "(" type ")" | "(" type ("," type)+ ")"
                 | "&" LFT type | "#" LFT type
    block      ::= "{" (stmt ";")* result? "}"
    result     ::= IDENT | "()" | "return" IDENT | expr
    stmt       ::= "noop" | "newlft" LFT | "endlft" LFT | LFT "<=" LFT
                 | IDENT "as" type | "drop" IDENT
                 | "let" IDENT "=" "&" LFT IDENT
                 | "let" "(" IDENT "," IDENT ")" "=" IDENT
                 | "let" IDENT "=" expr
    expr       ::= IDENT | "true" | "false" | "()" | "(" IDENT "," IDENT ")"
                 | "copy" IDENT | "meas" IDENT | "meas" "(" IDENT ")" | "ket0" | "ket1"
                 | "[" NAME "]" "(" args? ")"
                 | GATE ("(" angle ")")? "(" args? ")"
                 | IDENT ("<" LFT ("," LFT)* ">")? "(" args? ")"
                 | "if" IDENT block "else" block | "qif" IDENT block "else" block

A block whose last item is an expression rather than a variable is sugar
for binding the expression to a fresh ``_rN`` variable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Union


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


class ValidationError(ParseError):
    pass


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}"


NOSPAN = Span()


# ---------------------------------------------------------------- lifetimes

@dataclass(frozen=True)
class LVar:
    name: str

    def __str__(self):
        return "'" + self.name


@dataclass(frozen=True)
class LEmpty:
    def __str__(self):
        return "'0"


@dataclass(frozen=True)
class LStatic:
    def __str__(self):
        return "'static"


Lifetime = Union[LVar, LEmpty, LStatic]
EMPTY = LEmpty()
STATIC = LStatic()


# -------------------------------------------------------------------- types

@dataclass(frozen=True)
class TBool:
    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class TQbit:
    def __str__(self):
        return "qbit"


@dataclass(frozen=True)
class TUnit:
    def __str__(self):
        return "()"


@dataclass(frozen=True)
class TPair:
    left: "Ty"
    right: "Ty"

    def __str__(self):
        items = [self.left]
        r = self.right
        while isinstance(r, TPair):
            items.append(r.left)
            r = r.right
        items.append(r)
        return "(" + ", ".join(str(t) for t in items) + ")"


@dataclass(frozen=True)
class TRef:
    lft: Lifetime
    inner: "Ty"

    def __str__(self):
        return f"&{self.lft} {self.inner}"


@dataclass(frozen=True)
class TOwn:
    lft: Lifetime
    inner: "Ty"

    def __str__(self):
        return f"#{self.lft} {self.inner}"


Ty = Union[TBool, TQbit, TUnit, TPair, TRef, TOwn]
BOOL, QBIT, UNIT = TBool(), TQbit(), TUnit()


def qbits(n: int, lft: Optional[Lifetime] = None) -> Ty:
    """Right-nested tuple of ``n`` qubits, each optionally under ``#lft``."""
    if n == 0:
        return UNIT
    leaf = QBIT if lft is None else TOwn(lft, QBIT)
    t = leaf
    for _ in range(n - 1):
        t = TPair(leaf, t)
    return t


def tuple_ty(items) -> Ty:
    items = list(items)
    if not items:
        return UNIT
    t = items[-1]
    for it in reversed(items[:-1]):
        t = TPair(it, t)
    return t


# -------------------------------------------------------------- expressions

@dataclass(frozen=True)
class EVar:
    name: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EBool:
    value: bool
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EUnit:
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class ETuple:
    left: str
    right: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class ECopy:
    name: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EMeas:
    name: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EUnitary:
    gate: str
    params: tuple  # float parameters, e.g. the angle of phase
    args: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class ELifted:
    table: str
    args: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class ECall:
    func: str
    lfts: tuple
    args: tuple
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EIf:
    cond: str
    then: "Block"
    other: "Block"
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class EQif:
    cond: str
    then: "Block"
    other: "Block"
    span: Span = field(default=NOSPAN, compare=False)


Expr = Union[EVar, EBool, EUnit, ETuple, ECopy, EMeas, EUnitary, ELifted, ECall, EIf, EQif]


# --------------------------------------------------------------- statements

@dataclass(frozen=True)
class SNoop:
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SNewLft:
    lft: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SEndLft:
    lft: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SLftLeq:
    lo: Lifetime
    hi: Lifetime
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SCoerce:
    name: str
    ty: Ty
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SFreeze:
    """``let y = &'a x``"""
    target: str
    lft: str
    source: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SLet:
    target: str
    expr: Expr
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SLetPair:
    left: str
    right: str
    source: str
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class SDrop:
    name: str
    span: Span = field(default=NOSPAN, compare=False)


Stmt = Union[SNoop, SNewLft, SEndLft, SLftLeq, SCoerce, SFreeze, SLet, SLetPair, SDrop]


@dataclass(frozen=True)
class Block:
    """A statement sequence and the variable holding its value.

    ``result`` is ``None`` for a block that evaluates to ``()``.
    """
    stmts: tuple
    result: Optional[str]
    span: Span = field(default=NOSPAN, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    ty: Ty


@dataclass(frozen=True)
class FnDef:
    name: str
    lfts: tuple          # lifetime parameter names
    leq: tuple           # pairs (lo, hi) of Lifetime
    nonempty: tuple      # names constrained `!= '0`
    params: tuple
    ret: Ty
    body: Block
    span: Span = field(default=NOSPAN, compare=False)

    def param(self, name):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class Program:
    fns: tuple

    def get(self, name: str) -> FnDef:
        for f in self.fns:
            if f.name == name:
                return f
        raise KeyError(name)

    def names(self):
        return [f.name for f in self.fns]


# ------------------------------------------------------------------- gates

GATE_NAMES = {"H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "T": 1, "CX": 2, "phase": 0}
PARAM_GATES = {"phase"}


# ------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<lft>'(?:0|[A-Za-z_][A-Za-z0-9_]*)(?![A-Za-z0-9_']))
  | (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*(?![A-Za-z0-9_]))
  | (?P<sym>->|<=|!=|[{}()\[\]<>,;:=&\#|*/+\-])
""", re.VERBOSE | re.DOTALL)

KEYWORDS = {"noop", "newlft", "endlft", "let", "drop", "as", "copy", "meas",
            "if", "else", "qif", "fn", "return", "true", "false", "bool",
            "qbit", "ket0", "ket1"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str):
    pos, line, col = 0, 1, 1
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


# ------------------------------------------------------------------ parser

class _Parser:
    def __init__(self, text: str, gates=None, tables=None):
        self.toks = tokenize(text)
        self.i = 0
        self.gates = dict(GATE_NAMES)
        if gates:
            self.gates.update({g: None for g in gates})
        self.fresh = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.text == text and t.kind in ("sym", "kw")

    def span(self) -> Span:
        return Span(self.tok.line, self.tok.col)

    def fail(self, *expected):
        t = self.tok
        got = t.text or "end of input"
        raise ParseError(f"expected {' or '.join(expected)}, found {got!r}",
                         t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail("identifier")
        t = self.tok.text
        self.i += 1
        return t

    def lifetime(self) -> Lifetime:
        if self.tok.kind != "lft":
            self.fail("lifetime")
        t = self.tok.text
        self.i += 1
        if t == "'0":
            return EMPTY
        if t == "'static":
            return STATIC
        return LVar(t[1:])

    def lft_var(self) -> str:
        sp = self.span()
        lf = self.lifetime()
        if not isinstance(lf, LVar):
            raise ParseError("expected a lifetime variable", sp.line, sp.col)
        return lf.name

    # grammar
    def program(self) -> Program:
        fns = []
        while self.tok.kind != "eof":
            fns.append(self.fndef())
        return Program(tuple(fns))

    def fndef(self) -> FnDef:
        sp = self.span()
        self.expect("fn")
        name = self.ident()
        self.fresh = 0
        lfts, leq, nonempty = [], [], []
        if self.accept("<"):
            while True:
                a = self.lft_var()
                lfts.append(a)
                if self.accept("!="):
                    self._empty_lit()
                    nonempty.append(a)
                if not self.accept(","):
                    break
            if self.accept("|"):
                while True:
                    lo = self.lifetime()
                    if self.accept("!="):
                        self._empty_lit()
                        if not isinstance(lo, LVar):
                            self.fail("lifetime variable")
                        nonempty.append(lo.name)
                    else:
                        self.expect("<=")
                        hi = self.lifetime()
                        leq.append((lo, hi))
                    if not self.accept(","):
                        break
            self.expect(">")
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pn = self.ident()
                self.expect(":")
                params.append(Param(pn, self.type_()))
                if not self.accept(","):
                    break
        self.expect(")")
        ret = UNIT
        if self.accept("->"):
            ret = self.type_()
        body = self.block()
        return FnDef(name, tuple(lfts), tuple(leq), tuple(dict.fromkeys(nonempty)),
                     tuple(params), ret, body, sp)

    def _empty_lit(self):
        lf = self.lifetime()
        if lf != EMPTY:
            self.fail("'0")

    def type_(self) -> Ty:
        t = self.tok
        if self.accept("bool"):
            return BOOL
        if self.accept("qbit"):
            return QBIT
        if self.accept("&"):
            sp = self.span()
            lf = self.lifetime()
            if lf == EMPTY:
                raise ValidationError("references with the empty lifetime '0 are not allowed",
                                      sp.line, sp.col)
            return TRef(lf, self.type_())
        if self.accept("#"):
            lf = self.lifetime()
            return TOwn(lf, self.type_())
        if self.accept("("):
            if self.accept(")"):
                return UNIT
            items = [self.type_()]
            while self.accept(","):
                items.append(self.type_())
            self.expect(")")
            return items[0] if len(items) == 1 else tuple_ty(items)
        self.fail("type")
        return t  # unreachable

    def block(self) -> Block:
        sp = self.span()
        self.expect("{")
        stmts = []
        result = None
        while not self.at("}"):
            # block result forms
            if self.at("return"):
                self.i += 1
                result = self.ident()
                self.accept(";")
                break
            if self.tok.kind == "ident" and self.at("}", 1):
                result = self.ident()
                break
            if self.at("(") and self.at(")", 1) and self.at("}", 2):
                self.i += 2
                break
            if self._starts_stmt():
                stmts.append(self.stmt())
                if not self.at("}"):
                    self.expect(";")
                continue
            # trailing expression: bind to a fresh result variable
            esp = self.span()
            e = self.expr()
            name = self._fresh_name()
            stmts.append(SLet(name, e, esp))
            result = name
            break
        self.expect("}")
        return Block(tuple(stmts), result, sp)

    def _fresh_name(self) -> str:
        name = f"_r{self.fresh}"
        self.fresh += 1
        return name

    def _starts_stmt(self) -> bool:
        t = self.tok
        if t.kind == "kw" and t.text in ("noop", "newlft", "endlft", "let", "drop"):
            return True
        if t.kind == "lft":
            return True
        if t.kind == "ident" and self.at("as", 1):
            return True
        return False

    def stmt(self) -> Stmt:
        sp = self.span()
        t = self.tok
        if self.accept("noop"):
            return SNoop(sp)
        if self.accept("newlft"):
            return SNewLft(self.lft_var(), sp)
        if self.accept("endlft"):
            return SEndLft(self.lft_var(), sp)
        if self.accept("drop"):
            return SDrop(self.ident(), sp)
        if t.kind == "lft":
            lo = self.lifetime()
            self.expect("<=")
            return SLftLeq(lo, self.lifetime(), sp)
        if t.kind == "ident":
            x = self.ident()
            self.expect("as")
            return SCoerce(x, self.type_(), sp)
        self.expect("let")
        if self.accept("("):
            a = self.ident()
            self.expect(",")
            b = self.ident()
            self.expect(")")
            self.expect("=")
            return SLetPair(a, b, self.ident(), sp)
        y = self.ident()
        self.expect("=")
        if self.accept("&"):
            lsp = self.span()
            lf = self.lifetime()
            if lf == EMPTY:
                raise ValidationError("cannot borrow for the empty lifetime '0", lsp.line, lsp.col)
            if not isinstance(lf, LVar):
                raise ParseError("borrow lifetime must be a variable", lsp.line, lsp.col)
            return SFreeze(y, lf.name, self.ident(), sp)
        return SLet(y, self.expr(), sp)

    def args(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                out.append(self.ident())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def expr(self) -> Expr:
        sp = self.span()
        t = self.tok
        if self.accept("true"):
            return EBool(True, sp)
        if self.accept("false"):
            return EBool(False, sp)
        if self.accept("ket0"):
            return ELifted("0", (), sp)
        if self.accept("ket1"):
            return ELifted("1", (), sp)
        if self.accept("copy"):
            return ECopy(self.ident(), sp)
        if self.accept("meas"):
            paren = self.accept("(")
            x = self.ident()
            if paren:
                self.expect(")")
            return EMeas(x, sp)
        if t.text in ("if", "qif") and t.kind == "kw":
            self.i += 1
            c = self.ident()
            b1 = self.block()
            self.expect("else")
            b0 = self.block()
            return (EIf if t.text == "if" else EQif)(c, b1, b0, sp)
        if self.accept("("):
            if self.accept(")"):
                return EUnit(sp)
            a = self.ident()
            self.expect(",")
            b = self.ident()
            self.expect(")")
            return ETuple(a, b, sp)
        if self.accept("["):
            if self.tok.kind in ("ident", "num", "kw"):
                name = self.tok.text
                self.i += 1
            else:
                self.fail("lifted function name")
            self.expect("]")
            return ELifted(name, self.args(), sp)
        if t.kind == "ident":
            name = self.ident()
            if name in self.gates:
                params = ()
                if name in PARAM_GATES:
                    self.expect("(")
                    params = (self.angle(),)
                    self.expect(")")
                return EUnitary(name, params, self.args(), sp)
            lfts = ()
            if self.at("<"):
                self.i += 1
                ls = [self.lifetime()]
                while self.accept(","):
                    ls.append(self.lifetime())
                self.expect(">")
                lfts = tuple(ls)
            if self.at("("):
                return ECall(name, lfts, self.args(), sp)
            if lfts:
                self.fail("'('")
            return EVar(name, sp)
        self.fail("expression")

    # angle ::= term (("*"|"/") term)* with unary minus; terms are numbers or pi
    def angle(self) -> float:
        neg = False
        while self.accept("-"):
            neg = not neg
        val = self._angle_atom()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            rhs = self._angle_atom()
            val = val * rhs if op == "*" else val / rhs
        return -val if neg else val

    def _angle_atom(self) -> float:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return float(t.text)
        if t.kind == "ident" and t.text == "pi":
            self.i += 1
            return math.pi
        self.fail("number or pi")


def parse_program(text: str, gates=None, validate: bool = True) -> Program:
    """Parse source text into a :class:`Program`.

    Raises :class:`ParseError` on malformed input and :class:`ValidationError`
    on references with the empty lifetime or re-declared variables.
    """
    prog = _Parser(text, gates).program()
    if validate:
        validate_program(prog)
    return prog


# -------------------------------------------------------------- validation

def _binders(stmt):
    if isinstance(stmt, SFreeze):
        return [stmt.target]
    if isinstance(stmt, SLet):
        return [stmt.target]
    if isinstance(stmt, SLetPair):
        return [stmt.left, stmt.right]
    return []


def _check_refs(ty, span):
    if isinstance(ty, TRef):
        if ty.lft == EMPTY:
            raise ValidationError("reference with the empty lifetime '0", span.line, span.col)
        _check_refs(ty.inner, span)
    elif isinstance(ty, TOwn):
        _check_refs(ty.inner, span)
    elif isinstance(ty, TPair):
        _check_refs(ty.left, span)
        _check_refs(ty.right, span)


def validate_program(prog: Program) -> None:
    """Reject duplicate declarations, `&'0`, calls to undefined functions."""
    seen_fns = set()
    for f in prog.fns:
        if f.name in seen_fns:
            raise ValidationError(f"function {f.name} defined twice", f.span.line, f.span.col)
        if f.name in GATE_NAMES:
            raise ValidationError(f"function name {f.name} clashes with a gate", f.span.line, f.span.col)
        if len(set(f.lfts)) != len(f.lfts):
            raise ValidationError(f"duplicate lifetime parameter in {f.name}", f.span.line, f.span.col)
        names = set()
        for p in f.params:
            if p.name in names:
                raise ValidationError(f"parameter {p.name} declared twice", f.span.line, f.span.col)
            names.add(p.name)
            _check_refs(p.ty, f.span)
        _check_refs(f.ret, f.span)
        lfts = set(f.lfts)
        _validate_block(f.body, names, lfts, seen_fns, f)
        seen_fns.add(f.name)


def _validate_block(b: Block, scope: set, lfts: set, fns: set, f: FnDef):
    scope = set(scope)
    for s in b.stmts:
        sp = s.span
        if isinstance(s, SNewLft):
            if s.lft in lfts:
                raise ValidationError(f"lifetime '{s.lft} introduced twice", sp.line, sp.col)
            lfts.add(s.lft)
        if isinstance(s, SCoerce):
            _check_refs(s.ty, sp)
        if isinstance(s, SLet):
            _validate_expr(s.expr, scope, lfts, fns, f)
        for name in _binders(s):
            if name in scope:
                raise ValidationError(f"variable {name} is declared more than once", sp.line, sp.col)
            scope.add(name)
        if isinstance(s, SLetPair) and s.left == s.right:
            raise ValidationError("pattern binds the same name twice", sp.line, sp.col)


def _validate_expr(e, scope, lfts, fns, f):
    if isinstance(e, (EIf, EQif)):
        # sibling branches are disjoint scopes, but neither may shadow
        for blk in (e.then, e.other):
            _validate_block(blk, scope, lfts, fns, f)
    elif isinstance(e, ECall):
        if e.func not in fns:
            raise ValidationError(f"call to undefined or later function {e.func}",
                                  e.span.line, e.span.col)


# ------------------------------------------------------------ free variables

def expr_uses(e) -> list:
    """Variables read by an expression (branch blocks included)."""
    if isinstance(e, EVar):
        return [e.name]
    if isinstance(e, (ECopy, EMeas)):
        return [e.name]
    if isinstance(e, ETuple):
        return [e.left, e.right]
    if isinstance(e, (EUnitary, ELifted, ECall)):
        return list(e.args)
    if isinstance(e, (EIf, EQif)):
        return [e.cond] + block_free(e.then) + block_free(e.other)
    return []


def block_free(b: Block) -> list:
    """Free variables of a block in first-use order."""
    bound = set()
    out = []

    def use(x):
        if x not in bound and x not in out:
            out.append(x)

    for s in b.stmts:
        if isinstance(s, SCoerce) or isinstance(s, SDrop):
            use(s.name)
        elif isinstance(s, SFreeze):
            use(s.source)
        elif isinstance(s, SLetPair):
            use(s.source)
        elif isinstance(s, SLet):
            for x in expr_uses(s.expr):
                use(x)
        bound.update(_binders(s))
    if b.result is not None:
        use(b.result)
    return out


# ----------------------------------------------------------- pretty printer

def _fmt_angle(v: float) -> str:
    for num in range(-8, 9):
        for den in (1, 2, 3, 4, 6, 8):
            if num and abs(v - num * math.pi / den) < 1e-12:
                s = "pi" if abs(num) == 1 else f"{abs(num)}*pi"
                s = ("-" if num < 0 else "") + s
                return s if den == 1 else f"{s}/{den}"
    return repr(float(v))


def fmt_expr(e, indent: int = 0) -> str:
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EBool):
        return "true" if e.value else "false"
    if isinstance(e, EUnit):
        return "()"
    if isinstance(e, ETuple):
        return f"({e.left}, {e.right})"
    if isinstance(e, ECopy):
        return f"copy {e.name}"
    if isinstance(e, EMeas):
        return f"meas({e.name})"
    if isinstance(e, EUnitary):
        p = "".join(f"({_fmt_angle(x)})" for x in e.params)
        return f"{e.gate}{p}({', '.join(e.args)})"
    if isinstance(e, ELifted):
        return f"[{e.table}]({', '.join(e.args)})"
    if isinstance(e, ECall):
        lf = f"<{', '.join(str(a) for a in e.lfts)}>" if e.lfts else ""
        return f"{e.func}{lf}({', '.join(e.args)})"
    if isinstance(e, (EIf, EQif)):
        kw = "if" if isinstance(e, EIf) else "qif"
        return (f"{kw} {e.cond} {fmt_block(e.then, indent)} else "
                f"{fmt_block(e.other, indent)}")
    raise TypeError(f"not an expression: {e!r}")


def fmt_stmt(s, indent: int = 0) -> str:
    if isinstance(s, SNoop):
        return "noop"
    if isinstance(s, SNewLft):
        return f"newlft '{s.lft}"
    if isinstance(s, SEndLft):
        return f"endlft '{s.lft}"
    if isinstance(s, SLftLeq):
        return f"{s.lo} <= {s.hi}"
    if isinstance(s, SCoerce):
        return f"{s.name} as {s.ty}"
    if isinstance(s, SFreeze):
        return f"let {s.target} = &'{s.lft} {s.source}"
    if isinstance(s, SLet):
        return f"let {s.target} = {fmt_expr(s.expr, indent)}"
    if isinstance(s, SLetPair):
        return f"let ({s.left}, {s.right}) = {s.source}"
    if isinstance(s, SDrop):
        return f"drop {s.name}"
    raise TypeError(f"not a statement: {s!r}")


def fmt_block(b: Block, indent: int = 0) -> str:
    result = b.result if b.result is not None else "()"
    if not b.stmts:
        return "{ " + result + " }"
    simple = all(not (isinstance(s, SLet) and isinstance(s.expr, (EIf, EQif)))
                 for s in b.stmts)
    if simple and len(b.stmts) <= 1 and indent > 0:
        return "{ " + fmt_stmt(b.stmts[0]) + "; " + result + " }"
    pad = "    " * (indent + 1)
    lines = ["{"]
    for s in b.stmts:
        lines.append(pad + fmt_stmt(s, indent + 1) + ";")
    lines.append(pad + result)
    lines.append("    " * indent + "}")
    return "\n".join(lines)


def fmt_fn(f: FnDef) -> str:
    gen = ""
    if f.lfts:
        parts = [f"'{a}" for a in f.lfts]
        cons = [f"{lo} <= {hi}" for lo, hi in f.leq] + [f"'{a} != '0" for a in f.nonempty]
        gen = "<" + ", ".join(parts) + (" | " + ", ".join(cons) if cons else "") + ">"
    params = ", ".join(f"{p.name}: {p.ty}" for p in f.params)
    body = fmt_block(f.body, 0)
    if len(f.body.stmts) == 1 and "\n" not in fmt_stmt(f.body.stmts[0]):
        body = "{ " + fmt_stmt(f.body.stmts[0]) + "; " + (f.body.result or "()") + " }"
    return f"fn {f.name}{gen}({params}) -> {f.ret} {body}"


def pretty_print(p: Program) -> str:
    """Canonical text; ``parse_program(pretty_print(p)) == p``."""
    return "\n\n".join(fmt_fn(f) for f in p.fns) + ("\n" if p.fns else "")
