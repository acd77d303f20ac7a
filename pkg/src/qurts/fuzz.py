"""Random generator of well-typed programs for property tests.

Programs keep at most ``max_qubits`` qubits alive at once and apply at most
``max_depth`` operations.  Operations are single-qubit gates, CX, lifted
gates, quantum ifs (possibly nested), temporary qubits that are uncomputed,
and measurements feeding a classical if.
"""

from __future__ import annotations

import random

GATES1 = ("H", "X", "Z", "S", "T")


class _Gen:
    def __init__(self, rng: random.Random, max_qubits: int, max_depth: int):
        self.rng = rng
        self.max_qubits = max_qubits
        self.max_depth = max_depth
        self.lines = []
        self.vars = []       # current variable of each live qubit
        self.k = 0
        self.lft = 0

    def fresh(self, base="v"):
        self.k += 1
        return f"{base}{self.k}"

    def emit(self, line, indent=1):
        self.lines.append("    " * indent + line)

    def new_lft(self):
        self.lft += 1
        return f"'l{self.lft}"

    # -- operations on the qubit pool; each keeps every pool var at #'0 qbit
    def op_gate(self):
        i = self.rng.randrange(len(self.vars))
        y = self.fresh()
        self.emit(f"let {y} = {self.rng.choice(GATES1)}({self.vars[i]});")
        self.vars[i] = y

    def op_cx(self):
        i, j = self.rng.sample(range(len(self.vars)), 2)
        s, a, b = self.fresh("s"), self.fresh(), self.fresh()
        self.emit(f"let {s} = CX({self.vars[i]}, {self.vars[j]});")
        self.emit(f"let ({a}, {b}) = {s};")
        self.vars[i], self.vars[j] = a, b

    def op_lifted(self):
        i, j = self.rng.sample(range(len(self.vars)), 2)
        name = self.rng.choice(("cnot", "swap"))
        s, a, b = self.fresh("s"), self.fresh(), self.fresh()
        self.emit(f"let {s} = [{name}]({self.vars[i]}, {self.vars[j]});")
        self.emit(f"let ({a}, {b}) = {s};")
        self.vars[i], self.vars[j] = a, b

    def _branch_body(self, t, depth_left):
        """A branch mapping qubit ``t`` (#'0) to a #'0 qubit, as block text."""
        choice = self.rng.randrange(4)
        w = self.fresh("w")
        if choice == 0 or depth_left <= 0:
            return f"{{ let {w} = [not]({t}); {w} as #'0 qbit; {w} }}"
        if choice == 1:
            return f"{{ let {w} = {self.rng.choice(GATES1)}({t}); {w} }}"
        if choice == 2:
            return f"{{ {t} }}"
        return f"{{ let {w} = X({t}); let {w}b = {self.rng.choice(GATES1)}({w}); {w}b }}"

    def op_qif(self, nested=False):
        n = len(self.vars)
        need = 3 if nested else 2
        if n < need:
            return self.op_gate()
        idx = self.rng.sample(range(n), need)
        c, t = self.vars[idx[0]], self.vars[idx[-1]]
        a = self.new_lft()
        rc, r = self.fresh("r"), self.fresh()
        self.emit(f"newlft {a};")
        self.emit(f"let {rc} = &{a} {c};")
        if nested:
            d = self.vars[idx[1]]
            rd, u, u2 = self.fresh("r"), self.fresh("u"), self.fresh("u")
            self.emit(f"let {rd} = &{a} {d};")
            inner = (f"let {u} = qif {rd} {self._branch_body(t, 1)} else {self._branch_body(t, 1)}; "
                     f"drop {rd}; {u} as #'0 qbit; {u}")
            other = f"drop {rd}; let {u2} = {self.rng.choice(GATES1)}({t}); {u2}"
            self.emit(f"let {r} = qif {rc} {{ {inner} }} else {{ {other} }};")
        else:
            self.emit(f"let {r} = qif {rc} {self._branch_body(t, 1)} else {self._branch_body(t, 1)};")
        self.emit(f"drop {rc};")
        # coercing after the lifetime ends exercises linearisation
        if self.rng.random() < 0.5:
            self.emit(f"{r} as #'0 qbit;")
            self.emit(f"endlft {a};")
        else:
            self.emit(f"endlft {a};")
            self.emit(f"{r} as #'0 qbit;")
        self.vars[idx[-1]] = r

    def op_temp(self):
        """Compute a temporary from two controls, use it as a phase control,
        and uncompute it."""
        if len(self.vars) < 2 or len(self.vars) >= self.max_qubits:
            return self.op_gate()
        i, j = self.rng.sample(range(len(self.vars)), 2)
        a, b = self.new_lft(), self.new_lft()
        rx, ry, tmp, rt, ph = (self.fresh("r"), self.fresh("r"), self.fresh("t"), self.fresh("r"),
                               self.fresh("p"))
        o1, o0 = self.fresh("o"), self.fresh("o")
        self.emit(f"newlft {a};")
        self.emit(f"let {rx} = &{a} {self.vars[i]};")
        self.emit(f"let {ry} = &{a} {self.vars[j]};")
        self.emit(f"let {tmp} = qif {rx} {{ let {o1} = qif {ry} {{ let {o1}a = ket1; {o1}a as #{a} qbit; {o1}a }} "
                  f"else {{ let {o1}b = ket0; {o1}b as #{a} qbit; {o1}b }}; drop {ry}; {o1} }} "
                  f"else {{ drop {ry}; let {o0} = ket0; {o0} as #{a} qbit; {o0} }};")
        self.emit(f"drop {rx};")
        self.emit(f"newlft {b};")
        self.emit(f"{b} <= {a};")
        self.emit(f"let {rt} = &{b} {tmp};")
        angle = self.rng.choice(("pi", "pi / 2", "pi / 4"))
        self.emit(f"let {ph} = qif {rt} {{ let {ph}a = phase({angle})(); {ph}a }} else {{ noop; () }};")
        self.emit(f"drop {ph};")
        self.emit(f"drop {rt};")
        self.emit(f"endlft {b};")
        self.emit(f"drop {tmp};")
        self.emit(f"endlft {a};")

    def op_measure_if(self):
        if len(self.vars) < 2:
            return self.op_gate()
        i, j = self.rng.sample(range(len(self.vars)), 2)
        m, t = self.fresh("m"), self.fresh()
        self.emit(f"let {m} = meas {self.vars[i]};")
        g = self.rng.choice(GATES1)
        self.emit(f"let {t} = if {m} {{ let {t}a = {g}({self.vars[j]}); {t}a }} else {{ {self.vars[j]} }};")
        self.emit(f"drop {m};")
        q = self.fresh("q")
        self.emit(f"let {q} = ket0;")
        self.emit(f"{q} as #'0 qbit;")
        self.vars[j] = t
        self.vars[i] = q

    def program(self) -> str:
        n = self.rng.randint(2, max(2, self.max_qubits - 1))
        for _ in range(n):
            x = self.fresh("q")
            self.emit(f"let {x} = ket0;")
            self.emit(f"{x} as #'0 qbit;")
            self.vars.append(x)
        ops = [self.op_gate, self.op_gate, self.op_cx, self.op_lifted, self.op_qif,
               lambda: self.op_qif(nested=True), self.op_temp, self.op_measure_if]
        for _ in range(self.rng.randint(1, self.max_depth)):
            self.rng.choice(ops)()
        # measure the first qubit, return the others
        b = self.fresh("b")
        self.emit(f"let {b} = meas {self.vars[0]};")
        rest = self.vars[1:]
        acc, ty = rest[-1], "#'0 qbit"
        for v in reversed(rest[:-1]):
            p = self.fresh("p")
            self.emit(f"let {p} = ({v}, {acc});")
            acc, ty = p, f"(#'0 qbit, {ty})"
        out = self.fresh("out")
        self.emit(f"let {out} = ({b}, {acc});")
        self.emit(out)
        head = f"fn main() -> (#'static bool, {ty}) {{"
        return "\n".join([head] + self.lines + ["}"]) + "\n"


def generate_program(rng: random.Random, max_qubits: int = 6, max_depth: int = 8) -> str:
    """Source text of one random well-typed program."""
    return _Gen(rng, max_qubits, max_depth).program()


def generate_corpus(n: int, seed: int = 0, max_qubits: int = 6, max_depth: int = 8):
    rng = random.Random(seed)
    return [generate_program(rng, max_qubits, max_depth) for _ in range(n)]
