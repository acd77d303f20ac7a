"""Command-line front end.

Exit codes: 0 success, 1 rejected program or failed check, 2 usage or I/O
error.  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

import numpy as np

from . import qstate as qs
from .pebble import InvalidMove, PremiseViolation, load_strategy, validate_classic_strategy
from .simsem import SimulationError, eval_program, eval_with_depgraph
from .syntax import ParseError, parse_program
from .synth import NormalizationError, TableError, load_table, normalize_qif_locations
from .typecheck import check_program
from .uncsem import compare_with_simulation, run_eager, verify_interleavings

TOL = 1e-9


class UsageError(Exception):
    pass


def _parser():
    ap = argparse.ArgumentParser(prog="qurts", description="Qurts-core toolchain")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("file")
        p.add_argument("--entry", default="main")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--table", action="append", default=[], metavar="NAME=PATH",
                       help="load a lifted-function table from JSON")
        p.add_argument("--gate", action="append", default=[], metavar="NAME=PATH",
                       help="load a unitary from JSON rows of [re, im] entries")
        p.add_argument("--inputs", default=None, help="basis bits for the entry qubits, e.g. 01")
        p.add_argument("--max-qubits", type=int, default=None)

    common(sub.add_parser("typecheck", help="type-check a program"))
    r = sub.add_parser("run", help="run under the simulation semantics")
    common(r)
    r.add_argument("--all-branches", action="store_true")
    r.add_argument("--shots", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--verify", action="store_true",
                   help="check well-formedness and the dependency graph after every statement")
    c = sub.add_parser("compile", help="extract a circuit with eager uncomputation")
    common(c)
    c.add_argument("--strategy", choices=["eager"], default="eager")
    c.add_argument("--emit", choices=["json", "text"], default="json")
    c.add_argument("--dump-graph", action="store_true")
    v = sub.add_parser("verify", help="compare both semantics and scheduler interleavings")
    common(v)
    v.add_argument("--interleavings", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    pc = sub.add_parser("pebble-check", help="validate a classic pebbling strategy")
    pc.add_argument("file")
    pc.add_argument("--json", action="store_true")
    return ap


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _tables(items):
    out = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--table expects NAME=PATH, got {item!r}")
        try:
            out[name] = load_table(_read(path), name)
        except TableError as e:
            raise UsageError(f"table {name}: {e}") from None
    return out


def _gates(items):
    out = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--gate expects NAME=PATH, got {item!r}")
        try:
            rows = json.loads(_read(path))
            m = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in r]
                          for r in rows])
        except (json.JSONDecodeError, TypeError, ValueError) as e:
            raise UsageError(f"gate {name}: malformed matrix: {e}") from None
        d = m.shape[0] if m.ndim == 2 else 0
        if d < 2 or m.shape != (d, d) or d & (d - 1):
            raise UsageError(f"gate {name}: matrix must be square with a power-of-two size")
        if not np.allclose(m.conj().T @ m, np.eye(d), atol=1e-9):
            raise UsageError(f"gate {name}: matrix is not unitary")
        out[name] = m
    return out


def _arities(gates):
    return {k: int(np.log2(v.shape[0])) for k, v in gates.items()}


def _inputs(text):
    if text is None:
        return None
    if not text or any(ch not in "01" for ch in text):
        raise UsageError("--inputs expects a string of 0 and 1")
    return [int(ch) for ch in text]


def _load(args):
    """Parse and type-check; returns (program, tables, gates, diagnostics)."""
    if args.max_qubits is not None:
        os.environ["QURTS_MAX_QUBITS"] = str(args.max_qubits)
    tables = _tables(args.table)
    gates = _gates(args.gate)
    text = _read(args.file)
    prog = parse_program(text, gates)
    diags = check_program(prog, tables, _arities(gates))
    return prog, tables, gates, diags


def _report_diags(args, diags):
    for d in diags:
        print(f"{args.file}:{d}", file=sys.stderr)


def _state_json(q):
    return {"labels": [str(l) for l in q.labels],
            "amplitudes": [[float(z.real), float(z.imag)] for z in q.vector()]}


def _branch_json(b):
    res = b.env.loc["result"]
    bits = [int(b.env.c[l]) for l in res if l in b.env.c]
    qres = [l for l in res if l not in b.env.c]
    state = b.env.q.reorder(tuple(qres) + tuple(l for l in b.env.q.labels if l not in qres))
    return {"outcomes": list(b.outcomes), "probability": b.probability, "result_bits": bits,
            "result_qubits": len(qres), "state": _state_json(state)}


def cmd_typecheck(args):
    _, _, _, diags = _load(args)
    if args.json:
        print(json.dumps({"ok": not diags, "diagnostics": [d.to_json() for d in diags]}))
    _report_diags(args, diags)
    if not diags and not args.json:
        print(f"{args.file}: ok")
    return 1 if diags else 0


def cmd_run(args):
    if (args.shots is None) != (args.seed is None):
        raise UsageError("sampled mode needs both --shots and --seed")
    if args.shots is not None and args.all_branches:
        raise UsageError("--all-branches and --shots are exclusive")
    if args.shots is not None and args.shots < 1:
        raise UsageError("--shots must be positive")
    prog, tables, gates, diags = _load(args)
    if diags:
        _report_diags(args, diags)
        return 1
    run = eval_with_depgraph if args.verify else eval_program
    branches = [b for b in run(prog, args.entry, _inputs(args.inputs), tables, gates)
                if not b.zero]
    if args.shots is None:
        data = {"branches": [_branch_json(b) for b in branches],
                "total_probability": sum(b.probability for b in branches)}
        if args.json:
            print(json.dumps(data))
        else:
            for b in data["branches"]:
                print(f"outcomes={b['outcomes']} p={b['probability']:.6f} bits={b['result_bits']}")
        return 0
    rng = random.Random(args.seed)
    weights = [b.probability for b in branches]
    counts = {}
    for b in rng.choices(branches, weights=weights, k=args.shots):
        key = "".join(map(str, b.outcomes))
        counts[key] = counts.get(key, 0) + 1
    counts = dict(sorted(counts.items()))
    if args.json:
        print(json.dumps({"shots": args.shots, "seed": args.seed, "counts": counts}))
    else:
        for k, n in counts.items():
            print(f"{k or '-'} {n}")
    return 0


def _normalized(prog, tables, gates):
    return normalize_qif_locations(prog, tables, _arities(gates))


def cmd_compile(args):
    prog, tables, gates, diags = _load(args)
    if diags:
        _report_diags(args, diags)
        return 1
    prog = _normalized(prog, tables, gates)
    branches = [b for b in run_eager(prog, args.entry, _inputs(args.inputs), tables, gates)
                if b.probability > qs.TOL]
    if args.emit == "text":
        for b in branches:
            if len(branches) > 1:
                print(f"# outcomes {list(b.outcomes)} p={b.probability:.6f}")
            print(b.circuit.to_text())
            if args.dump_graph:
                print("# graph")
                print(json.dumps(b.system.G.to_json()))
        return 0

    def one(b):
        d = b.circuit.to_json()
        if args.dump_graph:
            d["graph"] = b.system.G.to_json()
        return d

    if len(branches) == 1:
        print(json.dumps(one(branches[0])))
    else:
        print(json.dumps({"branches": [{"outcomes": list(b.outcomes), "probability": b.probability,
                                        "circuit": one(b)} for b in branches]}))
    return 0


def cmd_verify(args):
    if args.interleavings < 0:
        raise UsageError("--interleavings must be non-negative")
    prog, tables, gates, diags = _load(args)
    if diags:
        _report_diags(args, diags)
        return 1
    prog = _normalized(prog, tables, gates)
    inputs = _inputs(args.inputs)
    eq = compare_with_simulation(prog, args.entry, inputs, tables, gates)
    inter = verify_interleavings(prog, args.entry, args.interleavings, inputs, tables, gates,
                                 seed=args.seed)
    worst = max(list(eq.values()) + [inter["max_distance"]], default=0.0)
    ok = worst < TOL
    if args.json:
        print(json.dumps({
            "ok": ok,
            "equivalence": [{"outcomes": list(k), "distance": v} for k, v in eq.items()],
            "interleavings": {"runs": inter["runs"], "distinct_schedules": inter["distinct_schedules"],
                              "max_distance": inter["max_distance"]}}))
    else:
        for k, v in eq.items():
            print(f"branch {list(k)} distance {v:.3e}")
        print(f"interleavings {inter['runs']} distinct {inter['distinct_schedules']} "
              f"max distance {inter['max_distance']:.3e}")
        print("ok" if ok else "MISMATCH")
    return 0 if ok else 1


def cmd_pebble_check(args):
    try:
        dag, moves, goal = load_strategy(_read(args.file))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise UsageError(f"malformed strategy file: {e}") from None
    try:
        rep = validate_classic_strategy(dag, moves, goal)
    except InvalidMove as e:
        if args.json:
            print(json.dumps({"valid": False, "move": e.index, "reason": e.reason}))
        print(f"{args.file}: invalid move {e.index}: {e.reason}", file=sys.stderr)
        return 1
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.json:
        print(json.dumps({"valid": True, "peak": rep.peak, "steps": rep.steps,
                          "final": sorted(map(str, rep.final))}))
    else:
        print(f"valid peak={rep.peak} steps={rep.steps}")
    return 0


COMMANDS = {"typecheck": cmd_typecheck, "run": cmd_run, "compile": cmd_compile,
            "verify": cmd_verify, "pebble-check": cmd_pebble_check}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as e:
        print(f"qurts: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"{args.file}:{e}", file=sys.stderr)
        return 1
    except (SimulationError, PremiseViolation, NormalizationError, qs.QubitLimitError,
            qs.StateError) as e:
        print(f"{args.file}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
