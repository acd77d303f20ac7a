import json

import pytest

from qurts.cli import main

from conftest import CORPUS

STRAT = CORPUS / "strategies"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_typecheck_ok(capsys):
    code, out, _ = run(capsys, "typecheck", CORPUS / "toy.qrt")
    assert code == 0 and "ok" in out


def test_typecheck_rejects_with_rule(capsys):
    code, _, err = run(capsys, "typecheck", CORPUS / "double_qif.qrt")
    assert code == 1 and "typ drop" in err


def test_typecheck_json(capsys):
    code, out, _ = run(capsys, "typecheck", "--json", CORPUS / "bad_forget.qrt")
    d = json.loads(out)
    assert code == 1 and not d["ok"]
    assert d["diagnostics"][0]["rule"] == "typ fn call"


def test_parse_error_exit(capsys, tmp_path):
    f = tmp_path / "bad.qrt"
    f.write_text("fn main( {")
    code, _, err = run(capsys, "typecheck", f)
    assert code == 1 and err


def test_missing_file_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "typecheck", tmp_path / "nope.qrt")
    assert code == 2 and "cannot read" in err


def test_unknown_command(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_run_all_branches(capsys):
    code, out, _ = run(capsys, "run", "--all-branches", "--json", CORPUS / "toy.qrt")
    d = json.loads(out)
    assert code == 0
    assert [b["probability"] for b in d["branches"]] == pytest.approx([0.5, 0.5])
    assert d["total_probability"] == pytest.approx(1.0)


def test_run_shots_needs_seed(capsys):
    assert run(capsys, "run", "--shots", "10", CORPUS / "toy.qrt")[0] == 2
    assert run(capsys, "run", "--seed", "1", CORPUS / "toy.qrt")[0] == 2


def test_run_shots_reproducible(capsys):
    args = ("run", "--shots", "200", "--seed", "4", "--json", CORPUS / "toy.qrt")
    a = json.loads(run(capsys, *args)[1])
    b = json.loads(run(capsys, *args)[1])
    assert a == b and sum(a["counts"].values()) == 200 and set(a["counts"]) == {"0", "1"}


def test_run_with_inputs(capsys):
    code, out, _ = run(capsys, "run", "--json", "--inputs", "11", CORPUS / "toffoli.qrt")
    b, = json.loads(out)["branches"]
    amps = b["state"]["amplitudes"]
    assert code == 0 and amps[0b111] == pytest.approx([1.0, 0.0])


def test_bad_inputs(capsys):
    assert run(capsys, "run", "--inputs", "2", CORPUS / "toffoli.qrt")[0] == 2


def test_qubit_limit(capsys, monkeypatch):
    # the flag writes the environment; pre-set it so teardown restores it
    monkeypatch.setenv("QURTS_MAX_QUBITS", "64")
    code, _, err = run(capsys, "run", "--max-qubits", "1", CORPUS / "bell.qrt")
    assert code == 1 and "QubitLimit" in err


def test_compile_json(capsys):
    code, out, _ = run(capsys, "compile", CORPUS / "toffoli.qrt")
    d = json.loads(out)
    assert code == 0 and d["inputs"] == [0, 1] and d["events"]


def test_compile_multi_branch_and_graph(capsys):
    code, out, _ = run(capsys, "compile", "--dump-graph", CORPUS / "toy.qrt")
    d = json.loads(out)
    assert code == 0 and len(d["branches"]) == 2
    assert "graph" in d["branches"][0]["circuit"]


def test_compile_text(capsys):
    code, out, _ = run(capsys, "compile", "--emit", "text", CORPUS / "toffoli.qrt")
    assert code == 0 and out.startswith("init")


def test_compile_rejects_ill_typed(capsys):
    assert run(capsys, "compile", CORPUS / "double_qif.qrt")[0] == 1


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--json", "--interleavings", "5", CORPUS / "and.qrt")
    d = json.loads(out)
    assert code == 0 and d["ok"] and d["interleavings"]["runs"] == 5


def test_table_option(capsys, tmp_path):
    t = tmp_path / "dup.json"
    t.write_text(json.dumps({"n": 1, "m": 2, "map": ["00", "11"]}))
    prog = tmp_path / "dup.qrt"
    prog.write_text("fn main() -> (#'0 qbit, #'0 qbit) {\n"
                    "    let x = ket1;\n    x as #'0 qbit;\n    let p = [dup](x);\n    p\n}\n")
    code, out, err = run(capsys, "run", "--json", "--table", f"dup={t}", prog)
    assert code == 0, err
    b, = json.loads(out)["branches"]
    assert b["state"]["amplitudes"][3] == pytest.approx([1.0, 0.0])
    assert run(capsys, "run", "--table", "dup", prog)[0] == 2


@pytest.mark.parametrize("name,code", [("naive", 0), ("optimized", 0), ("illegal", 1)])
def test_pebble_check(capsys, name, code):
    got, out, _ = run(capsys, "pebble-check", "--json", STRAT / f"{name}.json")
    d = json.loads(out)
    assert got == code and d["valid"] == (code == 0)


def test_pebble_check_malformed(capsys, tmp_path):
    f = tmp_path / "s.json"
    f.write_text("{")
    assert run(capsys, "pebble-check", f)[0] == 2


# -- JSON output against the shipped schemas

SCHEMAS = CORPUS.parent / "docs" / "schemas"


def conforms(kind, text):
    import jsonschema
    schema = json.loads((SCHEMAS / f"{kind}.json").read_text())
    jsonschema.validate(json.loads(text), schema)


@pytest.mark.parametrize("kind,argv", [
    ("typecheck", ["typecheck", "--json", CORPUS / "toy.qrt"]),
    ("typecheck", ["typecheck", "--json", CORPUS / "double_qif.qrt"]),
    ("run", ["run", "--json", CORPUS / "ghz.qrt"]),
    ("run", ["run", "--json", "--shots", "20", "--seed", "1", CORPUS / "ghz.qrt"]),
    ("compile", ["compile", CORPUS / "toffoli.qrt"]),
    ("compile", ["compile", "--dump-graph", CORPUS / "toy.qrt"]),
    ("compile", ["compile", CORPUS / "nested_phase.qrt"]),
    ("verify", ["verify", "--json", "--interleavings", "3", CORPUS / "and.qrt"]),
    ("pebble-check", ["pebble-check", "--json", STRAT / "naive.json"]),
    ("pebble-check", ["pebble-check", "--json", STRAT / "illegal.json"]),
])
def test_json_matches_schema(capsys, kind, argv):
    _, out, _ = run(capsys, *argv)
    conforms(kind, out)


# -- user gates and instrumented runs

SQRT_X = [[[0.5, 0.5], [0.5, -0.5]], [[0.5, -0.5], [0.5, 0.5]]]
TWICE = """fn main() -> #'static bool {
    let x = ket0;
    x as #'0 qbit;
    let a = V(x);
    let b = V(a);
    meas b
}
"""


def test_user_gate(capsys, tmp_path):
    g = tmp_path / "v.json"
    g.write_text(json.dumps(SQRT_X))
    prog = tmp_path / "v.qrt"
    prog.write_text(TWICE)
    code, out, _ = run(capsys, "run", "--json", "--gate", f"V={g}", prog)
    b, = json.loads(out)["branches"]
    assert code == 0 and b["result_bits"] == [1] and b["probability"] == pytest.approx(1)
    assert run(capsys, "verify", "--gate", f"V={g}", prog)[0] == 0
    assert run(capsys, "typecheck", prog)[0] == 1


def test_user_gate_must_be_unitary(capsys, tmp_path):
    g = tmp_path / "bad.json"
    g.write_text(json.dumps([[1, 1], [0, 1]]))
    prog = tmp_path / "v.qrt"
    prog.write_text(TWICE)
    code, _, err = run(capsys, "run", "--gate", f"V={g}", prog)
    assert code == 2 and "unitary" in err


def test_run_with_dependency_checks(capsys):
    code, out, _ = run(capsys, "run", "--verify", "--json", CORPUS / "and3.qrt")
    assert code == 0 and json.loads(out)["total_probability"] == pytest.approx(1)
