import pathlib

import pytest

from qurts.syntax import parse_program
from qurts.typecheck import check_program

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
REJECTED = {"double_qif.qrt", "bad_forget.qrt"}
NESTED = ["and.qrt", "and3.qrt", "nested_ccx.qrt", "nested_deep.qrt", "nested_phase.qrt",
          "nested_call.qrt", "grover3.qrt"]


def corpus_files():
    return sorted(p for p in CORPUS.glob("*.qrt"))


def well_typed_files():
    return [p for p in corpus_files() if p.name not in REJECTED]


def load(name):
    path = CORPUS / name if not isinstance(name, pathlib.Path) else name
    return parse_program(path.read_text())


@pytest.fixture
def corpus():
    return CORPUS


def checked(src):
    p = parse_program(src)
    diags = check_program(p)
    assert not diags, [str(d) for d in diags]
    return p


# -- acceptance report: one line per criterion at the end of the session

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, secs, budget, note = ACCEPTANCE[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({secs:.2f} s of {budget} s)"
        terminalreporter.write_line(line + (f" {note}" if note else ""))
