"""A small quantum language with lifetimes, quantum ifs and automatic uncomputation."""

from .syntax import parse_program, pretty_print
from .typecheck import check_program

__all__ = ["parse_program", "pretty_print", "check_program"]
