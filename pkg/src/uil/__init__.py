"""uil: a unified static/dynamic hardware intermediate language.

Parse `.uil` text, validate it, optimize with timing-aware passes,
lower static constructs to the dynamic core, and simulate cycle by cycle.
"""

from .ir import Diagnostic, Program, latency_of, normalize_guards
from .sim import Trace, check_refinement, simulate
from .textio import ParseError, parse, print_program
from .validate import validate

__all__ = [
    "Diagnostic",
    "ParseError",
    "Program",
    "Trace",
    "check_refinement",
    "latency_of",
    "normalize_guards",
    "parse",
    "print_program",
    "simulate",
    "validate",
]
