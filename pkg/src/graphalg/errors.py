"""Exception hierarchy shared by all compiler stages and the runtime.

Every diagnostic that originates from source text carries a position so
tools can point at the offending construct.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """A position in the source text (1-based line and column)."""

    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class GraphAlgError(Exception):
    """Base class for all errors raised by this package."""

    stage = "graphalg"

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.stage} error at {self.span}: {self.message}"
        return f"{self.stage} error: {self.message}"


class LexError(GraphAlgError):
    stage = "lex"


class ParseError(GraphAlgError):
    stage = "parse"


class TypeCheckError(GraphAlgError):
    stage = "type"


class LoweringError(GraphAlgError):
    stage = "lower"


class CoreValidationError(GraphAlgError):
    """Internal compiler error: a Core invariant was violated."""

    stage = "core-validate"


class CompileError(GraphAlgError):
    """Errors raised while building or optimizing relational plans."""

    stage = "compile"


class DenseLimitError(CompileError):
    """Densifying a matrix would exceed the configured position limit."""

    stage = "dense-limit"


class BindingError(GraphAlgError):
    """The call binding does not match the program signature."""

    stage = "bind"


class EngineError(GraphAlgError):
    stage = "runtime"


class ArithmeticOverflowError(EngineError):
    """Checked 64-bit integer arithmetic overflowed."""

    stage = "runtime"

    def __init__(self, op: str, a, b):
        self.op = op
        self.operands = (a, b)
        super().__init__(f"integer overflow in {op}({a}, {b})")


class GraphLoadError(GraphAlgError):
    stage = "load"
