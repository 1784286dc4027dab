"""Untyped surface AST with source positions.

Nodes compare structurally but ignore spans and inferred types, so a
parse/print round trip yields equal trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import Span
from .semiring import SemiringTag

# --- dimensions and type annotations ---------------------------------------


@dataclass(frozen=True)
class DimSym:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class DimLit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


Dim = Union[DimSym, DimLit]


@dataclass(frozen=True)
class MatrixType:
    """Resolved expression type: rows x cols over one semiring.

    Vectors are column matrices (cols = 1); scalars are 1x1.
    """

    rows: Dim
    cols: Dim
    sr: SemiringTag

    @property
    def is_scalar(self) -> bool:
        return self.rows == DimLit(1) and self.cols == DimLit(1)

    @property
    def is_vector(self) -> bool:
        return self.cols == DimLit(1)

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}:{self.sr}"


def scalar_type(sr: SemiringTag) -> MatrixType:
    return MatrixType(DimLit(1), DimLit(1), sr)


@dataclass(frozen=True)
class TypeAnnotation:
    """A written type: Matrix<r,c,sr>, Vector<d,sr>, or a bare semiring."""

    kind: str  # "matrix" | "vector" | "scalar"
    dims: tuple[Dim, ...]
    sr: SemiringTag

    def to_matrix_type(self) -> MatrixType:
        if self.kind == "matrix":
            return MatrixType(self.dims[0], self.dims[1], self.sr)
        if self.kind == "vector":
            return MatrixType(self.dims[0], DimLit(1), self.sr)
        return scalar_type(self.sr)


# --- expressions ------------------------------------------------------------


@dataclass
class Expr:
    span: Span = field(compare=False, repr=False)
    ty: Optional[MatrixType] = field(default=None, compare=False, repr=False, init=False)


@dataclass
class Var(Expr):
    name: str = ""
    # Set by the type checker when the name denotes a dimension symbol used
    # as an integer scalar rather than a matrix variable.
    is_dim_size: bool = field(default=False, compare=False)


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class FloatLit(Expr):
    value: float = 0.0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class MatMul(Expr):
    lhs: Expr = None
    rhs: Expr = None
    # Set when the type checker applies the vector-times-matrix statement
    # sugar, turning `v * G` into `G.T * v`.
    flipped: bool = field(default=False, compare=False)


@dataclass
class Pointwise(Expr):
    op: str = ""  # * / + - ==
    lhs: Expr = None
    rhs: Expr = None


@dataclass
class ScalarArith(Expr):
    op: str = ""  # + - /
    lhs: Expr = None
    rhs: Expr = None


@dataclass
class Transpose(Expr):
    arg: Expr = None


@dataclass
class Builtin(Expr):
    name: str = ""  # apply | reduce | reduceRows | diag | pickAny
    args: tuple = ()
    fn_name: str = ""  # for apply: add | sub | mul | div | eq


@dataclass
class Cast(Expr):
    target: SemiringTag = SemiringTag.BOOL
    arg: Expr = None


@dataclass
class VectorCtor(Expr):
    """Vector<sr>(dim): the zero vector of the given dimension."""

    sr: SemiringTag = SemiringTag.BOOL
    dim: Dim = None


@dataclass
class Call(Expr):
    """Call of a user-declared function."""

    name: str = ""
    args: tuple = ()
    # Filled by the type checker: callee dimension symbol -> caller Dim.
    dim_map: Optional[dict] = field(default=None, compare=False, repr=False)


# --- statements -------------------------------------------------------------


@dataclass
class Stmt:
    span: Span = field(compare=False, repr=False)


@dataclass
class Assign(Stmt):
    target: str = ""
    value: Expr = None


@dataclass
class PlusAssign(Stmt):
    target: str = ""
    value: Expr = None


@dataclass
class MaskedAssign(Stmt):
    target: str = ""
    mask: str = ""
    value: Expr = None


@dataclass
class FillAssign(Stmt):
    target: str = ""
    value: Expr = None


@dataclass
class ForLoop(Stmt):
    var: str = ""
    bound: Dim = None
    body: tuple = ()


@dataclass
class Return(Stmt):
    value: Expr = None


# --- declarations -----------------------------------------------------------


@dataclass
class Param:
    name: str
    annot: TypeAnnotation
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class FuncDecl:
    name: str
    params: tuple
    ret: TypeAnnotation
    body: tuple
    span: Span = field(compare=False, repr=False, default=Span(0, 0))


@dataclass
class Program:
    functions: tuple = ()

    def function(self, name: str) -> FuncDecl:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


BUILTIN_NAMES = frozenset({"apply", "reduce", "reduceRows", "diag", "pickAny"})
APPLY_FN_NAMES = frozenset({"add", "sub", "mul", "div", "eq"})
RESERVED_NAMES = BUILTIN_NAMES | {"cast", "Vector", "Matrix"}
