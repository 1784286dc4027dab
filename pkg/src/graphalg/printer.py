"""Canonical pretty-printer: parse(pretty_print(ast)) == ast."""

from __future__ import annotations

from .ast import (
    Assign,
    BoolLit,
    Builtin,
    Call,
    Cast,
    DimSym,
    Expr,
    FillAssign,
    FloatLit,
    ForLoop,
    FuncDecl,
    IntLit,
    MaskedAssign,
    MatMul,
    PlusAssign,
    Pointwise,
    Program,
    Return,
    ScalarArith,
    Transpose,
    TypeAnnotation,
    Var,
    VectorCtor,
)

# precedence levels, loosest first; parenthesize a child whose level is
# looser than its parent position requires
_SUM, _PW, _PROD, _POSTFIX, _ATOM = 0, 1, 2, 3, 4


def _dim(d) -> str:
    return d.name if isinstance(d, DimSym) else str(d.value)


def _annot(t: TypeAnnotation) -> str:
    if t.kind == "matrix":
        return f"Matrix<{_dim(t.dims[0])}, {_dim(t.dims[1])}, {t.sr}>"
    if t.kind == "vector":
        return f"Vector<{_dim(t.dims[0])}, {t.sr}>"
    return str(t.sr)


def _expr(e: Expr) -> tuple[str, int]:
    if isinstance(e, Var):
        return e.name, _ATOM
    if isinstance(e, IntLit):
        return str(e.value), _ATOM
    if isinstance(e, FloatLit):
        text = repr(e.value)
        if "." not in text and "e" not in text and "inf" not in text:
            text += ".0"
        return text, _ATOM
    if isinstance(e, BoolLit):
        return ("true" if e.value else "false"), _ATOM
    if isinstance(e, MatMul):
        return f"{_at(e.lhs, _PROD)} * {_at(e.rhs, _POSTFIX)}", _PROD
    if isinstance(e, ScalarArith):
        if e.op == "/":
            return f"{_at(e.lhs, _PROD)} / {_at(e.rhs, _POSTFIX)}", _PROD
        return f"{_at(e.lhs, _SUM)} {e.op} {_at(e.rhs, _PW)}", _SUM
    if isinstance(e, Pointwise):
        return f"{_at(e.lhs, _PW)} (.{e.op}) {_at(e.rhs, _PROD)}", _PW
    if isinstance(e, Transpose):
        return f"{_at(e.arg, _POSTFIX)}.T", _POSTFIX
    if isinstance(e, Cast):
        inner, _ = _expr(e.arg)
        return f"cast<{e.target}>({inner})", _ATOM
    if isinstance(e, VectorCtor):
        return f"Vector<{e.sr}>({_dim(e.dim)})", _ATOM
    if isinstance(e, Builtin):
        args = ", ".join(_expr(a)[0] for a in e.args)
        if e.name == "apply":
            args = f"{e.fn_name}, {args}" if args else e.fn_name
        return f"{e.name}({args})", _ATOM
    if isinstance(e, Call):
        args = ", ".join(_expr(a)[0] for a in e.args)
        return f"{e.name}({args})", _ATOM
    raise TypeError(f"cannot print {e!r}")


def _at(e: Expr, need: int) -> str:
    text, level = _expr(e)
    if level < need:
        return f"({text})"
    return text


def _stmt(s, indent: str, out: list[str]):
    if isinstance(s, Assign):
        out.append(f"{indent}{s.target} = {_expr(s.value)[0]};")
    elif isinstance(s, PlusAssign):
        out.append(f"{indent}{s.target} += {_expr(s.value)[0]};")
    elif isinstance(s, MaskedAssign):
        out.append(f"{indent}{s.target}<{s.mask}> = {_expr(s.value)[0]};")
    elif isinstance(s, FillAssign):
        out.append(f"{indent}{s.target}[:] = {_expr(s.value)[0]};")
    elif isinstance(s, ForLoop):
        out.append(f"{indent}for {s.var} in 0..{_dim(s.bound)} {{")
        for inner in s.body:
            _stmt(inner, indent + "    ", out)
        out.append(f"{indent}}}")
    elif isinstance(s, Return):
        out.append(f"{indent}return {_expr(s.value)[0]};")
    else:
        raise TypeError(f"cannot print {s!r}")


def _func(f: FuncDecl, out: list[str]):
    params = ", ".join(f"{p.name}: {_annot(p.annot)}" for p in f.params)
    out.append(f"func {f.name}({params}) -> {_annot(f.ret)} {{")
    for s in f.body:
        _stmt(s, "    ", out)
    out.append("}")


def pretty_print(program: Program) -> str:
    out: list[str] = []
    for i, f in enumerate(program.functions):
        if i:
            out.append("")
        _func(f, out)
    return "\n".join(out) + ("\n" if out else "")
