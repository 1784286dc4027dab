"""Recursive-descent parser producing the untyped AST.

Operator precedence, loosest to tightest: scalar + and -, pointwise
`(.op)`, `*` and `/`, then postfix `.T` and calls. Statements end with a
semicolon. The parser also owns the user-function call graph check:
recursion is forbidden so that every program terminates.
"""

from __future__ import annotations

from .ast import (
    APPLY_FN_NAMES,
    Assign,
    BoolLit,
    Builtin,
    Call,
    Cast,
    Dim,
    DimLit,
    DimSym,
    Expr,
    FillAssign,
    FloatLit,
    ForLoop,
    FuncDecl,
    IntLit,
    MaskedAssign,
    MatMul,
    Param,
    PlusAssign,
    Pointwise,
    Program,
    RESERVED_NAMES,
    Return,
    ScalarArith,
    Transpose,
    TypeAnnotation,
    Var,
    VectorCtor,
)
from .errors import ParseError
from .lexer import Tok, Token, tokenize
from .semiring import SemiringTag

_SR_TOKENS = {
    Tok.KW_BOOL: SemiringTag.BOOL,
    Tok.KW_INT: SemiringTag.INT,
    Tok.KW_REAL: SemiringTag.REAL,
    Tok.KW_TROP: SemiringTag.TROP,
}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing --

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def at(self, kind: Tok, offset: int = 0) -> bool:
        return self.peek(offset).kind is kind

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind is not Tok.EOF:
            self.pos += 1
        return tok

    def expect(self, kind: Tok, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind is not kind:
            want = what or f"{kind.value!r}"
            found = tok.text or tok.kind.value
            raise ParseError(f"expected {want}, found {found!r}", tok.span)
        return self.next()

    def fresh_name(self, tok: Token) -> str:
        if tok.text in RESERVED_NAMES:
            raise ParseError(f"{tok.text!r} is a reserved name", tok.span)
        return tok.text

    # -- grammar --

    def program(self) -> Program:
        funcs = []
        while not self.at(Tok.EOF):
            funcs.append(self.func())
        return Program(functions=tuple(funcs))

    def func(self) -> FuncDecl:
        kw = self.expect(Tok.KW_FUNC, "'func'")
        name = self.fresh_name(self.expect(Tok.IDENT, "function name"))
        self.expect(Tok.LPAREN)
        params = []
        if not self.at(Tok.RPAREN):
            while True:
                ptok = self.expect(Tok.IDENT, "parameter name")
                pname = self.fresh_name(ptok)
                self.expect(Tok.COLON)
                annot = self.type_annotation()
                params.append(Param(pname, annot, ptok.span))
                if not self.at(Tok.COMMA):
                    break
                self.next()
        self.expect(Tok.RPAREN)
        self.expect(Tok.ARROW, "'->'")
        ret = self.type_annotation()
        body = self.block()
        return FuncDecl(name, tuple(params), ret, body, kw.span)

    def block(self) -> tuple:
        self.expect(Tok.LBRACE)
        stmts = []
        while not self.at(Tok.RBRACE):
            stmts.append(self.stmt())
        self.expect(Tok.RBRACE)
        return tuple(stmts)

    def type_annotation(self) -> TypeAnnotation:
        tok = self.peek()
        if tok.kind in _SR_TOKENS:
            self.next()
            return TypeAnnotation("scalar", (), _SR_TOKENS[tok.kind])
        if tok.kind is Tok.IDENT and tok.text == "Matrix":
            self.next()
            self.expect(Tok.LT)
            r = self.dim()
            self.expect(Tok.COMMA)
            c = self.dim()
            self.expect(Tok.COMMA)
            sr = self.semiring()
            self.expect(Tok.GT)
            return TypeAnnotation("matrix", (r, c), sr)
        if tok.kind is Tok.IDENT and tok.text == "Vector":
            self.next()
            self.expect(Tok.LT)
            d = self.dim()
            self.expect(Tok.COMMA)
            sr = self.semiring()
            self.expect(Tok.GT)
            return TypeAnnotation("vector", (d,), sr)
        raise ParseError(
            f"expected a type, found {tok.text or tok.kind.value!r}", tok.span
        )

    def semiring(self) -> SemiringTag:
        tok = self.peek()
        if tok.kind in _SR_TOKENS:
            self.next()
            return _SR_TOKENS[tok.kind]
        raise ParseError(
            f"expected a semiring (bool, int, real, trop), found {tok.text!r}",
            tok.span,
        )

    def dim(self) -> Dim:
        tok = self.peek()
        if tok.kind is Tok.IDENT:
            self.next()
            return DimSym(tok.text)
        if tok.kind is Tok.INT_LIT:
            self.next()
            value = int(tok.text)
            if value <= 0:
                raise ParseError("dimension literals must be positive", tok.span)
            return DimLit(value)
        raise ParseError(
            f"expected a dimension symbol or literal, found {tok.text!r}", tok.span
        )

    # -- statements --

    def stmt(self):
        tok = self.peek()
        if tok.kind is Tok.KW_FOR:
            return self.for_loop()
        if tok.kind is Tok.KW_RETURN:
            self.next()
            value = self.expr(statement_rhs=True)
            self.expect(Tok.SEMI)
            return Return(span=tok.span, value=value)
        if tok.kind is Tok.IDENT:
            name = self.fresh_name(tok)
            # lookahead decides the assignment form
            if self.at(Tok.ASSIGN, 1):
                self.next()
                self.next()
                value = self.expr(statement_rhs=True)
                self.expect(Tok.SEMI)
                return Assign(span=tok.span, target=name, value=value)
            if self.at(Tok.PLUS_ASSIGN, 1):
                self.next()
                self.next()
                value = self.expr(statement_rhs=True)
                self.expect(Tok.SEMI)
                return PlusAssign(span=tok.span, target=name, value=value)
            if (
                self.at(Tok.LT, 1)
                and self.at(Tok.IDENT, 2)
                and self.at(Tok.GT, 3)
                and self.at(Tok.ASSIGN, 4)
            ):
                self.next()
                self.next()
                mask = self.next().text
                self.next()
                self.next()
                value = self.expr(statement_rhs=True)
                self.expect(Tok.SEMI)
                return MaskedAssign(span=tok.span, target=name, mask=mask, value=value)
            if self.at(Tok.LBRACKET, 1):
                self.next()
                self.next()
                self.expect(Tok.COLON)
                self.expect(Tok.RBRACKET)
                self.expect(Tok.ASSIGN)
                value = self.expr(statement_rhs=True)
                self.expect(Tok.SEMI)
                return FillAssign(span=tok.span, target=name, value=value)
            raise ParseError(
                f"expected an assignment after {name!r}", self.peek(1).span
            )
        raise ParseError(
            f"expected a statement, found {tok.text or tok.kind.value!r}", tok.span
        )

    def for_loop(self) -> ForLoop:
        kw = self.expect(Tok.KW_FOR)
        var = self.fresh_name(self.expect(Tok.IDENT, "loop variable"))
        self.expect(Tok.KW_IN, "'in'")
        zero = self.expect(Tok.INT_LIT, "'0'")
        if zero.text != "0":
            raise ParseError("loop ranges must start at 0", zero.span)
        self.expect(Tok.DOTDOT, "'..'")
        bound = self.dim()
        body = self.block()
        return ForLoop(span=kw.span, var=var, bound=bound, body=body)

    # -- expressions --

    def expr(self, statement_rhs: bool = False) -> Expr:
        return self.sum_expr()

    def sum_expr(self) -> Expr:
        lhs = self.pw_expr()
        while self.peek().kind in (Tok.PLUS, Tok.MINUS):
            op = self.next()
            rhs = self.pw_expr()
            lhs = ScalarArith(span=op.span, op=op.text, lhs=lhs, rhs=rhs)
        return lhs

    def pw_expr(self) -> Expr:
        lhs = self.prod_expr()
        while self.at(Tok.LPAREN_DOT):
            opener = self.next()
            op_tok = self.peek()
            if op_tok.kind in (Tok.STAR, Tok.SLASH, Tok.PLUS, Tok.MINUS, Tok.EQEQ):
                self.next()
                op = op_tok.text
            else:
                raise ParseError(
                    f"expected a pointwise operator (* / + - ==), found {op_tok.text!r}",
                    op_tok.span,
                )
            self.expect(Tok.RPAREN)
            rhs = self.prod_expr()
            lhs = Pointwise(span=opener.span, op=op, lhs=lhs, rhs=rhs)
        return lhs

    def prod_expr(self) -> Expr:
        lhs = self.postfix_expr()
        while self.peek().kind in (Tok.STAR, Tok.SLASH):
            op = self.next()
            rhs = self.postfix_expr()
            if op.kind is Tok.STAR:
                lhs = MatMul(span=op.span, lhs=lhs, rhs=rhs)
            else:
                lhs = ScalarArith(span=op.span, op="/", lhs=lhs, rhs=rhs)
        return lhs

    def postfix_expr(self) -> Expr:
        e = self.primary()
        while self.at(Tok.TRANSPOSE):
            tok = self.next()
            e = Transpose(span=tok.span, arg=e)
        return e

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind is Tok.LPAREN:
            self.next()
            e = self.expr()
            self.expect(Tok.RPAREN)
            return e
        if tok.kind is Tok.INT_LIT:
            self.next()
            return IntLit(span=tok.span, value=int(tok.text))
        if tok.kind is Tok.FLOAT_LIT:
            self.next()
            return FloatLit(span=tok.span, value=float(tok.text))
        if tok.kind in (Tok.KW_TRUE, Tok.KW_FALSE):
            self.next()
            return BoolLit(span=tok.span, value=tok.kind is Tok.KW_TRUE)
        if tok.kind is Tok.IDENT:
            return self.ident_expr()
        raise ParseError(
            f"expected an expression, found {tok.text or tok.kind.value!r}", tok.span
        )

    def ident_expr(self) -> Expr:
        tok = self.next()
        name = tok.text
        if name == "cast":
            self.expect(Tok.LT)
            sr = self.semiring()
            self.expect(Tok.GT)
            self.expect(Tok.LPAREN)
            arg = self.expr()
            self.expect(Tok.RPAREN)
            return Cast(span=tok.span, target=sr, arg=arg)
        if name == "Vector":
            self.expect(Tok.LT)
            sr = self.semiring()
            self.expect(Tok.GT)
            self.expect(Tok.LPAREN)
            dim = self.dim()
            self.expect(Tok.RPAREN)
            return VectorCtor(span=tok.span, sr=sr, dim=dim)
        if name == "apply":
            self.expect(Tok.LPAREN)
            fn_tok = self.expect(Tok.IDENT, "a scalar function name")
            if fn_tok.text not in APPLY_FN_NAMES:
                raise ParseError(
                    f"unknown scalar function {fn_tok.text!r} "
                    f"(expected one of {sorted(APPLY_FN_NAMES)})",
                    fn_tok.span,
                )
            args = []
            while self.at(Tok.COMMA):
                self.next()
                args.append(self.expr())
            self.expect(Tok.RPAREN)
            return Builtin(span=tok.span, name="apply", args=tuple(args), fn_name=fn_tok.text)
        if name in ("reduce", "reduceRows", "diag", "pickAny"):
            self.expect(Tok.LPAREN)
            args = [self.expr()]
            while self.at(Tok.COMMA):
                self.next()
                args.append(self.expr())
            self.expect(Tok.RPAREN)
            return Builtin(span=tok.span, name=name, args=tuple(args))
        if name == "Matrix":
            raise ParseError("'Matrix' cannot be used as an expression", tok.span)
        if self.at(Tok.LPAREN):
            self.next()
            args = []
            if not self.at(Tok.RPAREN):
                args.append(self.expr())
                while self.at(Tok.COMMA):
                    self.next()
                    args.append(self.expr())
            self.expect(Tok.RPAREN)
            return Call(span=tok.span, name=name, args=tuple(args))
        return Var(span=tok.span, name=name)


def _walk_calls(expr: Expr, out: list[Call]):
    if isinstance(expr, Call):
        out.append(expr)
    for attr in ("lhs", "rhs", "arg", "value"):
        child = getattr(expr, attr, None)
        if isinstance(child, Expr):
            _walk_calls(child, out)
    for child in getattr(expr, "args", ()) or ():
        if isinstance(child, Expr):
            _walk_calls(child, out)


def _stmt_calls(stmts, out: list[Call]):
    for st in stmts:
        if isinstance(st, ForLoop):
            _stmt_calls(st.body, out)
        else:
            value = getattr(st, "value", None)
            if isinstance(value, Expr):
                _walk_calls(value, out)


def _check_call_graph(program: Program):
    declared = {f.name: f for f in program.functions}
    edges: dict[str, list[Call]] = {}
    for f in program.functions:
        calls: list[Call] = []
        _stmt_calls(f.body, calls)
        for call in calls:
            if call.name not in declared:
                raise ParseError(f"call to undeclared function {call.name!r}", call.span)
        edges[f.name] = calls

    # recursion (including mutual recursion) is forbidden
    VISITING, DONE = 1, 2
    state: dict[str, int] = {}

    def visit(name: str, at):
        if state.get(name) == DONE:
            return
        if state.get(name) == VISITING:
            raise ParseError(f"recursion is forbidden (cycle through {name!r})", at)
        state[name] = VISITING
        for call in edges[name]:
            visit(call.name, call.span)
        state[name] = DONE

    for f in program.functions:
        visit(f.name, f.span)


def parse(source: str, origin: str = "<inline>") -> Program:
    """Parse GraphAlg source text into an untyped Program."""
    program = _Parser(tokenize(source, origin)).program()
    _check_call_graph(program)
    return program
