"""Seeded generator of random well-typed programs and random inputs.

Programs are built bottom-up from typing rules, so every generated AST
type checks by construction. The same seed always yields the same
program, which keeps differential failures reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from graphalg import ast as A
from graphalg.engine import MatrixRelation
from graphalg.semiring import SemiringTag

from reference import RefMat

B, I, R, T = SemiringTag.BOOL, SemiringTag.INT, SemiringTag.REAL, SemiringTag.TROP

SPAN = A.Span(1, 1)
SYM = A.DimSym("s")
ONE_D = A.DimLit(1)


def _annot(ty: A.MatrixType) -> A.TypeAnnotation:
    if ty.rows == ONE_D and ty.cols == ONE_D:
        return A.TypeAnnotation("scalar", (), ty.sr)
    if ty.cols == ONE_D:
        return A.TypeAnnotation("vector", (ty.rows,), ty.sr)
    return A.TypeAnnotation("matrix", (ty.rows, ty.cols), ty.sr)


@dataclass
class GenProgram:
    program: A.Program
    param_types: list[tuple[str, A.MatrixType]]
    dims: dict[str, int]


class _Gen:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.pool: list[tuple[str, A.MatrixType]] = []
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"x{self.counter}"

    def pick_sr(self) -> SemiringTag:
        return self.rng.choice([B, I, R, T])

    def pick_shape(self) -> tuple[A.Dim, A.Dim]:
        return self.rng.choice(
            [(SYM, SYM), (SYM, ONE_D), (ONE_D, ONE_D), (SYM, SYM)]
        )

    def vars_of(self, pred) -> list[tuple[str, A.MatrixType]]:
        return [(n, t) for n, t in self.pool if pred(t)]

    # -- scalar literals --

    def scalar_expr(self, sr: SemiringTag) -> A.Expr | None:
        scalars = self.vars_of(lambda t: t.is_scalar and t.sr is sr)
        if scalars and self.rng.random() < 0.6:
            name, _ = self.rng.choice(scalars)
            return A.Var(span=SPAN, name=name)
        if sr is I:
            return A.IntLit(span=SPAN, value=self.rng.randint(0, 3))
        if sr is R:
            return A.FloatLit(span=SPAN, value=round(self.rng.uniform(0.0, 2.5), 2))
        if sr is B:
            return A.BoolLit(span=SPAN, value=self.rng.random() < 0.5)
        # tropical scalar: reinterpret a real literal
        return A.Cast(
            span=SPAN,
            target=T,
            arg=A.FloatLit(span=SPAN, value=round(self.rng.uniform(0.25, 2.0), 2)),
        )

    # -- expressions --

    def expr(self, depth: int) -> tuple[A.Expr, A.MatrixType] | None:
        makers = [
            self.mk_var,
            self.mk_var,
            self.mk_transpose,
            self.mk_matmul,
            self.mk_pointwise,
            self.mk_apply,
            self.mk_cast,
            self.mk_reduce,
            self.mk_diag,
            self.mk_pickany,
            self.mk_ctor,
        ]
        self.rng.shuffle(makers)
        for maker in makers:
            out = maker(depth)
            if out is not None:
                return out
        return None

    def operand(self, depth: int) -> tuple[A.Expr, A.MatrixType] | None:
        if depth <= 0:
            return self.mk_var(0) or self.mk_ctor(0)
        return self.expr(depth - 1)

    def mk_var(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        if not self.pool:
            return None
        name, ty = self.rng.choice(self.pool)
        return A.Var(span=SPAN, name=name), ty

    def mk_ctor(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sr = self.pick_sr()
        return (
            A.VectorCtor(span=SPAN, sr=sr, dim=SYM),
            A.MatrixType(SYM, ONE_D, sr),
        )

    def mk_transpose(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sub = self.operand(depth)
        if sub is None:
            return None
        e, ty = sub
        return A.Transpose(span=SPAN, arg=e), A.MatrixType(ty.cols, ty.rows, ty.sr)

    def mk_matmul(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        a = self.operand(depth)
        if a is None:
            return None
        ea, ta = a
        # find a compatible right operand in the pool
        options = self.vars_of(lambda t: t.rows == ta.cols and t.sr is ta.sr)
        if not options:
            return None
        name, tb = self.rng.choice(options)
        return (
            A.MatMul(span=SPAN, lhs=ea, rhs=A.Var(span=SPAN, name=name)),
            A.MatrixType(ta.rows, tb.cols, ta.sr),
        )

    def mk_pointwise(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        a = self.operand(depth)
        if a is None:
            return None
        ea, ta = a
        options = self.vars_of(
            lambda t: t.rows == ta.rows and t.cols == ta.cols and t.sr is ta.sr
        )
        if not options:
            return None
        name, _ = self.rng.choice(options)
        ops = ["+", "*", "=="]
        if ta.sr in (I, R):
            ops.append("-")
        op = self.rng.choice(ops)
        if ta.is_scalar and op in ("+", "-"):
            node = A.ScalarArith(
                span=SPAN, op=op, lhs=ea, rhs=A.Var(span=SPAN, name=name)
            )
        else:
            node = A.Pointwise(
                span=SPAN, op=op, lhs=ea, rhs=A.Var(span=SPAN, name=name)
            )
        return node, ta

    def mk_apply(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sub = self.operand(depth)
        if sub is None:
            return None
        e, ty = sub
        fns = ["add", "mul", "eq"]
        if ty.sr in (I, R):
            fns.append("sub")
        scalar = self.scalar_expr(ty.sr)
        if scalar is None:
            return None
        return (
            A.Builtin(
                span=SPAN,
                name="apply",
                args=(e, scalar),
                fn_name=self.rng.choice(fns),
            ),
            ty,
        )

    _CASTS = {
        B: [I, R, T],
        I: [R, B],
        R: [T, B],
        T: [R],
    }

    def mk_cast(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sub = self.operand(depth)
        if sub is None:
            return None
        e, ty = sub
        target = self.rng.choice(self._CASTS[ty.sr])
        return (
            A.Cast(span=SPAN, target=target, arg=e),
            A.MatrixType(ty.rows, ty.cols, target),
        )

    def mk_reduce(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sub = self.operand(depth)
        if sub is None:
            return None
        e, ty = sub
        if self.rng.random() < 0.5:
            return (
                A.Builtin(span=SPAN, name="reduce", args=(e,)),
                A.MatrixType(ONE_D, ONE_D, ty.sr),
            )
        return (
            A.Builtin(span=SPAN, name="reduceRows", args=(e,)),
            A.MatrixType(ty.rows, ONE_D, ty.sr),
        )

    def mk_diag(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        vectors = self.vars_of(lambda t: t.is_vector and not t.is_scalar)
        if not vectors:
            return None
        name, ty = self.rng.choice(vectors)
        return (
            A.Builtin(span=SPAN, name="diag", args=(A.Var(span=SPAN, name=name),)),
            A.MatrixType(ty.rows, ty.rows, ty.sr),
        )

    def mk_pickany(self, depth) -> tuple[A.Expr, A.MatrixType] | None:
        sub = self.operand(depth)
        if sub is None:
            return None
        e, ty = sub
        return A.Builtin(span=SPAN, name="pickAny", args=(e,)), ty

    # -- statements --

    def statement(self, depth=2) -> A.Stmt | None:
        roll = self.rng.random()
        if roll < 0.15 and self.pool:
            # plus-assign an existing variable
            name, ty = self.rng.choice(self.pool)
            value = self.typed_expr(ty, depth)
            if value is not None:
                return A.PlusAssign(span=SPAN, target=name, value=value)
        if roll < 0.25:
            stmt = self.mk_masked(depth)
            if stmt is not None:
                return stmt
        if roll < 0.35 and self.pool:
            name, ty = self.rng.choice(self.pool)
            scalar = self.scalar_expr(ty.sr)
            if scalar is not None:
                return A.FillAssign(span=SPAN, target=name, value=scalar)
        out = self.expr(depth)
        if out is None:
            return None
        e, ty = out
        name = self.fresh()
        self.pool.append((name, ty))
        return A.Assign(span=SPAN, target=name, value=e)

    def typed_expr(self, ty: A.MatrixType, depth: int) -> A.Expr | None:
        """An expression of exactly the given type."""
        for _ in range(6):
            out = self.expr(depth)
            if out is not None and out[1] == ty:
                return out[0]
        options = self.vars_of(lambda t: t == ty)
        if options:
            return A.Var(span=SPAN, name=self.rng.choice(options)[0])
        return None

    def mk_masked(self, depth) -> A.Stmt | None:
        if not self.pool:
            return None
        name, ty = self.rng.choice(self.pool)
        masks = self.vars_of(lambda t: t.rows == ty.rows and t.cols == ty.cols)
        if not masks:
            return None
        mask, _ = self.rng.choice(masks)
        value = self.typed_expr(ty, depth)
        if value is None:
            return None
        return A.MaskedAssign(span=SPAN, target=name, mask=mask, value=value)

    def loop(self) -> A.ForLoop | None:
        candidates = [(n, t) for n, t in self.pool if not t.is_scalar]
        if not candidates:
            return None
        states = self.rng.sample(candidates, k=min(len(candidates), self.rng.randint(1, 2)))
        index_var = f"i{self.counter}"
        body: list[A.Stmt] = []
        outer_pool = list(self.pool)
        for name, ty in states:
            value = None
            if ty.sr is I and self.rng.random() < 0.25:
                # fold the loop index into an integer state
                value = A.Builtin(
                    span=SPAN,
                    name="apply",
                    args=(A.Var(span=SPAN, name=name), A.Var(span=SPAN, name=index_var)),
                    fn_name="add",
                )
            if value is None:
                value = self.typed_expr(ty, depth=1)
            if value is None:
                continue
            if self.rng.random() < 0.6:
                body.append(A.PlusAssign(span=SPAN, target=name, value=value))
            else:
                body.append(A.Assign(span=SPAN, target=name, value=value))
        self.pool = outer_pool
        if not body:
            return None
        bound = self.rng.choice([SYM, A.DimLit(2), A.DimLit(3)])
        return A.ForLoop(span=SPAN, var=index_var, bound=bound, body=tuple(body))

    def build(self) -> A.FuncDecl:
        params = []
        for _ in range(self.rng.randint(2, 4)):
            rows, cols = self.pick_shape()
            sr = self.pick_sr()
            ty = A.MatrixType(rows, cols, sr)
            name = self.fresh()
            self.pool.append((name, ty))
            params.append(A.Param(name, _annot(ty), SPAN))
        stmts: list[A.Stmt] = []
        for _ in range(self.rng.randint(2, 5)):
            if self.rng.random() < 0.3:
                st = self.loop()
            else:
                st = self.statement()
            if st is not None:
                stmts.append(st)
        # return a non-scalar variable when one exists
        rets = [p for p in self.pool if not p[1].is_scalar] or self.pool
        rname, rty = self.rng.choice(rets)
        stmts.append(A.Return(span=SPAN, value=A.Var(span=SPAN, name=rname)))
        return A.FuncDecl(
            name="main",
            params=tuple(params),
            ret=_annot(rty),
            body=tuple(stmts),
            span=SPAN,
        )


def gen_program(seed: int) -> GenProgram:
    g = _Gen(seed)
    decl = g.build()
    size = random.Random(seed ^ 0x5EED).randint(2, 5)
    param_types = [(p.name, p.annot.to_matrix_type()) for p in decl.params]
    return GenProgram(
        program=A.Program(functions=(decl,)),
        param_types=param_types,
        dims={"s": size},
    )


def _rand_value(rng: random.Random, sr: SemiringTag):
    if sr is B:
        return True
    if sr is I:
        return rng.choice([-2, -1, 1, 2, 3])
    if sr is R:
        return round(rng.uniform(-2.0, 2.0), 3) or 0.5
    return round(rng.uniform(0.25, 4.0), 2)


def gen_inputs(
    gp: GenProgram, seed: int
) -> tuple[dict[str, RefMat], dict[str, MatrixRelation]]:
    """Random argument relations, as reference mats and engine relations."""
    rng = random.Random(seed)
    size = gp.dims["s"]

    def dim(d: A.Dim) -> int:
        return d.value if isinstance(d, A.DimLit) else size

    ref_args: dict[str, RefMat] = {}
    eng_args: dict[str, MatrixRelation] = {}
    for name, ty in gp.param_types:
        nr, nc = dim(ty.rows), dim(ty.cols)
        density = rng.uniform(0.2, 0.8)
        tuples = []
        for i in range(nr):
            for j in range(nc):
                if rng.random() < density:
                    tuples.append((i, j, _rand_value(rng, ty.sr)))
        ref = RefMat(nr, nc, ty.sr)
        for i, j, v in tuples:
            ref.set(i, j, v)
        ref_args[name] = ref
        eng_args[name] = MatrixRelation.from_tuples(ty.sr, nr, nc, tuples)
    return ref_args, eng_args
