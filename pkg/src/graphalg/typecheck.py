"""Type checking: dimension symbols, semirings and shapes.

All shape checking happens here; the runtime never validates shapes.
Inside a function body, dimension symbols are rigid: `s` only matches `s`,
so programs check without concrete inputs. Unification (`DimEnv`) is used
where symbols meet concrete dims: user-function call sites and the binding
of an entry function to actual relations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import ast as A
from .errors import Span, TypeCheckError
from .semiring import SemiringTag, cast_supported

Dim = A.Dim


# ---------------------------------------------------------------------------
# Dimension unification
# ---------------------------------------------------------------------------


class DimEnv:
    """Union-find over dimension terms.

    Flexible symbols (plain strings) may merge with anything; a class holds
    at most one concrete anchor (a literal size or a rigid symbol), and
    merging two classes with distinct anchors is an error.
    """

    def __init__(self):
        self._parent: dict = {}
        self._anchor: dict = {}

    @staticmethod
    def _key(term):
        if isinstance(term, A.DimLit):
            return ("lit", term.value)
        if isinstance(term, A.DimSym):
            return ("rigid", term.name)
        return ("flex", term)  # plain string: flexible variable

    @staticmethod
    def _is_anchor(key) -> bool:
        return key[0] in ("lit", "rigid")

    def _find(self, key):
        self._parent.setdefault(key, key)
        root = key
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[key] != root:
            self._parent[key], key = root, self._parent[key]
        return root

    def unify(self, a, b, span: Span | None = None):
        ka, kb = self._find(self._key(a)), self._find(self._key(b))
        if ka == kb:
            return self
        anch_a = self._anchor.get(ka, ka if self._is_anchor(ka) else None)
        anch_b = self._anchor.get(kb, kb if self._is_anchor(kb) else None)
        if anch_a is not None and anch_b is not None and anch_a != anch_b:
            raise TypeCheckError(
                f"dimension mismatch: {_anchor_str(anch_a)} vs {_anchor_str(anch_b)}",
                span,
            )
        self._parent[kb] = ka
        if anch_a is None and anch_b is not None:
            self._anchor[ka] = anch_b
        elif anch_a is not None:
            self._anchor[ka] = anch_a
        return self

    def resolve(self, term) -> Dim | None:
        """The anchor of `term`'s class as a Dim, or None when unresolved."""
        root = self._find(self._key(term))
        anchor = self._anchor.get(root, root if self._is_anchor(root) else None)
        if anchor is None:
            return None
        kind, value = anchor
        return A.DimLit(value) if kind == "lit" else A.DimSym(value)

    def size_of(self, term) -> int | None:
        d = self.resolve(term)
        return d.value if isinstance(d, A.DimLit) else None


def _anchor_str(anchor) -> str:
    kind, value = anchor
    return str(value)


def unify_dims(env: DimEnv, a, b, span: Span | None = None) -> DimEnv:
    """Merge the classes of `a` and `b`; literal conflicts are type errors."""
    return env.unify(a, b, span)


# ---------------------------------------------------------------------------
# Program checking
# ---------------------------------------------------------------------------


@dataclass
class FuncInfo:
    decl: A.FuncDecl
    param_types: list[tuple[str, A.MatrixType]]
    return_type: A.MatrixType
    dim_symbols: list[str]
    param_dim_symbols: list[str]
    free_dim_symbols: list[str] = field(default_factory=list)


@dataclass
class TypedProgram:
    """The AST with every expression annotated with its MatrixType."""

    program: A.Program
    functions: dict[str, FuncInfo]

    def info(self, name: str) -> FuncInfo:
        if name not in self.functions:
            raise TypeCheckError(f"unknown function {name!r}")
        return self.functions[name]


def _dims_eq(a: Dim, b: Dim) -> bool:
    return a == b


def _annot_symbols(annot: A.TypeAnnotation) -> set[str]:
    return {d.name for d in annot.dims if isinstance(d, A.DimSym)}


def _collect_symbols(decl: A.FuncDecl) -> tuple[list[str], list[str]]:
    """All dimension symbols used by a function, and those fixed by params."""
    param_syms: list[str] = []
    for p in decl.params:
        for s in sorted(_annot_symbols(p.annot)):
            if s not in param_syms:
                param_syms.append(s)
    all_syms = list(param_syms)

    def see(d):
        if isinstance(d, A.DimSym) and d.name not in all_syms:
            all_syms.append(d.name)

    for s in _annot_symbols(decl.ret):
        if s not in all_syms:
            all_syms.append(s)

    def walk_expr(e):
        if isinstance(e, A.VectorCtor):
            see(e.dim)
        for attr in ("lhs", "rhs", "arg", "value"):
            child = getattr(e, attr, None)
            if isinstance(child, A.Expr):
                walk_expr(child)
        for child in getattr(e, "args", ()) or ():
            if isinstance(child, A.Expr):
                walk_expr(child)

    def walk_stmts(stmts):
        for st in stmts:
            if isinstance(st, A.ForLoop):
                see(st.bound)
                walk_stmts(st.body)
            else:
                v = getattr(st, "value", None)
                if isinstance(v, A.Expr):
                    walk_expr(v)

    walk_stmts(decl.body)
    return all_syms, param_syms


class _FuncChecker:
    def __init__(self, decl: A.FuncDecl, signatures: dict[str, FuncInfo]):
        self.decl = decl
        self.signatures = signatures
        self.vars: dict[str, A.MatrixType] = {}
        self.loop_indices: set[str] = set()
        syms, param_syms = _collect_symbols(decl)
        self.dim_symbols = syms
        self.param_dim_symbols = param_syms

    def fail(self, msg: str, span: Span) -> TypeCheckError:
        return TypeCheckError(msg, span)

    def check(self):
        for p in self.decl.params:
            if p.name in self.vars:
                raise self.fail(f"duplicate parameter {p.name!r}", p.span)
            if p.name in self.dim_symbols:
                raise self.fail(
                    f"parameter {p.name!r} collides with a dimension symbol", p.span
                )
            self.vars[p.name] = p.annot.to_matrix_type()
        body = self.decl.body
        if not body or not isinstance(body[-1], A.Return):
            raise self.fail(
                f"function {self.decl.name!r} must end with a return statement",
                self.decl.span,
            )
        self.stmts(body, top_level=True)

    def stmts(self, stmts, top_level: bool):
        for i, st in enumerate(stmts):
            if isinstance(st, A.Return):
                if not top_level or i != len(stmts) - 1:
                    raise self.fail(
                        "return is only allowed as the final statement", st.span
                    )
                got = self.expr(st.value, stmt_rhs=True)
                want = self.decl.ret.to_matrix_type()
                self.require_type(got, want, st.span, "return value")
            elif isinstance(st, A.Assign):
                self.check_target_name(st.target, st.span)
                self.vars[st.target] = self.expr(st.value, stmt_rhs=True)
            elif isinstance(st, A.PlusAssign):
                target_ty = self.read_var(st.target, st.span)
                got = self.expr(st.value, stmt_rhs=True)
                self.require_type(got, target_ty, st.span, f"'{st.target} +='")
            elif isinstance(st, A.MaskedAssign):
                target_ty = self.read_var(st.target, st.span)
                mask_ty = self.read_var(st.mask, st.span)
                if not (
                    _dims_eq(mask_ty.rows, target_ty.rows)
                    and _dims_eq(mask_ty.cols, target_ty.cols)
                ):
                    raise self.fail(
                        f"mask {st.mask!r} has shape {mask_ty}, "
                        f"target has shape {target_ty}",
                        st.span,
                    )
                got = self.expr(st.value, stmt_rhs=True)
                self.require_type(got, target_ty, st.span, "masked assignment")
            elif isinstance(st, A.FillAssign):
                target_ty = self.read_var(st.target, st.span)
                got = self.expr(st.value, stmt_rhs=True)
                if not got.is_scalar or got.sr is not target_ty.sr:
                    raise self.fail(
                        f"fill value must be a {target_ty.sr} scalar, got {got}",
                        st.span,
                    )
            elif isinstance(st, A.ForLoop):
                self.for_loop(st)
            else:
                raise self.fail(f"unsupported statement {st!r}", st.span)

    def for_loop(self, st: A.ForLoop):
        if isinstance(st.bound, A.DimSym) and st.bound.name not in self.dim_symbols:
            self.dim_symbols.append(st.bound.name)
        if st.var in self.vars or st.var in self.dim_symbols:
            raise self.fail(
                f"loop variable {st.var!r} shadows an existing binding", st.span
            )
        before = dict(self.vars)
        self.loop_indices.add(st.var)
        self.stmts(st.body, top_level=False)
        self.loop_indices.discard(st.var)
        # loop states must be type-stable; body-local variables go out of scope
        after = {}
        for name, ty in self.vars.items():
            if name in before:
                if ty != before[name]:
                    raise self.fail(
                        f"loop changes the type of {name!r} from "
                        f"{before[name]} to {ty}",
                        st.span,
                    )
                after[name] = ty
        self.vars = after

    def check_target_name(self, name: str, span: Span):
        if name in self.loop_indices:
            raise self.fail(f"cannot assign to loop variable {name!r}", span)
        if name in self.dim_symbols:
            raise self.fail(f"cannot assign to dimension symbol {name!r}", span)

    def read_var(self, name: str, span: Span) -> A.MatrixType:
        if name not in self.vars:
            raise self.fail(f"unknown variable {name!r}", span)
        return self.vars[name]

    def require_type(self, got, want, span, what):
        if got.sr is not want.sr:
            raise self.fail(f"{what}: semiring mismatch {got.sr} vs {want.sr}", span)
        if not (_dims_eq(got.rows, want.rows) and _dims_eq(got.cols, want.cols)):
            raise self.fail(f"{what}: shape mismatch {got} vs {want}", span)

    # -- expressions --

    def expr(self, e: A.Expr, stmt_rhs: bool = False) -> A.MatrixType:
        ty = self._expr(e, stmt_rhs)
        e.ty = ty
        return ty

    def _expr(self, e: A.Expr, stmt_rhs: bool) -> A.MatrixType:
        if isinstance(e, A.Var):
            if e.name in self.vars:
                return self.vars[e.name]
            if e.name in self.loop_indices:
                return A.scalar_type(SemiringTag.INT)
            if e.name in self.dim_symbols:
                e.is_dim_size = True
                return A.scalar_type(SemiringTag.INT)
            raise self.fail(f"unknown variable {e.name!r}", e.span)
        if isinstance(e, A.IntLit):
            return A.scalar_type(SemiringTag.INT)
        if isinstance(e, A.FloatLit):
            return A.scalar_type(SemiringTag.REAL)
        if isinstance(e, A.BoolLit):
            return A.scalar_type(SemiringTag.BOOL)
        if isinstance(e, A.MatMul):
            return self.matmul(e, stmt_rhs)
        if isinstance(e, A.ScalarArith):
            lt = self.expr(e.lhs)
            rt = self.expr(e.rhs)
            if not (lt.is_scalar and rt.is_scalar):
                raise self.fail(
                    f"scalar operator {e.op!r} needs scalar operands "
                    f"(got {lt} and {rt}); use (.{e.op}) for matrices",
                    e.span,
                )
            if lt.sr is not rt.sr:
                raise self.fail(
                    f"semiring mismatch for {e.op!r}: {lt.sr} vs {rt.sr}", e.span
                )
            self.check_pointwise_op(e.op, lt.sr, e.span)
            return lt
        if isinstance(e, A.Pointwise):
            lt = self.expr(e.lhs)
            rt = self.expr(e.rhs)
            if lt.sr is not rt.sr:
                raise self.fail(
                    f"semiring mismatch for (.{e.op}): {lt.sr} vs {rt.sr}", e.span
                )
            if not (_dims_eq(lt.rows, rt.rows) and _dims_eq(lt.cols, rt.cols)):
                raise self.fail(
                    f"shape mismatch for (.{e.op}): {lt} vs {rt}", e.span
                )
            op = "==" if e.op == "==" else e.op
            self.check_pointwise_op(op, lt.sr, e.span)
            return lt
        if isinstance(e, A.Transpose):
            t = self.expr(e.arg)
            return A.MatrixType(t.cols, t.rows, t.sr)
        if isinstance(e, A.Cast):
            t = self.expr(e.arg)
            if not cast_supported(t.sr, e.target):
                raise self.fail(
                    f"unsupported cast {t.sr} -> {e.target}", e.span
                )
            return A.MatrixType(t.rows, t.cols, e.target)
        if isinstance(e, A.VectorCtor):
            if isinstance(e.dim, A.DimSym) and e.dim.name not in self.dim_symbols:
                self.dim_symbols.append(e.dim.name)
            return A.MatrixType(e.dim, A.DimLit(1), e.sr)
        if isinstance(e, A.Builtin):
            return self.builtin(e)
        if isinstance(e, A.Call):
            return self.call(e)
        raise self.fail(f"cannot type {e!r}", e.span)

    def check_pointwise_op(self, op: str, sr: SemiringTag, span: Span):
        if op == "-" and sr not in (SemiringTag.INT, SemiringTag.REAL):
            raise self.fail(f"subtraction is not defined on {sr}", span)
        if op == "/" and sr is not SemiringTag.REAL:
            raise self.fail(
                f"division is only defined on real values, not {sr}", span
            )

    def matmul(self, e: A.MatMul, stmt_rhs: bool) -> A.MatrixType:
        lt = self.expr(e.lhs)
        rt = self.expr(e.rhs)
        if lt.sr is not rt.sr:
            raise self.fail(
                f"semiring mismatch for '*': {lt.sr} vs {rt.sr}", e.span
            )
        if _dims_eq(lt.cols, rt.rows):
            return A.MatrixType(lt.rows, rt.cols, lt.sr)
        # `v * G` with a column vector v is accepted as the top-level RHS of
        # a statement and means (v' G)' = G' v; anywhere else it is an error.
        if stmt_rhs and lt.is_vector and _dims_eq(lt.rows, rt.rows):
            e.flipped = True
            return A.MatrixType(rt.cols, A.DimLit(1), lt.sr)
        raise self.fail(
            f"matrix multiply needs left columns = right rows: {lt} vs {rt}",
            e.span,
        )

    def builtin(self, e: A.Builtin) -> A.MatrixType:
        if e.name == "apply":
            if len(e.args) != 2:
                raise self.fail(
                    "apply takes a function name, a matrix and a scalar", e.span
                )
            mt = self.expr(e.args[0])
            ct = self.expr(e.args[1])
            if not ct.is_scalar:
                raise self.fail(
                    f"the extra apply argument must be a scalar, got {ct}",
                    e.span,
                )
            if ct.sr is not mt.sr:
                raise self.fail(
                    f"apply arguments must share one semiring: {mt.sr} vs {ct.sr}",
                    e.span,
                )
            op = {"add": "+", "sub": "-", "mul": "*", "div": "/", "eq": "=="}[e.fn_name]
            self.check_pointwise_op(op, mt.sr, e.span)
            return mt
        if e.name in ("reduce", "reduceRows", "diag", "pickAny"):
            if len(e.args) != 1:
                raise self.fail(f"{e.name} takes exactly one argument", e.span)
            t = self.expr(e.args[0])
            if e.name == "reduce":
                return A.scalar_type(t.sr)
            if e.name == "reduceRows":
                return A.MatrixType(t.rows, A.DimLit(1), t.sr)
            if e.name == "diag":
                if not t.is_vector:
                    raise self.fail(f"diag needs a vector, got {t}", e.span)
                return A.MatrixType(t.rows, t.rows, t.sr)
            return t  # pickAny
        raise self.fail(f"unknown builtin {e.name!r}", e.span)

    def call(self, e: A.Call) -> A.MatrixType:
        info = self.signatures.get(e.name)
        if info is None:
            raise self.fail(f"call to unknown function {e.name!r}", e.span)
        if info.free_dim_symbols:
            raise self.fail(
                f"{e.name!r} has unbound dimension symbols "
                f"{info.free_dim_symbols} and can only run as an entry point",
                e.span,
            )
        if len(e.args) != len(info.param_types):
            raise self.fail(
                f"{e.name!r} takes {len(info.param_types)} arguments, "
                f"got {len(e.args)}",
                e.span,
            )
        env = DimEnv()
        marker = itertools.count()
        flex = {s: f"${e.name}.{s}.{next(marker)}" for s in info.dim_symbols}

        def flexify(d: Dim):
            if isinstance(d, A.DimSym):
                return flex[d.name]
            return d

        for (pname, pty), arg in zip(info.param_types, e.args):
            at = self.expr(arg)
            if at.sr is not pty.sr:
                raise self.fail(
                    f"argument {pname!r} of {e.name!r}: semiring mismatch "
                    f"{at.sr} vs {pty.sr}",
                    arg.span,
                )
            unify_dims(env, flexify(pty.rows), at.rows, arg.span)
            unify_dims(env, flexify(pty.cols), at.cols, arg.span)

        def instantiate(d: Dim) -> Dim:
            if isinstance(d, A.DimLit):
                return d
            resolved = env.resolve(flex[d.name])
            if resolved is None:
                raise self.fail(
                    f"cannot infer dimension {d.name!r} of {e.name!r} "
                    "from the call arguments",
                    e.span,
                )
            return resolved

        e.dim_map = {s: instantiate(A.DimSym(s)) for s in info.dim_symbols}
        rt = info.return_type
        return A.MatrixType(instantiate(rt.rows), instantiate(rt.cols), rt.sr)


def check_program(program: A.Program) -> TypedProgram:
    """Check a parsed program, annotating every expression with its type."""
    signatures: dict[str, FuncInfo] = {}
    for decl in program.functions:
        if decl.name in signatures:
            raise TypeCheckError(f"duplicate function {decl.name!r}", decl.span)
        syms, param_syms = _collect_symbols(decl)
        signatures[decl.name] = FuncInfo(
            decl=decl,
            param_types=[(p.name, p.annot.to_matrix_type()) for p in decl.params],
            return_type=decl.ret.to_matrix_type(),
            dim_symbols=syms,
            param_dim_symbols=param_syms,
            free_dim_symbols=[s for s in syms if s not in param_syms],
        )
    for decl in program.functions:
        checker = _FuncChecker(decl, signatures)
        checker.check()
        info = signatures[decl.name]
        info.dim_symbols = checker.dim_symbols
        info.free_dim_symbols = [
            s for s in checker.dim_symbols if s not in checker.param_dim_symbols
        ]
    return TypedProgram(program=program, functions=signatures)
