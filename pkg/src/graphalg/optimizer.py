"""Optimization passes: sparsity, loop-invariant code motion, in-place
aggregation with fixpoint enabling.

Sparsity runs on Core: matrices stay sparse by default, and an operation
whose pointwise function does not map all-zeros to zero gets explicitly
densified inputs. The loop passes run on plans: invariant
aggregation-rooted fragments are hoisted out of loops (plain scans never
are), and loop states that fold an aggregate over themselves plus a delta
become persistent accumulation tables merged in place, which also makes
the loop eligible for early fixpoint exit.
"""

from __future__ import annotations

from dataclasses import replace

from . import ast as A
from .core import (
    CApply,
    CDensify,
    CDiag,
    CForLoop,
    CMatMul,
    COneVector,
    CPickAny,
    CTranspose,
    CVar,
    CZeroMatrix,
    CoreExpr,
    CoreFunction,
    CoreProgram,
    apply_is_sparse_safe,
)
from .errors import DenseLimitError
from .plan import (
    PAggregate,
    PJoin,
    PLoop,
    PMap,
    PScanArg,
    PUnion,
    PlanFunction,
    PlanNode,
    _with_children,
    children,
    compile_program,
    finalize,
    rewrite,
)
from .semiring import SBin, SVar

DEFAULT_DENSE_LIMIT = 50_000_000

MAY_OMIT_ZEROS = "MAY_OMIT_ZEROS"
MUST_BE_DENSE = "MUST_BE_DENSE"


# ---------------------------------------------------------------------------
# Sparsity analysis (Core)
# ---------------------------------------------------------------------------


def sparsity_annotation(e: CoreExpr) -> str:
    """Whether a node's result may omit zero-valued tuples."""
    if isinstance(e, CApply):
        return MAY_OMIT_ZEROS if apply_is_sparse_safe(e) else MUST_BE_DENSE
    if isinstance(e, CDensify):
        return MUST_BE_DENSE
    return MAY_OMIT_ZEROS


def _dense_complete(e: CoreExpr) -> bool:
    # nodes guaranteed to materialize every position of their shape
    return isinstance(e, (CDensify, COneVector))


def _positions(ty: A.MatrixType) -> int | None:
    if isinstance(ty.rows, A.DimLit) and isinstance(ty.cols, A.DimLit):
        return ty.rows.value * ty.cols.value
    return None


def _check_dense_limit(e: CoreExpr, limit: int, context: str):
    n = _positions(e.ty)
    if n is not None and n > limit:
        raise DenseLimitError(
            f"densifying {context} needs {n} positions "
            f"({e.ty.rows} x {e.ty.cols}), limit is {limit}"
        )


def sparsity_pass(
    cp: CoreProgram,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    densify_all: bool = False,
) -> CoreProgram:
    """Insert explicit Densify nodes.

    Normally only inputs of dense-requiring pointwise applications are
    densified. With `densify_all` every intermediate is densified; that
    baseline exists to validate sparsity soundness and to demonstrate why
    the analysis matters.
    """

    memo: dict[int, CoreExpr] = {}

    def densify(e: CoreExpr, context: str) -> CoreExpr:
        if _dense_complete(e):
            return e
        _check_dense_limit(e, dense_limit, context)
        return CDensify(ty=e.ty, arg=e)

    def go(e: CoreExpr) -> CoreExpr:
        if id(e) in memo:
            return memo[id(e)]
        out = _go(e)
        if densify_all and not isinstance(out, (CForLoop,)):
            out = densify(out, "intermediate result")
        memo[id(e)] = out
        return out

    def _go(e: CoreExpr) -> CoreExpr:
        if isinstance(e, (CVar, COneVector, CZeroMatrix)):
            return e
        if isinstance(e, CTranspose):
            return replace(e, arg=go(e.arg))
        if isinstance(e, CDiag):
            return replace(e, arg=go(e.arg))
        if isinstance(e, CPickAny):
            return replace(e, arg=go(e.arg))
        if isinstance(e, CDensify):
            return replace(e, arg=go(e.arg))
        if isinstance(e, CMatMul):
            return replace(e, lhs=go(e.lhs), rhs=go(e.rhs))
        if isinstance(e, CApply):
            args = tuple(go(a) for a in e.args)
            if not apply_is_sparse_safe(e):
                args = tuple(densify(a, "a pointwise operand") for a in args)
            return replace(e, args=args)
        if isinstance(e, CForLoop):
            states = tuple((n, go(init)) for n, init in e.states)
            body = tuple((n, go(update)) for n, update in e.body)
            return replace(e, states=states, body=body)
        raise TypeError(f"unknown Core node {type(e).__name__}")

    functions = {}
    for name, fn in cp.functions.items():
        functions[name] = CoreFunction(
            name=fn.name,
            params=list(fn.params),
            expr=go(fn.expr),
            free_dim_symbols=list(fn.free_dim_symbols),
        )
    return CoreProgram(functions=functions)


# ---------------------------------------------------------------------------
# Loop-invariant code motion (plans)
# ---------------------------------------------------------------------------


def _references(node: PlanNode, names: set[str], memo: dict[int, bool]) -> bool:
    if id(node) in memo:
        return memo[id(node)]
    if isinstance(node, PScanArg) and node.name in names:
        memo[id(node)] = True
        return True
    result = any(_references(c, names, memo) for c in children(node))
    memo[id(node)] = result
    return result


def _hoist_loop(loop: PLoop) -> PLoop:
    bound = {name for name, _ in loop.states}
    if loop.index_name:
        bound = bound | {loop.index_name}
    ref_memo: dict[int, bool] = {}

    hoists: list[tuple[str, PlanNode]] = []
    hoisted_ids: dict[int, str] = {}

    def find(node: PlanNode):
        if isinstance(node, PLoop):
            return  # inner loops manage their own fragments
        if (
            isinstance(node, PAggregate)
            and not _references(node, bound, ref_memo)
        ):
            if id(node) not in hoisted_ids:
                name = f"cache{len(hoists)}"
                hoisted_ids[id(node)] = name
                hoists.append((name, node))
            return
        for child in children(node):
            find(child)

    for body in loop.bodies:
        find(body)
    if not hoists:
        return loop

    def swap(node: PlanNode) -> PlanNode | None:
        name = hoisted_ids.get(id(node))
        if name is not None:
            return PScanArg(ty=node.ty, mark=node.mark, name=name)
        return None

    # replace hoisted fragments inside bodies; the original subplan objects
    # move to the loop's pre-iteration bindings
    new_bodies = []
    for body in loop.bodies:
        memo: dict[int, PlanNode] = {}

        def go(n: PlanNode) -> PlanNode:
            if id(n) in memo:
                return memo[id(n)]
            swapped = swap(n)
            if swapped is None:
                swapped = _with_children(n, tuple(go(c) for c in children(n)))
            memo[id(n)] = swapped
            return swapped

        new_bodies.append(go(body))

    return replace(
        loop,
        bodies=tuple(new_bodies),
        hoisted=loop.hoisted + tuple(hoists),
    )


def licm_pass(pf: PlanFunction) -> PlanFunction:
    """Hoist loop-invariant aggregation-rooted fragments out of loops."""

    def fn(node: PlanNode) -> PlanNode | None:
        if isinstance(node, PLoop):
            return _hoist_loop(node)
        return None

    root = rewrite(pf.root, fn)
    out = PlanFunction(
        name=pf.name,
        params=list(pf.params),
        root=root,
        free_dim_symbols=list(pf.free_dim_symbols),
    )
    finalize(out)
    return out


# ---------------------------------------------------------------------------
# In-place aggregation across iterations (plans)
# ---------------------------------------------------------------------------


def _normalize_apply_add(body: PlanNode) -> PlanNode:
    """Rewrite map(outer-join, a + b) as aggregate(union) so the in-place
    pattern can see plain accumulations like `v = or(v, step)`."""
    if not isinstance(body, PMap) or body.coord or body.filter:
        return body
    join = body.input
    if not isinstance(join, PJoin) or join.pattern != "pointwise":
        return body
    if len(join.val_tags) != 2:
        return body
    val = body.val
    if not (
        isinstance(val, SBin)
        and val.op == "+"
        and isinstance(val.lhs, SVar)
        and isinstance(val.rhs, SVar)
        and val.lhs.name == "v0"
        and val.rhs.name == "v1"
    ):
        return body
    union = PUnion(ty=body.ty, inputs=(join.left, join.right))
    return PAggregate(ty=body.ty, input=union, group_by="rowcol", combine="add")


def _flatten_union(node: PlanNode) -> list[PlanNode]:
    if isinstance(node, PUnion):
        out: list[PlanNode] = []
        for sub in node.inputs:
            out.extend(_flatten_union(sub))
        return out
    return [node]


def _rewrite_state_inplace(loop: PLoop, i: int) -> PLoop | None:
    name = loop.states[i][0]
    body = _normalize_apply_add(loop.bodies[i])
    if not isinstance(body, PAggregate) or body.combine not in ("add", "argmin_col"):
        return None
    parts = _flatten_union(body.input)
    self_refs = [
        p for p in parts if isinstance(p, PScanArg) and p.name == name
    ]
    if len(self_refs) != 1:
        return None
    rest = [p for p in parts if p is not self_refs[0]]
    if not rest:
        return None
    delta_src = rest[0] if len(rest) == 1 else PUnion(ty=body.ty, inputs=tuple(rest))
    delta = PAggregate(
        ty=body.ty,
        input=delta_src,
        group_by=body.group_by,
        combine=body.combine,
        label=body.label,
    )
    bodies = list(loop.bodies)
    bodies[i] = delta
    inplace = list(loop.inplace)
    inplace[i] = True
    return replace(loop, bodies=tuple(bodies), inplace=tuple(inplace), fixpoint=True)


def inplace_agg_pass(pf: PlanFunction) -> PlanFunction:
    """Turn self-accumulating loop states into in-place merges and enable
    fixpoint early exit on the rewritten loops."""

    def fn(node: PlanNode) -> PlanNode | None:
        if not isinstance(node, PLoop):
            return None
        loop = node
        # a body that reads the loop index is not a function of the states
        # alone, so an unchanged iteration proves nothing; leave it as is
        if loop.index_name is not None:
            memo: dict[int, bool] = {}
            if any(
                _references(body, {loop.index_name}, memo) for body in loop.bodies
            ):
                return loop
        for i in range(len(loop.states)):
            out = _rewrite_state_inplace(loop, i)
            if out is not None:
                loop = out
        return loop

    root = rewrite(pf.root, fn)
    out = PlanFunction(
        name=pf.name,
        params=list(pf.params),
        root=root,
        free_dim_symbols=list(pf.free_dim_symbols),
    )
    finalize(out)
    return out


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def optimize_plan(pf: PlanFunction, level: int) -> PlanFunction:
    if level >= 1:
        pf = licm_pass(pf)
    if level >= 2:
        pf = inplace_agg_pass(pf)
    finalize(pf)
    return pf


def pipeline(
    cp: CoreProgram,
    level: int = 2,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    densify_all: bool = False,
) -> dict[str, PlanFunction]:
    """sparsity (always) -> compile -> licm (O1+) -> in-place + fixpoint (O2)."""
    if level not in (0, 1, 2):
        raise ValueError(f"optimization level must be 0, 1 or 2, got {level}")
    cp = sparsity_pass(cp, dense_limit=dense_limit, densify_all=densify_all)
    plans = compile_program(cp)
    return {name: optimize_plan(pf, level) for name, pf in plans.items()}
