"""Semirings, scalar values, scalar arithmetic and casts.

Four semirings are supported:

* BOOL: (or, and) over booleans
* INT:  (+, *) over checked 64-bit signed integers
* REAL: (+, *) over 64-bit floats
* TROP: (min, +) over 64-bit floats with +inf as the additive identity

All arithmetic in the rest of the system bottoms out here, either through
the scalar entry points (`sr_add`, `sr_mul`, `cast_scalar`,
`eval_pointwise_fn`) or through the vectorized numpy kernels used by the
execution engine. Both paths share the same value conventions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ArithmeticOverflowError, EngineError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

Payload = Union[bool, int, float]


class SemiringTag(enum.Enum):
    BOOL = "bool"
    INT = "int"
    REAL = "real"
    TROP = "trop"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ScalarValue:
    """A scalar tagged with the semiring it lives in."""

    tag: SemiringTag
    payload: Payload

    def __post_init__(self):
        if self.tag is SemiringTag.BOOL:
            if not isinstance(self.payload, (bool, np.bool_)):
                raise TypeError(f"BOOL payload must be bool, got {self.payload!r}")
        elif self.tag is SemiringTag.INT:
            if isinstance(self.payload, (bool, np.bool_)) or not isinstance(
                self.payload, (int, np.integer)
            ):
                raise TypeError(f"INT payload must be int, got {self.payload!r}")
            if not (INT64_MIN <= int(self.payload) <= INT64_MAX):
                raise TypeError(f"INT payload out of 64-bit range: {self.payload!r}")
        else:
            if not isinstance(self.payload, (int, float, np.floating)):
                raise TypeError(
                    f"{self.tag} payload must be float, got {self.payload!r}"
                )
            object.__setattr__(self, "payload", float(self.payload))


ZERO_PAYLOAD: dict[SemiringTag, Payload] = {
    SemiringTag.BOOL: False,
    SemiringTag.INT: 0,
    SemiringTag.REAL: 0.0,
    SemiringTag.TROP: math.inf,
}

ONE_PAYLOAD: dict[SemiringTag, Payload] = {
    SemiringTag.BOOL: True,
    SemiringTag.INT: 1,
    SemiringTag.REAL: 1.0,
    SemiringTag.TROP: 0.0,
}

NUMPY_DTYPE: dict[SemiringTag, np.dtype] = {
    SemiringTag.BOOL: np.dtype(np.bool_),
    SemiringTag.INT: np.dtype(np.int64),
    SemiringTag.REAL: np.dtype(np.float64),
    SemiringTag.TROP: np.dtype(np.float64),
}


def zero_of(sr: SemiringTag) -> ScalarValue:
    return ScalarValue(sr, ZERO_PAYLOAD[sr])


def one_of(sr: SemiringTag) -> ScalarValue:
    return ScalarValue(sr, ONE_PAYLOAD[sr])


def _checked_int(op: str, a: int, b: int, value: int) -> int:
    if not (INT64_MIN <= value <= INT64_MAX):
        raise ArithmeticOverflowError(op, a, b)
    return value


def _trop_min(a: float, b: float) -> float:
    # NaN ranks above everything: min ignores it unless both operands are NaN.
    if math.isnan(a):
        return b
    if math.isnan(b):
        return a
    return a if a <= b else b


def add_payload(sr: SemiringTag, a: Payload, b: Payload) -> Payload:
    if sr is SemiringTag.BOOL:
        return bool(a or b)
    if sr is SemiringTag.INT:
        return _checked_int("add", a, b, int(a) + int(b))
    if sr is SemiringTag.REAL:
        return float(a) + float(b)
    return _trop_min(float(a), float(b))


def mul_payload(sr: SemiringTag, a: Payload, b: Payload) -> Payload:
    # The additive identity is absorbing even where IEEE arithmetic would
    # produce NaN (0 * inf, inf + -inf): sparse execution never multiplies
    # an implicit zero, so explicit zeros must behave the same way.
    if sr is SemiringTag.BOOL:
        return bool(a and b)
    if sr is SemiringTag.INT:
        return _checked_int("mul", a, b, int(a) * int(b))
    if sr is SemiringTag.REAL:
        if a == 0.0 or b == 0.0:
            return 0.0
        return float(a) * float(b)
    if a == math.inf or b == math.inf:
        return math.inf
    return float(a) + float(b)  # tropical multiplication


def _require_tag(sr: SemiringTag, v: ScalarValue, what: str) -> None:
    if v.tag is not sr:
        raise EngineError(f"{what}: expected a {sr} value, got {v.tag}")


def sr_add(sr: SemiringTag, a: ScalarValue, b: ScalarValue) -> ScalarValue:
    """Semiring addition: or / + / + / min depending on `sr`."""
    _require_tag(sr, a, "sr_add")
    _require_tag(sr, b, "sr_add")
    return ScalarValue(sr, add_payload(sr, a.payload, b.payload))


def sr_mul(sr: SemiringTag, a: ScalarValue, b: ScalarValue) -> ScalarValue:
    """Semiring multiplication: and / * / * / + depending on `sr`."""
    _require_tag(sr, a, "sr_mul")
    _require_tag(sr, b, "sr_mul")
    return ScalarValue(sr, mul_payload(sr, a.payload, b.payload))


@dataclass(frozen=True)
class SemiringDef:
    """A semiring bundled with its identities and operators."""

    tag: SemiringTag
    zero: ScalarValue
    one: ScalarValue
    add: Callable[[ScalarValue, ScalarValue], ScalarValue]
    mul: Callable[[ScalarValue, ScalarValue], ScalarValue]


def semiring_def(sr: SemiringTag) -> SemiringDef:
    return SemiringDef(
        tag=sr,
        zero=zero_of(sr),
        one=one_of(sr),
        add=lambda a, b, _sr=sr: sr_add(_sr, a, b),
        mul=lambda a, b, _sr=sr: sr_mul(_sr, a, b),
    )


# ---------------------------------------------------------------------------
# Casts
# ---------------------------------------------------------------------------

# Supported cast pairs. Every cast maps the additive identity of the source
# semiring to the additive identity of the target, so sparse supports are
# stable under casting.
_B, _I, _R, _T = SemiringTag.BOOL, SemiringTag.INT, SemiringTag.REAL, SemiringTag.TROP

CAST_PAIRS: frozenset[tuple[SemiringTag, SemiringTag]] = frozenset(
    [
        (_B, _I),
        (_B, _R),
        (_B, _T),
        (_I, _R),
        (_R, _T),
        (_T, _R),
        (_I, _B),
        (_R, _B),
        (_B, _B),
        (_I, _I),
        (_R, _R),
        (_T, _T),
    ]
)


def cast_supported(source: SemiringTag, target: SemiringTag) -> bool:
    return (source, target) in CAST_PAIRS


def cast_payload(target: SemiringTag, source: SemiringTag, v: Payload) -> Payload:
    if source is target:
        return v
    if source is _B:
        return ONE_PAYLOAD[target] if v else ZERO_PAYLOAD[target]
    if (source, target) == (_I, _R):
        return float(v)  # exact below 2**53, nearest float beyond
    if (source, target) == (_R, _T):
        return math.inf if v == 0.0 else float(v)
    if (source, target) == (_T, _R):
        return 0.0 if v == math.inf else float(v)
    if (source, target) == (_I, _B):
        return v != 0
    if (source, target) == (_R, _B):
        return v != 0.0
    raise EngineError(f"unsupported cast {source} -> {target}")


def cast_scalar(target: SemiringTag, v: ScalarValue) -> ScalarValue:
    """Convert `v` into `target`, mapping identities to identities."""
    if not cast_supported(v.tag, target):
        raise EngineError(f"unsupported cast {v.tag} -> {target}")
    return ScalarValue(target, cast_payload(target, v.tag, v.payload))


# ---------------------------------------------------------------------------
# Pointwise scalar expressions
# ---------------------------------------------------------------------------
#
# Pointwise functions evaluate a small expression language over scalar
# variables: binary arithmetic (+ * - / =), casts, literals, and a three-way
# select used to express masked assignment. Every node evaluates inside one
# semiring; `=` yields the one/zero encoding of equality in the operand
# semiring.


@dataclass(frozen=True)
class SVar:
    name: str


@dataclass(frozen=True)
class SLit:
    tag: SemiringTag
    value: Payload


@dataclass(frozen=True)
class SBin:
    op: str  # one of + * - / =
    lhs: "ScalarExpr"
    rhs: "ScalarExpr"


@dataclass(frozen=True)
class SCast:
    target: SemiringTag
    arg: "ScalarExpr"


@dataclass(frozen=True)
class SSelect:
    """if `cond` is not its semiring's zero, yield `then`, else `other`."""

    cond: "ScalarExpr"
    then: "ScalarExpr"
    other: "ScalarExpr"


ScalarExpr = Union[SVar, SLit, SBin, SCast, SSelect]


@dataclass(frozen=True)
class PointwiseFn:
    """A pointwise function: named, tagged parameters and a scalar body."""

    params: tuple[tuple[str, SemiringTag], ...]
    body: ScalarExpr

    @property
    def arity(self) -> int:
        return len(self.params)


def expr_tag(expr: ScalarExpr, env: dict[str, SemiringTag]) -> SemiringTag:
    """Infer the semiring of a scalar expression bottom-up."""
    if isinstance(expr, SVar):
        if expr.name not in env:
            raise EngineError(f"unbound scalar variable {expr.name!r}")
        return env[expr.name]
    if isinstance(expr, SLit):
        return expr.tag
    if isinstance(expr, SCast):
        src = expr_tag(expr.arg, env)
        if not cast_supported(src, expr.target):
            raise EngineError(f"unsupported cast {src} -> {expr.target}")
        return expr.target
    if isinstance(expr, SSelect):
        expr_tag(expr.cond, env)
        t0 = expr_tag(expr.then, env)
        t1 = expr_tag(expr.other, env)
        if t0 is not t1:
            raise EngineError(f"select branches disagree: {t0} vs {t1}")
        return t0
    lt = expr_tag(expr.lhs, env)
    rt = expr_tag(expr.rhs, env)
    if lt is not rt:
        raise EngineError(f"operands of {expr.op!r} disagree: {lt} vs {rt}")
    return lt


def fn_result_tag(fn: PointwiseFn) -> SemiringTag:
    return expr_tag(fn.body, dict(fn.params))


def _eval_bin(op: str, sr: SemiringTag, a: Payload, b: Payload) -> Payload:
    if op == "+":
        return add_payload(sr, a, b)
    if op == "*":
        return mul_payload(sr, a, b)
    if op == "-":
        if sr is SemiringTag.INT:
            return _checked_int("sub", a, b, int(a) - int(b))
        if sr is SemiringTag.REAL:
            return float(a) - float(b)
        raise EngineError(f"subtraction is not defined on {sr}")
    if op == "/":
        if sr is SemiringTag.REAL:
            if b == 0.0:
                # standard float semantics (inf/nan); callers track this in stats
                with np.errstate(divide="ignore", invalid="ignore"):
                    return float(np.float64(a) / np.float64(b))
            return float(a) / float(b)
        if sr is SemiringTag.INT:
            if b == 0:
                raise EngineError("integer division by zero")
            return _checked_int("div", a, b, int(a) // int(b))
        raise EngineError(f"division is not defined on {sr}")
    if op == "=":
        if sr is SemiringTag.BOOL:
            eq = bool(a) == bool(b)
        else:
            eq = float(a) == float(b) if sr is not SemiringTag.INT else int(a) == int(b)
        return ONE_PAYLOAD[sr] if eq else ZERO_PAYLOAD[sr]
    raise EngineError(f"unknown scalar operator {op!r}")


def _eval_expr(expr: ScalarExpr, env: dict[str, ScalarValue]) -> ScalarValue:
    if isinstance(expr, SVar):
        return env[expr.name]
    if isinstance(expr, SLit):
        return ScalarValue(expr.tag, expr.value)
    if isinstance(expr, SCast):
        return cast_scalar(expr.target, _eval_expr(expr.arg, env))
    if isinstance(expr, SSelect):
        cond = _eval_expr(expr.cond, env)
        taken = expr.then if cond.payload != ZERO_PAYLOAD[cond.tag] else expr.other
        return _eval_expr(taken, env)
    lhs = _eval_expr(expr.lhs, env)
    rhs = _eval_expr(expr.rhs, env)
    if lhs.tag is not rhs.tag:
        raise EngineError(f"operands of {expr.op!r} disagree: {lhs.tag} vs {rhs.tag}")
    return ScalarValue(lhs.tag, _eval_bin(expr.op, lhs.tag, lhs.payload, rhs.payload))


def eval_pointwise_fn(fn: PointwiseFn, args: list[ScalarValue]) -> ScalarValue:
    """Evaluate a pointwise function on scalar arguments.

    Pure: the result depends only on the inputs.
    """
    if len(args) != fn.arity:
        raise EngineError(f"pointwise arity mismatch: want {fn.arity}, got {len(args)}")
    env = {}
    for (name, tag), value in zip(fn.params, args):
        if value.tag is not tag:
            raise EngineError(f"argument {name!r}: expected {tag}, got {value.tag}")
        env[name] = value
    return _eval_expr(fn.body, env)


def fn_is_sparse_safe(fn: PointwiseFn) -> bool:
    """True when feeding every parameter its additive identity yields zero.

    Operations with this property may run over sparse inputs unchanged.
    """
    args = [zero_of(tag) for _, tag in fn.params]
    try:
        result = eval_pointwise_fn(fn, args)
    except EngineError:
        return False
    zero = ZERO_PAYLOAD[result.tag]
    if result.tag in (SemiringTag.REAL, SemiringTag.TROP):
        if isinstance(result.payload, float) and math.isnan(result.payload):
            return False
        return float(result.payload) == float(zero)
    return result.payload == zero


# Convenient canned function bodies.


def semiring_add_fn(sr: SemiringTag) -> PointwiseFn:
    return PointwiseFn(params=(("a", sr), ("b", sr)), body=SBin("+", SVar("a"), SVar("b")))


def is_semiring_add_fn(fn: PointwiseFn) -> bool:
    """Recognize add(a, b) structurally; used by plan rewrites."""
    if fn.arity != 2:
        return False
    (n0, t0), (n1, t1) = fn.params
    if t0 is not t1:
        return False
    body = fn.body
    return (
        isinstance(body, SBin)
        and body.op == "+"
        and isinstance(body.lhs, SVar)
        and isinstance(body.rhs, SVar)
        and body.lhs.name == n0
        and body.rhs.name == n1
    )


def select_fn(mask_sr: SemiringTag, value_sr: SemiringTag) -> PointwiseFn:
    """select(m, b, a): b where the mask is nonzero, a elsewhere."""
    return PointwiseFn(
        params=(("m", mask_sr), ("b", value_sr), ("a", value_sr)),
        body=SSelect(SVar("m"), SVar("b"), SVar("a")),
    )


def cast_fn(source: SemiringTag, target: SemiringTag) -> PointwiseFn:
    return PointwiseFn(params=(("x", source),), body=SCast(target, SVar("x")))


def const_fn(sr_in: SemiringTag, lit: SLit) -> PointwiseFn:
    return PointwiseFn(params=(("x", sr_in),), body=lit)


def binop_fn(op: str, sr: SemiringTag) -> PointwiseFn:
    return PointwiseFn(params=(("a", sr), ("b", sr)), body=SBin(op, SVar("a"), SVar("b")))


# ---------------------------------------------------------------------------
# Vectorized kernels (numpy) used by the execution engine
# ---------------------------------------------------------------------------


def _check_int_add_overflow(a: np.ndarray, b: np.ndarray, r: np.ndarray, op: str):
    bad = ((a > 0) & (b > 0) & (r < 0)) | ((a < 0) & (b < 0) & (r >= 0))
    if bad.any():
        i = int(np.argmax(bad))
        raise ArithmeticOverflowError(op, int(a[i]), int(b[i]))


def vadd(sr: SemiringTag, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if sr is SemiringTag.BOOL:
        return np.logical_or(a, b)
    if sr is SemiringTag.INT:
        with np.errstate(over="ignore"):
            r = a + b
        _check_int_add_overflow(a, b, r, "add")
        return r
    if sr is SemiringTag.REAL:
        return a + b
    return np.fmin(a, b)


def vmul(sr: SemiringTag, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if sr is SemiringTag.BOOL:
        return np.logical_and(a, b)
    if sr is SemiringTag.INT:
        with np.errstate(over="ignore"):
            r = a * b
        # Pre-screen with float magnitudes, confirm suspects exactly.
        suspect = np.abs(a.astype(np.float64)) * np.abs(b.astype(np.float64)) > 2.0**62
        if suspect.any():
            for i in np.nonzero(suspect)[0]:
                exact = int(a[i]) * int(b[i])
                if not (INT64_MIN <= exact <= INT64_MAX):
                    raise ArithmeticOverflowError("mul", int(a[i]), int(b[i]))
        return r
    # the additive identity absorbs, even against inf/NaN (see mul_payload)
    if sr is SemiringTag.REAL:
        with np.errstate(invalid="ignore"):
            return np.where((a == 0.0) | (b == 0.0), 0.0, a * b)
    with np.errstate(invalid="ignore"):
        return np.where((a == np.inf) | (b == np.inf), np.inf, a + b)


def vadd_reduceat(sr: SemiringTag, vals: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Fold semiring addition over contiguous segments of `vals`.

    Segments are folded left to right in array order, which callers fix by
    sorting; that keeps REAL sums bitwise reproducible.
    """
    if len(vals) == 0:
        return vals[:0]
    if sr is SemiringTag.BOOL:
        return np.logical_or.reduceat(vals, starts)
    if sr is SemiringTag.INT:
        r = np.add.reduceat(vals, starts)
        # Overflow screen: a segment of n values each |v| <= m sums within n*m.
        seg_sizes = np.diff(np.append(starts, len(vals)))
        max_abs = float(np.max(np.abs(vals))) if len(vals) else 0.0
        if max_abs * float(np.max(seg_sizes)) > 2.0**62:
            ends = np.append(starts[1:], len(vals))
            for s, e in zip(starts, ends):
                exact = 0
                for v in vals[s:e]:
                    exact += int(v)
                if not (INT64_MIN <= exact <= INT64_MAX):
                    raise ArithmeticOverflowError("add", "segment-sum", exact)
        return r
    if sr is SemiringTag.REAL:
        return np.add.reduceat(vals, starts)
    return np.fmin.reduceat(vals, starts)


def vcast(target: SemiringTag, source: SemiringTag, v: np.ndarray) -> np.ndarray:
    if source is target:
        return v
    if source is _B:
        out = np.full(v.shape, ZERO_PAYLOAD[target], dtype=NUMPY_DTYPE[target])
        out[v] = ONE_PAYLOAD[target]
        return out
    if (source, target) == (_I, _R):
        return v.astype(np.float64)
    if (source, target) == (_R, _T):
        return np.where(v == 0.0, np.inf, v)
    if (source, target) == (_T, _R):
        return np.where(v == np.inf, 0.0, v)
    if (source, target) == (_I, _B):
        return v != 0
    if (source, target) == (_R, _B):
        return v != 0.0
    raise EngineError(f"unsupported cast {source} -> {target}")


class DivisionFlags:
    """Mutable counter for float divisions by zero (flagged, not fatal)."""

    def __init__(self):
        self.division_by_zero = 0


def _veval_bin(op, sr, a, b, flags: DivisionFlags | None):
    if op == "+":
        return vadd(sr, a, b)
    if op == "*":
        return vmul(sr, a, b)
    if op == "-":
        if sr is SemiringTag.INT:
            with np.errstate(over="ignore"):
                r = a - b
            bad = ((a >= 0) & (b < 0) & (r < 0)) | ((a < 0) & (b > 0) & (r >= 0))
            if bad.any():
                i = int(np.argmax(bad))
                raise ArithmeticOverflowError("sub", int(a[i]), int(b[i]))
            return r
        if sr is SemiringTag.REAL:
            return a - b
        raise EngineError(f"subtraction is not defined on {sr}")
    if op == "/":
        if sr is SemiringTag.REAL:
            zeros = int(np.count_nonzero(b == 0.0))
            if zeros and flags is not None:
                flags.division_by_zero += zeros
            with np.errstate(divide="ignore", invalid="ignore"):
                return a / b
        if sr is SemiringTag.INT:
            if np.any(b == 0):
                raise EngineError("integer division by zero")
            return a // b
        raise EngineError(f"division is not defined on {sr}")
    if op == "=":
        eq = a == b
        out = np.full(eq.shape, ZERO_PAYLOAD[sr], dtype=NUMPY_DTYPE[sr])
        out[eq] = ONE_PAYLOAD[sr]
        return out
    raise EngineError(f"unknown scalar operator {op!r}")


def veval_expr(
    expr: ScalarExpr,
    env: dict[str, np.ndarray],
    tags: dict[str, SemiringTag],
    flags: DivisionFlags | None = None,
) -> tuple[np.ndarray, SemiringTag]:
    """Vectorized twin of `_eval_expr`: evaluates over parallel arrays."""
    if isinstance(expr, SVar):
        return env[expr.name], tags[expr.name]
    if isinstance(expr, SLit):
        n = len(next(iter(env.values()))) if env else 0
        return (
            np.full(n, expr.value, dtype=NUMPY_DTYPE[expr.tag]),
            expr.tag,
        )
    if isinstance(expr, SCast):
        v, src = veval_expr(expr.arg, env, tags, flags)
        return vcast(expr.target, src, v), expr.target
    if isinstance(expr, SSelect):
        c, csr = veval_expr(expr.cond, env, tags, flags)
        t, tsr = veval_expr(expr.then, env, tags, flags)
        o, _ = veval_expr(expr.other, env, tags, flags)
        nonzero = c != ZERO_PAYLOAD[csr] if csr is not SemiringTag.BOOL else c
        return np.where(nonzero, t, o), tsr
    a, asr = veval_expr(expr.lhs, env, tags, flags)
    b, bsr = veval_expr(expr.rhs, env, tags, flags)
    if asr is not bsr:
        raise EngineError(f"operands of {expr.op!r} disagree: {asr} vs {bsr}")
    return _veval_bin(expr.op, asr, a, b, flags), asr
