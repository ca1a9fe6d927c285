"""Operators over guest values.

Plain operators follow linear-algebra rules on arrays: ``*`` on matrices
is a matrix product and ``+``/``-`` need equal shapes. Dot operators
broadcast element by element. Any operand cell that is ``missing`` makes
the result cell ``missing``; comparisons included.
"""

from __future__ import annotations

import math
import operator
from typing import Optional, Tuple

import numpy as np

from ..errors import GuestError
from .values import (
    MISSING,
    GuestBase,
    GuestColumnType,
    GuestMatrix,
    GuestRange,
    GuestVector,
    GuestView,
    type_name,
)

ARITH = {"+", "-", "*", "/", "^"}
COMPARE = {"==", "!=", "<", ">", "<=", ">="}

_PY_COMPARE = {
    "==": operator.eq, "!=": operator.ne, "<": operator.lt,
    ">": operator.gt, "<=": operator.le, ">=": operator.ge,
}
_NP_OPS = {
    "+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide, "^": np.power,
    "==": np.equal, "!=": np.not_equal, "<": np.less, ">": np.greater,
    "<=": np.less_equal, ">=": np.greater_equal,
}


def method_error(op: str, a, b) -> GuestError:
    return GuestError(f"MethodError: no method matching {op}(::{type_name(a)}, ::{type_name(b)})")


def _float_div(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _pow(a, b):
    if type(a) is int and type(b) is int:
        if b < 0:
            if a in (1, -1):
                return a ** b
            raise GuestError(f"DomainError with {b}: cannot raise an integer to a negative power")
        return a ** b
    try:
        out = float(a) ** float(b)
    except ZeroDivisionError:
        return math.inf
    except OverflowError:
        return math.inf
    if isinstance(out, complex):
        raise GuestError(f"DomainError with {a}: exponentiation yielding a complex result")
    return out


def _num(x):
    """Python number for numpy scalars and bools used arithmetically."""
    if isinstance(x, np.generic):
        return x.item()
    return x


def scalar_binop(op: str, a, b):
    a, b = _num(a), _num(b)
    if a is MISSING or b is MISSING:
        if op in ARITH or op in COMPARE:
            return MISSING
    ta, tb = type(a), type(b)
    if ta is str or tb is str:
        if op == "*" and ta is str and tb is str:
            return a + b
        if op in ("==", "!="):
            return (a == b) if op == "==" else (a != b)
        if op in ("<", ">", "<=", ">=") and ta is str and tb is str:
            return _PY_COMPARE[op](a, b)
        raise method_error(op, a, b)
    if ta not in (int, float, bool) or tb not in (int, float, bool):
        if op in ("==", "!="):
            eq = values_equal(a, b)
            return eq if op == "==" else not eq
        raise method_error(op, a, b)
    if op in COMPARE:
        return _PY_COMPARE[op](a, b)
    if ta is bool:
        a = int(a)
    if tb is bool:
        b = int(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _float_div(float(a), float(b))
    if op == "^":
        return _pow(a, b)
    raise GuestError(f"unknown operator {op}")


def values_equal(a, b) -> bool:
    if isinstance(a, GuestVector) and isinstance(b, GuestVector):
        if len(a) != len(b):
            return False
        return a.values() == b.values()
    if isinstance(a, GuestMatrix) and isinstance(b, GuestMatrix):
        return a.shape == b.shape and bool(np.array_equal(a.data, b.data))
    if isinstance(a, GuestRange) and isinstance(b, GuestRange):
        return list(a) == list(b)
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(
            scalar_binop("==", x, y) is True if not isinstance(x, (tuple, GuestVector)) else values_equal(x, y)
            for x, y in zip(a, b)
        )
    return a is b or (type(a) is type(b) and a == b)


# -- array conversion -------------------------------------------------------


def as_array(x) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """(data, missing mask) for broadcasting; categorical cells become labels."""
    if isinstance(x, GuestVector):
        data = x.labels() if x.levels is not None else x.data
        return data, x.mask
    if isinstance(x, GuestMatrix):
        return x.data, None
    if isinstance(x, GuestView):
        return x.materialize().data, None
    if isinstance(x, GuestRange):
        return x.to_array(), None
    if x is MISSING:
        return np.zeros((), dtype=np.float64), np.ones((), dtype=bool)
    x = _num(x)
    if type(x) is str:
        return np.array(x, dtype=object), None
    if type(x) in (int, float, bool):
        return np.array(x), None
    raise GuestError(f"MethodError: cannot broadcast over {type_name(x)}")


def is_array(x) -> bool:
    return isinstance(x, (GuestVector, GuestMatrix, GuestView, GuestRange))


def _result_dtype(op: str, da: np.dtype, db: np.dtype) -> Optional[np.dtype]:
    if op in COMPARE:
        return None
    if da == object or db == object:
        return np.dtype(object)
    ints = (da.kind in "biu") and (db.kind in "biu")
    if op == "/" and ints:
        return np.dtype(np.float64)
    if ints:
        return np.dtype(np.int64)
    narrow = {np.dtype(np.float32)}
    if {da, db} <= narrow or (da in narrow and db.kind in "biu") or (db in narrow and da.kind in "biu"):
        return np.dtype(np.float32)
    return np.dtype(np.float64)


def _scalar_dtype(x) -> np.dtype:
    """Dtype a bare scalar contributes; Python floats count as Float64."""
    x = _num(x)
    if type(x) is bool:
        return np.dtype(np.bool_)
    if type(x) is int:
        return np.dtype(np.int64)
    if type(x) is float:
        return np.dtype(np.float64)
    return np.dtype(object)


def broadcast_binop(op: str, a, b):
    """Elementwise ``a .op b``."""
    if not is_array(a) and not is_array(b):
        return scalar_binop(op, a, b)
    da, ma = as_array(a)
    db, mb = as_array(b)
    ta = da.dtype if da.ndim else _scalar_dtype(a)
    tb = db.dtype if db.ndim else _scalar_dtype(b)
    # vectors broadcast as columns against matrices
    if da.ndim == 1 and db.ndim == 2:
        da = da.reshape(-1, 1)
        ma = None if ma is None else ma.reshape(-1, 1)
    elif db.ndim == 1 and da.ndim == 2:
        db = db.reshape(-1, 1)
        mb = None if mb is None else mb.reshape(-1, 1)
    try:
        shape = np.broadcast_shapes(da.shape, db.shape)
    except ValueError:
        raise GuestError(
            f"DimensionMismatch: arrays could not be broadcast to a common size; "
            f"got dimensions {_dims(da.shape)} and {_dims(db.shape)}"
        ) from None
    mask = None
    if ma is not None or mb is not None:
        mask = np.zeros(shape, dtype=bool)
        if ma is not None:
            mask |= ma
        if mb is not None:
            mask |= mb
        if not mask.any():
            mask = None
    out_dtype = _result_dtype(op, ta, tb)
    if ta == object or tb == object:
        result = _object_op(op, da, db, shape, mask)
    else:
        result = _numeric_op(op, da, db, ta, tb, out_dtype, mask)
    return _wrap(result, mask, a, b)


def _dims(shape) -> str:
    return "(" + ", ".join(str(s) for s in shape) + ("," if len(shape) == 1 else "") + ")"


def _numeric_op(op, da, db, ta, tb, out_dtype, mask):
    if op == "^" and out_dtype == np.int64:
        neg = np.asarray(db) < 0
        if mask is not None:
            neg = neg & ~np.broadcast_to(mask, np.broadcast_shapes(np.shape(da), np.shape(db)))
        if np.any(neg):
            raise GuestError("DomainError: cannot raise an integer to a negative power")
    fn = _NP_OPS[op]
    with np.errstate(all="ignore"):
        if out_dtype is None:
            result = fn(da, db)
        else:
            result = fn(da.astype(out_dtype, copy=False), db.astype(out_dtype, copy=False))
    if mask is not None:
        result = np.where(mask, np.zeros((), dtype=result.dtype), result)
    return result


def _object_op(op, da, db, shape, mask):
    fa = np.broadcast_to(da, shape)
    fb = np.broadcast_to(db, shape)
    out = np.empty(shape, dtype=object)
    flat_out = out.reshape(-1)
    flat_mask = None if mask is None else mask.reshape(-1)
    for n, (x, y) in enumerate(zip(fa.reshape(-1), fb.reshape(-1))):
        if flat_mask is not None and flat_mask[n]:
            flat_out[n] = False if op in COMPARE else ""
            continue
        flat_out[n] = scalar_binop(op, _num(x), _num(y))
    if op in COMPARE:
        return out.astype(bool)
    live = flat_out if flat_mask is None else flat_out[~flat_mask]
    kinds = {type(v) for v in live}
    if kinds <= {str}:
        return out
    try:
        return out.astype(np.float64) if float in kinds else out.astype(np.int64)
    except (TypeError, ValueError):
        return out


def _wrap(result: np.ndarray, mask, a, b):
    if result.ndim == 0:
        if mask is not None and bool(mask):
            return MISSING
        return result.item()
    if result.ndim == 2:
        if mask is not None:
            raise GuestError("matrices cannot hold missing values")
        return GuestMatrix(np.asfortranarray(result))
    base = _base_of(result.dtype)
    return GuestVector(result, GuestColumnType(base, mask is not None), mask)


def _base_of(dtype: np.dtype) -> GuestBase:
    if dtype == np.bool_:
        return GuestBase.BOOL
    if dtype == object:
        return GuestBase.STR
    if dtype.kind in "iu":
        return GuestBase.I64 if dtype.itemsize == 8 else {1: GuestBase.I8, 2: GuestBase.I16, 4: GuestBase.I32}[dtype.itemsize]
    if dtype == np.float32:
        return GuestBase.F32
    return GuestBase.F64


def make_vector(data: np.ndarray, mask: Optional[np.ndarray] = None) -> GuestVector:
    if mask is not None and not mask.any():
        mask = None
    return GuestVector(data, GuestColumnType(_base_of(data.dtype), mask is not None), mask)


# -- non-broadcast operators ------------------------------------------------


def binop(op: str, a, b):
    if not is_array(a) and not is_array(b):
        return scalar_binop(op, a, b)
    if op in ("==", "!="):
        eq = values_equal(_arr_value(a), _arr_value(b))
        return eq if op == "==" else not eq
    if op in ("+", "-"):
        if is_array(a) and is_array(b):
            sa, sb = _shape(a), _shape(b)
            if sa != sb:
                raise GuestError(
                    f"DimensionMismatch: dimensions must match: a has dims {_dims(sa)}, b has dims {_dims(sb)}"
                )
            return broadcast_binop(op, a, b)
        raise method_error(op, a, b)
    if op == "*":
        if not is_array(a) or not is_array(b):
            return broadcast_binop(op, a, b)
        return matmul(a, b)
    if op == "/" and is_array(a) and not is_array(b):
        return broadcast_binop(op, a, b)
    raise method_error(op, a, b)


def _arr_value(x):
    if isinstance(x, GuestView):
        return x.materialize()
    return x


def _shape(x) -> Tuple[int, ...]:
    if isinstance(x, GuestRange):
        return (len(x),)
    if isinstance(x, GuestVector):
        return (len(x),)
    return tuple(x.shape)


def matmul(a, b):
    da, ma = as_array(a)
    db, mb = as_array(b)
    if (ma is not None and ma.any()) or (mb is not None and mb.any()):
        raise GuestError("MethodError: matrix product of arrays containing missing values")
    if da.dtype == object or db.dtype == object:
        raise method_error("*", a, b)
    if da.ndim == 1 and db.ndim == 1:
        raise method_error("*", a, b)
    if da.ndim == 1:
        da = da.reshape(-1, 1)
    if da.shape[1] != db.shape[0]:
        raise GuestError(
            f"DimensionMismatch: matrix A has dimensions {_dims(da.shape)}, "
            f"matrix B has dimensions {_dims(db.shape)}"
        )
    out = np.asarray(da, dtype=np.float64) @ np.asarray(db, dtype=np.float64)
    if out.ndim == 1:
        return make_vector(out)
    return GuestMatrix(np.asfortranarray(out))


def unary(op: str, x):
    x = _num(x)
    if op == "!":
        if x is MISSING:
            return MISSING
        if type(x) is bool:
            return not x
        if isinstance(x, GuestVector) and x.ctype.base is GuestBase.BOOL:
            return GuestVector(~x.data, x.ctype, x.mask)
        raise GuestError(f"MethodError: no method matching !(::{type_name(x)})")
    if op == "+":
        if x is MISSING or type(x) in (int, float, bool) or is_array(x):
            return x
        raise GuestError(f"MethodError: no method matching +(::{type_name(x)})")
    if op == "-":
        if x is MISSING:
            return MISSING
        t = type(x)
        if t is int or t is float:
            return -x
        if t is bool:
            return -int(x)
        if is_array(x):
            return broadcast_binop("*", x, -1)
        raise GuestError(f"MethodError: no method matching -(::{type_name(x)})")
    raise GuestError(f"unknown unary operator {op}")


def transpose(x):
    if isinstance(x, GuestView):
        x = x.materialize()
    if isinstance(x, GuestMatrix):
        return GuestMatrix(np.asfortranarray(x.data.T))
    if isinstance(x, (GuestVector, GuestRange)):
        data, mask = as_array(x)
        if mask is not None and mask.any():
            raise GuestError("MethodError: cannot transpose a vector with missing values")
        if data.dtype == object:
            raise GuestError("MethodError: cannot transpose a vector of strings")
        return GuestMatrix(np.asfortranarray(np.asarray(data, dtype=np.float64).reshape(1, -1)))
    if type(_num(x)) in (int, float, bool):
        return x
    raise GuestError(f"MethodError: no method matching adjoint(::{type_name(x)})")


def truthy(x, what: str = "if") -> bool:
    if x is True or x is False:
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    if x is MISSING:
        raise GuestError("TypeError: non-boolean (Missing) used in boolean context")
    raise GuestError(f"TypeError: non-boolean ({type_name(x)}) used in boolean context")
