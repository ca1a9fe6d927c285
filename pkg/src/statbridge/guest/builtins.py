"""Core builtins of the guest language and the help lookup."""

from __future__ import annotations

import math
from typing import Dict

import numpy as np

from ..errors import GuestError
from . import ops
from .display import scalar_string, show
from .values import (
    MISSING,
    NOTHING,
    Builtin,
    GuestBase,
    GuestColumnType,
    GuestDataFrame,
    GuestMatrix,
    GuestModule,
    GuestRange,
    GuestType,
    GuestVector,
    GuestView,
    is_number,
    type_name,
)

NO_DOC = "no documentation"

TYPE_NAMES = ("Bool", "Int8", "Int16", "Int32", "Int64", "Float32", "Float64", "String")


def _arity(*ns: int) -> frozenset:
    return frozenset(ns)


# -- output -----------------------------------------------------------------


def b_print(interp, *args):
    interp.write("".join(scalar_string(a) for a in args))
    return NOTHING


def b_println(interp, *args):
    interp.write("".join(scalar_string(a) for a in args) + "\n")
    return NOTHING


def b_display(interp, x):
    interp.write(show(x) + "\n")
    return NOTHING


def b_string(interp, *args):
    return "".join(scalar_string(a) for a in args)


def b_typeof(interp, x):
    return GuestType(type_name(x))


def b_exit(interp, *args):
    from .interp import ExitRequest

    code = args[0] if args else 0
    if type(code) is not int:
        raise GuestError("MethodError: exit code must be an integer")
    raise ExitRequest(code)


# -- shapes -----------------------------------------------------------------


def b_length(interp, x):
    if isinstance(x, (GuestVector, GuestRange, tuple, str)):
        return len(x)
    if isinstance(x, (GuestMatrix, GuestView)):
        r, c = x.shape
        return r * c
    if is_number(x) or x is MISSING:
        return 1
    raise GuestError(f"MethodError: no method matching length(::{type_name(x)})")


def b_size(interp, x, *dim):
    if isinstance(x, (GuestVector, GuestRange)):
        shape = (len(x),)
    elif isinstance(x, (GuestMatrix, GuestView)):
        shape = tuple(int(s) for s in x.shape)
    elif isinstance(x, GuestDataFrame):
        shape = (x.nrow, x.ncol)
    elif isinstance(x, tuple):
        shape = (len(x),)
    elif is_number(x):
        shape = ()
    else:
        raise GuestError(f"MethodError: no method matching size(::{type_name(x)})")
    if dim:
        d = dim[0]
        if type(d) is not int or d < 1:
            raise GuestError(f"ArgumentError: dimension out of range: {scalar_string(d)}")
        return shape[d - 1] if d <= len(shape) else 1
    return shape


def b_nrow(interp, df):
    if isinstance(df, GuestDataFrame):
        return df.nrow
    if isinstance(df, (GuestMatrix, GuestView)):
        return int(df.shape[0])
    raise GuestError(f"MethodError: no method matching nrow(::{type_name(df)})")


def b_ncol(interp, df):
    if isinstance(df, GuestDataFrame):
        return df.ncol
    if isinstance(df, (GuestMatrix, GuestView)):
        return int(df.shape[1])
    raise GuestError(f"MethodError: no method matching ncol(::{type_name(df)})")


def b_names(interp, df):
    if not isinstance(df, GuestDataFrame):
        raise GuestError(f"MethodError: no method matching names(::{type_name(df)})")
    return GuestVector(np.array(df.names(), dtype=object), GuestColumnType(GuestBase.STR))


# -- constructors -----------------------------------------------------------


def _dims(args, what: str):
    for a in args:
        if type(a) is not int or a < 0:
            raise GuestError(f"ArgumentError: {what} dimensions must be nonnegative integers, got {scalar_string(a)}")
    return args


def _filled(value: float, args):
    dims = _dims(args, "array")
    if len(dims) == 1:
        return GuestVector(np.full(dims[0], value, dtype=np.float64), GuestColumnType(GuestBase.F64))
    if len(dims) == 2:
        return GuestMatrix(np.full(dims, value, dtype=np.float64, order="F"))
    raise GuestError("ArgumentError: only vectors and matrices are supported")


def b_zeros(interp, *args):
    return _filled(0.0, args)


def b_ones(interp, *args):
    return _filled(1.0, args)


def b_collect(interp, x):
    if isinstance(x, GuestRange):
        return ops.make_vector(x.to_array())
    if isinstance(x, GuestVector):
        return x.copy()
    if isinstance(x, GuestView):
        return x.materialize()
    if isinstance(x, GuestMatrix):
        return GuestMatrix(x.data.copy(order="F"))
    if isinstance(x, tuple):
        from .interp import vector_from_values

        return vector_from_values(list(x))
    raise GuestError(f"MethodError: no method matching collect(::{type_name(x)})")


def b_matrix_literal(interp, *rows):
    """Backs ``[a b; c d]`` literals."""
    cells = []
    for row in rows:
        vals = row.values() if isinstance(row, GuestVector) else [row]
        for v in vals:
            if not is_number(v):
                raise GuestError(f"ArgumentError: matrix literals hold numbers only, got {type_name(v)}")
        cells.append([float(v) for v in vals])
    return GuestMatrix(np.array(cells, dtype=np.float64, order="F"))


def b_rand(interp, *args):
    rng = interp.rng
    if args and isinstance(args[0], GuestType):
        kind, dims = args[0].name, _dims(args[1:], "rand")
        if kind != "Bool":
            raise GuestError(f"MethodError: rand of type {kind} is not supported")
        if not dims:
            return bool(rng.integers(0, 2))
        if len(dims) == 1:
            return GuestVector(rng.integers(0, 2, size=dims[0]).astype(np.bool_), GuestColumnType(GuestBase.BOOL))
        raise GuestError("ArgumentError: rand(Bool, n) takes a single length")
    dims = _dims(args, "rand")
    if not dims:
        return float(rng.random())
    if len(dims) == 1:
        return GuestVector(rng.random(dims[0]), GuestColumnType(GuestBase.F64))
    if len(dims) == 2:
        return GuestMatrix(np.asfortranarray(rng.random(dims)))
    raise GuestError("ArgumentError: only vectors and matrices are supported")


def b_seed(interp, seed):
    if type(seed) is not int:
        raise GuestError("MethodError: seed! takes an integer")
    interp.rng = np.random.default_rng(seed)
    return NOTHING


# -- reductions -------------------------------------------------------------


def _cells(x):
    """Numeric cells plus missing flag for reductions."""
    data, mask = ops.as_array(x)
    if data.dtype == object:
        raise GuestError(f"MethodError: cannot reduce {type_name(x)} of strings")
    has_missing = mask is not None and bool(mask.any())
    return data, has_missing


def b_sum(interp, x):
    if is_number(x):
        return x
    if isinstance(x, tuple):
        total = 0
        for v in x:
            total = ops.scalar_binop("+", total, v)
        return total
    data, has_missing = _cells(x)
    if has_missing:
        return MISSING
    if data.dtype == np.bool_ or data.dtype.kind in "iu":
        return int(data.astype(np.int64).sum())
    return float(data.astype(np.float64).sum())


def _extreme(x, fn, name: str):
    data, has_missing = _cells(x)
    if has_missing:
        return MISSING
    if data.size == 0:
        raise GuestError(f"ArgumentError: reducing over an empty collection is not allowed ({name})")
    out = fn(data)
    return out.item()


def b_maximum(interp, x):
    return _extreme(x, np.max, "maximum")


def b_minimum(interp, x):
    return _extreme(x, np.min, "minimum")


def b_max(interp, a, b):
    if ops.scalar_binop("<", a, b) is MISSING:
        return MISSING
    return b if ops.scalar_binop("<", a, b) else a


def b_min(interp, a, b):
    if ops.scalar_binop("<", a, b) is MISSING:
        return MISSING
    return b if ops.scalar_binop("<", b, a) else a


def b_ismissing(interp, x):
    return x is MISSING


# -- scalar math ------------------------------------------------------------


def _unary_math(name: str, fn, domain=None):
    def run(interp, x):
        if x is MISSING:
            return MISSING
        if ops.is_array(x):
            raise GuestError(f"MethodError: no method matching {name}(::{type_name(x)}); use {name}.(x)")
        if not is_number(x):
            raise GuestError(f"MethodError: no method matching {name}(::{type_name(x)})")
        v = float(x)
        if domain is not None and not domain(v):
            raise GuestError(f"DomainError with {scalar_string(x)}: {name} is undefined there")
        return fn(v)

    return run


def b_abs(interp, x):
    if x is MISSING:
        return MISSING
    if type(x) is int or type(x) is float:
        return abs(x)
    if type(x) is bool:
        return int(x)
    raise GuestError(f"MethodError: no method matching abs(::{type_name(x)})")


def _rounding(name: str, fn):
    def run(interp, x):
        if x is MISSING:
            return MISSING
        if type(x) is int:
            return x
        if type(x) is float:
            if not math.isfinite(x):
                return x
            return float(fn(x))
        raise GuestError(f"MethodError: no method matching {name}(::{type_name(x)})")

    return run


def convert(tname: str, x):
    """``Float64(x)``, ``Int64(x)`` and friends."""
    if x is MISSING:
        raise GuestError(f"MethodError: Cannot `convert` an object of type Missing to an object of type {tname}")
    if tname == "String":
        if type(x) is str:
            return x
        raise GuestError(f"MethodError: no method matching String(::{type_name(x)})")
    if not is_number(x):
        raise GuestError(f"MethodError: Cannot `convert` an object of type {type_name(x)} to an object of type {tname}")
    if tname in ("Float64", "Float32"):
        v = float(x)
        return float(np.float32(v)) if tname == "Float32" else v
    if tname == "Bool":
        if x in (0, 1):
            return bool(x)
        raise GuestError(f"InexactError: Bool({scalar_string(x)})")
    v = float(x)
    if not v.is_integer():
        raise GuestError(f"InexactError: {tname}({scalar_string(x)})")
    info = np.iinfo(GuestBase(tname).dtype)
    if not info.min <= v <= info.max:
        raise GuestError(f"InexactError: trunc({tname}, {scalar_string(x)})")
    return int(v)


def b_nthreads(interp):
    return int(interp.nthreads)


def make_builtins() -> Dict[str, object]:
    from .hostapi import host_builtins

    table: Dict[str, object] = {}

    def add(name, fn, arities=None, doc=""):
        table[name] = Builtin(name, fn, arities, doc)

    add("print", b_print)
    add("println", b_println)
    add("display", b_display, _arity(1))
    add("string", b_string)
    add("typeof", b_typeof, _arity(1))
    add("exit", b_exit, _arity(0, 1))
    add("length", b_length, _arity(1))
    add("size", b_size, _arity(1, 2))
    add("nrow", b_nrow, _arity(1))
    add("ncol", b_ncol, _arity(1))
    add("names", b_names, _arity(1))
    add("zeros", b_zeros, _arity(1, 2))
    add("ones", b_ones, _arity(1, 2))
    add("collect", b_collect, _arity(1))
    add("rand", b_rand, _arity(0, 1, 2, 3))
    add("seed!", b_seed, _arity(1))
    add("sum", b_sum, _arity(1))
    add("maximum", b_maximum, _arity(1))
    add("minimum", b_minimum, _arity(1))
    add("max", b_max, _arity(2))
    add("min", b_min, _arity(2))
    add("ismissing", b_ismissing, _arity(1))
    add("sqrt", _unary_math("sqrt", math.sqrt, lambda v: v >= 0), _arity(1))
    add("exp", _unary_math("exp", lambda v: math.exp(v) if v < 709.7 else math.inf), _arity(1))
    add("log", _unary_math("log", math.log, lambda v: v > 0), _arity(1))
    add("abs", b_abs, _arity(1))
    add("round", _rounding("round", lambda v: np.round(v)), _arity(1))
    add("floor", _rounding("floor", math.floor), _arity(1))
    add("ceil", _rounding("ceil", math.ceil), _arity(1))
    add("__matrix_literal__", b_matrix_literal)
    for tname in TYPE_NAMES:
        table[tname] = GuestType(tname)
    table["missing"] = MISSING
    table["nothing"] = NOTHING
    table["Inf"] = math.inf
    table["NaN"] = math.nan
    table["pi"] = math.pi
    table["Threads"] = GuestModule("Threads", {"nthreads": Builtin("nthreads", b_nthreads, _arity(0))})
    table.update(host_builtins())
    return table


def help_doc(name: str, table: Dict[str, object] | None = None) -> str:
    """Docstring of a bridge builtin, or ``"no documentation"``."""
    if table is None:
        table = make_builtins()
    b = table.get(name.strip())
    if isinstance(b, Builtin) and b.doc:
        return b.doc
    return NO_DOC
