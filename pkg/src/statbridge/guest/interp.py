"""Closure compiler and evaluator for the guest language.

Each syntax node compiles once into a Python closure taking a runtime
environment. Name resolution happens at compile time: every name is
either a global or a slot in one of the enclosing local frames, found by
a fixed depth. Loops and function calls get fresh frames; a loop makes a
new frame on every iteration, so its locals never leak out.

Scoping follows the hard-scope rule by default: an assignment inside a
loop body creates a loop-local name unless the name is already local to
an enclosing function or loop. Assignments flagged by
:func:`~statbridge.guest.softscope.softscope_transform` rebind globals
instead.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from ..errors import GuestError
from . import ast as A
from . import ops
from .display import scalar_string
from .parser import parse
from .softscope import softscope_transform
from .values import (
    COLON,
    MISSING,
    NOTHING,
    Builtin,
    GuestBase,
    GuestColumnType,
    GuestDataFrame,
    GuestFunction,
    GuestMatrix,
    GuestModule,
    GuestRange,
    GuestType,
    GuestVector,
    GuestView,
    is_number,
    type_name,
)

MAX_CALL_DEPTH = 400


class ScopingMode(enum.Enum):
    STRICT = "strict"
    SOFT = "soft"


class _Undef:
    def __repr__(self) -> str:
        return "#undef"


UNDEF = _Undef()


class Env:
    __slots__ = ("vals", "parent")

    def __init__(self, vals: list, parent: Optional[Env]) -> None:
        self.vals = vals
        self.parent = parent


class ReturnSignal(Exception):
    def __init__(self, value) -> None:
        self.value = value


class BreakSignal(Exception):
    pass


class ContinueSignal(Exception):
    pass


class ExitRequest(Exception):
    """Raised by ``exit()``; the REPL treats it as end of session."""

    def __init__(self, code: int = 0) -> None:
        super().__init__(code)
        self.code = code


def undef_error(name: str) -> GuestError:
    return GuestError(f"UndefVarError: {name} not defined")


# -- compile-time scopes ----------------------------------------------------


class CScope:
    def __init__(self, kind: str, parent: Optional[CScope], names: Iterable[str] = ()) -> None:
        self.kind = kind  # "top", "function" or "loop"
        self.parent = parent
        self.slots: Dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        if name not in self.slots:
            self.slots[name] = len(self.slots)
        return self.slots[name]

    def resolve(self, name: str) -> Optional[Tuple[int, int]]:
        """(depth, slot) of a local binding, or None for a global."""
        depth, s = 0, self
        while s is not None and s.kind != "top":
            if name in s.slots:
                return depth, s.slots[name]
            if s.kind == "function":
                return None
            depth += 1
            s = s.parent
        return None


def _target_names(target: A.Node) -> List[str]:
    if isinstance(target, A.Name):
        return [target.id]
    if isinstance(target, A.TupleExpr):
        return [e.id for e in target.elts if isinstance(e, A.Name)]
    return []


def direct_assignments(stmts: List[A.Node], skip_rebind: bool = True) -> List[str]:
    """Names bound by statements of this scope, looking through if/begin only."""
    out: List[str] = []

    def visit(node: A.Node) -> None:
        if isinstance(node, A.Assign):
            for n in _target_names(node.target):
                if not (skip_rebind and n in node.rebind_global):
                    out.append(n)
            if isinstance(node.value, A.Assign):
                visit(node.value)
        elif isinstance(node, A.FunctionDef):
            out.append(node.name)
        elif isinstance(node, A.If):
            for _, body in node.branches:
                for s in body.stmts:
                    visit(s)
            if node.orelse is not None:
                for s in node.orelse.stmts:
                    visit(s)
        elif isinstance(node, A.BeginBlock):
            for s in node.body.stmts:
                visit(s)

    for s in stmts:
        visit(s)
    return out


def _has_loop_control(stmts: List[A.Node]) -> bool:
    def visit(node: A.Node) -> bool:
        if isinstance(node, (A.Break, A.Continue)):
            return True
        if isinstance(node, (A.For, A.While, A.FunctionDef)):
            return False
        return any(visit(c) for c in A.children(node))

    return any(visit(s) for s in stmts)


# -- index helpers ----------------------------------------------------------


def _bounds_error(obj, idx) -> GuestError:
    shape = "×".join(str(s) for s in _shape_of(obj))
    what = f"{shape} {type_name(obj)}" if not isinstance(obj, GuestVector) else f"{len(obj)}-element {type_name(obj)}"
    return GuestError(f"BoundsError: attempt to access {what} at index [{idx}]")


def _shape_of(obj) -> Tuple[int, ...]:
    if isinstance(obj, (GuestVector, GuestRange)):
        return (len(obj),)
    if isinstance(obj, (GuestMatrix, GuestView)):
        return tuple(obj.shape)
    if isinstance(obj, GuestDataFrame):
        return (obj.nrow, obj.ncol)
    if isinstance(obj, (tuple, str)):
        return (len(obj),)
    return ()


def lastindex(obj, dim: int, ndims: int) -> int:
    shape = _shape_of(obj)
    if not shape:
        raise GuestError(f"MethodError: no method matching lastindex(::{type_name(obj)})")
    if ndims == 1:
        return int(np.prod(shape))
    if dim >= len(shape):
        return 1
    return int(shape[dim])


def positions(idx, n: int, obj=None):
    """Convert a 1-based guest index into an int or a 0-based position array."""
    t = type(idx)
    if t is int:
        if not 1 <= idx <= n:
            raise _bounds_error(obj, idx)
        return idx - 1
    if idx is COLON:
        return np.arange(n)
    if t is bool or idx is MISSING:
        raise GuestError(f"ArgumentError: invalid index: {scalar_string(idx)} of type {type_name(idx)}")
    if isinstance(idx, np.integer):
        return positions(int(idx), n, obj)
    if t is float:
        if idx.is_integer():
            return positions(int(idx), n, obj)
        raise GuestError(f"ArgumentError: invalid index: {scalar_string(idx)} of type Float64")
    if isinstance(idx, GuestRange):
        arr = idx.to_array()
    elif isinstance(idx, GuestVector):
        if idx.ctype.base is GuestBase.BOOL:
            if len(idx) != n:
                raise GuestError(
                    f"BoundsError: attempt to access {n}-element array at index [{len(idx)}-element Bool mask]"
                )
            sel = idx.data.astype(bool)
            if idx.mask is not None:
                sel = sel & ~idx.mask
            return np.flatnonzero(sel)
        if idx.has_missing():
            raise GuestError("ArgumentError: unable to check bounds for indices of type Missing")
        if idx.data.dtype.kind not in "iu":
            raise GuestError(f"ArgumentError: invalid index of type {type_name(idx)}")
        arr = idx.data.astype(np.int64)
    else:
        raise GuestError(f"ArgumentError: invalid index of type {type_name(idx)}")
    if arr.size and (arr.min() < 1 or arr.max() > n):
        bad = arr[(arr < 1) | (arr > n)][0]
        raise _bounds_error(obj, int(bad))
    return arr - 1


def index_get(obj, idxs: list):
    if isinstance(obj, GuestVector):
        if len(idxs) != 1:
            if len(idxs) == 2 and idxs[1] == 1:
                idxs = idxs[:1]
            else:
                raise GuestError("BoundsError: vectors take a single index")
        p = positions(idxs[0], len(obj), obj)
        if isinstance(p, int):
            return obj.element(p)
        return obj.take(p)
    if isinstance(obj, GuestView):
        if len(idxs) == 2 and type(idxs[0]) is int and type(idxs[1]) is int:
            r, c = obj.shape
            if not (1 <= idxs[0] <= r and 1 <= idxs[1] <= c):
                raise _bounds_error(obj, f"{idxs[0]}, {idxs[1]}")
            return obj.get(idxs[0], idxs[1])
        return index_get(obj.materialize(), idxs)
    if isinstance(obj, GuestMatrix):
        data = obj.data
        if len(idxs) == 1:
            flat = data.reshape(-1, order="F")
            p = positions(idxs[0], flat.size, obj)
            if isinstance(p, int):
                return flat.item(p)
            return ops.make_vector(flat[p].copy())
        if len(idxs) != 2:
            raise GuestError("BoundsError: matrices take one or two indices")
        r, c = data.shape
        pi = positions(idxs[0], r, obj)
        pj = positions(idxs[1], c, obj)
        if isinstance(pi, int) and isinstance(pj, int):
            return data.item(pi, pj)
        if isinstance(pi, int):
            return ops.make_vector(data[pi, pj].copy())
        if isinstance(pj, int):
            return ops.make_vector(data[pi, pj].copy())
        return GuestMatrix(np.asfortranarray(data[np.ix_(pi, pj)]))
    if isinstance(obj, GuestRange):
        if len(idxs) != 1:
            raise GuestError("BoundsError: ranges take a single index")
        p = positions(idxs[0], len(obj), obj)
        if isinstance(p, int):
            return obj.start + p * obj.step
        return ops.make_vector(obj.to_array()[p])
    if isinstance(obj, tuple):
        if len(idxs) != 1 or type(idxs[0]) is not int:
            raise GuestError("MethodError: tuples take a single integer index")
        return obj[positions(idxs[0], len(obj), obj)]
    if isinstance(obj, GuestDataFrame):
        if len(idxs) != 2:
            raise GuestError("ArgumentError: data frames take [rows, cols] indices")
        rows = positions(idxs[0], obj.nrow, obj)
        cols = idxs[1]
        if cols is COLON:
            names = obj.names()
        elif type(cols) is str:
            names = [cols]
        elif isinstance(cols, GuestVector) and cols.ctype.base is GuestBase.STR:
            names = [str(v) for v in cols.values()]
        else:
            raise GuestError("ArgumentError: column selector must be a name, a vector of names or :")
        if isinstance(rows, int):
            if type(cols) is str:
                return obj.column(cols).element(rows)
            rows = np.array([rows])
        return GuestDataFrame({n: obj.column(n).take(rows) for n in names})
    raise GuestError(f"MethodError: no method matching getindex(::{type_name(obj)})")


def _coerce_cells(vec: GuestVector, values, count: int):
    """Array of cells in ``vec``'s storage plus their missing flags."""
    data, mask = ops.as_array(values)
    data = np.broadcast_to(data, (count,)) if data.ndim == 0 else data.reshape(-1)
    if len(data) != count:
        raise GuestError(
            f"DimensionMismatch: tried to assign {len(data)} elements to {count} destinations"
        )
    miss = np.zeros(count, dtype=bool) if mask is None else np.broadcast_to(mask, (count,)).reshape(-1)
    if miss.any() and not vec.ctype.allows_missing:
        raise GuestError(
            f"MethodError: Cannot `convert` an object of type Missing to an object of type {vec.ctype.base.value}"
        )
    base = vec.ctype.base
    if vec.levels is not None:
        lookup = {lab: k + 1 for k, lab in enumerate(vec.levels)}
        cells = np.zeros(count, dtype=vec.data.dtype)
        for n in range(count):
            if miss[n]:
                continue
            v = data[n]
            if type(v) is not str or v not in lookup:
                raise GuestError(f"ArgumentError: cannot set a categorical value to {scalar_string(ops._num(v))}")
            cells[n] = lookup[v]
        return cells, miss
    if base is GuestBase.STR:
        if data.dtype != object or any(type(v) is not str for v, m in zip(data, miss) if not m):
            raise GuestError("MethodError: Cannot `convert` a number to an object of type String")
        return np.where(miss, "", data).astype(object), miss
    if data.dtype == object:
        raise GuestError(f"MethodError: Cannot `convert` an object of type String to an object of type {base.value}")
    target = vec.data.dtype
    live = data[~miss]
    if base.is_integer or base is GuestBase.BOOL:
        if live.dtype.kind == "f":
            bad = ~np.isfinite(live) | (live != np.round(live))
            if bad.any():
                raise GuestError(f"InexactError: {base.value}({scalar_string(float(live[bad][0]))})")
        info = np.iinfo(target) if base.is_integer else None
        if info is not None and live.size and (live.min() < info.min or live.max() > info.max):
            raise GuestError(f"InexactError: trunc({base.value}, {scalar_string(ops._num(live.max()))})")
        if base is GuestBase.BOOL and live.size and not np.isin(live, (0, 1)).all():
            raise GuestError("InexactError: Bool value out of range")
    with np.errstate(all="ignore"):
        cells = np.where(miss, 0, data).astype(target)
    return cells, miss


def vector_set(vec: GuestVector, idx, values) -> None:
    p = positions(idx, len(vec), vec)
    count = 1 if isinstance(p, int) else len(p)
    cells, miss = _coerce_cells(vec, values, count)
    if miss.any() and vec.mask is None:
        vec.mask = np.zeros(len(vec), dtype=bool)
    if isinstance(p, int):
        vec.data[p] = cells[0]
        if vec.mask is not None:
            vec.mask[p] = bool(miss[0])
    else:
        vec.data[p] = cells
        if vec.mask is not None:
            vec.mask[p] = miss


def _matrix_values(values, shape) -> np.ndarray:
    data, mask = ops.as_array(values)
    if mask is not None and mask.any():
        raise GuestError("MethodError: matrices cannot hold missing values")
    if data.dtype == object:
        raise GuestError("MethodError: Cannot `convert` an object of type String to an object of type Float64")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1 and len(shape) == 2 and data.size == shape[0] * shape[1]:
        data = data.reshape(shape, order="F")
    try:
        return np.broadcast_to(data, shape)
    except ValueError:
        raise GuestError(
            f"DimensionMismatch: tried to assign {data.size} elements to {int(np.prod(shape))} destinations"
        ) from None


def index_set(obj, idxs: list, values) -> None:
    if isinstance(obj, GuestVector):
        if len(idxs) != 1:
            raise GuestError("BoundsError: vectors take a single index")
        vector_set(obj, idxs[0], values)
        return
    if isinstance(obj, GuestView):
        r, c = obj.shape
        if len(idxs) != 2:
            raise GuestError("BoundsError: views take two indices")
        pi = positions(idxs[0], r, obj)
        pj = positions(idxs[1], c, obj)
        ri = [pi] if isinstance(pi, int) else list(pi)
        cj = [pj] if isinstance(pj, int) else list(pj)
        vals = _matrix_values(values, (len(ri), len(cj)))
        for b, jj in enumerate(cj):
            for a, ii in enumerate(ri):
                obj.set(int(ii) + 1, int(jj) + 1, float(vals[a, b]))
        return
    if isinstance(obj, GuestMatrix):
        data = obj.data
        if len(idxs) == 1:
            flat_n = data.size
            p = positions(idxs[0], flat_n, obj)
            sel = [p] if isinstance(p, int) else list(p)
            vals = _matrix_values(values, (len(sel),))
            for k, q in enumerate(sel):
                data[q % data.shape[0], q // data.shape[0]] = vals[k]
            return
        if len(idxs) != 2:
            raise GuestError("BoundsError: matrices take one or two indices")
        pi = positions(idxs[0], data.shape[0], obj)
        pj = positions(idxs[1], data.shape[1], obj)
        if isinstance(pi, int) and isinstance(pj, int):
            data[pi, pj] = _matrix_values(values, ())
            return
        ri = np.array([pi]) if isinstance(pi, int) else pi
        cj = np.array([pj]) if isinstance(pj, int) else pj
        data[np.ix_(ri, cj)] = _matrix_values(values, (len(ri), len(cj)))
        return
    raise GuestError(f"MethodError: no method matching setindex!(::{type_name(obj)})")


def inplace_assign(obj, values) -> None:
    """``obj .= values``: overwrite every cell of an existing array."""
    if isinstance(obj, GuestView):
        r, c = obj.shape
        obj.assign(_matrix_values(values, (r, c)))
    elif isinstance(obj, GuestVector):
        vector_set(obj, COLON, values)
    elif isinstance(obj, GuestMatrix):
        obj.data[:, :] = _matrix_values(values, obj.data.shape)
    else:
        raise GuestError(f"MethodError: cannot broadcast-assign into {type_name(obj)}")


def to_iterable(x):
    if isinstance(x, GuestRange):
        return x.py_range()
    if isinstance(x, GuestVector):
        return x.values()
    if isinstance(x, GuestMatrix):
        return x.data.reshape(-1, order="F").tolist()
    if isinstance(x, GuestView):
        return x.materialize().data.reshape(-1, order="F").tolist()
    if isinstance(x, tuple):
        return x
    if type(x) is str:
        return list(x)
    if is_number(x) or x is MISSING:
        return [x]
    raise GuestError(f"MethodError: no method matching iterate(::{type_name(x)})")


def vector_from_values(vals: list) -> GuestVector:
    """Build a vector from Python cell values, choosing the narrowest common type."""
    mask = np.array([v is MISSING for v in vals], dtype=bool)
    live = [v for v in vals if v is not MISSING]
    kinds = {type(ops._num(v)) for v in live}
    if not live:
        data = np.zeros(len(vals), dtype=np.float64)
        base = GuestBase.F64
    elif kinds <= {bool}:
        data = np.array([bool(v) if v is not MISSING else False for v in vals], dtype=np.bool_)
        base = GuestBase.BOOL
    elif kinds <= {int, bool}:
        data = np.array([int(v) if v is not MISSING else 0 for v in vals], dtype=np.int64)
        base = GuestBase.I64
    elif kinds <= {int, bool, float}:
        data = np.array([float(v) if v is not MISSING else 0.0 for v in vals], dtype=np.float64)
        base = GuestBase.F64
    elif kinds <= {str}:
        data = np.array([v if v is not MISSING else "" for v in vals], dtype=object)
        base = GuestBase.STR
    else:
        raise GuestError("MethodError: vectors of mixed or nested values are not supported")
    has_missing = bool(mask.any())
    return GuestVector(data, GuestColumnType(base, has_missing), mask if has_missing else None)


# -- the interpreter --------------------------------------------------------


@dataclass
class EvalResult:
    value: object
    stdout: str
    suppress: bool


class Interpreter:
    """Holds the global namespace and output capture for one guest session."""

    def __init__(
        self,
        gate=None,
        mode: ScopingMode = ScopingMode.SOFT,
        nthreads: int = 1,
        seed: Optional[int] = None,
        write: Optional[Callable[[str], None]] = None,
    ) -> None:
        from .builtins import make_builtins

        self.gate = gate
        self.mode = mode
        self.nthreads = nthreads
        self.rng = np.random.default_rng(seed)
        self.globals: Dict[str, object] = {}
        self.builtins: Dict[str, object] = make_builtins()
        self._out: io.StringIO = io.StringIO()
        self._write = write
        self._end_stack: List[object] = []
        self._end_ctx: List[Tuple[int, int]] = []
        self._program_globals: Set[str] = set()
        self.call_depth = 0

    # -- output ---------------------------------------------------------

    def write(self, text: str) -> None:
        self._out.write(text)
        if self._write is not None:
            self._write(text)

    # -- entry points ---------------------------------------------------

    def evaluate(self, program, mode: Optional[ScopingMode] = None) -> EvalResult:
        """Run a program (source text or parsed tree); return value and stdout."""
        if isinstance(program, str):
            program = parse(program)
        mode = mode or self.mode
        if mode is ScopingMode.SOFT:
            program = softscope_transform(program, self.bound_names())
        code = self.compile_program(program)
        self._out = io.StringIO()
        try:
            value = code(None)
        except ReturnSignal as r:
            value = r.value
        except (BreakSignal, ContinueSignal):
            raise GuestError("syntax: break or continue outside loop") from None
        except RecursionError:
            raise GuestError("StackOverflowError: nesting too deep") from None
        finally:
            self._end_stack.clear()
            self.call_depth = 0
        return EvalResult(value, self._out.getvalue(), program.suppress)

    def bound_names(self) -> Set[str]:
        return set(self.globals)

    # -- compilation ----------------------------------------------------

    def compile_program(self, program: A.Program):
        top = CScope("top", None)
        self._program_globals = set(self.globals) | set(direct_assignments(program.stmts, skip_rebind=False))
        fns = [self.stmt(s, top) for s in program.stmts]
        return _sequence(fns)

    def block(self, block: A.Block, cs: CScope, tail_return: bool = False):
        stmts = block.stmts
        fns = []
        for k, s in enumerate(stmts):
            if tail_return and k == len(stmts) - 1 and isinstance(s, A.Return):
                fns.append(self.expr(s.value, cs) if s.value is not None else _const(NOTHING))
            else:
                fns.append(self.stmt(s, cs))
        return _sequence(fns)

    def stmt(self, node: A.Node, cs: CScope):
        if isinstance(node, A.Assign):
            return self.assign(node, cs)
        if isinstance(node, A.For):
            return self.for_loop(node, cs)
        if isinstance(node, A.While):
            return self.while_loop(node, cs)
        if isinstance(node, A.If):
            return self.if_stmt(node, cs)
        if isinstance(node, A.BeginBlock):
            return self.block(node.body, cs)
        if isinstance(node, A.FunctionDef):
            return self.function_def(node, cs)
        if isinstance(node, A.Return):
            value = self.expr(node.value, cs) if node.value is not None else _const(NOTHING)

            def ret(env):
                raise ReturnSignal(value(env))

            return ret
        if isinstance(node, A.Break):
            if not self._in_loop(cs):
                raise GuestError("syntax: break or continue outside loop")

            def brk(env):
                raise BreakSignal()

            return brk
        if isinstance(node, A.Continue):
            if not self._in_loop(cs):
                raise GuestError("syntax: break or continue outside loop")

            def cont(env):
                raise ContinueSignal()

            return cont
        return self.expr(node, cs)

    @staticmethod
    def _in_loop(cs: CScope) -> bool:
        return cs.kind == "loop"

    # -- names ----------------------------------------------------------

    def name_getter(self, name: str, cs: CScope):
        loc = cs.resolve(name)
        if loc is None:
            g, b = self.globals, self.builtins

            def get_global(env):
                v = g.get(name, UNDEF)
                if v is UNDEF:
                    v = b.get(name, UNDEF)
                    if v is UNDEF:
                        raise undef_error(name)
                return v

            return get_global
        depth, slot = loc
        if depth == 0:

            def get0(env):
                v = env.vals[slot]
                if v is UNDEF:
                    raise undef_error(name)
                return v

            return get0
        if depth == 1:

            def get1(env):
                v = env.parent.vals[slot]
                if v is UNDEF:
                    raise undef_error(name)
                return v

            return get1

        def getn(env):
            for _ in range(depth):
                env = env.parent
            v = env.vals[slot]
            if v is UNDEF:
                raise undef_error(name)
            return v

        return getn

    def name_setter(self, name: str, cs: CScope, rebind_global: bool):
        loc = None if rebind_global else cs.resolve(name)
        if loc is None:
            if cs.kind != "top" and not rebind_global:
                # a local that was not pre-declared (should not happen)
                raise GuestError(f"internal: unresolved local {name}")
            g = self.globals

            def set_global(env, v):
                g[name] = v

            return set_global
        depth, slot = loc
        if depth == 0:

            def set0(env, v):
                env.vals[slot] = v

            return set0

        def setn(env, v):
            for _ in range(depth):
                env = env.parent
            env.vals[slot] = v

        return setn

    # -- blocks -----------------------------------------------------------

    def _loop_scope(self, var: Optional[str], body: A.Block, cs: CScope) -> CScope:
        names = [var] if var else []
        for n in direct_assignments(body.stmts):
            if n == var:
                continue
            if cs.resolve(n) is not None:
                continue  # already local in an enclosing scope
            names.append(n)
        return CScope("loop", cs, names)

    def for_loop(self, node: A.For, cs: CScope):
        ls = self._loop_scope(node.var, node.body, cs)
        it = self.expr(node.iter, cs)
        body = self.block(node.body, ls)
        nslots = len(ls.slots)
        controlled = _has_loop_control(node.body.stmts)
        template = [UNDEF] * nslots

        def run(env):
            seq = to_iterable(it(env))
            if controlled:
                for x in seq:
                    vals = template.copy()
                    vals[0] = x
                    try:
                        body(Env(vals, env))
                    except BreakSignal:
                        break
                    except ContinueSignal:
                        continue
            else:
                for x in seq:
                    vals = template.copy()
                    vals[0] = x
                    body(Env(vals, env))
            return NOTHING

        return run

    def while_loop(self, node: A.While, cs: CScope):
        ls = self._loop_scope(None, node.body, cs)
        cond = self.expr(node.cond, cs)
        body = self.block(node.body, ls)
        template = [UNDEF] * len(ls.slots)

        def run(env):
            while ops.truthy(cond(env)):
                try:
                    body(Env(template.copy(), env))
                except BreakSignal:
                    break
                except ContinueSignal:
                    continue
            return NOTHING

        return run

    def if_stmt(self, node: A.If, cs: CScope):
        branches = [(self.expr(c, cs), self.block(b, cs)) for c, b in node.branches]
        orelse = self.block(node.orelse, cs) if node.orelse is not None else _const(NOTHING)

        def run(env):
            for cond, body in branches:
                if ops.truthy(cond(env)):
                    return body(env)
            return orelse(env)

        return run

    def function_def(self, node: A.FunctionDef, cs: CScope):
        fs = CScope("function", cs, node.params)
        for n in direct_assignments(node.body.stmts, skip_rebind=False):
            fs.add(n)
        body = self.block(node.body, fs, tail_return=True)
        nslots = len(fs.slots)
        nparams = len(node.params)
        interp = self
        name = node.name

        def invoke(args):
            if len(args) != nparams:
                raise GuestError(
                    f"MethodError: no method matching {name}() with {len(args)} argument"
                    f"{'s' if len(args) != 1 else ''}; {name} takes {nparams}"
                )
            vals = list(args) + [UNDEF] * (nslots - nparams)
            interp.call_depth += 1
            if interp.call_depth > MAX_CALL_DEPTH:
                interp.call_depth = 0
                raise GuestError("StackOverflowError: call depth exceeded")
            try:
                return body(Env(vals, None))
            except ReturnSignal as r:
                return r.value
            except (BreakSignal, ContinueSignal):
                raise GuestError("syntax: break or continue outside loop") from None
            finally:
                interp.call_depth -= 1

        fn = GuestFunction(name, tuple(node.params), invoke)
        setter = self.name_setter(name, cs, cs.kind == "top")

        def define(env):
            setter(env, fn)
            return fn

        return define

    # -- assignment -------------------------------------------------------

    def assign(self, node: A.Assign, cs: CScope):
        target = node.target
        value = self.expr(node.value, cs) if not isinstance(node.value, A.Assign) else self.assign(node.value, cs)
        op, dot = node.op, node.dot

        if isinstance(target, A.Name):
            rebind = target.id in node.rebind_global
            setter = self.name_setter(target.id, cs, rebind)
            if dot:
                getter = self.name_getter(target.id, cs)

                def dot_assign(env):
                    cur = getter(env)
                    v = value(env)
                    if op:
                        v = ops.broadcast_binop(op, cur, v)
                    inplace_assign(cur, v)
                    return cur

                return dot_assign
            if op:
                getter = self.name_getter(target.id, cs)

                def op_assign(env):
                    a = getter(env)
                    b = value(env)
                    ta, tb = type(a), type(b)
                    if (ta is float or ta is int) and (tb is float or tb is int) and op != "/" and op != "^":
                        v = a + b if op == "+" else a - b if op == "-" else a * b
                    else:
                        v = ops.binop(op, a, b)
                    setter(env, v)
                    return v

                return op_assign

            def plain(env):
                v = value(env)
                setter(env, v)
                return v

            return plain

        if isinstance(target, A.TupleExpr):
            setters = [self.name_setter(e.id, cs, e.id in node.rebind_global) for e in target.elts]
            n = len(setters)

            def unpack(env):
                v = value(env)
                items = list(to_iterable(v))
                if len(items) < n:
                    raise GuestError(f"BoundsError: cannot destructure {len(items)} values into {n} names")
                for s, item in zip(setters, items):
                    s(env, item)
                return v

            return unpack

        if isinstance(target, A.Index):
            return self.index_assign(target, value, op, dot, cs)

        if isinstance(target, A.Field):
            obj = self.expr(target.obj, cs)
            fname = target.name

            def field_assign(env):
                o = obj(env)
                v = value(env)
                if not isinstance(o, GuestDataFrame):
                    raise GuestError(f"setfield!: immutable struct of type {type_name(o)} cannot be changed")
                if dot or op:
                    col = o.column(fname)
                    nv = ops.broadcast_binop(op, col, v) if op else v
                    if dot:
                        inplace_assign(col, nv)
                        return col
                    v = nv
                o.set_column(fname, _as_column(v, o.nrow))
                return v

            return field_assign
        raise GuestError("syntax: invalid assignment location")

    def index_assign(self, target: A.Index, value, op: str, dot: bool, cs: CScope):
        obj = self.expr(target.obj, cs)
        args = self.index_args(target, cs)
        single = len(args) == 1 and not any(A.contains(a, A.End) for a in target.args)
        if single and op and not dot:
            a0 = args[0]

            def fast_update(env):
                o = obj(env)
                i = a0(env)
                v = value(env)
                if type(o) is GuestVector and o.mask is None and type(i) is int:
                    data = o.data
                    if 0 < i <= data.shape[0] and data.dtype == np.float64:
                        cur = data.item(i - 1)
                        if type(v) is float or type(v) is int:
                            new = cur + v if op == "+" else cur - v if op == "-" else cur * v if op == "*" \
                                else ops.scalar_binop(op, cur, v)
                            data[i - 1] = new
                            return new
                cur = index_get(o, [i])
                new = ops.binop(op, cur, v)
                index_set(o, [i], new)
                return new

            return fast_update

        def run(env):
            o = obj(env)
            idxs = self.run_index_args(o, args, env)
            v = value(env)
            if dot:
                new = ops.broadcast_binop(op, index_get(o, idxs), v) if op else v
                index_set(o, idxs, new)
                return new
            if op:
                v = ops.binop(op, index_get(o, idxs), v)
            elif ops.is_array(v) and _selects_scalar(idxs):
                raise GuestError(f"MethodError: Cannot `convert` an object of type {type_name(v)} to a scalar")
            elif not ops.is_array(v) and not _selects_scalar(idxs):
                raise GuestError(
                    "ArgumentError: indexed assignment with a single value to possibly many locations "
                    "is not supported; perhaps use broadcasting `.=` instead?"
                )
            index_set(o, idxs, v)
            return v

        return run

    # -- expressions ------------------------------------------------------

    def expr(self, node: A.Node, cs: CScope):
        method = getattr(self, "x_" + type(node).__name__, None)
        if method is None:
            raise GuestError(f"syntax: unsupported expression {type(node).__name__}")
        return method(node, cs)

    def x_Num(self, node: A.Num, cs):
        return _const(node.value)

    def x_BoolLit(self, node: A.BoolLit, cs):
        return _const(node.value)

    def x_Str(self, node: A.Str, cs):
        if all(isinstance(p, str) for p in node.parts):
            return _const("".join(node.parts))  # type: ignore[arg-type]
        parts = [p if isinstance(p, str) else self.expr(p, cs) for p in node.parts]

        def interp(env):
            return "".join(p if type(p) is str else scalar_string(p(env)) for p in parts)

        return interp

    def x_Name(self, node: A.Name, cs):
        return self.name_getter(node.id, cs)

    def x_Colon(self, node: A.Colon, cs):
        return _const(COLON)

    def x_End(self, node: A.End, cs):
        if not self._end_ctx:
            raise GuestError("syntax: 'end' used outside of indexing")
        dim, ndims = self._end_ctx[-1]
        stack = self._end_stack

        def end(env):
            return lastindex(stack[-1], dim, ndims)

        return end

    def x_TupleExpr(self, node: A.TupleExpr, cs):
        elts = [self.expr(e, cs) for e in node.elts]
        return lambda env: tuple(e(env) for e in elts)

    def x_VectorLit(self, node: A.VectorLit, cs):
        elts = [self.expr(e, cs) for e in node.elts]

        def build(env):
            vals = [e(env) for e in elts]
            if any(ops.is_array(v) or isinstance(v, tuple) for v in vals):
                raise GuestError("MethodError: vectors of arrays are not supported")
            return vector_from_values(vals)

        return build

    def x_Range(self, node: A.Range, cs):
        start = self.expr(node.start, cs)
        stop = self.expr(node.stop, cs)
        step = self.expr(node.step, cs) if node.step is not None else _const(1)

        def rng(env):
            a, s, b = start(env), step(env), stop(env)
            for v in (a, s, b):
                if type(v) is not int:
                    if type(v) is float and v.is_integer():
                        continue
                    raise GuestError(f"ArgumentError: range endpoints must be integers, got {type_name(v)}")
            a, s, b = int(a), int(s), int(b)
            if s == 0:
                raise GuestError("ArgumentError: step cannot be zero")
            return GuestRange(a, s, b)

        return rng

    def x_BinOp(self, node: A.BinOp, cs):
        left = self.expr(node.left, cs)
        right = self.expr(node.right, cs)
        op = node.op
        if node.dot:

            def bcast(env):
                return ops.broadcast_binop(op, left(env), right(env))

            return bcast
        if op == "*":

            def mul(env):
                a, b = left(env), right(env)
                ta, tb = type(a), type(b)
                if (ta is float or ta is int) and (tb is float or tb is int):
                    return a * b
                return ops.binop("*", a, b)

            return mul
        if op == "+":

            def add(env):
                a, b = left(env), right(env)
                ta, tb = type(a), type(b)
                if (ta is float or ta is int) and (tb is float or tb is int):
                    return a + b
                return ops.binop("+", a, b)

            return add
        if op == "-":

            def sub(env):
                a, b = left(env), right(env)
                ta, tb = type(a), type(b)
                if (ta is float or ta is int) and (tb is float or tb is int):
                    return a - b
                return ops.binop("-", a, b)

            return sub

        def generic(env):
            return ops.binop(op, left(env), right(env))

        return generic

    def x_UnaryOp(self, node: A.UnaryOp, cs):
        operand = self.expr(node.operand, cs)
        op = node.op
        return lambda env: ops.unary(op, operand(env))

    def x_Logical(self, node: A.Logical, cs):
        left = self.expr(node.left, cs)
        right = self.expr(node.right, cs)
        if node.op == "&&":
            return lambda env: right(env) if ops.truthy(left(env)) else False
        return lambda env: True if ops.truthy(left(env)) else right(env)

    def x_Transpose(self, node: A.Transpose, cs):
        obj = self.expr(node.obj, cs)
        return lambda env: ops.transpose(obj(env))

    def x_Field(self, node: A.Field, cs):
        obj = self.expr(node.obj, cs)
        name = node.name

        def field(env):
            o = obj(env)
            if isinstance(o, GuestDataFrame):
                return o.column(name)
            if isinstance(o, GuestModule):
                try:
                    return o.members[name]
                except KeyError:
                    raise GuestError(f"UndefVarError: {name} not defined in {o.name}") from None
            raise GuestError(f"type {type_name(o)} has no field {name}")

        return field

    def index_args(self, node: A.Index, cs: CScope):
        n = len(node.args)
        args = []
        for k, a in enumerate(node.args):
            self._end_ctx.append((k, n))
            try:
                args.append(self.expr(a, cs))
            finally:
                self._end_ctx.pop()
        return args

    def run_index_args(self, o, args, env) -> list:
        stack = self._end_stack
        stack.append(o)
        try:
            return [a(env) for a in args]
        finally:
            stack.pop()

    def x_Index(self, node: A.Index, cs):
        obj = self.expr(node.obj, cs)
        args = self.index_args(node, cs)
        uses_end = any(A.contains(a, A.End) for a in node.args)
        if len(args) == 2 and not uses_end:
            a0, a1 = args

            def get2(env):
                o = obj(env)
                i = a0(env)
                j = a1(env)
                if type(o) is GuestMatrix and type(i) is int and type(j) is int:
                    d = o.data
                    if 0 < i <= d.shape[0] and 0 < j <= d.shape[1]:
                        return d.item(i - 1, j - 1)
                return index_get(o, [i, j])

            return get2
        if len(args) == 1 and not uses_end:
            a0 = args[0]

            def get1(env):
                o = obj(env)
                i = a0(env)
                if type(o) is GuestVector and o.mask is None and type(i) is int and o.levels is None:
                    d = o.data
                    if 0 < i <= d.shape[0]:
                        return d.item(i - 1)
                return index_get(o, [i])

            return get1

        def get(env):
            o = obj(env)
            return index_get(o, self.run_index_args(o, args, env))

        return get

    def x_Call(self, node: A.Call, cs):
        func = self.expr(node.func, cs)
        args = [self.expr(a, cs) for a in node.args]
        nargs = len(args)
        if isinstance(node.func, A.Name) and cs.resolve(node.func.id) is None:
            self._check_builtin_arity(node.func.id, nargs)
        if node.broadcast:
            return lambda env: self.broadcast_call(func(env), [a(env) for a in args])
        call = self.call_value
        return lambda env: call(func(env), [a(env) for a in args])

    def _check_builtin_arity(self, name: str, nargs: int) -> None:
        if name in self._program_globals or name in self.globals:
            return
        b = self.builtins.get(name)
        if isinstance(b, Builtin) and not b.accepts(nargs):
            forms = ", ".join(f"{name}/{k}" for k in sorted(b.arities or ()))
            raise GuestError(
                f"no such builtin: {name}/{nargs} (available: {forms})"
            )

    def call_value(self, f, args: list):
        if isinstance(f, Builtin):
            if not f.accepts(len(args)):
                forms = ", ".join(f"{f.name}/{k}" for k in sorted(f.arities or ()))
                raise GuestError(f"no such builtin: {f.name}/{len(args)} (available: {forms})")
            return f.fn(self, *args)
        if isinstance(f, GuestFunction):
            return f.invoke(args)
        if isinstance(f, GuestType):
            from .builtins import convert

            if len(args) != 1:
                raise GuestError(f"MethodError: no method matching {f.name}() with {len(args)} arguments")
            return convert(f.name, args[0])
        raise GuestError(f"MethodError: objects of type {type_name(f)} are not callable")

    def broadcast_call(self, f, args: list):
        """``f.(args...)``: call ``f`` once per element and collect the results."""
        arrays = [a for a in args if ops.is_array(a)]
        if not arrays:
            return self.call_value(f, args)
        lengths = {len(to_iterable(a)) if not isinstance(a, GuestMatrix) else a.data.size for a in arrays}
        if len(lengths) != 1:
            raise GuestError("DimensionMismatch: arrays could not be broadcast to a common size")
        n = lengths.pop()
        cols = [list(to_iterable(a)) if ops.is_array(a) else None for a in args]
        out = []
        for k in range(n):
            call_args = [cols[m][k] if cols[m] is not None else args[m] for m in range(len(args))]
            out.append(self.call_value(f, call_args))
        two_d = [a for a in arrays if isinstance(a, (GuestMatrix, GuestView))]
        result = vector_from_values(out)
        if two_d and result.mask is None and result.data.dtype != object:
            shape = two_d[0].shape
            return GuestMatrix(np.asfortranarray(result.data.astype(np.float64).reshape(shape, order="F")))
        return result


def _selects_scalar(idxs: list) -> bool:
    return all(type(i) is int or (type(i) is float and i.is_integer()) for i in idxs)


def _as_column(v, nrow: int) -> GuestVector:
    if isinstance(v, GuestVector):
        return v
    if isinstance(v, GuestRange):
        return ops.make_vector(v.to_array())
    if isinstance(v, GuestMatrix) and v.data.shape[1] == 1:
        return ops.make_vector(v.data[:, 0].copy())
    raise GuestError(
        f"ArgumentError: a data frame column must be a vector; got {type_name(v)} "
        f"(use .= to broadcast a scalar)"
    )


def _const(v):
    return lambda env: v


def _sequence(fns: list):
    if not fns:
        return _const(NOTHING)
    if len(fns) == 1:
        return fns[0]
    if len(fns) == 2:
        f, g = fns

        def seq2(env):
            f(env)
            return g(env)

        return seq2
    fns = tuple(fns)

    def seq(env):
        v = NOTHING
        for f in fns:
            v = f(env)
        return v

    return seq


def evaluate(
    program,
    interp: Optional[Interpreter] = None,
    gate=None,
    mode: ScopingMode = ScopingMode.SOFT,
) -> Tuple[object, str]:
    """Evaluate source or a tree; return ``(value, stdout)``."""
    interp = interp or Interpreter(gate=gate, mode=mode)
    if gate is not None:
        interp.gate = gate
    res = interp.evaluate(program, mode)
    return res.value, res.stdout
