"""Runtime values of the guest language."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import GuestError


class _Singleton:
    _name = ""

    def __repr__(self) -> str:
        return self._name

    def __reduce__(self):
        return self._name


class MissingType(_Singleton):
    _name = "missing"


class NothingType(_Singleton):
    _name = "nothing"


class ColonType(_Singleton):
    _name = "Colon()"


MISSING = MissingType()
NOTHING = NothingType()
COLON = ColonType()


class GuestBase(enum.Enum):
    I8 = "Int8"
    I16 = "Int16"
    I32 = "Int32"
    I64 = "Int64"
    F32 = "Float32"
    F64 = "Float64"
    BOOL = "Bool"
    STR = "String"
    CAT = "Categorical"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_BASE_DTYPES[self])

    @property
    def width(self) -> int:
        """Bytes per cell in the guest representation (strings: per byte)."""
        return _BASE_WIDTHS[self]

    @property
    def is_integer(self) -> bool:
        return self in (GuestBase.I8, GuestBase.I16, GuestBase.I32, GuestBase.I64)

    @property
    def is_float(self) -> bool:
        return self in (GuestBase.F32, GuestBase.F64)


_BASE_DTYPES = {
    GuestBase.I8: np.int8,
    GuestBase.I16: np.int16,
    GuestBase.I32: np.int32,
    GuestBase.I64: np.int64,
    GuestBase.F32: np.float32,
    GuestBase.F64: np.float64,
    GuestBase.BOOL: np.bool_,
    GuestBase.STR: object,
    GuestBase.CAT: np.uint32,
}
_BASE_WIDTHS = {
    GuestBase.I8: 1,
    GuestBase.I16: 2,
    GuestBase.I32: 4,
    GuestBase.I64: 8,
    GuestBase.F32: 4,
    GuestBase.F64: 8,
    GuestBase.BOOL: 1,
    GuestBase.STR: 1,
    GuestBase.CAT: 4,
}


def base_for_dtype(dtype: np.dtype) -> GuestBase:
    for base, dt in _BASE_DTYPES.items():
        if base is not GuestBase.CAT and np.dtype(dt) == dtype:
            return base
    if dtype.kind in "iu":
        return GuestBase.I64
    if dtype.kind == "f":
        return GuestBase.F64
    if dtype.kind in "OUS":
        return GuestBase.STR
    raise GuestError(f"unsupported element type {dtype}")


@dataclass(frozen=True)
class GuestColumnType:
    base: GuestBase
    allows_missing: bool = False

    @property
    def name(self) -> str:
        return self.base.value + ("?" if self.allows_missing else "")

    def __str__(self) -> str:
        return self.name

    @property
    def julia_eltype(self) -> str:
        inner = "CategoricalValue{String, UInt32}" if self.base is GuestBase.CAT else self.base.value
        return f"Union{{Missing, {inner}}}" if self.allows_missing else inner


class GuestVector:
    """A 1-D column. ``mask`` marks missing cells (their data is zeroed).

    Categorical vectors store 1-based level indices in ``data`` and the
    ordered level labels in ``levels``.
    """

    __slots__ = ("data", "mask", "ctype", "levels")

    def __init__(
        self,
        data: np.ndarray,
        ctype: Optional[GuestColumnType] = None,
        mask: Optional[np.ndarray] = None,
        levels: Optional[Tuple[str, ...]] = None,
    ) -> None:
        if data.ndim != 1:
            raise GuestError("vector data must be one-dimensional")
        if ctype is None:
            ctype = GuestColumnType(base_for_dtype(data.dtype), mask is not None)
        if mask is not None and len(mask) != len(data):
            raise GuestError("missing mask length differs from data length")
        self.data = data
        self.mask = mask
        self.ctype = ctype
        self.levels = levels

    def __len__(self) -> int:
        return len(self.data)

    @property
    def is_categorical(self) -> bool:
        return self.ctype.base is GuestBase.CAT

    def has_missing(self) -> bool:
        return self.mask is not None and bool(self.mask.any())

    def missing_mask(self) -> np.ndarray:
        return self.mask if self.mask is not None else np.zeros(len(self.data), dtype=bool)

    def labels(self) -> np.ndarray:
        """Categorical codes rendered as an object array of level strings."""
        assert self.levels is not None
        table = np.array(("",) + tuple(self.levels), dtype=object)
        return table[self.data.astype(np.int64)]

    def element(self, i0: int):
        """Python value of 0-based cell ``i0``."""
        if self.mask is not None and self.mask[i0]:
            return MISSING
        if self.levels is not None:
            return self.levels[int(self.data[i0]) - 1]
        return self.data.item(i0)

    def values(self) -> List:
        return [self.element(i) for i in range(len(self.data))]

    def take(self, idx) -> GuestVector:
        data = self.data[idx]
        mask = None if self.mask is None else self.mask[idx]
        return GuestVector(np.array(data, copy=True), self.ctype, mask, self.levels)

    def copy(self) -> GuestVector:
        mask = None if self.mask is None else self.mask.copy()
        return GuestVector(self.data.copy(), self.ctype, mask, self.levels)

    def same_as(self, other: GuestVector) -> bool:
        """Bitwise equality of element type and cells, where missing flags and levels count as cells."""
        if not isinstance(other, GuestVector):
            return False
        if self.ctype != other.ctype or self.levels != other.levels:
            return False
        if len(self) != len(other):
            return False
        mine, theirs = self.missing_mask(), other.missing_mask()
        if not np.array_equal(mine, theirs):
            return False
        if self.data.dtype != other.data.dtype:
            return False
        if self.data.dtype == object:
            return list(self.data[~mine]) == list(other.data[~theirs])
        return self.data[~mine].tobytes() == other.data[~theirs].tobytes()


class GuestMatrix:
    __slots__ = ("data",)

    def __init__(self, data: np.ndarray) -> None:
        if data.ndim != 2:
            raise GuestError("matrix data must be two-dimensional")
        self.data = data

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]


class GuestDataFrame:
    def __init__(self, columns: Optional[Dict[str, GuestVector]] = None) -> None:
        self.columns: Dict[str, GuestVector] = {}
        for name, col in (columns or {}).items():
            self.set_column(name, col)

    @property
    def nrow(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def ncol(self) -> int:
        return len(self.columns)

    def names(self) -> List[str]:
        return list(self.columns)

    def column(self, name: str) -> GuestVector:
        try:
            return self.columns[name]
        except KeyError:
            raise GuestError(f"ArgumentError: column name :{name} not found in the data frame") from None

    def set_column(self, name: str, col: GuestVector) -> None:
        if self.columns and name not in self.columns and len(col) != self.nrow:
            raise GuestError(
                f"DimensionMismatch: new column has {len(col)} rows; data frame has {self.nrow}"
            )
        self.columns[name] = col

    def same_as(self, other: GuestDataFrame) -> bool:
        if not isinstance(other, GuestDataFrame) or self.names() != other.names():
            return False
        return all(self.columns[n].same_as(other.columns[n]) for n in self.columns)


@dataclass(frozen=True)
class GuestRange:
    start: int
    step: int
    stop: int

    def __len__(self) -> int:
        if self.step == 0:
            raise GuestError("ArgumentError: step cannot be zero")
        n = (self.stop - self.start) // self.step + 1
        return max(n, 0)

    def py_range(self) -> range:
        end = self.stop + (1 if self.step > 0 else -1)
        return range(self.start, end, self.step)

    def __iter__(self) -> Iterator[int]:
        return iter(self.py_range())

    def to_array(self) -> np.ndarray:
        return np.arange(self.start, self.stop + (1 if self.step > 0 else -1), self.step, dtype=np.int64)


@dataclass
class GuestFunction:
    name: str
    params: Sequence[str]
    invoke: Callable

    def __repr__(self) -> str:
        return f"{self.name} (generic function with 1 method)"


@dataclass
class Builtin:
    name: str
    fn: Callable
    arities: Optional[frozenset] = None
    doc: str = ""

    def accepts(self, n: int) -> bool:
        return self.arities is None or n in self.arities


@dataclass
class GuestModule:
    name: str
    members: Dict[str, object]


@dataclass(frozen=True)
class GuestType:
    name: str


class GuestView:
    """Write-through window onto numeric host variables.

    Element ``[r, c]`` is the r-th selected observation of the c-th
    variable. Reads and writes go through the gate, so the host
    conversion and overflow rules apply to every write.
    """

    def __init__(self, gate, var_indices: List[int], rows: np.ndarray) -> None:
        self.gate = gate
        self.var_indices = list(var_indices)
        self.rows = np.asarray(rows, dtype=np.int64)  # 1-based observation numbers

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.rows), len(self.var_indices))

    def get(self, r: int, c: int) -> float:
        return self.gate.vdata(int(self.rows[r - 1]), self.var_indices[c - 1])

    def set(self, r: int, c: int, value: float) -> None:
        self.gate.vstore(int(self.rows[r - 1]), self.var_indices[c - 1], value)

    def materialize(self) -> GuestMatrix:
        n, k = self.shape
        out = np.empty((n, k), dtype=np.float64, order="F")
        for c in range(k):
            for r in range(n):
                out[r, c] = self.get(r + 1, c + 1)
        return GuestMatrix(out)

    def assign(self, values: np.ndarray) -> None:
        n, k = self.shape
        values = np.broadcast_to(np.asarray(values), (n, k))
        if values.dtype == object or values.dtype.kind not in "biuf":
            raise GuestError("MethodError: views accept numeric values only")
        for c in range(k):
            for r in range(n):
                self.set(r + 1, c + 1, float(values[r, c]))


def is_number(x) -> bool:
    t = type(x)
    return t is int or t is float or t is bool or isinstance(x, (np.integer, np.floating, np.bool_))


def type_name(x) -> str:
    if x is MISSING:
        return "Missing"
    if x is NOTHING:
        return "Nothing"
    t = type(x)
    if t is bool:
        return "Bool"
    if t is int:
        return "Int64"
    if t is float:
        return "Float64"
    if t is str:
        return "String"
    if t is tuple:
        return "Tuple"
    if isinstance(x, GuestVector):
        return f"Vector{{{x.ctype.julia_eltype}}}"
    if isinstance(x, GuestMatrix):
        return "Matrix{Float64}"
    if isinstance(x, GuestDataFrame):
        return "DataFrame"
    if isinstance(x, GuestRange):
        return "UnitRange{Int64}" if x.step == 1 else "StepRange{Int64, Int64}"
    if isinstance(x, GuestView):
        return "SubArray{Float64, 2}"
    if isinstance(x, (GuestFunction, Builtin)):
        return "Function"
    if isinstance(x, GuestModule):
        return "Module"
    if isinstance(x, GuestType):
        return "DataType"
    return t.__name__
