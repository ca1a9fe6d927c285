"""Host storage types and the 27-flavor missing-value ladder.

Every numeric storage type reserves its top 27 values for the missing
codes ``.``, ``.a`` ... ``.z`` (codes 0..26). Integer types reserve
``max_signed - 26 .. max_signed``; floating types reserve 27 consecutive
bit patterns starting at the largest power of two below the type's
maximum finite value, and anything at or above that base is missing.

Scalar helpers work on Python numbers; the ``*_array`` helpers are the
vectorized equivalents used by the bulk copy paths and must agree with
the scalar ones cell for cell.
"""

from __future__ import annotations

import enum
import math
import string

import numpy as np

from .errors import WorkspaceError

N_MISSING = 27
MISSING_NAMES = ["."] + ["." + c for c in string.ascii_lowercase]


class StorageType(enum.Enum):
    BYTE = "byte"
    INT = "int"
    LONG = "long"
    FLOAT = "float"
    DOUBLE = "double"
    STR = "str"
    STRL = "strL"

    @classmethod
    def parse(cls, text: str) -> StorageType:
        for st in cls:
            if st.value == text or st.value.lower() == text.lower():
                return st
        raise WorkspaceError(f"unknown storage type {text!r}")

    @property
    def tag(self) -> int:
        return _TAGS[self]

    @classmethod
    def from_tag(cls, tag: int) -> StorageType:
        for st, t in _TAGS.items():
            if t == tag:
                return st
        raise WorkspaceError(f"unknown storage type tag {tag}")

    @property
    def is_integer(self) -> bool:
        return self in (StorageType.BYTE, StorageType.INT, StorageType.LONG)

    @property
    def is_float(self) -> bool:
        return self in (StorageType.FLOAT, StorageType.DOUBLE)

    @property
    def is_numeric(self) -> bool:
        return self.is_integer or self.is_float

    @property
    def is_string(self) -> bool:
        return self in (StorageType.STR, StorageType.STRL)

    @property
    def width(self) -> int | None:
        """Fixed cell width in bytes; ``None`` for variable-width strings."""
        return _WIDTHS[self]

    @property
    def dtype(self) -> np.dtype:
        if self.is_string:
            raise WorkspaceError(f"{self.value} has no fixed numpy dtype")
        return np.dtype(_DTYPES[self])

    @property
    def valid_min(self) -> float:
        if self.is_integer:
            return float(np.iinfo(self.dtype).min)
        if self.is_float:
            return -float(np.finfo(self.dtype).max)
        raise WorkspaceError("string types have no numeric range")

    @property
    def valid_max(self) -> float:
        """Largest non-missing value the type can hold."""
        if self.is_integer:
            return float(int(np.iinfo(self.dtype).max) - N_MISSING)
        if self.is_float:
            base = _float_base(self)
            return float(np.nextafter(self.dtype.type(base), self.dtype.type(0)))
        raise WorkspaceError("string types have no numeric range")


_TAGS = {
    StorageType.BYTE: 1,
    StorageType.INT: 2,
    StorageType.LONG: 3,
    StorageType.FLOAT: 4,
    StorageType.DOUBLE: 5,
    StorageType.STR: 6,
    StorageType.STRL: 7,
}
_WIDTHS = {
    StorageType.BYTE: 1,
    StorageType.INT: 2,
    StorageType.LONG: 4,
    StorageType.FLOAT: 4,
    StorageType.DOUBLE: 8,
    StorageType.STR: None,
    StorageType.STRL: None,
}
_DTYPES = {
    StorageType.BYTE: np.int8,
    StorageType.INT: np.int16,
    StorageType.LONG: np.int32,
    StorageType.FLOAT: np.float32,
    StorageType.DOUBLE: np.float64,
}
_UINT = {StorageType.FLOAT: np.uint32, StorageType.DOUBLE: np.uint64}

NUMERIC_TYPES = tuple(st for st in StorageType if st.is_numeric)


def _float_base(stype: StorageType) -> float:
    # largest power of two strictly below the maximum finite value
    fmax = float(np.finfo(stype.dtype).max)
    return math.ldexp(1.0, math.frexp(fmax)[1] - 1)


def _base_bits(stype: StorageType) -> int:
    base = stype.dtype.type(_float_base(stype))
    return int(base.view(_UINT[stype]))


def missing_name(code: int) -> str:
    return MISSING_NAMES[code]


def parse_missing_name(text: str) -> int:
    try:
        return MISSING_NAMES.index(text)
    except ValueError:
        raise WorkspaceError(f"not a missing value: {text!r}") from None


def _check_code(code: int) -> None:
    if not (0 <= code < N_MISSING) or isinstance(code, bool):
        raise WorkspaceError(f"missing code must be in [0, 26], got {code!r}")


def encode_missing(code: int, stype: StorageType) -> int | float:
    """Raw cell value holding missing flavor ``code`` in ``stype``."""
    _check_code(code)
    if stype.is_string:
        raise WorkspaceError(
            f"{stype.value} has no missing sentinel; the empty string stands in"
        )
    if stype.is_integer:
        return int(np.iinfo(stype.dtype).max) - (N_MISSING - 1) + code
    bits = _UINT[stype](_base_bits(stype) + code)
    return float(bits.view(stype.dtype))


def decode_missing(raw: int | float, stype: StorageType) -> int | None:
    """Missing code of a raw cell, or ``None`` for an ordinary value."""
    if stype.is_string:
        raise WorkspaceError(f"{stype.value} cells carry no missing code")
    if stype.is_integer:
        raw = int(raw)
        top = int(np.iinfo(stype.dtype).max)
        if raw > top - N_MISSING:
            return raw - (top - N_MISSING + 1)
        return None
    value = stype.dtype.type(raw)
    if math.isnan(value):
        return 0
    if value < stype.dtype.type(_float_base(stype)):
        return None
    offset = int(value.view(_UINT[stype])) - _base_bits(stype)
    return offset if 0 <= offset < N_MISSING else 0


def double_missing(code: int = 0) -> float:
    """The double-precision ladder value for a missing code."""
    return encode_missing(code, StorageType.DOUBLE)  # type: ignore[return-value]


MISSING_BASE_DOUBLE = _float_base(StorageType.DOUBLE)
SYSMISS = double_missing(0)


def is_missing_double(v: float) -> bool:
    return v >= MISSING_BASE_DOUBLE or v != v


def double_missing_code(v: float) -> int | None:
    return decode_missing(v, StorageType.DOUBLE)


# --- vectorized forms -------------------------------------------------------


def missing_codes_array(stype: StorageType, raw: np.ndarray) -> np.ndarray:
    """Per-cell missing code, -1 where the cell is an ordinary value."""
    if stype.is_integer:
        top = int(np.iinfo(stype.dtype).max)
        raw64 = raw.astype(np.int64)
        return np.where(raw64 > top - N_MISSING, raw64 - (top - N_MISSING + 1), -1)
    base = stype.dtype.type(_float_base(stype))
    offs = raw.view(_UINT[stype]).astype(np.int64) - _base_bits(stype)
    miss = (raw >= base) | np.isnan(raw)
    codes = np.where((offs >= 0) & (offs < N_MISSING), offs, 0)
    return np.where(miss, codes, -1)


def missing_mask_array(stype: StorageType, raw: np.ndarray) -> np.ndarray:
    if stype.is_integer:
        return raw > stype.dtype.type(int(np.iinfo(stype.dtype).max) - N_MISSING)
    return (raw >= stype.dtype.type(_float_base(stype))) | np.isnan(raw)


def double_ladder_array(codes: np.ndarray) -> np.ndarray:
    bits = np.asarray(codes, dtype=np.uint64) + np.uint64(_base_bits(StorageType.DOUBLE))
    return bits.view(np.float64)


def widen_to_double(stype: StorageType, raw: np.ndarray) -> np.ndarray:
    """Numeric column as doubles, missing codes surfaced as double ladder values."""
    out = raw.astype(np.float64)
    if stype is StorageType.DOUBLE:
        return out
    codes = missing_codes_array(stype, raw)
    miss = codes >= 0
    if miss.any():
        out[miss] = double_ladder_array(codes[miss])
    return out


def narrow_from_double(stype: StorageType, values: np.ndarray) -> tuple[np.ndarray, int]:
    """Convert doubles to ``stype`` cells.

    Double ladder values keep their flavor. Anything else the target cannot
    hold (out of range, non-integral for integer targets, NaN, infinities
    other than +inf) becomes generic missing and is counted in the returned
    overflow tally.
    """
    values = np.asarray(values, dtype=np.float64)
    codes = missing_codes_array(StorageType.DOUBLE, values)
    nan = np.isnan(values)
    miss = codes >= 0
    rest = ~miss
    if stype.is_integer:
        lo, hi = stype.valid_min, stype.valid_max
        with np.errstate(invalid="ignore"):
            ok = rest & (values >= lo) & (values <= hi) & (np.floor(values) == values)
        out = np.zeros(values.shape, dtype=stype.dtype)
        out[ok] = values[ok].astype(stype.dtype)
    elif stype is StorageType.FLOAT:
        with np.errstate(over="ignore", invalid="ignore"):
            f = values.astype(np.float32)
            ok = rest & np.isfinite(f) & (f < np.float32(_float_base(stype)))
        out = np.where(ok, f, np.float32(0))
    else:
        ok = rest & np.isfinite(values)
        out = values.copy()
    bad = rest & ~ok
    codes = np.where(bad, 0, codes)
    fill = miss | bad
    if fill.any():
        out[fill] = _ladder_cells(stype, codes[fill])
    overflow = int(bad.sum()) + int((nan & miss).sum())
    return out, overflow


def _ladder_cells(stype: StorageType, codes: np.ndarray) -> np.ndarray:
    if stype.is_integer:
        top = int(np.iinfo(stype.dtype).max)
        return (codes + (top - N_MISSING + 1)).astype(stype.dtype)
    bits = codes.astype(np.int64) + _base_bits(stype)
    return bits.astype(_UINT[stype]).view(stype.dtype)


def narrow_scalar(stype: StorageType, value: float) -> tuple[int | float, bool]:
    """Scalar form of :func:`narrow_from_double`; returns ``(cell, overflowed)``."""
    out, overflow = narrow_from_double(stype, np.array([value], dtype=np.float64))
    cell = out[0]
    return (int(cell) if stype.is_integer else float(cell)), bool(overflow)


def widen_scalar(stype: StorageType, raw: int | float) -> float:
    code = decode_missing(raw, stype)
    if code is not None:
        return double_missing(code)
    return float(raw)
