"""Bulk transfers between the host workspace and guest objects.

Every command here starts on the host side, which is why it may create
host variables and matrices even though the gate never can. Column copies
fan out over a thread pool with one column per task. Results are always
assembled in column order so the output does not depend on scheduling.

A transfer is atomic: new columns are built from read-only snapshots
while the workspace is locked, and the workspace is touched only after
every column has been built.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BridgeError
from .gate import SampleRestriction
from .guest.values import (
    GuestBase,
    GuestColumnType,
    GuestDataFrame,
    GuestMatrix,
    GuestVector,
)
from .storage import (
    StorageType,
    double_missing,
    missing_mask_array,
    narrow_from_double,
    widen_to_double,
)
from .workspace import Dataset, ValueLabelTable, Variable, Workspace, check_identifier

DEFAULT_NAME = "df"

HOST_TO_GUEST = {
    StorageType.BYTE: GuestBase.I8,
    StorageType.INT: GuestBase.I16,
    StorageType.LONG: GuestBase.I32,
    StorageType.FLOAT: GuestBase.F32,
    StorageType.DOUBLE: GuestBase.F64,
    StorageType.STR: GuestBase.STR,
    StorageType.STRL: GuestBase.STR,
}

GUEST_TO_HOST = {
    GuestBase.I8: StorageType.INT,
    GuestBase.I16: StorageType.LONG,
    GuestBase.I32: StorageType.DOUBLE,
    GuestBase.I64: StorageType.DOUBLE,
    GuestBase.F32: StorageType.FLOAT,
    GuestBase.F64: StorageType.DOUBLE,
    GuestBase.BOOL: StorageType.BYTE,
    GuestBase.STR: StorageType.STR,
    GuestBase.CAT: StorageType.INT,
}


@dataclass
class CopyOptions:
    nolabel: bool = False
    nomissing: bool = False
    doubleonly: bool = False
    replace: bool = False
    clear: bool = False
    destination: Optional[str] = None
    source: Optional[str] = None
    cols: Optional[List[str]] = None

    @property
    def dest_name(self) -> str:
        return self.destination or DEFAULT_NAME

    @property
    def source_name(self) -> str:
        return self.source or DEFAULT_NAME

    @property
    def path(self) -> str:
        if self.nomissing and self.doubleonly:
            return "both"
        if self.nomissing:
            return "nomissing"
        if self.doubleonly:
            return "doubleonly"
        return "default"


@dataclass
class TransferReport:
    rows: int
    cols: int
    bytes: int
    secs: float
    path: str = "default"
    warnings: int = 0

    def line(self) -> str:
        return f"rows={self.rows} cols={self.cols} bytes={self.bytes} secs={self.secs:.4f} path={self.path}"

    @property
    def throughput(self) -> float:
        """Bytes per second; infinite when the copy was too fast to time."""
        return self.bytes / self.secs if self.secs > 0 else float("inf")


# -- type mapping -------------------------------------------------------------


def map_type(direction: str, tag, observed_range: Optional[Tuple[float, float]] = None, *, labeled: bool = False):
    """Map a storage tag across the boundary.

    ``direction`` is ``"host->guest"`` (tag a :class:`StorageType`, result a
    :class:`GuestColumnType`) or ``"guest->host"`` (tag a :class:`GuestBase`,
    result a :class:`StorageType`). For guest Float32 the observed
    ``(min, max)`` of finite cells decides between SFloat and SDouble.
    """
    if direction == "host->guest":
        if not isinstance(tag, StorageType):
            raise BridgeError(f"expected a host storage type, got {tag!r}")
        if labeled and tag.is_integer:
            return GuestColumnType(GuestBase.CAT, True)
        return GuestColumnType(HOST_TO_GUEST[tag], True)
    if direction == "guest->host":
        if isinstance(tag, GuestColumnType):
            tag = tag.base
        if not isinstance(tag, GuestBase):
            raise BridgeError(f"expected a guest element type, got {tag!r}")
        out = GUEST_TO_HOST[tag]
        if tag is GuestBase.F32 and observed_range is not None:
            lo, hi = observed_range
            if max(abs(lo), abs(hi)) > StorageType.FLOAT.valid_max:
                out = StorageType.DOUBLE
        return out
    raise BridgeError(f"unknown direction {direction!r}")


# -- helpers ----------------------------------------------------------------------


def _parallel(tasks: Sequence[Callable[[], object]], thread_limit: int) -> List[object]:
    if thread_limit <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=min(thread_limit, len(tasks))) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _vector_bytes(vec: GuestVector) -> int:
    if vec.ctype.base is GuestBase.STR:
        return sum(len(s.encode("utf-8")) for s, m in zip(vec.data, vec.missing_mask()) if not m)
    return len(vec) * vec.ctype.base.width


def category_levels(codes: np.ndarray, table: Optional[ValueLabelTable]) -> Tuple[Tuple[str, ...], Dict[int, int]]:
    """Ordered level labels and a code→level-index lookup for a labeled column.

    Levels come from the union of the table's codes and the codes present,
    sorted by code; a code without a label uses its decimal text.
    """
    present = set(int(c) for c in np.unique(codes))
    mapping = table.mapping if table is not None else {}
    all_codes = sorted(present | set(mapping))
    levels: List[str] = []
    index_of: Dict[str, int] = {}
    code_index: Dict[int, int] = {}
    for c in all_codes:
        label = mapping.get(c, str(c))
        if label not in index_of:
            levels.append(label)
            index_of[label] = len(levels)
        code_index[c] = index_of[label]
    return tuple(levels), code_index


def host_column_to_guest(
    var: Variable,
    rows: np.ndarray,
    table: Optional[ValueLabelTable],
    opts: CopyOptions,
    block: Optional[np.ndarray] = None,
) -> GuestVector:
    """Convert one host column, already row-restricted by ``rows``."""
    raw = var.data[rows] if var.stype.is_numeric else [var.data[i] for i in rows]  # type: ignore[index]
    stype = var.stype
    if stype.is_string:
        cells = np.array(raw, dtype=object)
        mask = None if opts.nomissing else (cells == "")
        cells = cells if mask is None else np.where(mask, "", cells).astype(object)
        return GuestVector(cells, GuestColumnType(GuestBase.STR, True), mask)
    miss = None if opts.nomissing else missing_mask_array(stype, raw)
    labeled = table is not None and stype.is_integer and not opts.nolabel
    if labeled:
        live = raw if miss is None else raw[~miss]
        levels, code_index = category_levels(live, table)
        keys = np.array(sorted(code_index), dtype=np.int64)
        vals = np.array([code_index[k] for k in keys], dtype=np.uint32)
        pos = np.clip(np.searchsorted(keys, raw.astype(np.int64)), 0, max(len(keys) - 1, 0))
        idx = vals[pos] if len(keys) else np.zeros(len(raw), dtype=np.uint32)
        if miss is not None:
            idx = np.where(miss, np.uint32(0), idx).astype(np.uint32)
        return GuestVector(idx, GuestColumnType(GuestBase.CAT, True), miss, levels)
    if block is not None:
        block[:] = widen_to_double(stype, raw)
        data = block
        base = GuestBase.F64
    else:
        base = HOST_TO_GUEST[stype]
        data = np.array(raw, dtype=base.dtype, copy=True)
    if miss is not None:
        data[miss] = 0
    return GuestVector(data, GuestColumnType(base, True), miss)


def _restriction_rows(ws: Workspace, restriction: Optional[SampleRestriction]) -> np.ndarray:
    restriction = restriction or SampleRestriction.all()
    return restriction.indices(ws.dataset.nobs)


# -- host -> guest ----------------------------------------------------------------


def put_vars_to_df(
    ws: Workspace,
    guest: Dict[str, object],
    varlist=None,
    restriction: Optional[SampleRestriction] = None,
    opts: Optional[CopyOptions] = None,
    thread_limit: int = 1,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    names = ws.dataset.expand_varlist(varlist)
    cols = opts.cols or names
    if len(cols) != len(names):
        raise BridgeError(f"cols() names {len(cols)} columns but the varlist has {len(names)} variables")
    if len(set(cols)) != len(cols):
        raise BridgeError("cols() names must be unique")
    rows = _restriction_rows(ws, restriction)
    ws.begin_transfer()
    try:
        variables = [ws.dataset.get(n) for n in names]
        tables = [ws.label_tables.get(v.label_table or "") if v.label_table else None for v in variables]
        block_cols: Dict[int, int] = {}
        block = None
        if opts.doubleonly:
            numeric = [
                k for k, v in enumerate(variables)
                if v.stype.is_numeric and not (tables[k] is not None and v.stype.is_integer and not opts.nolabel)
            ]
            block = np.empty((len(rows), len(numeric)), dtype=np.float64, order="F")
            block_cols = {k: c for c, k in enumerate(numeric)}

        def task(k: int):
            slot = block[:, block_cols[k]] if k in block_cols else None  # type: ignore[index]
            return host_column_to_guest(variables[k], rows, tables[k], opts, slot)

        vectors = _parallel([lambda k=k: task(k) for k in range(len(variables))], thread_limit)
    finally:
        ws.end_transfer()
    df = GuestDataFrame()
    for name, vec in zip(cols, vectors):
        df.columns[name] = vec  # type: ignore[assignment]
    guest[opts.dest_name] = df
    nbytes = sum(_vector_bytes(v) for v in vectors)  # type: ignore[arg-type]
    return TransferReport(len(rows), len(names), nbytes, time.perf_counter() - t0, opts.path)


def save_df(
    ws: Workspace,
    guest: Dict[str, object],
    dfname: Optional[str] = None,
    opts: Optional[CopyOptions] = None,
    thread_limit: int = 1,
) -> TransferReport:
    opts = opts or CopyOptions()
    if ws.dataset.nvar == 0:
        raise BridgeError("no variables defined")
    if dfname:
        opts.destination = dfname
    return put_vars_to_df(ws, guest, None, None, opts, thread_limit)


# -- guest -> host ----------------------------------------------------------------


_PROMOTE_RANK = {
    StorageType.BYTE: 0,
    StorageType.INT: 1,
    StorageType.LONG: 2,
    StorageType.FLOAT: 3,
    StorageType.DOUBLE: 4,
}


def promote_storage(a: StorageType, b: StorageType) -> StorageType:
    """Smallest storage type able to hold values of both ``a`` and ``b``."""
    if a.is_string != b.is_string:
        raise BridgeError(f"type mismatch: cannot combine {a.value} and {b.value}")
    if a.is_string:
        return StorageType.STRL if StorageType.STRL in (a, b) else StorageType.STR
    if {a, b} == {StorageType.LONG, StorageType.FLOAT}:
        return StorageType.DOUBLE
    return a if _PROMOTE_RANK[a] >= _PROMOTE_RANK[b] else b


def _finite_range(data: np.ndarray, mask: Optional[np.ndarray]) -> Optional[Tuple[float, float]]:
    live = data if mask is None else data[~mask]
    live = live[np.isfinite(live)] if live.dtype.kind == "f" else live
    if live.size == 0:
        return None
    return float(live.min()), float(live.max())


@dataclass
class HostColumn:
    """A converted guest column ready to be written into the host."""

    stype: StorageType
    cells: object  # ndarray for numerics, list of str for strings
    labels: Optional[Dict[int, str]] = None
    overflow: int = 0
    binary: Optional[np.ndarray] = field(default=None, repr=False)


def guest_vector_to_host(vec: GuestVector, nomissing: bool = False) -> HostColumn:
    base = vec.ctype.base
    mask = None if nomissing else vec.mask
    if base is GuestBase.STR:
        cells = [("" if (mask is not None and mask[i]) else str(s)) for i, s in enumerate(vec.data)]
        return HostColumn(StorageType.STR, cells)
    if base is GuestBase.CAT:
        assert vec.levels is not None
        codes = vec.data.astype(np.float64)
        labels = {k + 1: lab for k, lab in enumerate(vec.levels)}
        if mask is not None:
            codes = np.where(mask, double_missing(0), codes)
        cells, overflow = narrow_from_double(StorageType.INT, codes)
        return HostColumn(StorageType.INT, cells, labels, overflow)
    obs = _finite_range(vec.data.astype(np.float64), mask) if base is GuestBase.F32 else None
    stype = map_type("guest->host", base, obs)
    values = vec.data.astype(np.float64)
    if mask is not None:
        values = np.where(mask, double_missing(0), values)
    cells, overflow = narrow_from_double(stype, values)
    return HostColumn(stype, cells, None, overflow)


def _as_vector(obj) -> GuestVector:
    if isinstance(obj, GuestVector):
        return obj
    raise BridgeError(f"expected a column vector, got {type(obj).__name__}")


def _guest_df(guest: Dict[str, object], name: str) -> GuestDataFrame:
    df = guest.get(name)
    if df is None:
        raise BridgeError(f"DataFrame {name} not found")
    if not isinstance(df, GuestDataFrame):
        raise BridgeError(f"{name} is not a DataFrame")
    return df


def _write_column(
    ws: Workspace,
    name: str,
    col: HostColumn,
    rows: np.ndarray,
    replace: bool,
) -> None:
    ds = ws.dataset
    if ds.has(name):
        if not replace:
            raise BridgeError(f"variable {name} already defined")
        var = ds.get(name)
        target = promote_storage(var.stype, col.stype)
        if target is not var.stype:
            var = _retype(var, target)
            ws.replace_variable(var)
    else:
        var = Variable.empty(name, col.stype, ds.nobs)
        ws.add_variable(var)
    ws._mutating()
    if var.stype.is_string:
        for r, s in zip(rows, col.cells):  # type: ignore[arg-type]
            var.data[int(r)] = s  # type: ignore[index]
            if var.binary is not None:
                var.binary[int(r)] = False
    else:
        cells = np.asarray(col.cells)
        if cells.dtype != var.stype.dtype:
            narrowed, overflow = narrow_from_double(var.stype, widen_to_double(col.stype, cells))
            col.overflow += overflow
            cells = narrowed
        var.data[rows] = cells  # type: ignore[index]
    if col.labels is not None:
        ws.define_labels(name, col.labels)
        ws.attach_labels(name, name)


def _retype(var: Variable, target: StorageType) -> Variable:
    if target.is_string:
        out = Variable.empty(var.name, target, len(var))
        out.data = list(var.data)  # type: ignore[arg-type]
        return out
    values = widen_to_double(var.stype, var.data)  # type: ignore[arg-type]
    cells, _ = narrow_from_double(target, values)
    return Variable(var.name, target, cells, var.label_table if target.is_integer else None)


def get_vars_from_df(
    ws: Workspace,
    guest: Dict[str, object],
    varlist: Optional[List[str]] = None,
    restriction: Optional[SampleRestriction] = None,
    opts: Optional[CopyOptions] = None,
    thread_limit: int = 1,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    df = _guest_df(guest, opts.source_name)
    sources = opts.cols or (list(varlist) if varlist else df.names())
    targets = list(varlist) if varlist else list(sources)
    if len(sources) != len(targets):
        raise BridgeError(f"cols() names {len(sources)} columns but the varlist has {len(targets)} variables")
    for s in sources:
        if s not in df.columns:
            _missing_column(opts.source_name, s)
    rows = _restriction_rows(ws, restriction)
    if len(rows) < df.nrow:
        raise BridgeError(
            f"data set has {len(rows)} selected observations; DataFrame {opts.source_name} has {df.nrow} rows"
        )
    for t in targets:
        if ws.dataset.has(t) and not opts.replace:
            raise BridgeError(f"variable {t} already defined")
    ws.begin_transfer()
    try:
        vectors = [_as_vector(df.columns[s]) for s in sources]
        columns = _parallel(
            [lambda v=v: guest_vector_to_host(v, opts.nomissing) for v in vectors], thread_limit
        )
    finally:
        ws.end_transfer()
    # every target must accept its column before any of them is written
    for name, col in zip(targets, columns):
        if ws.dataset.has(name):
            promote_storage(ws.dataset.get(name).stype, col.stype)  # type: ignore[union-attr]
    dest_rows = rows[: df.nrow]
    overflow = 0
    for name, col in zip(targets, columns):
        _write_column(ws, name, col, dest_rows, opts.replace)  # type: ignore[arg-type]
        overflow += col.overflow  # type: ignore[union-attr]
    nbytes = sum(_vector_bytes(v) for v in vectors)
    return TransferReport(df.nrow, len(targets), nbytes, time.perf_counter() - t0, opts.path, overflow)


def _missing_column(dfname: str, col: str):
    raise BridgeError(f"column {col} not found in DataFrame {dfname}")


def use_df(
    ws: Workspace,
    guest: Dict[str, object],
    dfname: Optional[str] = None,
    varlist: Optional[List[str]] = None,
    opts: Optional[CopyOptions] = None,
    thread_limit: int = 1,
) -> TransferReport:
    opts = opts or CopyOptions()
    if ws.dirty and not opts.clear:
        raise BridgeError("no; data in memory would be lost")
    t0 = time.perf_counter()
    name = dfname or opts.source_name
    df = _guest_df(guest, name)
    names = list(varlist) if varlist else df.names()
    for n in names:
        if n not in df.columns:
            _missing_column(name, n)
    vectors = [_as_vector(df.columns[n]) for n in names]
    columns = _parallel([lambda v=v: guest_vector_to_host(v, opts.nomissing) for v in vectors], thread_limit)
    variables = []
    labels: Dict[str, ValueLabelTable] = {}
    for n, col in zip(names, columns):
        check_identifier(n)
        data = list(col.cells) if col.stype.is_string else np.asarray(col.cells)  # type: ignore[union-attr]
        var = Variable(n, col.stype, data, n if col.labels else None)  # type: ignore[union-attr]
        variables.append(var)
        if col.labels:  # type: ignore[union-attr]
            labels[n] = ValueLabelTable(n, col.labels)  # type: ignore[union-attr]
    ws.replace_dataset(Dataset(df.nrow, variables), labels)
    nbytes = sum(_vector_bytes(v) for v in vectors)
    return TransferReport(df.nrow, len(names), nbytes, time.perf_counter() - t0, opts.path)


# -- matrices -------------------------------------------------------------------


def put_vars_to_mat(
    ws: Workspace,
    guest: Dict[str, object],
    varlist=None,
    restriction: Optional[SampleRestriction] = None,
    opts: Optional[CopyOptions] = None,
    thread_limit: int = 1,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    names = ws.dataset.expand_varlist(varlist)
    variables = [ws.dataset.get(n) for n in names]
    for v in variables:
        if v.stype.is_string:
            raise BridgeError(f"type mismatch: {v.name} is a string variable")
    rows = _restriction_rows(ws, restriction)
    out = np.empty((len(rows), len(variables)), dtype=np.float64, order="F")
    ws.begin_transfer()
    try:

        def task(c: int):
            out[:, c] = widen_to_double(variables[c].stype, variables[c].data[rows])  # type: ignore[index]

        _parallel([lambda c=c: task(c) for c in range(len(variables))], thread_limit)
    finally:
        ws.end_transfer()
    guest[opts.dest_name] = GuestMatrix(out)
    return TransferReport(len(rows), len(names), out.nbytes, time.perf_counter() - t0, opts.path)


def _guest_matrix(guest: Dict[str, object], name: str) -> np.ndarray:
    obj = guest.get(name)
    if obj is None:
        raise BridgeError(f"matrix {name} not found")
    if isinstance(obj, GuestMatrix):
        return obj.data
    if isinstance(obj, GuestVector) and obj.data.dtype != object and not obj.has_missing():
        return obj.data.astype(np.float64).reshape(-1, 1)
    raise BridgeError(f"{name} is not a numeric matrix")


def get_vars_from_mat(
    ws: Workspace,
    guest: Dict[str, object],
    varlist: List[str],
    restriction: Optional[SampleRestriction] = None,
    opts: Optional[CopyOptions] = None,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    if not varlist:
        raise BridgeError("varlist required")
    if opts.source is None:
        raise BridgeError("option source() required")
    data = _guest_matrix(guest, opts.source)
    r, c = data.shape
    if c != len(varlist):
        raise BridgeError(f"matrix {opts.source} has {c} columns but the varlist names {len(varlist)} variables")
    rows = _restriction_rows(ws, restriction)
    if r > len(rows):
        raise BridgeError(f"matrix {opts.source} has {r} rows; only {len(rows)} observations are selected")
    for n in varlist:
        if ws.dataset.has(n) and not opts.replace:
            raise BridgeError(f"variable {n} already defined")
    stypes = [ws.dataset.get(n).stype if ws.dataset.has(n) else StorageType.DOUBLE for n in varlist]
    for n, stype in zip(varlist, stypes):
        if stype.is_string:
            raise BridgeError(f"type mismatch: {n} is a string variable")
    dest = rows[:r]
    overflow = 0
    for k, (n, stype) in enumerate(zip(varlist, stypes)):
        cells, ov = narrow_from_double(stype, data[:, k])
        overflow += ov
        _write_column(ws, n, HostColumn(stype, cells), dest, opts.replace)
    return TransferReport(r, c, data.nbytes, time.perf_counter() - t0, opts.path, overflow)


def put_mat_to_mat(
    ws: Workspace,
    guest: Dict[str, object],
    matname: str,
    opts: Optional[CopyOptions] = None,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    mat = ws.matrix(matname)
    dest = opts.destination or matname
    guest[dest] = GuestMatrix(np.array(mat.data, dtype=np.float64, order="F", copy=True))
    return TransferReport(mat.rows, mat.cols, mat.data.nbytes, time.perf_counter() - t0, opts.path)


def get_mat_from_mat(
    ws: Workspace,
    guest: Dict[str, object],
    matname: str,
    opts: Optional[CopyOptions] = None,
) -> TransferReport:
    opts = opts or CopyOptions()
    t0 = time.perf_counter()
    source = opts.source or matname
    data = _guest_matrix(guest, source)
    if data.shape[0] < 1 or data.shape[1] < 1:
        raise BridgeError(f"matrix {source} is empty; host matrices need at least one row and column")
    ws.define_object("matrix", matname, np.array(data, dtype=np.float64, order="F", copy=True))
    return TransferReport(data.shape[0], data.shape[1], data.nbytes, time.perf_counter() - t0, opts.path)
