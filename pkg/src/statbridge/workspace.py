"""In-memory host workspace: one dataset, matrices, scalars, macros, labels."""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import WorkspaceError
from .storage import StorageType, encode_missing

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]{0,31}$")


def check_identifier(name: str) -> str:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise WorkspaceError(f"{name!r} invalid name")
    return name


@dataclass
class ValueLabelTable:
    name: str
    mapping: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for code, label in self.mapping.items():
            if not isinstance(code, (int, np.integer)) or isinstance(code, bool):
                raise WorkspaceError(f"value label codes must be integers, got {code!r}")
            if not label:
                raise WorkspaceError("value labels must be nonempty")
        self.mapping = {int(k): v for k, v in self.mapping.items()}


@dataclass
class Variable:
    """One host column.

    Numeric cells live in a numpy array of the storage dtype. String cells
    are a list of ``str``; for strL a parallel boolean array marks binary
    cells, whose text is the latin-1 decoding of the raw bytes.
    """

    name: str
    stype: StorageType
    data: object
    label_table: Optional[str] = None
    binary: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.data)  # type: ignore[arg-type]

    @classmethod
    def empty(cls, name: str, stype: StorageType, nobs: int) -> Variable:
        if stype.is_string:
            binary = np.zeros(nobs, dtype=bool) if stype is StorageType.STRL else None
            return cls(name, stype, [""] * nobs, binary=binary)
        data = np.full(nobs, encode_missing(0, stype), dtype=stype.dtype)
        return cls(name, stype, data)

    def copy(self) -> Variable:
        data = list(self.data) if self.stype.is_string else np.array(self.data, copy=True)
        binary = None if self.binary is None else self.binary.copy()
        return Variable(self.name, self.stype, data, self.label_table, binary)

    def pad(self, n: int) -> None:
        extra = n - len(self)
        if extra <= 0:
            return
        if self.stype.is_string:
            self.data = list(self.data) + [""] * extra  # type: ignore[arg-type]
            if self.binary is not None:
                self.binary = np.concatenate([self.binary, np.zeros(extra, dtype=bool)])
        else:
            tail = np.full(extra, encode_missing(0, self.stype), dtype=self.stype.dtype)
            self.data = np.concatenate([self.data, tail])  # type: ignore[list-item]


@dataclass
class Dataset:
    nobs: int = 0
    variables: List[Variable] = field(default_factory=list)

    @property
    def nvar(self) -> int:
        return len(self.variables)

    def names(self) -> List[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        """0-based position of ``name``."""
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise WorkspaceError(f"variable {name} not found")

    def get(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def has(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def copy(self) -> Dataset:
        return Dataset(self.nobs, [v.copy() for v in self.variables])

    def expand_varlist(self, spec: str | List[str] | None) -> List[str]:
        """Resolve a varlist: names, ``*``/``?`` wildcards, and ``a-b`` ranges."""
        if spec is None:
            return self.names()
        tokens = spec.split() if isinstance(spec, str) else list(spec)
        if not tokens:
            return self.names()
        names = self.names()
        out: List[str] = []
        for tok in tokens:
            if tok == "*" or tok == "_all":
                out.extend(names)
            elif any(ch in tok for ch in "*?"):
                hits = [n for n in names if fnmatch.fnmatchcase(n, tok)]
                if not hits:
                    raise WorkspaceError(f"variable {tok} not found")
                out.extend(hits)
            elif "-" in tok and not tok.startswith("-"):
                first, last = tok.split("-", 1)
                i, j = self.index(first), self.index(last)
                if j < i:
                    raise WorkspaceError(f"{tok}: variables out of order")
                out.extend(names[i : j + 1])
            else:
                self.index(tok)
                out.append(tok)
        seen = set()
        return [n for n in out if not (n in seen or seen.add(n))]


@dataclass
class HostMatrix:
    name: str
    data: np.ndarray

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])


@dataclass
class MacroFrame:
    locals: Dict[str, str] = field(default_factory=dict)
    parent: Optional[MacroFrame] = None
    pending_promotions: List[str] = field(default_factory=list)

    def mark_for_promotion(self, name: str) -> None:
        if name not in self.pending_promotions:
            self.pending_promotions.append(name)


class Workspace:
    """Host state. All mutation is expected from a single control thread."""

    def __init__(self) -> None:
        self.dataset = Dataset()
        self.matrices: Dict[str, HostMatrix] = {}
        self.scalars: Dict[str, float] = {}
        self.globals: Dict[str, str] = {}
        self.label_tables: Dict[str, ValueLabelTable] = {}
        self.frames: List[MacroFrame] = [MacroFrame()]
        self.dirty = False
        self.r_results: Dict[str, str] = {}
        self._transfer_depth = 0

    # -- dataset shape ------------------------------------------------------

    def _mutating(self) -> None:
        if self._transfer_depth:
            raise WorkspaceError("workspace is locked while a transfer is running")
        self.dirty = True

    def set_obs(self, n: int) -> None:
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 0:
            raise WorkspaceError(f"obs must be a nonnegative integer, got {n!r}")
        ds = self.dataset
        if ds.variables and n < ds.nobs:
            raise WorkspaceError("cannot reduce observations")
        self._mutating()
        for var in ds.variables:
            var.pad(int(n))
        ds.nobs = int(n)

    def create_variable(self, name: str, stype: StorageType) -> Variable:
        check_identifier(name)
        if self.dataset.has(name):
            raise WorkspaceError(f"variable {name} already defined; name in use")
        self._mutating()
        var = Variable.empty(name, stype, self.dataset.nobs)
        self.dataset.variables.append(var)
        return var

    def add_variable(self, var: Variable) -> None:
        """Append a fully built column (used by bulk transfers)."""
        check_identifier(var.name)
        if self.dataset.has(var.name):
            raise WorkspaceError(f"variable {var.name} already defined; name in use")
        if len(var) != self.dataset.nobs:
            raise WorkspaceError("column length does not match observation count")
        self._mutating()
        self.dataset.variables.append(var)

    def replace_variable(self, var: Variable) -> None:
        i = self.dataset.index(var.name)
        if len(var) != self.dataset.nobs:
            raise WorkspaceError("column length does not match observation count")
        self._mutating()
        self.dataset.variables[i] = var

    def drop(self, names: List[str]) -> None:
        self._mutating()
        keep = set(self.dataset.names()) - set(names)
        self.dataset.variables = [v for v in self.dataset.variables if v.name in keep]

    def keep(self, names: List[str]) -> None:
        self._mutating()
        wanted = set(names)
        self.dataset.variables = [v for v in self.dataset.variables if v.name in wanted]

    def clear(self) -> None:
        self.dataset = Dataset()
        self.label_tables = {}
        self.dirty = False

    def replace_dataset(self, ds: Dataset, labels: Dict[str, ValueLabelTable]) -> None:
        self.dataset = ds
        self.label_tables = dict(labels)
        self.dirty = False

    # -- matrices and scalars -----------------------------------------------

    def define_object(self, kind: str, name: str, payload) -> None:
        check_identifier(name)
        if kind == "scalar":
            self.scalars[name] = float(payload)
        elif kind == "matrix":
            if isinstance(payload, np.ndarray):
                data = np.array(payload, dtype=np.float64, order="F", ndmin=2)
            else:
                rows, cols = payload
                if rows < 1 or cols < 1:
                    raise WorkspaceError(f"matrix dimensions must be at least 1x1, got {rows}x{cols}")
                data = np.full((rows, cols), encode_missing(0, StorageType.DOUBLE), order="F")
            if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
                raise WorkspaceError(f"matrix dimensions must be at least 1x1, got {data.shape}")
            self.matrices[name] = HostMatrix(name, data)
        else:
            raise WorkspaceError(f"unknown object kind {kind!r}")

    def matrix(self, name: str) -> HostMatrix:
        try:
            return self.matrices[name]
        except KeyError:
            raise WorkspaceError(f"matrix {name} not found") from None

    # -- value labels -------------------------------------------------------

    def define_labels(self, name: str, mapping: Dict[int, str]) -> None:
        check_identifier(name)
        self.label_tables[name] = ValueLabelTable(name, dict(mapping))

    def attach_labels(self, varname: str, table: Optional[str]) -> None:
        var = self.dataset.get(varname)
        if table is not None:
            if not var.stype.is_integer:
                raise WorkspaceError(
                    f"may not label {var.stype.value} variable {varname}; integer types only"
                )
            if table not in self.label_tables:
                raise WorkspaceError(f"value label {table} not found")
        var.label_table = table
        self.dirty = True

    def lookup_label(self, varname: str, code: int) -> str:
        var = self.dataset.get(varname)
        table = self.label_tables.get(var.label_table or "")
        if table is not None and int(code) in table.mapping:
            return table.mapping[int(code)]
        return str(int(code))

    # -- macro frames -------------------------------------------------------

    @property
    def frame(self) -> MacroFrame:
        return self.frames[-1]

    def push_frame(self) -> MacroFrame:
        child = MacroFrame(parent=self.frames[-1])
        self.frames.append(child)
        return child

    def pop_frame(self) -> MacroFrame:
        if len(self.frames) < 2:
            raise WorkspaceError("cannot pop root frame")
        return self.frames.pop()

    def set_local(self, name: str, value: str) -> None:
        self.frames[-1].locals[name] = str(value)

    def get_local(self, name: str) -> Optional[str]:
        """Current frame only; parents are deliberately invisible."""
        return self.frames[-1].locals.get(name)

    def promote(self) -> MacroFrame:
        child = self.pop_frame()
        parent = self.frames[-1]
        for name in child.pending_promotions:
            if name in child.locals:
                parent.locals[name] = child.locals[name]
        return child

    # -- transfer locking ---------------------------------------------------

    def begin_transfer(self) -> None:
        self._transfer_depth += 1

    def end_transfer(self) -> None:
        self._transfer_depth -= 1

    # -- persistence ----------------------------------------------------------

    def store(self, path) -> None:
        from .dsfile import write_dataset

        write_dataset(path, self.dataset, self.label_tables)
        self.dirty = False

    def load(self, path) -> None:
        from .dsfile import read_dataset

        ds, labels = read_dataset(path)
        self.replace_dataset(ds, labels)
