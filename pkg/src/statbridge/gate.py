"""The constrained boundary through which the guest touches the host.

A :class:`GateSession` offers cell reads and writes in double precision
along with string cells. It also reaches macros and scalars, plus matrices
that already exist on the host. Nothing here can create a variable
or a matrix; callers that need new host objects must make them on the host
side before opening a gate.

Indices are 1-based throughout, like the interface they model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import GateError, WorkspaceError
from .storage import (
    SYSMISS,
    StorageType,
    decode_missing,
    is_missing_double,
    narrow_scalar,
    widen_scalar,
)
from .workspace import MacroFrame, Variable, Workspace

STRING_MISSING = ""


@dataclass(frozen=True)
class SampleRestriction:
    """Observation filter: everything, a 1-based inclusive range, or a mask."""

    mode: str = "all"
    first: int = 0
    last: int = 0
    mask: Optional[np.ndarray] = None

    @classmethod
    def all(cls) -> SampleRestriction:
        return cls()

    @classmethod
    def in_range(cls, first: int, last: int) -> SampleRestriction:
        return cls("in_range", int(first), int(last))

    @classmethod
    def from_mask(cls, mask) -> SampleRestriction:
        return cls("mask", mask=np.asarray(mask, dtype=bool))

    @property
    def is_all(self) -> bool:
        return self.mode == "all"

    def validate(self, nobs: int) -> None:
        if self.mode == "in_range":
            if not (1 <= self.first <= self.last <= nobs):
                raise GateError(f"in range {self.first}/{self.last} invalid for {nobs} observations")
        elif self.mode == "mask":
            assert self.mask is not None
            if len(self.mask) != nobs:
                raise GateError(
                    f"sample mask has {len(self.mask)} entries; dataset has {nobs} observations"
                )

    def indices(self, nobs: int) -> np.ndarray:
        """0-based selected observation positions, in order."""
        self.validate(nobs)
        if self.mode == "all":
            return np.arange(nobs)
        if self.mode == "in_range":
            return np.arange(self.first - 1, self.last)
        return np.flatnonzero(self.mask)

    def count(self, nobs: int) -> int:
        return len(self.indices(nobs))

    def contains(self, j: int, nobs: int) -> bool:
        """Whether 1-based observation ``j`` is in the sample."""
        if not 1 <= j <= nobs:
            return False
        if self.mode == "in_range":
            return self.first <= j <= self.last
        if self.mode == "mask":
            return bool(self.mask[j - 1])  # type: ignore[index]
        return True


Emit = Callable[[str, str], None]


class GateSession:
    """One plugin invocation: a pushed macro frame plus accessors."""

    def __init__(
        self,
        workspace: Workspace,
        restriction: Optional[SampleRestriction] = None,
        emit: Optional[Emit] = None,
    ) -> None:
        self.workspace = workspace
        self.restriction = restriction or SampleRestriction.all()
        self.restriction.validate(workspace.dataset.nobs)
        self.output: List[Tuple[str, str]] = []
        self._emit = emit
        self.warnings = 0
        self.gate_frame: MacroFrame = workspace.push_frame()
        self.closed = False

    # -- lifecycle ----------------------------------------------------------

    def close(self, promote: bool = True) -> None:
        """Leave the gate; with ``promote`` pending locals reach the caller."""
        if self.closed:
            return
        if self.workspace.frame is not self.gate_frame:
            raise GateError("macro frame stack corrupted: gate frame is not on top")
        if promote:
            self.workspace.promote()
        else:
            self.workspace.pop_frame()
        self.closed = True

    def __enter__(self) -> GateSession:
        return self

    def __exit__(self, *exc) -> None:
        self.close(promote=exc[0] is None)

    # -- helpers ------------------------------------------------------------

    def _var(self, i: int) -> Variable:
        ds = self.workspace.dataset
        if isinstance(i, bool) or not isinstance(i, (int, np.integer)) or not 1 <= i <= ds.nvar:
            raise GateError(f"variable index {i} out of range 1..{ds.nvar}")
        return ds.variables[i - 1]

    def _obs(self, j: int) -> int:
        nobs = self.workspace.dataset.nobs
        if isinstance(j, bool) or not isinstance(j, (int, np.integer)) or not 1 <= j <= nobs:
            raise GateError(f"observation {j} out of range 1..{nobs}")
        if not self.restriction.contains(int(j), nobs):
            raise GateError(f"observation {j} is outside the sample restriction")
        return int(j) - 1

    # -- numeric cells ------------------------------------------------------

    def vdata(self, j: int, i: int) -> float:
        var = self._var(i)
        if not var.stype.is_numeric:
            raise GateError(f"type mismatch: variable {var.name} is string")
        raw = var.data[self._obs(j)]  # type: ignore[index]
        return widen_scalar(var.stype, raw.item())

    def vstore(self, j: int, i: int, val: float) -> None:
        var = self._var(i)
        if not var.stype.is_numeric:
            raise GateError(f"type mismatch: variable {var.name} is string")
        row = self._obs(j)
        try:
            val = float(val)
        except (TypeError, ValueError):
            raise GateError(f"type mismatch: cannot store {val!r} in numeric variable") from None
        cell, overflow = narrow_scalar(var.stype, val)
        if overflow:
            self.warnings += 1
        self.workspace._mutating()
        var.data[row] = cell  # type: ignore[index]

    def cell_numeric(self, mode: str, j: int, i: int, val: Optional[float] = None):
        if mode == "get":
            return self.vdata(j, i)
        if mode == "set":
            return self.vstore(j, i, val)  # type: ignore[arg-type]
        raise GateError(f"unknown mode {mode!r}")

    # -- string cells -------------------------------------------------------

    def sdata(self, j: int, i: int) -> str:
        var = self._var(i)
        if not var.stype.is_string:
            raise GateError(f"type mismatch: variable {var.name} is numeric")
        return var.data[self._obs(j)]  # type: ignore[index]

    def sstore(self, j: int, i: int, s) -> None:
        var = self._var(i)
        if not var.stype.is_string:
            raise GateError(f"type mismatch: variable {var.name} is numeric")
        row = self._obs(j)
        binary = False
        if isinstance(s, (bytes, bytearray)):
            if var.stype is StorageType.STRL:
                s, binary = bytes(s).decode("latin-1"), True
            else:
                try:
                    s = bytes(s).decode("utf-8")
                except UnicodeDecodeError:
                    raise GateError("binary data requires a strL variable") from None
        elif not isinstance(s, str):
            raise GateError(f"type mismatch: cannot store {s!r} in string variable")
        self.workspace._mutating()
        var.data[row] = s  # type: ignore[index]
        if var.binary is not None:
            var.binary[row] = binary

    def sdatalen(self, j: int, i: int) -> int:
        var = self._var(i)
        if not var.stype.is_string:
            raise GateError(f"variable {var.name} is not a string variable")
        row = self._obs(j)
        binary = var.binary is not None and bool(var.binary[row])
        text = var.data[row]  # type: ignore[index]
        return len(text.encode("latin-1" if binary else "utf-8"))

    # -- macros -------------------------------------------------------------

    def macro_save(self, name: str, value: str, *, is_global: bool = False) -> None:
        if is_global:
            self.workspace.globals[name] = str(value)
        else:
            self.gate_frame.locals[name] = str(value)

    def macro_use(self, name: str, *, is_global: bool = False) -> str:
        # locals of the calling program are unreachable from here
        if not is_global:
            return ""
        return self.workspace.globals.get(name, "")

    def promote_local(self, name: str, value: str) -> None:
        """Write a local and queue it for copying to the caller's frame."""
        self.macro_save(name, value)
        self.gate_frame.mark_for_promotion(name)

    # -- scalars ------------------------------------------------------------

    def scal_save(self, name: str, val: float) -> None:
        self.workspace.define_object("scalar", name, float(val))

    def scal_use(self, name: str) -> float:
        try:
            return self.workspace.scalars[name]
        except KeyError:
            raise GateError(f"scalar {name} not found") from None

    # -- matrices (existing only) -------------------------------------------

    def _mat(self, name: str):
        mat = self.workspace.matrices.get(name)
        if mat is None:
            raise GateError(f"matrix {name} not found")
        return mat

    def mat_rows(self, name: str) -> int:
        return self._mat(name).rows

    def mat_cols(self, name: str) -> int:
        return self._mat(name).cols

    def _mat_cell(self, name: str, i: int, j: int):
        mat = self._mat(name)
        if not (1 <= i <= mat.rows and 1 <= j <= mat.cols):
            raise GateError(f"matrix {name} index [{i},{j}] out of range {mat.rows}x{mat.cols}")
        return mat

    def mat_el(self, name: str, i: int, j: int) -> float:
        return float(self._mat_cell(name, i, j).data[i - 1, j - 1])

    def mat_store(self, name: str, i: int, j: int, val: float) -> None:
        self._mat_cell(name, i, j).data[i - 1, j - 1] = float(val)

    def matrix_view(self, name: str) -> np.ndarray:
        """Read-only copy for bulk matrix reads."""
        return np.array(self._mat(name).data, copy=True)

    def matrix_put(self, name: str, values: np.ndarray) -> None:
        mat = self._mat(name)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != mat.data.shape:
            raise GateError(
                f"conformability error: matrix {name} is {mat.rows}x{mat.cols}, "
                f"value is {'x'.join(map(str, values.shape))}"
            )
        mat.data[:, :] = values

    # -- metadata -----------------------------------------------------------

    def nobs(self) -> int:
        return self.workspace.dataset.nobs

    def nvar(self) -> int:
        return self.workspace.dataset.nvar

    def var_is_string(self, i: int) -> bool:
        return self._var(i).stype.is_string

    def var_is_strl(self, i: int) -> bool:
        return self._var(i).stype is StorageType.STRL

    def var_is_binary(self, j: int, i: int) -> bool:
        var = self._var(i)
        row = self._obs(j)
        return var.binary is not None and bool(var.binary[row])

    def varindex(self, name: str) -> int:
        try:
            return self.workspace.dataset.index(name) + 1
        except WorkspaceError:
            raise GateError(f"variable {name} not found") from None

    def meta_query(self, kind: str, *args):
        table = {
            "nobs": self.nobs,
            "nvar": self.nvar,
            "is_string": self.var_is_string,
            "is_strl": self.var_is_strl,
            "is_binary": self.var_is_binary,
            "sdatalen": self.sdatalen,
            "varindex": self.varindex,
        }
        try:
            fn = table[kind]
        except KeyError:
            raise GateError(f"unknown metadata query {kind!r}") from None
        return fn(*args)

    # -- missing values -----------------------------------------------------

    @staticmethod
    def missval() -> float:
        return SYSMISS

    @staticmethod
    def is_missing(v: float) -> bool:
        return is_missing_double(float(v))

    @staticmethod
    def missing_code(v: float) -> Optional[int]:
        return decode_missing(float(v), StorageType.DOUBLE)

    # -- output -------------------------------------------------------------

    def display(self, s: str) -> None:
        self._out("display", s)

    def error(self, s: str) -> None:
        self._out("error", s)

    def _out(self, kind: str, s: str) -> None:
        s = str(s)
        if not s:
            return
        self.output.append((kind, s))
        if self._emit is not None:
            self._emit(kind, s)

    # -- bulk read snapshot for guest-side copies ---------------------------

    def column_snapshot(self, i: int) -> Variable:
        return self._var(i)
