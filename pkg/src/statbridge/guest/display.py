"""Text rendering of guest values, in the style of an interactive REPL."""

from __future__ import annotations

import math
from typing import List

import numpy as np

from .values import (
    MISSING,
    NOTHING,
    Builtin,
    GuestBase,
    GuestDataFrame,
    GuestFunction,
    GuestMatrix,
    GuestModule,
    GuestRange,
    GuestType,
    GuestVector,
    GuestView,
)

DF_HEAD_ROWS = 8
DF_TAIL_ROWS = 7
VEC_EDGE = 10


def format_float(x: float) -> str:
    """Shortest round-trip form; exponent notation outside [1e-4, 1e6)."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    if x == 0:
        return "-0.0" if math.copysign(1.0, x) < 0 else "0.0"
    ax = abs(x)
    if 1e-4 <= ax < 1e6:
        text = repr(x)
        if "e" in text:
            text = f"{x:f}".rstrip("0")
        return text if "." in text else text + ".0"
    mant, _, exp = np.format_float_scientific(x, unique=True).partition("e")
    if mant.endswith("."):
        mant += "0"
    return f"{mant}e{int(exp)}"


def format_float32(x: float) -> str:
    text = str(np.float32(x))
    if "e" in text:
        m, _, e = text.partition("e")
        if "." not in m:
            m += ".0"
        return f"{m}e{int(e)}"
    return text if "." in text or "n" in text else text + ".0"


def scalar_string(x) -> str:
    """What ``print``/``string`` produce for a value."""
    if x is MISSING:
        return "missing"
    if x is NOTHING:
        return "nothing"
    t = type(x)
    if t is bool:
        return "true" if x else "false"
    if t is int:
        return str(x)
    if t is float:
        return format_float(x)
    if t is str:
        return x
    if isinstance(x, (np.floating,)):
        return format_float32(float(x)) if x.dtype == np.float32 else format_float(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    if isinstance(x, np.bool_):
        return "true" if x else "false"
    return show(x, compact=True)


def show_scalar(x) -> str:
    """REPL rendering of a scalar (strings quoted)."""
    if type(x) is str:
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    return scalar_string(x)


def cell_text(col: GuestVector, i: int) -> str:
    v = col.element(i)
    if v is MISSING:
        return "missing"
    if col.ctype.base is GuestBase.F32:
        return format_float32(v)
    return scalar_string(v)


def show(x, compact: bool = False) -> str:
    if isinstance(x, GuestDataFrame):
        return show_dataframe(x)
    if isinstance(x, GuestVector):
        return show_vector(x, compact)
    if isinstance(x, GuestView):
        return show_matrix(x.materialize(), compact, "SubArray{Float64, 2}")
    if isinstance(x, GuestMatrix):
        return show_matrix(x, compact)
    if isinstance(x, GuestRange):
        return f"{x.start}:{x.stop}" if x.step == 1 else f"{x.start}:{x.step}:{x.stop}"
    if isinstance(x, tuple):
        inner = ", ".join(show(v, True) for v in x)
        return f"({inner},)" if len(x) == 1 else f"({inner})"
    if isinstance(x, GuestFunction):
        return repr(x)
    if isinstance(x, Builtin):
        return f"{x.name} (generic function with 1 method)"
    if isinstance(x, GuestModule):
        return x.name
    if isinstance(x, GuestType):
        return x.name
    return show_scalar(x)


def _elem_texts(col: GuestVector, idx: List[int], quote: bool) -> List[str]:
    out = []
    for i in idx:
        v = col.element(i)
        if quote and type(v) is str:
            out.append(show_scalar(v))
        elif col.ctype.base is GuestBase.F32 and v is not MISSING:
            out.append(format_float32(v))
        else:
            out.append(scalar_string(v))
    return out


def show_vector(v: GuestVector, compact: bool = False) -> str:
    n = len(v)
    if compact:
        texts = _elem_texts(v, list(range(n)), True)
        return "[" + ", ".join(texts) + "]"
    head = f"{n}-element Vector{{{v.ctype.julia_eltype}}}" + (":" if n else "")
    if n <= 2 * VEC_EDGE:
        rows = _elem_texts(v, list(range(n)), True)
    else:
        rows = (
            _elem_texts(v, list(range(VEC_EDGE)), True)
            + ["⋮"]
            + _elem_texts(v, list(range(n - VEC_EDGE, n)), True)
        )
    return "\n".join([head] + [" " + r for r in rows])


def show_matrix(m: GuestMatrix, compact: bool = False, tname: str = "") -> str:
    data = m.data
    r, c = data.shape
    fmt = scalar_string
    if compact:
        rows = ["; ".join(" ".join(fmt(data[i, j].item()) for j in range(c)) for i in range(r))]
        return "[" + rows[0] + "]"
    tname = tname or f"Matrix{{{_eltype_name(data)}}}"
    head = f"{r}×{c} {tname}" + (":" if r and c else "")
    show_rows = list(range(r)) if r <= 2 * VEC_EDGE else list(range(VEC_EDGE)) + [-1] + list(range(r - VEC_EDGE, r))
    cells = [[fmt(data[i, j].item()) for j in range(c)] if i >= 0 else ["⋮"] * c for i in show_rows]
    widths = [max((len(row[j]) for row in cells), default=0) for j in range(c)]
    lines = [head]
    for row in cells:
        lines.append(" " + "  ".join(txt.rjust(widths[j]) for j, txt in enumerate(row)))
    return "\n".join(lines)


def _eltype_name(data: np.ndarray) -> str:
    if data.dtype == np.bool_:
        return "Bool"
    if data.dtype.kind in "iu":
        return "Int64"
    return "Float64"


def _type_label(col: GuestVector, width: int) -> str:
    label = col.ctype.name
    if len(label) <= width:
        return label
    suffix = "?" if col.ctype.allows_missing else ""
    return label[:3] + "…" + suffix


def show_dataframe(df: GuestDataFrame) -> str:
    nrow, ncol = df.nrow, df.ncol
    lines = [f"{nrow}×{ncol} DataFrame"]
    if ncol == 0:
        return lines[0]
    if nrow > DF_HEAD_ROWS + DF_TAIL_ROWS:
        shown = list(range(DF_HEAD_ROWS)) + [-1] + list(range(nrow - DF_TAIL_ROWS, nrow))
    else:
        shown = list(range(nrow))
    names = df.names()
    cols = [df.columns[n] for n in names]
    body = [[cell_text(col, i) if i >= 0 else "" for col in cols] for i in shown]
    widths = []
    for j, name in enumerate(names):
        w = max([len(name)] + [len(row[j]) for row in body])
        if not cols[j].is_categorical:
            w = max(w, len(cols[j].ctype.name))
        widths.append(w)
    types = [_type_label(col, widths[j]) for j, col in enumerate(cols)]
    rownum_w = max(3, len(str(nrow)))

    def numeric(col: GuestVector) -> bool:
        return col.ctype.base not in (GuestBase.STR, GuestBase.CAT)

    def fmt_row(lead: str, cells: List[str], align_types: bool = False) -> str:
        parts = []
        for j, txt in enumerate(cells):
            if numeric(cols[j]) and not align_types:
                parts.append(txt.rjust(widths[j]))
            else:
                parts.append(txt.ljust(widths[j]))
        return (f" {lead.rjust(rownum_w)} │ " + "  ".join(parts)).rstrip()

    lines.append(fmt_row("Row", names, True))
    lines.append(fmt_row("", types, True))
    lines.append("─" * (rownum_w + 2) + "┼" + "─" * (sum(widths) + 2 * (ncol - 1) + 2))
    for i, row in zip(shown, body):
        lines.append(fmt_row(str(i + 1) if i >= 0 else "⋮", row))
    if nrow > DF_HEAD_ROWS + DF_TAIL_ROWS:
        omitted = nrow - DF_HEAD_ROWS - DF_TAIL_ROWS
        lines.append(f"{omitted} rows omitted".rjust(sum(widths) + 2 * ncol + rownum_w))
    return "\n".join(lines)
