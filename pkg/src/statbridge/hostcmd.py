"""Parsing for host command lines: options, ``if``/``in`` clauses, expressions.

Host expressions are evaluated column-wise over widened doubles. Because
missing values sit at the top of the double ladder, ordinary comparisons
already give the host ordering: every number < ``.`` < ``.a`` < ... < ``.z``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import ShellError, WorkspaceError
from .gate import SampleRestriction
from .storage import (
    SYSMISS,
    StorageType,
    double_missing,
    double_missing_code,
    is_missing_double,
    missing_name,
    parse_missing_name,
    widen_to_double,
)
from .workspace import Workspace

# canonical option name -> shortest accepted abbreviation
OPTION_ABBREV = {
    "destination": 4,
    "source": 6,
    "cols": 4,
    "nolabel": 5,
    "nomissing": 6,
    "doubleonly": 6,
    "replace": 7,
    "clear": 5,
    "minver": 6,
    "threads": 7,
    "seed": 4,
    "n": 1,
    "m": 1,
}


def split_top(text: str, sep: str) -> Tuple[str, Optional[str]]:
    """Split at the first ``sep`` outside quotes and brackets."""
    depth = 0
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"":
            quote = ch
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == sep and depth == 0:
            return text[:i], text[i + 1 :]
    return text, None


_OPT = re.compile(r"\s*([A-Za-z_]\w*)\s*(?:\(([^()]*)\))?")


def parse_options(text: Optional[str], allowed: Tuple[str, ...]) -> Dict[str, Optional[str]]:
    """Parse ``name`` and ``name(value)`` options, resolving abbreviations."""
    out: Dict[str, Optional[str]] = {}
    if not text or not text.strip():
        return out
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _OPT.match(text, pos)
        if not m or m.end() == pos:
            raise ShellError(f"malformed options: {text.strip()}")
        given, value = m.group(1), m.group(2)
        name = resolve_option(given, allowed)
        if name in out:
            raise ShellError(f"option {name}() specified twice")
        out[name] = value.strip() if value is not None else None
        pos = m.end()
    return out


def resolve_option(given: str, allowed: Tuple[str, ...]) -> str:
    low = given.lower()
    for name in allowed:
        if name.startswith(low) and len(low) >= OPTION_ABBREV.get(name, len(name)):
            return name
    raise ShellError(f"option {given} not allowed")


_IN = re.compile(r"\bin\s+(\S+)\s*$")


def parse_in_range(text: str, nobs: int) -> Tuple[int, int]:
    """``f/l`` (1-based, inclusive) or a single observation number."""
    first, _, last = text.partition("/")

    def one(tok: str) -> int:
        tok = tok.strip()
        if tok in ("f", "F"):
            return 1
        if tok in ("l", "L"):
            return nobs
        try:
            k = int(tok)
        except ValueError:
            raise ShellError(f"'{tok}' invalid observation number") from None
        return nobs + k + 1 if k < 0 else k

    a = one(first)
    b = one(last) if last else a
    if a < 1 or b > nobs or a > b:
        raise ShellError("observation numbers out of range")
    return a, b


@dataclass
class Clauses:
    """A command body with its ``if``/``in`` qualifiers peeled off."""

    body: str
    if_expr: Optional[str] = None
    in_range: Optional[str] = None

    def restriction(self, ws: Workspace) -> SampleRestriction:
        nobs = ws.dataset.nobs
        mask = np.ones(nobs, dtype=bool)
        if self.in_range is not None:
            a, b = parse_in_range(self.in_range, nobs)
            mask[:] = False
            mask[a - 1 : b] = True
        if self.if_expr is not None:
            val = HostExpr(ws, dataset=True).evaluate(self.if_expr)
            cond = np.broadcast_to(np.asarray(val), (nobs,))
            if cond.dtype == object:
                raise ShellError("type mismatch in if condition")
            mask &= (cond != 0) & ~np.isnan(cond.astype(np.float64))
        if self.in_range is None and self.if_expr is None:
            return SampleRestriction.all()
        return SampleRestriction.from_mask(mask)


def split_clauses(text: str) -> Clauses:
    """Separate trailing ``in f/l`` and ``if exp`` from a command body."""
    in_range = None
    m = _IN.search(text)
    if m and not _inside_quotes(text, m.start()):
        in_range = m.group(1)
        text = text[: m.start()]
    if_expr = None
    m = re.search(r"(^|\s)if\s", text)
    if m and not _inside_quotes(text, m.start()):
        if_expr = text[m.end() :].strip()
        text = text[: m.start()]
    return Clauses(text.strip(), if_expr, in_range)


def _inside_quotes(text: str, pos: int) -> bool:
    return text[:pos].count('"') % 2 == 1


# -- number formatting -----------------------------------------------------


def format_number(x: float) -> str:
    """Host general display format: up to 8 significant digits, no leading 0."""
    x = float(x)
    code = double_missing_code(x)
    if code is not None:
        return missing_name(code)
    if math.isnan(x):
        return missing_name(0)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    text = f"{x:.8g}"
    if "e" in text:
        mant, _, exp = text.partition("e")
        return f"{mant}e{exp[0]}{exp[1:].zfill(2)}"
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


def format_count(n: int) -> str:
    return f"{n:,}"


# -- expressions --------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
      | (?P<miss>\.[a-z]?(?![\w]))
      | (?P<str>"[^"]*")
      | (?P<name>[A-Za-z_]\w*)
      | (?P<op>==|!=|~=|<=|>=|[-+*/^()<>&|!~,=\[\]])
    )""",
    re.VERBOSE,
)


def tokenize_expr(text: str) -> List[Tuple[str, str]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ShellError(f"invalid expression near '{text[pos:].strip()}'")
        kind = m.lastgroup or ""
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class HostExpr:
    """Recursive-descent evaluator for host expressions.

    With ``dataset=True`` variable names evaluate to whole columns (as
    widened doubles or object arrays of text); otherwise a variable name
    means its first observation, as the host display command expects.
    """

    def __init__(self, ws: Workspace, dataset: bool = False) -> None:
        self.ws = ws
        self.dataset = dataset
        self.toks: List[Tuple[str, str]] = []
        self.i = 0

    def evaluate(self, text: str):
        self.toks = tokenize_expr(text)
        self.i = 0
        if not self.toks:
            raise ShellError("expression expected")
        v = self.or_()
        if self.i != len(self.toks):
            raise ShellError(f"invalid expression near '{self.toks[self.i][1]}'")
        return v

    # token helpers
    def peek(self) -> Tuple[str, str]:
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", "")

    def take(self) -> Tuple[str, str]:
        t = self.peek()
        self.i += 1
        return t

    def accept(self, *ops: str) -> Optional[str]:
        kind, val = self.peek()
        if kind == "op" and val in ops:
            self.i += 1
            return val
        return None

    def expect(self, op: str) -> None:
        if not self.accept(op):
            raise ShellError(f"'{op}' expected")

    # grammar
    def or_(self):
        v = self.and_()
        while self.accept("|"):
            v = _logical(v, self.and_(), np.logical_or)
        return v

    def and_(self):
        v = self.not_()
        while self.accept("&"):
            v = _logical(v, self.not_(), np.logical_and)
        return v

    def not_(self):
        if self.accept("!", "~"):
            return _as_bool(np.asarray(self.not_(), dtype=np.float64) == 0)
        return self.cmp()

    def cmp(self):
        v = self.add()
        op = self.accept("==", "!=", "~=", "<", "<=", ">", ">=")
        if op is None:
            return v
        w = self.add()
        if _is_text(v) != _is_text(w):
            raise ShellError("type mismatch")
        fns: Dict[str, Callable] = {
            "==": np.equal, "!=": np.not_equal, "~=": np.not_equal,
            "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
        }
        return _as_bool(fns[op](np.asarray(v), np.asarray(w)))

    def add(self):
        v = self.mul()
        while True:
            op = self.accept("+", "-")
            if op is None:
                return v
            w = self.mul()
            if op == "+" and _is_text(v) and _is_text(w):
                v = np.char.add(np.asarray(v, dtype=str), np.asarray(w, dtype=str)).astype(object)
                if v.ndim == 0:
                    v = str(v)
            else:
                v = _arith(v, w, np.add if op == "+" else np.subtract)

    def mul(self):
        v = self.unary()
        while True:
            op = self.accept("*", "/")
            if op is None:
                return v
            w = self.unary()
            if op == "*":
                v = _arith(v, w, np.multiply)
            else:
                v = _arith(v, w, _safe_divide)

    def unary(self):
        if self.accept("-"):
            return _arith(0.0, self.unary(), np.subtract)
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        v = self.atom()
        if self.accept("^"):
            v = _arith(v, self.unary(), np.power)
        return v

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return float(val)
        if kind == "miss":
            return double_missing(parse_missing_name(val))
        if kind == "str":
            return val[1:-1]
        if kind == "op" and val == "(":
            v = self.or_()
            self.expect(")")
            return v
        if kind == "name":
            if self.accept("("):
                return self.call(val)
            if self.peek() == ("op", "["):
                self.take()
                k = self.or_()
                self.expect("]")
                return self.subscript(val, k)
            return self.name(val)
        raise ShellError(f"invalid expression near '{val}'")

    def call(self, fname: str):
        args = []
        if not self.accept(")"):
            while True:
                kind, val = self.peek()
                if fname in ("r", "scalar") and kind == "name":
                    self.take()
                    args.append(val)
                else:
                    args.append(self.or_())
                if self.accept(")"):
                    break
                self.expect(",")
        if fname == "r" and len(args) == 1:
            return self.ws.r_results.get(str(args[0]), "")
        if fname == "scalar" and len(args) == 1:
            return self._scalar(str(args[0]))
        if fname == "missing" and len(args) == 1:
            a = np.asarray(args[0])
            if a.dtype == object:
                return _as_bool(a == "")
            return _as_bool(np.asarray(a, dtype=np.float64) >= double_missing(0))
        if fname in ("sqrt", "exp", "ln", "abs", "round", "floor", "ceil") and len(args) == 1:
            fn = {"sqrt": np.sqrt, "exp": np.exp, "ln": np.log, "abs": np.abs,
                  "round": np.round, "floor": np.floor, "ceil": np.ceil}[fname]
            return _unary_math(args[0], fn)
        raise ShellError(f"unknown function {fname}()")

    def _scalar(self, name: str) -> float:
        if name not in self.ws.scalars:
            raise ShellError(f"scalar {name} not found")
        return self.ws.scalars[name]

    def name(self, name: str):
        ds = self.ws.dataset
        if name == "_N":
            return float(ds.nobs)
        if name == "_n" and self.dataset:
            return np.arange(1, ds.nobs + 1, dtype=np.float64)
        if ds.has(name):
            col = self.column(name)
            if self.dataset:
                return col
            if ds.nobs == 0:
                return SYSMISS
            return col[0]
        if name in self.ws.scalars:
            return self.ws.scalars[name]
        raise ShellError(f"{name} not found")

    def subscript(self, name: str, k):
        ds = self.ws.dataset
        if not ds.has(name):
            raise ShellError(f"{name} not found")
        j = int(np.asarray(k, dtype=np.float64).item())
        if not 1 <= j <= ds.nobs:
            return "" if ds.get(name).stype.is_string else SYSMISS
        return self.column(name)[j - 1]

    def column(self, name: str):
        var = self.ws.dataset.get(name)
        if var.stype.is_string:
            return np.array(var.data, dtype=object)
        return widen_to_double(var.stype, var.data)  # type: ignore[arg-type]


def _is_text(v) -> bool:
    return isinstance(v, str) or (isinstance(v, np.ndarray) and v.dtype == object)


def _as_bool(a):
    out = np.asarray(a).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def _logical(a, b, fn):
    if _is_text(a) or _is_text(b):
        raise ShellError("type mismatch")
    x = np.asarray(a, dtype=np.float64) != 0
    y = np.asarray(b, dtype=np.float64) != 0
    return _as_bool(fn(x, y))


def _safe_divide(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.divide(a, b)
    return np.where(np.asarray(b) == 0, SYSMISS, q)


def _arith(a, b, fn):
    if _is_text(a) or _is_text(b):
        raise ShellError("type mismatch")
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    miss = (x >= double_missing(0)) | (y >= double_missing(0))
    with np.errstate(all="ignore"):
        r = fn(x, y)
    r = np.where(miss | ~np.isfinite(r), SYSMISS, r)
    return float(r) if r.ndim == 0 else r


def _unary_math(a, fn):
    if _is_text(a):
        raise ShellError("type mismatch")
    x = np.asarray(a, dtype=np.float64)
    with np.errstate(all="ignore"):
        r = fn(x)
    r = np.where((x >= double_missing(0)) | ~np.isfinite(r), SYSMISS, r)
    return float(r) if r.ndim == 0 else r


def cell_text(ws: Workspace, name: str, row: int) -> str:
    """Display text of one host cell, using value labels where attached."""
    var = ws.dataset.get(name)
    if var.stype.is_string:
        return var.data[row]  # type: ignore[index]
    raw = var.data[row]  # type: ignore[index]
    value = float(widen_to_double(var.stype, np.asarray([raw]))[0])
    if is_missing_double(value):
        return format_number(value)
    if var.label_table and var.stype.is_integer:
        return ws.lookup_label(name, int(raw))
    return format_number(value)


def expand_new_names(spec: str) -> List[str]:
    """Names for new variables: plain names and ``x1-x10`` numeric ranges."""
    out: List[str] = []
    for tok in spec.split():
        m = re.fullmatch(r"([A-Za-z_]\w*?)(\d+)-\1(\d+)", tok)
        if m:
            stem, a, b = m.group(1), int(m.group(2)), int(m.group(3))
            if b < a:
                raise ShellError(f"{tok}: range out of order")
            out.extend(f"{stem}{k}" for k in range(a, b + 1))
        else:
            out.append(tok)
    return out


def storage_from_word(word: str) -> Optional[StorageType]:
    try:
        return StorageType.parse(word)
    except WorkspaceError:
        return None
