"""Tokenizer for the guest language.

Newlines inside ``()`` and ``[]`` are dropped so bracketed expressions may
span lines. An unterminated string raises :class:`IncompleteInput`, which
is how the REPL knows to keep reading.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

from ..errors import GuestSyntaxError, IncompleteInput

KEYWORDS = {
    "for", "in", "end", "function", "if", "elseif", "else", "while",
    "begin", "return", "break", "continue", "true", "false",
}

# longest first
OPERATORS = [
    ".+=", ".-=", ".*=", "./=", ".^=", ".==", ".!=", ".<=", ".>=",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "^=", "&&", "||", "|>",
    ".=", ".+", ".-", ".*", "./", ".^", ".<", ".>",
    "+", "-", "*", "/", "^", "<", ">", "=", "!",
    "(", ")", "[", "]", ",", ";", ":", ".", "?", "@",
]
UNICODE_OPS = {"≤": "<=", "≥": ">=", "≠": "!=", "∈": "in"}
_CLOSERS = {")": "(", "]": "["}


@dataclass
class Token:
    kind: str  # num, str, id, kw, op, nl, eof
    value: object
    line: int
    col: int
    spaced: bool = False
    parts: Optional[List[Union[str, tuple]]] = field(default=None, repr=False)


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


class Lexer:
    def __init__(self, src: str, line: int = 1, col: int = 1) -> None:
        self.src = src
        self.i = 0
        self.line = line
        self.col = col
        self.tokens: List[Token] = []
        self.stack: List[str] = []

    def error(self, msg: str) -> GuestSyntaxError:
        return GuestSyntaxError(msg, self.line, self.col)

    def advance(self, n: int = 1) -> str:
        text = self.src[self.i : self.i + n]
        for ch in text:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.i += n
        return text

    def prev_ends_expr(self) -> bool:
        if not self.tokens:
            return False
        t = self.tokens[-1]
        if t.kind in ("num", "str", "id"):
            return True
        if t.kind == "kw" and t.value in ("end", "true", "false"):
            return True
        return t.kind == "op" and t.value in (")", "]", "'")

    def emit(self, kind: str, value, line: int, col: int, spaced: bool, parts=None) -> None:
        self.tokens.append(Token(kind, value, line, col, spaced, parts))

    def tokenize(self) -> List[Token]:
        src = self.src
        spaced = True
        while self.i < len(src):
            ch = src[self.i]
            line, col = self.line, self.col
            if ch in " \t\r":
                self.advance()
                spaced = True
                continue
            if ch == "#":
                while self.i < len(src) and src[self.i] != "\n":
                    self.advance()
                continue
            if ch == "\n":
                self.advance()
                if not self.stack:
                    self.emit("nl", "\n", line, col, spaced)
                spaced = True
                continue
            if ch.isdigit() or (ch == "." and self.i + 1 < len(src) and src[self.i + 1].isdigit()
                                and not self.prev_ends_expr()):
                self.emit("num", self.number(), line, col, spaced)
            elif _is_ident_start(ch):
                self.emit(*self.identifier(), line, col, spaced)
            elif ch == '"':
                parts = self.string()
                self.emit("str", None, line, col, spaced, parts)
            elif ch in UNICODE_OPS:
                self.advance()
                op = UNICODE_OPS[ch]
                self.emit("kw" if op == "in" else "op", op, line, col, spaced)
            elif ch == "'":
                if self.prev_ends_expr() and not spaced:
                    self.advance()
                    self.emit("op", "'", line, col, spaced)
                else:
                    raise self.error("character literals are not supported")
            else:
                op = next((o for o in OPERATORS if src.startswith(o, self.i)), None)
                if op is None:
                    raise self.error(f"unexpected character {ch!r}")
                self.advance(len(op))
                if op in ("(", "["):
                    self.stack.append(op)
                elif op in _CLOSERS:
                    if self.stack and self.stack[-1] == _CLOSERS[op]:
                        self.stack.pop()
                    elif self.stack:
                        raise self.error(f"unexpected {op!r}")
                self.emit("op", op, line, col, spaced)
            spaced = False
        self.emit("eof", None, self.line, self.col, spaced)
        return self.tokens

    def number(self):
        src, start = self.src, self.i
        j = start
        while j < len(src) and (src[j].isdigit() or src[j] == "_"):
            j += 1
        is_float = False
        if j + 1 < len(src) and src[j] == "." and src[j + 1].isdigit():
            is_float = True
            j += 1
            while j < len(src) and (src[j].isdigit() or src[j] == "_"):
                j += 1
        elif j < len(src) and src[j] == "." and start == j:
            pass
        if j < len(src) and src[j] in "eE":
            k = j + 1
            if k < len(src) and src[k] in "+-":
                k += 1
            if k < len(src) and src[k].isdigit():
                is_float = True
                j = k
                while j < len(src) and src[j].isdigit():
                    j += 1
        if start < len(src) and src[start] == ".":
            j = start + 1
            while j < len(src) and src[j].isdigit():
                j += 1
            is_float = True
        text = self.advance(j - start).replace("_", "")
        return float(text) if is_float else int(text)

    def identifier(self):
        src, start = self.src, self.i
        j = start
        while j < len(src) and _is_ident_char(src[j]):
            j += 1
        # trailing ! is part of a name (seed!), but not in x!=y
        if j < len(src) and src[j] == "!" and not src.startswith("!=", j):
            j += 1
        text = self.advance(j - start)
        if text in KEYWORDS:
            return "kw", text
        return "id", text

    def string(self) -> List[Union[str, tuple]]:
        """Parse a double-quoted literal into text and ``$`` interpolation parts."""
        src = self.src
        self.advance()  # opening quote
        parts: List[Union[str, tuple]] = []
        buf: List[str] = []
        escapes = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "$": "$", "0": "\0"}
        while True:
            if self.i >= len(src):
                raise IncompleteInput("unterminated string literal", self.line, self.col)
            ch = src[self.i]
            if ch == '"':
                self.advance()
                break
            if ch == "\\":
                if self.i + 1 >= len(src):
                    raise IncompleteInput("unterminated string literal", self.line, self.col)
                nxt = src[self.i + 1]
                if nxt not in escapes:
                    raise self.error(f"invalid escape sequence \\{nxt}")
                buf.append(escapes[nxt])
                self.advance(2)
                continue
            if ch == "$":
                line, col = self.line, self.col
                self.advance()
                if self.i < len(src) and src[self.i] == "(":
                    depth, j = 0, self.i
                    while j < len(src):
                        if src[j] == "(":
                            depth += 1
                        elif src[j] == ")":
                            depth -= 1
                            if depth == 0:
                                break
                        j += 1
                    if j >= len(src):
                        raise IncompleteInput("unterminated string interpolation", line, col)
                    inner = src[self.i + 1 : j]
                    self.advance(j - self.i + 1)
                elif self.i < len(src) and _is_ident_start(src[self.i]):
                    j = self.i
                    while j < len(src) and _is_ident_char(src[j]):
                        j += 1
                    inner = src[self.i : j]
                    self.advance(j - self.i)
                else:
                    raise self.error("invalid interpolation syntax: \"$\" must be followed by a name or (")
                if buf:
                    parts.append("".join(buf))
                    buf = []
                parts.append((inner, line, col))
                continue
            buf.append(ch)
            self.advance()
        if buf or not parts:
            parts.append("".join(buf))
        return parts


def tokenize(src: str) -> List[Token]:
    return Lexer(src).tokenize()
