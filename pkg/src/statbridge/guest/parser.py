"""Pratt parser for the guest language.

Any syntax error reported at the end-of-input token is raised as
:class:`IncompleteInput`: the tokens seen so far form a viable prefix, so
more input could still complete the program. That single rule gives the
REPL its tri-state completeness check.
"""

from __future__ import annotations

import enum
from typing import List, Optional, Set

from ..errors import GuestSyntaxError, IncompleteInput
from . import ast as A
from .lexer import Lexer, Token

BINARY_BP = {
    "|>": 1,
    "||": 2,
    "&&": 3,
    "==": 5, "!=": 5, "<": 5, ">": 5, "<=": 5, ">=": 5,
    ".==": 5, ".!=": 5, ".<": 5, ".>": 5, ".<=": 5, ".>=": 5,
    ":": 6,
    "+": 7, "-": 7, ".+": 7, ".-": 7,
    "*": 8, "/": 8, ".*": 8, "./": 8,
    "^": 10, ".^": 10,
}
UNARY_BP = 9
ANNOTATION_MACROS = frozenset({"inbounds", "simd", "turbo", "tturbo", "fastmath", "threads"})
RIGHT_ASSOC = {"^", ".^", "||", "&&"}
ASSIGN_OPS = {
    "=": ("", False), "+=": ("+", False), "-=": ("-", False), "*=": ("*", False),
    "/=": ("/", False), "^=": ("^", False),
    ".=": ("", True), ".+=": ("+", True), ".-=": ("-", True), ".*=": ("*", True),
    "./=": ("/", True), ".^=": ("^", True),
}


class Completeness(enum.Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    INVALID = "invalid"


class Parser:
    def __init__(self, tokens: List[Token]) -> None:
        self.toks = tokens
        self.p = 0
        self.index_depth = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.p]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.p + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.p]
        if t.kind != "eof":
            self.p += 1
        return t

    def at(self, kind: str, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_op(self, *values) -> bool:
        return self.tok.kind == "op" and self.tok.value in values

    def at_kw(self, *values) -> bool:
        return self.tok.kind == "kw" and self.tok.value in values

    def error(self, msg: str, tok: Optional[Token] = None) -> GuestSyntaxError:
        tok = tok or self.tok
        cls = IncompleteInput if tok.kind == "eof" else GuestSyntaxError
        return cls(msg, tok.line, tok.col)

    def describe(self, tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        if tok.kind == "nl":
            return "newline"
        if tok.kind == "str":
            return "string"
        return repr(str(tok.value))

    def expect_op(self, value: str) -> Token:
        if not self.at_op(value):
            raise self.error(f"expected {value!r}, got {self.describe(self.tok)}")
        return self.next()

    def expect_kw(self, value: str) -> Token:
        if not self.at_kw(value):
            raise self.error(f"expected {value!r}, got {self.describe(self.tok)}")
        return self.next()

    def skip_newlines(self) -> None:
        while self.tok.kind == "nl":
            self.next()

    def skip_separators(self) -> bool:
        """Consume newlines and semicolons; report whether any ``;`` was seen."""
        semi = False
        while self.tok.kind == "nl" or self.at_op(";"):
            semi = semi or self.tok.kind == "op"
            self.next()
        return semi

    # -- programs and blocks ------------------------------------------------

    def parse_program(self) -> A.Program:
        stmts: List[A.Node] = []
        suppress = self.skip_separators()
        while not self.at("eof"):
            stmts.append(self.statement())
            if not (self.at("eof") or self.tok.kind == "nl" or self.at_op(";")):
                raise self.error(f"extra token {self.describe(self.tok)} after end of expression")
            suppress = self.skip_separators()
        return A.Program(stmts, suppress=bool(stmts) and suppress, pos=(1, 1))

    def block(self, terminators: Set[str]) -> A.Block:
        start = self.tok
        stmts: List[A.Node] = []
        self.skip_separators()
        while not self.at_kw(*terminators):
            if self.at("eof"):
                raise self.error("incomplete block: expected 'end'")
            stmts.append(self.statement())
            if not (self.tok.kind == "nl" or self.at_op(";") or self.at_kw(*terminators)):
                raise self.error(f"extra token {self.describe(self.tok)} after end of expression")
            self.skip_separators()
        return A.Block(stmts, pos=(start.line, start.col))

    # -- statements ---------------------------------------------------------

    def statement(self) -> A.Node:
        t = self.tok
        pos = (t.line, t.col)
        if self.at_op("@") and self.peek().kind == "id" and self.peek().value in ANNOTATION_MACROS:
            # loop annotations change speed, never meaning, so they are dropped
            self.next()
            self.next()
            return self.statement()
        if t.kind == "kw":
            kw = t.value
            if kw == "for":
                return self.for_stmt()
            if kw == "while":
                self.next()
                cond = self.expression()
                body = self.block({"end"})
                self.expect_kw("end")
                return A.While(cond, body, pos=pos)
            if kw == "if":
                return self.if_stmt()
            if kw == "begin":
                self.next()
                body = self.block({"end"})
                self.expect_kw("end")
                return A.BeginBlock(body, pos=pos)
            if kw == "function":
                return self.function_def()
            if kw == "return":
                self.next()
                if self.tok.kind in ("nl", "eof") or self.at_op(";") or self.at_kw("end", "else", "elseif"):
                    return A.Return(None, pos=pos)
                return A.Return(self.expr_or_tuple(), pos=pos)
            if kw == "break":
                self.next()
                return A.Break(pos=pos)
            if kw == "continue":
                self.next()
                return A.Continue(pos=pos)
            if kw in ("end", "else", "elseif", "in"):
                raise self.error(f"unexpected {kw!r}")
        first = self.expr_or_tuple()
        if self.tok.kind == "op" and self.tok.value in ASSIGN_OPS:
            op_tok = self.next()
            op, dot = ASSIGN_OPS[op_tok.value]
            self.skip_newlines()
            if op_tok.value == "=" and isinstance(first, A.Call) and not first.broadcast:
                return self.short_function(first, pos)
            self.check_target(first, op_tok, op, dot)
            value = self.expr_or_tuple()
            if self.tok.kind == "op" and self.tok.value in ASSIGN_OPS:
                # chained a = b = c
                inner = self.statement_from(value)
                return A.Assign(first, inner, op, dot, pos=pos)
            return A.Assign(first, value, op, dot, pos=pos)
        return first

    def statement_from(self, target: A.Node) -> A.Node:
        op_tok = self.next()
        op, dot = ASSIGN_OPS[op_tok.value]
        self.check_target(target, op_tok, op, dot)
        self.skip_newlines()
        value = self.expr_or_tuple()
        if self.tok.kind == "op" and self.tok.value in ASSIGN_OPS:
            value = self.statement_from(value)
        return A.Assign(target, value, op, dot, pos=target.pos)

    def check_target(self, target: A.Node, op_tok: Token, op: str, dot: bool) -> None:
        if isinstance(target, (A.Name, A.Index, A.Field)):
            return
        if isinstance(target, A.TupleExpr) and not op and not dot:
            if all(isinstance(e, A.Name) for e in target.elts):
                return
        raise GuestSyntaxError(f"invalid assignment location before {op_tok.value!r}", op_tok.line, op_tok.col)

    def short_function(self, call: A.Call, pos) -> A.FunctionDef:
        if not isinstance(call.func, A.Name) or not all(isinstance(a, A.Name) for a in call.args):
            raise GuestSyntaxError("invalid function definition", *pos)
        body_expr = self.expression()
        body = A.Block([A.Return(body_expr, pos=body_expr.pos)], pos=body_expr.pos)
        return A.FunctionDef(call.func.id, [a.id for a in call.args], body, pos=pos)

    def for_stmt(self) -> A.For:
        t = self.next()
        if not self.at("id"):
            raise self.error(f"expected loop variable, got {self.describe(self.tok)}")
        var = self.next().value
        if self.at_kw("in") or self.at_op("="):
            self.next()
        else:
            raise self.error(f"expected 'in' or '=', got {self.describe(self.tok)}")
        it = self.expression()
        body = self.block({"end"})
        self.expect_kw("end")
        return A.For(var, it, body, pos=(t.line, t.col))  # type: ignore[arg-type]

    def if_stmt(self) -> A.If:
        t = self.next()
        branches = []
        cond = self.expression()
        body = self.block({"end", "else", "elseif"})
        branches.append((cond, body))
        orelse = None
        while True:
            if self.at_kw("elseif"):
                self.next()
                cond = self.expression()
                branches.append((cond, self.block({"end", "else", "elseif"})))
                continue
            if self.at_kw("else"):
                self.next()
                orelse = self.block({"end"})
            self.expect_kw("end")
            break
        return A.If(branches, orelse, pos=(t.line, t.col))

    def function_def(self) -> A.FunctionDef:
        t = self.next()
        if not self.at("id"):
            raise self.error(f"expected function name, got {self.describe(self.tok)}")
        name = self.next().value
        self.expect_op("(")
        params: List[str] = []
        while not self.at_op(")"):
            if not self.at("id"):
                raise self.error(f"expected parameter name, got {self.describe(self.tok)}")
            params.append(self.next().value)  # type: ignore[arg-type]
            if self.at_op(","):
                self.next()
            elif not self.at_op(")"):
                raise self.error(f"expected ',' or ')', got {self.describe(self.tok)}")
        self.next()
        if len(set(params)) != len(params):
            raise GuestSyntaxError("function argument names not unique", t.line, t.col)
        body = self.block({"end"})
        self.expect_kw("end")
        return A.FunctionDef(name, params, body, pos=(t.line, t.col))  # type: ignore[arg-type]

    # -- expressions --------------------------------------------------------

    def expr_or_tuple(self) -> A.Node:
        first = self.expression()
        if not self.at_op(","):
            return first
        elts = [first]
        while self.at_op(","):
            self.next()
            if self.at("eof") or self.tok.kind == "nl" or self.at_op(";", "="):
                break
            elts.append(self.expression())
        return A.TupleExpr(elts, pos=first.pos)

    def expression(self, min_bp: int = 0) -> A.Node:
        left = self.prefix()
        while True:
            t = self.tok
            if t.kind != "op":
                break
            op = t.value
            # postfix forms bind tightest and require adjacency
            if op == "(" and not t.spaced:
                left = self.call(left, broadcast=False)
                continue
            if op == "[" and not t.spaced:
                left = self.index(left)
                continue
            if op == "'" and not t.spaced:
                self.next()
                left = A.Transpose(left, pos=left.pos)
                continue
            if op == "." and not t.spaced:
                self.next()
                nxt = self.tok
                if nxt.kind == "op" and nxt.value == "(" and not nxt.spaced:
                    left = self.call(left, broadcast=True)
                elif nxt.kind == "id" and not nxt.spaced:
                    self.next()
                    left = A.Field(left, nxt.value, pos=left.pos)  # type: ignore[arg-type]
                else:
                    raise self.error(f"unexpected {self.describe(nxt)} after '.'")
                continue
            bp = BINARY_BP.get(op)
            if bp is None or bp < min_bp or (bp == min_bp and op not in RIGHT_ASSOC):
                break
            self.next()
            self.skip_newlines()
            if op == ":":
                left = self.range_rest(left)
                continue
            right = self.expression(bp if op in RIGHT_ASSOC else bp + 1)
            pos = left.pos
            if op in ("&&", "||"):
                left = A.Logical(op, left, right, pos=pos)
            elif op == "|>":
                left = A.Call(right, [left], pos=pos)
            elif op.startswith("."):
                left = A.BinOp(op[1:], left, right, dot=True, pos=pos)
            else:
                left = A.BinOp(op, left, right, pos=pos)
        return left

    def range_rest(self, start: A.Node) -> A.Range:
        bp = BINARY_BP[":"]
        mid = self.expression(bp + 1)
        if self.at_op(":"):
            self.next()
            self.skip_newlines()
            stop = self.expression(bp + 1)
            return A.Range(start, mid, stop, pos=start.pos)
        return A.Range(start, None, mid, pos=start.pos)

    def prefix(self) -> A.Node:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.next()
            return A.Num(t.value, pos=pos)  # type: ignore[arg-type]
        if t.kind == "str":
            self.next()
            return self.string_node(t)
        if t.kind == "id":
            self.next()
            return A.Name(t.value, pos=pos)  # type: ignore[arg-type]
        if t.kind == "kw":
            if t.value in ("true", "false"):
                self.next()
                return A.BoolLit(t.value == "true", pos=pos)
            if t.value == "end" and self.index_depth:
                self.next()
                return A.End(pos=pos)
            raise self.error(f"unexpected {self.describe(t)}")
        if t.kind == "op":
            op = t.value
            if op == "(":
                return self.paren()
            if op == "[":
                return self.vector_literal()
            if op in ("-", "+", "!"):
                self.next()
                operand = self.expression(UNARY_BP)
                return A.UnaryOp(op, operand, pos=pos)
            if op == ":" and self.index_depth and self.peek().kind == "op" and self.peek().value in (",", "]"):
                self.next()
                return A.Colon(pos=pos)
            if op == "@":
                raise self.error("macros are not supported")
            if op == "?":
                raise self.error("help queries ('?') are only available at the start of a line")
        raise self.error(f"unexpected {self.describe(t)}")

    def paren(self) -> A.Node:
        t = self.next()
        saved, self.index_depth = self.index_depth, 0
        try:
            if self.at_op(")"):
                self.next()
                return A.TupleExpr([], pos=(t.line, t.col))
            first = self.expression()
            if self.at_op(","):
                elts = [first]
                while self.at_op(","):
                    self.next()
                    if self.at_op(")"):
                        break
                    elts.append(self.expression())
                self.expect_op(")")
                return A.TupleExpr(elts, pos=(t.line, t.col))
            self.expect_op(")")
            return first
        finally:
            self.index_depth = saved

    def vector_literal(self) -> A.Node:
        """``[a, b]`` is a vector; ``[a b; c d]`` builds a matrix row by row."""
        t = self.next()
        pos = (t.line, t.col)
        saved, self.index_depth = self.index_depth, 0
        try:
            if self.at_op("]"):
                self.next()
                return A.VectorLit([], pos=pos)
            first = self.expression()
            if self.at_op(","):
                elts = [first]
                while self.at_op(","):
                    self.next()
                    if self.at_op("]"):
                        break
                    elts.append(self.expression())
                self.expect_op("]")
                return A.VectorLit(elts, pos=pos)
            rows: List[List[A.Node]] = [[first]]
            while not self.at_op("]"):
                if self.at_op(";"):
                    self.next()
                    if self.at_op("]"):
                        break
                    rows.append([self.expression()])
                elif self.at("eof"):
                    raise self.error("expected ']'")
                elif self.tok.spaced:
                    rows[-1].append(self.expression())
                else:
                    raise self.error(f"unexpected {self.describe(self.tok)} in array literal")
            self.next()
            if len(rows) == 1 and len(rows[0]) == 1:
                return A.VectorLit(rows[0], pos=pos)
            widths = {len(r) for r in rows}
            if len(widths) != 1:
                raise GuestSyntaxError("rows of an array literal must have equal length", *pos)
            return A.Call(A.Name("__matrix_literal__", pos=pos),
                          [A.VectorLit(r, pos=pos) for r in rows], pos=pos)
        finally:
            self.index_depth = saved

    def call(self, func: A.Node, broadcast: bool) -> A.Call:
        self.next()  # (
        args = self.arguments(")", allow_index_forms=False)
        return A.Call(func, args, broadcast=broadcast, pos=func.pos)

    def index(self, obj: A.Node) -> A.Index:
        self.next()  # [
        self.index_depth += 1
        try:
            args = self.arguments("]", allow_index_forms=True)
        finally:
            self.index_depth -= 1
        if not args:
            raise GuestSyntaxError("empty index", *obj.pos)
        return A.Index(obj, args, pos=obj.pos)

    def arguments(self, closer: str, allow_index_forms: bool) -> List[A.Node]:
        saved = self.index_depth
        if not allow_index_forms:
            self.index_depth = 0
        try:
            args: List[A.Node] = []
            while not self.at_op(closer):
                args.append(self.expression())
                if self.at_op(","):
                    self.next()
                elif not self.at_op(closer):
                    raise self.error(f"expected ',' or {closer!r}, got {self.describe(self.tok)}")
            self.next()
            return args
        finally:
            self.index_depth = saved

    def string_node(self, t: Token) -> A.Str:
        parts: List[object] = []
        for part in t.parts or [""]:
            if isinstance(part, str):
                parts.append(part)
                continue
            text, line, col = part
            try:
                toks = Lexer(text, line, col + 1).tokenize()
                sub = Parser(toks)
                node = sub.expression()
                if not sub.at("eof"):
                    raise sub.error(f"extra token {sub.describe(sub.tok)} in interpolation")
            except IncompleteInput as exc:
                raise GuestSyntaxError(exc.bare_message, line, col) from None
            parts.append(node)
        return A.Str(parts, pos=(t.line, t.col))  # type: ignore[arg-type]


def parse(src: str) -> A.Program:
    """Parse a complete program; raises GuestSyntaxError or IncompleteInput."""
    return Parser(Lexer(src).tokenize()).parse_program()


def parse_expression(src: str) -> A.Node:
    p = Parser(Lexer(src).tokenize())
    p.skip_newlines()
    node = p.expr_or_tuple()
    p.skip_separators()
    if not p.at("eof"):
        raise p.error(f"extra token {p.describe(p.tok)} after end of expression")
    return node


def check_complete(src: str) -> Completeness:
    try:
        parse(src)
    except IncompleteInput:
        return Completeness.INCOMPLETE
    except GuestSyntaxError:
        return Completeness.INVALID
    return Completeness.COMPLETE
