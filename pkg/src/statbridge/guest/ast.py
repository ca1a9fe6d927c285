"""Syntax tree of the guest language."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union


@dataclass
class Node:
    pos: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False, kw_only=True)


@dataclass
class Num(Node):
    value: Union[int, float]


@dataclass
class Str(Node):
    parts: List[Union[str, Node]]


@dataclass
class BoolLit(Node):
    value: bool


@dataclass
class Name(Node):
    id: str


@dataclass
class Colon(Node):
    pass


@dataclass
class End(Node):
    pass


@dataclass
class TupleExpr(Node):
    elts: List[Node]


@dataclass
class VectorLit(Node):
    elts: List[Node]


@dataclass
class Range(Node):
    start: Node
    step: Optional[Node]
    stop: Node


@dataclass
class BinOp(Node):
    op: str
    left: Node
    right: Node
    dot: bool = False


@dataclass
class UnaryOp(Node):
    op: str
    operand: Node


@dataclass
class Logical(Node):
    op: str  # "&&" or "||"
    left: Node
    right: Node


@dataclass
class Call(Node):
    func: Node
    args: List[Node]
    broadcast: bool = False


@dataclass
class Index(Node):
    obj: Node
    args: List[Node]


@dataclass
class Field(Node):
    obj: Node
    name: str


@dataclass
class Transpose(Node):
    obj: Node


@dataclass
class Assign(Node):
    """``target op= value``; ``op`` is "" for plain ``=``.

    ``dot`` marks in-place broadcasting forms such as ``.=`` and ``./=``.
    ``rebind_global`` lists target names that must rebind existing globals.
    """

    target: Node
    value: Node
    op: str = ""
    dot: bool = False
    rebind_global: frozenset = frozenset()


@dataclass
class Block(Node):
    stmts: List[Node]


@dataclass
class For(Node):
    var: str
    iter: Node
    body: Block


@dataclass
class While(Node):
    cond: Node
    body: Block


@dataclass
class If(Node):
    branches: List[Tuple[Node, Block]]
    orelse: Optional[Block] = None


@dataclass
class BeginBlock(Node):
    body: Block


@dataclass
class FunctionDef(Node):
    name: str
    params: List[str]
    body: Block


@dataclass
class Return(Node):
    value: Optional[Node] = None


@dataclass
class Break(Node):
    pass


@dataclass
class Continue(Node):
    pass


@dataclass
class Program(Node):
    stmts: List[Node]
    suppress: bool = False


def children(node: Node) -> List[Node]:
    """Direct child nodes, for generic walks."""
    out: List[Node] = []
    for name in node.__dataclass_fields__:
        if name == "pos":
            continue
        val = getattr(node, name)
        if isinstance(val, Node):
            out.append(val)
        elif isinstance(val, list):
            for item in val:
                if isinstance(item, Node):
                    out.append(item)
                elif isinstance(item, tuple):
                    out.extend(x for x in item if isinstance(x, Node))
    return out


def contains(node: Node, kind: type) -> bool:
    if isinstance(node, kind):
        return True
    return any(contains(c, kind) for c in children(node))
