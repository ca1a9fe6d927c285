"""Interactive soft-scope rewrite.

In strict scoping, an assignment inside a top-level loop body creates a
loop-local name. Interactive sessions instead let such an assignment update
an existing global. This module marks those assignments so the compiler
treats their targets as globals. Function bodies are never touched.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable, List, Set

from . import ast as A


def _assigned_names(target: A.Node) -> List[str]:
    if isinstance(target, A.Name):
        return [target.id]
    if isinstance(target, A.TupleExpr):
        return [e.id for e in target.elts if isinstance(e, A.Name)]
    return []


def _mark_block(block: A.Block, bound: Set[str]) -> A.Block:
    return replace(block, stmts=[_mark(s, bound) for s in block.stmts])


def _mark(node: A.Node, bound: Set[str]) -> A.Node:
    """Rewrite one statement found inside a top-level loop body."""
    if isinstance(node, A.Assign):
        names = frozenset(n for n in _assigned_names(node.target) if n in bound)
        if names - node.rebind_global:
            return replace(node, rebind_global=node.rebind_global | names)
        return node
    if isinstance(node, A.For):
        return replace(node, body=_mark_block(node.body, bound))
    if isinstance(node, A.While):
        return replace(node, body=_mark_block(node.body, bound))
    if isinstance(node, A.If):
        branches = [(c, _mark_block(b, bound)) for c, b in node.branches]
        orelse = _mark_block(node.orelse, bound) if node.orelse is not None else None
        return replace(node, branches=branches, orelse=orelse)
    if isinstance(node, A.BeginBlock):
        return replace(node, body=_mark_block(node.body, bound))
    return node


def _top_level(node: A.Node, bound: Set[str]) -> A.Node:
    if isinstance(node, (A.For, A.While)):
        return _mark(node, bound)
    if isinstance(node, A.If):
        branches = [(c, replace(b, stmts=[_top_level(s, bound) for s in b.stmts])) for c, b in node.branches]
        orelse = node.orelse
        if orelse is not None:
            orelse = replace(orelse, stmts=[_top_level(s, bound) for s in orelse.stmts])
        return replace(node, branches=branches, orelse=orelse)
    if isinstance(node, A.BeginBlock):
        return replace(node, body=replace(node.body, stmts=[_top_level(s, bound) for s in node.body.stmts]))
    if isinstance(node, A.Assign):
        bound.update(_assigned_names(node.target))
    elif isinstance(node, A.FunctionDef):
        bound.add(node.name)
    return node


def softscope_transform(program: A.Program, bound_names: Iterable[str] = ()) -> A.Program:
    """Mark loop-body assignments to already-bound globals as rebinding.

    ``bound_names`` are the globals that exist before the program runs;
    names assigned by earlier top-level statements count as bound too.
    The transform is idempotent.
    """
    bound = set(bound_names)
    stmts = [_top_level(s, bound) for s in program.stmts]
    return replace(program, stmts=stmts)
