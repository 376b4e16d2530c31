"""Intra-file call graph and recursion detection.

Resolution is by simple name within a single file: a call to ``f`` points at
every function definition named ``f`` anywhere in the module (including
nested functions and methods), and ``self.f(...)``/``cls.f(...)`` resolve the
attribute name the same way.  That is coarse, but it is monotone under
concatenating files — evidence never disappears when more code is appended —
which is the property the detector is built around.
"""

from __future__ import annotations

import ast

_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def _collect_defs(tree: ast.AST) -> list[ast.AST]:
    return [node for node in ast.walk(tree) if isinstance(node, _FUNCTION_NODES)]


def _called_names(func: ast.AST) -> set[str]:
    """Names called directly in ``func``'s body, excluding nested defs."""
    names: set[str] = set()
    stack = list(ast.iter_child_nodes(func))
    while stack:
        node = stack.pop()
        if isinstance(node, _FUNCTION_NODES):
            continue  # inner defs own their calls
        if isinstance(node, ast.Call):
            target = node.func
            if isinstance(target, ast.Name):
                names.add(target.id)
            elif isinstance(target, ast.Attribute) and isinstance(
                target.value, ast.Name
            ) and target.value.id in ("self", "cls"):
                names.add(target.attr)
        stack.extend(ast.iter_child_nodes(node))
    return names


def call_graph(tree: ast.AST) -> dict[int, set[int]]:
    """Edges between function definitions, keyed by node identity."""
    defs = _collect_defs(tree)
    by_name: dict[str, list[int]] = {}
    for i, node in enumerate(defs):
        by_name.setdefault(node.name, []).append(i)
    graph: dict[int, set[int]] = {i: set() for i in range(len(defs))}
    for i, node in enumerate(defs):
        for name in _called_names(node):
            graph[i].update(by_name.get(name, ()))
    return graph


def has_call_cycle(tree: ast.AST) -> bool:
    """True when any user-defined function can (transitively) call itself."""
    graph = call_graph(tree)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node: WHITE for node in graph}
    for root in graph:
        if color[root] != WHITE:
            continue
        stack: list[tuple[int, list[int]]] = [(root, list(graph[root]))]
        color[root] = GREY
        while stack:
            node, pending = stack[-1]
            if pending:
                nxt = pending.pop()
                if color[nxt] == GREY:
                    return True
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, list(graph[nxt])))
            else:
                color[node] = BLACK
                stack.pop()
    return False
