"""Expression tree for penalty functions.

Nodes are frozen dataclasses, so structural equality is plain ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Compare:
    op: str  # < <= > >= == !=
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Logic:
    op: str  # and / or
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Not:
    operand: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


@dataclass(frozen=True)
class If:
    cond: "Node"
    then: "Node"
    orelse: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Compare, Logic, Not, Call, If]

# name -> (min arity, max arity); None = variadic
BUILTINS: dict[str, tuple[int, int | None]] = {
    "abs": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "tanh": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "clamp": (3, 3),
}

KEYWORDS = frozenset({"if", "then", "else", "and", "or", "not", "fn"})


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Num, Var)):
        return ()
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, (BinOp, Compare, Logic)):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, If):
        return (node.cond, node.then, node.orelse)
    raise TypeError(f"not an AST node: {node!r}")


def depth(node: Node) -> int:
    best = 0
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        stack.extend((k, d + 1) for k in children(n))
    return best


def node_count(node: Node) -> int:
    count = 0
    stack = [node]
    while stack:
        count += 1
        stack.extend(children(stack.pop()))
    return count


def is_boolean(node: Node) -> bool:
    return isinstance(node, (Compare, Logic, Not))
