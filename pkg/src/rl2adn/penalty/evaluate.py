"""Totalized, vectorized evaluation of penalty expressions.

Domain faults (log or sqrt outside their domain, division by zero, invalid
powers, overflow) never raise: the affected entries evaluate to
:data:`DOMAIN_FAULT`. Faults in the branch of a conditional that is not
taken are ignored.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .ast import BinOp, Call, Compare, If, Logic, Neg, Node, Not, Num, Pow, Var

DOMAIN_FAULT = float("inf")

# A compiled node maps the argument array to (values, fault mask).
Kernel = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]


def _guard(val: np.ndarray, fault: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fault = fault | ~np.isfinite(val)
    if fault.any():
        val = np.where(fault, 0.0, val)
    return val, fault


def _compile(node: Node) -> Kernel:
    if isinstance(node, Num):
        c = float(node.value)
        return lambda x: (np.full(x.shape, c), np.zeros(x.shape, dtype=bool))
    if isinstance(node, Var):
        return lambda x: (x, np.zeros(x.shape, dtype=bool))
    if isinstance(node, Neg):
        k = _compile(node.operand)

        def neg(x):
            v, f = k(x)
            return -v, f

        return neg
    if isinstance(node, BinOp):
        kl, kr = _compile(node.left), _compile(node.right)
        op = node.op

        def binop(x):
            a, fa = kl(x)
            b, fb = kr(x)
            fault = fa | fb
            if op == "+":
                v = a + b
            elif op == "-":
                v = a - b
            elif op == "*":
                v = a * b
            else:
                zero = b == 0
                fault = fault | zero
                v = a / np.where(zero, 1.0, b)
            return _guard(v, fault)

        return binop
    if isinstance(node, Pow):
        kb = _compile(node.base)
        e = float(node.exponent)
        integral = e.is_integer()

        def power(x):
            b, f = kb(x)
            bad = np.zeros(b.shape, dtype=bool)
            if not integral:
                bad |= b < 0
            if e < 0:
                bad |= b == 0
            safe = np.where(bad, 1.0, b)
            return _guard(np.power(safe, e), f | bad)

        return power
    if isinstance(node, Compare):
        kl, kr = _compile(node.left), _compile(node.right)
        cmp = {
            "<": np.less,
            "<=": np.less_equal,
            ">": np.greater,
            ">=": np.greater_equal,
            "==": np.equal,
            "!=": np.not_equal,
        }[node.op]

        def compare(x):
            a, fa = kl(x)
            b, fb = kr(x)
            return cmp(a, b), fa | fb

        return compare
    if isinstance(node, Logic):
        kl, kr = _compile(node.left), _compile(node.right)
        fn = np.logical_and if node.op == "and" else np.logical_or

        def logic(x):
            a, fa = kl(x)
            b, fb = kr(x)
            return fn(a, b), fa | fb

        return logic
    if isinstance(node, Not):
        k = _compile(node.operand)

        def not_(x):
            v, f = k(x)
            return ~v, f

        return not_
    if isinstance(node, If):
        kc, kt, ke = _compile(node.cond), _compile(node.then), _compile(node.orelse)

        def cond(x):
            c, fc = kc(x)
            t, ft = kt(x)
            e, fe = ke(x)
            return np.where(c, t, e), fc | np.where(c, ft, fe)

        return cond
    if isinstance(node, Call):
        ks = [_compile(a) for a in node.args]
        name = node.name

        def call(x):
            vals, faults = zip(*(k(x) for k in ks))
            fault = np.logical_or.reduce(faults)
            a = vals[0]
            if name == "abs":
                v = np.abs(a)
            elif name == "exp":
                v = np.exp(a)
            elif name == "tanh":
                v = np.tanh(a)
            elif name == "log":
                bad = a <= 0
                fault = fault | bad
                v = np.log(np.where(bad, 1.0, a))
            elif name == "sqrt":
                bad = a < 0
                fault = fault | bad
                v = np.sqrt(np.where(bad, 0.0, a))
            elif name == "min":
                v = np.minimum.reduce(vals)
            elif name == "max":
                v = np.maximum.reduce(vals)
            elif name == "clamp":
                lo, hi = vals[1], vals[2]
                fault = fault | (lo > hi)
                v = np.minimum(np.maximum(a, lo), hi)
            else:  # pragma: no cover - parser rejects unknown names
                raise ValueError(name)
            return _guard(v, fault)

        return call
    raise TypeError(f"not an AST node: {node!r}")


class CompiledExpression:
    """An AST compiled once into nested numpy closures."""

    def __init__(self, node: Node):
        self.node = node
        self._kernel = _compile(node)

    def __call__(self, x) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(all="ignore"):
            v, f = self._kernel(arr)
            v, f = _guard(np.asarray(v, dtype=float), f)
        return np.where(f, DOMAIN_FAULT, v)


def evaluate(node: Node, x: float) -> float:
    """Evaluate ``node`` at a scalar argument."""
    return float(CompiledExpression(node)(x)[0])


def evaluate_array(node: Node, xs) -> np.ndarray:
    return CompiledExpression(node)(xs)
