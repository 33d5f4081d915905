"""Lexer, LL(1) recursive-descent parser and canonical printer for the penalty DSL.

Grammar (one function definition per ``fn``)::

    program  := { "fn" NAME "(" NAME ")" "=" expr }
    expr     := "if" expr "then" expr "else" expr | or
    or       := and { "or" and }
    and      := not { "and" not }
    not      := "not" not | cmp
    cmp      := add [ ("<" | "<=" | ">" | ">=" | "==" | "!=") add ]
    add      := mul { ("+" | "-") mul }
    mul      := unary { ("*" | "/") unary }
    unary    := "-" unary | power
    power    := atom [ ("^" | "**") exponent ]
    exponent := [ "-" ] NUMBER | "(" [ "-" ] NUMBER ")"
    atom     := NUMBER | NAME | NAME "(" expr { "," expr } ")" | "(" expr ")"

``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BUILTINS,
    KEYWORDS,
    BinOp,
    Call,
    Compare,
    If,
    Logic,
    Neg,
    Node,
    Not,
    Num,
    Pow,
    Var,
    depth,
    is_boolean,
    node_count,
)

MAX_DEPTH = 32
MAX_NODES = 512


class DslError(ValueError):
    """Parse failure; ``kind`` is one of lexical, syntax, unknown identifier,
    arity, type or complexity. ``position`` is a 0-based character offset."""

    def __init__(self, kind: str, message: str, position: int):
        super().__init__(f"{kind} error at position {position}: {message}")
        self.kind = kind
        self.message = message
        self.position = position


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, eof
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|<=|>=|==|!=|[-+*/^(),<>=])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DslError("lexical", f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


@dataclass(frozen=True)
class PenaltySource:
    """One ``fn name(arg) = body`` definition as written."""

    name: str
    arg: str
    body: str
    raw: str
    body_offset: int = 0


class _Parser:
    def __init__(self, tokens: list[Token], arg: str | None, text: str):
        self.tokens = tokens
        self.i = 0
        self.arg = arg
        self.text = text
        self.nesting = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "name") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise DslError("syntax", f"{message}, found {found}", tok.pos)

    def _enter(self, tok: Token):
        self.nesting += 1
        if self.nesting > MAX_DEPTH:
            raise DslError("complexity", f"expression nested deeper than {MAX_DEPTH}", tok.pos)

    def numeric(self, node: Node, tok: Token) -> Node:
        if is_boolean(node):
            raise DslError("type", "expected a numeric expression, got a condition", tok.pos)
        return node

    def boolean(self, node: Node, tok: Token) -> Node:
        if not is_boolean(node):
            raise DslError("type", "expected a condition", tok.pos)
        return node

    # expression levels -------------------------------------------------
    def expr(self) -> Node:
        start = self.tok
        self._enter(start)
        try:
            if self.at("if"):
                self.advance()
                ctok = self.tok
                cond = self.boolean(self.expr(), ctok)
                self.expect("then")
                ttok = self.tok
                then = self.numeric(self.expr(), ttok)
                self.expect("else")
                etok = self.tok
                orelse = self.numeric(self.expr(), etok)
                return If(cond, then, orelse)
            return self.or_()
        finally:
            self.nesting -= 1

    def or_(self) -> Node:
        ltok = self.tok
        left = self.and_()
        while self.at("or"):
            self.advance()
            rtok = self.tok
            right = self.and_()
            left = Logic("or", self.boolean(left, ltok), self.boolean(right, rtok))
        return left

    def and_(self) -> Node:
        ltok = self.tok
        left = self.not_()
        while self.at("and"):
            self.advance()
            rtok = self.tok
            right = self.not_()
            left = Logic("and", self.boolean(left, ltok), self.boolean(right, rtok))
        return left

    def not_(self) -> Node:
        if self.at("not"):
            tok = self.advance()
            self._enter(tok)
            try:
                otok = self.tok
                return Not(self.boolean(self.not_(), otok))
            finally:
                self.nesting -= 1
        return self.cmp()

    def cmp(self) -> Node:
        ltok = self.tok
        left = self.add()
        if self.tok.kind == "op" and self.tok.text in ("<", "<=", ">", ">=", "==", "!="):
            op = self.advance().text
            rtok = self.tok
            right = self.add()
            return Compare(op, self.numeric(left, ltok), self.numeric(right, rtok))
        return left

    def add(self) -> Node:
        ltok = self.tok
        left = self.mul()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            rtok = self.tok
            right = self.mul()
            left = BinOp(op, self.numeric(left, ltok), self.numeric(right, rtok))
        return left

    def mul(self) -> Node:
        ltok = self.tok
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            rtok = self.tok
            right = self.unary()
            left = BinOp(op, self.numeric(left, ltok), self.numeric(right, rtok))
        return left

    def unary(self) -> Node:
        if self.at("-"):
            tok = self.advance()
            self._enter(tok)
            try:
                otok = self.tok
                return Neg(self.numeric(self.unary(), otok))
            finally:
                self.nesting -= 1
        return self.power()

    def power(self) -> Node:
        btok = self.tok
        base = self.atom()
        if self.at("^") or self.at("**"):
            self.advance()
            return Pow(self.numeric(base, btok), self.exponent())
        return base

    def exponent(self) -> float:
        paren = self.at("(")
        if paren:
            self.advance()
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        if self.tok.kind != "num":
            self.fail("exponent must be a numeric literal")
        value = sign * float(self.advance().text)
        if paren:
            self.expect(")")
        return value

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name" and tok.text not in KEYWORDS:
            self.advance()
            if self.at("("):
                return self.call(tok)
            if tok.text in BUILTINS:
                raise DslError("arity", f"built-in {tok.text!r} must be called with arguments", tok.pos)
            if tok.text != self.arg:
                raise DslError("unknown identifier", f"unknown identifier {tok.text!r}", tok.pos)
            return Var(tok.text)
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail("expected an expression")

    def call(self, name_tok: Token) -> Node:
        name = name_tok.text
        if name not in BUILTINS:
            raise DslError("unknown identifier", f"unknown function {name!r}", name_tok.pos)
        self.expect("(")
        args = []
        while True:
            atok = self.tok
            args.append(self.numeric(self.expr(), atok))
            if self.at(","):
                self.advance()
                continue
            break
        self.expect(")")
        lo, hi = BUILTINS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else (f"at least {lo}" if hi is None else f"{lo}..{hi}")
            raise DslError("arity", f"{name}() takes {want} arguments, got {len(args)}", name_tok.pos)
        return Call(name, tuple(args))


def _check_limits(node: Node, pos: int) -> Node:
    if depth(node) > MAX_DEPTH:
        raise DslError("complexity", f"expression tree deeper than {MAX_DEPTH}", pos)
    if node_count(node) > MAX_NODES:
        raise DslError("complexity", f"expression has more than {MAX_NODES} nodes", pos)
    return node


def parse(text: str, arg: str = "x") -> Node:
    """Parse a single expression over the variable ``arg``."""
    tokens = tokenize(text)
    p = _Parser(tokens, arg, text)
    tok = p.tok
    node = p.numeric(p.expr(), tok)
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return _check_limits(node, 0)


def parse_definitions(text: str) -> list[tuple[PenaltySource, Node]]:
    """Parse every ``fn name(arg) = expr`` block of a program text."""
    tokens = tokenize(text)
    p = _Parser(tokens, None, text)
    out: list[tuple[PenaltySource, Node]] = []
    while p.tok.kind != "eof":
        start = p.expect("fn")
        if p.tok.kind != "name" or p.tok.text in KEYWORDS:
            p.fail("expected a function name")
        name = p.advance().text
        p.expect("(")
        if p.tok.kind != "name" or p.tok.text in KEYWORDS or p.tok.text in BUILTINS:
            p.fail("expected a single argument name")
        p.arg = p.advance().text
        if p.at(","):
            raise DslError("arity", f"{name} must take exactly one argument", p.tok.pos)
        p.expect(")")
        p.expect("=")
        body_tok = p.tok
        node = p.numeric(p.expr(), body_tok)
        end = p.tok.pos
        if p.tok.kind != "eof" and not p.at("fn"):
            p.fail("unexpected trailing input")
        body = _strip_comments(text[body_tok.pos : end])
        src = PenaltySource(name, p.arg, body, text[start.pos : end].rstrip(), body_tok.pos)
        out.append((src, _check_limits(node, body_tok.pos)))
    return out


def _strip_comments(text: str) -> str:
    lines = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    return " ".join(line for line in lines if line)


# printing --------------------------------------------------------------

_PREC = {"if": 0, "or": 1, "and": 2, "not": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "neg": 7, "pow": 8}
_ATOM = 9


def format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def _prec(node: Node) -> int:
    if isinstance(node, If):
        return _PREC["if"]
    if isinstance(node, Logic):
        return _PREC[node.op]
    if isinstance(node, Not):
        return _PREC["not"]
    if isinstance(node, Compare):
        return _PREC["cmp"]
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Pow):
        return _PREC["pow"]
    if isinstance(node, Num) and node.value < 0:
        return _PREC["neg"]
    return _ATOM


def _fmt(node: Node, min_prec: int) -> str:
    s = _fmt_bare(node)
    return f"({s})" if _prec(node) < min_prec else s


def _fmt_bare(node: Node) -> str:
    if isinstance(node, Num):
        return format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _fmt(node.operand, _PREC["neg"])
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        return f"{_fmt(node.left, p)} {node.op} {_fmt(node.right, p + 1)}"
    if isinstance(node, Pow):
        return f"{_fmt(node.base, _ATOM)}^{format_number(node.exponent)}"
    if isinstance(node, Compare):
        p = _PREC["+"]
        return f"{_fmt(node.left, p)} {node.op} {_fmt(node.right, p)}"
    if isinstance(node, Logic):
        p = _PREC[node.op]
        return f"{_fmt(node.left, p)} {node.op} {_fmt(node.right, p + 1)}"
    if isinstance(node, Not):
        return "not " + _fmt(node.operand, _PREC["not"])
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_fmt(a, 0) for a in node.args)})"
    if isinstance(node, If):
        return f"if {_fmt(node.cond, 0)} then {_fmt(node.then, 0)} else {_fmt(node.orelse, 0)}"
    raise TypeError(f"not an AST node: {node!r}")


def pretty(node: Node) -> str:
    """Canonical text of ``node``; ``parse(pretty(n)) == n`` for parsed trees."""
    return _fmt(node, 0)
