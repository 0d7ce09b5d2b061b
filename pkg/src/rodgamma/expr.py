"""A small language for metric fields.

Source text looks like::

    dim 2;
    # round sphere, stereographic
    g = [[4/(1+x1^2+x2^2)^2, 0],
         [0, 4/(1+x1^2+x2^2)^2]]

Entries are arithmetic expressions over ``x1..xn`` and are compiled to
vectorized numpy closures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "tanh": np.tanh,
}
CONSTANTS = {"pi": np.pi}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],;=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0
        self.n = None

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")

    def program(self):
        tok = self.tok
        if not (tok.kind == "ident" and tok.text == "dim"):
            raise self.error("expected 'dim <n>' statement")
        self.i += 1
        if self.tok.kind != "num" or not re.fullmatch(r"\d+", self.tok.text):
            raise self.error("dimension must be an integer literal")
        self.n = int(self.tok.text)
        if self.n < 2:
            raise self.error("dimension must be at least 2")
        self.i += 1
        while self.accept(";"):
            pass
        tok = self.tok
        if not (tok.kind == "ident" and tok.text == "g"):
            raise self.error("expected metric statement 'g = [[...]]'")
        self.i += 1
        self.expect("=")
        start = self.tok
        rows = self.matrix()
        while self.accept(";"):
            pass
        if self.tok.kind != "eof":
            raise self.error(f"unexpected token {self.tok.text!r}")
        if len(rows) != self.n:
            raise self.error(f"dimension mismatch: dim {self.n} but {len(rows)} rows", start)
        return self.n, rows

    def matrix(self):
        self.expect("[")
        rows = [self.row()]
        while self.accept(","):
            rows.append(self.row())
        self.expect("]")
        lens = {len(r) for r in rows}
        if len(lens) > 1:
            raise self.error("row length mismatch", self.toks[self.i - 1])
        if lens.pop() != len(rows):
            raise self.error("non-square matrix", self.toks[self.i - 1])
        return rows

    def row(self):
        self.expect("[")
        items = [self.expr()]
        while self.accept(","):
            items.append(self.expr())
        self.expect("]")
        return items

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return ("neg", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return ("num", float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", tok.text, arg)
            if tok.text in CONSTANTS:
                return ("num", CONSTANTS[tok.text])
            m = re.fullmatch(r"x(\d+)", tok.text)
            if m and 1 <= int(m.group(1)) <= self.n:
                return ("var", int(m.group(1)) - 1)
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected token {tok.text or 'end of input'!r}")


def compile_node(node):
    """Turn an AST node into ``f(X) -> array`` with X of shape (..., n)."""
    kind = node[0]
    if kind == "num":
        v = node[1]
        return lambda X: np.full(X.shape[:-1], v)
    if kind == "var":
        k = node[1]
        return lambda X: X[..., k]
    if kind == "neg":
        f = compile_node(node[1])
        return lambda X: -f(X)
    if kind == "call":
        fn = FUNCTIONS[node[1]]
        f = compile_node(node[2])
        return lambda X: fn(f(X))
    op, a, b = node[1], compile_node(node[2]), compile_node(node[3])
    if op == "+":
        return lambda X: a(X) + b(X)
    if op == "-":
        return lambda X: a(X) - b(X)
    if op == "*":
        return lambda X: a(X) * b(X)
    if op == "/":
        return lambda X: a(X) / b(X)
    return lambda X: np.power(a(X), b(X))


def parse_metric_source(source: str):
    """Parse source text; returns (n, metric_fn)."""
    n, rows = _Parser(tokenize(source)).program()
    entries = [[compile_node(e) for e in row] for row in rows]

    def metric_fn(x):
        X = np.asarray(x, dtype=float)
        out = np.empty(X.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(n):
                out[..., i, j] = entries[i][j](X)
        return out

    return n, metric_fn
