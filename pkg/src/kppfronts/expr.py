"""Small arithmetic expression language for coefficient definitions.

Grammar (standard precedence, ``^`` right-associative and binding tightest,
then ``* /``, then ``+ -``; unary minus sits between ``* /`` and ``^``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' unary]
    atom   := NUMBER | 'pi' | 'x' | 't' | 'u'
            | FUNC '(' expr [',' expr] ')' | '(' expr ')'

Functions: sin, cos, exp, log, sqrt, abs, floor (unary), min, max (binary).
Numbers are decimal or scientific floats. Evaluation is vectorized over
numpy arrays; a NaN or Inf anywhere in the result raises ``DomainError``.

Trees are immutable and hashable; ``parse(to_source(e))`` returns a tree
equal to ``e``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "t", "u")
UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "floor": np.floor,
}
BINARY_FUNCS = {
    "min": np.minimum,
    "max": np.maximum,
}
FUNCTIONS = {**UNARY_FUNCS, **BINARY_FUNCS}


class ExprError(ValueError):
    """Base class for expression failures."""


class SyntaxExprError(ExprError):
    """Parse failure, annotated with the byte offset in the source."""

    def __init__(self, message, pos):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


class DomainError(ExprError):
    """Evaluation produced a non-finite value or used an unbound variable."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str  # only 'pi'


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Num | Var | Const | Neg | Bin | Call

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            at = len(source) - len(stripped)
            raise SyntaxExprError(f"unexpected character {stripped[0]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise SyntaxExprError(f"expected {op!r}", pos)
        return self.next()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            if val == ")":
                raise SyntaxExprError("unbalanced closing parenthesis", pos)
            raise SyntaxExprError(f"unexpected token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = Bin(val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Bin("^", node, self.unary())
        return node

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val == "pi":
                return Const("pi")
            if val in VARIABLES:
                return Var(val)
            if val in FUNCTIONS:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k2, v2, p2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.next()
                        args.append(self.expr())
                    else:
                        break
                k2, v2, p2 = self.peek()
                if k2 != "op" or v2 != ")":
                    raise SyntaxExprError("unbalanced parenthesis in call", p2)
                self.next()
                want = 2 if val in BINARY_FUNCS else 1
                if len(args) != want:
                    raise SyntaxExprError(
                        f"{val} takes {want} argument{'s' if want > 1 else ''}, got {len(args)}",
                        pos)
                return Call(val, tuple(args))
            raise SyntaxExprError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            k2, _, p2 = self.peek()
            if k2 != "op" or self.peek()[1] != ")":
                raise SyntaxExprError("unbalanced parenthesis", p2)
            self.next()
            return node
        raise SyntaxExprError(f"expected a value, got {val!r}" if val else "unexpected end of input", pos)


def parse(source):
    """Parse ``source`` into an expression tree.

    Raises SyntaxExprError with a byte offset on malformed input.
    """
    if not isinstance(source, str) or not source.strip():
        raise SyntaxExprError("empty expression", 0)
    return _Parser(source).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node):
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def to_source(node):
    """Render a tree back to source; parse(to_source(e)) == e."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Bin):
        lp, rp = _prec(node.left), _prec(node.right)
        mine = _PREC[node.op]
        left = to_source(node.left)
        right = to_source(node.right)
        if node.op == "^":
            if lp <= mine:
                left = f"({left})"
            if rp < _PREC["neg"]:  # exponent position parses a full unary
                right = f"({right})"
        else:
            if lp < mine:
                left = f"({left})"
            if rp <= mine:
                right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node):
    """Set of variable names appearing in the tree."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, Bin):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= variables(a)
        return out
    return set()


def _eval_node(node, bindings):
    if isinstance(node, Num):
        return np.float64(node.value)  # numpy scalar: 1/0 -> inf, not a raise
    if isinstance(node, Const):
        return np.float64(np.pi)
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise DomainError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval_node(node.arg, bindings)
    if isinstance(node, Call):
        vals = [_eval_node(a, bindings) for a in node.args]
        return FUNCTIONS[node.func](*vals)
    if isinstance(node, Bin):
        a = _eval_node(node.left, bindings)
        b = _eval_node(node.right, bindings)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node, **bindings):
    """Evaluate the tree with numpy semantics.

    Bindings may be scalars or arrays (broadcast together). Raises
    DomainError if any entry of the result is NaN or infinite, or if the
    tree uses a variable that is not bound.
    """
    with np.errstate(all="ignore"):
        out = _eval_node(node, bindings)
    arr = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite value when evaluating {to_source(node)!r}")
    return out


def compile_expr(source_or_node):
    """Return (node, fn) where fn(**bindings) evaluates the expression."""
    node = parse(source_or_node) if isinstance(source_or_node, str) else source_or_node
    return node, lambda **b: evaluate(node, **b)
