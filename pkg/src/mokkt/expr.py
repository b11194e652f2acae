"""Small expression language for scalar functions of several real variables.

Grammar (ASCII, whitespace-insensitive)::

    expr   := term {("+"|"-") term}
    term   := factor {("*"|"/") factor}
    factor := ["-"] power
    power  := atom ["^" factor]
    atom   := number | ident | ident "(" expr {"," expr} ")" | "(" expr ")"

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Node",
    "Expr",
    "ExprSyntaxError",
    "DomainError",
    "parse",
    "evaluate",
    "evaluate_batch",
    "to_text",
    "UNARY_FUNCS",
    "BINARY_FUNCS",
]


class ExprSyntaxError(ValueError):
    """Raised for malformed input; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the real domain of some node (log of a non-positive, x/0, ...)."""

    def __init__(self, message: str, node: "Node"):
        super().__init__(f"{message} in {to_text(node)}")
        self.node = node


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, sqrt, exp, log, sin, cos
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow, min2, max2
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]

UNARY_FUNCS = ("abs", "sqrt", "exp", "log", "sin", "cos")
BINARY_FUNCS = ("min2", "max2", "pow")
_ALIASES = {"min": "min2", "max": "max2"}


@dataclass(frozen=True)
class Expr:
    """A parsed expression together with the variable names it was parsed against."""

    root: Node
    names: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.names)

    def __str__(self) -> str:
        return to_text(self.root, self.names)

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate(self, x)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.index = {name: i for i, name in enumerate(names)}

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, offset = self.take()
        if text != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", offset)

    def at_op(self, *values: str) -> bool:
        kind, text, _ = self.peek()
        return kind == "op" and text in values

    def expr(self) -> Node:
        node = self.term()
        while self.at_op("+", "-"):
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.at_op("*", "/"):
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.at_op("-"):
            self.take()
            return Unary("neg", self.power())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.at_op("^"):
            self.take()
            return Binary("pow", base, self.factor())
        return base

    def atom(self) -> Node:
        kind, text, offset = self.take()
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            if self.at_op("("):
                return self.call(text, offset)
            if text not in self.index:
                raise ExprSyntaxError(f"unknown identifier {text!r}", offset)
            return Var(self.index[text])
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", offset)

    def call(self, name: str, offset: int) -> Node:
        self.expect("(")
        args = [self.expr()]
        while self.at_op(","):
            self.take()
            args.append(self.expr())
        self.expect(")")
        fn = _ALIASES.get(name, name)
        if fn in UNARY_FUNCS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{name}() takes 1 argument, got {len(args)}", offset)
            return Unary(fn, args[0])
        if fn in BINARY_FUNCS:
            if len(args) != 2:
                raise ExprSyntaxError(f"{name}() takes 2 arguments, got {len(args)}", offset)
            return Binary(fn, args[0], args[1])
        raise ExprSyntaxError(f"unknown function {name!r}", offset)


def parse(text: str, names: Sequence[str]) -> Expr:
    """Parse ``text`` into an :class:`Expr` over the variables ``names``."""
    names = tuple(names)
    if not names:
        raise ValueError("at least one variable name is required")
    if len(set(names)) != len(names):
        raise ValueError(f"variable names must be distinct: {names}")
    try:
        text.encode("ascii")
    except UnicodeEncodeError as exc:
        raise ExprSyntaxError("non-ASCII input", len(text[: exc.start].encode())) from None
    parser = _Parser(text, names)
    root = parser.expr()
    kind, tok, offset = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing {tok!r}", offset)
    return Expr(root, names)


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_LEVEL = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _level(node: Node) -> int:
    if isinstance(node, Binary) and node.op in _LEVEL:
        return _LEVEL[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return 3
    return 5


def to_text(node: Node, names: Sequence[str] | None = None) -> str:
    """Render ``node`` so that parsing the text gives back the same tree."""

    def wrap(child: Node, min_level: int) -> str:
        s = render(child)
        return s if _level(child) >= min_level else f"({s})"

    def render(n: Node) -> str:
        if isinstance(n, Const):
            v = float(n.value)
            return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        if isinstance(n, Var):
            return names[n.index] if names is not None else f"x{n.index + 1}"
        if isinstance(n, Unary):
            if n.op == "neg":
                return "-" + wrap(n.arg, 4)
            return f"{n.op}({render(n.arg)})"
        if n.op in ("add", "sub"):
            return f"{wrap(n.left, 1)} {_SYMBOL[n.op]} {wrap(n.right, 2)}"
        if n.op in ("mul", "div"):
            return f"{wrap(n.left, 2)}{_SYMBOL[n.op]}{wrap(n.right, 3)}"
        if n.op == "pow":
            return f"{wrap(n.left, 5)}^{wrap(n.right, 3)}"
        return f"{n.op}({render(n.left)}, {render(n.right)})"

    return render(node)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def _is_integer(p: float) -> bool:
    return math.isfinite(p) and p == math.floor(p) and abs(p) < 2.0**53


def real_pow(base: float, p: float, node: Node) -> float:
    """Real power: integer exponents for any base, otherwise base > 0 (or 0 with p > 0)."""
    if _is_integer(p):
        if base == 0.0 and p < 0:
            raise DomainError("zero to a negative power", node)
        return base ** int(p)
    if base > 0.0:
        return base**p
    if base == 0.0 and p > 0.0:
        return 0.0
    raise DomainError("non-integer power of a non-positive base", node)


def _apply_unary(op: str, a: float, node: Node) -> float:
    if op == "neg":
        return -a
    if op == "abs":
        return abs(a)
    if op == "sqrt":
        if a < 0.0:
            raise DomainError("sqrt of a negative number", node)
        return math.sqrt(a)
    if op == "exp":
        return math.exp(a)
    if op == "log":
        if a <= 0.0:
            raise DomainError("log of a non-positive number", node)
        return math.log(a)
    if op == "sin":
        return math.sin(a)
    if op == "cos":
        return math.cos(a)
    raise ValueError(f"unknown unary op {op}")


def _apply_binary(op: str, a: float, b: float, node: Node) -> float:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise DomainError("division by zero", node)
        return a / b
    if op == "pow":
        return real_pow(a, b, node)
    if op == "min2":
        return min(a, b)
    if op == "max2":
        return max(a, b)
    raise ValueError(f"unknown binary op {op}")


def eval_node(node: Node, x: Sequence[float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    try:
        if isinstance(node, Unary):
            return _apply_unary(node.op, eval_node(node.arg, x), node)
        return _apply_binary(node.op, eval_node(node.left, x), eval_node(node.right, x), node)
    except OverflowError:
        raise DomainError("floating-point overflow", node) from None


def evaluate(e: Expr, x: Sequence[float]) -> float:
    """Evaluate ``e`` at the point ``x``; raises :class:`DomainError` off the real domain."""
    if len(x) != e.arity:
        raise ValueError(f"point has dimension {len(x)}, expression expects {e.arity}")
    value = eval_node(e.root, x)
    if not math.isfinite(value):
        raise DomainError("non-finite result", e.root)
    return value


def _batch(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.index].astype(float)
    if isinstance(node, Unary):
        a = _batch(node.arg, X)
        op = node.op
        if op == "neg":
            return -a
        if op == "abs":
            return np.abs(a)
        if op == "sqrt":
            return np.where(a >= 0.0, np.sqrt(np.abs(a)), np.nan)
        if op == "exp":
            return np.exp(a)
        if op == "log":
            return np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan)
        if op == "sin":
            return np.sin(a)
        return np.cos(a)
    a = _batch(node.left, X)
    b = _batch(node.right, X)
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return np.where(b != 0.0, a / np.where(b != 0.0, b, 1.0), np.nan)
    if op == "min2":
        return np.minimum(a, b)
    if op == "max2":
        return np.maximum(a, b)
    integral = np.isfinite(b) & (b == np.floor(b))
    ok = (integral & ~((a == 0.0) & (b < 0))) | (a > 0.0) | ((a == 0.0) & (b > 0.0))
    safe_a = np.where(ok, a, 1.0)
    return np.where(ok, np.power(safe_a, np.where(ok, b, 1.0)), np.nan)


def evaluate_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    """Vectorised evaluation over the rows of ``X``.

    Points outside the real domain come back as NaN instead of raising; callers
    that need the offending node should use :func:`evaluate`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with np.errstate(all="ignore"):
        out = _batch(e.root, X)
    out = np.asarray(out, dtype=float)
    out[~np.isfinite(out)] = np.nan
    return out
