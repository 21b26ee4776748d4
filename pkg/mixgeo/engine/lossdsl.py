"""
Expression language for user-defined partial losses.

Grammar (lowest to highest precedence):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          right associative, constant exponent
    atom    := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are t1..t9 (index below n), functions are exp, ln and sqrt.
Unary minus binds looser than '^', so -t1^2 is -(t1^2).
"""
import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.jets import Jet2, JetN, Taylor
from ..utils.errors import EvalError, ParseError

logger = logging.getLogger(__name__)

FUNCTIONS = ('exp', 'ln', 'sqrt')
MAX_OUTCOMES = 10

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


# --- AST ---

class Node:
    """Base AST node; subclasses are immutable."""

    def taylor(self, env: Sequence[Taylor]) -> Taylor:
        raise NotImplementedError

    def has_vars(self) -> bool:
        return False


@dataclass(frozen=True)
class Const(Node):
    value: float

    def taylor(self, env):
        return Taylor.constant(self.value, like=env[0])

    def __str__(self):
        if self.value < 0:
            return f"(-{repr(-self.value)})"
        return repr(self.value)


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based

    def taylor(self, env):
        return env[self.index - 1]

    def has_vars(self):
        return True

    def __str__(self):
        return f"t{self.index}"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def taylor(self, env):
        return -self.arg.taylor(env)

    def has_vars(self):
        return self.arg.has_vars()

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def taylor(self, env):
        a = self.left.taylor(env)
        b = self.right.taylor(env)
        if self.op == '+':
            return a + b
        if self.op == '-':
            return a - b
        if self.op == '*':
            return a * b
        return a / b

    def has_vars(self):
        return self.left.has_vars() or self.right.has_vars()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float

    def taylor(self, env):
        return self.base.taylor(env) ** self.exponent

    def has_vars(self):
        return self.base.has_vars()

    def __str__(self):
        return f"({self.base} ^ {Const(self.exponent)})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def taylor(self, env):
        a = self.arg.taylor(env)
        if self.func == 'exp':
            return a.exp()
        if self.func == 'ln':
            return a.log()
        return a.sqrt()

    def has_vars(self):
        return self.arg.has_vars()

    def __str__(self):
        return f"{self.func}({self.arg})"


@dataclass(frozen=True)
class Expr:
    """A parsed partial loss over the chart coordinates of an n-outcome simplex."""
    root: Node
    n: int
    text: str = ''

    def __str__(self):
        return str(self.root)

    def __repr__(self):
        return f"<Expr n={self.n} {self.root}>"


# --- Parser ---

@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    column: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(pos + 1, f"unexpected character {text[pos]!r}", text=text)
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append(_Token(kind, match.group(), pos + 1))
        pos = match.end()
    tokens.append(_Token('eof', '', len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def fail(self, message: str, token: Optional[_Token] = None):
        token = token or self.current
        raise ParseError(token.column, message, text=self.text)

    def advance(self) -> _Token:
        token = self.current
        self.pos += 1
        return token

    def expect(self, text: str, message: str) -> _Token:
        if self.current.text != text or self.current.kind == 'eof':
            self.fail(message)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != 'eof':
            if self.current.text == ')':
                self.fail("unbalanced closing parenthesis")
            self.fail(f"unexpected {self.current.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.kind == 'op' and self.current.text in '+-':
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.kind == 'op' and self.current.text in '*/':
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.current.kind == 'op' and self.current.text == '-':
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.current.kind == 'op' and self.current.text == '^':
            caret = self.advance()
            exponent = self.unary()
            if exponent.has_vars():
                self.fail("exponents must be constant", caret)
            try:
                value = _fold(exponent)
            except EvalError as e:
                self.fail(f"exponent does not evaluate: {e.message}", caret)
            if not np.isfinite(value):
                self.fail("exponent is not finite", caret)
            return Pow(base, value)
        return base

    def atom(self) -> Node:
        token = self.current
        if token.kind == 'num':
            self.advance()
            return Const(float(token.text))
        if token.kind == 'name':
            self.advance()
            if token.text in FUNCTIONS:
                self.expect('(', f"expected '(' after {token.text}")
                arg = self.expr()
                self.expect(')', f"unclosed parenthesis in call to {token.text}")
                return Call(token.text, arg)
            match = re.fullmatch(r"t([1-9])", token.text)
            if match is None:
                self.fail(f"unknown identifier {token.text!r}", token)
            index = int(match.group(1))
            if index > self.n - 1:
                self.fail(f"variable {token.text} needs more than n={self.n} outcomes", token)
            return Var(index)
        if token.kind == 'op' and token.text == '(':
            self.advance()
            node = self.expr()
            self.expect(')', "unclosed parenthesis")
            return node
        if token.kind == 'eof':
            self.fail("unexpected end of input")
        self.fail(f"unexpected {token.text!r}")


def _fold(node: Node) -> float:
    probe = [Taylor.constant(0.0)]
    return float(node.taylor(probe).v)


def parse(text: str, n: int) -> Expr:
    """Parse a partial-loss expression over the chart coordinates t1..t{n-1}.

    Args:
        text: Expression source.
        n: Outcome count.

    Returns:
        The parsed expression.

    Raises:
        ParseError: With the 1-based column of the first problem.
    """
    if not isinstance(text, str):
        raise ParseError(1, "expression must be a string")
    if not 2 <= n <= MAX_OUTCOMES:
        raise ParseError(1, f"outcome count must lie in [2, {MAX_OUTCOMES}], got {n}", text=text)
    root = _Parser(text, n).parse()
    return Expr(root, n, text)


# --- Jet evaluation ---

def _sweep(expr: Expr, points: np.ndarray, direction: np.ndarray) -> Taylor:
    env = [Taylor.variable(points[:, k], direction[k]) for k in range(points.shape[1])]
    with np.errstate(all='ignore'):
        return expr.root.taylor(env)


def _broadcast(taylor: Taylor, count: int) -> Taylor:
    return Taylor(np.broadcast_to(taylor.v, (count,)),
                  np.broadcast_to(taylor.d1, (count,)),
                  np.broadcast_to(taylor.d2, (count,)))


def expr_jets(expr: Expr, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of an expression over a batch of chart points.

    The Hessian is assembled from univariate sweeps along e_i and e_i + e_j.

    Args:
        expr: Parsed expression.
        points: Array of shape (N, n-1).

    Returns:
        Tuple (v, grad, hess) of shapes (N,), (N, n-1) and (N, n-1, n-1).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    count, m = points.shape
    if m != expr.n - 1:
        raise EvalError(f"expected {expr.n - 1} chart coordinates, got {m}")

    grad = np.empty((count, m))
    hess = np.empty((count, m, m))
    value = None
    for i in range(m):
        direction = np.zeros(m)
        direction[i] = 1.0
        jet = _broadcast(_sweep(expr, points, direction), count)
        value = jet.v
        grad[:, i] = jet.d1
        hess[:, i, i] = jet.d2
    for i in range(m):
        for j in range(i + 1, m):
            direction = np.zeros(m)
            direction[i] = direction[j] = 1.0
            jet = _broadcast(_sweep(expr, points, direction), count)
            mixed = 0.5 * (jet.d2 - hess[:, i, i] - hess[:, j, j])
            hess[:, i, j] = mixed
            hess[:, j, i] = mixed

    finite = np.isfinite(value) & np.isfinite(grad).all(axis=1) & np.isfinite(hess).all(axis=(1, 2))
    if not finite.all():
        index = int(np.flatnonzero(~finite)[0])
        raise EvalError(f"non-finite jet for {expr.text or expr}", index=index,
                        point=points[index].tolist())
    return np.array(value, dtype=float), grad, hess


def eval_jet2(e: Expr, t: float) -> Jet2:
    """Exact (v, d1, d2) of an n=2 expression at t in (0, 1)."""
    if e.n != 2:
        raise EvalError(f"eval_jet2 needs an n=2 expression, got n={e.n}")
    t = float(t)
    if not 0.0 < t < 1.0:
        raise EvalError(f"t={t} is outside (0, 1)")
    v, grad, hess = expr_jets(e, np.array([[t]]))
    return Jet2(float(v[0]), float(grad[0, 0]), float(hess[0, 0, 0]))


def eval_jetN(e: Expr, s) -> JetN:
    """Exact value, gradient and Hessian of an expression at an interior chart point."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.ndim != 1 or np.any(s <= 0.0) or s.sum() >= 1.0:
        raise EvalError(f"point {s.tolist()} is not an interior chart point")
    v, grad, hess = expr_jets(e, s.reshape(1, -1))
    return JetN(float(v[0]), grad[0].copy(), hess[0].copy())


def compile_exprs(texts: Sequence[str], n: int) -> Tuple[Expr, ...]:
    """Parse one expression per outcome, tagging errors with the partial index."""
    exprs = []
    for i, text in enumerate(texts, start=1):
        try:
            exprs.append(parse(text, n))
        except ParseError as e:
            logger.warning(f"Partial {i} failed to parse: {e.message}")
            raise ParseError(e.position, f"partial {i}: {e.reason}", text=text, partial=i)
    return tuple(exprs)
