"""Scalar expressions: parsing, vectorized evaluation, symbolic derivatives.

The grammar is small on purpose: variables (``t``, ``x1..xn``, ``u1..um``),
the operators ``+ - * / ^`` with unary minus, the functions ``exp``, ``ln``,
``sqrt``, ``sin``, ``cos``, ``abs``, ``pow``, and numeric literals.  Every
node knows how to evaluate itself over scalars or numpy arrays and how to
produce its derivative with respect to a named variable, so Jacobians of
vector fields never rely on finite differences.

Differentiating ``abs`` introduces an internal ``sign`` node; it evaluates
like ``numpy.sign`` and is printable, but the parser does not accept it in
input text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

Value = Union[float, np.ndarray]

__all__ = [
    "Expression",
    "DomainError",
    "ExpressionSyntaxError",
    "parse_expression",
]


class ExpressionSyntaxError(ValueError):
    """Malformed expression text; carries the 1-based character column."""

    def __init__(self, message: str, column: int | None = None):
        self.column = column
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)


class DomainError(ValueError):
    """Evaluation left a function's domain (``ln``/``sqrt``/fractional power).

    ``point`` maps variable names to the offending scalar values so callers
    can report exactly where a tube sample or a quadrature node failed.
    """

    def __init__(self, message: str, point: Mapping[str, float] | None = None):
        self.point = dict(point or {})
        if self.point:
            at = ", ".join(f"{k}={v:.6g}" for k, v in sorted(self.point.items()))
            message = f"{message} at {at}"
        super().__init__(message)


def _witness(env: Mapping[str, Value], bad: np.ndarray) -> dict[str, float]:
    """Extract the first offending sample point from a violation mask."""
    bad = np.asarray(bad)
    if bad.shape == ():
        idx: tuple = ()
    else:
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
    point = {}
    for name, value in env.items():
        arr = np.asarray(value, dtype=float)
        if arr.shape == () or not idx:
            point[name] = float(arr) if arr.shape == () else float(arr.ravel()[0])
        else:
            point[name] = float(np.broadcast_to(arr, bad.shape)[idx])
    return point


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Expression:
    """Base node.  Subclasses implement ``ev``, ``diff`` and ``__str__``."""

    def ev(self, env: Mapping[str, Value]) -> Value:
        raise NotImplementedError

    def diff(self, name: str) -> "Expression":
        raise NotImplementedError

    def variables(self) -> set[str]:
        return set()

    def __call__(self, **env: Value) -> Value:
        return self.ev(env)


@dataclass(frozen=True)
class Num(Expression):
    value: float

    def ev(self, env):
        return self.value

    def diff(self, name):
        return Num(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Sym(Expression):
    name: str

    def ev(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise KeyError(
                f"expression references '{self.name}' which is not bound; "
                f"bound names: {sorted(env)}"
            ) from None

    def diff(self, name):
        return Num(1.0 if name == self.name else 0.0)

    def variables(self):
        return {self.name}

    def __str__(self):
        return self.name


def _is_num(e: Expression, value: float | None = None) -> bool:
    if not isinstance(e, Num):
        return False
    return value is None or e.value == value


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    return Div(a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def powx(a: Expression, b: Expression) -> Expression:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return Pow(a, b)


@dataclass(frozen=True)
class _Binary(Expression):
    left: Expression
    right: Expression

    op = "?"
    prec = 0

    def variables(self):
        return self.left.variables() | self.right.variables()

    def _wrap(self, child: Expression, right_side: bool) -> str:
        text = str(child)
        p = getattr(child, "prec", 9)
        if p < self.prec or (p == self.prec and right_side and self.op in "-/^"):
            return f"({text})"
        return text

    def __str__(self):
        return f"{self._wrap(self.left, False)} {self.op} {self._wrap(self.right, True)}"


class Add(_Binary):
    op, prec = "+", 1

    def ev(self, env):
        return self.left.ev(env) + self.right.ev(env)

    def diff(self, name):
        return add(self.left.diff(name), self.right.diff(name))


class Sub(_Binary):
    op, prec = "-", 1

    def ev(self, env):
        return self.left.ev(env) - self.right.ev(env)

    def diff(self, name):
        return sub(self.left.diff(name), self.right.diff(name))


class Mul(_Binary):
    op, prec = "*", 2

    def ev(self, env):
        return self.left.ev(env) * self.right.ev(env)

    def diff(self, name):
        return add(
            mul(self.left.diff(name), self.right),
            mul(self.left, self.right.diff(name)),
        )


class Div(_Binary):
    op, prec = "/", 2

    def ev(self, env):
        num = self.left.ev(env)
        den = self.right.ev(env)
        bad = np.asarray(den) == 0
        if np.any(bad):
            raise DomainError("division by zero", _witness(env, bad))
        return num / den

    def diff(self, name):
        return div(
            sub(
                mul(self.left.diff(name), self.right),
                mul(self.left, self.right.diff(name)),
            ),
            powx(self.right, Num(2.0)),
        )


class Pow(_Binary):
    op, prec = "^", 4

    def ev(self, env):
        base = self.left.ev(env)
        expo = self.right.ev(env)
        b = np.asarray(base, dtype=float)
        e = np.asarray(expo, dtype=float)
        bad = (b < 0) & (e != np.round(e))
        bad |= (b == 0) & (e < 0)
        if np.any(bad):
            raise DomainError("power with negative base or 0^negative", _witness(env, bad))
        out = np.power(b, e)
        return float(out) if out.shape == () else out

    def diff(self, name):
        if isinstance(self.right, Num):
            # d(a^c) = c * a^(c-1) * a'
            return mul(
                mul(self.right, powx(self.left, Num(self.right.value - 1.0))),
                self.left.diff(name),
            )
        # general a^b = exp(b ln a)
        return mul(
            self,
            add(
                mul(self.right.diff(name), Call("ln", (self.left,))),
                div(mul(self.right, self.left.diff(name)), self.left),
            ),
        )


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression
    prec = 3

    def ev(self, env):
        return -self.arg.ev(env)

    def diff(self, name):
        return neg(self.arg.diff(name))

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        inner = str(self.arg)
        if getattr(self.arg, "prec", 9) < self.prec:
            inner = f"({inner})"
        return f"-{inner}"


_UNARY_FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "abs", "sign")


@dataclass(frozen=True)
class Call(Expression):
    fn: str
    args: tuple[Expression, ...]
    prec = 9

    def ev(self, env):
        vals = [np.asarray(a.ev(env), dtype=float) for a in self.args]
        fn = self.fn
        if fn == "exp":
            out = np.exp(vals[0])
        elif fn == "ln":
            bad = ~(vals[0] > 0)
            if np.any(bad):
                raise DomainError("ln of non-positive argument", _witness(env, bad))
            out = np.log(vals[0])
        elif fn == "sqrt":
            bad = vals[0] < 0
            if np.any(bad):
                raise DomainError("sqrt of negative argument", _witness(env, bad))
            out = np.sqrt(vals[0])
        elif fn == "sin":
            out = np.sin(vals[0])
        elif fn == "cos":
            out = np.cos(vals[0])
        elif fn == "abs":
            out = np.abs(vals[0])
        elif fn == "sign":
            out = np.sign(vals[0])
        elif fn == "pow":
            return Pow(self.args[0], self.args[1]).ev(env)
        else:  # pragma: no cover - constructor guards this
            raise ExpressionSyntaxError(f"unknown function '{fn}'")
        return float(out) if out.shape == () else out

    def diff(self, name):
        if self.fn == "pow":
            return Pow(self.args[0], self.args[1]).diff(name)
        a = self.args[0]
        da = a.diff(name)
        if self.fn == "exp":
            return mul(self, da)
        if self.fn == "ln":
            return div(da, a)
        if self.fn == "sqrt":
            return div(da, mul(Num(2.0), self))
        if self.fn == "sin":
            return mul(Call("cos", (a,)), da)
        if self.fn == "cos":
            return neg(mul(Call("sin", (a,)), da))
        if self.fn == "abs":
            return mul(Call("sign", (a,)), da)
        if self.fn == "sign":
            return Num(0.0)
        raise ExpressionSyntaxError(f"unknown function '{self.fn}'")  # pragma: no cover

    def variables(self):
        out: set[str] = set()
        for a in self.args:
            out |= a.variables()
        return out

    def __str__(self):
        return f"{self.fn}({', '.join(str(a) for a in self.args)})"


# --- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                return
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExpressionSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}", col)
        pos = m.end()
        kind = m.lastgroup
        yield kind, m.group(kind), m.start(kind) + 1
    return


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text) + 1)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, col = self.next()
        if text != value:
            found = "end of input" if kind is None else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", col)

    def parse(self) -> Expression:
        e = self.expr()
        kind, text, col = self.peek()
        if kind is not None:
            raise ExpressionSyntaxError(f"trailing input {text!r}", col)
        return e

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, _ = self.next()
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, _ = self.next()
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self) -> Expression:
        if self.peek()[1] == "-":
            self.next()
            return neg(self.unary())
        if self.peek()[1] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.peek()[1] == "^":
            self.next()
            # right associative; unary binds the exponent so 2^-3 parses
            return powx(base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, text, col = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(text, col)
            return Sym(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind is None else repr(text)
        raise ExpressionSyntaxError(f"expected a value, found {found}", col)

    def call(self, fn: str, col: int) -> Expression:
        if fn not in _UNARY_FUNCTIONS and fn != "pow":
            raise ExpressionSyntaxError(f"unknown function '{fn}'", col)
        if fn == "sign":
            # produced by differentiation only; keep the input grammar closed
            raise ExpressionSyntaxError("'sign' is not accepted in input", col)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.next()
            args.append(self.expr())
        self.expect(")")
        want = 2 if fn == "pow" else 1
        if len(args) != want:
            raise ExpressionSyntaxError(f"{fn} takes {want} argument(s), got {len(args)}", col)
        return Call(fn, tuple(args))


def parse_expression(text: str) -> Expression:
    """Parse ``text`` into an :class:`Expression`.

    Raises :class:`ExpressionSyntaxError` with the offending column on
    malformed input.
    """
    return _Parser(text).parse()
