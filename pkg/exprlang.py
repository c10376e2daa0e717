"""Closed expression language for one-variable generating functions.

Text is parsed into an immutable tree of nodes (constants, the variable ``x``,
arithmetic, rational powers and the elementary functions exp, log, sqrt, sinh,
cosh, tanh). Trees differentiate symbolically, evaluate vectorized over numpy
arrays, and can be scanned for simple zeros and poles on an interval.

Grammar::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | base ('^' exponent)?
    base     := number | 'x' | func '(' expr ')' | '(' expr ')'
    func     := exp | log | sqrt | sinh | cosh | tanh
    exponent := ['-'] integer | '(' ['-'] integer ['/' integer] ')'

Evaluation never raises for domain problems. Division by an exact zero gives a
signed infinity whose sign is the numerator's (the denominator is read as +0),
0/0 and log of a non-positive number give NaN, the undefined marker.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property, singledispatch
from typing import Callable, Iterator

import numpy as np
import numpy.typing as npt
from scipy import optimize

from errors import ExpressionSyntaxError, SimplicityViolation

logger = logging.getLogger(__name__)

UNDEFINED = float("nan")
FUNCTIONS = ("exp", "log", "sqrt", "sinh", "cosh", "tanh")

DEFAULT_SCAN_POINTS = 2048
MIN_SCAN_POINTS = 64
ZERO_TOL = 1e-10          # |f(root)| relative to the scan magnitude
SLOPE_TOL = 1e-6          # |f'(root)| relative to scan magnitude / interval width
POLE_OFFSET = 1e-6        # offset at which growth around a pole is sampled
POLE_GROWTH = 1.5         # |f| must grow at least this much when the offset halves
SCALE_QUANTILE = 90       # percentile of |f| taken as the scan magnitude

ArrayLike = float | npt.NDArray[np.float64]


def is_undefined(value: ArrayLike) -> bool | npt.NDArray[np.bool_]:
    return np.isnan(value)


class Expression:
    """Base node. Operators build simplified trees; the parser builds raw ones."""
    precedence = 100

    def __add__(self, other: Expression | float) -> Expression:
        return add(self, as_expression(other))

    def __radd__(self, other: float) -> Expression:
        return add(as_expression(other), self)

    def __sub__(self, other: Expression | float) -> Expression:
        return sub(self, as_expression(other))

    def __rsub__(self, other: float) -> Expression:
        return sub(as_expression(other), self)

    def __mul__(self, other: Expression | float) -> Expression:
        return mul(self, as_expression(other))

    def __rmul__(self, other: float) -> Expression:
        return mul(as_expression(other), self)

    def __truediv__(self, other: Expression | float) -> Expression:
        return div(self, as_expression(other))

    def __rtruediv__(self, other: float) -> Expression:
        return div(as_expression(other), self)

    def __neg__(self) -> Expression:
        return neg(self)

    def __pow__(self, exponent: int | Fraction) -> Expression:
        return power(self, Fraction(exponent))

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expression):
    pass


@dataclass(frozen=True, eq=True)
class Add(Expression):
    left: Expression
    right: Expression
    precedence = 10


@dataclass(frozen=True, eq=True)
class Sub(Expression):
    left: Expression
    right: Expression
    precedence = 10


@dataclass(frozen=True, eq=True)
class Mul(Expression):
    left: Expression
    right: Expression
    precedence = 20


@dataclass(frozen=True, eq=True)
class Div(Expression):
    left: Expression
    right: Expression
    precedence = 20


@dataclass(frozen=True, eq=True)
class Neg(Expression):
    operand: Expression
    precedence = 30


@dataclass(frozen=True, eq=True)
class Pow(Expression):
    base: Expression
    exponent: Fraction
    precedence = 40


@dataclass(frozen=True, eq=True)
class Func(Expression):
    name: str
    arg: Expression

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


X = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


def as_expression(value: Expression | float | int) -> Expression:
    if isinstance(value, Expression):
        return value
    return Const(float(value))


def _is_const(e: Expression, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors: fold constants and drop neutral elements. Used for
# derivative trees and programmatic construction; never for parsed text, so
# that e.g. x/x keeps its undefined point at 0.

def add(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.operand)
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.operand)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.operand, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.operand))
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0):
        return ZERO
    if isinstance(a, Neg):
        return neg(div(a.operand, b))
    return Div(a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(a: Expression, exponent: Fraction) -> Expression:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return a
    if isinstance(a, Const) and exponent.denominator == 1 and (a.value != 0.0 or exponent > 0):
        return Const(a.value ** int(exponent))
    if isinstance(a, Pow) and exponent.denominator == 1:
        return Pow(a.base, a.exponent * exponent)
    return Pow(a, exponent)


def func(name: str, arg: Expression) -> Expression:
    return Func(name, arg)


def exp(arg: Expression) -> Expression:
    return Func("exp", arg)


def log(arg: Expression) -> Expression:
    return Func("log", arg)


def sqrt(arg: Expression) -> Expression:
    return Func("sqrt", arg)


def sinh(arg: Expression) -> Expression:
    return Func("sinh", arg)


def cosh(arg: Expression) -> Expression:
    return Func("cosh", arg)


def tanh(arg: Expression) -> Expression:
    return Func("tanh", arg)


def polynomial(coefficients: list[float]) -> Expression:
    """Horner-free sum c0 + c1 x + c2 x^2 + ... with zero terms dropped."""
    result: Expression = ZERO
    for k, c in enumerate(coefficients):
        if c == 0.0:
            continue
        result = add(result, mul(Const(float(c)), power(X, Fraction(k))))
    return result


# ---------------------------------------------------------------- rendering

def _number_text(value: float) -> str:
    text = format(value, ".17g")
    return f"({text})" if value < 0 else text


def _exponent_text(r: Fraction) -> str:
    if r.denominator == 1:
        return str(r.numerator) if r >= 0 else f"({r.numerator})"
    return f"({r.numerator}/{r.denominator})"


@singledispatch
def to_text(expr: Expression) -> str:
    raise TypeError(f"cannot render {type(expr).__name__}")


@to_text.register
def _(expr: Const) -> str:
    return _number_text(expr.value)


@to_text.register
def _(expr: Var) -> str:
    return "x"


def _wrap(child: Expression, parent_precedence: int, strict: bool = False) -> str:
    text = to_text(child)
    if child.precedence < parent_precedence or (strict and child.precedence == parent_precedence):
        return f"({text})"
    return text


@to_text.register(Add)
@to_text.register(Sub)
@to_text.register(Mul)
@to_text.register(Div)
def _(expr: Add | Sub | Mul | Div) -> str:
    symbol = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(expr)]
    left = _wrap(expr.left, expr.precedence)
    # right operand of - and / binds tighter to preserve left associativity
    right = _wrap(expr.right, expr.precedence, strict=isinstance(expr, (Sub, Div, Add, Mul)))
    return f"{left}{symbol}{right}"


@to_text.register
def _(expr: Neg) -> str:
    return f"-{_wrap(expr.operand, expr.precedence)}"


@to_text.register
def _(expr: Pow) -> str:
    return f"{_wrap(expr.base, 100)}^{_exponent_text(expr.exponent)}"


@to_text.register
def _(expr: Func) -> str:
    return f"{expr.name}({to_text(expr.arg)})"


# ------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN_RE.match(text, position)
        if match is None or match.end() == position:
            stripped = text[position:].lstrip()
            raise ExpressionSyntaxError(
                _byte_offset(text, len(text) - len(stripped)),
                "number, 'x', function name, operator or parenthesis",
                stripped[:1],
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(text, start)))
        position = match.end()
    tokens.append(_Token("end", "", len(text.encode())))
    return tokens


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode())


class _Parser:
    """Recursive-descent parser producing raw (unsimplified) trees."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _fail(self, expected: str) -> None:
        token = self.current
        raise ExpressionSyntaxError(token.offset, expected, token.text or "end of input")

    def _expect_op(self, symbol: str) -> None:
        if self.current.kind != "op" or self.current.text != symbol:
            self._fail(f"'{symbol}'")
        self._advance()

    def parse(self) -> Expression:
        tree = self.expr()
        if self.current.kind != "end":
            self._fail("operator or end of input")
        return tree

    def expr(self) -> Expression:
        tree = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            symbol = self._advance().text
            right = self.term()
            tree = Add(tree, right) if symbol == "+" else Sub(tree, right)
        return tree

    def term(self) -> Expression:
        tree = self.factor()
        while self.current.kind == "op" and self.current.text in "*/":
            symbol = self._advance().text
            right = self.factor()
            tree = Mul(tree, right) if symbol == "*" else Div(tree, right)
        return tree

    def factor(self) -> Expression:
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            return Neg(self.factor())
        tree = self.base()
        if self.current.kind == "op" and self.current.text == "^":
            self._advance()
            tree = Pow(tree, self.exponent())
        return tree

    def base(self) -> Expression:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "name":
            if token.text == "x":
                self._advance()
                return X
            if token.text in FUNCTIONS:
                self._advance()
                self._expect_op("(")
                arg = self.expr()
                self._expect_op(")")
                return Func(token.text, arg)
            self._fail("'x' or one of " + ", ".join(FUNCTIONS))
        if token.kind == "op" and token.text == "(":
            self._advance()
            tree = self.expr()
            self._expect_op(")")
            return tree
        self._fail("number, 'x', function or '('")

    def _signed_integer(self) -> int:
        sign = 1
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            sign = -1
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            self._fail("integer")
        self._advance()
        return sign * int(token.text)

    def exponent(self) -> Fraction:
        if self.current.kind == "op" and self.current.text == "(":
            self._advance()
            numerator = self._signed_integer()
            denominator = 1
            if self.current.kind == "op" and self.current.text == "/":
                self._advance()
                token = self.current
                if token.kind != "number" or not token.text.isdigit() or int(token.text) == 0:
                    self._fail("positive integer")
                self._advance()
                denominator = int(token.text)
            self._expect_op(")")
            return Fraction(numerator, denominator)
        return Fraction(self._signed_integer())


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree.

    Raises:
        ExpressionSyntaxError: with the byte offset of the offending token and
            a description of what was expected there.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------- differentiation

@singledispatch
def _derivative(expr: Expression) -> Expression:
    raise TypeError(f"cannot differentiate {type(expr).__name__}")


@_derivative.register
def _(expr: Const) -> Expression:
    return ZERO


@_derivative.register
def _(expr: Var) -> Expression:
    return ONE


@_derivative.register
def _(expr: Add) -> Expression:
    return add(_derivative(expr.left), _derivative(expr.right))


@_derivative.register
def _(expr: Sub) -> Expression:
    return sub(_derivative(expr.left), _derivative(expr.right))


@_derivative.register
def _(expr: Mul) -> Expression:
    f, g = expr.left, expr.right
    return add(mul(_derivative(f), g), mul(f, _derivative(g)))


@_derivative.register
def _(expr: Div) -> Expression:
    f, g = expr.left, expr.right
    numerator = sub(mul(_derivative(f), g), mul(f, _derivative(g)))
    return div(numerator, power(g, Fraction(2)))


@_derivative.register
def _(expr: Neg) -> Expression:
    return neg(_derivative(expr.operand))


@_derivative.register
def _(expr: Pow) -> Expression:
    r = expr.exponent
    outer = mul(Const(float(r)), power(expr.base, r - 1))
    return mul(outer, _derivative(expr.base))


@_derivative.register
def _(expr: Func) -> Expression:
    u, du = expr.arg, _derivative(expr.arg)
    if expr.name == "exp":
        return mul(expr, du)
    if expr.name == "log":
        return div(du, u)
    if expr.name == "sqrt":
        return div(du, mul(Const(2.0), expr))
    if expr.name == "sinh":
        return mul(cosh(u), du)
    if expr.name == "cosh":
        return mul(sinh(u), du)
    # tanh
    return mul(power(cosh(u), Fraction(-2)), du)


def differentiate(f: Expression, order: int = 1) -> Expression:
    """Exact symbolic derivative of order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    for _ in range(order):
        f = _derivative(f)
    return f


# --------------------------------------------------------------- evaluation

def _safe_divide(numerator, denominator):
    denominator = np.where(denominator == 0.0, 0.0, denominator)  # -0.0 -> +0.0
    return numerator / denominator


@singledispatch
def _evaluate(expr: Expression, x, cache: dict):
    raise TypeError(f"cannot evaluate {type(expr).__name__}")


def _cached(expr: Expression, x, cache: dict):
    key = id(expr)
    if key not in cache:
        cache[key] = _evaluate(expr, x, cache)
    return cache[key]


@_evaluate.register
def _(expr: Const, x, cache):
    return np.float64(expr.value)


@_evaluate.register
def _(expr: Var, x, cache):
    return x


@_evaluate.register
def _(expr: Add, x, cache):
    return _cached(expr.left, x, cache) + _cached(expr.right, x, cache)


@_evaluate.register
def _(expr: Sub, x, cache):
    return _cached(expr.left, x, cache) - _cached(expr.right, x, cache)


@_evaluate.register
def _(expr: Mul, x, cache):
    return _cached(expr.left, x, cache) * _cached(expr.right, x, cache)


@_evaluate.register
def _(expr: Div, x, cache):
    return _safe_divide(_cached(expr.left, x, cache), _cached(expr.right, x, cache))


@_evaluate.register
def _(expr: Neg, x, cache):
    return -_cached(expr.operand, x, cache)


@_evaluate.register
def _(expr: Pow, x, cache):
    base = _cached(expr.base, x, cache)
    r = expr.exponent
    if r.denominator == 1:
        n = int(r)
        if n >= 0:
            return base ** n
        return _safe_divide(1.0, base ** (-n))
    magnitude = np.abs(base) ** float(r)
    if r.denominator % 2 == 0:
        return np.where(base < 0, np.nan, magnitude)
    # odd root of a negative number stays real
    return np.copysign(magnitude, base) if r.numerator % 2 else magnitude


@_evaluate.register
def _(expr: Func, x, cache):
    u = _cached(expr.arg, x, cache)
    if expr.name == "log":
        return np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), np.nan)
    if expr.name == "sqrt":
        return np.where(u >= 0, np.sqrt(np.abs(u)), np.nan)
    return getattr(np, expr.name)(u)


def evaluate(f: Expression, x: ArrayLike) -> ArrayLike:
    """Evaluate ``f`` at a point or array of points.

    Returns finite values, signed infinities, or NaN for undefined points; the
    result has the shape of ``x`` (a Python float for scalar input).
    """
    xs = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        values = _evaluate(f, xs, {})
    values = np.broadcast_to(np.asarray(values, dtype=float), xs.shape)
    if values.ndim == 0:
        return float(values)
    return np.array(values)


# ----------------------------------------------------------- parsed function

@dataclass(frozen=True)
class ParsedFunction:
    """An expression with its first three derivatives built on first use."""
    base: Expression
    text: str | None = field(default=None, compare=False)

    @classmethod
    def from_text(cls, text: str) -> ParsedFunction:
        return cls(parse(text), text)

    @cached_property
    def d1(self) -> Expression:
        return _derivative(self.base)

    @cached_property
    def d2(self) -> Expression:
        return _derivative(self.d1)

    @cached_property
    def d3(self) -> Expression:
        return _derivative(self.d2)

    @cached_property
    def d4(self) -> Expression:
        return _derivative(self.d3)

    def derivative(self, order: int) -> Expression:
        if order == 0:
            return self.base
        if order in (1, 2, 3, 4):
            return getattr(self, f"d{order}")
        raise ValueError(f"derivative order {order} not cached")

    def __call__(self, x: ArrayLike, order: int = 0) -> ArrayLike:
        return evaluate(self.derivative(order), x)

    def derivative_function(self) -> ParsedFunction:
        """f' as a ParsedFunction sharing the already built derivative trees."""
        shifted = ParsedFunction(self.d1)
        shifted.__dict__["d1"] = self.d2
        shifted.__dict__["d2"] = self.d3
        shifted.__dict__["d3"] = self.d4
        return shifted

    def reciprocal(self) -> ParsedFunction:
        return ParsedFunction(Div(ONE, self.base))

    def describe(self) -> str:
        return self.text if self.text is not None else to_text(self.base)


# ------------------------------------------------------------- root finding

class RootKind(Enum):
    ZERO = "zero"
    POLE = "pole"


@dataclass(frozen=True)
class Root:
    location: float
    kind: RootKind
    residual: float


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def locations(self) -> list[float]:
        return [root.location for root in self.roots]

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self) -> Iterator[Root]:
        return iter(self.roots)


def _check_interval(interval: tuple[float, float], scan_points: int) -> tuple[float, float]:
    a, b = float(interval[0]), float(interval[1])
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ValueError(f"interval must be finite and increasing, got {interval}")
    if scan_points < MIN_SCAN_POINTS:
        raise ValueError(f"scan_points must be >= {MIN_SCAN_POINTS}, got {scan_points}")
    return a, b


def _brentq(fn: Callable[[float], float], lo: float, hi: float) -> float:
    return optimize.brentq(fn, lo, hi, xtol=1e-15 * max(1.0, abs(lo), abs(hi)), maxiter=200)


@dataclass
class _Scan:
    xs: npt.NDArray[np.float64]
    ys: npt.NDArray[np.float64]

    @cached_property
    def signs(self) -> npt.NDArray[np.float64]:
        return np.sign(self.ys)

    @cached_property
    def finite(self) -> npt.NDArray[np.bool_]:
        return np.isfinite(self.ys)

    def sign_change_cells(self) -> npt.NDArray[np.int64]:
        s, ok = self.signs, self.finite
        return np.nonzero(ok[:-1] & ok[1:] & (s[:-1] * s[1:] < 0))[0]

    def exact_zeros(self) -> npt.NDArray[np.int64]:
        return np.nonzero(self.ys == 0.0)[0]

    def local_minima(self) -> npt.NDArray[np.int64]:
        """Interior samples where |y| dips without a sign change."""
        y, s, ok = np.abs(self.ys), self.signs, self.finite
        mid = slice(1, -1)
        mask = (
            ok[:-2] & ok[1:-1] & ok[2:]
            & (y[mid] <= y[:-2]) & (y[mid] <= y[2:])
            & (s[:-2] == s[mid]) & (s[2:] == s[mid]) & (s[mid] != 0)
        )
        return np.nonzero(mask)[0] + 1

    @cached_property
    def scale(self) -> float:
        """Typical |f| over the scan; a high percentile so spikes beside poles do not dominate.

        Every tolerance is taken relative to it, which keeps the scan invariant
        under f -> a*f.
        """
        y = np.abs(self.ys[self.finite])
        y = y[y > 0]
        return float(np.percentile(y, SCALE_QUANTILE)) if y.size else 1.0


def _scalar(f: ParsedFunction, order: int = 0) -> Callable[[float], float]:
    return lambda t: float(f(t, order))


def _zero_in_cell(f: ParsedFunction, lo: float, hi: float, scale: float) -> tuple[float, float] | None:
    """Refine a sign change of f on [lo, hi]; None when it is a jump, not a zero."""
    root = _brentq(_scalar(f), lo, hi)
    value = f(root)
    if not np.isfinite(value) or abs(value) > 1e-6 * scale:
        return None
    polished = optimize.newton(_scalar(f), root, fprime=_scalar(f, 1), tol=1e-15, maxiter=3, disp=False)
    polished = float(polished)
    if lo <= polished <= hi and np.isfinite(f(polished)) and abs(f(polished)) <= abs(value):
        root, value = polished, f(polished)
    return root, abs(float(value))


def _scan_zeros(f: ParsedFunction, scan: _Scan, width: float, kind: RootKind) -> tuple[list[Root], list[str]]:
    found: list[Root] = []
    warnings: list[str] = []

    scale = scan.scale

    def accept(location: float, residual: float) -> None:
        slope = abs(f(location, 1))
        if not np.isfinite(slope):
            # exact sample hits of a removable point; fall back to a centred difference
            step = 1e-7 * max(1.0, abs(location))
            slope = abs(f(location + step) - f(location - step)) / (2 * step)
        if not slope > SLOPE_TOL * scale / width:
            raise SimplicityViolation(
                f"{kind.value} at x={location:.12g} is not simple (|f'|={slope:.3g})",
                location=location, kind=kind.value,
            )
        if residual > ZERO_TOL * scale:
            logger.debug("root at %.15g kept with residual %.3g", location, residual)
        found.append(Root(float(location), kind, residual))

    for i in scan.sign_change_cells():
        refined = _zero_in_cell(f, scan.xs[i], scan.xs[i + 1], scale)
        if refined is not None:
            accept(*refined)

    for i in scan.exact_zeros():
        accept(float(scan.xs[i]), 0.0)

    for i in scan.local_minima():
        lo, hi = scan.xs[i - 1], scan.xs[i + 1]
        d_lo, d_hi = f(lo, 1), f(hi, 1)
        if not (np.isfinite(d_lo) and np.isfinite(d_hi)) or d_lo * d_hi >= 0:
            continue
        centre = _brentq(_scalar(f, 1), lo, hi)
        value = f(centre)
        if not np.isfinite(value):
            continue
        if abs(value) <= ZERO_TOL * scale:
            raise SimplicityViolation(
                f"{kind.value} at x={centre:.12g} touches zero without a sign change",
                location=float(centre), kind=kind.value,
            )
        if np.sign(value) != scan.signs[i]:
            message = f"two {kind.value}s within one scan cell near x={centre:.6g}"
            logger.warning(message)
            warnings.append(message)
            for cell in ((lo, centre), (centre, hi)):
                refined = _zero_in_cell(f, cell[0], cell[1], scale)
                if refined is not None:
                    accept(*refined)
    return found, warnings


def _collect(roots: list[Root], warnings: list[str]) -> RootSet:
    ordered: list[Root] = []
    for root in sorted(roots, key=lambda r: r.location):
        if ordered and abs(root.location - ordered[-1].location) <= 1e-12 * max(1.0, abs(root.location)):
            continue
        ordered.append(root)
    return RootSet(tuple(ordered), tuple(warnings))


def locate_roots(f: ParsedFunction, interval: tuple[float, float],
                 scan_points: int = DEFAULT_SCAN_POINTS) -> RootSet:
    """Find the simple zeros of ``f`` on ``interval``.

    Sign changes on a uniform scan are refined by Brent's method and polished
    with Newton steps. Sign changes across poles are discarded. Samples where
    |f| dips without changing sign are inspected: a touch of zero raises
    SimplicityViolation, a dip below zero means two roots in one scan cell
    (both are returned and a resolution warning is recorded).
    """
    a, b = _check_interval(interval, scan_points)
    xs = np.linspace(a, b, scan_points)
    scan = _Scan(xs, np.asarray(f(xs), dtype=float))
    roots, warnings = _scan_zeros(f, scan, b - a, RootKind.ZERO)
    result = _collect(roots, warnings)
    logger.debug("zeros of %s on [%g, %g]: %s", f.describe(), a, b, result.locations)
    return result


def _is_growing_pole(f: ParsedFunction, location: float) -> bool:
    """|f| grows on both sides by at least POLE_GROWTH when the offset from ``location`` halves."""
    step = POLE_OFFSET * max(1.0, abs(location))
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.abs(f(np.array([location - step, location + step])))
        far = np.abs(f(np.array([location - 2 * step, location + 2 * step])))
        return bool(np.all(np.isfinite(far)) and np.all(far > 0) and np.all(near >= POLE_GROWTH * far))


def locate_poles(f: ParsedFunction, interval: tuple[float, float],
                 scan_points: int = DEFAULT_SCAN_POINTS) -> RootSet:
    """Find simple poles of ``f`` as zeros of its reciprocal with a growth test."""
    a, b = _check_interval(interval, scan_points)
    g = f.reciprocal()
    xs = np.linspace(a, b, scan_points)
    scan = _Scan(xs, np.asarray(g(xs), dtype=float))
    candidates, warnings = _scan_zeros(g, scan, b - a, RootKind.POLE)
    poles = [root for root in candidates if _is_growing_pole(f, root.location)]
    result = _collect(poles, warnings)
    logger.debug("poles of %s on [%g, %g]: %s", f.describe(), a, b, result.locations)
    return result
