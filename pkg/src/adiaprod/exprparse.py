"""Minimal expression language for user-supplied time profiles.

Grammar (tightest first): parentheses and calls; ``^`` right-associative,
binding tighter than unary minus; then ``* /``; then ``+ -``. The only free
variable is ``t``; constants ``pi`` and ``e``; functions sin, cos, tan, exp,
ln, sqrt, abs. Errors carry byte offsets into the source.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs")
CONSTANTS = {"pi": np.pi, "e": np.e}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r}", position)
        self.name = name


class DomainError(ArithmeticError):
    pass


# ---- AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass  # the time variable t


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Const, Neg, Bin, Call]


# ---- tokenizer ------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # num ident op lparen rparen end
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            seen_exp = False
            while j < n and (src[j].isdigit() or src[j] == "."
                             or (src[j] in "eE" and j + 1 < n
                                 and (src[j + 1].isdigit() or src[j + 1] in "+-")
                                 and not seen_exp)
                             or (seen_exp and src[j] in "+-" and src[j - 1] in "eE")):
                if src[j] in "eE":
                    seen_exp = True
                j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ExprSyntaxError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("ident", src[i:j], i))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---- parser ---------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExprSyntaxError(f"expected {what}", tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.pos)
        return node

    def sum(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        if self.peek().kind == "op" and self.peek().text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return Bin("^", base, self.unary())  # right-assoc, sign allowed
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "lparen":
            self.advance()
            node = self.sum()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name == "t":
                return Var()
            if name in CONSTANTS:
                return Const(name)
            if name in FUNCTIONS:
                self.expect("lparen", f"'(' after {name}")
                arg = self.sum()
                self.expect("rparen", "')'")
                return Call(name, arg)
            raise UnknownIdentifier(name, tok.pos)
        raise ExprSyntaxError("expected a value", tok.pos)


def parse(src: str) -> Expr:
    return _Parser(src).parse()


# ---- evaluation -----------------------------------------------------------

def _check_finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def evaluate(node: Expr, t):
    """Evaluate at a scalar or ndarray t with IEEE double semantics.

    ln/sqrt of a negative number, division by zero and overflow raise
    DomainError.
    """
    arr = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        value = _eval(node, arr)
    out = np.asarray(value, dtype=float) * np.ones_like(arr)
    _check_finite(out, "expression")
    return float(out) if np.isscalar(t) or out.ndim == 0 else out


def _eval(node: Expr, t: np.ndarray):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.child, t)
    if isinstance(node, Bin):
        lhs = _eval(node.left, t)
        rhs = _eval(node.right, t)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        if node.op == "/":
            if np.any(rhs == 0.0):
                raise DomainError("division by zero")
            return lhs / rhs
        out = np.power(lhs, rhs)
        return _check_finite(out, "power")
    if isinstance(node, Call):
        arg = _eval(node.arg, t)
        if node.func == "ln":
            if np.any(arg <= 0.0):
                raise DomainError("ln of a non-positive number")
            return np.log(arg)
        if node.func == "sqrt":
            if np.any(arg < 0.0):
                raise DomainError("sqrt of a negative number")
            return np.sqrt(arg)
        fn = {"sin": np.sin, "cos": np.cos, "tan": np.tan,
              "exp": np.exp, "abs": np.abs}[node.func]
        return _check_finite(fn(arg), node.func)
    raise TypeError(f"not an expression node: {node!r}")


# ---- symbolic derivative --------------------------------------------------

def _is_constant(node: Expr) -> bool:
    if isinstance(node, (Num, Const)):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return _is_constant(node.child)
    if isinstance(node, Bin):
        return _is_constant(node.left) and _is_constant(node.right)
    if isinstance(node, Call):
        return _is_constant(node.arg)
    return False


_ZERO = Num(0.0)
_ONE = Num(1.0)


def derivative(node: Expr) -> Expr:
    """Symbolic d/dt of the tree (unsimplified except for trivial zeros)."""
    if isinstance(node, (Num, Const)):
        return _ZERO
    if isinstance(node, Var):
        return _ONE
    if isinstance(node, Neg):
        return Neg(derivative(node.child))
    if isinstance(node, Bin):
        u, v = node.left, node.right
        du, dv = derivative(u), derivative(v)
        if node.op == "+":
            return Bin("+", du, dv)
        if node.op == "-":
            return Bin("-", du, dv)
        if node.op == "*":
            return Bin("+", Bin("*", du, v), Bin("*", u, dv))
        if node.op == "/":
            num = Bin("-", Bin("*", du, v), Bin("*", u, dv))
            return Bin("/", num, Bin("^", v, Num(2.0)))
        # power rule for constant exponent, logarithmic form otherwise
        if _is_constant(v):
            return Bin("*", Bin("*", v, Bin("^", u, Bin("-", v, _ONE))), du)
        log_term = Bin("*", dv, Call("ln", u))
        ratio = Bin("/", Bin("*", v, du), u)
        return Bin("*", node, Bin("+", log_term, ratio))
    if isinstance(node, Call):
        inner = derivative(node.arg)
        u = node.arg
        outer = {
            "sin": Call("cos", u),
            "cos": Neg(Call("sin", u)),
            "tan": Bin("/", _ONE, Bin("^", Call("cos", u), Num(2.0))),
            "exp": Call("exp", u),
            "ln": Bin("/", _ONE, u),
            "sqrt": Bin("/", Num(0.5), Call("sqrt", u)),
            "abs": Bin("/", u, Call("abs", u)),
        }[node.func]
        return Bin("*", outer, inner)
    raise TypeError(f"not an expression node: {node!r}")


def eval_derivative(node: Expr, t):
    return evaluate(derivative(node), t)


# ---- printing -------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_source(node: Expr) -> str:
    """Render back to the surface syntax; parse(to_source(x)) == x."""
    return _print(node, 0)


def _print(node: Expr, parent_prec: int) -> str:
    if isinstance(node, Num):
        text = repr(node.value)
        return text[:-2] if text.endswith(".0") else text
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        inner = _print(node.child, _PREC["neg"])
        out = f"-{inner}"
        return f"({out})" if parent_prec > _PREC["neg"] else out
    if isinstance(node, Call):
        return f"{node.func}({_print(node.arg, 0)})"
    prec = _PREC[node.op]
    if node.op == "^":
        # right-associative; exponent may carry a sign
        left = _print(node.left, prec + 1)
        right = _print(node.right, prec)
        out = f"{left}^{right}"
    else:
        left = _print(node.left, prec)
        right = _print(node.right, prec + 1)
        out = f"{left} {node.op} {right}"
    return f"({out})" if parent_prec > prec else out
