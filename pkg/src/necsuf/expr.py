"""A tiny expression language for structural equations and cost functions.

Grammar (EBNF)::

    expr  := cond
    cond  := "if" expr "then" expr "else" expr | case | or
    case  := "case" ident "of" (value "->" expr ";")+ "default" "->" expr
    or    := and ("or" and)*
    and   := cmp ("and" cmp)*
    cmp   := add (relop add)?          relop: < <= == != >= >
    add   := mul (("+"|"-") mul)*
    mul   := unary (("*"|"/") unary)*
    unary := "not" unary | "-" unary | atom
    atom  := number | ident | string-literal | "(" expr ")"

No loops, no recursion, no user functions: an expression is a pure total
function of its environment (up to division by zero).  Booleans coerce
to 1/0 when used arithmetically; comparisons between strings use plain
equality, and ``<``-style comparisons require both sides numeric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ValidationError

Value = Union[int, float, str]


class ExprSyntaxError(ValidationError):
    """Parse failure with position information."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class EvalError(ValidationError):
    """Runtime failure while evaluating an expression."""


# -- AST ------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # 'not' | 'neg'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / < <= == != >= > and or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class Case:
    subject: str
    arms: tuple[tuple[Value, "Expr"], ...]
    default: "Expr"


Expr = Union[Lit, Ref, Unary, Binary, Cond, Case]

KEYWORDS = {"if", "then", "else", "case", "of", "default", "and", "or", "not"}

# -- tokenizer -------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, str, op, kw, eof
    text: str
    line: int
    column: int


_TWO_CHAR = ("<=", ">=", "==", "!=", "->")
_ONE_CHAR = "+-*/<>()=;"


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(_Token("num", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(_Token("kw" if word in KEYWORDS else "ident", word, line, start_col))
            col += j - i
            i = j
            continue
        if ch in ("'", '"'):
            j = i + 1
            while j < n and source[j] != ch:
                if source[j] == "\n":
                    raise ExprSyntaxError("unterminated string literal", line, start_col)
                j += 1
            if j >= n:
                raise ExprSyntaxError("unterminated string literal", line, start_col)
            tokens.append(_Token("str", source[i + 1 : j], line, start_col))
            col += j - i + 1
            i = j + 1
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(_Token("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(_Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# -- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise ExprSyntaxError(
                f"expected {want!r}, found {tok.text!r}" if tok.text else f"expected {want!r}",
                tok.line,
                tok.column,
            )
        return self.next()

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "kw" and tok.text == word

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    # grammar rules

    def expr(self) -> Expr:
        if self.at_kw("if"):
            self.next()
            test = self.expr()
            self.expect("kw", "then")
            then = self.expr()
            self.expect("kw", "else")
            other = self.expr()
            return Cond(test, then, other)
        if self.at_kw("case"):
            return self.case()
        return self.or_()

    def case(self) -> Expr:
        self.expect("kw", "case")
        subject = self.expect("ident").text
        self.expect("kw", "of")
        arms: list[tuple[Value, Expr]] = []
        while not self.at_kw("default"):
            tok = self.peek()
            if tok.kind == "num":
                self.next()
                key: Value = _num(tok.text)
            elif tok.kind == "str":
                self.next()
                key = tok.text
            elif tok.kind == "op" and tok.text == "-":
                self.next()
                num = self.expect("num")
                key = -_num(num.text)
            else:
                raise ExprSyntaxError(
                    f"expected a case value or 'default', found {tok.text!r}", tok.line, tok.column
                )
            self.expect("op", "->")
            arms.append((key, self.expr()))
            self.expect("op", ";")
        if not arms:
            tok = self.peek()
            raise ExprSyntaxError("case needs at least one arm before 'default'", tok.line, tok.column)
        self.expect("kw", "default")
        self.expect("op", "->")
        default = self.expr()
        return Case(subject, tuple(arms), default)

    def or_(self) -> Expr:
        node = self.and_()
        while self.at_kw("or"):
            self.next()
            node = Binary("or", node, self.and_())
        return node

    def and_(self) -> Expr:
        node = self.cmp()
        while self.at_kw("and"):
            self.next()
            node = Binary("and", node, self.cmp())
        return node

    def cmp(self) -> Expr:
        node = self.add()
        if self.at_op("<", "<=", "==", "!=", ">=", ">"):
            op = self.next().text
            node = Binary(op, node, self.add())
        return node

    def add(self) -> Expr:
        node = self.mul()
        while self.at_op("+", "-"):
            op = self.next().text
            node = Binary(op, node, self.mul())
        return node

    def mul(self) -> Expr:
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.next().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.at_kw("not"):
            self.next()
            return Unary("not", self.unary())
        if self.at_op("-"):
            self.next()
            return Unary("neg", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Lit(_num(tok.text))
        if tok.kind == "str":
            self.next()
            return Lit(tok.text)
        if tok.kind == "ident":
            self.next()
            return Ref(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.next()
            node = self.expr()
            self.expect("op", ")")
            return node
        raise ExprSyntaxError(
            f"expected an expression, found {tok.text!r}" if tok.text else "unexpected end of input",
            tok.line,
            tok.column,
        )


def _num(text: str) -> Value:
    if "." in text:
        return float(text)
    return int(text)


def parse(source: str) -> Expr:
    """Parse ``source``; raises ExprSyntaxError with line/column on failure."""
    parser = _Parser(_tokenize(source))
    node = parser.expr()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ExprSyntaxError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)
    return node


# -- evaluation --------------------------------------------------------------

Env = dict[str, Value]  # an Env is just a name -> value mapping


def references(e: Expr) -> frozenset[str]:
    """All variable names an expression reads."""
    if isinstance(e, Lit):
        return frozenset()
    if isinstance(e, Ref):
        return frozenset([e.name])
    if isinstance(e, Unary):
        return references(e.operand)
    if isinstance(e, Binary):
        return references(e.left) | references(e.right)
    if isinstance(e, Cond):
        return references(e.test) | references(e.then) | references(e.other)
    if isinstance(e, Case):
        out = frozenset([e.subject]) | references(e.default)
        for _, arm in e.arms:
            out |= references(arm)
        return out
    raise TypeError(f"not an Expr: {e!r}")


def _truthy(v: Value) -> bool:
    if isinstance(v, str):
        raise EvalError(f"string {v!r} used where a boolean is needed")
    return v != 0


def _numeric(v: Value, op: str) -> float | int:
    if isinstance(v, str):
        raise EvalError(f"string {v!r} used with numeric operator {op!r}")
    return v


def evaluate(e: Expr, env: dict) -> Value:
    """Strict evaluation of ``e`` under ``env``.

    Every identifier must be bound; division by zero and type misuse
    raise EvalError.  Boolean results are 1/0.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ref):
        if e.name not in env:
            raise EvalError(f"unbound identifier {e.name!r}")
        return env[e.name]
    if isinstance(e, Unary):
        v = evaluate(e.operand, env)
        if e.op == "not":
            return 0 if _truthy(v) else 1
        return -_numeric(v, "-")
    if isinstance(e, Binary):
        if e.op == "and":
            return 1 if _truthy(evaluate(e.left, env)) and _truthy(evaluate(e.right, env)) else 0
        if e.op == "or":
            return 1 if _truthy(evaluate(e.left, env)) or _truthy(evaluate(e.right, env)) else 0
        lhs = evaluate(e.left, env)
        rhs = evaluate(e.right, env)
        if e.op == "==":
            return 1 if lhs == rhs else 0
        if e.op == "!=":
            return 1 if lhs != rhs else 0
        if e.op in ("<", "<=", ">=", ">"):
            a, b = _numeric(lhs, e.op), _numeric(rhs, e.op)
            return 1 if {"<": a < b, "<=": a <= b, ">=": a >= b, ">": a > b}[e.op] else 0
        a, b = _numeric(lhs, e.op), _numeric(rhs, e.op)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise EvalError("division by zero")
            return a / b
        raise TypeError(f"unknown operator {e.op!r}")
    if isinstance(e, Cond):
        return evaluate(e.then if _truthy(evaluate(e.test, env)) else e.other, env)
    if isinstance(e, Case):
        if e.subject not in env:
            raise EvalError(f"unbound identifier {e.subject!r}")
        subject = env[e.subject]
        for key, arm in e.arms:
            if key == subject:
                return evaluate(arm, env)
        return evaluate(e.default, env)
    raise TypeError(f"not an Expr: {e!r}")


# -- pretty printing ----------------------------------------------------------


def _fmt_value(v: Value) -> str:
    if isinstance(v, str):
        return "'" + v + "'"
    return repr(v)


def pretty(e: Expr) -> str:
    """Render an expression back to parseable source (parse . pretty . parse
    is the identity on parse trees)."""
    if isinstance(e, Lit):
        return _fmt_value(e.value)
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Unary):
        op = "not " if e.op == "not" else "-"
        return f"{op}({pretty(e.operand)})"
    if isinstance(e, Binary):
        return f"({_operand(e.left)} {e.op} {_operand(e.right)})"
    if isinstance(e, Cond):
        return f"if {pretty(e.test)} then {pretty(e.then)} else {pretty(e.other)}"
    if isinstance(e, Case):
        arms = " ".join(f"{_fmt_value(k)} -> {pretty(v)};" for k, v in e.arms)
        return f"case {e.subject} of {arms} default -> {pretty(e.default)}"
    raise TypeError(f"not an Expr: {e!r}")


def _operand(e: Expr) -> str:
    # conditionals and case tables only appear bare at statement level;
    # as operands they need the parentheses
    if isinstance(e, (Cond, Case)):
        return f"({pretty(e)})"
    return pretty(e)
