import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, List, Optional, Tuple as TupleT

from utils.errors import ParseError

TOKEN_RE = re.compile(
    r"(?P<NUMBER>\d+)"
    r"|(?P<NAME>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<OP>[+\-*/^(),])"
    r"|(?P<NEWLINE>\n)"
    r"|(?P<SKIP>[ \t\r]+)"
    r"|(?P<BAD>.)"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start = 1, 0
    for m in TOKEN_RE.finditer(text):
        kind = m.lastgroup
        column = m.start() - line_start + 1
        if kind == "NEWLINE":
            line += 1
            line_start = m.end()
            continue
        if kind == "SKIP":
            continue
        if kind == "BAD":
            raise ParseError(f"unexpected character '{m.group()}'", line, column)
        tokens.append(Token(kind, m.group(), line, column))
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


# ---- AST ----

@dataclass(frozen=True)
class Node:
    line: int
    column: int


@dataclass(frozen=True)
class Num(Node):
    value: Fraction


@dataclass(frozen=True)
class Sym(Node):
    name: str


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: TupleT[Node, ...]


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: Node


@dataclass(frozen=True)
class Tup(Node):
    items: TupleT[Node, ...]


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            raise ParseError(f"expected '{text}' but found '{self.tok.text or 'end of input'}'", self.tok.line, self.tok.column)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "EOF":
            raise ParseError(f"unexpected '{self.tok.text}'", self.tok.line, self.tok.column)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance()
            node = BinOp(op.line, op.column, op.text, node, self.term())
        return node

    def _starts_primary(self) -> bool:
        return self.tok.kind in ("NUMBER", "NAME") or self.tok.text == "("

    def term(self) -> Node:
        node = self.unary()
        while True:
            if self.tok.text in ("*", "/"):
                op = self.advance()
                node = BinOp(op.line, op.column, op.text, node, self.unary())
            elif self._starts_primary():
                # juxtaposition, e.g. "2D" or "3 x"
                t = self.tok
                node = BinOp(t.line, t.column, "*", node, self.power())
            else:
                return node

    def unary(self) -> Node:
        if self.tok.text == "-":
            op = self.advance()
            return Neg(op.line, op.column, self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.text == "^":
            op = self.advance()
            return Pow(op.line, op.column, base, self.unary())
        return base

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return Num(t.line, t.column, Fraction(int(t.text)))
        if t.kind == "NAME":
            self.advance()
            if self.tok.text == "(" and re.fullmatch(r"s\d+", t.text):
                self.advance()
                args = [self.expr()]
                while self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                return Call(t.line, t.column, t.text, tuple(args))
            return Sym(t.line, t.column, t.text)
        if t.text == "(":
            self.advance()
            items = [self.expr()]
            while self.tok.text == ",":
                self.advance()
                items.append(self.expr())
            self.expect(")")
            return items[0] if len(items) == 1 else Tup(t.line, t.column, tuple(items))
        raise ParseError(f"unexpected '{t.text or 'end of input'}'", t.line, t.column)


def parse_expression(text: str) -> Node:
    if not text or not text.strip():
        raise ParseError("empty expression", 1, 1)
    return _Parser(text).parse()


def rational_value(node: Node) -> Fraction:
    """Evaluate a node built only from integers, + - * / and unary minus."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        return -rational_value(node.operand)
    if isinstance(node, BinOp):
        a, b = rational_value(node.left), rational_value(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise ParseError("division by zero", node.line, node.column)
        return a / b
    if isinstance(node, Pow):
        base, exp = rational_value(node.base), rational_value(node.exponent)
        if exp.denominator != 1:
            raise ParseError("rational constants only admit integer powers", node.line, node.column)
        if base == 0 and exp < 0:
            raise ParseError("division by zero", node.line, node.column)
        return base ** int(exp)
    raise ParseError("expected a rational constant", node.line, node.column)


def rational_tuple(node: Node) -> TupleT[Fraction, ...]:
    if isinstance(node, Tup):
        return tuple(rational_value(item) for item in node.items)
    return (rational_value(node),)


class ExpressionEvaluator:
    """Folds an AST into some ring. Subclasses supply constants and symbols;
    generic powers are integer powers by repeated multiplication."""

    def evaluate(self, node: Node) -> Any:
        if isinstance(node, Num):
            return self.number(node.value)
        if isinstance(node, Sym):
            return self.symbol(node)
        if isinstance(node, Call):
            return self.call(node)
        if isinstance(node, Neg):
            return self.neg(self.evaluate(node.operand))
        if isinstance(node, BinOp):
            a, b = self.evaluate(node.left), self.evaluate(node.right)
            if node.op == "+":
                return self.add(a, b)
            if node.op == "-":
                return self.sub(a, b)
            if node.op == "*":
                return self.mul(a, b)
            return self.div(a, b, node)
        if isinstance(node, Pow):
            return self.power(node)
        raise ParseError("tuples are only allowed as exponents", node.line, node.column)

    def number(self, value: Fraction) -> Any:
        raise NotImplementedError

    def symbol(self, node: Sym) -> Any:
        raise ParseError(f"unknown symbol '{node.name}'", node.line, node.column)

    def call(self, node: Call) -> Any:
        raise ParseError(f"unknown function '{node.name}'", node.line, node.column)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def div(self, a, b, node: Node):
        return a / b

    def power(self, node: Pow) -> Any:
        exp = rational_value(node.exponent)
        if exp.denominator != 1:
            raise ParseError("only integer powers are allowed here", node.line, node.column)
        base = self.evaluate(node.base)
        n = int(exp)
        result: Optional[Any] = None
        for _ in range(abs(n)):
            result = base if result is None else self.mul(result, base)
        if result is None:
            result = self.number(Fraction(1))
        if n < 0:
            result = self.div(self.number(Fraction(1)), result, node)
        return result
