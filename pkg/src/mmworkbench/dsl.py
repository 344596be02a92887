"""Cell mini-language: assignments, calls, identifiers, literals.

    program := stmt*
    stmt    := IDENT "=" expr | expr
    expr    := call | IDENT | literal
    call    := IDENT "(" [expr ("," expr)*] ")"
    literal := string | number | bool | list

Statements are whitespace/newline separated; `#` starts a line comment.
There are no operators, so the language stays deterministic and sandboxed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import CellSyntaxError

_KEYWORDS = {"true": True, "false": False}
_PUNCT = "=(),[]"


@dataclass
class Token:
    kind: str  # ident | number | string | bool | punct | eof
    value: Any
    line: int
    col: int


@dataclass
class Name:
    id: str
    line: int = 0
    col: int = 0


@dataclass
class Literal:
    value: Any
    line: int = 0
    col: int = 0


@dataclass
class ListExpr:
    items: list[Any]
    line: int = 0
    col: int = 0


@dataclass
class Call:
    name: str
    args: list[Any]
    line: int = 0
    col: int = 0


@dataclass
class Assign:
    name: str
    expr: Any
    line: int = 0
    col: int = 0


@dataclass
class Program:
    statements: list[Any] = field(default_factory=list)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)

    def err(message: str) -> CellSyntaxError:
        return CellSyntaxError(message, line, col)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch == '"':
            i += 1
            col += 1
            chars: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise err("unterminated string")
                c = source[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise err("unterminated string")
                    esc = source[i + 1]
                    mapped = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}.get(esc)
                    if mapped is None:
                        raise err(f"unknown escape \\{esc}")
                    chars.append(mapped)
                    i += 2
                    col += 2
                    continue
                chars.append(c)
                i += 1
                col += 1
            tokens.append(Token("string", "".join(chars), line, start_col))
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1 if ch == "-" else i
            k = j
            while k < n and source[k].isdigit():
                k += 1
            is_float = False
            if k < n and source[k] == ".":
                is_float = True
                k += 1
                while k < n and source[k].isdigit():
                    k += 1
            if k < n and source[k] in "eE":
                m = k + 1
                if m < n and source[m] in "+-":
                    m += 1
                if m < n and source[m].isdigit():
                    is_float = True
                    k = m
                    while k < n and source[k].isdigit():
                        k += 1
            text = source[i:k]
            value: Any = float(text) if is_float else int(text)
            tokens.append(Token("number", value, line, start_col))
            col += k - i
            i = k
            continue
        if ch.isalpha() or ch == "_":
            k = i
            while k < n and (source[k].isalnum() or source[k] == "_"):
                k += 1
            word = source[i:k]
            if word in _KEYWORDS:
                tokens.append(Token("bool", _KEYWORDS[word], line, start_col))
            else:
                tokens.append(Token("ident", word, line, start_col))
            col += k - i
            i = k
            continue
        if ch in _PUNCT:
            tokens.append(Token("punct", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise err(f"unexpected character {ch!r}")

    tokens.append(Token("eof", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect_punct(self, value: str) -> Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.value != value:
            raise CellSyntaxError(f"expected {value!r}, found {self._show(tok)}",
                                  tok.line, tok.col)
        return self.advance()

    @staticmethod
    def _show(tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.value)

    def program(self) -> Program:
        statements: list[Any] = []
        while self.peek().kind != "eof":
            statements.append(self.statement())
        return Program(statements=statements)

    def statement(self) -> Any:
        tok = self.peek()
        nxt = self.peek(1)
        if tok.kind == "ident" and nxt.kind == "punct" and nxt.value == "=":
            self.advance()
            self.advance()
            value = self.expression()
            return Assign(name=tok.value, expr=value, line=tok.line, col=tok.col)
        return self.expression()

    def expression(self) -> Any:
        tok = self.peek()
        if tok.kind == "ident":
            nxt = self.peek(1)
            if nxt.kind == "punct" and nxt.value == "(":
                return self.call()
            self.advance()
            return Name(id=tok.value, line=tok.line, col=tok.col)
        if tok.kind in ("number", "string", "bool"):
            self.advance()
            return Literal(value=tok.value, line=tok.line, col=tok.col)
        if tok.kind == "punct" and tok.value == "[":
            return self.list_literal()
        raise CellSyntaxError(f"unexpected token {self._show(tok)}", tok.line, tok.col)

    def call(self) -> Call:
        name_tok = self.advance()
        self.expect_punct("(")
        args: list[Any] = []
        if not (self.peek().kind == "punct" and self.peek().value == ")"):
            args.append(self.expression())
            while self.peek().kind == "punct" and self.peek().value == ",":
                self.advance()
                args.append(self.expression())
        self.expect_punct(")")
        return Call(name=name_tok.value, args=args, line=name_tok.line, col=name_tok.col)

    def list_literal(self) -> ListExpr:
        open_tok = self.expect_punct("[")
        items: list[Any] = []
        if not (self.peek().kind == "punct" and self.peek().value == "]"):
            items.append(self.expression())
            while self.peek().kind == "punct" and self.peek().value == ",":
                self.advance()
                items.append(self.expression())
        self.expect_punct("]")
        return ListExpr(items=items, line=open_tok.line, col=open_tok.col)


def parse_cell(source: str) -> Program:
    """Parse cell source; raises CellSyntaxError with line/column."""
    return _Parser(tokenize(source)).program()
