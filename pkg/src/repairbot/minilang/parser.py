"""Recursive-descent parser for minilang.

The grammar is documented in docs/minilang.ebnf. Parse errors carry the
1-based line and column of the offending token.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .nodes import (
    Assert,
    Assign,
    Binary,
    BoolLit,
    Call,
    Expr,
    ExprStmt,
    FieldAccess,
    Function,
    Ident,
    If,
    IntLit,
    Let,
    NullLit,
    Program,
    RecordLit,
    Return,
    SourceFile,
    Span,
    Stmt,
    Unary,
    While,
    assign_stmt_ids,
)


class MiniSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int, path: str = "<src>"):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.path = path


KEYWORDS = {"fn", "let", "if", "else", "while", "return", "assert", "true", "false", "null"}

_TWO_CHAR = {"==", "!=", "<=", ">=", "&&", "||"}
_ONE_CHAR = set("{}(),;:.+-*/!<>=")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "kw", "op", "eof"
    text: str
    pos: int
    line: int
    col: int

    @property
    def end(self) -> int:
        return self.pos + len(self.text)


def tokenize(text: str, path: str = "<src>") -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "/" and text[i:i + 2] == "//":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], i, line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, i, line, col))
            col += j - i
            i = j
            continue
        pair = text[i:i + 2]
        if pair in _TWO_CHAR:
            tokens.append(Token("op", pair, i, line, col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            tokens.append(Token("op", c, i, line, col))
            i += 1
            col += 1
            continue
        raise MiniSyntaxError(f"unexpected character {c!r}", line, col, path)
    tokens.append(Token("eof", "", n, line, col))
    return tokens


class _Parser:
    def __init__(self, text: str, path: str):
        self.path = path
        self.tokens = tokenize(text, path)
        self.i = 0

    # -- token helpers --

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "kw")

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected identifier, found {tok.text or 'end of input'!r}", tok)
        return self.advance()

    def fail(self, message: str, tok: Token):
        raise MiniSyntaxError(message, tok.line, tok.col, self.path)

    def span(self, start_tok: Token, end_tok: Token) -> Span:
        return Span(start_tok.pos, end_tok.end, start_tok.line)

    # -- grammar --

    def parse_functions(self) -> list[Function]:
        functions = []
        while not self.peek().kind == "eof":
            functions.append(self.function())
        return functions

    def function(self) -> Function:
        start = self.expect("fn")
        name = self.expect_ident().text
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.expect_ident().text)
            while self.at(","):
                self.advance()
                params.append(self.expect_ident().text)
        self.expect(")")
        body, end = self.block()
        if len(set(params)) != len(params):
            self.fail(f"duplicate parameter in fn {name}", start)
        return Function(name, tuple(params), tuple(body), span=self.span(start, end))

    def block(self) -> tuple[list[Stmt], Token]:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("unbalanced brace: expected '}'", self.peek())
            stmts.append(self.statement())
        end = self.expect("}")
        return stmts, end

    def statement(self) -> Stmt:
        tok = self.peek()
        if self.at("let"):
            start = self.advance()
            name = self.expect_ident().text
            self.expect("=")
            value = self.expression()
            end = self.expect(";")
            return Let(name, value, span=self.span(start, end))
        if self.at("if"):
            start = self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then_body, end = self.block()
            else_body: list[Stmt] = []
            if self.at("else"):
                self.advance()
                else_body, end = self.block()
            return If(cond, tuple(then_body), tuple(else_body), span=self.span(start, end))
        if self.at("while"):
            start = self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            body, end = self.block()
            return While(cond, tuple(body), span=self.span(start, end))
        if self.at("return"):
            start = self.advance()
            value = None if self.at(";") else self.expression()
            end = self.expect(";")
            return Return(value, span=self.span(start, end))
        if self.at("assert"):
            start = self.advance()
            value = self.expression()
            end = self.expect(";")
            return Assert(value, span=self.span(start, end))
        # assignment (dotted path "=") or expression statement
        if tok.kind == "ident":
            path_len = self.assignment_lookahead()
            if path_len:
                start = self.advance()
                target = [start.text]
                while self.at("."):
                    self.advance()
                    target.append(self.expect_ident().text)
                self.expect("=")
                value = self.expression()
                end = self.expect(";")
                return Assign(tuple(target), value, span=self.span(start, end))
        start = tok
        value = self.expression()
        end = self.expect(";")
        return ExprStmt(value, span=self.span(start, end))

    def assignment_lookahead(self) -> bool:
        """True when the upcoming tokens are ``ident (. ident)* =`` (not ``==``)."""
        j = 0
        if self.peek(j).kind != "ident":
            return False
        j += 1
        while self.peek(j).text == "." and self.peek(j).kind == "op":
            if self.peek(j + 1).kind != "ident":
                return False
            j += 2
        return self.peek(j).kind == "op" and self.peek(j).text == "="

    def expression(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at("||"):
            op = self.advance()
            right = self.and_expr()
            left = Binary("||", left, right, span=Span(left.span.start, right.span.end, left.span.line))
        return left

    def and_expr(self) -> Expr:
        left = self.cmp_expr()
        while self.at("&&"):
            self.advance()
            right = self.cmp_expr()
            left = Binary("&&", left, right, span=Span(left.span.start, right.span.end, left.span.line))
        return left

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                self.advance()
                right = self.add_expr()
                return Binary(op, left, right, span=Span(left.span.start, right.span.end, left.span.line))
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            right = self.mul_expr()
            left = Binary(op, left, right, span=Span(left.span.start, right.span.end, left.span.line))
        return left

    def mul_expr(self) -> Expr:
        left = self.unary_expr()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            right = self.unary_expr()
            left = Binary(op, left, right, span=Span(left.span.start, right.span.end, left.span.line))
        return left

    def unary_expr(self) -> Expr:
        if self.at("!") or self.at("-"):
            op = self.advance()
            operand = self.unary_expr()
            return Unary(op.text, operand, span=Span(op.pos, operand.span.end, op.line))
        return self.postfix_expr()

    def postfix_expr(self) -> Expr:
        expr = self.primary_expr()
        while self.at("."):
            self.advance()
            name_tok = self.expect_ident()
            expr = FieldAccess(expr, name_tok.text, span=Span(expr.span.start, name_tok.end, expr.span.line))
        return expr

    def primary_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text), span=self.span(tok, tok))
        if self.at("true") or self.at("false"):
            self.advance()
            return BoolLit(tok.text == "true", span=self.span(tok, tok))
        if self.at("null"):
            self.advance()
            return NullLit(span=self.span(tok, tok))
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.expression())
                    while self.at(","):
                        self.advance()
                        args.append(self.expression())
                end = self.expect(")")
                return Call(tok.text, tuple(args), span=self.span(tok, end))
            return Ident(tok.text, span=self.span(tok, tok))
        if self.at("("):
            self.advance()
            expr = self.expression()
            self.expect(")")
            return expr
        if self.at("{"):
            start = self.advance()
            fields: list[tuple[str, Expr]] = []
            if not self.at("}"):
                fields.append(self.record_field())
                while self.at(","):
                    self.advance()
                    fields.append(self.record_field())
            end = self.expect("}")
            names = [name for name, _ in fields]
            if len(set(names)) != len(names):
                self.fail("duplicate record field", start)
            return RecordLit(tuple(fields), span=self.span(start, end))
        self.fail(f"expected expression, found {tok.text or 'end of input'!r}", tok)

    def record_field(self) -> tuple[str, Expr]:
        name = self.expect_ident().text
        self.expect(":")
        return name, self.expression()


def parse_project(files: Sequence[tuple[str, str]]) -> Program:
    """Parse a multi-file project into one Program with dense stmt_ids."""
    functions: list[Function] = []
    seen: dict[str, str] = {}
    for path, text in files:
        for fn in _Parser(text, path).parse_functions():
            if fn.name in seen:
                raise MiniSyntaxError(
                    f"function {fn.name!r} already defined in {seen[fn.name]}",
                    fn.span.line, 1, path,
                )
            seen[fn.name] = path
            fn.file_path = path
            functions.append(fn)
    assign_stmt_ids(functions)
    return Program(tuple(functions), tuple(SourceFile(p, t) for p, t in files))


def parse(source: str, path: str = "<src>") -> Program:
    return parse_project([(path, source)])
