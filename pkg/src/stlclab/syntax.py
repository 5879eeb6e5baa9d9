"""Concrete syntax: tokenizer, recursive-descent parser, and printers.

The surface grammar:

    term : "lambda" term ":" type "." term
         | "[" term term "]"
         | identifier
    type : type "->" type
         | identifier

Whitespace never matters.  Parentheses are not part of the grammar --
they never appear in rule tables or CSTs -- but the parser honors them as
grouping so that left-nested arrow types survive a print/parse round trip;
paren-free arrow chains read right-associatively.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import Abs, App, ArrowType, BaseType, StlcError, Term, Type, TypingContext, Var

LAMBDA = "lambda"

_TOKEN_RE = re.compile(r"->|[:.\[\]()]|[A-Za-z0-9_]+|\S")
_IDENT_RE = re.compile(r"[A-Za-z0-9_]+\Z")


class ParseError(StlcError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group()
        if not (_IDENT_RE.match(tok) or tok in ("->", ":", ".", "[", "]", "(", ")")):
            raise ParseError(f"unexpected character {tok!r}", m.start())
        tokens.append(Token(tok, m.start()))
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token], length: int):
        self.tokens = tokens
        self.i = 0
        self.length = length

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.length)
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return tok


def parse_term(text: str, ctx: TypingContext) -> Term:
    """Parse the canonical textual form of a term.

    ``ctx`` supplies the closed base-type alphabet used to validate type
    annotations; variable scoping is checked later by type inference, not
    here.
    """
    cur = _Cursor(tokenize(text), len(text))
    term = _term(cur, ctx)
    trailing = cur.peek()
    if trailing is not None:
        raise ParseError(f"trailing input {trailing.text!r}", trailing.pos)
    return term


def parse_type(text: str, ctx: TypingContext) -> Type:
    cur = _Cursor(tokenize(text), len(text))
    ty = _type(cur, ctx)
    trailing = cur.peek()
    if trailing is not None:
        raise ParseError(f"trailing input {trailing.text!r}", trailing.pos)
    return ty


def _term(cur: _Cursor, ctx: TypingContext) -> Term:
    tok = cur.next()
    if tok.text == LAMBDA:
        binder = cur.next()
        if not _is_name(binder.text):
            raise ParseError(f"expected binder name, found {binder.text!r}", binder.pos)
        cur.expect(":")
        annot = _type(cur, ctx)
        cur.expect(".")
        body = _term(cur, ctx)
        return Abs(binder.text, annot, body)
    if tok.text == "[":
        fun = _term(cur, ctx)
        arg = _term(cur, ctx)
        cur.expect("]")
        return App(fun, arg)
    if tok.text == "(":
        inner = _term(cur, ctx)
        cur.expect(")")
        return inner
    if _is_name(tok.text):
        return Var(tok.text)
    raise ParseError(f"expected a term, found {tok.text!r}", tok.pos)


def _type(cur: _Cursor, ctx: TypingContext) -> Type:
    left = _type_atom(cur, ctx)
    tok = cur.peek()
    if tok is not None and tok.text == "->":
        cur.next()
        return ArrowType(left, _type(cur, ctx))
    return left


def _type_atom(cur: _Cursor, ctx: TypingContext) -> Type:
    tok = cur.next()
    if tok.text == "(":
        inner = _type(cur, ctx)
        cur.expect(")")
        return inner
    if _is_name(tok.text):
        if tok.text not in ctx.base_type_names():
            raise ParseError(f"unknown base type {tok.text!r}", tok.pos)
        return BaseType(tok.text)
    raise ParseError(f"expected a type, found {tok.text!r}", tok.pos)


def _is_name(text: str) -> bool:
    return bool(_IDENT_RE.match(text)) and text != LAMBDA


def print_type(ty: Type) -> str:
    """Canonical text of a type: right-associative arrows, a parenthesized
    left operand whenever it is itself an arrow."""
    if isinstance(ty, BaseType):
        return ty.name
    left = print_type(ty.left)
    if isinstance(ty.left, ArrowType):
        left = f"({left})"
    return f"{left} -> {print_type(ty.right)}"


def print_term(term: Term) -> str:
    """Canonical text of a term; ``parse_term`` inverts it exactly."""
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Abs):
        return f"{LAMBDA} {term.bound} : {print_type(term.annot)} . {print_term(term.body)}"
    return f"[{print_term(term.fun)} {print_term(term.arg)}]"
