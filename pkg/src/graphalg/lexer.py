"""Tokenizer for GraphAlg source text."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import LexError, Span


class Tok(enum.Enum):
    IDENT = "ident"
    INT_LIT = "intlit"
    FLOAT_LIT = "floatlit"
    KW_FUNC = "func"
    KW_FOR = "for"
    KW_IN = "in"
    KW_RETURN = "return"
    KW_TRUE = "true"
    KW_FALSE = "false"
    KW_BOOL = "bool"
    KW_INT = "int"
    KW_REAL = "real"
    KW_TROP = "trop"
    ASSIGN = "="
    PLUS_ASSIGN = "+="
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    EQEQ = "=="
    LPAREN = "("
    RPAREN = ")"
    LPAREN_DOT = "(."
    LBRACE = "{"
    RBRACE = "}"
    LBRACKET = "["
    RBRACKET = "]"
    LT = "<"
    GT = ">"
    COMMA = ","
    SEMI = ";"
    COLON = ":"
    ARROW = "->"
    DOTDOT = ".."
    TRANSPOSE = ".T"
    EOF = "<eof>"


KEYWORDS = {
    "func": Tok.KW_FUNC,
    "for": Tok.KW_FOR,
    "in": Tok.KW_IN,
    "return": Tok.KW_RETURN,
    "true": Tok.KW_TRUE,
    "false": Tok.KW_FALSE,
    "bool": Tok.KW_BOOL,
    "int": Tok.KW_INT,
    "real": Tok.KW_REAL,
    "trop": Tok.KW_TROP,
}


@dataclass(frozen=True)
class Token:
    kind: Tok
    text: str
    span: Span

    def __repr__(self) -> str:
        return f"[{self.kind.name} {self.text!r} @{self.span}]"


def tokenize(text: str, origin: str = "<inline>") -> list[Token]:
    """Produce the token stream for `text`; raises LexError with a position."""
    toks: list[Token] = []
    i = 0
    line, col = 1, 1
    n = len(text)

    def span() -> Span:
        return Span(line, col)

    def advance(k: int = 1):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance()
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                advance()
            continue
        start = span()
        two = text[i : i + 2]
        if two == "+=":
            toks.append(Token(Tok.PLUS_ASSIGN, "+=", start))
            advance(2)
            continue
        if two == "->":
            toks.append(Token(Tok.ARROW, "->", start))
            advance(2)
            continue
        if two == "==":
            toks.append(Token(Tok.EQEQ, "==", start))
            advance(2)
            continue
        if two == "(.":
            toks.append(Token(Tok.LPAREN_DOT, "(.", start))
            advance(2)
            continue
        if two == "..":
            toks.append(Token(Tok.DOTDOT, "..", start))
            advance(2)
            continue
        if two == ".T":
            toks.append(Token(Tok.TRANSPOSE, ".T", start))
            advance(2)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            # a '.' starts a fraction only if not '..' and followed by a digit
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            toks.append(Token(Tok.FLOAT_LIT if is_float else Tok.INT_LIT, lit, start))
            advance(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = KEYWORDS.get(word, Tok.IDENT)
            toks.append(Token(kind, word, start))
            advance(j - i)
            continue
        single = {
            "=": Tok.ASSIGN,
            "+": Tok.PLUS,
            "-": Tok.MINUS,
            "*": Tok.STAR,
            "/": Tok.SLASH,
            "(": Tok.LPAREN,
            ")": Tok.RPAREN,
            "{": Tok.LBRACE,
            "}": Tok.RBRACE,
            "[": Tok.LBRACKET,
            "]": Tok.RBRACKET,
            "<": Tok.LT,
            ">": Tok.GT,
            ",": Tok.COMMA,
            ";": Tok.SEMI,
            ":": Tok.COLON,
        }
        if c in single:
            toks.append(Token(single[c], c, start))
            advance()
            continue
        raise LexError(f"illegal character {c!r} in {origin}", start)
    toks.append(Token(Tok.EOF, "", span()))
    return toks
