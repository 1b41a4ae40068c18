"""Tokenizer for ``.tc`` sources and for interpreted super-instruction bodies."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import LexError, Loc
from ..values import ValueError_, unescape_string

KEYWORDS = frozenset({
    "treb_super", "treb_parout", "single", "parallel",
    "int", "float", "bool", "string", "list", "double",
    "if", "else", "while", "for", "return", "true", "false",
    "mytid", "lasttid",
})

PUNCTUATION = ("::", "==", "!=", "<=", ">=", "&&", "||",
               "(", ")", "{", "}", ";", ",", "=", "<", ">", "+", "-", "*", "/", "%", "!")

OPAQUE = {"#BEGINBLOCK": ("#ENDBLOCK", "raw"), "#BEGINSUPER": ("#ENDSUPER", "body")}


@dataclass(frozen=True)
class Token:
    kind: str  # kw, ident, int, float, string, punct, prefix, raw, body, eof
    lexeme: str
    line: int
    col: int
    text: str = ""  # decoded payload for string/raw/body tokens

    @property
    def loc(self) -> Loc:
        return Loc(self.line, self.col)

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.lexeme!r}, {self.line}:{self.col})"


_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_NUMBER = re.compile(r"(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)|(\d+)")
_PREFIX = re.compile(r"(local|starter)\.(?=[A-Za-z_])")


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, ending with an ``eof`` token.

    ``#BEGINBLOCK``/``#BEGINSUPER`` regions become one opaque token whose
    ``text`` is the region content, minus one newline directly after the
    opening directive.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def advance(text: str) -> None:
        nonlocal line, col
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)

    while i < n:
        ch = source[i]
        if ch in " \t\r\n\f\v":
            advance(ch)
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            advance(source[i:j])
            i = j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated comment", Loc(line, col))
            advance(source[i:j + 2])
            i = j + 2
            continue
        if ch == "#":
            for opener, (closer, kind) in OPAQUE.items():
                if source.startswith(opener, i):
                    start_loc = (line, col)
                    body_start = i + len(opener)
                    if source.startswith("\r\n", body_start):
                        body_start += 2
                    elif source.startswith("\n", body_start):
                        body_start += 1
                    end = source.find(closer, body_start)
                    if end < 0:
                        what = "block" if kind == "raw" else "super body"
                        raise LexError(f"unterminated {what}: missing {closer}", Loc(*start_loc))
                    lexeme = source[i:end + len(closer)]
                    tokens.append(Token(kind, lexeme, *start_loc, text=source[body_start:end]))
                    advance(lexeme)
                    i = end + len(closer)
                    break
            else:
                word = _IDENT.match(source, i + 1)
                directive = "#" + (word.group(0) if word else "")
                raise LexError(f"unexpected directive {directive!r}", Loc(line, col))
            continue
        if ch == '"':
            j = i + 1
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    break
                j += 2 if source[j] == "\\" else 1
            if j >= n or source[j] != '"':
                raise LexError("unterminated string literal", Loc(line, col))
            lexeme = source[i:j + 1]
            try:
                text = unescape_string(lexeme[1:-1])
            except ValueError_ as exc:
                raise LexError(str(exc), Loc(line, col)) from None
            tokens.append(Token("string", lexeme, line, col, text=text))
            advance(lexeme)
            i = j + 1
            continue
        m = _PREFIX.match(source, i)
        if m:
            tokens.append(Token("prefix", m.group(0), line, col))
            advance(m.group(0))
            i = m.end()
            continue
        if ch.isalpha() or ch == "_":
            m = _IDENT.match(source, i)
            word = m.group(0)
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            advance(word)
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            lexeme = m.group(0)
            if m.end() < n and (source[m.end()].isalnum() or source[m.end()] == "_"):
                raise LexError(f"malformed number {source[i:m.end() + 1]!r}", Loc(line, col))
            tokens.append(Token("float" if m.group(1) else "int", lexeme, line, col))
            advance(lexeme)
            i = m.end()
            continue
        for p in PUNCTUATION:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                advance(p)
                i += len(p)
                break
        else:
            raise LexError(f"unexpected character {ch!r}", Loc(line, col))
    tokens.append(Token("eof", "", line, col))
    return tokens


def detokenize(tokens: list[Token]) -> str:
    """Rebuild source text from tokens; opaque regions are reproduced exactly."""
    out = []
    for tok in tokens:
        if tok.kind == "eof":
            continue
        if tok.kind in ("raw", "body"):
            opener = "#BEGINBLOCK" if tok.kind == "raw" else "#BEGINSUPER"
            closer = OPAQUE[opener][0]
            out.append(f"{opener}\n{tok.text}{closer}\n")
        else:
            out.append(tok.lexeme if tok.kind == "prefix" else tok.lexeme + " ")
    return "".join(out)
