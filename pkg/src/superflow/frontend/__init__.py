"""Tokenizer, syntax tree and parser for the annotated C subset."""

from .ast import Program
from .lexer import Token, detokenize, tokenize
from .parser import parse, parse_body, parse_source

__all__ = ["Program", "Token", "detokenize", "parse", "parse_body", "parse_source", "tokenize"]
