"""Dynamically typed values that travel along graph edges.

Values are plain Python objects: ``int``, ``float``, ``bool``, ``str`` and
``list``.  ``bool`` is checked before ``int`` everywhere because Python
treats it as an ``int`` subclass.
"""

from __future__ import annotations

import math
from typing import Any

Value = Any

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1
MAX_LIST_DEPTH = 8

UNIT = None


class ValueError_(Exception):
    """Raised for ill-typed operations; the caller adds node/line context."""


def kind(v: Value) -> str:
    if v is None:
        return "unit"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "float"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    raise ValueError_(f"unsupported value of type {type(v).__name__}")


def wrap_int(n: int) -> int:
    n &= (1 << 64) - 1
    return n - (1 << 64) if n >= (1 << 63) else n


def list_depth(v: Value) -> int:
    if not isinstance(v, list):
        return 0
    return 1 + max((list_depth(x) for x in v), default=0)


def check_value(v: Value) -> Value:
    k = kind(v)
    if k == "int" and not INT_MIN <= v <= INT_MAX:
        raise ValueError_(f"integer {v} outside 64-bit range")
    if k == "list" and list_depth(v) > MAX_LIST_DEPTH:
        raise ValueError_(f"list nesting deeper than {MAX_LIST_DEPTH}")
    return v


# -- textual form ---------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r", "0": "\0"}


def escape_string(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\x{ord(ch):02x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def unescape_string(body: str) -> str:
    """Decode the inside of a C-style string literal (no surrounding quotes)."""
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(body):
            raise ValueError_("dangling backslash in string")
        nxt = body[i + 1]
        if nxt == "x":
            digits = body[i + 2:i + 4]
            if len(digits) != 2 or any(c not in "0123456789abcdefABCDEF" for c in digits):
                raise ValueError_("bad \\x escape in string")
            out.append(chr(int(digits, 16)))
            i += 4
        elif nxt in _UNESCAPES:
            out.append(_UNESCAPES[nxt])
            i += 2
        else:
            raise ValueError_(f"unknown escape \\{nxt}")
    return "".join(out)


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def format_value(v: Value) -> str:
    """Render ``v`` with its type sigil, e.g. ``i:5`` or ``s:"hi"``."""
    k = kind(v)
    if k == "unit":
        return "u:"
    if k == "bool":
        return "b:true" if v else "b:false"
    if k == "int":
        return f"i:{v}"
    if k == "float":
        return f"f:{format_float(v)}"
    if k == "string":
        return "s:" + escape_string(v)
    return "l:[" + ",".join(format_value(x) for x in v) + "]"


def parse_value(text: str) -> Value:
    v, rest = _parse_value(text, 0)
    if rest != len(text):
        raise ValueError_(f"trailing characters in value {text!r}")
    return v


def _parse_value(text: str, i: int) -> tuple[Value, int]:
    sigil = text[i:i + 2]
    i += 2
    if sigil == "u:":
        return None, i
    if sigil == "b:":
        for word, val in (("true", True), ("false", False)):
            if text.startswith(word, i):
                return val, i + len(word)
        raise ValueError_(f"bad boolean in {text!r}")
    if sigil in ("i:", "f:"):
        j = i
        while j < len(text) and text[j] not in ",]":
            j += 1
        token = text[i:j]
        try:
            return (int(token) if sigil == "i:" else float(token)), j
        except ValueError:
            raise ValueError_(f"bad number {token!r}") from None
    if sigil == "s:":
        if i >= len(text) or text[i] != '"':
            raise ValueError_("string value must be quoted")
        j = i + 1
        while j < len(text):
            if text[j] == "\\":
                j += 2
                continue
            if text[j] == '"':
                return unescape_string(text[i + 1:j]), j + 1
            j += 1
        raise ValueError_("unterminated string value")
    if sigil == "l:":
        if i >= len(text) or text[i] != "[":
            raise ValueError_("list value must start with '['")
        i += 1
        items: list[Value] = []
        if i < len(text) and text[i] == "]":
            return items, i + 1
        while True:
            item, i = _parse_value(text, i)
            items.append(item)
            if i < len(text) and text[i] == ",":
                i += 1
                continue
            if i < len(text) and text[i] == "]":
                return items, i + 1
            raise ValueError_("malformed list value")
    raise ValueError_(f"unknown value sigil {sigil!r}")


def same_value(a: Value, b: Value) -> bool:
    """Exact equality that distinguishes ``1`` / ``1.0`` / ``True``."""
    return format_value(a) == format_value(b)


# -- operators ------------------------------------------------------------

ARITH_OPS = ("add", "sub", "mul", "div", "mod")
COMPARE_OPS = ("lt", "le", "gt", "ge", "eq", "ne")
LOGIC_OPS = ("and", "or")
BINARY_OPS = ARITH_OPS + COMPARE_OPS + LOGIC_OPS


def _is_num(v: Value) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def binop(op: str, a: Value, b: Value) -> Value:
    """Apply a binary operator with C-like integer semantics.

    Int/Float mixes promote to Float; integer results wrap to 64 bits;
    integer division truncates toward zero.
    """
    if op in LOGIC_OPS:
        if not (isinstance(a, bool) and isinstance(b, bool)):
            raise ValueError_(f"'{op}' needs bool operands, got {kind(a)} and {kind(b)}")
        return (a and b) if op == "and" else (a or b)
    if op in ("eq", "ne"):
        if _is_num(a) and _is_num(b):
            res = a == b
        elif kind(a) != kind(b):
            raise ValueError_(f"cannot compare {kind(a)} with {kind(b)}")
        else:
            res = same_value(a, b) if isinstance(a, list) else a == b
        return res if op == "eq" else not res
    if op in COMPARE_OPS:
        if not ((_is_num(a) and _is_num(b)) or (isinstance(a, str) and isinstance(b, str))):
            raise ValueError_(f"cannot order {kind(a)} and {kind(b)}")
        if op == "lt":
            return a < b
        if op == "le":
            return a <= b
        if op == "gt":
            return a > b
        return a >= b
    if op == "add" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if not (_is_num(a) and _is_num(b)):
        raise ValueError_(f"'{op}' needs numeric operands, got {kind(a)} and {kind(b)}")
    if isinstance(a, int) and isinstance(b, int):
        if op == "add":
            return wrap_int(a + b)
        if op == "sub":
            return wrap_int(a - b)
        if op == "mul":
            return wrap_int(a * b)
        if b == 0:
            raise ValueError_("division by zero" if op == "div" else "modulo by zero")
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        if op == "div":
            return wrap_int(q)
        return wrap_int(a - q * b)
    x, y = float(a), float(b)
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if y == 0.0:
        raise ValueError_("division by zero" if op == "div" else "modulo by zero")
    if op == "div":
        return x / y
    return math.fmod(x, y)


def logical_not(v: Value) -> bool:
    if not isinstance(v, bool):
        raise ValueError_(f"'!' needs a bool operand, got {kind(v)}")
    return not v


DECLARED_TYPES = ("int", "float", "bool", "string", "list")


def coerce_to(declared: str, v: Value) -> Value:
    """Convert an output value to its declared type (Int widens to Float)."""
    k = kind(v)
    if declared == "float" and k == "int":
        return float(v)
    if k != declared:
        raise ValueError_(f"expected {declared}, got {k}")
    return v


def default_for(declared: str) -> Value:
    return {"int": 0, "float": 0.0, "bool": False, "string": "", "list": []}[declared]
