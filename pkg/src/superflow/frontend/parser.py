"""Recursive-descent parser for ``.tc`` programs and super-instruction bodies."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import GraphError, Loc, ParseError, SemanticError
from ..ir import AddressExpr
from .ast import (
    Assign, Binary, Block, Call, Decl, Expr, If, Literal, LocalDecl, Program, RawBlock,
    Return, Stmt, SuperDef, Unary, VarRef, While,
)
from .lexer import Token, tokenize

TYPE_NAMES = {"int": "int", "float": "float", "double": "float", "bool": "bool",
              "string": "string", "list": "list"}

# lowest to highest precedence, C ordering
BINARY_LEVELS: list[dict[str, str]] = [
    {"||": "or"},
    {"&&": "and"},
    {"==": "eq", "!=": "ne"},
    {"<": "lt", "<=": "le", ">": "gt", ">=": "ge"},
    {"+": "add", "-": "sub"},
    {"*": "mul", "/": "div", "%": "mod"},
]


@dataclass(frozen=True)
class ExprStmt:
    """A bare builtin call used for its side effect (bodies only)."""

    expr: Expr
    loc: Loc | None = field(default=None, compare=False)


class Parser:
    def __init__(self, tokens: list[Token], body_mode: bool = False):
        self.tokens = tokens
        self.pos = 0
        self.body_mode = body_mode

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, lexeme: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.lexeme == lexeme and t.kind in ((kind,) if kind else ("punct", "kw", "ident"))

    def next(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        return ParseError(message, (tok or self.tok).loc)

    def describe(self, t: Token) -> str:
        if t.kind == "eof":
            return "end of input"
        if t.kind in ("raw", "body"):
            return "#BEGINBLOCK region" if t.kind == "raw" else "#BEGINSUPER region"
        return repr(t.lexeme)

    def expect(self, lexeme: str, context: str = "") -> Token:
        if not self.at(lexeme):
            where = f" {context}" if context else ""
            raise self.error(f"expected '{lexeme}'{where}, found {self.describe(self.tok)}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.describe(self.tok)}")
        return self.next()

    def expect_int(self, what: str = "integer") -> int:
        if self.tok.kind != "int":
            raise self.error(f"expected {what}, found {self.describe(self.tok)}")
        return int(self.next().lexeme)

    # -- top level ------------------------------------------------------------

    def parse_program(self) -> Program:
        items = []
        n_supers = 0
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "raw":
                self.next()
                items.append(RawBlock(t.text, t.loc))
            elif t.kind == "body":
                raise self.error("#BEGINSUPER without a preceding treb_super header")
            elif self.at("treb_parout", "kw") or (t.kind == "kw" and t.lexeme in TYPE_NAMES):
                items.append(self.parse_decl())
            elif self.at("treb_super", "kw"):
                items.append(self.parse_super(n_supers))
                n_supers += 1
            else:
                items.append(self.parse_stmt())
        return Program(tuple(items))

    def parse_type(self) -> str:
        t = self.tok
        if t.kind != "kw" or t.lexeme not in TYPE_NAMES:
            raise self.error(f"expected a type (int, float, bool, string, list), found "
                             f"{self.describe(t)}")
        self.next()
        return TYPE_NAMES[t.lexeme]

    def parse_decl(self) -> Decl:
        start = self.tok
        parout = False
        if self.at("treb_parout", "kw"):
            self.next()
            parout = True
        typ = self.parse_type()
        name = self.expect_ident("variable name").lexeme
        self.expect(";", "after declaration")
        return Decl(typ, name, parout, start.loc)

    def parse_super(self, index: int) -> SuperDef:
        start = self.expect("treb_super")
        if not (self.at("single", "kw") or self.at("parallel", "kw")):
            raise self.error(f"expected 'single' or 'parallel', found {self.describe(self.tok)}")
        mode = self.next().lexeme
        name = f"super_{index}"
        explicit = False
        if self.at("name", "ident"):
            self.next()
            self.expect("(", "after 'name'")
            name = self.expect_ident("super-instruction name").lexeme
            self.expect(")", "after super-instruction name")
            explicit = True
        if not self.at("input", "ident"):
            raise self.error(f"expected 'input', found {self.describe(self.tok)}")
        self.next()
        self.expect("(", "after 'input'")
        inputs: list[VarRef] = []
        if not self.at(")"):
            inputs.append(self.parse_varref(in_input_list=True))
            while self.at(","):
                self.next()
                inputs.append(self.parse_varref(in_input_list=True))
        self.expect(")", "to close input list")
        if not self.at("output", "ident"):
            raise self.error(f"expected 'output', found {self.describe(self.tok)}")
        self.next()
        self.expect("(", "after 'output'")
        outputs: list[str] = []
        if not self.at(")"):
            outputs.append(self.expect_ident("output variable").lexeme)
            while self.at(","):
                self.next()
                outputs.append(self.expect_ident("output variable").lexeme)
        self.expect(")", "to close output list")
        if self.tok.kind != "body":
            raise self.error(f"expected #BEGINSUPER, found {self.describe(self.tok)}")
        body_tok = self.next()
        body_line = body_tok.line + (1 if body_tok.lexeme.startswith("#BEGINSUPER\n")
                                     or body_tok.lexeme.startswith("#BEGINSUPER\r\n") else 0)
        return SuperDef(mode, name, tuple(inputs), tuple(outputs), body_tok.text, explicit,
                        start.loc, Loc(body_line, 1))

    # -- addressing -------------------------------------------------------------

    def parse_varref(self, in_input_list: bool = False) -> VarRef:
        start = self.tok
        prefix = None
        if start.kind == "prefix":
            if not in_input_list:
                raise self.error(f"'{start.lexeme}' prefix is only allowed in super input lists")
            prefix = start.lexeme[:-1]
            self.next()
        name_tok = self.expect_ident("variable name")
        addr = None
        if self.at("::"):
            self.next()
            addr = self.parse_addr()
        try:
            if prefix == "local":
                if addr is None or addr.kind not in ("mytid+", "mytid-"):
                    raise SemanticError("local inputs need '::(mytid + N)' or '::(mytid - N)'",
                                        start.loc)
                addr = AddressExpr(addr.kind, addr.k, local=True)
            elif prefix == "starter":
                addr = AddressExpr(starter=addr or AddressExpr())
        except GraphError as exc:
            raise SemanticError(exc.message, start.loc) from None
        return VarRef(name_tok.lexeme, addr, prefix, start.loc)

    def parse_addr(self) -> AddressExpr:
        t = self.tok
        if t.kind == "int":
            return AddressExpr("const", int(self.next().lexeme))
        if self.at("*", "punct"):
            self.next()
            return AddressExpr("all")
        if self.at("mytid", "kw"):
            self.next()
            return AddressExpr("mytid")
        if self.at("lasttid", "kw"):
            self.next()
            return AddressExpr("lasttid")
        if self.at("(", "punct"):
            self.next()
            if not self.at("mytid", "kw"):
                raise self.error(f"expected 'mytid' in address, found {self.describe(self.tok)}")
            self.next()
            if not (self.at("+") or self.at("-")):
                raise self.error(f"expected '+' or '-' after mytid, found {self.describe(self.tok)}")
            sign = self.next().lexeme
            k = self.expect_int("offset")
            self.expect(")", "to close address")
            return AddressExpr("mytid+" if sign == "+" else "mytid-", k)
        if t.kind == "ident" and t.lexeme in ("lattid", "lastid", "lasstid"):
            raise self.error(f"unknown addressing keyword '{t.lexeme}'; did you mean 'lasttid'?")
        raise self.error("expected an instance address (NUMBER, *, mytid, lasttid, "
                         f"(mytid +/- NUMBER)), found {self.describe(t)}")

    # -- statements ---------------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        t = self.tok
        if self.at("if", "kw"):
            return self.parse_if()
        if self.at("while", "kw"):
            self.next()
            self.expect("(", "after 'while'")
            cond = self.parse_expr()
            self.expect(")", "after loop condition")
            return While(cond, self.parse_stmt(), t.loc)
        if self.at("for", "kw"):
            return self.parse_for()
        if self.at("return", "kw"):
            self.next()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";", "after return")
            return Return(value, t.loc)
        if self.at("{"):
            self.next()
            stmts = []
            while not self.at("}"):
                if self.tok.kind == "eof":
                    raise self.error("expected '}' to close block, found end of input")
                stmts.append(self.parse_block_item())
            self.next()
            return Block(tuple(stmts), t.loc)
        if self.body_mode and t.kind == "kw" and t.lexeme in TYPE_NAMES:
            return self.parse_local_decl()
        if t.kind == "ident" and self.peek().lexeme == "=" and self.peek().kind == "punct":
            self.next()
            self.next()
            value = self.parse_expr()
            self.expect(";", "after assignment")
            return Assign(t.lexeme, value, t.loc)
        if self.body_mode and t.kind == "ident" and self.peek().lexeme == "(":
            expr = self.parse_expr()
            self.expect(";", "after call")
            return ExprStmt(expr, t.loc)
        if t.kind == "ident":
            raise self.error(f"expected '=' after {t.lexeme!r}, found {self.describe(self.peek())}",
                             self.peek())
        raise self.error(f"expected a statement, found {self.describe(t)}")

    def parse_block_item(self) -> Stmt:
        t = self.tok
        if not self.body_mode and (t.kind in ("raw", "body") or self.at("treb_super", "kw")
                                   or self.at("treb_parout", "kw")
                                   or (t.kind == "kw" and t.lexeme in TYPE_NAMES)):
            raise self.error("declarations and super-instructions are only allowed at top level")
        return self.parse_stmt()

    def parse_local_decl(self) -> LocalDecl:
        t = self.tok
        typ = self.parse_type()
        name = self.expect_ident("variable name").lexeme
        init = None
        if self.at("="):
            self.next()
            init = self.parse_expr()
        self.expect(";", "after declaration")
        return LocalDecl(typ, name, init, t.loc)

    def parse_if(self) -> If:
        t = self.next()
        self.expect("(", "after 'if'")
        cond = self.parse_expr()
        self.expect(")", "after condition")
        then = self.parse_stmt()
        orelse = None
        if self.at("else", "kw"):
            self.next()
            orelse = self.parse_stmt()
        return If(cond, then, orelse, t.loc)

    def parse_for(self) -> Stmt:
        """``for (i = a; c; i = s) body`` is desugared into ``i = a; while (c) {body; i = s;}``."""
        t = self.next()
        self.expect("(", "after 'for'")
        init_var = self.expect_ident("loop variable")
        self.expect("=", "in for-loop initializer")
        init = self.parse_expr()
        self.expect(";", "after for-loop initializer")
        cond = self.parse_expr()
        self.expect(";", "after for-loop condition")
        step_var = self.expect_ident("loop variable")
        self.expect("=", "in for-loop step")
        step = self.parse_expr()
        self.expect(")", "to close for-loop header")
        body = self.parse_stmt()
        loop = While(cond, Block((body, Assign(step_var.lexeme, step, step_var.loc)), t.loc), t.loc)
        return Block((Assign(init_var.lexeme, init, init_var.loc), loop), t.loc)

    # -- expressions ------------------------------------------------------------

    def parse_expr(self, level: int = 0) -> Expr:
        if level == len(BINARY_LEVELS):
            return self.parse_unary()
        ops = BINARY_LEVELS[level]
        left = self.parse_expr(level + 1)
        while self.tok.kind == "punct" and self.tok.lexeme in ops:
            op_tok = self.next()
            right = self.parse_expr(level + 1)
            left = Binary(ops[op_tok.lexeme], left, right, op_tok.loc)
        return left

    def parse_unary(self) -> Expr:
        t = self.tok
        if self.at("!", "punct") or self.at("-", "punct"):
            self.next()
            operand = self.parse_unary()
            if t.lexeme == "-" and isinstance(operand, Literal) and type(operand.value) in (int, float):
                return Literal(-operand.value, t.loc)
            return Unary(t.lexeme, operand, t.loc)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.next()
            return Literal(int(t.lexeme), t.loc)
        if t.kind == "float":
            self.next()
            return Literal(float(t.lexeme), t.loc)
        if t.kind == "string":
            self.next()
            return Literal(t.text, t.loc)
        if self.at("true", "kw") or self.at("false", "kw"):
            self.next()
            return Literal(t.lexeme == "true", t.loc)
        if self.at("("):
            self.next()
            e = self.parse_expr()
            self.expect(")", "to close parenthesized expression")
            return e
        if t.kind == "ident" and self.peek().lexeme == "(" and self.peek().kind == "punct":
            if not self.body_mode:
                raise self.error(f"function call '{t.lexeme}(...)' is only allowed inside super bodies")
            self.next()
            self.next()
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.next()
                    args.append(self.parse_expr())
            self.expect(")", f"to close call to {t.lexeme}")
            return Call(t.lexeme, tuple(args), t.loc)
        if t.kind == "ident" or t.kind == "prefix":
            ref = self.parse_varref()
            if self.body_mode and ref.addr is not None:
                raise ParseError("'::' addressing is not available inside super bodies", ref.loc)
            return ref
        raise self.error(f"expected an expression, found {self.describe(t)}")


def check_program(prog: Program) -> None:
    """Semantic checks that need the whole program."""
    decls: dict[str, Decl] = {}
    for item in prog.items:
        if isinstance(item, Decl):
            if item.name in decls:
                raise SemanticError(f"variable '{item.name}' declared twice", item.loc)
            decls[item.name] = item
    names: dict[str, SuperDef] = {}
    parallel_outputs: set[str] = set()
    for sd in prog.supers:
        if sd.name in names:
            raise SemanticError(f"super-instruction name '{sd.name}' used twice", sd.loc)
        names[sd.name] = sd
        seen: set[str] = set()
        for ref in sd.inputs:
            if ref.name in seen:
                raise SemanticError(f"duplicate input '{ref.name}' in super '{sd.name}'", ref.loc)
            seen.add(ref.name)
            if ref.prefix == "local":
                if sd.mode != "parallel":
                    raise SemanticError("local inputs are only allowed on parallel supers", ref.loc)
                if ref.name not in sd.outputs:
                    raise SemanticError(f"local input '{ref.name}' must be an output of the same "
                                        "super-instruction", ref.loc)
        if len(set(sd.outputs)) != len(sd.outputs):
            raise SemanticError(f"duplicate output in super '{sd.name}'", sd.loc)
        if any(r.prefix == "starter" for r in sd.inputs) and not any(
                r.prefix == "local" for r in sd.inputs):
            raise SemanticError(f"starter input on super '{sd.name}' which has no local input",
                                sd.loc)
        if sd.mode == "parallel":
            parallel_outputs.update(sd.outputs)
    for d in decls.values():
        if d.is_parout and d.name not in parallel_outputs:
            raise SemanticError(f"treb_parout variable '{d.name}' is not an output of a parallel "
                                "super-instruction", d.loc)


def parse(tokens: list[Token]) -> Program:
    prog = Parser(tokens).parse_program()
    check_program(prog)
    return prog


def parse_source(source: str) -> Program:
    return parse(tokenize(source))


def parse_body(text: str) -> Block:
    """Parse an interpreted super-instruction body into a statement block."""
    p = Parser(tokenize(text), body_mode=True)
    stmts = []
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind in ("raw", "body"):
            raise p.error("nested #BEGINBLOCK/#BEGINSUPER inside a super body")
        if p.at("treb_super", "kw") or p.at("treb_parout", "kw"):
            raise p.error(f"'{t.lexeme}' is not allowed inside a super body")
        stmts.append(p.parse_stmt())
    return Block(tuple(stmts), Loc(1, 1))
