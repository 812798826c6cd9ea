"""Lexer and recursive-descent parser for ``.pform`` sources.

Grammar (informal)::

    spec       := (entry | struct)*
    entry      := 'entry' IDENT ';'
    struct     := 'struct' IDENT '{' member* '}' ';'?
    member     := type IDENT ('[' length ']')* ';'      -- field
                | expr CMP expr ';'                       -- constraint
    type       := base ('[' length ']')*
    base       := UINT8 | UINT16 | UINT32 | UINT64 | 'BIT' '(' NUM ')'
                | IDENT | 'switch' '(' IDENT ')' '{' arm+ '}'
    arm        := 'case' NUM ':' type ';' | 'default' ':' type ';'
    length     := expr ('bytes' | 'elements')?
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    PRIMITIVE_WIDTHS,
    Array,
    BinOp,
    Case,
    Constraint,
    Expr,
    FieldDecl,
    FormatSpec,
    Num,
    Prim,
    Ref,
    StructDef,
    StructRef,
    TypeExpr,
    default_unit,
)
from .diagnostics import Diagnostic, FormatError, error

KEYWORDS = {"struct", "entry", "switch", "case", "default", "bytes", "elements", "BIT", *PRIMITIVE_WIDTHS}

_CMP_ALIASES = {"=": "==", "≥": ">=", "≤": "<=", "≠": "!="}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|\#[^\n]*)
  | (?P<block>/\*.*?\*/)
  | (?P<num>0[xX][0-9A-Fa-f]+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<cmp>>=|<=|==|!=|≥|≤|≠|>|<|=)
  | (?P<arith>[+\-*/])
  | (?P<punct>[{}()\[\];:,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | kw | num | cmp | arith | punct | eof
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise FormatError([error(f"unexpected character {text[pos]!r}", line, col, "lexical")])
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "block":
            line += value.count("\n")
            if "\n" in value:
                line_start = pos + value.rindex("\n") + 1
        elif kind in ("ws", "comment"):
            pass
        elif kind == "ident":
            tokens.append(Token("kw" if value in KEYWORDS else "ident", value, line, col))
        elif kind == "cmp":
            tokens.append(Token("cmp", _CMP_ALIASES.get(value, value), line, col))
        else:
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def fail(self, message: str, tok: Token | None = None, code: str = "syntax"):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.value)
        raise FormatError([error(f"{message}, found {found}", tok.line, tok.col, code)])

    def at(self, kind: str, value: str | None = None) -> bool:
        return self.tok.kind == kind and (value is None or self.tok.value == value)

    def expect(self, kind: str, value: str | None = None) -> Token:
        if not self.at(kind, value):
            self.fail(f"expected {value!r}" if value else f"expected {kind}")
        tok = self.tok
        self.pos += 1
        return tok

    def accept(self, kind: str, value: str | None = None) -> Token | None:
        if self.at(kind, value):
            tok = self.tok
            self.pos += 1
            return tok
        return None

    # -- top level ---------------------------------------------------------

    def parse(self) -> FormatSpec:
        structs: list[StructDef] = []
        entries: list[Token] = []
        while not self.at("eof"):
            if self.accept("kw", "entry"):
                entries.append(self.expect("ident"))
                self.expect("punct", ";")
            elif self.at("kw", "struct"):
                structs.append(self.parse_struct())
            else:
                self.fail("expected 'struct' or 'entry'")
        if not structs:
            raise FormatError([error("no struct defined", self.tok.line, self.tok.col)])
        if len(entries) > 1:
            tok = entries[1]
            raise FormatError([error("entry declared more than once", tok.line, tok.col, "duplicate-entry")])
        entry = entries[0].value if entries else structs[0].name
        return FormatSpec(tuple(structs), entry)

    def parse_struct(self) -> StructDef:
        kw = self.expect("kw", "struct")
        name = self.expect("ident").value
        self.expect("punct", "{")
        fields: list[FieldDecl] = []
        constraints: list[Constraint] = []
        while not self.at("punct", "}"):
            if self.at("eof"):
                self.fail("expected '}' to close struct " + name)
            if self._starts_field():
                fields.append(self.parse_field())
            else:
                constraints.append(self.parse_constraint())
        self.expect("punct", "}")
        self.accept("punct", ";")
        return StructDef(name, tuple(fields), tuple(constraints), kw.line, kw.col)

    def _starts_field(self) -> bool:
        tok = self.tok
        if tok.kind == "kw" and (tok.value in PRIMITIVE_WIDTHS or tok.value in ("BIT", "switch")):
            return True
        if tok.kind == "ident":
            nxt = self.peek()
            return nxt.kind == "ident" or (nxt.kind == "punct" and nxt.value == "[")
        return False

    def parse_field(self) -> FieldDecl:
        start = self.tok
        ftype = self.parse_type()
        name = self.expect("ident")
        lengths = []
        while self.accept("punct", "["):
            lengths.append(self.parse_length())
            self.expect("punct", "]")
        for length, unit in reversed(lengths):
            ftype = Array(ftype, length, unit or default_unit(ftype))
        self.expect("punct", ";")
        return FieldDecl(name.value, ftype, start.line, start.col)

    def parse_constraint(self) -> Constraint:
        start = self.tok
        lhs = self.parse_expr()
        if not self.at("cmp"):
            self.fail("expected comparison operator")
        op = self.expect("cmp").value
        rhs = self.parse_expr()
        self.expect("punct", ";")
        return Constraint(lhs, op, rhs, start.line, start.col)

    # -- types -------------------------------------------------------------

    def parse_type(self) -> TypeExpr:
        tok = self.tok
        if tok.kind == "kw" and tok.value in PRIMITIVE_WIDTHS:
            self.pos += 1
            base: TypeExpr = Prim.named(tok.value)
        elif self.accept("kw", "BIT"):
            self.expect("punct", "(")
            width = self.expect("num")
            self.expect("punct", ")")
            base = Prim.bit(int(width.value, 0))
        elif self.at("kw", "switch"):
            base = self.parse_case()
        elif tok.kind == "ident":
            self.pos += 1
            base = StructRef(tok.value, tok.line, tok.col)
        else:
            self.fail("expected a type")
        while self.accept("punct", "["):
            length, unit = self.parse_length()
            self.expect("punct", "]")
            base = Array(base, length, unit or default_unit(base))
        return base

    def parse_length(self) -> tuple[Expr, str | None]:
        expr = self.parse_expr()
        unit = None
        if self.at("kw", "bytes") or self.at("kw", "elements"):
            unit = self.tok.value
            self.pos += 1
        return expr, unit

    def parse_case(self) -> Case:
        kw = self.expect("kw", "switch")
        self.expect("punct", "(")
        control = self.expect("ident").value
        self.expect("punct", ")")
        self.expect("punct", "{")
        arms: list[tuple[int, TypeExpr]] = []
        seen: set[int] = set()
        default = None
        while not self.accept("punct", "}"):
            if self.at("kw", "case"):
                self.pos += 1
                const_tok = self.expect("num")
                const = int(const_tok.value, 0)
                if const in seen:
                    raise FormatError(
                        [error(f"duplicate case arm {const}", const_tok.line, const_tok.col, "duplicate-arm")]
                    )
                seen.add(const)
                self.expect("punct", ":")
                arms.append((const, self.parse_type()))
                self.expect("punct", ";")
            elif self.at("kw", "default"):
                tok = self.tok
                self.pos += 1
                if default is not None:
                    raise FormatError([error("duplicate default arm", tok.line, tok.col, "duplicate-arm")])
                self.expect("punct", ":")
                default = self.parse_type()
                self.expect("punct", ";")
            else:
                self.fail("expected 'case', 'default' or '}'")
        if not arms:
            raise FormatError([error("switch needs at least one case arm", kw.line, kw.col)])
        return Case(control, tuple(arms), default, kw.line, kw.col)

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.at("arith", "+") or self.at("arith", "-"):
            op = self.expect("arith").value
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.at("arith", "*") or self.at("arith", "/"):
            op = self.expect("arith").value
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            is_hex = tok.value.lower().startswith("0x")
            return Num(int(tok.value, 0), is_hex)
        if tok.kind == "ident":
            self.pos += 1
            return Ref(tok.value, tok.line, tok.col)
        if self.accept("punct", "("):
            node = self.parse_expr()
            self.expect("punct", ")")
            return node
        self.fail("expected a number, identifier or '('")


def parse_source(text: str) -> FormatSpec:
    """Parse without name resolution.  Raises :class:`FormatError`."""
    return _Parser(text).parse()


def parse_constraint_text(text: str) -> Constraint:
    """Parse a single constraint such as ``Length >= 12`` (trailing ``;`` optional)."""
    text = text.strip()
    if not text.endswith(";"):
        text += ";"
    parser = _Parser(text)
    constraint = parser.parse_constraint()
    if not parser.at("eof"):
        parser.fail("expected end of constraint")
    return constraint


def diagnostics_for_parse(text: str) -> tuple[FormatSpec | None, list[Diagnostic]]:
    try:
        return parse_source(text), []
    except FormatError as exc:
        return None, exc.diagnostics
