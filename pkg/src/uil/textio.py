"""Text format for programs: parser and canonical printer.

The concrete syntax (documented in docs/grammar.md) looks like:

    import "primitives";

    component expr(a: 32, b: 32) -> (out: 32) {
      cells {
        add = std_add(32);
      }
      wires {
        static<1> group do_add {
          add.left = a;
          add.right = b;
          add.go = 1'd1;
        }
        out = add.out;
      }
      control {
        do_add;
      }
    }

Programs round-trip: parse(print_program(p)) equals p for any valid p, and
printing is deterministic. Files use the .uil extension. The component
named "main" is the entry point; without one, the last component is.
"""

from __future__ import annotations

import re

from .ir import (
    CELL,
    HOLE,
    IO,
    Assignment,
    Atom,
    Cell,
    Component,
    Const,
    ControlNode,
    Diagnostic,
    Empty,
    Enable,
    GAnd,
    GCmp,
    GExpr,
    GNot,
    GOr,
    GPort,
    GTRUE,
    GTrue,
    Group,
    Guard,
    If,
    Invoke,
    Par,
    PortDecl,
    PortRef,
    Program,
    Repeat,
    Seq,
    SourceSpan,
    StaticEnable,
    StaticGroup,
    StaticIf,
    StaticInvoke,
    StaticPar,
    StaticRepeat,
    StaticSeq,
    While,
    children_of,
    gand,
)
from .primitives import BUILTINS


class ParseError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diagnostic = diag


# ============================================================
# Lexer
# ============================================================

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<const>\d+'d\d+)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"]*")
  | (?P<op>->|==|!=|<=|>=|[{}()\[\]<>=;:,.?!&|%@])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "import",
    "component",
    "cells",
    "wires",
    "control",
    "group",
    "static",
    "seq",
    "par",
    "if",
    "else",
    "while",
    "repeat",
    "invoke",
}


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def _lex(text: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                Diagnostic(
                    f"unexpected character {text[pos]!r}",
                    SourceSpan(filename, line, col, line, col + 1),
                )
            )
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and tok in KEYWORDS:
                kind = tok
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ============================================================
# Parser
# ============================================================


class _Parser:
    def __init__(self, text: str, filename: str):
        self.toks = _lex(text, filename)
        self.i = 0
        self.filename = filename

    # -- token helpers --

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            self.fail(f"expected {want!r}, found {t.text!r}", t)
        return self.next()

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.filename, tok.line, tok.col, tok.line, tok.col + len(tok.text))

    def fail(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(Diagnostic(msg, self.span(tok)))

    # -- grammar --

    def parse_program(self) -> Program:
        prog = Program(externs=[], components=[], entry="")
        while self.accept("import"):
            path = self.expect("string").text.strip('"')
            self.expect("op", ";")
            if path != "primitives":
                self.fail(f'unknown import "{path}"; only "primitives" is available')
            if not prog.externs:
                prog.externs = list(BUILTINS)
        while not self.at("eof"):
            prog.components.append(self.parse_component())
        names = [c.name for c in prog.components]
        prog.entry = "main" if "main" in names else (names[-1] if names else "main")
        return prog

    def parse_attrs(self) -> dict[str, int | None]:
        attrs: dict[str, int | None] = {}
        while self.accept("op", "@"):
            tok = self.peek()
            if tok.kind != "ident" and tok.kind not in KEYWORDS:
                self.fail("expected an attribute name", tok)
            name = self.next().text
            value: int | None = None
            if self.accept("op", "("):
                value = int(self.expect("num").text)
                self.expect("op", ")")
            attrs[name] = value
        return attrs

    def parse_component(self) -> Component:
        attrs = self.parse_attrs()
        declared: int | None = None
        start = self.peek()
        if self.at("static"):
            self.next()
            self.expect("op", "<")
            declared = int(self.expect("num").text)
            self.expect("op", ">")
        self.expect("component")
        name = self.expect("ident").text
        self.expect("op", "(")
        inputs = self.parse_port_decls()
        self.expect("op", ")")
        self.expect("op", "->")
        self.expect("op", "(")
        outputs = self.parse_port_decls()
        self.expect("op", ")")
        self.expect("op", "{")
        comp = Component(
            name=name,
            inputs=inputs,
            outputs=outputs,
            attrs=attrs,
            declared_latency=declared,
            span=self.span(start),
        )
        self.expect("cells")
        self.expect("op", "{")
        while not self.accept("op", "}"):
            comp.cells.append(self.parse_cell())
        self.expect("wires")
        self.expect("op", "{")
        while not self.accept("op", "}"):
            self.parse_wire_item(comp)
        self.expect("control")
        self.expect("op", "{")
        stmts = []
        while not self.accept("op", "}"):
            stmts.append(self.parse_stmt())
        comp.control = _implicit_block(stmts, static=False)
        self.expect("op", "}")
        _resolve_enables(comp)
        return comp

    def parse_port_decls(self) -> list[PortDecl]:
        decls: list[PortDecl] = []
        while self.at("ident"):
            pname = self.next().text
            self.expect("op", ":")
            width = int(self.expect("num").text)
            decls.append(PortDecl(pname, width))
            if not self.accept("op", ","):
                break
        return decls

    def parse_cell(self) -> Cell:
        attrs = self.parse_attrs()
        start = self.peek()
        name = self.expect("ident").text
        self.expect("op", "=")
        proto = self.expect("ident").text
        self.expect("op", "(")
        args: list[int] = []
        while self.at("num"):
            args.append(int(self.next().text))
            if not self.accept("op", ","):
                break
        self.expect("op", ")")
        self.expect("op", ";")
        return Cell(name, proto, args, attrs, span=self.span(start))

    def parse_wire_item(self, comp: Component) -> None:
        attrs = self.parse_attrs()
        start = self.peek()
        if self.at("static"):
            self.next()
            self.expect("op", "<")
            latency = int(self.expect("num").text)
            self.expect("op", ">")
            self.expect("group")
            name = self.expect("ident").text
            self.expect("op", "{")
            assigns = []
            while not self.accept("op", "}"):
                assigns.append(self.parse_assign())
            comp.static_groups.append(
                StaticGroup(name, latency, assigns, attrs, span=self.span(start))
            )
        elif self.at("group"):
            self.next()
            name = self.expect("ident").text
            self.expect("op", "{")
            assigns = []
            while not self.accept("op", "}"):
                assigns.append(self.parse_assign())
            comp.groups.append(Group(name, assigns, attrs, span=self.span(start)))
        else:
            if attrs:
                self.fail("attributes are not allowed on continuous assignments", start)
            comp.continuous.append(self.parse_assign())

    def parse_assign(self) -> Assignment:
        start = self.peek()
        dst = self.parse_port_ref()
        self.expect("op", "=")
        expr = self.parse_or()
        if self.accept("op", "?"):
            guard = self.to_guard(expr, start)
            src = self.parse_atom()
        else:
            guard = Guard()
            src = self.to_atom(expr, start)
        self.expect("op", ";")
        return Assignment(dst, src, guard, span=self.span(start))

    def parse_port_ref(self) -> PortRef:
        name = self.expect("ident").text
        if self.accept("op", "."):
            port = self.expect("ident").text
            return PortRef(name, port, CELL)
        if self.accept("op", "["):
            port = self.expect("ident").text
            self.expect("op", "]")
            return PortRef(name, port, HOLE)
        return PortRef("", name, IO)

    def parse_atom(self) -> Atom:
        if self.at("const"):
            return self.parse_const()
        return self.parse_port_ref()

    def parse_const(self) -> Const:
        t = self.expect("const")
        width, value = t.text.split("'d")
        return Const(int(width), int(value))

    # Guard expressions. We parse a small expression language in which the
    # leaves may be ports, constants, timing intervals, or comparisons, then
    # convert to either a Guard or a bare Atom depending on whether a `?`
    # follows. Timing intervals must be top-level conjuncts.

    def parse_or(self):
        terms = [self.parse_and()]
        while self.accept("op", "|"):
            terms.append(self.parse_and())
        return terms[0] if len(terms) == 1 else ("or", terms)

    def parse_and(self):
        terms = [self.parse_unary()]
        while self.accept("op", "&"):
            terms.append(self.parse_unary())
        return terms[0] if len(terms) == 1 else ("and", terms)

    def parse_unary(self):
        if self.accept("op", "!"):
            return ("not", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        if self.accept("op", "%"):
            if self.accept("op", "["):
                lo = int(self.expect("num").text)
                self.expect("op", ":")
                hi = int(self.expect("num").text)
                self.expect("op", "]")
                return ("interval", lo, hi)
            k = int(self.expect("num").text)
            return ("interval", k, k + 1)
        if self.accept("op", "("):
            inner = self.parse_or()
            self.expect("op", ")")
            return self.maybe_cmp(inner)
        if self.at("const"):
            return self.maybe_cmp(("atom", self.parse_const()))
        ref = self.parse_port_ref()
        return self.maybe_cmp(("atom", ref))

    def maybe_cmp(self, lhs):
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at("op", op):
                self.next()
                rhs = self.parse_primary_operand()
                return ("cmp", op, lhs, rhs)
        return lhs

    def parse_primary_operand(self):
        if self.at("const"):
            return ("atom", self.parse_const())
        return ("atom", self.parse_port_ref())

    def to_atom(self, expr, tok: Token) -> Atom:
        if isinstance(expr, tuple) and expr[0] == "atom":
            return expr[1]
        self.fail("expected a port or constant on the right-hand side", tok)

    def to_guard(self, expr, tok: Token) -> Guard:
        interval: tuple[int, int] | None = None
        conjuncts = expr[1] if isinstance(expr, tuple) and expr[0] == "and" else [expr]
        kept = []
        for c in conjuncts:
            if isinstance(c, tuple) and c[0] == "interval":
                lo, hi = c[1], c[2]
                if interval is None:
                    interval = (lo, hi)
                else:
                    interval = (max(interval[0], lo), min(interval[1], hi))
            else:
                kept.append(self.to_gexpr(c, tok))
        return Guard(gand(*kept), interval)

    def to_gexpr(self, expr, tok: Token) -> GExpr:
        if isinstance(expr, tuple):
            tag = expr[0]
            if tag == "atom":
                atom = expr[1]
                if isinstance(atom, Const):
                    self.fail("a bare constant cannot be used as a guard", tok)
                return GPort(atom)
            if tag == "cmp":
                _, op, lhs, rhs = expr
                return GCmp(op, self.cmp_operand(lhs, tok), self.cmp_operand(rhs, tok))
            if tag == "not":
                return GNot(self.to_gexpr(expr[1], tok))
            if tag == "and":
                return gand(*[self.to_gexpr(e, tok) for e in expr[1]])
            if tag == "or":
                return GOr(tuple(self.to_gexpr(e, tok) for e in expr[1]))
            if tag == "interval":
                self.fail("timing guards must be top-level conjuncts", tok)
        self.fail("malformed guard expression", tok)

    def cmp_operand(self, expr, tok: Token) -> Atom:
        if isinstance(expr, tuple) and expr[0] == "atom":
            return expr[1]
        self.fail("comparison operands must be ports or constants", tok)

    # -- control --

    def parse_stmt(self) -> ControlNode:
        attrs = self.parse_attrs()
        start = self.peek()
        node = self._parse_stmt_inner()
        node.attrs.update(attrs)
        node.span = self.span(start)
        return node

    def _parse_stmt_inner(self) -> ControlNode:
        if self.at("static"):
            self.next()
            if self.at("seq"):
                self.next()
                return StaticSeq(self.parse_block_list())
            if self.at("par"):
                self.next()
                return StaticPar(self.parse_block_list())
            if self.at("if"):
                self.next()
                cond = self.parse_port_ref()
                tru = self.parse_block(static=True)
                fls: ControlNode = Empty()
                if self.accept("else"):
                    fls = self.parse_block(static=True)
                return StaticIf(cond, tru, fls)
            if self.at("repeat"):
                self.next()
                count = int(self.expect("num").text)
                return StaticRepeat(count, self.parse_block(static=True))
            if self.at("invoke"):
                self.next()
                cell, bindings = self.parse_invoke_tail()
                return StaticInvoke(cell, bindings)
            self.fail("expected a control operator after 'static'")
        if self.at("seq"):
            self.next()
            return Seq(self.parse_block_list())
        if self.at("par"):
            self.next()
            return Par(self.parse_block_list())
        if self.at("if"):
            self.next()
            cond = self.parse_port_ref()
            tru = self.parse_block(static=False)
            fls: ControlNode = Empty()
            if self.accept("else"):
                fls = self.parse_block(static=False)
            return If(cond, tru, fls)
        if self.at("while"):
            self.next()
            cond = self.parse_port_ref()
            return While(cond, self.parse_block(static=False))
        if self.at("repeat"):
            self.next()
            count = int(self.expect("num").text)
            return Repeat(count, self.parse_block(static=False))
        if self.at("invoke"):
            self.next()
            cell, bindings = self.parse_invoke_tail()
            return Invoke(cell, bindings)
        name = self.expect("ident").text
        self.expect("op", ";")
        return Enable(name)

    def parse_invoke_tail(self) -> tuple[str, list[tuple[str, Atom]]]:
        cell = self.expect("ident").text
        self.expect("op", "(")
        bindings: list[tuple[str, Atom]] = []
        while self.at("ident"):
            port = self.next().text
            self.expect("op", "=")
            bindings.append((port, self.parse_atom()))
            if not self.accept("op", ","):
                break
        self.expect("op", ")")
        self.expect("op", ";")
        return cell, bindings

    def parse_block_list(self) -> list[ControlNode]:
        self.expect("op", "{")
        stmts = []
        while not self.accept("op", "}"):
            stmts.append(self.parse_stmt())
        return stmts

    def parse_block(self, static: bool) -> ControlNode:
        return _implicit_block(self.parse_block_list(), static)


def _implicit_block(stmts: list[ControlNode], static: bool) -> ControlNode:
    if not stmts:
        return Empty()
    if len(stmts) == 1:
        return stmts[0]
    return StaticSeq(stmts) if static else Seq(stmts)


def _resolve_enables(comp: Component) -> None:
    """Rewrite Enable nodes that name static groups into StaticEnable."""
    static_names = set(comp.static_group_map())

    def fix(node: ControlNode) -> ControlNode:
        if isinstance(node, Enable) and node.group in static_names:
            return StaticEnable(node.group, attrs=node.attrs, span=node.span)
        if isinstance(node, (Seq, Par, StaticSeq, StaticPar)):
            node.children = [fix(c) for c in node.children]
        elif isinstance(node, (If, StaticIf)):
            node.tru = fix(node.tru)
            node.fls = fix(node.fls)
        elif isinstance(node, While):
            node.body = fix(node.body)
        elif isinstance(node, (Repeat, StaticRepeat)):
            node.body = fix(node.body)
        return node

    comp.control = fix(comp.control)


def parse(text: str, filename: str = "<string>") -> Program:
    """Parse program text; raises ParseError with a located diagnostic."""
    return _Parser(text, filename).parse_program()


# ============================================================
# Printer
# ============================================================


def _fmt_attrs(attrs: dict[str, int | None]) -> str:
    parts = []
    for k, v in attrs.items():
        parts.append(f"@{k}" if v is None else f"@{k}({v})")
    return ("".join(f"{p} " for p in parts)) if parts else ""


def _fmt_atom(a: Atom) -> str:
    return str(a)


def _fmt_gexpr(e: GExpr, parent: str = "") -> str:
    if isinstance(e, GTrue):
        return "1'd1 == 1'd1"  # never printed by canonical output
    if isinstance(e, GPort):
        return str(e.ref)
    if isinstance(e, GCmp):
        return f"({_fmt_atom(e.lhs)} {e.op} {_fmt_atom(e.rhs)})"
    if isinstance(e, GNot):
        return f"!{_fmt_gexpr(e.sub, 'not')}"
    if isinstance(e, GAnd):
        body = " & ".join(_fmt_gexpr(s, "and") for s in e.subs)
        return f"({body})" if parent in ("not",) else body
    if isinstance(e, GOr):
        body = " | ".join(_fmt_gexpr(s, "or") for s in e.subs)
        return body if parent == "" else f"({body})"
    raise TypeError(e)


def _fmt_guard(g: Guard) -> str:
    parts = []
    if g.interval is not None:
        lo, hi = g.interval
        parts.append(f"%[{lo}:{hi}]")
    if not isinstance(g.expr, GTrue):
        s = _fmt_gexpr(g.expr)
        if parts and isinstance(g.expr, GOr):
            s = f"({s})"
        parts.append(s)
    return " & ".join(parts)


def _fmt_assign(a: Assignment, indent: str) -> str:
    g = _fmt_guard(a.guard)
    rhs = f"{g} ? {_fmt_atom(a.src)}" if g else _fmt_atom(a.src)
    return f"{indent}{a.dst} = {rhs};"


def _fmt_control(node: ControlNode, indent: str, lines: list[str]) -> None:
    pre = _fmt_attrs(node.attrs)
    if isinstance(node, Empty):
        return
    if isinstance(node, (Enable, StaticEnable)):
        lines.append(f"{indent}{pre}{node.group};")
        return
    if isinstance(node, (Invoke, StaticInvoke)):
        kw = "static invoke" if isinstance(node, StaticInvoke) else "invoke"
        args = ", ".join(f"{p} = {_fmt_atom(a)}" for p, a in node.bindings)
        lines.append(f"{indent}{pre}{kw} {node.cell}({args});")
        return
    if isinstance(node, (Seq, Par, StaticSeq, StaticPar)):
        kw = {Seq: "seq", Par: "par", StaticSeq: "static seq", StaticPar: "static par"}[type(node)]
        lines.append(f"{indent}{pre}{kw} {{")
        for c in node.children:
            _fmt_control(c, indent + "  ", lines)
        lines.append(f"{indent}}}")
        return
    if isinstance(node, (If, StaticIf)):
        kw = "static if" if isinstance(node, StaticIf) else "if"
        lines.append(f"{indent}{pre}{kw} {node.cond} {{")
        _fmt_control(node.tru, indent + "  ", lines)
        if isinstance(node.fls, Empty):
            lines.append(f"{indent}}}")
        else:
            lines.append(f"{indent}}} else {{")
            _fmt_control(node.fls, indent + "  ", lines)
            lines.append(f"{indent}}}")
        return
    if isinstance(node, While):
        lines.append(f"{indent}{pre}while {node.cond} {{")
        _fmt_control(node.body, indent + "  ", lines)
        lines.append(f"{indent}}}")
        return
    if isinstance(node, (Repeat, StaticRepeat)):
        kw = "static repeat" if isinstance(node, StaticRepeat) else "repeat"
        lines.append(f"{indent}{pre}{kw} {node.count} {{")
        _fmt_control(node.body, indent + "  ", lines)
        lines.append(f"{indent}}}")
        return
    raise TypeError(node)


def print_program(prog: Program) -> str:
    lines: list[str] = []
    if prog.externs:
        lines.append('import "primitives";')
        lines.append("")
    for comp in prog.components:
        _print_component(comp, lines)
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _print_component(comp: Component, lines: list[str]) -> None:
    def ports(decls: list[PortDecl]) -> str:
        return ", ".join(f"{p.name}: {p.width}" for p in decls)

    static = f"static<{comp.declared_latency}> " if comp.is_static else ""
    lines.append(
        f"{_fmt_attrs(comp.attrs)}{static}component {comp.name}"
        f"({ports(comp.inputs)}) -> ({ports(comp.outputs)}) {{"
    )
    lines.append("  cells {")
    for cell in comp.cells:
        args = ", ".join(str(a) for a in cell.args)
        lines.append(f"    {_fmt_attrs(cell.attrs)}{cell.name} = {cell.proto}({args});")
    lines.append("  }")
    lines.append("  wires {")
    for sg in comp.static_groups:
        lines.append(f"    {_fmt_attrs(sg.attrs)}static<{sg.latency}> group {sg.name} {{")
        for a in sg.assigns:
            lines.append(_fmt_assign(a, "      "))
        lines.append("    }")
    for g in comp.groups:
        lines.append(f"    {_fmt_attrs(g.attrs)}group {g.name} {{")
        for a in g.assigns:
            lines.append(_fmt_assign(a, "      "))
        lines.append("    }")
    for a in comp.continuous:
        lines.append(_fmt_assign(a, "    "))
    lines.append("  }")
    lines.append("  control {")
    _fmt_control(comp.control, "    ", lines)
    lines.append("  }")
    lines.append("}")


def tokens_of(text: str) -> list[str]:
    """Token stream of a program text, for whitespace-insensitive compares."""
    return [t.text for t in _lex(text, "<cmp>")[:-1]]
