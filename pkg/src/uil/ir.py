"""Core data structures for the unified hardware intermediate language.

A program is a set of hardware components. Each component has three
sections:

  cells     instances of primitives or other components
  wires     guarded assignments, grouped into named (static or dynamic)
            groups plus ungrouped continuous assignments
  control   an imperative schedule deciding when groups run

Control operators come in two flavors. Dynamic operators (seq, par, if,
while, repeat, invoke) rely on completion signalling and make no
cycle-level promises. Static operators (static seq/par/if/repeat/invoke
and static group enables) guarantee an exact latency in cycles. Static
operators may only contain static children; dynamic operators may contain
both.

The latency algebra for static nodes:

  seq        sum of child latencies, children run back to back
  par        max of child latencies, children start together in lockstep
  if         max of the two branches (the short branch idles afterwards)
  repeat n   n times the body latency, iterations run back to back
  invoke     the callee's declared latency
  enable     the group's declared latency

Everything here is plain data with value semantics; passes copy a program
and rewrite the copy.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field


# ============================================================
# Source locations and diagnostics
# ============================================================


@dataclass(frozen=True)
class SourceSpan:
    """Half-open region of a source file, for error reporting.

    line/col are 1-indexed; a zero line means "unknown".
    """

    file: str = ""
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        if self.line == 0:
            return self.file or "<unknown>"
        return f"{self.file}:{self.line}:{self.col}"


NO_SPAN = SourceSpan()


@dataclass
class Diagnostic:
    message: str
    span: SourceSpan = NO_SPAN
    severity: str = "error"  # "error" | "warning"

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


# ============================================================
# Ports, constants, guards
# ============================================================

# Kinds of port owner. "cell" is a cell port (add.left), "io" is one of the
# enclosing component's own ports (a bare name in source), "hole" is a
# group's go/done port (g[done]).
CELL = "cell"
IO = "io"
HOLE = "hole"


@dataclass(frozen=True)
class PortRef:
    owner: str  # cell or group name; "" is never valid (io uses port only)
    port: str
    kind: str = CELL

    def __str__(self) -> str:
        if self.kind == IO:
            return self.port
        if self.kind == HOLE:
            return f"{self.owner}[{self.port}]"
        return f"{self.owner}.{self.port}"


def io_port(name: str) -> PortRef:
    return PortRef("", name, IO)


@dataclass(frozen=True)
class Const:
    """Width-carrying integer literal, written W'dN in source."""

    width: int
    value: int

    def __str__(self) -> str:
        return f"{self.width}'d{self.value}"


Atom = PortRef | Const  # right-hand sides and comparison operands


class GExpr:
    """Base class for boolean guard expressions."""


@dataclass(frozen=True)
class GTrue(GExpr):
    pass


@dataclass(frozen=True)
class GPort(GExpr):
    ref: PortRef  # must be 1 bit wide


@dataclass(frozen=True)
class GCmp(GExpr):
    op: str  # == != < > <= >=
    lhs: Atom
    rhs: Atom


@dataclass(frozen=True)
class GNot(GExpr):
    sub: GExpr


@dataclass(frozen=True)
class GAnd(GExpr):
    subs: tuple[GExpr, ...]


@dataclass(frozen=True)
class GOr(GExpr):
    subs: tuple[GExpr, ...]


GTRUE = GTrue()


def gand(*subs: GExpr) -> GExpr:
    flat: list[GExpr] = []
    for s in subs:
        if isinstance(s, GTrue):
            continue
        if isinstance(s, GAnd):
            flat.extend(s.subs)
        else:
            flat.append(s)
    if not flat:
        return GTRUE
    if len(flat) == 1:
        return flat[0]
    return GAnd(tuple(flat))


def gor(*subs: GExpr) -> GExpr:
    flat: list[GExpr] = []
    for s in subs:
        if isinstance(s, GOr):
            flat.extend(s.subs)
        else:
            flat.append(s)
    if len(flat) == 1:
        return flat[0]
    return GOr(tuple(flat))


@dataclass(frozen=True)
class Guard:
    """A boolean expression plus an optional relative timing interval.

    The interval [i, j) restricts the guard to cycles i..j-1 counted from
    the start of the enclosing static group's current execution. It is a
    top-level conjunct: the guard holds when the expression is true AND
    the group's cycle counter lies in the interval. Written %[i:j] in
    source; %k abbreviates %[k:k+1].
    """

    expr: GExpr = GTRUE
    interval: tuple[int, int] | None = None

    def is_true(self) -> bool:
        return isinstance(self.expr, GTrue) and self.interval is None


TRUE_GUARD = Guard()


def guard_ports(expr: GExpr) -> list[PortRef]:
    """All ports read by a guard expression, in syntactic order."""
    out: list[PortRef] = []

    def walk(e: GExpr) -> None:
        if isinstance(e, GPort):
            out.append(e.ref)
        elif isinstance(e, GCmp):
            for a in (e.lhs, e.rhs):
                if isinstance(a, PortRef):
                    out.append(a)
        elif isinstance(e, GNot):
            walk(e.sub)
        elif isinstance(e, (GAnd, GOr)):
            for s in e.subs:
                walk(s)

    walk(expr)
    return out


# ============================================================
# Structure: assignments, groups, cells, components
# ============================================================


@dataclass
class Assignment:
    dst: PortRef
    src: Atom
    guard: Guard = TRUE_GUARD
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass
class Group:
    """Dynamic group: runs until the assignment to its done hole fires."""

    name: str
    assigns: list[Assignment]
    attrs: dict[str, int | None] = field(default_factory=dict)
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass
class StaticGroup:
    """Static group: runs for exactly `latency` cycles, no done signal.

    Assignment guards may carry timing intervals within [0, latency).
    While the group's go is held high its cycle counter advances every
    cycle and wraps back to 0 after latency-1, so holding go for a
    multiple of the latency re-executes the group back to back.
    """

    name: str
    latency: int
    assigns: list[Assignment]
    attrs: dict[str, int | None] = field(default_factory=dict)
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


@dataclass
class Cell:
    name: str
    proto: str  # primitive or component name
    args: list[int] = field(default_factory=list)  # width arguments
    attrs: dict[str, int | None] = field(default_factory=dict)
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)


# ---------------- control tree ----------------


@dataclass
class ControlNode:
    attrs: dict[str, int | None] = field(default_factory=dict, kw_only=True)
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass
class Empty(ControlNode):
    """Zero-latency no-op, the meaning of an empty control block."""


@dataclass
class Enable(ControlNode):
    group: str


@dataclass
class StaticEnable(ControlNode):
    group: str


@dataclass
class Seq(ControlNode):
    children: list[ControlNode]


@dataclass
class Par(ControlNode):
    children: list[ControlNode]


@dataclass
class If(ControlNode):
    cond: PortRef
    tru: ControlNode
    fls: ControlNode


@dataclass
class While(ControlNode):
    cond: PortRef
    body: ControlNode


@dataclass
class Repeat(ControlNode):
    count: int
    body: ControlNode


@dataclass
class Invoke(ControlNode):
    cell: str
    bindings: list[tuple[str, Atom]]


@dataclass
class StaticSeq(ControlNode):
    children: list[ControlNode]


@dataclass
class StaticPar(ControlNode):
    children: list[ControlNode]


@dataclass
class StaticIf(ControlNode):
    cond: PortRef
    tru: ControlNode
    fls: ControlNode


@dataclass
class StaticRepeat(ControlNode):
    count: int
    body: ControlNode


@dataclass
class StaticInvoke(ControlNode):
    cell: str
    bindings: list[tuple[str, Atom]]


STATIC_NODES = (StaticEnable, StaticSeq, StaticPar, StaticIf, StaticRepeat, StaticInvoke)


def is_static(node: ControlNode) -> bool:
    """Empty counts as static: it is the zero-latency empty sequence."""
    return isinstance(node, STATIC_NODES) or isinstance(node, Empty)


def children_of(node: ControlNode) -> list[ControlNode]:
    if isinstance(node, (Seq, Par, StaticSeq, StaticPar)):
        return node.children
    if isinstance(node, (If, StaticIf)):
        return [node.tru, node.fls]
    if isinstance(node, While):
        return [node.body]
    if isinstance(node, (Repeat, StaticRepeat)):
        return [node.body]
    return []


def walk_control(node: ControlNode):
    """Pre-order traversal of a control tree."""
    yield node
    for c in children_of(node):
        yield from walk_control(c)


# ---------------- components and programs ----------------


@dataclass
class PortDecl:
    name: str
    width: int


@dataclass
class Component:
    name: str
    inputs: list[PortDecl]
    outputs: list[PortDecl]
    cells: list[Cell] = field(default_factory=list)
    continuous: list[Assignment] = field(default_factory=list)
    groups: list[Group] = field(default_factory=list)
    static_groups: list[StaticGroup] = field(default_factory=list)
    control: ControlNode = field(default_factory=Empty)
    attrs: dict[str, int | None] = field(default_factory=dict)
    declared_latency: int | None = None  # set iff this is a static component
    span: SourceSpan = field(default=NO_SPAN, compare=False, repr=False)

    @property
    def is_static(self) -> bool:
        return self.declared_latency is not None

    def cell_map(self) -> dict[str, Cell]:
        return {c.name: c for c in self.cells}

    def group_map(self) -> dict[str, Group]:
        return {g.name: g for g in self.groups}

    def static_group_map(self) -> dict[str, StaticGroup]:
        return {g.name: g for g in self.static_groups}

    def find_group(self, name: str) -> Group | StaticGroup | None:
        return self.group_map().get(name) or self.static_group_map().get(name)

    def fresh_name(self, base: str) -> str:
        """First use of a base name is unsuffixed; later uses get _<n>."""
        taken = (
            set(self.group_map())
            | set(self.static_group_map())
            | set(self.cell_map())
            | {p.name for p in self.inputs + self.outputs}
        )
        if base not in taken:
            return base
        n = 0
        while f"{base}_{n}" in taken:
            n += 1
        return f"{base}_{n}"


@dataclass
class PrimitivePort:
    name: str
    width: str | int  # parameter name or literal width
    direction: str  # "in" | "out"
    role: str = "none"  # go | done | clk | reset | none


@dataclass
class PrimitiveDecl:
    """Interface of an externally defined hardware unit.

    state_model:
      combinational  outputs are pure functions of the same-cycle inputs
      registered     1-cycle write port with a done echo (registers, memories)
      dynamic        go/done handshake, possibly data-dependent timing
    `latency` is set only for units with the static calling convention:
    hold go (and inputs) for `latency` cycles, read outputs afterwards.
    """

    name: str
    params: list[str]
    ports: list[PrimitivePort]
    latency: int | None = None
    state_model: str = "combinational"
    shareable: bool = False
    # For dynamic units with data-independent timing: cycles from go to the
    # done pulse. Used by latency inference; None means unknown.
    done_offset: int | None = None

    def port(self, name: str) -> PrimitivePort | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass
class Program:
    externs: list[PrimitiveDecl] = field(default_factory=list)
    components: list[Component] = field(default_factory=list)
    entry: str = "main"

    def component_map(self) -> dict[str, Component]:
        return {c.name: c for c in self.components}

    def extern_map(self) -> dict[str, PrimitiveDecl]:
        return {p.name: p for p in self.externs}

    def entry_component(self) -> Component:
        return self.component_map()[self.entry]

    def clone(self) -> Program:
        return copy.deepcopy(self)


# ============================================================
# Latency algebra
# ============================================================


def latency_of(node: ControlNode, comp: Component, prog: Program) -> int | None:
    """Latency in cycles of a static control node; None for dynamic nodes.

    Total on any validated tree: every static node's latency is determined
    by its structure and the latencies of the groups and cells it names.
    """
    if isinstance(node, Empty):
        return 0
    if isinstance(node, StaticEnable):
        sg = comp.static_group_map().get(node.group)
        return sg.latency if sg else None
    if isinstance(node, StaticSeq):
        return _sum_latencies(node.children, comp, prog)
    if isinstance(node, StaticPar):
        lats = [latency_of(c, comp, prog) for c in node.children]
        if any(l is None for l in lats):
            return None
        return max(lats, default=0)
    if isinstance(node, StaticIf):
        lt = latency_of(node.tru, comp, prog)
        lf = latency_of(node.fls, comp, prog)
        if lt is None or lf is None:
            return None
        return max(lt, lf)
    if isinstance(node, StaticRepeat):
        lb = latency_of(node.body, comp, prog)
        return None if lb is None else node.count * lb
    if isinstance(node, StaticInvoke):
        return cell_latency(node.cell, comp, prog)
    return None


def _sum_latencies(children: list[ControlNode], comp: Component, prog: Program) -> int | None:
    total = 0
    for c in children:
        l = latency_of(c, comp, prog)
        if l is None:
            return None
        total += l
    return total


def cell_latency(cell_name: str, comp: Component, prog: Program) -> int | None:
    """Static latency of a cell's prototype, if it has one."""
    cell = comp.cell_map().get(cell_name)
    if cell is None:
        return None
    ext = prog.extern_map().get(cell.proto)
    if ext is not None:
        return ext.latency
    sub = prog.component_map().get(cell.proto)
    if sub is not None:
        return sub.declared_latency
    return None


# ============================================================
# Guard normalization
# ============================================================


def normalize_guards(sg: StaticGroup) -> StaticGroup:
    """Return a copy where every assignment has an explicit interval.

    Assignments without a timing interval are active for the group's whole
    window, so they get [0, latency). Idempotent, and never changes which
    cycles an assignment fires on.
    """
    out = copy.deepcopy(sg)
    for a in out.assigns:
        if a.guard.interval is None:
            a.guard = Guard(a.guard.expr, (0, sg.latency))
    return out
