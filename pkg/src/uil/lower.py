"""Lowering static constructs to the dynamic core.

Three passes, run in order:

1. collapse-static: every static island (a maximal static control subtree
   under a dynamic parent, or the whole control of a static component)
   becomes a single static group. Child assignments are normalized so all
   timing guards are explicit, then merged with shifted windows: seq
   shifts each child by the sum of its predecessors' latencies, par merges
   at offset 0, if stashes the condition in a fresh 1-bit register on
   cycle 0 and guards each branch, repeat keeps the collapsed body group
   and drives its go for count * latency cycles, invoke drives the
   callee's go and arguments for the callee's latency.

2. static-fsm: each remaining static group of latency n >= 2 gets a
   counter register (ceil(log2 n) bits) that increments while the group's
   go is high and wraps n-1 -> 0. Timing windows %[j:k] become value
   guards j <= fsm < k (folded where a bound is trivial). Latency-1
   groups need no counter; their guards fold to true. After this pass no
   timing intervals remain.

3. static-wrapper: every static group enabled under a dynamic parent is
   hidden behind a generated dynamic group exposing go/done. A 1-bit
   `sig` register records that the group's counter has advanced; done is
   asserted when the counter is back at 0 with sig set (the counter has
   wrapped, so the body finished one cycle earlier), and sig clears so the
   wrapper can be re-invoked. A `while` loop whose body is exactly one
   static island instead compiles to a single wrapper around the loop:
   each time the counter returns to 0 it re-checks the condition in the
   same cycle and either relaunches the body or raises done, spending no
   cycles between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    CELL,
    HOLE,
    Assignment,
    Cell,
    Component,
    Const,
    ControlNode,
    Empty,
    Enable,
    GCmp,
    GNot,
    GPort,
    GTRUE,
    GTrue,
    Group,
    Guard,
    If,
    Invoke,
    Par,
    PortRef,
    Program,
    Repeat,
    Seq,
    StaticEnable,
    StaticGroup,
    StaticIf,
    StaticInvoke,
    StaticPar,
    StaticRepeat,
    StaticSeq,
    While,
    cell_latency,
    gand,
    gor,
    guard_ports,
    is_static,
    latency_of,
    normalize_guards,
    walk_control,
)


@dataclass
class PassConfig:
    promote_threshold: int = 1
    promote_max_cycles: int = 4096
    while_fastpath: bool = True


# ============================================================
# Pass 1: collapse static control
# ============================================================


def collapse_static(prog: Program, config: PassConfig | None = None) -> Program:
    out = prog.clone()
    for comp in out.components:
        _collapse_component(comp, out)
    return out


def _collapse_component(comp: Component, prog: Program) -> None:
    merged: set[str] = set()

    def op_name(node: ControlNode) -> str:
        return {
            StaticSeq: "comp_seq",
            StaticPar: "comp_par",
            StaticIf: "comp_if",
            StaticRepeat: "comp_repeat",
            StaticInvoke: "comp_invoke",
            Invoke: "comp_invoke",
        }[type(node)]

    def shift(assigns: list[Assignment], off: int) -> list[Assignment]:
        if off == 0:
            return assigns
        out = []
        for a in assigns:
            lo, hi = a.guard.interval
            out.append(Assignment(a.dst, a.src, Guard(a.guard.expr, (lo + off, hi + off)), a.span))
        return out

    def collapse(node: ControlNode) -> tuple[list[Assignment], int]:
        """Assignments (with explicit intervals, relative to the node's own
        start) and the node's latency."""
        if isinstance(node, Empty):
            return [], 0
        if isinstance(node, StaticEnable):
            sg = comp.static_group_map()[node.group]
            merged.add(sg.name)
            return normalize_guards(sg).assigns, sg.latency
        if isinstance(node, StaticSeq):
            assigns: list[Assignment] = []
            off = 0
            for c in node.children:
                ca, cl = collapse(c)
                assigns.extend(shift(ca, off))
                off += cl
            return assigns, off
        if isinstance(node, StaticPar):
            assigns = []
            lat = 0
            for c in node.children:
                ca, cl = collapse(c)
                assigns.extend(ca)
                lat = max(lat, cl)
            return assigns, lat
        if isinstance(node, StaticIf):
            return collapse_if(node)
        if isinstance(node, StaticRepeat):
            body_group = materialize(node.body)
            lat = node.count * comp.static_group_map()[body_group].latency
            go = Assignment(
                PortRef(body_group, "go", HOLE), Const(1, 1), Guard(GTRUE, (0, lat))
            )
            return [go], lat
        if isinstance(node, (StaticInvoke, Invoke)):
            lat = cell_latency(node.cell, comp, prog)
            assigns = [
                Assignment(_callee_go(comp, prog, node.cell), Const(1, 1), Guard(GTRUE, (0, lat)))
            ]
            for port, atom in node.bindings:
                assigns.append(
                    Assignment(PortRef(node.cell, port, CELL), atom, Guard(GTRUE, (0, lat)))
                )
            return assigns, lat
        raise AssertionError(f"dynamic node {type(node).__name__} inside a static island")

    def collapse_if(node: StaticIf) -> tuple[list[Assignment], int]:
        ta, tl = collapse(node.tru)
        fa, fl = collapse(node.fls)
        lat = max(tl, fl)
        assigns: list[Assignment] = []
        if lat <= 1:
            for a in ta:
                assigns.append(
                    Assignment(a.dst, a.src, Guard(gand(GPort(node.cond), a.guard.expr), a.guard.interval))
                )
            for a in fa:
                assigns.append(
                    Assignment(a.dst, a.src, Guard(gand(GNot(GPort(node.cond)), a.guard.expr), a.guard.interval))
                )
            return assigns, lat
        stash_name = comp.fresh_name("cond_stash")
        comp.cells.append(Cell(stash_name, "std_reg", [1]))
        stash = PortRef(stash_name, "out", CELL)
        assigns.append(
            Assignment(PortRef(stash_name, "in", CELL), node.cond, Guard(GTRUE, (0, 1)))
        )
        assigns.append(
            Assignment(PortRef(stash_name, "write_en", CELL), Const(1, 1), Guard(GTRUE, (0, 1)))
        )
        for branch, live, later in ((ta, GPort(node.cond), GPort(stash)), (fa, GNot(GPort(node.cond)), GNot(GPort(stash)))):
            for a in branch:
                lo, hi = a.guard.interval
                if lo == 0:
                    assigns.append(
                        Assignment(a.dst, a.src, Guard(gand(live, a.guard.expr), (0, 1)))
                    )
                    if hi > 1:
                        assigns.append(
                            Assignment(a.dst, a.src, Guard(gand(later, a.guard.expr), (1, hi)))
                        )
                else:
                    assigns.append(
                        Assignment(a.dst, a.src, Guard(gand(later, a.guard.expr), (lo, hi)))
                    )
        return assigns, lat

    def materialize(node: ControlNode) -> str:
        """Collapse a subtree into a single named static group."""
        if isinstance(node, StaticEnable):
            return node.group
        assigns, lat = collapse(node)
        name = comp.fresh_name(op_name(node))
        comp.static_groups.append(StaticGroup(name, lat, assigns))
        return name

    def island(node: ControlNode) -> ControlNode:
        assigns, lat = collapse(node)
        if lat == 0:
            return Empty(attrs=node.attrs, span=node.span)
        name = comp.fresh_name(op_name(node))
        comp.static_groups.append(StaticGroup(name, lat, assigns))
        return StaticEnable(name, attrs=node.attrs, span=node.span)

    def rewrite(node: ControlNode) -> ControlNode:
        if isinstance(node, Empty):
            return node
        if is_static(node):
            if isinstance(node, StaticEnable):
                return node
            return island(node)
        if isinstance(node, Invoke) and _is_static_callee(comp, prog, node.cell):
            return island(node)
        if isinstance(node, (Seq, Par)):
            node.children = [rewrite(c) for c in node.children]
        elif isinstance(node, If):
            node.tru = rewrite(node.tru)
            node.fls = rewrite(node.fls)
        elif isinstance(node, While):
            node.body = rewrite(node.body)
        elif isinstance(node, Repeat):
            node.body = rewrite(node.body)
        return node

    comp.control = rewrite(comp.control)
    _sweep_unreferenced(comp, merged)


def _is_static_callee(comp: Component, prog: Program, cell_name: str) -> bool:
    return cell_latency(cell_name, comp, prog) is not None


def _callee_go(comp: Component, prog: Program, cell_name: str) -> PortRef:
    cell = comp.cell_map()[cell_name]
    ext = prog.extern_map().get(cell.proto)
    if ext is not None:
        go = next(p.name for p in ext.ports if p.role == "go")
        return PortRef(cell_name, go, CELL)
    return PortRef(cell_name, "go", CELL)


def _sweep_unreferenced(comp: Component, candidates: set[str]) -> None:
    """Remove merged static groups that nothing enables or drives."""
    referenced: set[str] = set()
    for node in walk_control(comp.control):
        if isinstance(node, (Enable, StaticEnable)):
            referenced.add(node.group)
    all_assigns = list(comp.continuous)
    for g in comp.groups:
        all_assigns.extend(g.assigns)
    for sg in comp.static_groups:
        all_assigns.extend(sg.assigns)
    for a in all_assigns:
        if a.dst.kind == HOLE:
            referenced.add(a.dst.owner)
        if isinstance(a.src, PortRef) and a.src.kind == HOLE:
            referenced.add(a.src.owner)
        for ref in guard_ports(a.guard.expr):
            if ref.kind == HOLE:
                referenced.add(ref.owner)
    comp.static_groups = [
        sg for sg in comp.static_groups if sg.name in referenced or sg.name not in candidates
    ]


# ============================================================
# Pass 2: FSM instantiation
# ============================================================


def instantiate_fsms(prog: Program, config: PassConfig | None = None) -> Program:
    out = prog.clone()
    for comp in out.components:
        for sg in list(comp.static_groups):
            _fsm_for_group(comp, sg)
    return out


def _fsm_for_group(comp: Component, sg: StaticGroup) -> None:
    n = sg.latency
    if n == 1:
        for a in sg.assigns:
            a.guard = Guard(a.guard.expr, None)
        return
    width = (n - 1).bit_length()
    fsm_name = comp.fresh_name(f"{sg.name}_fsm")
    comp.cells.append(Cell(fsm_name, "std_reg", [width], {"fsm": None}))
    incr_name = comp.fresh_name(f"{sg.name}_fsm_incr")
    comp.cells.append(Cell(incr_name, "std_cadd", [width]))
    fsm = PortRef(fsm_name, "out", CELL)

    def cnt(v: int) -> Const:
        return Const(width, v)

    for a in sg.assigns:
        if a.guard.interval is None:
            continue
        lo, hi = a.guard.interval
        if lo == 0 and hi >= n:
            bound = GTRUE
        elif hi == lo + 1:
            bound = GCmp("==", fsm, cnt(lo))
        elif lo == 0:
            bound = GCmp("<", fsm, cnt(hi))
        elif hi >= n:
            bound = GCmp(">=", fsm, cnt(lo))
        else:
            bound = gand(GCmp(">=", fsm, cnt(lo)), GCmp("<", fsm, cnt(hi)))
        a.guard = Guard(gand(bound, a.guard.expr), None)

    last = GCmp("==", fsm, cnt(n - 1))
    sg.assigns.extend(
        [
            Assignment(PortRef(incr_name, "left", CELL), fsm),
            Assignment(PortRef(incr_name, "right", CELL), cnt(1)),
            Assignment(PortRef(fsm_name, "in", CELL), cnt(0), Guard(last)),
            Assignment(
                PortRef(fsm_name, "in", CELL),
                PortRef(incr_name, "out", CELL),
                Guard(GCmp("!=", fsm, cnt(n - 1))),
            ),
            Assignment(PortRef(fsm_name, "write_en", CELL), Const(1, 1)),
        ]
    )


# ============================================================
# Pass 3: wrapper insertion
# ============================================================


def insert_wrappers(prog: Program, config: PassConfig | None = None) -> Program:
    config = config or PassConfig()
    out = prog.clone()
    for comp in out.components:
        if not comp.is_static:
            _wrap_component(comp, config)
    return out


def _wrap_component(comp: Component, config: PassConfig) -> None:
    wrappers: dict[str, str] = {}

    def wrapper_for(group: str) -> str:
        if group in wrappers:
            return wrappers[group]
        sg = comp.static_group_map()[group]
        name = comp.fresh_name(f"{group}_wrapper")
        sig_name = comp.fresh_name(f"{group}_sig")
        comp.cells.append(Cell(sig_name, "std_reg", [1]))
        sig = PortRef(sig_name, "out", CELL)
        body_go = PortRef(group, "go", HOLE)
        one = Const(1, 1)
        zero = Const(1, 0)
        if sg.latency == 1:
            finished = GPort(sig)
        else:
            fsm = PortRef(f"{group}_fsm", "out", CELL)
            width = (sg.latency - 1).bit_length()
            finished = gand(GCmp("==", fsm, Const(width, 0)), GPort(sig))
        advancing = GNot(GPort(sig)) if sg.latency == 1 else GCmp(
            "!=", PortRef(f"{group}_fsm", "out", CELL), Const((sg.latency - 1).bit_length(), 0)
        )
        assigns = [
            Assignment(body_go, one, Guard(GNot(finished))),
            Assignment(PortRef(sig_name, "in", CELL), one, Guard(advancing)),
            Assignment(PortRef(sig_name, "write_en", CELL), one, Guard(advancing)),
            Assignment(PortRef(sig_name, "in", CELL), zero, Guard(finished)),
            Assignment(PortRef(sig_name, "write_en", CELL), one, Guard(finished)),
            Assignment(PortRef(name, "done", HOLE), one, Guard(finished)),
        ]
        comp.groups.append(Group(name, assigns, {"wrapper": None}))
        wrappers[group] = name
        return name

    def while_wrapper_for(node: While, group: str) -> str:
        sg = comp.static_group_map()[group]
        name = comp.fresh_name(f"{group}_while")
        body_go = PortRef(group, "go", HOLE)
        one = Const(1, 1)
        cond = GPort(node.cond)
        if sg.latency == 1:
            assigns = [
                Assignment(body_go, one, Guard(cond)),
                Assignment(PortRef(name, "done", HOLE), one, Guard(GNot(cond))),
            ]
        else:
            fsm = PortRef(f"{group}_fsm", "out", CELL)
            width = (sg.latency - 1).bit_length()
            boundary = GCmp("==", fsm, Const(width, 0))
            mid = GCmp("!=", fsm, Const(width, 0))
            assigns = [
                Assignment(body_go, one, Guard(mid)),
                Assignment(body_go, one, Guard(gand(boundary, cond))),
                Assignment(PortRef(name, "done", HOLE), one, Guard(gand(boundary, GNot(cond)))),
            ]
        comp.groups.append(Group(name, assigns, {"wrapper": None}))
        return name

    def rewrite(node: ControlNode) -> ControlNode:
        if (
            config.while_fastpath
            and isinstance(node, While)
            and isinstance(node.body, StaticEnable)
        ):
            return Enable(while_wrapper_for(node, node.body.group), attrs=node.attrs, span=node.span)
        if isinstance(node, StaticEnable):
            return Enable(wrapper_for(node.group), attrs=node.attrs, span=node.span)
        if isinstance(node, (Seq, Par)):
            node.children = [rewrite(c) for c in node.children]
        elif isinstance(node, If):
            node.tru = rewrite(node.tru)
            node.fls = rewrite(node.fls)
        elif isinstance(node, While):
            node.body = rewrite(node.body)
        elif isinstance(node, Repeat):
            node.body = rewrite(node.body)
        return node

    comp.control = rewrite(comp.control)
