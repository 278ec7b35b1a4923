"""Well-formedness checking. Every violation becomes a located diagnostic;
nothing here ever raises on malformed input.

Beyond the structural invariants (name uniqueness, width agreement, timing
intervals in bounds), two rules shape the whole compiler:

* a static control operator may not contain dynamic children ("static
  parent, dynamic child"): with a child of unknown duration no latency
  bound could be promised to the parent;
* the assignment graph that can be live within a single cycle must be free
  of combinational cycles, which the simulator's fixed point requires.

Guard mutual exclusion is checked structurally only when two assignments
to one port are unconditionally live together (their boolean guards are
constant-true and their timing windows overlap); everything subtler is
enforced at simulation time as a guard-conflict error.
"""

from __future__ import annotations

from . import primitives as prims
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
    GTrue,
    Group,
    If,
    Invoke,
    Par,
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
    guard_ports,
    is_static,
    latency_of,
    walk_control,
)

RESERVED_PREFIXES = ("__delay_",)


class Scope:
    """Resolves port references within one component."""

    def __init__(self, prog: Program, comp: Component):
        self.prog = prog
        self.comp = comp
        self.cells = comp.cell_map()
        self.inputs = {p.name: p.width for p in comp.inputs}
        self.outputs = {p.name: p.width for p in comp.outputs}
        self.groups = comp.group_map()
        self.static_groups = comp.static_group_map()

    def resolve(self, ref: PortRef) -> tuple[int, str] | str:
        """Returns (width, direction) or an error message. Direction is the
        port's own direction: "in" ports are assignment targets, "out"
        ports are readable sources."""
        if ref.kind == IO:
            if ref.port in self.inputs:
                return (self.inputs[ref.port], "out")  # readable inside
            if ref.port in self.outputs:
                return (self.outputs[ref.port], "in")  # writable inside
            return f"unknown port {ref.port!r}"
        if ref.kind == HOLE:
            if ref.owner in self.groups or ref.owner in self.static_groups:
                if ref.port in ("go", "done"):
                    return (1, "inout")
                return f"group {ref.owner!r} has no {ref.port!r} signal"
            return f"unknown group {ref.owner!r}"
        cell = self.cells.get(ref.owner)
        if cell is None:
            return f"unknown cell {ref.owner!r}"
        ext = self.prog.extern_map().get(cell.proto)
        if ext is not None:
            p = ext.port(ref.port)
            if p is None:
                return f"primitive {cell.proto} has no port {ref.port!r}"
            return (prims.resolve_width(ext, cell.args, p.width), p.direction)
        sub = self.prog.component_map().get(cell.proto)
        if sub is not None:
            for d in sub.inputs:
                if d.name == ref.port:
                    return (d.width, "in")
            for d in sub.outputs:
                if d.name == ref.port:
                    return (d.width, "out")
            if sub.is_static and ref.port == "go":
                return (1, "in")
            return f"component {cell.proto} has no port {ref.port!r}"
        return f"unknown prototype {cell.proto!r}"

    def atom_width(self, atom: Atom) -> int | str:
        if isinstance(atom, Const):
            return atom.width
        r = self.resolve(atom)
        return r if isinstance(r, str) else r[0]


def validate(prog: Program, allow_reserved: bool = False) -> list[Diagnostic]:
    """Check all program invariants; empty result means fully valid.

    allow_reserved permits compiler-generated names (delay groups), used
    when re-validating pass output.
    """
    diags: list[Diagnostic] = []
    comps = {}
    for c in prog.components:
        if c.name in comps:
            diags.append(Diagnostic(f"duplicate component name {c.name!r}", c.span))
        comps[c.name] = c
    if prog.entry not in comps and prog.components:
        diags.append(Diagnostic(f"entry component {prog.entry!r} not found"))

    if _instantiation_cycle(prog):
        diags.append(Diagnostic("recursive component instantiation"))
        return diags

    for c in prog.components:
        _check_component(prog, c, diags, allow_reserved)
    return diags


def _instantiation_cycle(prog: Program) -> bool:
    comps = prog.component_map()
    seen: dict[str, int] = {}  # 1 = visiting, 2 = done

    def visit(name: str) -> bool:
        if seen.get(name) == 1:
            return True
        if seen.get(name) == 2:
            return False
        seen[name] = 1
        comp = comps[name]
        for cell in comp.cells:
            if cell.proto in comps and visit(cell.proto):
                return True
        seen[name] = 2
        return False

    return any(visit(c.name) for c in prog.components)


def _check_component(prog: Program, comp: Component, diags: list[Diagnostic], allow_reserved: bool) -> None:
    err = lambda msg, span=comp.span: diags.append(Diagnostic(msg, span))

    names: set[str] = set()
    for p in comp.inputs + comp.outputs:
        if p.name in names:
            err(f"duplicate port name {p.name!r}")
        names.add(p.name)
        if p.width < 1:
            err(f"port {p.name!r} must be at least 1 bit wide")
    if comp.is_static and "go" in {p.name for p in comp.inputs}:
        err("static components reserve the port name 'go'")

    cell_names: set[str] = set()
    for cell in comp.cells:
        if cell.name in cell_names:
            err(f"duplicate cell name {cell.name!r}", cell.span)
        cell_names.add(cell.name)
        _check_cell(prog, cell, diags)

    group_names: set[str] = set()
    for g in list(comp.groups) + list(comp.static_groups):
        if g.name in group_names or g.name in cell_names:
            err(f"duplicate name {g.name!r}", g.span)
        group_names.add(g.name)
        if not allow_reserved and any(g.name.startswith(p) for p in RESERVED_PREFIXES):
            err(f"group name {g.name!r} uses a reserved prefix", g.span)

    scope = Scope(prog, comp)

    for g in comp.groups:
        _check_dynamic_group(scope, g, diags)
    for sg in comp.static_groups:
        _check_static_group(scope, sg, diags)
    for a in comp.continuous:
        if a.guard.interval is not None:
            err("timing guards are only allowed inside static groups", a.span)
        _check_assign(scope, a, diags)

    _check_control(prog, comp, scope, diags)
    _check_comb_cycles(prog, comp, diags)


def _check_cell(prog: Program, cell: Cell, diags: list[Diagnostic]) -> None:
    ext = prog.extern_map().get(cell.proto)
    if ext is not None:
        if len(cell.args) != len(ext.params):
            diags.append(
                Diagnostic(
                    f"{cell.proto} takes {len(ext.params)} width arguments, got {len(cell.args)}",
                    cell.span,
                )
            )
        elif any(a < 1 for a in cell.args):
            diags.append(Diagnostic(f"width arguments of {cell.name!r} must be positive", cell.span))
        return
    sub = prog.component_map().get(cell.proto)
    if sub is not None:
        if cell.args:
            diags.append(Diagnostic(f"component cell {cell.name!r} takes no width arguments", cell.span))
        return
    diags.append(Diagnostic(f"unknown prototype {cell.proto!r}", cell.span))


def _check_dynamic_group(scope: Scope, g: Group, diags: list[Diagnostic]) -> None:
    has_done = False
    for a in g.assigns:
        if a.guard.interval is not None:
            diags.append(Diagnostic(f"timing guard in dynamic group {g.name!r}", a.span))
        if a.dst.kind == HOLE and a.dst.port == "done":
            if a.dst.owner != g.name:
                diags.append(
                    Diagnostic(f"group {g.name!r} may only drive its own done signal", a.span)
                )
            else:
                has_done = True
        _check_assign(scope, a, diags)
    if not has_done:
        diags.append(Diagnostic(f"group {g.name!r} never assigns its done signal", g.span))
    _check_trivial_conflicts(g.name, g.assigns, diags)


def _check_static_group(scope: Scope, sg: StaticGroup, diags: list[Diagnostic]) -> None:
    if sg.latency < 1:
        diags.append(Diagnostic(f"static group {sg.name!r} must have latency >= 1", sg.span))
        return
    for a in sg.assigns:
        if a.dst.kind == HOLE and a.dst.port == "done":
            diags.append(
                Diagnostic(f"static group {sg.name!r} may not assign a done signal", a.span)
            )
        iv = a.guard.interval
        if iv is not None:
            lo, hi = iv
            if not (0 <= lo < hi):
                diags.append(Diagnostic(f"malformed timing interval %[{lo}:{hi}]", a.span))
            elif hi > sg.latency:
                diags.append(
                    Diagnostic(
                        f"timing interval %[{lo}:{hi}] exceeds latency {sg.latency} "
                        f"of group {sg.name!r}",
                        a.span,
                    )
                )
        _check_assign(scope, a, diags)
    _check_trivial_conflicts(sg.name, sg.assigns, diags, latency=sg.latency)


def _check_assign(scope: Scope, a: Assignment, diags: list[Diagnostic]) -> None:
    dst = scope.resolve(a.dst)
    if isinstance(dst, str):
        diags.append(Diagnostic(dst, a.span))
        return
    dwidth, ddir = dst
    if ddir == "out":
        diags.append(Diagnostic(f"{a.dst} is not assignable", a.span))
    swidth = scope.atom_width(a.src)
    if isinstance(swidth, str):
        diags.append(Diagnostic(swidth, a.span))
        return
    if isinstance(a.src, PortRef):
        sres = scope.resolve(a.src)
        if not isinstance(sres, str) and sres[1] == "in":
            diags.append(Diagnostic(f"{a.src} is not readable", a.span))
    if swidth != dwidth:
        diags.append(
            Diagnostic(f"width mismatch: {a.dst} is {dwidth} bits, source is {swidth}", a.span)
        )
    if isinstance(a.src, Const) and a.src.value >= (1 << a.src.width):
        diags.append(Diagnostic(f"constant {a.src} does not fit its width", a.span))
    _check_guard(scope, a, diags)


def _check_guard(scope: Scope, a: Assignment, diags: list[Diagnostic]) -> None:
    for ref in guard_ports(a.guard.expr):
        r = scope.resolve(ref)
        if isinstance(r, str):
            diags.append(Diagnostic(r, a.span))
    # comparisons need equal widths; bare ports must be 1 bit
    from .ir import GAnd, GCmp, GNot, GOr, GPort

    def walk(e):
        if isinstance(e, GPort):
            r = scope.resolve(e.ref)
            if not isinstance(r, str) and r[0] != 1:
                diags.append(Diagnostic(f"guard port {e.ref} must be 1 bit wide", a.span))
        elif isinstance(e, GCmp):
            lw, rw = scope.atom_width(e.lhs), scope.atom_width(e.rhs)
            if isinstance(lw, str):
                diags.append(Diagnostic(lw, a.span))
            elif isinstance(rw, str):
                diags.append(Diagnostic(rw, a.span))
            elif lw != rw:
                diags.append(
                    Diagnostic(f"comparison of unequal widths ({lw} and {rw}) in guard", a.span)
                )
        elif isinstance(e, GNot):
            walk(e.sub)
        elif isinstance(e, (GAnd, GOr)):
            for s in e.subs:
                walk(s)

    walk(a.guard.expr)


def _check_trivial_conflicts(
    name: str, assigns: list[Assignment], diags: list[Diagnostic], latency: int | None = None
) -> None:
    by_dst: dict[PortRef, list[Assignment]] = {}
    for a in assigns:
        by_dst.setdefault(a.dst, []).append(a)
    for dst, lst in by_dst.items():
        uncond = [a for a in lst if isinstance(a.guard.expr, GTrue)]
        for i in range(len(uncond)):
            for j in range(i + 1, len(uncond)):
                ai, aj = uncond[i].guard.interval, uncond[j].guard.interval
                full = (0, latency) if latency is not None else None
                wi = ai or full
                wj = aj or full
                overlap = wi is None or wj is None or (wi[0] < wj[1] and wj[0] < wi[1])
                if overlap and uncond[i].src != uncond[j].src:
                    diags.append(
                        Diagnostic(
                            f"conflicting unconditional drives of {dst} in {name!r}",
                            uncond[j].span,
                        )
                    )


# ---------------- control checks ----------------


def _check_control(prog: Program, comp: Component, scope: Scope, diags: list[Diagnostic]) -> None:
    err = lambda msg, span: diags.append(Diagnostic(msg, span))

    for node in walk_control(comp.control):
        if isinstance(node, Enable):
            if node.group in scope.static_groups:
                err(f"enable of static group {node.group!r} must be a static enable", node.span)
            elif node.group not in scope.groups:
                err(f"unknown group {node.group!r}", node.span)
        elif isinstance(node, StaticEnable):
            if node.group not in scope.static_groups:
                err(f"unknown static group {node.group!r}", node.span)
        elif isinstance(node, (If, While, StaticIf)):
            cond = node.cond
            r = scope.resolve(cond)
            if isinstance(r, str):
                err(r, node.span)
            elif r[0] != 1:
                err(f"condition port {cond} must be 1 bit wide", node.span)
            elif r[1] == "in":
                err(f"condition port {cond} is not readable", node.span)
        elif isinstance(node, (Invoke, StaticInvoke)):
            _check_invoke(prog, comp, scope, node, diags)
        elif isinstance(node, (Repeat, StaticRepeat)):
            if node.count < 0:
                err("repeat count must be non-negative", node.span)

        if is_static(node) and not isinstance(node, Empty):
            for child in children_of(node):
                if not is_static(child):
                    err("static parent, dynamic child", child.span)

    # zero-latency static nodes are only legal as empty seq/par
    for node in walk_control(comp.control):
        if isinstance(node, (StaticIf, StaticRepeat, StaticInvoke)):
            l = latency_of(node, comp, prog)
            if l == 0:
                err("zero-latency static node; only empty seq/par may have latency 0", node.span)

    if comp.is_static:
        if not is_static(comp.control):
            err(f"static component {comp.name!r} has dynamic control", comp.span)
        else:
            l = latency_of(comp.control, comp, prog)
            if l is not None and l != comp.declared_latency:
                err(
                    f"component {comp.name!r} declares latency {comp.declared_latency} "
                    f"but its control takes {l}",
                    comp.span,
                )


def _check_invoke(
    prog: Program, comp: Component, scope: Scope, node: Invoke | StaticInvoke, diags: list[Diagnostic]
) -> None:
    err = lambda msg: diags.append(Diagnostic(msg, node.span))
    cell = scope.cells.get(node.cell)
    if cell is None:
        err(f"unknown cell {node.cell!r}")
        return
    ext = prog.extern_map().get(cell.proto)
    sub = prog.component_map().get(cell.proto)
    static_callee = (ext is not None and ext.latency is not None) or (
        sub is not None and sub.is_static
    )
    if isinstance(node, StaticInvoke) and not static_callee:
        err("static parent, dynamic child")  # static invoke of a dynamic callee
    if isinstance(node, Invoke) and ext is not None and ext.state_model == "combinational":
        err(f"cannot invoke combinational primitive {cell.proto}")
    bound: set[str] = set()
    for port, atom in node.bindings:
        if port in bound:
            err(f"duplicate binding for port {port!r}")
        bound.add(port)
        ref = PortRef(node.cell, port, CELL)
        r = scope.resolve(ref)
        if isinstance(r, str):
            err(r)
            continue
        if r[1] != "in":
            err(f"invoke binding targets non-input port {port!r}")
        w = scope.atom_width(atom)
        if isinstance(w, str):
            err(w)
        elif w != r[0]:
            err(f"binding for {port!r} has width {w}, port is {r[0]} bits")


# ---------------- combinational cycle check ----------------


def _activation_sets(comp: Component) -> list[tuple[str, list[Assignment]]]:
    """Groups that can be live together: each group plus the groups it
    wire-enables, plus the continuous assignments; and continuous alone."""
    all_groups: dict[str, list[Assignment]] = {g.name: g.assigns for g in comp.groups}
    all_groups.update({g.name: g.assigns for g in comp.static_groups})

    enables: dict[str, set[str]] = {n: set() for n in all_groups}
    for n, assigns in all_groups.items():
        for a in assigns:
            if a.dst.kind == HOLE and a.dst.port == "go" and a.dst.owner in all_groups:
                enables[n].add(a.dst.owner)

    sets = [("<continuous>", list(comp.continuous))]
    for n in all_groups:
        live = [n]
        frontier = [n]
        while frontier:
            g = frontier.pop()
            for e in enables[g]:
                if e not in live:
                    live.append(e)
                    frontier.append(e)
        assigns = list(comp.continuous)
        for g in live:
            assigns.extend(all_groups[g])
        sets.append((n, assigns))
    return sets


def _comb_io_edges(prog: Program) -> dict[str, list[tuple[str, str]]]:
    """Conservative same-cycle input->output paths through each component."""
    comps = prog.component_map()
    edges: dict[str, list[tuple[str, str]]] = {}

    def compute(name: str) -> list[tuple[str, str]]:
        if name in edges:
            return edges[name]
        edges[name] = []  # break instantiation recursion defensively
        comp = comps[name]
        graph: dict[tuple, set[tuple]] = {}
        assigns = list(comp.continuous)
        for g in comp.groups:
            assigns.extend(g.assigns)
        for g in comp.static_groups:
            assigns.extend(g.assigns)
        _add_assign_edges(prog, comp, assigns, graph, compute)
        ins = {p.name for p in comp.inputs}
        outs = {p.name for p in comp.outputs}
        result = []
        for i in ins:
            seen: set[tuple] = set()
            stack = [("@io", i)]
            while stack:
                n = stack.pop()
                if n in seen:
                    continue
                seen.add(n)
                stack.extend(graph.get(n, ()))
            for o in outs:
                if ("@io", o) in seen:
                    result.append((i, o))
        edges[name] = result
        return result

    for c in prog.components:
        compute(c.name)
    return edges


def _add_assign_edges(prog, comp, assigns, graph, sub_edges) -> None:
    comps = prog.component_map()

    def node(ref: PortRef) -> tuple:
        if ref.kind == IO:
            return ("@io", ref.port)
        if ref.kind == HOLE:
            return ("@g:" + ref.owner, ref.port)
        return (ref.owner, ref.port)

    def add(a: tuple, b: tuple) -> None:
        graph.setdefault(a, set()).add(b)

    for a in assigns:
        dst = node(a.dst)
        if isinstance(a.src, PortRef):
            add(node(a.src), dst)
        for ref in guard_ports(a.guard.expr):
            add(node(ref), dst)

    for cell in comp.cells:
        ext = prog.extern_map().get(cell.proto)
        if ext is not None:
            for i, o in prims.comb_edges(cell.proto):
                add((cell.name, i), (cell.name, o))
        elif cell.proto in comps:
            for i, o in sub_edges(cell.proto):
                add((cell.name, i), (cell.name, o))


def _check_comb_cycles(prog: Program, comp: Component, diags: list[Diagnostic]) -> None:
    sub_edge_map = _comb_io_edges(prog)

    member_of: dict[int, str] = {}
    for g in comp.groups:
        for a in g.assigns:
            member_of[id(a)] = g.name
    for g in comp.static_groups:
        for a in g.assigns:
            member_of[id(a)] = g.name

    for set_name, assigns in _activation_sets(comp):
        graph: dict[tuple, set[tuple]] = {}

        def node(ref: PortRef) -> tuple:
            if ref.kind == IO:
                return ("@io", ref.port)
            if ref.kind == HOLE:
                return ("@g:" + ref.owner, ref.port)
            return (ref.owner, ref.port)

        def add(a: tuple, b: tuple) -> None:
            if a != b:
                graph.setdefault(a, set()).add(b)

        for a in assigns:
            dst = node(a.dst)
            if isinstance(a.src, PortRef):
                add(node(a.src), dst)
            for ref in guard_ports(a.guard.expr):
                add(node(ref), dst)
            owner = member_of.get(id(a))
            if owner is not None:
                add(("@g:" + owner, "go"), dst)

        for cell in comp.cells:
            ext = prog.extern_map().get(cell.proto)
            if ext is not None:
                for i, o in prims.comb_edges(cell.proto):
                    add((cell.name, i), (cell.name, o))
            elif cell.proto in prog.component_map():
                for i, o in sub_edge_map.get(cell.proto, ()):
                    add((cell.name, i), (cell.name, o))

        cycle = _find_cycle(graph)
        if cycle is not None:
            def fmt(n: tuple) -> str:
                owner, port = n
                if owner == "@io":
                    return port
                if owner.startswith("@g:"):
                    return f"{owner[3:]}[{port}]"
                return f"{owner}.{port}"

            path = " -> ".join(fmt(n) for n in reversed(cycle))
            diags.append(
                Diagnostic(f"combinational cycle while {set_name!r} is active: {path}", comp.span)
            )
            return  # one report per component keeps the output readable


def _find_cycle(graph: dict[tuple, set[tuple]]) -> list[tuple] | None:
    state: dict[tuple, int] = {}
    parent: dict[tuple, tuple] = {}

    def dfs(n: tuple) -> list[tuple] | None:
        state[n] = 1
        for m in sorted(graph.get(n, ())):
            if state.get(m, 0) == 1:
                cycle = [m, n]
                cur = n
                while cur != m and cur in parent:
                    cur = parent[cur]
                    cycle.append(cur)
                return cycle
            if state.get(m, 0) == 0:
                parent[m] = n
                found = dfs(m)
                if found:
                    return found
        state[n] = 2
        return None

    for n in sorted(graph):
        if state.get(n, 0) == 0:
            found = dfs(n)
            if found:
                return found
    return None
