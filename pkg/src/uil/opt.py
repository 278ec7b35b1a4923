"""Timing-aware optimizations, run before lowering.

infer-static attaches @static(n) annotations to dynamic groups and
control nodes whose cycle count is provably fixed. A group is inferable
when its done signal is tied, possibly through a chain of completion
signals, to cells whose trigger inputs are asserted unconditionally and
whose completion timing is known. Control inference is bottom-up using
the simulator's documented overhead constants, so an annotation predicts
the exact cycle count the code takes when compiled without promotion.
Conditionals are only annotated when both branches take the same time;
loops with data-dependent trip counts are never annotated.

static-promote converts maximal annotated subtrees into static
constructs. Promotion is a refinement: the static replacement picks one
schedule from the dynamic code's allowed behaviors, so observable state
is preserved. Three guards keep it profitable: a minimum island size (in
group enables plus condition ports), a maximum island latency (large
islands mean wide counters; oversized islands are split by promoting
their children independently), and a no-regression rule that skips any
island whose static latency plus the wrapper handshake would exceed the
predicted dynamic cycle count.

schedule-compaction reschedules the children of an all-static sequence
as soon as their data dependencies allow, emitting a static par whose
threads delay their start behind empty __delay_<n> groups. The delay
groups vanish when islands collapse, so they cost nothing.

cell-share remaps structurally identical cells onto one instance when
their uses can never interfere: uses in different threads of a dynamic
par always conflict, uses inside a static par conflict only when their
cycle windows overlap, and sequentially ordered uses never conflict.
"""

from __future__ import annotations

from .ir import (
    CELL,
    HOLE,
    IO,
    Assignment,
    Cell,
    Component,
    Const,
    ControlNode,
    Diagnostic,
    Empty,
    Enable,
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
    children_of,
    guard_ports,
    is_static,
    latency_of,
    walk_control,
)
from .lower import PassConfig
from .sim import COND_CHECK, PAR_JOIN, REPEAT_STEP, SEQ_TRANSITION, WRAPPER_DONE

DELAY_PREFIX = "__delay_"


# ============================================================
# Static latency inference
# ============================================================


def infer_static(prog: Program, config: PassConfig | None = None) -> Program:
    out, _ = infer_static_with_warnings(prog)
    return out


def infer_static_with_warnings(prog: Program) -> tuple[Program, list[Diagnostic]]:
    out = prog.clone()
    warnings: list[Diagnostic] = []
    for comp in _topo_components(out):
        if comp.is_static:
            continue
        for g in comp.groups:
            n = _infer_group(out, comp, g)
            old = g.attrs.get("static")
            if n is not None:
                if old is not None and old != n:
                    warnings.append(
                        Diagnostic(
                            f"group {g.name!r} hinted @static({old}) but derived {n}",
                            g.span,
                            severity="warning",
                        )
                    )
                g.attrs["static"] = n
            elif old is not None:
                warnings.append(
                    Diagnostic(
                        f"group {g.name!r} hinted @static({old}) but latency is not derivable",
                        g.span,
                        severity="warning",
                    )
                )
                del g.attrs["static"]
        _annotate_control(out, comp, comp.control)
        top = comp.control.attrs.get("static")
        if top is not None:
            comp.attrs["static"] = top
        elif "static" in comp.attrs:
            del comp.attrs["static"]
    return out, warnings


def _topo_components(prog: Program) -> list[Component]:
    comps = prog.component_map()
    order: list[Component] = []
    seen: set[str] = set()

    def visit(name: str) -> None:
        if name in seen or name not in comps:
            return
        seen.add(name)
        for cell in comps[name].cells:
            visit(cell.proto)
        order.append(comps[name])

    for c in prog.components:
        visit(c.name)
    return order


def _infer_group(prog: Program, comp: Component, g: Group) -> int | None:
    done = [a for a in g.assigns if a.dst.kind == HOLE and a.dst.port == "done"]
    if len(done) != 1 or not done[0].guard.is_true():
        return None
    fire = _fire_cycle(prog, comp, g, done[0].src, set())
    return None if fire is None else fire + 1


def _fire_cycle(prog: Program, comp: Component, g: Group, atom, seen: set) -> int | None:
    """Relative cycle at which `atom` first reads 1, assuming the group
    started with all its units idle. None when not derivable."""
    if isinstance(atom, Const):
        return 0 if atom.value == 1 and atom.width == 1 else None
    if not isinstance(atom, PortRef) or atom.kind != CELL or atom.port != "done":
        return None
    if atom in seen:
        return None
    seen.add(atom)
    cell = comp.cell_map().get(atom.owner)
    if cell is None:
        return None
    decl = prog.extern_map().get(cell.proto)
    if decl is None or decl.done_offset is None:
        return None
    trigger = next((p.name for p in decl.ports if p.role == "go"), None)
    if trigger is None:
        return None
    drivers = [a for a in g.assigns if a.dst == PortRef(atom.owner, trigger, CELL)]
    if len(drivers) != 1 or not drivers[0].guard.is_true():
        return None
    base = _fire_cycle(prog, comp, g, drivers[0].src, seen)
    return None if base is None else base + decl.done_offset


def _annotate_control(prog: Program, comp: Component, node: ControlNode) -> int | None:
    """Bottom-up annotation with the predicted compiled cycle count of the
    node in a dynamic context (including wrapper handshakes for static
    children). Returns the count, or None when not fixed."""
    for c in children_of(node):
        _annotate_control(prog, comp, c)

    n = _node_cost(prog, comp, node)
    if n is not None and not is_static(node):
        node.attrs["static"] = n
    elif "static" in node.attrs and not is_static(node):
        del node.attrs["static"]
    return n


def _node_cost(prog: Program, comp: Component, node: ControlNode) -> int | None:
    if is_static(node):
        l = latency_of(node, comp, prog)
        return None if l is None else l + WRAPPER_DONE
    if isinstance(node, Enable):
        g = comp.group_map().get(node.group)
        return None if g is None else g.attrs.get("static")
    if isinstance(node, Seq):
        total = 0
        for c in node.children:
            cc = _child_cost(prog, comp, c)
            if cc is None:
                return None
            total += cc
        return total + SEQ_TRANSITION * max(0, len(node.children) - 1)
    if isinstance(node, Par):
        costs = [_child_cost(prog, comp, c) for c in node.children]
        if any(c is None for c in costs):
            return None
        return max(costs, default=0) + PAR_JOIN
    if isinstance(node, If):
        if isinstance(node.tru, Empty) or isinstance(node.fls, Empty):
            return None
        ct = _child_cost(prog, comp, node.tru)
        cf = _child_cost(prog, comp, node.fls)
        if ct is None or cf is None or ct != cf:
            return None  # unequal branches make the cycle count data-dependent
        return ct + COND_CHECK
    if isinstance(node, Repeat):
        cb = _child_cost(prog, comp, node.body)
        if cb is None:
            return None
        return node.count * (cb + REPEAT_STEP)
    if isinstance(node, While):
        return None
    if isinstance(node, Invoke):
        cell = comp.cell_map().get(node.cell)
        if cell is None:
            return None
        lat = cell_latency(node.cell, comp, prog)
        if lat is not None:
            return lat + WRAPPER_DONE  # compiled as a static island
        sub = prog.component_map().get(cell.proto)
        if sub is not None:
            return sub.attrs.get("static")
        ext = prog.extern_map().get(cell.proto)
        if ext is not None and ext.done_offset is not None:
            return ext.done_offset + 1
        return None
    if isinstance(node, Empty):
        return None  # takes one idle cycle dynamically, never promoted
    return None


def _child_cost(prog: Program, comp: Component, node: ControlNode) -> int | None:
    return _node_cost(prog, comp, node)


# ============================================================
# Promotion
# ============================================================


def promote(prog: Program, config: PassConfig | None = None) -> Program:
    config = config or PassConfig()
    out = prog.clone()
    for comp in out.components:
        if comp.is_static:
            continue
        _promote_component(out, comp, config)
    return out


def _promote_component(prog: Program, comp: Component, config: PassConfig) -> None:
    enable_sites: dict[str, int] = {}
    for node in walk_control(comp.control):
        if isinstance(node, Enable):
            enable_sites[node.group] = enable_sites.get(node.group, 0) + 1
    # groups whose go is driven by wires have activations the control
    # tree cannot see; leave them alone
    wired: set[str] = set()
    assigns = list(comp.continuous)
    for g in list(comp.groups) + list(comp.static_groups):
        assigns.extend(g.assigns)
    for a in assigns:
        if a.dst.kind == HOLE and a.dst.port == "go":
            wired.add(a.dst.owner)

    def promotable(node: ControlNode) -> bool:
        if is_static(node):
            return True
        if isinstance(node, Enable):
            g = comp.group_map().get(node.group)
            return (
                g is not None
                and g.attrs.get("static") is not None
                and enable_sites.get(node.group, 0) == 1
                and node.group not in wired
            )
        if isinstance(node, (Seq, Par)):
            return all(promotable(c) for c in node.children)
        if isinstance(node, If):
            return promotable(node.tru) and promotable(node.fls)
        if isinstance(node, Repeat):
            return promotable(node.body)
        if isinstance(node, Invoke):
            return cell_latency(node.cell, comp, prog) is not None
        return False

    def static_latency(node: ControlNode) -> int:
        if is_static(node):
            return latency_of(node, comp, prog)
        if isinstance(node, Enable):
            return comp.group_map()[node.group].attrs["static"]
        if isinstance(node, Seq):
            return sum(static_latency(c) for c in node.children)
        if isinstance(node, Par):
            return max((static_latency(c) for c in node.children), default=0)
        if isinstance(node, If):
            return max(static_latency(node.tru), static_latency(node.fls))
        if isinstance(node, Repeat):
            return node.count * static_latency(node.body)
        if isinstance(node, Invoke):
            return cell_latency(node.cell, comp, prog)
        raise AssertionError(type(node))

    def island_size(node: ControlNode) -> int:
        size = 0
        for n in walk_control(node):
            if isinstance(n, (Enable, StaticEnable, Invoke, StaticInvoke)):
                size += 1
            elif isinstance(n, (If, StaticIf)):
                size += 1  # one condition port
        return size

    def convert_group(name: str) -> None:
        g = comp.group_map()[name]
        lat = g.attrs["static"]
        keep = [a for a in g.assigns if not (a.dst.kind == HOLE and a.dst.port == "done")]
        attrs = {k: v for k, v in g.attrs.items() if k != "static"}
        attrs["promoted"] = None
        comp.groups.remove(g)
        comp.static_groups.append(StaticGroup(g.name, lat, keep, attrs, span=g.span))

    def convert(node: ControlNode) -> ControlNode:
        if is_static(node):
            return node
        attrs = {k: v for k, v in node.attrs.items() if k != "static"}
        attrs["promoted"] = None
        if isinstance(node, Enable):
            convert_group(node.group)
            return StaticEnable(node.group, attrs=attrs, span=node.span)
        if isinstance(node, Seq):
            return StaticSeq([convert(c) for c in node.children], attrs=attrs, span=node.span)
        if isinstance(node, Par):
            return StaticPar([convert(c) for c in node.children], attrs=attrs, span=node.span)
        if isinstance(node, If):
            return StaticIf(node.cond, convert(node.tru), convert(node.fls), attrs=attrs, span=node.span)
        if isinstance(node, Repeat):
            return StaticRepeat(node.count, convert(node.body), attrs=attrs, span=node.span)
        if isinstance(node, Invoke):
            return StaticInvoke(node.cell, node.bindings, attrs=attrs, span=node.span)
        raise AssertionError(type(node))

    def walk(node: ControlNode) -> ControlNode:
        if is_static(node):
            return node
        predicted = node.attrs.get("static")
        if predicted is not None and promotable(node):
            lat = static_latency(node)
            if (
                island_size(node) >= config.promote_threshold
                and lat <= config.promote_max_cycles
                and lat + WRAPPER_DONE <= predicted
            ):
                return convert(node)
        # too large or unprofitable as a whole: promote children independently
        if isinstance(node, (Seq, Par)):
            node.children = [walk(c) for c in node.children]
        elif isinstance(node, If):
            node.tru = walk(node.tru)
            node.fls = walk(node.fls)
        elif isinstance(node, While):
            node.body = walk(node.body)
        elif isinstance(node, Repeat):
            node.body = walk(node.body)
        return node

    comp.control = walk(comp.control)


# ============================================================
# Schedule compaction
# ============================================================


def compact_schedule(prog: Program, config: PassConfig | None = None) -> Program:
    out = prog.clone()
    for comp in out.components:
        if comp.is_static:
            continue  # never reschedule code with a declared latency
        comp.control = _compact_node(out, comp, comp.control)
    return out


def _compact_node(prog: Program, comp: Component, node: ControlNode) -> ControlNode:
    if isinstance(node, (Seq, Par, StaticSeq, StaticPar)):
        node.children = [_compact_node(prog, comp, c) for c in node.children]
    elif isinstance(node, (If, StaticIf)):
        node.tru = _compact_node(prog, comp, node.tru)
        node.fls = _compact_node(prog, comp, node.fls)
    elif isinstance(node, While):
        node.body = _compact_node(prog, comp, node.body)
    elif isinstance(node, (Repeat, StaticRepeat)):
        node.body = _compact_node(prog, comp, node.body)

    eligible = (isinstance(node, Seq) or (isinstance(node, StaticSeq) and "promoted" in node.attrs))
    if not eligible or not isinstance(node, (Seq, StaticSeq)):
        return node
    children = node.children
    if len(children) < 2 or not all(is_static(c) for c in children):
        return node
    lats = [latency_of(c, comp, prog) for c in children]
    if any(l is None or l < 1 for l in lats):
        return node

    schedule = asap_schedule(
        lats, [_accesses(prog, comp, c) for c in children]
    )
    total = sum(lats)
    makespan = max(s + l for s, l in zip(schedule, lats))
    if makespan >= total:
        return node

    threads: list[ControlNode] = []
    for child, start in zip(children, schedule):
        if start == 0:
            threads.append(child)
        else:
            threads.append(StaticSeq([StaticEnable(_delay_group(comp, start)), child]))
    attrs = dict(node.attrs)
    attrs["promoted"] = None
    return StaticPar(threads, attrs=attrs, span=node.span)


def asap_schedule(latencies: list[int], accesses: list[tuple[set, set]]) -> list[int]:
    """As-soon-as-possible start cycles honoring data dependencies.

    An earlier child and a later child are dependent when they touch a
    common cell and at least one of them writes it; the later child then
    starts no earlier than the end of the earlier one. Ties keep original
    order purely by construction (list order is the topological order).
    """
    n = len(latencies)
    starts = [0] * n
    for j in range(n):
        rj, wj = accesses[j]
        for i in range(j):
            ri, wi = accesses[i]
            if (wi & wj) or (wi & rj) or (ri & wj):
                starts[j] = max(starts[j], starts[i] + latencies[i])
    return starts


def _accesses(prog: Program, comp: Component, node: ControlNode) -> tuple[set, set]:
    """(reads, writes) at whole-cell granularity for a static subtree."""
    reads: set = set()
    writes: set = set()
    group_names: list[str] = []
    for n in walk_control(node):
        if isinstance(n, (Enable, StaticEnable)):
            group_names.append(n.group)
        elif isinstance(n, (Invoke, StaticInvoke)):
            writes.add(("cell", n.cell))
            for _, atom in n.bindings:
                if isinstance(atom, PortRef) and atom.kind == CELL:
                    reads.add(("cell", atom.owner))
        if isinstance(n, (If, StaticIf, While)):
            cond = n.cond
            if cond.kind == CELL:
                reads.add(("cell", cond.owner))

    # include groups enabled through go-hole assignments
    all_groups = {g.name: g.assigns for g in comp.groups}
    all_groups.update({g.name: g.assigns for g in comp.static_groups})
    frontier = list(group_names)
    seen = set(frontier)
    while frontier:
        gname = frontier.pop()
        for a in all_groups.get(gname, ()):  # unknown names already diagnosed
            if a.dst.kind == HOLE and a.dst.port == "go" and a.dst.owner not in seen:
                seen.add(a.dst.owner)
                frontier.append(a.dst.owner)
    for gname in sorted(seen):
        for a in all_groups.get(gname, ()):
            if a.dst.kind == CELL:
                writes.add(("cell", a.dst.owner))
            elif a.dst.kind == IO:
                writes.add(("io", a.dst.port))
            for ref in ([a.src] if isinstance(a.src, PortRef) else []) + guard_ports(a.guard.expr):
                if ref.kind == CELL:
                    reads.add(("cell", ref.owner))
    return reads, writes


def _delay_group(comp: Component, latency: int) -> str:
    name = f"{DELAY_PREFIX}{latency}"
    if comp.find_group(name) is None:
        comp.static_groups.append(StaticGroup(name, latency, []))
    return name


# ============================================================
# Cell sharing
# ============================================================


def share_cells(prog: Program, config: PassConfig | None = None) -> Program:
    out = prog.clone()
    for comp in out.components:
        _share_component(out, comp)
    return out


class _Atom:
    """One use site of a cell: the control path to the enabling leaf and
    the cycle window of the accesses within the group (None = whole
    activation of a dynamic group)."""

    __slots__ = ("path", "window")

    def __init__(self, path: tuple, window: tuple[int, int] | None):
        self.path = path
        self.window = window


def _share_component(prog: Program, comp: Component) -> None:
    shareable = _shareable_cells(prog, comp)
    if not shareable:
        return

    # leaf sites: (leaf node, path); path steps are (node, child_idx)
    sites: list[tuple[ControlNode, tuple]] = []

    def walk(node: ControlNode, path: tuple) -> None:
        if isinstance(node, (Enable, StaticEnable, Invoke, StaticInvoke)):
            sites.append((node, path))
            return
        for i, c in enumerate(children_of(node)):
            walk(c, path + ((node, i),))

    walk(comp.control, ())

    occupancy: dict[str, list[_Atom]] = {name: [] for name in shareable}
    group_map = {g.name: (g, None) for g in comp.groups}
    group_map.update({g.name: (g, g.latency) for g in comp.static_groups})

    for leaf, path in sites:
        if isinstance(leaf, (Invoke, StaticInvoke)):
            for _, atom in leaf.bindings:
                if isinstance(atom, PortRef) and atom.kind == CELL and atom.owner in occupancy:
                    occupancy[atom.owner].append(_Atom(path + ((leaf, 0),), None))
            continue
        g, lat = group_map.get(leaf.group, (None, None))
        if g is None:
            continue
        hulls: dict[str, tuple[int, int] | None] = {}
        whole = (0, lat) if lat is not None else None
        for a in g.assigns:
            refs = [a.dst] + ([a.src] if isinstance(a.src, PortRef) else []) + guard_ports(a.guard.expr)
            win = a.guard.interval if (lat is not None and a.guard.interval is not None) else whole
            for ref in refs:
                if ref.kind == CELL and ref.owner in occupancy:
                    hulls[ref.owner] = _hull(hulls[ref.owner], win) if ref.owner in hulls else win
        for cname, win in hulls.items():
            occupancy[cname].append(_Atom(path + ((leaf, 0),), win))

    # first-fit merge within identical prototypes, declaration order
    by_proto: dict[tuple, list[Cell]] = {}
    for cell in comp.cells:
        if cell.name in shareable:
            by_proto.setdefault((cell.proto, tuple(cell.args)), []).append(cell)

    rename: dict[str, str] = {}
    for cells in by_proto.values():
        reps: list[tuple[Cell, list[_Atom]]] = []
        for cell in cells:
            atoms = occupancy[cell.name]
            placed = False
            for rep, rep_atoms in reps:
                if not any(_atoms_conflict(prog, comp, a, b) for a in atoms for b in rep_atoms):
                    rename[cell.name] = rep.name
                    rep_atoms.extend(atoms)
                    placed = True
                    break
            if not placed:
                reps.append((cell, list(atoms)))

    if not rename:
        return
    comp.cells = [c for c in comp.cells if c.name not in rename]
    for assigns in (
        [comp.continuous]
        + [g.assigns for g in comp.groups]
        + [g.assigns for g in comp.static_groups]
    ):
        for a in assigns:
            a.dst = _rename_ref(a.dst, rename)
            if isinstance(a.src, PortRef):
                a.src = _rename_ref(a.src, rename)
            a.guard = Guard(_rename_gexpr(a.guard.expr, rename), a.guard.interval)


def _hull(a: tuple[int, int] | None, b: tuple[int, int] | None) -> tuple[int, int] | None:
    if a is None or b is None:
        return None
    return (min(a[0], b[0]), max(a[1], b[1]))


def _shareable_cells(prog: Program, comp: Component) -> set[str]:
    candidates: set[str] = set()
    for cell in comp.cells:
        if "unshareable" in cell.attrs:
            continue
        decl = prog.extern_map().get(cell.proto)
        if decl is None:
            continue  # subcomponents are not shared
        if decl.shareable or "shareable" in cell.attrs:
            candidates.add(cell.name)
    if not candidates:
        return candidates

    # ambient uses pin a cell: continuous assignments, control conditions,
    # and groups that are activated through wires rather than control
    def drop_refs(refs):
        for ref in refs:
            if ref.kind == CELL:
                candidates.discard(ref.owner)

    for a in comp.continuous:
        drop_refs([a.dst] + ([a.src] if isinstance(a.src, PortRef) else []) + guard_ports(a.guard.expr))
    wired_groups: set[str] = set()
    all_assigns = []
    for g in list(comp.groups) + list(comp.static_groups):
        all_assigns.extend(g.assigns)
    for a in all_assigns:
        if a.dst.kind == HOLE and a.dst.port == "go":
            wired_groups.add(a.dst.owner)
    for node in walk_control(comp.control):
        if isinstance(node, (If, StaticIf, While)) and node.cond.kind == CELL:
            candidates.discard(node.cond.owner)
        if isinstance(node, (Invoke, StaticInvoke)):
            candidates.discard(node.cell)

    # a value produced in one group and consumed in another has a live
    # range we do not track; such cells stay put
    producers: dict[str, set[str]] = {}
    for g in list(comp.groups) + list(comp.static_groups):
        for a in g.assigns:
            if a.dst.kind == CELL:
                producers.setdefault(a.dst.owner, set()).add(g.name)
    for g in list(comp.groups) + list(comp.static_groups):
        gname = g.name
        for a in g.assigns:
            for ref in ([a.src] if isinstance(a.src, PortRef) else []) + guard_ports(a.guard.expr):
                if ref.kind == CELL and ref.owner in candidates:
                    if gname not in producers.get(ref.owner, set()):
                        candidates.discard(ref.owner)
        if gname in wired_groups:
            for a in g.assigns:
                refs = [a.dst] + ([a.src] if isinstance(a.src, PortRef) else []) + guard_ports(a.guard.expr)
                drop_refs(refs)
    return candidates


def _atoms_conflict(prog: Program, comp: Component, a: _Atom, b: _Atom) -> bool:
    pa, pb = a.path, b.path
    n = min(len(pa), len(pb))
    div = None
    for i in range(n):
        if pa[i][0] is not pb[i][0]:
            return True  # different subtrees sharing no scheduler: be safe
        if pa[i][1] != pb[i][1]:
            div = (pa[i][0], i)
            break
    if div is None:
        if pa[-1][0] is pb[-1][0]:
            return _windows_overlap(a.window, b.window)
        return True
    node, idx = div
    if isinstance(node, Par):
        return True
    if isinstance(node, (Seq, StaticSeq, If, StaticIf)):
        return False  # ordered or mutually exclusive
    if isinstance(node, StaticPar):
        wa = _absolute_window(prog, comp, pa, idx, a.window)
        wb = _absolute_window(prog, comp, pb, idx, b.window)
        return _windows_overlap(wa, wb)
    return True


def _windows_overlap(wa: tuple[int, int] | None, wb: tuple[int, int] | None) -> bool:
    if wa is None or wb is None:
        return True
    return wa[0] < wb[1] and wb[0] < wa[1]


def _absolute_window(
    prog: Program, comp: Component, path: tuple, from_idx: int, use: tuple[int, int] | None
) -> tuple[int, int] | None:
    """Cycle window of a use relative to the static par at path[from_idx]."""
    offset = 0
    stretch = 0  # repeated execution widens the window
    for node, child_idx in path[from_idx:]:
        if isinstance(node, (Seq,)):
            return None  # dynamic timing below a static par cannot happen, be safe
        if isinstance(node, StaticSeq):
            for c in node.children[:child_idx]:
                l = latency_of(c, comp, prog)
                if l is None:
                    return None
                offset += l
        elif isinstance(node, StaticRepeat):
            l = latency_of(node.body, comp, prog)
            if l is None:
                return None
            stretch += (node.count - 1) * l
        elif isinstance(node, (StaticPar, StaticIf)):
            pass
        elif isinstance(node, (Enable, StaticEnable, Invoke, StaticInvoke)):
            break
        else:
            return None
    if use is None:
        leaf = path[-1][0]
        if isinstance(leaf, (Invoke, StaticInvoke)):
            l = cell_latency(leaf.cell, comp, prog)
        else:
            sg = comp.static_group_map().get(leaf.group)
            l = sg.latency if sg else None
        if l is None:
            return None
        use = (0, l)
    return (offset + use[0], offset + use[1] + stretch)


def _rename_ref(ref: PortRef, rename: dict[str, str]) -> PortRef:
    if ref.kind == CELL and ref.owner in rename:
        return PortRef(rename[ref.owner], ref.port, CELL)
    return ref


def _rename_gexpr(expr, rename: dict[str, str]):
    from .ir import GAnd, GCmp, GNot, GOr, GPort, gand, gor

    if isinstance(expr, GPort):
        return GPort(_rename_ref(expr.ref, rename))
    if isinstance(expr, GCmp):
        lhs = _rename_ref(expr.lhs, rename) if isinstance(expr.lhs, PortRef) else expr.lhs
        rhs = _rename_ref(expr.rhs, rename) if isinstance(expr.rhs, PortRef) else expr.rhs
        return GCmp(expr.op, lhs, rhs)
    if isinstance(expr, GNot):
        return GNot(_rename_gexpr(expr.sub, rename))
    if isinstance(expr, GAnd):
        return GAnd(tuple(_rename_gexpr(s, rename) for s in expr.subs))
    if isinstance(expr, GOr):
        return GOr(tuple(_rename_gexpr(s, rename) for s in expr.subs))
    return expr
