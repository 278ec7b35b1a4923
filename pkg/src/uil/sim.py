"""Deterministic cycle-accurate interpreter for programs.

Each simulated cycle proceeds in two phases. First all port values settle
to a fixed point: continuous assignments, the assignments of every group
whose go signal is high, invoke argument bindings, and combinational
primitive outputs are re-evaluated until nothing changes. Undriven ports
read as 0. Then state commits: control machines observe done signals and
conditions, static group cycle counters advance, and registers, memories,
and arithmetic units apply their clock edge.

Dynamic control timing model. Group enables run until the cycle their
done signal is high (that cycle is part of the execution). The control
operators charge fixed overhead constants, documented here and relied on
by the latency inference pass:

  seq     SEQ_TRANSITION idle cycle between consecutive steps
  par     PAR_JOIN cycle after the last thread finishes
  if      COND_CHECK cycle to sample the condition before the branch
  while   COND_CHECK cycle before each iteration and after the last
  repeat  REPEAT_STEP cycle after each iteration
  invoke  no overhead; costs exactly the callee's control program

Static operators have no overhead: their timing is exactly the latency
algebra. A static group holds its timing-guard counter at the cycle
offset within its current execution; holding go high across a multiple of
the latency re-executes the group back to back with no gap.

Error conditions are surfaced as SimError subclasses: conflicting drives
of one port with different values, same-cycle accesses to one stateful
cell from diverging dynamic par threads with a write involved, failure of
the port fixed point, and cycle-limit overrun.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import primitives as prims
from .ir import (
    CELL,
    HOLE,
    IO,
    Assignment,
    Atom,
    Component,
    Const,
    ControlNode,
    Empty,
    Enable,
    GAnd,
    GCmp,
    GExpr,
    GNot,
    GOr,
    GPort,
    GTrue,
    If,
    Invoke,
    Par,
    PortRef,
    Program,
    Repeat,
    Seq,
    StaticEnable,
    StaticIf,
    StaticInvoke,
    StaticPar,
    StaticRepeat,
    StaticSeq,
    While,
    guard_ports,
    latency_of,
)

# Documented dynamic-control overhead constants (cycles).
SEQ_TRANSITION = 1
PAR_JOIN = 1
COND_CHECK = 1
REPEAT_STEP = 1
# A compiled wrapper raises done one cycle after its static body finishes.
WRAPPER_DONE = 1


class SimError(Exception):
    def __init__(self, message: str, cycle: int = -1):
        super().__init__(f"cycle {cycle}: {message}" if cycle >= 0 else message)
        self.cycle = cycle


class GuardConflict(SimError):
    pass


class DataRace(SimError):
    pass


class CombinationalDivergence(SimError):
    pass


class CycleLimitExceeded(SimError):
    pass


# ============================================================
# Traces
# ============================================================


@dataclass
class CycleRecord:
    cycle: int
    active: list[str]  # "instpath::group", sorted
    writes: list[tuple[str, str, str, int]]  # (instpath, cell, field, value)


@dataclass
class FinalState:
    outputs: dict[str, int]
    memories: dict[str, list[int]]
    # width per memory; presentation only, not part of state equality
    mem_widths: dict[str, int] = field(default_factory=dict, compare=False)

    def as_json(self) -> dict:
        """Memory dump in the same schema the initializer accepts."""
        return {
            "outputs": dict(self.outputs),
            "memories": {
                name: {
                    "width": self.mem_widths.get(name, 32),
                    "size": len(data),
                    "data": list(data),
                }
                for name, data in self.memories.items()
            },
        }


@dataclass
class Trace:
    cycles: int
    rows: list[CycleRecord]
    final: FinalState

    def active_span(self, pred) -> tuple[int, int] | None:
        """(first, last) cycle where pred matches an active group name."""
        first = last = None
        for row in self.rows:
            if any(pred(name) for name in row.active):
                if first is None:
                    first = row.cycle
                last = row.cycle
        if first is None:
            return None
        return (first, last)

    def dump_jsonl(self) -> str:
        out = []
        for row in self.rows:
            out.append(
                json.dumps(
                    {
                        "cycle": row.cycle,
                        "active": row.active,
                        "writes": [list(w) for w in row.writes],
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(out) + ("\n" if out else "")


# ============================================================
# Instances and compiled assignments
# ============================================================

_CMP = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}


class Instance:
    """One simulated occurrence of a component."""

    def __init__(self, sim: Simulation, comp: Component, path: str, parent: Instance | None):
        self.sim = sim
        self.comp = comp
        self.path = path
        self.parent = parent
        self.id = len(sim.instances)
        sim.instances.append(self)
        self.children: dict[str, Instance] = {}
        self.states: dict[str, prims.CellState] = {}
        self.comb_cells: list[tuple[str, str, list[int]]] = []  # (name, proto, args)
        self.phases: dict[str, int] = {}
        # auto machine: runs this instance's control when its go port is high
        # (static components only; dynamic components run via invoke)
        self.auto_machine = None

        cmap = sim.program.component_map()
        for cell in comp.cells:
            if cell.proto in cmap:
                child = Instance(sim, cmap[cell.proto], f"{path}{cell.name}/", self)
                self.children[cell.name] = child
            else:
                st = prims.make_state(cell.proto, cell.args)
                if st is None:
                    self.comb_cells.append((cell.name, cell.proto, cell.args))
                else:
                    self.states[cell.name] = st

        for sg in comp.static_groups:
            self.phases[sg.name] = 0

        # compiled assignment lists: (guardfn|None, dstkey, srcfn, info)
        self.continuous = [self._compile(a, None) for a in comp.continuous]
        self.group_assigns: dict[str, list] = {}
        self.group_go: dict[str, tuple] = {}
        for g in comp.groups:
            self.group_assigns[g.name] = [self._compile(a, None) for a in g.assigns]
            self.group_go[g.name] = (self.id, "@g:" + g.name, "go")
        for sg in comp.static_groups:
            self.group_assigns[sg.name] = [self._compile(a, sg.name) for a in sg.assigns]
            self.group_go[sg.name] = (self.id, "@g:" + sg.name, "go")

    # ---- compilation of ports, atoms, guards ----

    def key(self, ref: PortRef) -> tuple:
        if ref.kind == IO:
            return (self.id, "@io", ref.port)
        if ref.kind == HOLE:
            return (self.id, "@g:" + ref.owner, ref.port)
        child = self.children.get(ref.owner)
        if child is not None:
            return (child.id, "@io", ref.port)
        return (self.id, ref.owner, ref.port)

    def srcfn(self, atom: Atom):
        if isinstance(atom, Const):
            v = atom.value
            return lambda vals: v
        k = self.key(atom)
        return lambda vals: vals.get(k, 0)

    def guardfn(self, expr: GExpr):
        """Compile a guard expression; returns None for constant true."""
        if isinstance(expr, GTrue):
            return None
        if isinstance(expr, GPort):
            k = self.key(expr.ref)
            return lambda vals: vals.get(k, 0) == 1
        if isinstance(expr, GCmp):
            lf, rf = self.srcfn(expr.lhs), self.srcfn(expr.rhs)
            op = _CMP[expr.op]
            return lambda vals: op(lf(vals), rf(vals))
        if isinstance(expr, GNot):
            sub = self.guardfn(expr.sub)
            if sub is None:
                return lambda vals: False
            return lambda vals: not sub(vals)
        if isinstance(expr, GAnd):
            subs = [self.guardfn(s) for s in expr.subs]
            subs = [s for s in subs if s is not None]
            return lambda vals: all(s(vals) for s in subs)
        if isinstance(expr, GOr):
            subs = [self.guardfn(s) for s in expr.subs]
            return lambda vals: any(s is None or s(vals) for s in subs)
        raise TypeError(expr)

    def _compile(self, a: Assignment, static_group: str | None):
        dstkey = self.key(a.dst)
        srcfn = self.srcfn(a.src)
        efn = self.guardfn(a.guard.expr)
        interval = a.guard.interval
        if static_group is not None and interval is not None:
            lo, hi = interval
            phases = self.phases
            gname = static_group
            if efn is None:
                gfn = lambda vals: lo <= phases[gname] < hi
            else:
                base = efn
                gfn = lambda vals: lo <= phases[gname] < hi and base(vals)
        else:
            gfn = efn
        # cells whose stateful outputs this assignment reads (for races)
        reads: list[tuple] = []
        for ref in self._read_refs(a):
            k = self.key(ref)
            if k[1] not in ("@io",) and not k[1].startswith("@g:"):
                reads.append(k)
        return (gfn, dstkey, srcfn, a, reads)

    def _read_refs(self, a: Assignment) -> list[PortRef]:
        refs = []
        if isinstance(a.src, PortRef):
            refs.append(a.src)
        refs.extend(guard_ports(a.guard.expr))
        return refs


# ============================================================
# Control machines
# ============================================================


class DriveSink:
    """Per-cycle accumulator of control-driven signals.

    Guard closures pushed on the stack wrap everything collected beneath
    them (used by static if before its condition is latched).
    """

    def __init__(self):
        self.go_drives: list[tuple[tuple, object, tuple]] = []  # (key, guardfn, path)
        self.binds: list[tuple[object, tuple, object, tuple]] = []  # (guardfn, dst, srcfn, path)
        self.accesses: list[tuple[tuple, tuple]] = []  # ((instid, cell), path)
        self._guards: list[object] = []

    def push_guard(self, fn) -> None:
        self._guards.append(fn)

    def pop_guard(self) -> None:
        self._guards.pop()

    def _wrap(self, fn):
        stack = [g for g in self._guards if g is not None]
        if not stack:
            return fn
        if fn is None:
            if len(stack) == 1:
                return stack[0]
            snap = list(stack)
            return lambda vals: all(g(vals) for g in snap)
        snap = list(stack)
        return lambda vals: all(g(vals) for g in snap) and fn(vals)

    def go(self, key: tuple, path: tuple, guardfn=None) -> None:
        self.go_drives.append((key, self._wrap(guardfn), path))

    def bind(self, dstkey: tuple, srcfn, path: tuple, guardfn=None) -> None:
        self.binds.append((self._wrap(guardfn), dstkey, srcfn, path))

    def access(self, cellkey: tuple, path: tuple) -> None:
        self.accesses.append((cellkey, path))


class Machine:
    def collect(self, sink: DriveSink) -> None:
        pass

    def commit(self, read) -> bool:
        raise NotImplementedError


class EmptyM(Machine):
    def commit(self, read) -> bool:
        return True  # consumes the single cycle it was scheduled in


class EnableM(Machine):
    def __init__(self, sim, inst: Instance, group: str, path: tuple):
        self.gokey = inst.group_go[group]
        self.donekey = (inst.id, "@g:" + group, "done")
        self.path = path

    def collect(self, sink):
        sink.go(self.gokey, self.path)

    def commit(self, read) -> bool:
        return read(self.donekey) == 1


class StaticEnableM(Machine):
    def __init__(self, sim, inst: Instance, group: str, path: tuple):
        self.gokey = inst.group_go[group]
        self.latency = inst.comp.static_group_map()[group].latency
        self.path = path
        self.n = 0

    def collect(self, sink):
        sink.go(self.gokey, self.path)

    def commit(self, read) -> bool:
        self.n += 1
        return self.n >= self.latency


class SeqM(Machine):
    def __init__(self, sim, inst, children, path):
        self.sim, self.inst, self.children, self.path = sim, inst, children, path
        self.idx = 0
        self.transitioning = False
        self.cur = make_machine(sim, inst, children[0], path) if children else None

    def collect(self, sink):
        if self.cur is not None and not self.transitioning:
            self.cur.collect(sink)

    def commit(self, read) -> bool:
        if self.cur is None:
            return True
        if self.transitioning:
            self.transitioning = False
            self.cur = make_machine(self.sim, self.inst, self.children[self.idx], self.path)
            return False
        if self.cur.commit(read):
            self.idx += 1
            if self.idx >= len(self.children):
                return True
            self.transitioning = True  # SEQ_TRANSITION idle cycle
        return False


class ParM(Machine):
    def __init__(self, sim, inst, children, path, node_id):
        self.machines = [
            make_machine(sim, inst, c, path + ((node_id, i, True),)) for i, c in enumerate(children)
        ]
        self.done = [False] * len(self.machines)
        self.all_done = not self.machines

    def collect(self, sink):
        for m, d in zip(self.machines, self.done):
            if not d:
                m.collect(sink)

    def commit(self, read) -> bool:
        if self.all_done:
            return True  # PAR_JOIN cycle
        for i, m in enumerate(self.machines):
            if not self.done[i] and m.commit(read):
                self.done[i] = True
        self.all_done = all(self.done)
        return False


class IfM(Machine):
    def __init__(self, sim, inst, node: If, path):
        self.sim, self.inst, self.node, self.path = sim, inst, node, path
        self.condkey = inst.key(node.cond)
        self.branch: Machine | None = None
        self.checked = False

    def collect(self, sink):
        if self.checked and self.branch is not None:
            self.branch.collect(sink)

    def commit(self, read) -> bool:
        if not self.checked:
            self.checked = True  # COND_CHECK cycle
            taken = self.node.tru if read(self.condkey) == 1 else self.node.fls
            if isinstance(taken, Empty):
                return True
            self.branch = make_machine(self.sim, self.inst, taken, self.path)
            return False
        return self.branch.commit(read)


class WhileM(Machine):
    def __init__(self, sim, inst, node: While, path):
        self.sim, self.inst, self.node, self.path = sim, inst, node, path
        self.condkey = inst.key(node.cond)
        self.body: Machine | None = None

    def collect(self, sink):
        if self.body is not None:
            self.body.collect(sink)

    def commit(self, read) -> bool:
        if self.body is None:  # COND_CHECK cycle
            if read(self.condkey) != 1:
                return True
            self.body = make_machine(self.sim, self.inst, self.node.body, self.path)
            return False
        if self.body.commit(read):
            self.body = None  # next cycle re-checks the condition
        return False


class RepeatM(Machine):
    def __init__(self, sim, inst, node: Repeat, path):
        self.sim, self.inst, self.node, self.path = sim, inst, node, path
        self.iters = 0
        self.stepping = False
        self.body = make_machine(sim, inst, node.body, path) if node.count > 0 else None

    def collect(self, sink):
        if self.body is not None and not self.stepping:
            self.body.collect(sink)

    def commit(self, read) -> bool:
        if self.body is None:
            return True
        if self.stepping:  # REPEAT_STEP cycle
            self.stepping = False
            self.iters += 1
            if self.iters >= self.node.count:
                return True
            self.body = make_machine(self.sim, self.inst, self.node.body, self.path)
            return False
        if self.body.commit(read):
            self.stepping = True
        return False


class InvokeM(Machine):
    """Dynamic invoke of a component cell or a handshake primitive."""

    def __init__(self, sim, inst: Instance, node: Invoke, path):
        self.path = path
        self.cellkey = (inst.id, node.cell)
        self.binds = [
            ((inst.children[node.cell].id, "@io", p) if node.cell in inst.children else (inst.id, node.cell, p), inst.srcfn(a))
            for p, a in node.bindings
        ]
        child = inst.children.get(node.cell)
        if child is not None:
            self.child_machine = make_machine(sim, child, child.comp.control, path)
            self.donekey = None
            self.gokey = None
        else:
            self.child_machine = None
            decl = sim.program.extern_map()[inst.comp.cell_map()[node.cell].proto]
            go = next(p.name for p in decl.ports if p.role == "go")
            self.gokey = (inst.id, node.cell, go)
            self.donekey = (inst.id, node.cell, "done")

    def collect(self, sink):
        sink.access(self.cellkey, self.path)
        for dst, fn in self.binds:
            sink.bind(dst, fn, self.path)
        if self.child_machine is not None:
            self.child_machine.collect(sink)
        else:
            sink.go(self.gokey, self.path)

    def commit(self, read) -> bool:
        if self.child_machine is not None:
            return self.child_machine.commit(read)
        return read(self.donekey) == 1


class StaticInvokeM(Machine):
    """Static invoke: drive the callee's go and arguments for its latency."""

    def __init__(self, sim, inst: Instance, node: StaticInvoke, path):
        self.path = path
        self.cellkey = (inst.id, node.cell)
        child = inst.children.get(node.cell)
        if child is not None:
            self.gokey = (child.id, "@io", "go")
            self.latency = child.comp.declared_latency
            binds = [((child.id, "@io", p), inst.srcfn(a)) for p, a in node.bindings]
        else:
            cell = inst.comp.cell_map()[node.cell]
            decl = sim.program.extern_map()[cell.proto]
            go = next(p.name for p in decl.ports if p.role == "go")
            self.gokey = (inst.id, node.cell, go)
            self.latency = decl.latency
            binds = [((inst.id, node.cell, p), inst.srcfn(a)) for p, a in node.bindings]
        self.binds = binds
        self.n = 0

    def collect(self, sink):
        sink.access(self.cellkey, self.path)
        sink.go(self.gokey, self.path)
        for dst, fn in self.binds:
            sink.bind(dst, fn, self.path)

    def commit(self, read) -> bool:
        self.n += 1
        return self.n >= self.latency


class StaticSeqM(Machine):
    def __init__(self, sim, inst, children, path):
        comp, prog = inst.comp, sim.program
        self.sim, self.inst, self.path = sim, inst, path
        self.children = [c for c in children if latency_of(c, comp, prog) != 0]
        self.idx = 0
        self.cur = make_machine(sim, inst, self.children[0], path) if self.children else None

    def collect(self, sink):
        if self.cur is not None:
            self.cur.collect(sink)

    def commit(self, read) -> bool:
        if self.cur is None:
            return True
        if self.cur.commit(read):
            self.idx += 1
            if self.idx >= len(self.children):
                return True
            self.cur = make_machine(self.sim, self.inst, self.children[self.idx], self.path)
        return False


class StaticParM(Machine):
    def __init__(self, sim, inst, children, path, node_id):
        comp, prog = inst.comp, sim.program
        self.total = max((latency_of(c, comp, prog) for c in children), default=0)
        live = [(i, c) for i, c in enumerate(children) if latency_of(c, comp, prog) != 0]
        self.machines = [
            make_machine(sim, inst, c, path + ((node_id, i, False),)) for i, c in live
        ]
        self.done = [False] * len(self.machines)
        self.n = 0

    def collect(self, sink):
        for m, d in zip(self.machines, self.done):
            if not d:
                m.collect(sink)

    def commit(self, read) -> bool:
        for i, m in enumerate(self.machines):
            if not self.done[i]:
                self.done[i] = m.commit(read)
        self.n += 1
        return self.n >= self.total


class StaticIfM(Machine):
    """Runs for max(|tru|, |fls|) cycles. The condition is read on cycle 0
    only: during that cycle both branches' drives are emitted, wrapped in
    the condition and its negation; afterwards only the latched branch."""

    def __init__(self, sim, inst, node: StaticIf, path):
        comp, prog = inst.comp, sim.program
        self.sim, self.inst, self.node, self.path = sim, inst, node, path
        self.condkey = inst.key(node.cond)
        self.total = max(latency_of(node.tru, comp, prog), latency_of(node.fls, comp, prog))
        self.tru_m = None if latency_of(node.tru, comp, prog) == 0 else make_machine(sim, inst, node.tru, path)
        self.fls_m = None if latency_of(node.fls, comp, prog) == 0 else make_machine(sim, inst, node.fls, path)
        self.taken: Machine | None = None
        self.taken_done = False
        self.n = 0

    def collect(self, sink):
        if self.n == 0:
            k = self.condkey
            if self.tru_m is not None:
                sink.push_guard(lambda vals: vals.get(k, 0) == 1)
                self.tru_m.collect(sink)
                sink.pop_guard()
            if self.fls_m is not None:
                sink.push_guard(lambda vals: vals.get(k, 0) != 1)
                self.fls_m.collect(sink)
                sink.pop_guard()
        elif self.taken is not None and not self.taken_done:
            self.taken.collect(sink)

    def commit(self, read) -> bool:
        if self.n == 0:
            self.taken = self.tru_m if read(self.condkey) == 1 else self.fls_m
        if self.taken is not None and not self.taken_done:
            self.taken_done = self.taken.commit(read)
        self.n += 1
        return self.n >= self.total


class StaticRepeatM(Machine):
    def __init__(self, sim, inst, node: StaticRepeat, path):
        self.sim, self.inst, self.node, self.path = sim, inst, node, path
        self.iters = 0
        self.body = make_machine(sim, inst, node.body, path) if node.count > 0 else None

    def collect(self, sink):
        if self.body is not None:
            self.body.collect(sink)

    def commit(self, read) -> bool:
        if self.body is None:
            return True
        if self.body.commit(read):
            self.iters += 1
            if self.iters >= self.node.count:
                return True
            self.body = make_machine(self.sim, self.inst, self.node.body, self.path)
        return False


def make_machine(sim, inst: Instance, node: ControlNode, path: tuple) -> Machine:
    if isinstance(node, Empty):
        return EmptyM()
    if isinstance(node, Enable):
        return EnableM(sim, inst, node.group, path)
    if isinstance(node, StaticEnable):
        return StaticEnableM(sim, inst, node.group, path)
    if isinstance(node, Seq):
        return SeqM(sim, inst, node.children, path)
    if isinstance(node, Par):
        return ParM(sim, inst, node.children, path, id(node))
    if isinstance(node, If):
        return IfM(sim, inst, node, path)
    if isinstance(node, While):
        return WhileM(sim, inst, node, path)
    if isinstance(node, Repeat):
        return RepeatM(sim, inst, node, path)
    if isinstance(node, Invoke):
        return InvokeM(sim, inst, node, path)
    if isinstance(node, StaticSeq):
        return StaticSeqM(sim, inst, node.children, path)
    if isinstance(node, StaticPar):
        return StaticParM(sim, inst, node.children, path, id(node))
    if isinstance(node, StaticIf):
        return StaticIfM(sim, inst, node, path)
    if isinstance(node, StaticRepeat):
        return StaticRepeatM(sim, inst, node, path)
    if isinstance(node, StaticInvoke):
        return StaticInvokeM(sim, inst, node, path)
    raise TypeError(node)


# ============================================================
# The simulation driver
# ============================================================

DEFAULT_CYCLE_LIMIT = 1_000_000


class Simulation:
    def __init__(
        self,
        program: Program,
        entry: str | None = None,
        data: dict | None = None,
        cycle_limit: int = DEFAULT_CYCLE_LIMIT,
        record_trace: bool = True,
    ):
        self.program = program
        self.cycle_limit = cycle_limit
        self.record_trace = record_trace
        self.instances: list[Instance] = []
        entry_name = entry or program.entry
        self.entry = Instance(self, program.component_map()[entry_name], "/", None)
        self.cycle = 0
        self._init_data(data or {})
        self.entry_inputs = {
            (self.entry.id, "@io", name): int(value)
            for name, value in (data or {}).get("inputs", {}).items()
        }
        self.entry_machine = make_machine(self, self.entry, self.entry.comp.control, ())
        total_assigns = sum(
            len(i.continuous) + sum(len(v) for v in i.group_assigns.values()) for i in self.instances
        )
        self.max_rounds = total_assigns + sum(len(i.comb_cells) + len(i.states) for i in self.instances) + 16

    def _init_data(self, data: dict) -> None:
        mems = data.get("memories", {})
        states = self.entry.states
        for name, spec in mems.items():
            st = states.get(name)
            if not isinstance(st, prims.MemState):
                raise SimError(f"no memory named {name!r} in entry component")
            vals = spec["data"]
            if len(vals) != st.size:
                raise SimError(f"memory {name!r} expects {st.size} values, got {len(vals)}")
            if "width" in spec and spec["width"] != st.width:
                raise SimError(f"memory {name!r} is {st.width} bits wide, data says {spec['width']}")
            st.data = [v & prims.mask(st.width) for v in vals]

    # ---- per-cycle evaluation ----

    def _settle(self, sink: DriveSink):
        base: dict = dict(self.entry_inputs)
        for inst in self.instances:
            for cname, st in inst.states.items():
                for pname, v in st.outputs().items():
                    base[(inst.id, cname, pname)] = v

        vals = base
        final_sources = None
        final_conflicts = None
        for _ in range(self.max_rounds):
            drives: dict = {}
            sources: dict = {}
            conflicts: list[tuple] = []

            def put(key, value, who):
                if key in drives and drives[key] != value:
                    # only real once the fixed point is reached
                    conflicts.append((key, drives[key], value))
                    return
                drives[key] = value
                sources.setdefault(key, []).append(who)

            for key, gfn, path in sink.go_drives:
                if gfn is None or gfn(vals):
                    put(key, 1, ("ctrl", path))
            for gfn, dst, srcfn, path in sink.binds:
                if gfn is None or gfn(vals):
                    put(dst, srcfn(vals), ("bind", path))

            for inst in self.instances:
                for entry in inst.continuous:
                    gfn, dst, srcfn = entry[0], entry[1], entry[2]
                    if gfn is None or gfn(vals):
                        put(dst, srcfn(vals), ("asgn", inst, None, entry))
                for gname, assigns in inst.group_assigns.items():
                    if vals.get((inst.id, "@g:" + gname, "go"), 0) != 1:
                        continue
                    for entry in assigns:
                        gfn, dst, srcfn = entry[0], entry[1], entry[2]
                        if gfn is None or gfn(vals):
                            put(dst, srcfn(vals), ("asgn", inst, gname, entry))
                for cname, proto, args in inst.comb_cells:
                    decl = prims.BUILTIN_MAP[proto]
                    ins = {
                        p.name: vals.get((inst.id, cname, p.name), 0)
                        for p in decl.ports
                        if p.direction == "in"
                    }
                    for pname, v in prims.comb_eval(proto, args, ins).items():
                        w = prims.port_width(decl, args, pname)
                        put((inst.id, cname, pname), v & prims.mask(w), ("comb", inst, cname))
                for cname, st in inst.states.items():
                    done_src = getattr(st, "COMB_DONE", None)
                    if done_src is not None:
                        put(
                            (inst.id, cname, "done"),
                            1 if vals.get((inst.id, cname, done_src), 0) else 0,
                            ("comb", inst, cname),
                        )
                    if isinstance(st, prims.MemState):
                        addr = vals.get((inst.id, cname, "addr0"), 0)
                        v = st.data[addr] if addr < st.size else 0
                        put((inst.id, cname, "read_data"), v, ("comb", inst, cname))

            newvals = dict(base)
            newvals.update(drives)
            if newvals == vals:
                final_sources = sources
                final_conflicts = conflicts
                break
            vals = newvals
        else:
            raise CombinationalDivergence("port values did not reach a fixed point", self.cycle)

        # out-of-bounds reads only count once values are settled
        for inst in self.instances:
            for cname, st in inst.states.items():
                if isinstance(st, prims.MemState):
                    addr = vals.get((inst.id, cname, "addr0"), 0)
                    if addr >= st.size and self._mem_read_used(inst, cname, final_sources):
                        raise SimError(
                            f"memory {inst.path}{cname} read address {addr} out of bounds",
                            self.cycle,
                        )
        return vals, final_sources, final_conflicts

    def _mem_read_used(self, inst: Instance, cname: str, sources: dict) -> bool:
        # The combinational read value was consumed by some fired assignment.
        key = (inst.id, cname, "read_data")
        for dkey, whos in sources.items():
            for who in whos:
                if who[0] == "asgn":
                    entry = who[3]
                    if key in entry[4] or (isinstance(entry[3].src, PortRef) and inst.key(entry[3].src) == key):
                        return True
        return False

    def _key_name(self, key: tuple) -> str:
        inst = self.instances[key[0]]
        owner = key[1]
        if owner == "@io":
            return f"{inst.path}{key[2]}"
        if owner.startswith("@g:"):
            return f"{inst.path}{owner[3:]}[{key[2]}]"
        return f"{inst.path}{owner}.{key[2]}"

    def _check_races(self, vals: dict, sources: dict, sink: DriveSink) -> None:
        # group -> owning thread path, control-driven first,
        # then propagated through go-hole assignments
        gpaths: dict[tuple, tuple] = {}
        for key, gfn, path in sink.go_drives:
            if vals.get(key, 0) == 1:
                gpaths.setdefault((key[0], key[1]), path)
        for _ in range(len(self.instances) + 4):
            changed = False
            for dkey, whos in sources.items():
                if not dkey[1].startswith("@g:") or dkey[2] != "go":
                    continue
                for who in whos:
                    if who[0] == "asgn" and who[2] is not None:
                        owner = (who[1].id, "@g:" + who[2])
                        tgt = (dkey[0], dkey[1])
                        if owner in gpaths and tgt not in gpaths:
                            gpaths[tgt] = gpaths[owner]
                            changed = True
            if not changed:
                break

        accesses: dict[tuple, list[tuple[tuple, bool]]] = {}

        def add(cellkey, path, is_write):
            if path is not None:
                accesses.setdefault(cellkey, []).append((path, is_write))

        for cellkey, path in sink.accesses:
            add(cellkey, path, True)

        for dkey, whos in sources.items():
            for who in whos:
                if who[0] != "asgn":
                    continue
                inst, gname, entry = who[1], who[2], who[3]
                if gname is None:
                    continue  # continuous assignments belong to no thread
                path = gpaths.get((inst.id, "@g:" + gname))
                if path is None:
                    continue
                tinst = self.instances[dkey[0]]
                if dkey[1] in tinst.states:
                    st = tinst.states[dkey[1]]
                    ins = self._cell_inputs(tinst, dkey[1], vals)
                    add((dkey[0], dkey[1]), path, st.is_written(ins))
                for rkey in entry[4]:
                    rinst = self.instances[rkey[0]]
                    if rkey[1] in rinst.states:
                        add((rkey[0], rkey[1]), path, False)

        for cellkey, accs in accesses.items():
            for i in range(len(accs)):
                for j in range(i + 1, len(accs)):
                    (p1, w1), (p2, w2) = accs[i], accs[j]
                    if not (w1 or w2) or p1 == p2:
                        continue
                    if _diverge_at_dynamic_par(p1, p2):
                        raise DataRace(
                            f"stateful cell {self._key_name((cellkey[0], cellkey[1], ''))[:-1]} "
                            "accessed from parallel dynamic threads with a write",
                            self.cycle,
                        )

    def _cell_inputs(self, inst: Instance, cname: str, vals: dict) -> dict[str, int]:
        cell = inst.comp.cell_map()[cname]
        decl = self.program.extern_map()[cell.proto]
        return {
            p.name: vals.get((inst.id, cname, p.name), 0) for p in decl.ports if p.direction == "in"
        }

    # ---- main loop ----

    def run(self) -> Trace:
        rows: list[CycleRecord] = []
        finished = False
        while not finished:
            if self.cycle >= self.cycle_limit:
                raise CycleLimitExceeded(f"exceeded cycle limit {self.cycle_limit}", self.cycle)
            sink = DriveSink()
            self.entry_machine.collect(sink)
            for inst in self.instances:
                self._collect_auto(inst, sink)
            vals, sources, conflicts = self._settle(sink)
            # a write/write clash on a stateful cell is reported as a race,
            # so races are checked before plain drive conflicts
            self._check_races(vals, sources, sink)
            if conflicts:
                key, v1, v2 = conflicts[0]
                raise GuardConflict(
                    f"port {self._key_name(key)} driven with both {v1} and {v2}", self.cycle
                )

            read = lambda key: vals.get(key, 0)
            finished = self.entry_machine.commit(read)
            for inst in self.instances:
                self._commit_auto(inst, read)

            writes: list[tuple[str, str, str, int]] = []
            for inst in self.instances:
                for gname in inst.group_assigns:
                    go = vals.get((inst.id, "@g:" + gname, "go"), 0)
                    if gname in inst.phases:
                        ph = inst.phases[gname]
                        lat = inst.comp.static_group_map()[gname].latency
                        inst.phases[gname] = (ph + 1) % lat if go == 1 else 0
                for cname, st in inst.states.items():
                    ins = self._cell_inputs(inst, cname, vals)
                    try:
                        for fieldname, v in st.commit(ins):
                            writes.append((inst.path, cname, fieldname, v))
                    except prims.SimOutOfBounds as e:
                        raise SimError(f"memory {inst.path}{cname}: {e}", self.cycle)

            if self.record_trace:
                active = sorted(
                    f"{inst.path}{g}"
                    for inst in self.instances
                    for g in inst.group_assigns
                    if vals.get((inst.id, "@g:" + g, "go"), 0) == 1
                )
                rows.append(CycleRecord(self.cycle, active, sorted(writes)))
            self.cycle += 1

        # observable outputs are read after completion, once the final
        # state commits have landed
        vals, _, _ = self._settle(DriveSink())
        outputs = {p.name: vals.get((self.entry.id, "@io", p.name), 0) for p in self.entry.comp.outputs}
        memories = {
            name: list(st.data)
            for name, st in self.entry.states.items()
            if isinstance(st, prims.MemState)
        }
        widths = {
            name: st.width
            for name, st in self.entry.states.items()
            if isinstance(st, prims.MemState)
        }
        return Trace(self.cycle, rows, FinalState(outputs, memories, widths))

    def _collect_auto(self, inst: Instance, sink: DriveSink) -> None:
        if inst.parent is None or not inst.comp.is_static:
            return
        gokey = (inst.id, "@io", "go")
        if inst.auto_machine is None:
            inst.auto_machine = make_machine(self, inst, inst.comp.control, ())
        sink.push_guard(lambda vals: vals.get(gokey, 0) == 1)
        inst.auto_machine.collect(sink)
        sink.pop_guard()

    def _commit_auto(self, inst: Instance, read) -> None:
        if inst.parent is None or not inst.comp.is_static or inst.auto_machine is None:
            return
        if read((inst.id, "@io", "go")) == 1:
            if inst.auto_machine.commit(read):
                inst.auto_machine = None  # rearmed for back-to-back runs
        else:
            inst.auto_machine = None  # dropping go abandons a partial run


def _diverge_at_dynamic_par(p1: tuple, p2: tuple) -> bool:
    for (a_node, a_idx, a_dyn), (b_node, b_idx, b_dyn) in zip(p1, p2):
        if a_node != b_node:
            return False
        if a_idx != b_idx:
            return a_dyn
    return False


# ============================================================
# Public entry points
# ============================================================


def simulate(
    program: Program,
    entry: str | None = None,
    data: dict | None = None,
    cycle_limit: int = DEFAULT_CYCLE_LIMIT,
    record_trace: bool = True,
) -> Trace:
    return Simulation(program, entry, data, cycle_limit, record_trace).run()


@dataclass
class Verdict:
    ok: bool
    cycles_before: int | None
    cycles_after: int | None
    message: str = ""


def check_refinement(
    program: Program, refined: Program, data: dict | None = None, cycle_limit: int = DEFAULT_CYCLE_LIMIT
) -> Verdict:
    """Simulate both programs; OK iff the final observable states agree.

    Observable state is the entry component's memories and output ports.
    Cycle counts for both runs are always reported on success.
    """
    try:
        t1 = simulate(program, data=data, cycle_limit=cycle_limit, record_trace=False)
    except SimError as e:
        return Verdict(False, None, None, f"original failed: {e}")
    try:
        t2 = simulate(refined, data=data, cycle_limit=cycle_limit, record_trace=False)
    except SimError as e:
        return Verdict(False, t1.cycles, None, f"refined failed: {e}")
    if t1.final != t2.final:
        return Verdict(False, t1.cycles, t2.cycles, "observable states differ")
    return Verdict(True, t1.cycles, t2.cycles)
