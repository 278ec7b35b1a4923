"""Randomized differential testing.

gen_program builds a random but well-formed terminating program from a
seed: a mix of 1-cycle register groups, known-latency multiply groups,
variable-latency divide groups, hand-written static groups and islands,
and control trees using seq/par/if/while/repeat. Parallel threads touch
disjoint registers so the generated code is race free; while loops count
a dedicated register up to a fixed bound so every run terminates.

run_trial compiles one generated program through the baseline pipeline
and through promotion (plus any extra pipelines), simulates everything,
and checks that observable state is identical everywhere and that the
promoted build is never slower than the baseline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ir import (
    CELL,
    HOLE,
    Assignment,
    Cell,
    Component,
    Const,
    ControlNode,
    Enable,
    GTRUE,
    Group,
    Guard,
    If,
    Par,
    PortDecl,
    PortRef,
    Program,
    Repeat,
    Seq,
    StaticEnable,
    StaticGroup,
    StaticIf,
    StaticPar,
    StaticRepeat,
    StaticSeq,
    While,
    io_port,
)
from .lower import PassConfig
from .pipeline import LOWER_PASSES, PRESETS, run_pipeline
from .primitives import BUILTINS
from .sim import SimError, simulate
from .validate import validate

WIDTH = 8


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.cells: list[Cell] = []
        self.groups: list[Group] = []
        self.static_groups: list[StaticGroup] = []
        self.continuous: list[Assignment] = []
        self.counter = 0
        self.regs: list[str] = []

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    def new_reg(self) -> str:
        name = self.fresh("r")
        self.cells.append(Cell(name, "std_reg", [WIDTH]))
        self.regs.append(name)
        return name

    def new_cell(self, proto: str, args: list[int]) -> str:
        name = self.fresh(proto.removeprefix("std_") + "_")
        self.cells.append(Cell(name, proto, args))
        return name

    def out(self, cell: str, port: str = "out") -> PortRef:
        return PortRef(cell, port, CELL)

    def const(self, value: int, width: int = WIDTH) -> Const:
        return Const(width, value % (1 << width))

    # ---- leaf groups ----

    def reg_group(self, pool: list[str]) -> ControlNode:
        """1-cycle group: dst <- src + k through a fresh adder."""
        rng = self.rng
        dst = rng.choice(pool)
        src = rng.choice(pool)
        add = self.new_cell("std_cadd", [WIDTH])
        name = self.fresh("wr")
        assigns = [
            Assignment(PortRef(add, "left", CELL), self.out(src)),
            Assignment(PortRef(add, "right", CELL), self.const(rng.randrange(1, 17))),
            Assignment(PortRef(dst, "in", CELL), self.out(add)),
            Assignment(PortRef(dst, "write_en", CELL), Const(1, 1)),
            Assignment(PortRef(name, "done", HOLE), self.out(dst, "done")),
        ]
        self.groups.append(Group(name, assigns))
        return Enable(name)

    def mult_group(self, pool: list[str]) -> ControlNode:
        rng = self.rng
        dst = rng.choice(pool)
        src = rng.choice(pool)
        md = self.new_cell("std_mult_dyn", [WIDTH])
        name = self.fresh("mul")
        assigns = [
            Assignment(PortRef(md, "left", CELL), self.out(src)),
            Assignment(PortRef(md, "right", CELL), self.const(rng.randrange(1, 8))),
            Assignment(PortRef(md, "go", CELL), Const(1, 1)),
            Assignment(PortRef(dst, "in", CELL), self.out(md)),
            Assignment(PortRef(dst, "write_en", CELL), self.out(md, "done")),
            Assignment(PortRef(name, "done", HOLE), self.out(dst, "done")),
        ]
        self.groups.append(Group(name, assigns))
        return Enable(name)

    def div_group(self, pool: list[str]) -> ControlNode:
        rng = self.rng
        dst = rng.choice(pool)
        src = rng.choice(pool)
        dv = self.new_cell("std_div", [WIDTH])
        name = self.fresh("dv")
        divisor = rng.choice([0, 2, 3, 5, 7])
        assigns = [
            Assignment(PortRef(dv, "left", CELL), self.out(src)),
            Assignment(PortRef(dv, "right", CELL), self.const(divisor)),
            Assignment(PortRef(dv, "go", CELL), Const(1, 1)),
            Assignment(PortRef(dst, "in", CELL), self.out(dv)),
            Assignment(PortRef(dst, "write_en", CELL), self.out(dv, "done")),
            Assignment(PortRef(name, "done", HOLE), self.out(dst, "done")),
        ]
        self.groups.append(Group(name, assigns))
        return Enable(name)

    def static_leaf(self, pool: list[str]) -> ControlNode:
        rng = self.rng
        latency = rng.randrange(1, 5)
        dst = rng.choice(pool)
        src = rng.choice(pool)
        add = self.new_cell("std_cadd", [WIDTH])
        name = self.fresh("sg")
        at = rng.randrange(latency)
        win = (at, at + 1)
        assigns = [
            Assignment(PortRef(add, "left", CELL), self.out(src), Guard(GTRUE, win)),
            Assignment(PortRef(add, "right", CELL), self.const(rng.randrange(1, 17)), Guard(GTRUE, win)),
            Assignment(PortRef(dst, "in", CELL), self.out(add), Guard(GTRUE, win)),
            Assignment(PortRef(dst, "write_en", CELL), Const(1, 1), Guard(GTRUE, win)),
        ]
        self.static_groups.append(StaticGroup(name, latency, assigns))
        return StaticEnable(name)

    def cond_port(self, pool: list[str]) -> PortRef:
        """1-bit condition computed continuously from a register."""
        rng = self.rng
        cmp_proto = rng.choice(["std_lt", "std_ge", "std_eq", "std_neq"])
        c = self.new_cell(cmp_proto, [WIDTH])
        self.continuous.append(Assignment(PortRef(c, "left", CELL), self.out(rng.choice(pool))))
        self.continuous.append(
            Assignment(PortRef(c, "right", CELL), self.const(rng.randrange(0, 40)))
        )
        return self.out(c)

    # ---- composite control ----

    def static_node(self, depth: int, pool: list[str]) -> ControlNode:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.4:
            return self.static_leaf(pool)
        kind = rng.choice(["seq", "par", "if", "repeat"])
        if kind == "seq":
            return StaticSeq([self.static_node(depth - 1, pool) for _ in range(rng.randrange(2, 4))])
        if kind == "par":
            parts = _split_pool(rng, pool, 2)
            if parts is None:
                return self.static_leaf(pool)
            return StaticPar([self.static_node(depth - 1, p) for p in parts])
        if kind == "if":
            return StaticIf(
                self.cond_port(pool),
                self.static_node(depth - 1, pool),
                self.static_node(depth - 1, pool),
            )
        return StaticRepeat(rng.randrange(1, 4), self.static_node(depth - 1, pool))

    def node(self, depth: int, pool: list[str]) -> ControlNode:
        rng = self.rng
        if depth <= 0:
            return self.leaf(pool)
        kind = rng.choice(["seq", "seq", "par", "if", "while", "repeat", "island", "leaf"])
        if kind == "leaf":
            return self.leaf(pool)
        if kind == "seq":
            return Seq([self.node(depth - 1, pool) for _ in range(rng.randrange(2, 5))])
        if kind == "par":
            parts = _split_pool(rng, pool, rng.randrange(2, 4))
            if parts is None:
                return self.leaf(pool)
            return Par([self.node(depth - 1, p) for p in parts])
        if kind == "if":
            return If(self.cond_port(pool), self.node(depth - 1, pool), self.node(depth - 1, pool))
        if kind == "while":
            return self.bounded_while(depth, pool)
        if kind == "repeat":
            return Repeat(rng.randrange(1, 4), self.node(depth - 1, pool))
        return self.static_node(min(depth - 1, 2), pool)

    def leaf(self, pool: list[str]) -> ControlNode:
        roll = self.rng.random()
        if roll < 0.55:
            return self.reg_group(pool)
        if roll < 0.75:
            return self.mult_group(pool)
        if roll < 0.9:
            return self.div_group(pool)
        return self.static_leaf(pool)

    def bounded_while(self, depth: int, pool: list[str]) -> ControlNode:
        rng = self.rng
        counter = self.new_reg()  # dedicated, so the body cannot clobber it
        bound = rng.randrange(2, 6)
        lt = self.new_cell("std_lt", [WIDTH])
        self.continuous.append(Assignment(PortRef(lt, "left", CELL), self.out(counter)))
        self.continuous.append(Assignment(PortRef(lt, "right", CELL), self.const(bound)))

        inc = self.new_cell("std_cadd", [WIDTH])
        name = self.fresh("step")
        assigns = [
            Assignment(PortRef(inc, "left", CELL), self.out(counter)),
            Assignment(PortRef(inc, "right", CELL), self.const(1)),
            Assignment(PortRef(counter, "in", CELL), self.out(inc)),
            Assignment(PortRef(counter, "write_en", CELL), Const(1, 1)),
            Assignment(PortRef(name, "done", HOLE), self.out(counter, "done")),
        ]
        self.groups.append(Group(name, assigns))
        body_work = self.node(depth - 1, pool)
        return While(self.out(lt), Seq([body_work, Enable(name)]))


def _split_pool(rng: random.Random, pool: list[str], n: int) -> list[list[str]] | None:
    if len(pool) < n:
        return None
    shuffled = list(pool)
    rng.shuffle(shuffled)
    parts: list[list[str]] = [[] for _ in range(n)]
    for i, r in enumerate(shuffled):
        parts[i % n].append(r)
    return parts


def gen_static_island(seed: int) -> Program:
    """A program whose whole control is one random static island."""
    rng = random.Random(seed)
    b = _Builder(rng)
    for _ in range(rng.randrange(3, 6)):
        b.new_reg()
    island = b.static_node(rng.randrange(1, 4), list(b.regs))
    outputs = [PortDecl("o0", WIDTH)]
    b.continuous.append(Assignment(io_port("o0"), b.out(b.regs[0])))
    comp = Component(
        name="main",
        inputs=[],
        outputs=outputs,
        cells=b.cells,
        continuous=b.continuous,
        groups=b.groups,
        static_groups=b.static_groups,
        control=island,
    )
    return Program(externs=list(BUILTINS), components=[comp], entry="main")


def gen_program(seed: int) -> Program:
    rng = random.Random(seed)
    b = _Builder(rng)
    nregs = rng.randrange(4, 8)
    for _ in range(nregs):
        b.new_reg()
    pool = list(b.regs)
    control = b.node(rng.randrange(2, 4), pool)

    outputs = [PortDecl(f"o{i}", WIDTH) for i in range(min(4, nregs))]
    for i, port in enumerate(outputs):
        b.continuous.append(Assignment(io_port(port.name), b.out(b.regs[i])))

    comp = Component(
        name="main",
        inputs=[],
        outputs=outputs,
        cells=b.cells,
        continuous=b.continuous,
        groups=b.groups,
        static_groups=b.static_groups,
        control=control,
    )
    return Program(externs=list(BUILTINS), components=[comp], entry="main")


# ============================================================
# Differential harness
# ============================================================

PROMOTE_PIPELINE = ["infer-static", "static-promote"] + LOWER_PASSES


@dataclass
class TrialResult:
    seed: int
    ok: bool
    reason: str = ""
    baseline_cycles: int | None = None
    promoted_cycles: int | None = None


def run_trial(seed: int, extra_pipelines: list[list[str]] | None = None, config: PassConfig | None = None) -> TrialResult:
    config = config or PassConfig()
    prog = gen_program(seed)
    diags = [d for d in validate(prog) if d.severity == "error"]
    if diags:
        return TrialResult(seed, False, f"generated program invalid: {diags[0]}")
    try:
        baseline, _ = run_pipeline(prog, PRESETS["B"], config)
        promoted, _ = run_pipeline(prog, PROMOTE_PIPELINE, config)
        others = [run_pipeline(prog, p, config)[0] for p in (extra_pipelines or [])]
    except Exception as e:  # no pass may crash on valid input
        return TrialResult(seed, False, f"pass crashed: {e!r}")
    for variant in [baseline, promoted] + others:
        post = [d for d in validate(variant, allow_reserved=True) if d.severity == "error"]
        if post:
            return TrialResult(seed, False, f"pass output invalid: {post[0]}")
    try:
        t_base = simulate(baseline, record_trace=False, cycle_limit=200_000)
    except SimError as e:
        return TrialResult(seed, False, f"baseline simulation failed: {e}")
    try:
        t_prom = simulate(promoted, record_trace=False, cycle_limit=200_000)
    except SimError as e:
        return TrialResult(seed, False, f"promoted simulation failed: {e}")
    if t_base.final != t_prom.final:
        return TrialResult(seed, False, "observable state differs after promotion", t_base.cycles, t_prom.cycles)
    if t_prom.cycles > t_base.cycles:
        return TrialResult(
            seed,
            False,
            f"promotion slowed the program down ({t_prom.cycles} > {t_base.cycles})",
            t_base.cycles,
            t_prom.cycles,
        )
    for variant in others:
        try:
            t_v = simulate(variant, record_trace=False, cycle_limit=200_000)
        except SimError as e:
            return TrialResult(seed, False, f"variant simulation failed: {e}")
        if t_v.final != t_base.final:
            return TrialResult(seed, False, "observable state differs in variant pipeline")
    return TrialResult(seed, True, "", t_base.cycles, t_prom.cycles)


@dataclass
class FuzzSummary:
    trials: int
    failures: list[TrialResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_fuzz(seed: int, count: int, extra_pipelines: list[list[str]] | None = None) -> FuzzSummary:
    summary = FuzzSummary(count)
    for i in range(count):
        result = run_trial(seed + i, extra_pipelines)
        if not result.ok:
            summary.failures.append(result)
    return summary
