"""Built-in primitive library: interface declarations and cycle models.

Loaded by the `import "primitives";` line in source files. Three kinds:

* combinational units (adders used for addressing, comparators, logic):
  zero latency, outputs recomputed from inputs every cycle;
* the sequential arithmetic units std_add (latency 1) and std_mult
  (latency 3): hold go and the operands high, the result appears on `out`
  exactly `latency` cycles after each cycle the inputs were presented and
  sticks there until a later result replaces it (initiation interval 1);
* handshake units: std_div with data-dependent timing, std_mult_dyn which
  wraps the 3-cycle multiplier behind a go/done interface, and the 1-cycle
  write ports of std_reg / std_mem_d1 whose done mirrors write_en in the
  same cycle.

The divider's timing model: latency equals the bit length of the dividend
(minimum 1). Division by zero returns all ones and completes in 1 cycle.
"""

from __future__ import annotations

from .ir import PrimitiveDecl, PrimitivePort


def _p(name: str, width: str | int, direction: str, role: str = "none") -> PrimitivePort:
    return PrimitivePort(name, width, direction, role)


def _comb2(name: str, out_width: str | int = "W", shareable: bool = True) -> PrimitiveDecl:
    return PrimitiveDecl(
        name=name,
        params=["W"],
        ports=[_p("left", "W", "in"), _p("right", "W", "in"), _p("out", out_width, "out")],
        state_model="combinational",
        shareable=shareable,
    )


def _static_binop(name: str, latency: int) -> PrimitiveDecl:
    return PrimitiveDecl(
        name=name,
        params=["W"],
        ports=[
            _p("go", 1, "in", "go"),
            _p("left", "W", "in"),
            _p("right", "W", "in"),
            _p("out", "W", "out"),
        ],
        latency=latency,
        state_model="registered",
        shareable=True,
    )


BUILTINS: list[PrimitiveDecl] = [
    # sequential arithmetic with the static calling convention
    _static_binop("std_add", 1),
    _static_binop("std_sub", 1),
    _static_binop("std_mult", 3),
    # handshake units
    PrimitiveDecl(
        name="std_div",
        params=["W"],
        ports=[
            _p("go", 1, "in", "go"),
            _p("left", "W", "in"),
            _p("right", "W", "in"),
            _p("out", "W", "out"),
            _p("done", 1, "out", "done"),
        ],
        state_model="dynamic",
    ),
    PrimitiveDecl(
        name="std_mult_dyn",
        params=["W"],
        ports=[
            _p("go", 1, "in", "go"),
            _p("left", "W", "in"),
            _p("right", "W", "in"),
            _p("out", "W", "out"),
            _p("done", 1, "out", "done"),
        ],
        state_model="dynamic",
        shareable=True,
        done_offset=3,
    ),
    # state
    PrimitiveDecl(
        name="std_reg",
        params=["W"],
        ports=[
            _p("in", "W", "in"),
            _p("write_en", 1, "in", "go"),
            _p("out", "W", "out"),
            _p("done", 1, "out", "done"),
        ],
        state_model="registered",
        done_offset=0,
    ),
    PrimitiveDecl(
        name="std_mem_d1",
        params=["W", "SIZE", "IDX"],
        ports=[
            _p("addr0", "IDX", "in"),
            _p("write_data", "W", "in"),
            _p("write_en", 1, "in", "go"),
            _p("read_data", "W", "out"),
            _p("done", 1, "out", "done"),
        ],
        state_model="registered",
        done_offset=0,
    ),
    # combinational arithmetic and comparison
    _comb2("std_cadd"),
    _comb2("std_csub"),
    _comb2("std_lt", 1),
    _comb2("std_gt", 1),
    _comb2("std_le", 1),
    _comb2("std_ge", 1),
    _comb2("std_eq", 1),
    _comb2("std_neq", 1),
    _comb2("std_and"),
    _comb2("std_or"),
    _comb2("std_xor"),
    PrimitiveDecl(
        name="std_not",
        params=["W"],
        ports=[_p("in", "W", "in"), _p("out", "W", "out")],
        state_model="combinational",
        shareable=True,
    ),
    PrimitiveDecl(
        name="std_wire",
        params=["W"],
        ports=[_p("in", "W", "in"), _p("out", "W", "out")],
        state_model="combinational",
        shareable=True,
    ),
    PrimitiveDecl(
        name="std_slice",
        params=["IN", "OUT"],
        ports=[_p("in", "IN", "in"), _p("out", "OUT", "out")],
        state_model="combinational",
        shareable=True,
    ),
    PrimitiveDecl(
        name="std_pad",
        params=["IN", "OUT"],
        ports=[_p("in", "IN", "in"), _p("out", "OUT", "out")],
        state_model="combinational",
        shareable=True,
    ),
]

BUILTIN_MAP = {p.name: p for p in BUILTINS}


def resolve_width(decl: PrimitiveDecl, cell_args: list[int], width: str | int) -> int:
    if isinstance(width, int):
        return width
    return cell_args[decl.params.index(width)]


def port_width(decl: PrimitiveDecl, cell_args: list[int], port: str) -> int | None:
    p = decl.port(port)
    if p is None:
        return None
    return resolve_width(decl, cell_args, p.width)


# ============================================================
# Cycle models
# ============================================================


def mask(width: int) -> int:
    return (1 << width) - 1


_CMP_OPS = {
    "std_lt": lambda a, b: a < b,
    "std_gt": lambda a, b: a > b,
    "std_le": lambda a, b: a <= b,
    "std_ge": lambda a, b: a >= b,
    "std_eq": lambda a, b: a == b,
    "std_neq": lambda a, b: a != b,
}


def comb_eval(proto: str, args: list[int], ins: dict[str, int]) -> dict[str, int]:
    """Evaluate a combinational primitive: input values to output values."""
    if proto in _CMP_OPS:
        return {"out": int(_CMP_OPS[proto](ins["left"], ins["right"]))}
    w = args[0]
    if proto == "std_cadd":
        return {"out": (ins["left"] + ins["right"]) & mask(w)}
    if proto == "std_csub":
        return {"out": (ins["left"] - ins["right"]) & mask(w)}
    if proto == "std_and":
        return {"out": ins["left"] & ins["right"]}
    if proto == "std_or":
        return {"out": ins["left"] | ins["right"]}
    if proto == "std_xor":
        return {"out": ins["left"] ^ ins["right"]}
    if proto == "std_not":
        return {"out": ~ins["in"] & mask(w)}
    if proto == "std_wire":
        return {"out": ins["in"]}
    if proto == "std_slice":
        return {"out": ins["in"] & mask(args[1])}
    if proto == "std_pad":
        return {"out": ins["in"]}
    raise KeyError(proto)


class CellState:
    """Base for stateful primitive models. Outputs are start-of-cycle values;
    commit() consumes settled inputs at the end of each cycle."""

    def outputs(self) -> dict[str, int]:
        raise NotImplementedError

    def commit(self, ins: dict[str, int]) -> list[tuple[str, int]]:
        """Apply the clock edge; returns (name, value) state writes."""
        raise NotImplementedError

    def is_written(self, ins: dict[str, int]) -> bool:
        """Whether this cycle's inputs mutate the cell (for race checks)."""
        raise NotImplementedError

    def snapshot(self):
        raise NotImplementedError


class RegState(CellState):
    def __init__(self, width: int):
        self.width = width
        self.value = 0

    def outputs(self) -> dict[str, int]:
        return {"out": self.value}

    def commit(self, ins: dict[str, int]):
        if ins.get("write_en", 0):
            self.value = ins.get("in", 0) & mask(self.width)
            return [("out", self.value)]
        return []

    def is_written(self, ins):
        return bool(ins.get("write_en", 0))

    def snapshot(self):
        return self.value

    # done is combinational: it echoes write_en within the same cycle
    COMB_DONE = "write_en"


class MemState(CellState):
    def __init__(self, width: int, size: int, idx_width: int):
        self.width = width
        self.size = size
        self.idx_width = idx_width
        self.data = [0] * size

    def outputs(self) -> dict[str, int]:
        return {}  # read_data depends on addr0 combinationally

    def read(self, addr: int) -> int:
        if addr >= self.size:
            raise SimOutOfBounds(addr, self.size)
        return self.data[addr]

    def commit(self, ins: dict[str, int]):
        if ins.get("write_en", 0):
            addr = ins.get("addr0", 0)
            if addr >= self.size:
                raise SimOutOfBounds(addr, self.size)
            self.data[addr] = ins.get("write_data", 0) & mask(self.width)
            return [(f"[{addr}]", self.data[addr])]
        return []

    def is_written(self, ins):
        return bool(ins.get("write_en", 0))

    def snapshot(self):
        return list(self.data)

    COMB_DONE = "write_en"


class PipeState(CellState):
    """Fixed-latency unit behind the static calling convention.

    A new computation enters the pipeline on every cycle go is high; the
    result reaches `out` latency cycles later and holds until displaced.
    """

    BUBBLE = None

    def __init__(self, width: int, latency: int, op):
        self.width = width
        self.op = op
        self.pipe: list[int | None] = [None] * latency
        self.out = 0

    def outputs(self) -> dict[str, int]:
        return {"out": self.out}

    def commit(self, ins: dict[str, int]):
        entering = None
        if ins.get("go", 0):
            entering = self.op(ins.get("left", 0), ins.get("right", 0)) & mask(self.width)
        self.pipe = [entering] + self.pipe[:-1]
        writes = []
        landing = self.pipe[-1]
        if landing is not None:
            self.out = landing
            writes.append(("out", self.out))
        return writes

    def is_written(self, ins):
        return bool(ins.get("go", 0))

    def snapshot(self):
        return (self.out, tuple(self.pipe))


class HandshakeState(CellState):
    """go/done unit: accepts an operation when idle, raises done for one
    cycle when the result lands on `out`. go is ignored while busy or
    during the done pulse, so a group may hold go until completion."""

    def __init__(self, width: int, latency_fn, op):
        self.width = width
        self.latency_fn = latency_fn
        self.op = op
        self.out = 0
        self.done = 0
        self.remaining = 0
        self.pending = None

    def outputs(self) -> dict[str, int]:
        return {"out": self.out, "done": self.done}

    def commit(self, ins: dict[str, int]):
        writes = []
        was_done = self.done
        self.done = 0
        if self.remaining == 0 and not was_done and ins.get("go", 0):
            left, right = ins.get("left", 0), ins.get("right", 0)
            self.remaining = self.latency_fn(left, right)
            self.pending = self.op(left, right) & mask(self.width)
        if self.remaining > 0:
            self.remaining -= 1
            if self.remaining == 0:
                self.out = self.pending
                self.done = 1
                self.pending = None
                writes.append(("out", self.out))
        return writes

    def is_written(self, ins):
        return bool(ins.get("go", 0)) or self.remaining > 0

    def snapshot(self):
        return (self.out, self.done, self.remaining, self.pending)


class SimOutOfBounds(Exception):
    def __init__(self, addr: int, size: int):
        super().__init__(f"memory address {addr} out of bounds for size {size}")
        self.addr = addr
        self.size = size


def _div_latency(width: int):
    def f(left: int, right: int) -> int:
        if right == 0:
            return 1
        return max(1, left.bit_length())

    return f


def _div_op(width: int):
    def f(left: int, right: int) -> int:
        if right == 0:
            return mask(width)
        return left // right

    return f


def make_state(proto: str, args: list[int]) -> CellState | None:
    """Instantiate the stateful model for a primitive; None if combinational."""
    if proto in ("std_add", "std_sub"):
        op = (lambda a, b: a + b) if proto == "std_add" else (lambda a, b: a - b)
        return PipeState(args[0], 1, op)
    if proto == "std_mult":
        return PipeState(args[0], 3, lambda a, b: a * b)
    if proto == "std_mult_dyn":
        return HandshakeState(args[0], lambda a, b: 3, lambda a, b: a * b)
    if proto == "std_div":
        w = args[0]
        return HandshakeState(w, _div_latency(w), _div_op(w))
    if proto == "std_reg":
        return RegState(args[0])
    if proto == "std_mem_d1":
        return MemState(args[0], args[1], args[2])
    return None


def is_combinational(proto: str) -> bool:
    decl = BUILTIN_MAP.get(proto)
    return decl is not None and decl.state_model == "combinational"


def comb_edges(proto: str) -> list[tuple[str, str]]:
    """Same-cycle input-to-output dependencies, for cycle checking."""
    decl = BUILTIN_MAP.get(proto)
    if decl is None:
        return []
    if decl.state_model == "combinational":
        ins = [p.name for p in decl.ports if p.direction == "in"]
        outs = [p.name for p in decl.ports if p.direction == "out"]
        return [(i, o) for i in ins for o in outs]
    if proto == "std_reg":
        return [("write_en", "done")]
    if proto == "std_mem_d1":
        return [("write_en", "done"), ("addr0", "read_data")]
    return []
