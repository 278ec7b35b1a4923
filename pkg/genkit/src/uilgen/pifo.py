"""PIFO-tree packet scheduler generator.

A binary tree of queues: packets push into a leaf chosen by their class
and pop in an order decided by per-node round-robin arbitration (with
optional per-child weights). The tree itself is fundamentally dynamic --
how long an operation takes and which branch pops depends on queue
occupancy -- while a small statistics unit counting pushes per class is
a fixed 1-cycle component invoked through a static interface. A minimal
dynamic controller walks an event memory, drives the tree, and finally
copies the statistics counters out for an external consumer.

The generated design:

  component tree   one push or pop per invoke (op, cls, val in; popped,
                   pop_valid, rejected out); enqueue and dequeue are
                   short sequences of 1-cycle register/memory groups so
                   the compiler's promotion pass has latitude
  component stats  static<1>, one counter per class
  component main   event loop plus the statistics consumer

Pop arbitration: at each internal node, if both subtrees hold data the
node serves the side its turn register points at; a side that is alone
in having data is served regardless. After serving the pointed-at side
w times (the child's weight), the pointer flips. Pushing into a full
leaf or popping an empty tree sets the rejected flag and changes
nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Shape = int | list  # leaf class index, or [left, right]


@dataclass
class PifoConfig:
    shape: Shape = field(default_factory=lambda: [[0, 1], 2])
    caps: list[int] = field(default_factory=lambda: [4, 3, 3])
    # per internal node in preorder: (weight of left child, weight of right)
    weights: list[tuple[int, int]] | None = None
    events: int = 200
    width: int = 32

    def check(self) -> None:
        leaves = leaf_order(self.shape)
        if sorted(leaves) != list(range(len(leaves))):
            raise ValueError("shape leaves must be the classes 0..n-1, each once")
        if len(self.caps) != len(leaves):
            raise ValueError("one capacity per leaf required")
        if any(c < 1 for c in self.caps):
            raise ValueError("leaf capacities must be at least 1")
        if sum(self.caps) < 1:
            raise ValueError("total capacity must be at least 1")
        n_internal = count_internal(self.shape)
        if self.weights is not None:
            if len(self.weights) != n_internal:
                raise ValueError("one (left, right) weight pair per internal node")
            if any(w < 1 for pair in self.weights for w in pair):
                raise ValueError("weights must be at least 1")
        if self.events < 1:
            raise ValueError("event count must be at least 1")

    def node_weights(self) -> list[tuple[int, int]]:
        return self.weights or [(1, 1)] * count_internal(self.shape)


def leaf_order(shape: Shape) -> list[int]:
    if isinstance(shape, int):
        return [shape]
    return leaf_order(shape[0]) + leaf_order(shape[1])


def count_internal(shape: Shape) -> int:
    if isinstance(shape, int):
        return 0
    return 1 + count_internal(shape[0]) + count_internal(shape[1])


def preset() -> PifoConfig:
    """5 queues (root, one internal, three leaves), overall capacity 10."""
    return PifoConfig()


# ============================================================
# Software oracle
# ============================================================


class PifoOracle:
    """Reference behavior, mirrored exactly by the generated hardware."""

    def __init__(self, cfg: PifoConfig):
        cfg.check()
        self.cfg = cfg
        self.queues: dict[int, list[int]] = {c: [] for c in leaf_order(cfg.shape)}
        self.caps = cfg.caps
        self.turn: dict[int, int] = {}
        self.count: dict[int, int] = {}
        self.weights: dict[int, tuple[int, int]] = {}
        self._index_nodes(cfg.shape, iter(range(count_internal(cfg.shape))), cfg.node_weights())
        self.stats = [0] * len(self.queues)
        self.pushed = self.popped = 0

    def _index_nodes(self, shape: Shape, ids, weights) -> None:
        if isinstance(shape, int):
            return
        nid = next(ids)
        self.turn[nid] = 0
        self.count[nid] = 0
        self.weights[nid] = weights[nid]
        self._index_nodes(shape[0], ids, weights)
        self._index_nodes(shape[1], ids, weights)

    def push(self, cls: int, val: int) -> bool:
        self.pushed += 1
        self.stats[cls] += 1
        if len(self.queues[cls]) >= self.caps[cls]:
            return False
        self.queues[cls].append(val)
        return True

    def _size(self, shape: Shape) -> int:
        if isinstance(shape, int):
            return len(self.queues[shape])
        return self._size(shape[0]) + self._size(shape[1])

    def pop(self) -> tuple[int, bool]:
        self.popped += 1
        if self._size(self.cfg.shape) == 0:
            return (0, False)
        val = self._pop_node(self.cfg.shape, iter_ids(self.cfg.shape))
        return (val, True)

    def _pop_node(self, shape: Shape, ids) -> int:
        if isinstance(shape, int):
            return self.queues[shape].pop(0)
        nid = next(ids)
        left_ids = list(iter_ids(shape[0], start=nid + 1))
        right_start = nid + 1 + count_internal(shape[0])
        lsz = self._size(shape[0])
        rsz = self._size(shape[1])
        if lsz and rsz:
            side = self.turn[nid]
        else:
            side = 0 if lsz else 1
        if side == self.turn[nid]:
            w = self.weights[nid][side]
            self.count[nid] += 1
            if self.count[nid] >= w:
                self.count[nid] = 0
                self.turn[nid] = 1 - self.turn[nid]
        sub = shape[0] if side == 0 else shape[1]
        sub_ids = iter(range(nid + 1, nid + 1 + count_internal(shape[0]))) if side == 0 else iter(
            range(right_start, right_start + count_internal(shape[1]))
        )
        return self._pop_node(sub, sub_ids)

    def run(self, events) -> tuple[list[tuple[int, int]], list[int]]:
        """Returns the (value, valid) stream of pops and the stats counters."""
        pops = []
        for kind, cls, val in events:
            if kind == "push":
                self.push(cls, val)
            else:
                v, ok = self.pop()
                pops.append((v if ok else 0, 1 if ok else 0))
        return pops, list(self.stats)


def iter_ids(shape: Shape, start: int = 0):
    return iter(range(start, start + count_internal(shape)))


# ============================================================
# Hardware generation
# ============================================================


class _Tree:
    """Shape decorated with node ids and leaf metadata."""

    def __init__(self, cfg: PifoConfig):
        self.cfg = cfg
        self.leaves = leaf_order(cfg.shape)
        self.n_leaves = len(self.leaves)
        self.weights = cfg.node_weights()
        self.parents: dict[int, list[tuple[int, int]]] = {c: [] for c in self.leaves}
        self.n_internal = count_internal(cfg.shape)
        self._walk(cfg.shape, iter(range(self.n_internal)), [])

    def _walk(self, shape: Shape, ids, path: list[tuple[int, int]]) -> None:
        if isinstance(shape, int):
            self.parents[shape] = list(path)
            return
        nid = next(ids)
        self._walk(shape[0], ids, path + [(nid, 0)])
        self._walk(shape[1], ids, path + [(nid, 1)])


def gen_pifo(cfg: PifoConfig | None = None) -> str:
    cfg = cfg or preset()
    cfg.check()
    tree = _Tree(cfg)
    w = cfg.width
    out = ['import "primitives";', ""]
    out.append(_stats_component(tree, w))
    out.append("")
    out.append(_tree_component(tree, w))
    out.append("")
    out.append(_main_component(tree, w, cfg.events))
    return "\n".join(out) + "\n"


def _stats_component(tree: _Tree, w: int) -> str:
    n = tree.n_leaves
    ports = ", ".join(f"is{c}: 1" for c in range(n))
    outs = ", ".join(f"c{c}: {w}" for c in range(n))
    cells = []
    body = []
    wires = []
    for c in range(n):
        cells.append(f"s{c} = std_reg({w});")
        cells.append(f"a{c} = std_cadd({w});")
        body.append(f"a{c}.left = s{c}.out;")
        body.append(f"a{c}.right = {w}'d1;")
        body.append(f"s{c}.in = (is{c} == 1'd1) ? a{c}.out;")
        body.append(f"s{c}.in = (is{c} != 1'd1) ? s{c}.out;")
        body.append(f"s{c}.write_en = 1'd1;")
        wires.append(f"c{c} = s{c}.out;")
    return (
        "// per-class push counters behind a fixed 1-cycle interface\n"
        f"static<1> component stats({ports}) -> ({outs}) {{\n"
        "  cells {\n" + "".join(f"    {c}\n" for c in cells) + "  }\n"
        "  wires {\n"
        "    static<1> group tick {\n" + "".join(f"      {s}\n" for s in body) + "    }\n"
        + "".join(f"    {s}\n" for s in wires)
        + "  }\n"
        "  control { tick; }\n"
        "}"
    )


def _subtree_leaves(shape: Shape) -> list[int]:
    return leaf_order(shape)


def _tree_component(tree: _Tree, w: int) -> str:
    cfg = tree.cfg
    cells: list[str] = []
    wires: list[str] = []
    groups: list[str] = []

    def group(name: str, lines: list[str]) -> None:
        groups.append(f"    group {name} {{\n" + "".join(f"      {s}\n" for s in lines) + "    }")

    for c in tree.leaves:
        cap = cfg.caps[c]
        cells += [
            f"q{c} = std_mem_d1({w}, {cap}, {w});",
            f"head{c} = std_reg({w});",
            f"tail{c} = std_reg({w});",
            f"cnt{c} = std_reg({w});",
            f"tinc{c} = std_cadd({w});",
            f"hinc{c} = std_cadd({w});",
            f"cinc{c} = std_cadd({w});",
            f"cdec{c} = std_csub({w});",
            f"full{c} = std_eq({w});",
            f"ne{c} = std_neq({w});",
            f"isc{c} = std_eq(8);",
        ]
        wires += [
            f"full{c}.left = cnt{c}.out;",
            f"full{c}.right = {w}'d{cap};",
            f"ne{c}.left = cnt{c}.out;",
            f"ne{c}.right = {w}'d0;",
            f"isc{c}.left = cls;",
            f"isc{c}.right = 8'd{c};",
        ]
    for nid in range(tree.n_internal):
        cells += [
            f"turn{nid} = std_reg(1);",
            f"tcnt{nid} = std_reg({w});",
            f"ninc{nid} = std_cadd({w});",
        ]
        wires += [
            f"ninc{nid}.left = tcnt{nid}.out;",
            f"ninc{nid}.right = {w}'d1;",
        ]
    # nonempty test per internal subtree side needs subtree sizes
    subtree_sum: dict[str, str] = {}

    def size_expr(shape: Shape) -> str:
        """Port carrying the number of queued items in `shape`."""
        if isinstance(shape, int):
            return f"cnt{shape}.out"
        key = "_".join(str(c) for c in leaf_order(shape))
        if key not in subtree_sum:
            name = f"sum{key}"
            left = size_expr(shape[0])
            right = size_expr(shape[1])
            cells.append(f"{name} = std_cadd({w});")
            wires.append(f"{name}.left = {left};")
            wires.append(f"{name}.right = {right};")
            subtree_sum[key] = f"{name}.out"
        return subtree_sum[key]

    nonempty: dict[str, str] = {}

    def ne_expr(shape: Shape) -> str:
        if isinstance(shape, int):
            return f"ne{shape}.out"
        key = "_".join(str(c) for c in leaf_order(shape))
        if key not in nonempty:
            name = f"any{key}"
            cells.append(f"{name} = std_neq({w});")
            wires.append(f"{name}.left = {size_expr(shape)};")
            wires.append(f"{name}.right = {w}'d0;")
            nonempty[key] = f"{name}.out"
        return nonempty[key]

    cells += [
        f"oval = std_reg({w});",
        "ovalid = std_reg(1);",
        "orej = std_reg(1);",
    ]
    wires += [
        "popped = oval.out;",
        "pop_valid = ovalid.out;",
        "rejected = orej.out;",
    ]

    group(
        "clear",
        [
            "ovalid.in = 1'd0;",
            "ovalid.write_en = 1'd1;",
            "orej.in = 1'd0;",
            "orej.write_en = ovalid.done;",
            "clear[done] = orej.done;",
        ],
    )
    group(
        "rejpush",
        ["orej.in = 1'd1;", "orej.write_en = 1'd1;", "rejpush[done] = orej.done;"],
    )
    group(
        "rejpop",
        ["orej.in = 1'd1;", "orej.write_en = 1'd1;", "rejpop[done] = orej.done;"],
    )

    for c in tree.leaves:
        cap = cfg.caps[c]
        group(
            f"put{c}",
            [
                f"q{c}.addr0 = tail{c}.out;",
                f"q{c}.write_data = val;",
                f"q{c}.write_en = 1'd1;",
                f"put{c}[done] = q{c}.done;",
            ],
        )
        group(
            f"adv_t{c}",
            [
                f"tinc{c}.left = tail{c}.out;",
                f"tinc{c}.right = {w}'d1;",
                f"tail{c}.in = (tail{c}.out == {w}'d{cap - 1}) ? {w}'d0;",
                f"tail{c}.in = (tail{c}.out != {w}'d{cap - 1}) ? tinc{c}.out;",
                f"tail{c}.write_en = 1'd1;",
                f"adv_t{c}[done] = tail{c}.done;",
            ],
        )
        group(
            f"adv_c{c}",
            [
                f"cinc{c}.left = cnt{c}.out;",
                f"cinc{c}.right = {w}'d1;",
                f"cnt{c}.in = cinc{c}.out;",
                f"cnt{c}.write_en = 1'd1;",
                f"adv_c{c}[done] = cnt{c}.done;",
            ],
        )
        group(
            f"fetch{c}",
            [
                f"q{c}.addr0 = head{c}.out;",
                f"oval.in = q{c}.read_data;",
                "oval.write_en = 1'd1;",
                f"fetch{c}[done] = oval.done;",
            ],
        )
        group(
            f"adv_h{c}",
            [
                f"hinc{c}.left = head{c}.out;",
                f"hinc{c}.right = {w}'d1;",
                f"head{c}.in = (head{c}.out == {w}'d{cap - 1}) ? {w}'d0;",
                f"head{c}.in = (head{c}.out != {w}'d{cap - 1}) ? hinc{c}.out;",
                f"head{c}.write_en = 1'd1;",
                f"adv_h{c}[done] = head{c}.done;",
            ],
        )
        group(
            f"dec_c{c}",
            [
                f"cdec{c}.left = cnt{c}.out;",
                f"cdec{c}.right = {w}'d1;",
                f"cnt{c}.in = cdec{c}.out;",
                f"cnt{c}.write_en = 1'd1;",
                f"dec_c{c}[done] = cnt{c}.done;",
            ],
        )
        # round-robin bookkeeping for every ancestor of this leaf
        mark = ["ovalid.in = 1'd1;", "ovalid.write_en = 1'd1;"]
        link = "ovalid.done"
        for nid, side in tree.parents[c]:
            wside = tree.weights[nid][side]
            scheduled = f"(turn{nid}.out == 1'd{side})"
            other = f"(turn{nid}.out != 1'd{side})"
            wrap = f"(tcnt{nid}.out == {w}'d{wside - 1})"
            nowrap = f"(tcnt{nid}.out != {w}'d{wside - 1})"
            mark += [
                f"tcnt{nid}.in = {scheduled} & {wrap} ? {w}'d0;",
                f"tcnt{nid}.in = {scheduled} & {nowrap} ? ninc{nid}.out;",
                f"tcnt{nid}.in = {other} ? tcnt{nid}.out;",
                f"tcnt{nid}.write_en = {link};",
                f"turn{nid}.in = {scheduled} & {wrap} ? 1'd{1 - side};",
                f"turn{nid}.in = {scheduled} & {nowrap} ? 1'd{side};",
                f"turn{nid}.in = {other} ? turn{nid}.out;",
                f"turn{nid}.write_en = tcnt{nid}.done;",
            ]
            link = f"turn{nid}.done"
        mark.append(f"mark{c}[done] = {link};")
        group(f"mark{c}", mark)

    # control: one operation per invoke
    def push_ctrl(remaining: list[int], indent: str) -> str:
        c = remaining[0]
        enq = (
            f"{indent}if full{c}.out {{\n"
            f"{indent}  rejpush;\n"
            f"{indent}}} else {{\n"
            f"{indent}  seq {{ put{c}; adv_t{c}; adv_c{c}; }}\n"
            f"{indent}}}"
        )
        if len(remaining) == 1:
            return enq
        rest = push_ctrl(remaining[1:], indent + "  ")
        return (
            f"{indent}if isc{c}.out {{\n"
            + enq.replace(indent, indent + "  ", 1).replace(f"\n{indent}", f"\n{indent}  ")
            + f"\n{indent}}} else {{\n{rest}\n{indent}}}"
        )

    def deq_ctrl(c: int, indent: str) -> str:
        return f"{indent}seq {{ fetch{c}; adv_h{c}; dec_c{c}; mark{c}; }}"

    def pop_ctrl(shape: Shape, indent: str, checked: bool, ids_start: int) -> str:
        if isinstance(shape, int):
            if checked:
                return deq_ctrl(shape, indent)
            return (
                f"{indent}if {ne_expr(shape)} {{\n"
                + deq_ctrl(shape, indent + "  ")
                + f"\n{indent}}} else {{\n{indent}  rejpop;\n{indent}}}"
            )
        nid = ids_start
        left, right = shape
        l_ids = nid + 1
        r_ids = nid + 1 + count_internal(left)
        lne = ne_expr(left)
        rne = ne_expr(right)
        serve_l = pop_ctrl(left, indent + "    ", True, l_ids)
        serve_l2 = pop_ctrl(left, indent + "  ", True, l_ids)
        serve_r = pop_ctrl(right, indent + "    ", True, r_ids)
        fallback = (
            pop_ctrl(right, indent + "  ", True, r_ids)
            if checked
            else (
                f"{indent}  if {rne} {{\n"
                + pop_ctrl(right, indent + "    ", True, r_ids)
                + f"\n{indent}  }} else {{\n{indent}    rejpop;\n{indent}  }}"
            )
        )
        return (
            f"{indent}if {lne} {{\n"
            f"{indent}  if {rne} {{\n"
            f"{indent}    if turn{nid}.out {{\n"
            + pop_ctrl(right, indent + "      ", True, r_ids)
            + f"\n{indent}    }} else {{\n"
            + pop_ctrl(left, indent + "      ", True, l_ids)
            + f"\n{indent}    }}\n"
            f"{indent}  }} else {{\n" + serve_l2 + f"\n{indent}  }}\n"
            f"{indent}}} else {{\n" + fallback + f"\n{indent}}}"
        )

    push_body = push_ctrl(tree.leaves, "      ")
    pop_body = pop_ctrl(cfg.shape, "      ", False, 0)

    ports_out = f"popped: {w}, pop_valid: 1, rejected: 1"
    lines = [f"component tree(op: 1, cls: 8, val: {w}) -> ({ports_out}) {{"]
    lines.append("  cells {")
    for c in cells:
        lines.append(f"    {c}")
    lines.append("  }")
    lines.append("  wires {")
    lines.extend(groups)
    for s in wires:
        lines.append(f"    {s}")
    lines.append("  }")
    lines.append("  control {")
    lines.append("    seq {")
    lines.append("      clear;")
    lines.append("      if op {")
    lines.append(push_body)
    lines.append("      } else {")
    lines.append(pop_body)
    lines.append("      }")
    lines.append("    }")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines)


def _main_component(tree: _Tree, w: int, n_events: int) -> str:
    n = tree.n_leaves
    cells = [
        f"ops = std_mem_d1(1, {n_events}, {w});",
        f"clsm = std_mem_d1(8, {n_events}, {w});",
        f"vals = std_mem_d1({w}, {n_events}, {w});",
        f"pops = std_mem_d1({w}, {n_events}, {w});",
        f"valids = std_mem_d1(1, {n_events}, {w});",
        f"statsout = std_mem_d1({w}, {n}, {w});",
        f"eidx = std_reg({w});",
        f"pidx = std_reg({w});",
        f"einc = std_cadd({w});",
        f"pinc = std_cadd({w});",
        f"ilt = std_lt({w});",
        "opr = std_reg(1);",
        "clsr = std_reg(8);",
        f"valr = std_reg({w});",
        "t = tree();",
        "st = stats();",
    ]
    for c in range(n):
        cells.append(f"sq{c} = std_eq(8);")
    wires = [
        "ilt.left = eidx.out;",
        f"ilt.right = {w}'d{n_events};",
    ]
    for c in range(n):
        wires.append(f"sq{c}.left = clsr.out;")
        wires.append(f"sq{c}.right = 8'd{c};")

    groups = []

    def group(name, lines):
        groups.append(f"    group {name} {{\n" + "".join(f"      {s}\n" for s in lines) + "    }")

    group(
        "load",
        [
            "ops.addr0 = eidx.out;",
            "clsm.addr0 = eidx.out;",
            "vals.addr0 = eidx.out;",
            "opr.in = ops.read_data;",
            "opr.write_en = 1'd1;",
            "clsr.in = clsm.read_data;",
            "clsr.write_en = opr.done;",
            "valr.in = vals.read_data;",
            "valr.write_en = clsr.done;",
            "load[done] = valr.done;",
        ],
    )
    group(
        "store_pop",
        [
            "pops.addr0 = pidx.out;",
            "pops.write_data = t.popped;",
            "pops.write_en = 1'd1;",
            "valids.addr0 = pidx.out;",
            "valids.write_data = t.pop_valid;",
            "valids.write_en = pops.done;",
            "store_pop[done] = valids.done;",
        ],
    )
    group(
        "bump_p",
        [
            "pinc.left = pidx.out;",
            f"pinc.right = {w}'d1;",
            "pidx.in = pinc.out;",
            "pidx.write_en = 1'd1;",
            "bump_p[done] = pidx.done;",
        ],
    )
    group(
        "next",
        [
            "einc.left = eidx.out;",
            f"einc.right = {w}'d1;",
            "eidx.in = einc.out;",
            "eidx.write_en = 1'd1;",
            "next[done] = eidx.done;",
        ],
    )
    for c in range(n):
        group(
            f"store_s{c}",
            [
                f"statsout.addr0 = {w}'d{c};",
                f"statsout.write_data = st.c{c};",
                "statsout.write_en = 1'd1;",
                f"store_s{c}[done] = statsout.done;",
            ],
        )

    stats_binds = ", ".join(f"is{c} = sq{c}.out" for c in range(n))
    store_stats = "\n".join(f"      store_s{c};" for c in range(n))
    lines = ["component main() -> (served: 1) {"]
    lines.append("  cells {")
    for c in cells:
        lines.append(f"    {c}")
    lines.append("  }")
    lines.append("  wires {")
    lines.extend(groups)
    for s in wires:
        lines.append(f"    {s}")
    lines.append("    served = ilt.out;")
    lines.append("  }")
    lines.append("  control {")
    lines.append("    seq {")
    lines.append("      while ilt.out {")
    lines.append("        seq {")
    lines.append("          load;")
    lines.append("          if opr.out {")
    lines.append("            seq {")
    lines.append("              invoke t(op = 1'd1, cls = clsr.out, val = valr.out);")
    lines.append(f"              static invoke st({stats_binds});")
    lines.append("            }")
    lines.append("          } else {")
    lines.append("            seq {")
    lines.append("              invoke t(op = 1'd0, cls = clsr.out, val = valr.out);")
    lines.append("              store_pop;")
    lines.append("              bump_p;")
    lines.append("            }")
    lines.append("          }")
    lines.append("          next;")
    lines.append("        }")
    lines.append("      }")
    lines.append(store_stats)
    lines.append("    }")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines)
