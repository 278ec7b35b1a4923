"""Output-stationary systolic array generator.

The fabric feeds row i of A from memory L<i> and column j of B from
memory T<j> on a skewed schedule: processing element (i, j) sees
A[i][m] and B[m][j] together on cycle i+j+m. Every PE multiplies its
current operands through a 3-stage pipeline and accumulates the product
that emerges, so the whole array sustains one new operand pair per cycle
per edge. Those are static interfaces throughout: the fabric moves data
unconditionally every cycle.

Compute takes rows+cols+k+1 cycles; afterwards the accumulators drain
into the result memory one element per cycle, optionally through a
post operator:

* none / static-relu keep the drain inside the same cycle-scheduled step,
  so a fixed-size array is one fully static program and a flexible one is
  a single while loop around the step (the loop exit costs exactly one
  extra cycle, the price of checking a runtime bound);
* dynamic-relu wraps the identical ReLU computation behind a go/done
  interface: the drain becomes a dynamic loop that buffers each value,
  invokes the unit, and stores the reply, costing extra cycles, groups,
  and cells over the static version.
"""

from __future__ import annotations

from dataclasses import dataclass

POST_OPS = ("none", "static-relu", "dynamic-relu")


@dataclass
class SystolicConfig:
    rows: int
    cols: int
    k: int  # contraction length; capacity of the feed memories
    flexible: bool = False  # runtime contraction bound on input port k
    post_op: str = "none"
    width: int = 32

    def check(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be at least 1")
        if self.k < 1:
            raise ValueError("contraction length k must be at least 1")
        if self.post_op not in POST_OPS:
            raise ValueError(f"post_op must be one of {POST_OPS}")
        if self.width < 8:
            raise ValueError("width must be at least 8")

    @property
    def compute_cycles(self) -> int:
        return self.rows + self.cols + self.k + 1

    @property
    def drain_cycles(self) -> int:
        return self.rows * self.cols + (1 if self.post_op == "static-relu" else 0)

    @property
    def total_cycles(self) -> int:
        return self.compute_cycles + self.drain_cycles


def gen_systolic(cfg: SystolicConfig) -> str:
    cfg.check()
    out: list[str] = ['import "primitives";', ""]
    out.append(_pe_component(cfg.width))
    out.append("")
    if cfg.post_op == "static-relu":
        out.append(_relu_static(cfg.width))
        out.append("")
    if cfg.post_op == "dynamic-relu":
        out.append(_relu_dynamic(cfg.width))
        out.append("")
    out.append(_top_component(cfg))
    return "\n".join(out) + "\n"


def _pe_component(w: int) -> str:
    return f"""// multiply-accumulate processing element, initiation interval 1
static<1> component pe(a_in: {w}, b_in: {w}) -> (a_out: {w}, b_out: {w}, acc_out: {w}) {{
  cells {{
    m = std_mult({w});
    acc = std_reg({w});
    ar = std_reg({w});
    br = std_reg({w});
    aadd = std_cadd({w});
  }}
  wires {{
    static<1> group tick {{
      m.left = a_in;
      m.right = b_in;
      m.go = 1'd1;
      ar.in = a_in;
      ar.write_en = 1'd1;
      br.in = b_in;
      br.write_en = 1'd1;
      aadd.left = acc.out;
      aadd.right = m.out;
      acc.in = aadd.out;
      acc.write_en = 1'd1;
    }}
    a_out = ar.out;
    b_out = br.out;
    acc_out = acc.out;
  }}
  control {{ tick; }}
}}"""


def _relu_guts(w: int, static: bool) -> str:
    sign_bit = 1 << (w - 1)
    kw = "static<1> group" if static else "group"
    done = "" if static else "\n      run[done] = yr.done;"
    return f"""  cells {{
    yr = std_reg({w});
    neg = std_ge({w});
  }}
  wires {{
    neg.left = x;
    neg.right = {w}'d{sign_bit};
    {kw} run {{
      yr.in = (neg.out == 1'd1) ? {w}'d0;
      yr.in = (neg.out != 1'd1) ? x;
      yr.write_en = 1'd1;{done}
    }}
    y = yr.out;
  }}
  control {{ run; }}"""


def _relu_static(w: int) -> str:
    return (
        f"// x > 0 ? x : 0 on two's-complement values, fixed 1-cycle latency\n"
        f"static<1> component relu_unit(x: {w}) -> (y: {w}) {{\n{_relu_guts(w, True)}\n}}"
    )


def _relu_dynamic(w: int) -> str:
    return (
        f"// the same ReLU computation behind a go/done interface\n"
        f"component relu_dyn(x: {w}) -> (y: {w}) {{\n{_relu_guts(w, False)}\n}}"
    )


def _top_component(cfg: SystolicConfig) -> str:
    w, rows, cols, k = cfg.width, cfg.rows, cfg.cols, cfg.k
    t_compute = cfg.compute_cycles
    d = rows * cols
    fused = cfg.post_op != "dynamic-relu"
    total = cfg.total_cycles if fused else t_compute

    cells: list[str] = []
    wires: list[str] = []
    step: list[str] = []

    cells.append(f"wave = std_reg({w});")
    cells.append(f"winc = std_cadd({w});")
    cells.append(f"res = std_mem_d1({w}, {d}, {w});")
    for i in range(rows):
        cells.append(f"L{i} = std_mem_d1({w}, {k}, {w});")
        cells.append(f"ls{i} = std_csub({w});")
    for j in range(cols):
        cells.append(f"T{j} = std_mem_d1({w}, {k}, {w});")
        cells.append(f"ts{j} = std_csub({w});")
    for i in range(rows):
        for j in range(cols):
            cells.append(f"pe_{i}_{j} = pe();")

    # runtime vs generation-time contraction bound
    if cfg.flexible:
        cells.append(f"bc = std_cadd({w});")  # compute bound: k + rows + cols + 1
        cells.append(f"bt = std_cadd({w});")  # loop bound
        cells.append(f"ged = std_ge({w});")
        cells.append(f"lt = std_lt({w});")
        wires.append(f"bc.left = k;")
        wires.append(f"bc.right = {w}'d{rows + cols + 1};")
        wires.append(f"bt.left = k;")
        loop_extent = rows + cols + 1 + (cfg.drain_cycles if fused else 0)
        wires.append(f"bt.right = {w}'d{loop_extent};")
        wires.append("ged.left = wave.out;")
        wires.append("ged.right = bc.out;")
        wires.append("lt.left = wave.out;")
        wires.append("lt.right = bt.out;")
        drain_cond = "(ged.out == 1'd1)"
        for i in range(rows):
            cells.append(f"ika{i} = std_cadd({w});")
            wires.append(f"ika{i}.left = k;")
            wires.append(f"ika{i}.right = {w}'d{i};")
        for j in range(cols):
            cells.append(f"tka{j} = std_cadd({w});")
            wires.append(f"tka{j}.left = k;")
            wires.append(f"tka{j}.right = {w}'d{j};")
    else:
        drain_cond = f"(wave.out >= {w}'d{t_compute})"

    # wavefront counter and PE clocks
    step.append("winc.left = wave.out;")
    step.append(f"winc.right = {w}'d1;")
    step.append("wave.in = winc.out;")
    step.append("wave.write_en = 1'd1;")
    for i in range(rows):
        for j in range(cols):
            step.append(f"pe_{i}_{j}.go = 1'd1;")

    # skewed edge feeding with validity windows; outside the window the
    # edge reads as zero, which multiplies and accumulates harmlessly
    for i in range(rows):
        upper = f"ika{i}.out" if cfg.flexible else f"{w}'d{i + k}"
        step.append(f"ls{i}.left = wave.out;")
        step.append(f"ls{i}.right = {w}'d{i};")
        step.append(f"L{i}.addr0 = ls{i}.out;")
        step.append(
            f"pe_{i}_0.a_in = (wave.out >= {w}'d{i}) & (wave.out < {upper}) ? L{i}.read_data;"
        )
    for j in range(cols):
        upper = f"tka{j}.out" if cfg.flexible else f"{w}'d{j + k}"
        step.append(f"ts{j}.left = wave.out;")
        step.append(f"ts{j}.right = {w}'d{j};")
        step.append(f"T{j}.addr0 = ts{j}.out;")
        step.append(
            f"pe_0_{j}.b_in = (wave.out >= {w}'d{j}) & (wave.out < {upper}) ? T{j}.read_data;"
        )

    # lockstep forwarding through the grid
    for i in range(rows):
        for j in range(1, cols):
            wires.append(f"pe_{i}_{j}.a_in = pe_{i}_{j - 1}.a_out;")
    for i in range(1, rows):
        for j in range(cols):
            wires.append(f"pe_{i}_{j}.b_in = pe_{i - 1}_{j}.b_out;")

    if fused:
        cells.append(f"dcnt = std_reg({w});")
        cells.append(f"dinc = std_cadd({w});")
        step.append("dinc.left = dcnt.out;")
        step.append(f"dinc.right = {w}'d1;")
        step.append("dcnt.in = dinc.out;")
        step.append(f"dcnt.write_en = {drain_cond} ? 1'd1;")
        if cfg.post_op == "static-relu":
            cells.append("po = relu_unit();")
            step.append(f"po.go = {drain_cond} ? 1'd1;")
            n = 0
            for i in range(rows):
                for j in range(cols):
                    sel = f"{drain_cond} & (dcnt.out == {w}'d{n})"
                    step.append(f"po.x = {sel} ? pe_{i}_{j}.acc_out;")
                    step.append(f"res.addr0 = (dcnt.out == {w}'d{n + 1}) ? {w}'d{n};")
                    step.append(f"res.write_data = (dcnt.out == {w}'d{n + 1}) ? po.y;")
                    n += 1
            step.append(f"res.write_en = (dcnt.out >= {w}'d1) ? 1'd1;")
        else:
            n = 0
            for i in range(rows):
                for j in range(cols):
                    sel = f"{drain_cond} & (dcnt.out == {w}'d{n})"
                    step.append(f"res.addr0 = {sel} ? {w}'d{n};")
                    step.append(f"res.write_data = {sel} ? pe_{i}_{j}.acc_out;")
                    n += 1
            step.append(f"res.write_en = {drain_cond} ? 1'd1;")

    groups = [f"    static<1> group step {{\n" + "".join(f"      {s}\n" for s in step) + "    }"]

    extra_groups: list[str] = []
    control: str
    if fused:
        if cfg.flexible:
            control = "while lt.out {\n      step;\n    }"
        else:
            control = f"static repeat {total} {{ step; }}"
    else:
        # dynamic post operator: compute phase, then a dynamic drain loop
        cells.append(f"dcnt = std_reg({w});")
        cells.append(f"dinc = std_cadd({w});")
        cells.append(f"buf = std_reg({w});")
        cells.append("dpo = relu_dyn();")
        cells.append(f"dlt = std_lt({w});")
        wires.append("dlt.left = dcnt.out;")
        wires.append(f"dlt.right = {w}'d{d};")
        grab = []
        n = 0
        for i in range(rows):
            for j in range(cols):
                grab.append(f"buf.in = (dcnt.out == {w}'d{n}) ? pe_{i}_{j}.acc_out;")
                n += 1
        grab.append("buf.write_en = 1'd1;")
        grab.append("grab[done] = buf.done;")
        extra_groups.append("    group grab {\n" + "".join(f"      {s}\n" for s in grab) + "    }")
        extra_groups.append(
            "    group store {\n"
            "      res.addr0 = dcnt.out;\n"
            "      res.write_data = dpo.y;\n"
            "      res.write_en = 1'd1;\n"
            "      store[done] = res.done;\n"
            "    }"
        )
        extra_groups.append(
            "    group bump {\n"
            "      dinc.left = dcnt.out;\n"
            f"      dinc.right = {w}'d1;\n"
            "      dcnt.in = dinc.out;\n"
            "      dcnt.write_en = 1'd1;\n"
            "      bump[done] = dcnt.done;\n"
            "    }"
        )
        if cfg.flexible:
            compute = "while lt.out {\n        step;\n      }"
        else:
            compute = f"static repeat {t_compute} {{ step; }}"
        control = (
            "seq {\n"
            f"      {compute}\n"
            "      while dlt.out {\n"
            "        seq {\n"
            "          grab;\n"
            "          invoke dpo(x = buf.out);\n"
            "          store;\n"
            "          bump;\n"
            "        }\n"
            "      }\n"
            "    }"
        )

    inputs = f"k: {w}" if cfg.flexible else ""
    static_prefix = ""
    if fused and not cfg.flexible:
        static_prefix = f"static<{total}> "

    lines = [f"{static_prefix}component main({inputs}) -> (first: {w}) {{"]
    lines.append("  cells {")
    for c in cells:
        lines.append(f"    {c}")
    lines.append("  }")
    lines.append("  wires {")
    lines.extend(groups)
    lines.extend(extra_groups)
    for s in wires:
        lines.append(f"    {s}")
    lines.append("    first = pe_0_0.acc_out;")
    lines.append("  }")
    lines.append("  control {")
    lines.append(f"    {control}")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines)
