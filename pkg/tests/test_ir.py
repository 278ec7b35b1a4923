"""Latency algebra, guard normalization, and validation diagnostics."""

import pytest

from uil import latency_of, normalize_guards, parse, validate
from uil.ir import (
    Component,
    Empty,
    StaticEnable,
    StaticRepeat,
    StaticSeq,
    StaticPar,
)

from conftest import load_fixture


def comp_of(text: str):
    prog = parse(text)
    return prog, prog.components[-1]


ISLAND = """
import "primitives";
component main() -> () {
  cells { r1 = std_reg(8); r2 = std_reg(8); }
  wires {
    static<1> group do_add { r1.in = 8'd1; r1.write_en = 1'd1; }
    static<3> group do_mult { r2.in = %[2:3] ? 8'd2; r2.write_en = %[2:3] ? 1'd1; }
  }
  control { static seq { do_add; do_mult; } }
}
"""


class TestLatencyAlgebra:
    def test_seq_is_sum(self):
        prog, comp = comp_of(ISLAND)
        assert latency_of(comp.control, comp, prog) == 4

    def test_par_is_max(self):
        prog, comp = comp_of(ISLAND)
        node = StaticPar([StaticEnable("do_add"), StaticEnable("do_mult")])
        assert latency_of(node, comp, prog) == 3

    def test_repeat_scales(self):
        prog, comp = comp_of(ISLAND)
        body = StaticEnable("do_mult")
        assert latency_of(StaticRepeat(3, body), comp, prog) == 9

    def test_repeat_of_empty_seq_is_zero(self):
        prog, comp = comp_of(ISLAND)
        assert latency_of(StaticRepeat(5, StaticSeq([])), comp, prog) == 0

    def test_dynamic_nodes_have_no_latency(self, fig_expr):
        comp = fig_expr.components[0]
        assert latency_of(comp.control, comp, fig_expr) is None

    def test_empty_is_zero(self):
        prog, comp = comp_of(ISLAND)
        assert latency_of(Empty(), comp, prog) == 0


class TestNormalizeGuards:
    def test_missing_interval_becomes_whole_window(self):
        prog, comp = comp_of(ISLAND)
        sg = comp.static_group_map()["do_add"]
        out = normalize_guards(sg)
        assert all(a.guard.interval == (0, 1) for a in out.assigns)

    def test_existing_intervals_kept(self):
        prog, comp = comp_of(ISLAND)
        sg = comp.static_group_map()["do_mult"]
        out = normalize_guards(sg)
        assert [a.guard.interval for a in out.assigns] == [(2, 3), (2, 3)]

    def test_idempotent(self):
        prog, comp = comp_of(ISLAND)
        sg = comp.static_group_map()["do_mult"]
        once = normalize_guards(sg)
        assert normalize_guards(once) == once


class TestValidate:
    def test_valid_expression_example(self, fig_expr):
        assert validate(fig_expr) == []

    def test_static_parent_dynamic_child(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); d = std_div(8); }
  wires {
    static<1> group do_add { r.in = 8'd1; r.write_en = 1'd1; }
    group do_div { d.go = 1'd1; d.left = 8'd9; d.right = 8'd3; do_div[done] = d.done; }
  }
  control { static seq { do_add; do_div; } }
}
"""
        )
        msgs = [d.message for d in validate(prog)]
        assert any("static parent, dynamic child" in m for m in msgs)

    def test_interval_exceeding_latency(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires {
    static<4> group g { r.in = %[2:6] ? 8'd1; r.write_en = %[2:6] ? 1'd1; }
  }
  control { g; }
}
"""
        )
        msgs = [d.message for d in validate(prog)]
        assert len(msgs) == 2  # one per assignment
        assert all("exceeds latency" in m for m in msgs)

    def test_width_mismatch(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires { group g { r.in = 16'd1; r.write_en = 1'd1; g[done] = r.done; } }
  control { g; }
}
"""
        )
        msgs = [d.message for d in validate(prog)]
        assert any("width mismatch" in m for m in msgs)

    def test_combinational_cycle_reported_with_path(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { w0 = std_wire(8); w1 = std_wire(8); r = std_reg(8); }
  wires {
    group g {
      w0.in = w1.out;
      w1.in = w0.out;
      r.in = w0.out;
      r.write_en = 1'd1;
      g[done] = r.done;
    }
  }
  control { g; }
}
"""
        )
        diags = validate(prog)
        assert any("combinational cycle" in d.message for d in diags)
        cyc = next(d for d in diags if "combinational cycle" in d.message)
        assert "w0" in cyc.message and "w1" in cyc.message

    def test_register_feedback_is_not_a_cycle(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); add = std_cadd(8); }
  wires {
    group g {
      add.left = r.out;
      add.right = 8'd1;
      r.in = add.out;
      r.write_en = 1'd1;
      g[done] = r.done;
    }
  }
  control { g; }
}
"""
        )
        assert validate(prog) == []

    def test_missing_done_assignment(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires { group g { r.in = 8'd1; r.write_en = 1'd1; } }
  control { g; }
}
"""
        )
        assert any("never assigns its done" in d.message for d in validate(prog))

    def test_static_group_rejects_done(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires { static<1> group g { r.in = 8'd1; r.write_en = 1'd1; g[done] = 1'd1; } }
  control { g; }
}
"""
        )
        assert any("may not assign a done" in d.message for d in validate(prog))

    def test_reserved_delay_prefix(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires { static<1> group __delay_3 { r.in = 8'd1; r.write_en = 1'd1; } }
  control { __delay_3; }
}
"""
        )
        assert any("reserved prefix" in d.message for d in validate(prog))
        assert not [d for d in validate(prog, allow_reserved=True) if "reserved" in d.message]

    def test_declared_latency_must_match_control(self):
        prog = parse(
            """
import "primitives";
static<5> component f() -> () {
  cells { r = std_reg(8); }
  wires { static<1> group g { r.in = 8'd1; r.write_en = 1'd1; } }
  control { g; }
}
component main() -> () {
  cells { c = f(); }
  wires {}
  control { static invoke c(); }
}
"""
        )
        assert any("declares latency 5" in d.message for d in validate(prog))

    def test_zero_latency_static_repeat_rejected(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells {}
  wires {}
  control { static repeat 3 { static seq {} } }
}
"""
        )
        assert any("zero-latency" in d.message for d in validate(prog))

    def test_unknown_prototype(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_bogus(8); }
  wires {}
  control {}
}
"""
        )
        assert any("unknown prototype" in d.message for d in validate(prog))

    def test_diagnostics_carry_spans(self):
        prog = parse(
            'import "primitives";\n'
            "component main() -> () {\n"
            "  cells { r = std_bogus(8); }\n"
            "  wires {}\n"
            "  control {}\n"
            "}\n",
            "probe.uil",
        )
        d = validate(prog)[0]
        assert d.span.file == "probe.uil"
        assert d.span.line == 3
