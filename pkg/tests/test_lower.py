"""Collapse, FSM instantiation, and wrapper insertion."""

import pytest

from uil import parse, print_program, simulate, validate
from uil.ir import Enable, Guard, StaticEnable, walk_control
from uil.lower import PassConfig, collapse_static, insert_wrappers, instantiate_fsms
from uil.pipeline import LOWER_PASSES, run_pipeline
from uil.textio import tokens_of

from conftest import load_fixture


def lower_all(prog, fastpath=True):
    out, _ = run_pipeline(prog, LOWER_PASSES, PassConfig(while_fastpath=fastpath))
    return out


def norm(text: str) -> list[str]:
    return tokens_of(text)


class TestCollapse:
    def test_par_golden(self):
        prog = load_fixture("collapse_par_seq.uil")
        out = collapse_static(prog)
        comp = out.component_map()["par_case"]
        sg = comp.static_group_map()["comp_par"]
        assert sg.latency == 2
        text = print_program(out)
        expected = """
        static<2> group comp_par {
          r1.in = %[0:1] ? 32'd1;
          r1.write_en = %[0:1] ? 1'd1;
          r2.in = %[0:2] ? 32'd4;
          r2.write_en = %[0:2] ? 1'd1;
        }
        """
        assert "".join(norm(expected)) in "".join(norm(text))

    def test_seq_golden(self):
        prog = load_fixture("collapse_par_seq.uil")
        out = collapse_static(prog)
        comp = out.component_map()["main"]
        sg = comp.static_group_map()["comp_seq"]
        assert sg.latency == 3
        text = print_program(out)
        expected = """
        static<3> group comp_seq {
          r1.in = %[0:1] ? 32'd1;
          r1.write_en = %[0:1] ? 1'd1;
          r2.in = %[1:3] ? 32'd4;
          r2.write_en = %[1:3] ? 1'd1;
        }
        """
        assert "".join(norm(expected)) in "".join(norm(text))

    def test_expression_island_collapses_to_static4(self, fig_expr):
        out = collapse_static(fig_expr)
        comp = out.components[0]
        sg = comp.static_group_map()["comp_seq"]
        assert sg.latency == 4
        mult_ops = [a for a in sg.assigns if a.dst.owner == "mult"]
        assert mult_ops and all(a.guard.interval == (1, 4) for a in mult_ops)
        # merged source groups are gone, replaced by one enable
        assert set(comp.static_group_map()) == {"comp_seq"}

    def test_collapse_preserves_cycle_exact_behavior(self, fig_expr):
        data = {"inputs": {"a": 5, "b": 2, "c": 3, "d": 3}}
        t0 = simulate(fig_expr, data=data)
        t1 = simulate(collapse_static(fig_expr), data=data)
        assert t0.final == t1.final
        assert t0.cycles == t1.cycles  # same-structure lowering keeps timing

    def test_repeat_keeps_body_group(self):
        prog = load_fixture("repeat_gapless.uil")
        out = collapse_static(prog)
        comp = out.components[0]
        assert "bump" in comp.static_group_map()
        rep = comp.static_group_map()["comp_repeat"]
        assert rep.latency == 10
        (go,) = rep.assigns
        assert go.dst.owner == "bump" and go.dst.port == "go"
        assert go.guard.interval == (0, 10)

    def test_static_if_stashes_condition(self):
        prog = parse(
            """
import "primitives";
component main() -> (res: 8) {
  cells { r = std_reg(8); w = std_wire(1); }
  wires {
    static<2> group yes { r.in = %[1:2] ? 8'd1; r.write_en = %[1:2] ? 1'd1; }
    static<2> group no { r.in = %[1:2] ? 8'd2; r.write_en = %[1:2] ? 1'd1; }
    w.in = 1'd1;
    res = r.out;
  }
  control { static if w.out { yes; } else { no; } }
}
"""
        )
        out = collapse_static(prog)
        comp = out.components[0]
        assert "cond_stash" in comp.cell_map()
        t0 = simulate(prog)
        t1 = simulate(out)
        assert t0.final == t1.final and t0.cycles == t1.cycles


class TestFsm:
    def test_counter_and_guards(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { m = std_mult(8); r = std_reg(8); }
  wires {
    static<4> group g {
      m.left = %[0:3] ? 8'd2;
      m.right = %[0:3] ? 8'd3;
      m.go = %[0:3] ? 1'd1;
      r.in = %[3:4] ? m.out;
      r.write_en = %[3:4] ? 1'd1;
    }
  }
  control { g; }
}
"""
        )
        out = instantiate_fsms(collapse_static(prog))
        comp = out.components[0]
        fsm = comp.cell_map()["g_fsm"]
        assert fsm.args == [2]  # ceil(log2 4) bits
        assert "fsm" in fsm.attrs
        text = print_program(out)
        assert "(g_fsm.out < 2'd3)" in text
        assert "(g_fsm.out == 2'd3)" in text

    def test_no_intervals_remain(self, fig_expr):
        out = instantiate_fsms(collapse_static(fig_expr))
        for comp in out.components:
            for sg in comp.static_groups:
                assert all(a.guard.interval is None for a in sg.assigns)

    def test_latency_one_group_needs_no_counter(self):
        prog = parse(
            """
import "primitives";
component main() -> () {
  cells { r = std_reg(8); }
  wires { static<1> group g { r.in = %[0:1] ? 8'd1; r.write_en = 8'd1 == 8'd1 ? 1'd1; } }
  control { g; }
}
"""
        )
        out = instantiate_fsms(collapse_static(prog))
        comp = out.components[0]
        assert "g_fsm" not in comp.cell_map()
        assert all(a.guard.interval is None for a in comp.static_groups[0].assigns)

    def test_fsm_wraps_for_repeat(self):
        prog = load_fixture("repeat_gapless.uil")
        staged = instantiate_fsms(collapse_static(prog))
        t0 = simulate(prog)
        t1 = simulate(staged)
        assert t0.final == t1.final and t0.cycles == t1.cycles
        assert t1.active_span(lambda n: n == "/bump") == (0, 9)


class TestWrappers:
    def test_wrapper_done_one_cycle_after_body(self, fig_expr):
        data = {"inputs": {"a": 2, "b": 3, "c": 4, "d": 5}}
        src = simulate(fig_expr, data=data)
        low = simulate(lower_all(fig_expr), data=data)
        assert low.final == src.final
        assert low.cycles == src.cycles + 1  # one island, one handshake cycle

    def test_no_wrapper_inside_static_component(self):
        prog = parse(
            """
import "primitives";
static<2> component f(v: 8) -> (o: 8) {
  cells { r = std_reg(8); }
  wires {
    static<2> group g {
      r.in = %[1:2] ? v;
      r.write_en = %[1:2] ? 1'd1;
    }
    o = r.out;
  }
  control { g; }
}
component main() -> (res: 8) {
  cells { c = f(); out_r = std_reg(8); }
  wires {
    group grab {
      out_r.in = c.o;
      out_r.write_en = 1'd1;
      grab[done] = out_r.done;
    }
    res = out_r.out;
  }
  control {
    seq {
      static invoke c(v = 8'd9);
      grab;
    }
  }
}
"""
        )
        assert validate(prog) == []
        out = lower_all(prog)
        sub = out.component_map()["f"]
        assert not sub.groups  # no wrapper groups added to the static component
        t = simulate(out)
        assert t.final.outputs == {"res": 9}

    def test_wrapper_reinvocable(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { r = std_reg(8); add = std_cadd(8); }
  wires {
    static<2> group bump {
      add.left = %[1:2] ? r.out;
      add.right = %[1:2] ? 8'd1;
      r.in = %[1:2] ? add.out;
      r.write_en = %[1:2] ? 1'd1;
    }
    v = r.out;
  }
  control { seq { bump; bump; } }
}
"""
        )
        out = lower_all(prog)
        t = simulate(out)
        assert t.final.outputs == {"v": 2}  # both executions completed

    def test_leaves_under_dynamic_control_are_dynamic(self, fig_expr):
        out = lower_all(fig_expr)
        comp = out.components[0]
        dyn_groups = set(comp.group_map())
        for node in walk_control(comp.control):
            if isinstance(node, Enable):
                assert node.group in dyn_groups
            assert not isinstance(node, StaticEnable)

    def test_while_fastpath_vs_naive(self):
        for b, n in [(1, 10), (2, 10), (5, 10), (1, 100), (2, 100), (5, 100)]:
            prog = load_fixture(f"while_b{b}_n{n}.uil")
            fast = simulate(lower_all(prog), record_trace=False)
            naive = simulate(lower_all(prog, fastpath=False), record_trace=False)
            assert fast.final == naive.final
            assert fast.cycles <= n * b + 2
            assert naive.cycles >= n * (b + 1)

    def test_passes_individually_preserve_state(self, fig_expr):
        data = {"inputs": {"a": 9, "b": 4, "c": 2, "d": 3}}
        ref = simulate(fig_expr, data=data).final
        staged = fig_expr
        for pass_fn in (collapse_static, instantiate_fsms, insert_wrappers):
            staged = pass_fn(staged, PassConfig())
            errs = [d for d in validate(staged, allow_reserved=True) if d.severity == "error"]
            assert not errs, [str(d) for d in errs]
            assert simulate(staged, data=data).final == ref
