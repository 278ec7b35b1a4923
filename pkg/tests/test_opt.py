"""Inference, promotion, compaction, and sharing."""

import itertools
import random

import pytest

from uil import parse, simulate
from uil.ir import Enable, Seq, StaticEnable, StaticPar, StaticSeq, While, walk_control
from uil.lower import PassConfig
from uil.opt import (
    asap_schedule,
    compact_schedule,
    infer_static,
    infer_static_with_warnings,
    promote,
    share_cells,
)
from uil.pipeline import LOWER_PASSES, PRESETS, run_pipeline

from conftest import load_fixture


REG_GROUP = """
import "primitives";
component main() -> (v: 8) {
  cells { reg = std_reg(8); s = std_reg(8); }
  wires {
    group g { reg.in = 8'd10; reg.write_en = 1'd1; g[done] = reg.done; }
    group h { s.in = reg.out; s.write_en = 1'd1; h[done] = s.done; }
    v = s.out;
  }
  control { seq { g; h; } }
}
"""


class TestInference:
    def test_register_group_is_one_cycle(self):
        out = infer_static(parse(REG_GROUP))
        comp = out.components[0]
        assert comp.group_map()["g"].attrs["static"] == 1
        assert comp.group_map()["h"].attrs["static"] == 1

    def test_seq_annotation_matches_simulated_count(self):
        prog = parse(REG_GROUP)
        out = infer_static(prog)
        ann = out.components[0].control.attrs["static"]
        assert ann == simulate(prog, record_trace=False).cycles == 3

    def test_chained_completion(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { md = std_mult_dyn(8); r = std_reg(8); }
  wires {
    group g {
      md.left = 8'd6; md.right = 8'd7; md.go = 1'd1;
      r.in = md.out; r.write_en = md.done;
      g[done] = r.done;
    }
    v = r.out;
  }
  control { g; }
}
"""
        )
        out = infer_static(prog)
        ann = out.components[0].group_map()["g"].attrs["static"]
        assert ann == simulate(prog, record_trace=False).cycles == 4

    def test_divider_group_not_inferable(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { d = std_div(8); r = std_reg(8); }
  wires {
    group g {
      d.left = 8'd9; d.right = 8'd2; d.go = 1'd1;
      r.in = d.out; r.write_en = d.done;
      g[done] = r.done;
    }
    v = r.out;
  }
  control { g; }
}
"""
        )
        out = infer_static(prog)
        assert "static" not in out.components[0].group_map()["g"].attrs
        assert "static" not in out.components[0].control.attrs

    def test_while_never_annotated(self):
        prog = load_fixture("while_b1_n10.uil")
        out = infer_static(prog)
        assert "static" not in out.components[0].control.attrs

    def test_wrong_user_hint_warns_and_rederives(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { reg = std_reg(8); }
  wires {
    @static(3) group g { reg.in = 8'd10; reg.write_en = 1'd1; g[done] = reg.done; }
    v = reg.out;
  }
  control { g; }
}
"""
        )
        out, warnings = infer_static_with_warnings(prog)
        assert any("hinted @static(3) but derived 1" in w.message for w in warnings)
        assert out.components[0].group_map()["g"].attrs["static"] == 1


class TestPromotion:
    def test_group_promotes_to_static_group(self):
        prog = parse(REG_GROUP)
        out = promote(infer_static(prog), PassConfig())
        comp = out.components[0]
        assert set(comp.static_group_map()) == {"g", "h"}
        sg = comp.static_group_map()["g"]
        assert sg.latency == 1
        assert not any(a.dst.kind == "hole" for a in sg.assigns)
        assert isinstance(comp.control, StaticSeq)
        assert "promoted" in comp.control.attrs

    def test_promotion_is_a_refinement(self):
        prog = parse(REG_GROUP)
        base, _ = run_pipeline(prog, PRESETS["B"])
        prom, _ = run_pipeline(prog, ["infer-static", "static-promote"] + LOWER_PASSES)
        t_base = simulate(base)
        t_prom = simulate(prom)
        assert t_base.final == t_prom.final
        assert t_prom.cycles <= t_base.cycles

    def test_lone_group_not_promoted(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { reg = std_reg(8); d = std_div(8); q = std_reg(8); }
  wires {
    group g { reg.in = 8'd10; reg.write_en = 1'd1; g[done] = reg.done; }
    group dv {
      d.left = reg.out; d.right = 8'd3; d.go = 1'd1;
      q.in = d.out; q.write_en = d.done;
      dv[done] = q.done;
    }
    v = q.out;
  }
  control { seq { g; dv; } }
}
"""
        )
        out = promote(infer_static(prog), PassConfig())
        comp = out.components[0]
        # promoting the single 1-cycle group would add a wrapper handshake
        # and slow the program down, so it stays dynamic
        assert not comp.static_groups
        assert "g" in comp.group_map()

    def test_threshold_blocks_small_islands(self):
        prog = parse(REG_GROUP)
        out = promote(infer_static(prog), PassConfig(promote_threshold=3))
        assert not out.components[0].static_groups

    def test_oversized_island_split_into_children(self):
        # repeat body of 2 cycles, 5000 iterations: the whole loop exceeds
        # the cycle bound but the 2-group body fits
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { r = std_reg(8); s = std_reg(8); }
  wires {
    group g { r.in = 8'd1; r.write_en = 1'd1; g[done] = r.done; }
    group h { s.in = 8'd2; s.write_en = 1'd1; h[done] = s.done; }
    v = s.out;
  }
  control { repeat 5000 { seq { g; h; } } }
}
"""
        )
        out = promote(infer_static(prog), PassConfig(promote_max_cycles=4096))
        comp = out.components[0]
        ctrl = comp.control
        from uil.ir import Repeat

        assert isinstance(ctrl, Repeat)  # loop itself not promoted
        assert isinstance(ctrl.body, StaticSeq)  # but its body is
        whole = promote(infer_static(prog), PassConfig(promote_max_cycles=100_000))
        from uil.ir import StaticRepeat

        assert isinstance(whole.components[0].control, StaticRepeat)

    def test_promoted_cycles_equal_static_latency_plus_wrapper(self):
        prog = parse(REG_GROUP)
        prom, _ = run_pipeline(prog, ["infer-static", "static-promote"] + LOWER_PASSES)
        assert simulate(prom).cycles == 2 + 1


class TestCompaction:
    def test_golden_starts_and_makespan(self):
        # latencies 1, 10, 1, 10 with B->C and A->D
        lats = [1, 10, 1, 10]
        accesses = [
            (set(), {("cell", "ra")}),
            (set(), {("cell", "rb")}),
            ({("cell", "rb")}, {("cell", "rc")}),
            ({("cell", "ra")}, {("cell", "rd")}),
        ]
        starts = asap_schedule(lats, accesses)
        assert starts == [0, 0, 10, 1]
        assert max(s + l for s, l in zip(starts, lats)) == 11

    def test_fixture_compacts_to_static_par_with_delays(self):
        prog = load_fixture("compact.uil")
        out, _ = run_pipeline(prog, ["infer-static", "static-promote", "schedule-compaction"])
        comp = out.components[0]
        assert isinstance(comp.control, StaticPar)
        names = set(comp.static_group_map())
        assert "__delay_10" in names and "__delay_1" in names

    def test_chain_left_alone(self):
        prog = parse(
            """
import "primitives";
component main() -> (v: 8) {
  cells { r = std_reg(8); s = std_reg(8); t = std_reg(8); }
  wires {
    group a { r.in = 8'd1; r.write_en = 1'd1; a[done] = r.done; }
    group b { s.in = r.out; s.write_en = 1'd1; b[done] = s.done; }
    group c { t.in = s.out; t.write_en = 1'd1; c[done] = t.done; }
    v = t.out;
  }
  control { seq { a; b; c; } }
}
"""
        )
        out, _ = run_pipeline(prog, ["infer-static", "static-promote", "schedule-compaction"])
        comp = out.components[0]
        assert isinstance(comp.control, StaticSeq)  # no slack anywhere

    def test_independent_children_all_start_at_zero(self):
        starts = asap_schedule([3, 3, 3], [(set(), {("cell", f"r{i}")}) for i in range(3)])
        assert starts == [0, 0, 0]

    def test_makespan_optimal_on_small_instances(self):
        # oracle: minimum over all dependency-respecting schedules equals
        # the longest path through the dependency dag
        rng = random.Random(7)
        for _ in range(60):
            n = rng.randrange(2, 7)
            lats = [rng.randrange(1, 9) for _ in range(n)]
            cells = [f"c{i}" for i in range(n + 2)]
            accesses = []
            for _ in range(n):
                reads = {("cell", rng.choice(cells)) for _ in range(rng.randrange(0, 2))}
                writes = {("cell", rng.choice(cells))}
                accesses.append((reads, writes))
            starts = asap_schedule(lats, accesses)
            makespan = max(s + l for s, l in zip(starts, lats))

            edges = []
            for j in range(n):
                rj, wj = accesses[j]
                for i in range(j):
                    ri, wi = accesses[i]
                    if (wi & wj) or (wi & rj) or (ri & wj):
                        edges.append((i, j))

            def longest_path():
                best = [0] * n
                for j in range(n):
                    best[j] = lats[j] + max(
                        (best[i] for i, k in edges if k == j), default=0
                    )
                return max(best, default=0)

            assert makespan == longest_path()
            assert makespan <= sum(lats)
            for i, j in edges:
                assert starts[j] >= starts[i] + lats[i]

    def test_compaction_preserves_state(self):
        prog = load_fixture("compact.uil")
        base, _ = run_pipeline(prog, PRESETS["B"])
        sc, _ = run_pipeline(prog, PRESETS["SC"])
        assert simulate(base).final == simulate(sc).final

    def test_user_static_components_left_alone(self):
        prog = parse(
            """
import "primitives";
static<2> component f() -> (o: 8) {
  cells { r = std_reg(8); s = std_reg(8); }
  wires {
    static<1> group a { r.in = 8'd1; r.write_en = 1'd1; }
    static<1> group b { s.in = 8'd2; s.write_en = 1'd1; }
    o = s.out;
  }
  control { static seq { a; b; } }
}
component main() -> (res: 8) {
  cells { c = f(); r = std_reg(8); }
  wires {
    group grab { r.in = c.o; r.write_en = 1'd1; grab[done] = r.done; }
    res = r.out;
  }
  control { seq { static invoke c(); grab; } }
}
"""
        )
        out = compact_schedule(infer_static(prog))
        sub = out.component_map()["f"]
        assert isinstance(sub.control, StaticSeq)  # declared latency kept


class TestSharing:
    def test_static_par_disjoint_windows_share(self):
        prog = load_fixture("share_static_par.uil")
        out = share_cells(prog)
        comp = out.components[0]
        assert sum(1 for c in comp.cells if c.proto == "std_mult") == 1
        assert simulate(out).final == simulate(prog).final

    def test_dynamic_par_never_shares(self):
        prog = load_fixture("share_dynamic_par.uil")
        out = share_cells(prog)
        comp = out.components[0]
        assert sum(1 for c in comp.cells if c.proto == "std_cadd") == 2

    def test_sequential_reuse_shares(self):
        prog = load_fixture("share_seq.uil")
        out = share_cells(prog)
        comp = out.components[0]
        assert sum(1 for c in comp.cells if c.proto == "std_cadd") == 1
        assert simulate(out).final == simulate(prog).final

    def test_overlapping_static_windows_kept_apart(self):
        prog = parse(
            """
import "primitives";
component main() -> (x: 8, y: 8) {
  cells { m0 = std_mult(8); m1 = std_mult(8); r0 = std_reg(8); r1 = std_reg(8); }
  wires {
    static<4> group t0 {
      m0.left = %[0:3] ? 8'd2; m0.right = %[0:3] ? 8'd3; m0.go = %[0:3] ? 1'd1;
      r0.in = %[3:4] ? m0.out; r0.write_en = %[3:4] ? 1'd1;
    }
    static<4> group t1 {
      m1.left = %[0:3] ? 8'd4; m1.right = %[0:3] ? 8'd5; m1.go = %[0:3] ? 1'd1;
      r1.in = %[3:4] ? m1.out; r1.write_en = %[3:4] ? 1'd1;
    }
    x = r0.out;
    y = r1.out;
  }
  control { static par { t0; t1; } }
}
"""
        )
        out = share_cells(prog)
        assert sum(1 for c in out.components[0].cells if c.proto == "std_mult") == 2

    def test_sharing_keeps_cycles(self):
        prog = load_fixture("share_seq.uil")
        t0 = simulate(prog)
        t1 = simulate(share_cells(prog))
        assert t0.cycles == t1.cycles
