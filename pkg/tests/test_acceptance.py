"""Acceptance suite. Each test enforces one release criterion at its
stated tolerance and prints a PASS line with the measured values.

Run with:  pytest tests/test_acceptance.py -v -s
"""

import json
import time

import pytest

from uil import latency_of, parse, print_program, simulate, validate
from uil.fuzz import gen_static_island, run_fuzz
from uil.ir import StaticPar
from uil.lower import PassConfig
from uil.opt import asap_schedule, share_cells
from uil.pipeline import LOWER_PASSES, PRESETS, run_pipeline, stats_of
from uil.textio import tokens_of

from conftest import load_fixture, load_kernel


def report(name: str, detail: str) -> None:
    print(f"PASS {name}: {detail}")


def static_span(trace, prog) -> int:
    """Cycles spanned by activity of the program's static groups."""
    names = set()
    for comp in prog.components:
        for sg in comp.static_groups:
            names.add("/" + sg.name)
    span = trace.active_span(lambda n: n in names)
    assert span is not None
    return span[1] - span[0] + 1


def test_compaction_golden():
    started = time.monotonic()
    prog = load_fixture("compact.uil")

    starts = asap_schedule(
        [1, 10, 1, 10],
        [
            (set(), {("cell", "ra")}),
            (set(), {("cell", "rb")}),
            ({("cell", "rb")}, {("cell", "rc")}),
            ({("cell", "ra")}, {("cell", "rd")}),
        ],
    )
    assert starts == [0, 0, 10, 1]

    promoted, _ = run_pipeline(prog, ["infer-static", "static-promote"] + LOWER_PASSES)
    compacted, _ = run_pipeline(prog, PRESETS["SC"])
    t_before = simulate(promoted)
    t_after = simulate(compacted)
    assert static_span(t_before, promoted) == 22
    assert static_span(t_after, compacted) == 11
    assert t_before.final == t_after.final
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    report("compaction-golden", f"island 22 -> 11 cycles, starts {starts}, {elapsed:.2f}s")


def test_collapse_golden():
    prog = load_fixture("collapse_par_seq.uil")
    out, _ = run_pipeline(prog, ["collapse-static"])
    text = "".join(tokens_of(print_program(out)))

    par_expected = """
    static<2> group comp_par {
      r1.in = %[0:1] ? 32'd1;
      r1.write_en = %[0:1] ? 1'd1;
      r2.in = %[0:2] ? 32'd4;
      r2.write_en = %[0:2] ? 1'd1;
    }
    """
    seq_expected = """
    static<3> group comp_seq {
      r1.in = %[0:1] ? 32'd1;
      r1.write_en = %[0:1] ? 1'd1;
      r2.in = %[1:3] ? 32'd4;
      r2.write_en = %[1:3] ? 1'd1;
    }
    """
    assert "".join(tokens_of(par_expected)) in text
    assert "".join(tokens_of(seq_expected)) in text
    report("collapse-golden", "comp_par static<2> %[0:1]/%[0:2]; comp_seq static<3> %[1:3]")


def test_latency_algebra_on_random_islands():
    started = time.monotonic()
    checked = 0
    for seed in range(200):
        prog = gen_static_island(seed)
        errs = [d for d in validate(prog) if d.severity == "error"]
        assert not errs, (seed, [str(d) for d in errs])
        comp = prog.components[0]
        expected = latency_of(comp.control, comp, prog)
        assert expected is not None and expected >= 1

        t_src = simulate(prog, record_trace=False)
        assert t_src.cycles == expected, (seed, t_src.cycles, expected)

        lowered, _ = run_pipeline(prog, LOWER_PASSES)
        t_low = simulate(lowered, record_trace=False)
        assert t_low.cycles == expected + 1, (seed, t_low.cycles, expected)
        checked += 1
    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    report("latency-algebra", f"{checked} islands span == latency, {elapsed:.1f}s")


@pytest.mark.parametrize("b,n", [(1, 10), (2, 10), (5, 10), (1, 100), (2, 100), (5, 100)])
def test_while_fast_path(b, n):
    prog = load_fixture(f"while_b{b}_n{n}.uil")
    fast, _ = run_pipeline(prog, LOWER_PASSES, PassConfig(while_fastpath=True))
    naive, _ = run_pipeline(prog, LOWER_PASSES, PassConfig(while_fastpath=False))
    t_fast = simulate(fast, record_trace=False)
    t_naive = simulate(naive, record_trace=False)
    assert t_fast.final == t_naive.final
    assert t_fast.cycles <= n * b + 2, (t_fast.cycles, n * b + 2)
    assert t_naive.cycles >= n * (b + 1), (t_naive.cycles, n * (b + 1))
    report(
        f"while-fast-path b={b} n={n}",
        f"fast {t_fast.cycles} <= {n * b + 2}, naive {t_naive.cycles} >= {n * (b + 1)}",
    )


def test_refinement_fuzz_1000():
    started = time.monotonic()
    summary = run_fuzz(seed=1, count=1000)
    elapsed = time.monotonic() - started
    assert summary.ok, [f"{f.seed}: {f.reason}" for f in summary.failures[:10]]
    assert elapsed < 300.0
    report("refinement-fuzz", f"1000/1000 state-equal and never slower, {elapsed:.1f}s")


def test_cell_sharing_static_vs_dynamic_par():
    static_prog = load_fixture("share_static_par.uil")
    shared = share_cells(static_prog)
    mults = sum(1 for c in shared.components[0].cells if c.proto == "std_mult")
    assert mults == 1
    assert simulate(shared).final == simulate(static_prog).final

    dynamic_prog = load_fixture("share_dynamic_par.uil")
    kept = share_cells(dynamic_prog)
    adders = sum(1 for c in kept.components[0].cells if c.proto == "std_cadd")
    assert adders == 2
    report("cell-sharing", "static par 2 -> 1 multiplier; dynamic par keeps 2 adders")


def test_pipeline_ordering_on_kernels():
    kernels = ["dot", "mvmul", "stencil", "triangular"]
    strict = 0
    lines = []
    for name in kernels:
        prog, data = load_kernel(name)
        cycles = {}
        cells = {}
        finals = set()
        for preset in ("B", "SH", "SC", "SH-SC", "SC-SH"):
            lowered, _ = run_pipeline(prog, PRESETS[preset])
            t = simulate(lowered, data=data, record_trace=False)
            cycles[preset] = t.cycles
            cells[preset] = stats_of(lowered).cell_count
            finals.add(json.dumps(t.final.as_json(), sort_keys=True))
        assert len(finals) == 1, f"{name}: presets disagree on final state"
        assert cycles["SC"] <= cycles["SH"] <= cycles["B"], (name, cycles)
        for preset in ("SH", "SH-SC", "SC-SH"):
            assert cells[preset] <= cells["B"], (name, preset, cells)
        if cycles["SC"] < cycles["B"]:
            strict += 1
        lines.append(f"{name} B={cycles['B']} SH={cycles['SH']} SC={cycles['SC']}")
    assert strict >= 3, f"SC strictly faster on only {strict} of 4 kernels"
    report("pipeline-ordering", "; ".join(lines) + f"; strict on {strict}/4")


def test_fsm_gapless_reexecution():
    prog = load_fixture("repeat_gapless.uil")
    comp = prog.components[0]
    n, g_latency = 5, 2

    t_src = simulate(prog)
    assert static_span(t_src, prog) == n * g_latency
    assert t_src.cycles == n * g_latency

    lowered, _ = run_pipeline(prog, LOWER_PASSES)
    t_low = simulate(lowered)
    span = t_low.active_span(lambda name: name == "/bump")
    assert span[1] - span[0] + 1 == n * g_latency
    assert t_low.final.outputs == {"count": n}
    report("fsm-gapless", f"repeat {n} x latency {g_latency} spans exactly {n * g_latency}")
