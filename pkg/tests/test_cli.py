"""Driver behavior: presets, emit, sim output, exit codes."""

import json
import pathlib

import pytest

from uil.cli import main
from uil.pipeline import PRESETS

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
KERNELS = pathlib.Path(__file__).parent.parent / "kernels"


def test_preset_expansion_golden():
    lower = ["collapse-static", "static-fsm", "static-wrapper"]
    assert PRESETS == {
        "B": lower,
        "SH": ["infer-static", "static-promote", "cell-share"] + lower,
        "SC": ["infer-static", "static-promote", "schedule-compaction"] + lower,
        "SH-SC": ["infer-static", "static-promote", "cell-share", "schedule-compaction"] + lower,
        "SC-SH": ["infer-static", "static-promote", "schedule-compaction", "cell-share"] + lower,
    }


def test_sim_expression(tmp_path, capsys):
    data = tmp_path / "abcd.json"
    data.write_text(json.dumps({"inputs": {"a": 2, "b": 3, "c": 4, "d": 5}}))
    rc = main(["sim", str(FIXTURES / "fig_expr.uil"), "--data", str(data)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["outputs"] == {"out": 4}


def test_trace_jsonl(tmp_path):
    trace = tmp_path / "t.jsonl"
    rc = main(["sim", str(FIXTURES / "repeat_gapless.uil"), "--trace", str(trace)])
    assert rc == 0
    rows = [json.loads(line) for line in trace.read_text().splitlines()]
    assert len(rows) == 10
    assert rows[0]["active"] == ["/bump"]


def test_emit_after_collapse(capsys):
    rc = main(
        [
            "compile",
            str(FIXTURES / "fig_expr.uil"),
            "--pipeline",
            "B",
            "--emit",
            "after:collapse-static",
        ]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "static<4> group comp_seq" in text


def test_compile_writes_output(tmp_path):
    out = tmp_path / "out.uil"
    rc = main(["compile", str(KERNELS / "dot.uil"), "--pipeline", "SC", "-o", str(out)])
    assert rc == 0
    assert "while lt.out" not in out.read_text()  # fast path consumed the loop


def test_stats_sc_beats_baseline(capsys):
    results = {}
    for preset in ("B", "SC"):
        rc = main(
            [
                "stats",
                str(KERNELS / "dot.uil"),
                "--pipeline",
                preset,
                "--data",
                str(KERNELS / "dot.json"),
                "--json",
            ]
        )
        assert rc == 0
        results[preset] = json.loads(capsys.readouterr().out)
    assert results["SC"]["cycles"] < results["B"]["cycles"]
    assert results["SC"]["fsm_bits"] > 0
    assert results["B"]["wrappers"] == 0


def test_diagnostics_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.uil"
    bad.write_text(
        'import "primitives";\ncomponent main() -> () { cells { r = nope(8); } wires {} control {} }'
    )
    rc = main(["sim", str(bad)])
    assert rc == 1
    assert "unknown prototype" in capsys.readouterr().err


def test_sim_error_exit_code(tmp_path, capsys):
    src = tmp_path / "oob.uil"
    src.write_text(
        """
import "primitives";
component main() -> () {
  cells { m = std_mem_d1(8, 2, 8); }
  wires {
    group g { m.addr0 = 8'd7; m.write_data = 8'd1; m.write_en = 1'd1; g[done] = m.done; }
  }
  control { g; }
}
"""
    )
    rc = main(["sim", str(src)])
    assert rc == 2


def test_unknown_preset_usage_error():
    with pytest.raises(SystemExit):
        main(["compile", str(FIXTURES / "fig_expr.uil"), "--pipeline", "XX"])


def test_fuzz_subcommand(capsys):
    rc = main(["fuzz", "--seed", "42", "--count", "5"])
    assert rc == 0
    assert "5 trials ok" in capsys.readouterr().out
