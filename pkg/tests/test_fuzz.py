"""Quick randomized differential checks; the full 1000-trial run lives in
the acceptance suite."""

import pytest

from uil import validate
from uil.fuzz import gen_program, run_fuzz, run_trial
from uil.pipeline import PRESETS


@pytest.mark.parametrize("seed", range(25))
def test_generated_programs_validate(seed):
    prog = gen_program(seed)
    assert [d for d in validate(prog) if d.severity == "error"] == []


def test_same_seed_same_program():
    assert gen_program(123) == gen_program(123)


def test_promotion_differential_batch():
    summary = run_fuzz(5000, 60)
    assert summary.ok, [f"{f.seed}: {f.reason}" for f in summary.failures[:5]]


def test_all_pipelines_differential_batch():
    extra = [PRESETS[p] for p in ("SH", "SC", "SH-SC", "SC-SH")]
    summary = run_fuzz(9000, 25, extra)
    assert summary.ok, [f"{f.seed}: {f.reason}" for f in summary.failures[:5]]


def test_trial_reports_cycles():
    r = run_trial(77)
    assert r.ok
    assert r.baseline_cycles >= r.promoted_cycles >= 1
