"""Pass registry, named pipeline presets, and structural statistics.

The five presets:

  B      lower only (collapse, fsm, wrapper)
  SH     infer, promote, cell sharing, lower
  SC     infer, promote, schedule compaction, lower
  SH-SC  infer, promote, sharing, compaction, lower
  SC-SH  infer, promote, compaction, sharing, lower
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import lower, opt
from .ir import Program
from .lower import PassConfig

PASSES = {
    "infer-static": opt.infer_static,
    "static-promote": opt.promote,
    "schedule-compaction": opt.compact_schedule,
    "cell-share": opt.share_cells,
    "collapse-static": lower.collapse_static,
    "static-fsm": lower.instantiate_fsms,
    "static-wrapper": lower.insert_wrappers,
}

LOWER_PASSES = ["collapse-static", "static-fsm", "static-wrapper"]

PRESETS = {
    "B": LOWER_PASSES,
    "SH": ["infer-static", "static-promote", "cell-share"] + LOWER_PASSES,
    "SC": ["infer-static", "static-promote", "schedule-compaction"] + LOWER_PASSES,
    "SH-SC": ["infer-static", "static-promote", "cell-share", "schedule-compaction"] + LOWER_PASSES,
    "SC-SH": ["infer-static", "static-promote", "schedule-compaction", "cell-share"] + LOWER_PASSES,
}


def preset_passes(name: str) -> list[str]:
    return list(PRESETS[name])


def run_pipeline(
    prog: Program,
    passes: list[str],
    config: PassConfig | None = None,
    emit_after: str | None = None,
) -> tuple[Program, Program | None]:
    """Run passes in order; also returns the snapshot after `emit_after`."""
    config = config or PassConfig()
    snapshot: Program | None = None
    for name in passes:
        if name not in PASSES:
            raise KeyError(f"unknown pass {name!r}")
        prog = PASSES[name](prog, config)
        if name == emit_after:
            snapshot = prog
    return prog, snapshot


@dataclass
class StatsReport:
    cycles: int | None = None
    groups: int = 0
    static_groups: int = 0
    fsm_bits: int = 0
    wrappers: int = 0
    cells_by_proto: dict[str, int] = field(default_factory=dict)

    @property
    def cell_count(self) -> int:
        return sum(self.cells_by_proto.values())

    def as_json(self) -> dict:
        return {
            "version": 1,
            "cycles": self.cycles,
            "groups": self.groups,
            "static_groups": self.static_groups,
            "fsm_bits": self.fsm_bits,
            "wrappers": self.wrappers,
            "cells": dict(sorted(self.cells_by_proto.items())),
            "cell_count": self.cell_count,
        }


def stats_of(prog: Program, cycles: int | None = None) -> StatsReport:
    report = StatsReport(cycles=cycles)
    for comp in prog.components:
        report.groups += len(comp.groups)
        report.static_groups += len(comp.static_groups)
        for g in comp.groups:
            if "wrapper" in g.attrs:
                report.wrappers += 1
        for cell in comp.cells:
            report.cells_by_proto[cell.proto] = report.cells_by_proto.get(cell.proto, 0) + 1
            if "fsm" in cell.attrs and cell.args:
                report.fsm_bits += cell.args[0]
    return report
