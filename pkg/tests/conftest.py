import json
import pathlib

import pytest

from uil import parse, validate

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
KERNELS = pathlib.Path(__file__).parent.parent / "kernels"


def load_fixture(name: str):
    path = FIXTURES / name
    prog = parse(path.read_text(), str(path))
    diags = [d for d in validate(prog) if d.severity == "error"]
    assert not diags, [str(d) for d in diags]
    return prog


def load_kernel(name: str):
    prog = parse((KERNELS / f"{name}.uil").read_text(), name)
    diags = [d for d in validate(prog) if d.severity == "error"]
    assert not diags, [str(d) for d in diags]
    data = json.loads((KERNELS / f"{name}.json").read_text())
    return prog, data


@pytest.fixture
def fig_expr():
    return load_fixture("fig_expr.uil")
