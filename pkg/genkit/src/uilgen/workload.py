"""Deterministic workload generators emitting the simulator's JSON format."""

from __future__ import annotations

import random


def _mem(width: int, data: list[int]) -> dict:
    return {"width": width, "size": len(data), "data": list(data)}


def signed_to_bits(v: int, width: int) -> int:
    return v & ((1 << width) - 1)


def workload_matrices(
    rows: int, cols: int, k: int, seed: int, width: int = 32, kcap: int | None = None, signed: bool = False
) -> tuple[dict, list[list[int]], list[list[int]]]:
    """Row and column feed memories for a rows x cols systolic array.

    L<i> holds row i of A in feed order; T<j> holds column j of B. When
    kcap exceeds k (flexible arrays) the tail is zero padded and the
    runtime bound k is provided as an input. Returns the JSON document
    plus the two matrices for oracle use.
    """
    rng = random.Random(seed)
    lo = -8 if signed else 0
    a = [[rng.randrange(lo, 9) for _ in range(k)] for _ in range(rows)]
    b = [[rng.randrange(lo, 9) for _ in range(cols)] for _ in range(k)]
    cap = kcap or k
    mems = {}
    for i in range(rows):
        feed = [signed_to_bits(a[i][m], width) for m in range(k)] + [0] * (cap - k)
        mems[f"L{i}"] = _mem(width, feed)
    for j in range(cols):
        feed = [signed_to_bits(b[m][j], width) for m in range(k)] + [0] * (cap - k)
        mems[f"T{j}"] = _mem(width, feed)
    mems["res"] = _mem(width, [0] * (rows * cols))
    doc = {"memories": mems}
    if kcap is not None:
        doc["inputs"] = {"k": k}
    return doc, a, b


def workload_pifo_balanced(
    count: int, seed: int, classes: int = 3, width: int = 32
) -> tuple[dict, list[tuple[str, int, int]]]:
    """Balanced random push/pop event stream: count//2 of each, shuffled.

    Encoded as three parallel memories (ops, cls, vals) plus zeroed
    result buffers sized for the simulator's stores. Also returns the
    decoded event list for oracle use.
    """
    rng = random.Random(seed)
    half = count // 2
    kinds = ["push"] * half + ["pop"] * (count - half)
    rng.shuffle(kinds)
    events = []
    for kind in kinds:
        cls = rng.randrange(classes)
        val = rng.randrange(1, 1 << 16)
        events.append((kind, cls, val))
    doc = {
        "memories": {
            "ops": _mem(1, [1 if kind == "push" else 0 for kind, _, _ in events]),
            "clsm": _mem(8, [cls for _, cls, _ in events]),
            "vals": _mem(width, [val for _, _, val in events]),
            "pops": _mem(width, [0] * count),
            "valids": _mem(1, [0] * count),
            "statsout": _mem(width, [0] * classes),
        }
    }
    return doc, events
