"""Ten fixed single-precision FLOPs on exact binary constants.

Used for the hex-trace golden test: every operand and result is exactly
representable, so the expected trace can be checked against any IEEE-754
converter by hand.
"""

from __future__ import annotations

from ..fpcore import Width
from . import KernelSpec, error_rate, register

SCOPES = ("alu",)

_PROGRAM = [
    ("add", 1.0, 1.0),
    ("sub", 3.0, 1.5),
    ("mul", 2.0, 0.5),
    ("div", 1.0, 4.0),
    ("add", 0.5, 0.25),
    ("mul", 3.0, 3.0),
    ("sub", 1.0, 0.25),
    ("div", 9.0, 2.0),
    ("add", 2.0, 4.0),
    ("mul", 0.5, 0.5),
]


def make_inputs(seed: int, n: int) -> list:
    return [[list(step) for step in _PROGRAM] for _ in range(n)]


def body(ops, program) -> list[float]:
    ops.enter("alu")
    ops.load_s(2 * len(program))
    out = []
    for name, a, b in program:
        fn = getattr(ops, name + "_s")
        out.append(fn(a, b))
    ops.store_s(len(out))
    ops.exit()
    return out


register(KernelSpec(
    name="micro",
    scopes=SCOPES,
    width=Width.SINGLE,
    body=body,
    make_inputs=make_inputs,
    metric=error_rate,
))
