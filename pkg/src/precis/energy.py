"""Energy accounting from instrumented execution counters.

FPU energy scales each op class's energy-per-instruction by the mean
manipulated-bit fraction over (operand, operand, result); a full-precision
op with saturated mantissas therefore costs exactly its EPI.  Memory energy
charges a flat picojoule rate per byte moved, with reduced-width values
occupying 1 sign + exponent + (k-1) explicit mantissa bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .fpcore import FpValue, OpClass, Width, manipulated_bits

# Quoted anchors: 400/680 pJ double add/div, 350/420 pJ single add/div,
# 1.5 nJ per byte from memory.  Sub rides the adder.  Mul figures are
# placeholders between add and div (the source chart is not machine
# readable); override them via an EPI config file when better numbers exist.
DEFAULT_EPI_PJ = {
    ("add", "single"): 350.0,
    ("add", "double"): 400.0,
    ("sub", "single"): 350.0,
    ("sub", "double"): 400.0,
    ("mul", "single"): 390.0,
    ("mul", "double"): 560.0,
    ("div", "single"): 420.0,
    ("div", "double"): 680.0,
}
DEFAULT_MEM_PJ_PER_BYTE = 1500.0

_EPI_KEYS = {
    "%s_%s" % (op, w): (op, w)
    for op in ("add", "sub", "mul", "div")
    for w in ("single", "double")
}


class EnergyConfigError(ValueError):
    """Malformed or incomplete EPI table."""


@dataclass(frozen=True)
class EpiTable:
    """Energy per instruction at full precision, plus the memory byte rate."""

    epi_pj: dict[tuple[str, str], float] = field(
        default_factory=lambda: dict(DEFAULT_EPI_PJ)
    )
    mem_pj_per_byte: float = DEFAULT_MEM_PJ_PER_BYTE

    def __post_init__(self):
        for key, val in self.epi_pj.items():
            if val <= 0:
                raise EnergyConfigError("EPI for %s must be positive" % (key,))
        if self.mem_pj_per_byte <= 0:
            raise EnergyConfigError("mem_pj_per_byte must be positive")

    def get(self, op: OpClass, width: Width) -> float:
        try:
            return self.epi_pj[(op.value, width.value)]
        except KeyError:
            raise EnergyConfigError(
                "no EPI entry for (%s, %s)" % (op.value, width.value)
            ) from None

    @classmethod
    def from_file(cls, path: str) -> "EpiTable":
        """Load overrides from a JSON file; absent keys keep their defaults.

        Recognized keys: add_single, add_double, sub_*, mul_*, div_*,
        mem_pj_per_byte.
        """
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise EnergyConfigError("EPI config must be a JSON object")
        epi = dict(DEFAULT_EPI_PJ)
        mem = DEFAULT_MEM_PJ_PER_BYTE
        for key, val in raw.items():
            if key == "mem_pj_per_byte":
                mem = float(val)
            elif key in _EPI_KEYS:
                epi[_EPI_KEYS[key]] = float(val)
            else:
                raise EnergyConfigError("unknown EPI config key %r" % key)
        return cls(epi, mem)


class ScopeCounters:
    """Tallies for one scope: FLOPs and manipulated-bit sums per
    (op class, width) cell, plus bits moved to/from memory."""

    __slots__ = ("ops", "mem_bits")

    def __init__(self):
        # (OpClass, Width) -> [flop_count, manipulated_bit_sum]
        self.ops: dict[tuple[OpClass, Width], list[int]] = {}
        self.mem_bits = 0

    def cell(self, op: OpClass, width: Width) -> list[int]:
        key = (op, width)
        c = self.ops.get(key)
        if c is None:
            c = [0, 0]
            self.ops[key] = c
        return c

    def flops(self) -> int:
        return sum(c[0] for c in self.ops.values())


class ExecutionCounters:
    """Per-scope execution tallies for one kernel run.

    Counters only grow; merging two runs' counters is associative and
    commutative, so parallel evaluations can be combined safely.
    """

    __slots__ = ("scopes",)

    def __init__(self):
        self.scopes: dict[str, ScopeCounters] = {}

    def scope(self, name: str) -> ScopeCounters:
        sc = self.scopes.get(name)
        if sc is None:
            sc = ScopeCounters()
            self.scopes[name] = sc
        return sc

    def record_flop(
        self,
        scope: str,
        op: OpClass,
        width: Width,
        a: FpValue,
        b: FpValue,
        r: FpValue,
    ) -> None:
        """Count one FLOP whose values are already truncated per the
        resolved FPI; bits from both operands and the result accrue."""
        cell = self.scope(scope).cell(op, width)
        cell[0] += 1
        cell[1] += manipulated_bits(a) + manipulated_bits(b) + manipulated_bits(r)

    def record_mem(
        self,
        scope: str,
        width: Width,
        k: int,
        n_values: int,
        direction: str = "load",
    ) -> None:
        """Count n_values moved at mantissa budget k: each occupies
        1 sign + exponent + (k-1) explicit mantissa bits."""
        if not 1 <= k <= width.mantissa_bits:
            raise ValueError("k=%d out of range for %s" % (k, width.value))
        if direction not in ("load", "store"):
            raise ValueError("direction must be 'load' or 'store'")
        bits_per_value = 1 + width.exponent_bits + (k - 1)
        self.scope(scope).mem_bits += n_values * bits_per_value

    def total_flops(self) -> int:
        return sum(sc.flops() for sc in self.scopes.values())

    def flops_by_width(self) -> dict[Width, int]:
        out = {Width.SINGLE: 0, Width.DOUBLE: 0}
        for sc in self.scopes.values():
            for (_, width), cell in sc.ops.items():
                out[width] += cell[0]
        return out

    def merge(self, other: "ExecutionCounters") -> None:
        for name, sc in other.scopes.items():
            mine = self.scope(name)
            mine.mem_bits += sc.mem_bits
            for key, cell in sc.ops.items():
                c = mine.cell(*key)
                c[0] += cell[0]
                c[1] += cell[1]


def fpu_energy(
    counters: ExecutionCounters, table: EpiTable
) -> tuple[float, dict[str, float]]:
    """Total and per-scope FPU picojoules.

    Each (op, width) cell contributes EPI * bit_sum / (3 * full mantissa
    width): linear in the mean manipulated-bit fraction of the three values
    each FLOP touches.
    """
    per_scope: dict[str, float] = {}
    total = 0.0
    for name, sc in counters.scopes.items():
        pj = 0.0
        for (op, width), cell in sc.ops.items():
            if cell[0] == 0:
                continue
            pj += table.get(op, width) * cell[1] / (3.0 * width.mantissa_bits)
        per_scope[name] = pj
        total += pj
    return total, per_scope


def mem_energy(counters: ExecutionCounters, table: EpiTable) -> float:
    """Memory-transfer picojoules: bits moved / 8 * rate per byte."""
    bits = sum(sc.mem_bits for sc in counters.scopes.values())
    return bits / 8.0 * table.mem_pj_per_byte


@dataclass(frozen=True)
class ProfileRow:
    scope: str
    op: OpClass
    width: Width
    flops: int
    bit_sum: int


@dataclass(frozen=True)
class ProfileReport:
    """Per-scope FLOP statistics from a profiling (identity) run."""

    rows: tuple[ProfileRow, ...]          # sorted by descending scope FLOPs
    scope_flops: tuple[tuple[str, int], ...]
    single_ratio: float
    double_ratio: float
    top10_coverage: float
    top_scopes: tuple[str, ...]

    @property
    def total_flops(self) -> int:
        return sum(n for _, n in self.scope_flops)


def profile_report(counters: ExecutionCounters) -> ProfileReport:
    """Summarize a completed run: rows sorted by scope FLOP weight, the
    single/double split, and how much of the work the top-10 scopes cover.

    An empty run reports ratios of 0 and coverage 1.0 (degenerate case)."""
    totals = sorted(
        ((name, sc.flops()) for name, sc in counters.scopes.items()),
        key=lambda item: (-item[1], item[0]),
    )
    rows = []
    for name, _ in totals:
        sc = counters.scopes[name]
        for (op, width), cell in sorted(
            sc.ops.items(), key=lambda kv: (kv[0][1].value, kv[0][0].value)
        ):
            if cell[0]:
                rows.append(ProfileRow(name, op, width, cell[0], cell[1]))
    by_width = counters.flops_by_width()
    grand = by_width[Width.SINGLE] + by_width[Width.DOUBLE]
    if grand == 0:
        single_ratio = double_ratio = 0.0
        coverage = 1.0
    else:
        single_ratio = by_width[Width.SINGLE] / grand
        double_ratio = by_width[Width.DOUBLE] / grand
        top = totals[:10]
        coverage = sum(n for _, n in top) / grand
    return ProfileReport(
        rows=tuple(rows),
        scope_flops=tuple(totals),
        single_ratio=single_ratio,
        double_ratio=double_ratio,
        top10_coverage=coverage,
        top_scopes=tuple(name for name, n in totals[:10] if n > 0),
    )


@dataclass(frozen=True)
class EnergyReport:
    """Energy rollup for one run, optionally normalized to a baseline run."""

    fpu_pj: float
    fpu_per_scope: dict[str, float]
    mem_pj: float
    flops_single: int
    flops_double: int
    top10_coverage: float
    normalized_fpu: float | None = None
    normalized_mem: float | None = None


def energy_report(
    counters: ExecutionCounters,
    table: EpiTable,
    baseline: "EnergyReport | None" = None,
) -> EnergyReport:
    total, per_scope = fpu_energy(counters, table)
    mem = mem_energy(counters, table)
    by_width = counters.flops_by_width()
    prof = profile_report(counters)
    norm_fpu = norm_mem = None
    if baseline is not None:
        norm_fpu = 100.0 * total / baseline.fpu_pj if baseline.fpu_pj else 100.0
        norm_mem = 100.0 * mem / baseline.mem_pj if baseline.mem_pj else 100.0
    return EnergyReport(
        fpu_pj=total,
        fpu_per_scope=per_scope,
        mem_pj=mem,
        flops_single=by_width[Width.SINGLE],
        flops_double=by_width[Width.DOUBLE],
        top10_coverage=prof.top10_coverage,
        normalized_fpu=norm_fpu,
        normalized_mem=norm_mem,
    )
