import json

import pytest

from precis.energy import (
    DEFAULT_EPI_PJ,
    EnergyConfigError,
    EpiTable,
    ExecutionCounters,
    energy_report,
    fpu_energy,
    mem_energy,
    profile_report,
)
from precis.fpcore import FpValue, OpClass, Width

S, D = Width.SINGLE, Width.DOUBLE


def fp(v, width=S):
    return FpValue.from_float(v, width)


def saturated_counters(op, width, n=1):
    """n FLOPs whose three values all carry the full mantissa width."""
    c = ExecutionCounters()
    cell = c.scope("f").cell(op, width)
    cell[0] = n
    cell[1] = 3 * width.mantissa_bits * n
    return c


class TestUnitAnchors:
    def test_double_add_400pj(self):
        total, _ = fpu_energy(saturated_counters(OpClass.ADD, D), EpiTable())
        assert total == 400.0

    def test_single_add_350pj(self):
        total, _ = fpu_energy(saturated_counters(OpClass.ADD, S), EpiTable())
        assert total == 350.0

    def test_double_div_680pj(self):
        total, _ = fpu_energy(saturated_counters(OpClass.DIV, D), EpiTable())
        assert total == 680.0

    def test_single_div_420pj(self):
        total, _ = fpu_energy(saturated_counters(OpClass.DIV, S), EpiTable())
        assert total == 420.0

    def test_full_double_store_12nj(self):
        c = ExecutionCounters()
        c.record_mem("f", D, 53, 1, "store")
        assert mem_energy(c, EpiTable()) == 12000.0

    def test_full_single_6nj(self):
        c = ExecutionCounters()
        c.record_mem("f", S, 24, 1, "load")
        assert mem_energy(c, EpiTable()) == 6000.0

    def test_single_k12_3750pj(self):
        c = ExecutionCounters()
        c.record_mem("f", S, 12, 1, "load")
        assert c.scope("f").mem_bits == 20
        assert mem_energy(c, EpiTable()) == 3750.0

    def test_double_add_of_ones(self):
        # 1.0+1.0=2.0: one manipulated bit per value
        c = ExecutionCounters()
        c.record_flop("f", OpClass.ADD, D, fp(1.0, D), fp(1.0, D), fp(2.0, D))
        total, _ = fpu_energy(c, EpiTable())
        assert total == pytest.approx(400.0 * 3 / (3 * 53))


class TestRecording:
    def test_flop_bit_sums(self):
        c = ExecutionCounters()
        c.record_flop("f", OpClass.ADD, S, fp(1.5), fp(1.5), fp(3.0))
        cell = c.scope("f").cell(OpClass.ADD, S)
        assert cell == [1, 6]

    def test_zero_flops_zero_counters(self):
        c = ExecutionCounters()
        assert c.total_flops() == 0
        assert fpu_energy(c, EpiTable())[0] == 0.0
        assert mem_energy(c, EpiTable()) == 0.0

    def test_mem_bit_formula(self):
        c = ExecutionCounters()
        c.record_mem("f", S, 24, 1, "load")
        c.record_mem("f", D, 53, 1, "store")
        assert c.scope("f").mem_bits == 32 + 64

    def test_mem_k_range(self):
        c = ExecutionCounters()
        with pytest.raises(ValueError):
            c.record_mem("f", S, 25, 1, "load")
        with pytest.raises(ValueError):
            c.record_mem("f", S, 8, 1, "sideways")

    def test_bit_sum_bound(self):
        c = ExecutionCounters()
        for v in (0.1, 0.7, 123.456):
            c.record_flop("f", OpClass.MUL, S, fp(v), fp(v), fp(v * v))
        cell = c.scope("f").cell(OpClass.MUL, S)
        assert cell[1] <= 3 * 24 * cell[0]

    def test_merge_is_addition(self):
        a, b = ExecutionCounters(), ExecutionCounters()
        a.record_flop("f", OpClass.ADD, S, fp(1.5), fp(1.5), fp(3.0))
        b.record_flop("f", OpClass.ADD, S, fp(1.0), fp(1.0), fp(2.0))
        b.record_mem("g", S, 10, 3, "load")
        a.merge(b)
        assert a.scope("f").cell(OpClass.ADD, S) == [2, 9]
        assert a.scope("g").mem_bits == 3 * 18
        # energy is linear in counters
        t = EpiTable()
        merged = fpu_energy(a, t)[0]
        a2, b2 = ExecutionCounters(), ExecutionCounters()
        a2.record_flop("f", OpClass.ADD, S, fp(1.5), fp(1.5), fp(3.0))
        b2.record_flop("f", OpClass.ADD, S, fp(1.0), fp(1.0), fp(2.0))
        assert merged == pytest.approx(fpu_energy(a2, t)[0] + fpu_energy(b2, t)[0])


class TestEpiTable:
    def test_defaults_quoted_values(self):
        t = EpiTable()
        assert t.get(OpClass.ADD, D) == 400.0
        assert t.get(OpClass.DIV, D) == 680.0
        assert t.get(OpClass.ADD, S) == 350.0
        assert t.get(OpClass.DIV, S) == 420.0
        assert t.get(OpClass.SUB, D) == t.get(OpClass.ADD, D)
        assert t.mem_pj_per_byte == 1500.0

    def test_from_file_overrides(self, tmp_path):
        p = tmp_path / "epi.json"
        p.write_text(json.dumps({"mul_double": 512.0, "mem_pj_per_byte": 1000.0}))
        t = EpiTable.from_file(str(p))
        assert t.get(OpClass.MUL, D) == 512.0
        assert t.mem_pj_per_byte == 1000.0
        assert t.get(OpClass.ADD, D) == 400.0  # untouched default

    def test_from_file_rejects_unknown_key(self, tmp_path):
        p = tmp_path / "epi.json"
        p.write_text(json.dumps({"fma_double": 9.0}))
        with pytest.raises(EnergyConfigError):
            EpiTable.from_file(str(p))

    def test_positive_entries_required(self):
        bad = dict(DEFAULT_EPI_PJ)
        bad[("add", "single")] = 0.0
        with pytest.raises(EnergyConfigError):
            EpiTable(bad)
        with pytest.raises(EnergyConfigError):
            EpiTable(mem_pj_per_byte=-1.0)


class TestProfileReport:
    def test_empty_run(self):
        rep = profile_report(ExecutionCounters())
        assert rep.rows == ()
        assert rep.top10_coverage == 1.0
        assert rep.single_ratio == 0.0

    def test_known_counts(self):
        c = ExecutionCounters()
        for _ in range(100):
            c.record_flop("f", OpClass.ADD, S, fp(1.0), fp(1.0), fp(2.0))
        for _ in range(40):
            c.record_flop("g", OpClass.MUL, D, fp(1.0, D), fp(1.0, D), fp(1.0, D))
        rep = profile_report(c)
        assert rep.scope_flops[0] == ("f", 100)
        assert rep.rows[0].flops == 100
        assert rep.single_ratio == pytest.approx(100 / 140)
        assert rep.double_ratio == pytest.approx(40 / 140)
        assert rep.top10_coverage == 1.0

    def test_coverage_with_many_scopes(self):
        c = ExecutionCounters()
        for i in range(12):
            for _ in range(10 if i < 10 else 1):
                c.record_flop("s%02d" % i, OpClass.ADD, S, fp(1.0), fp(1.0), fp(2.0))
        rep = profile_report(c)
        assert rep.top10_coverage == pytest.approx(100 / 102)
        assert len(rep.top_scopes) == 10


class TestEnergyReport:
    def test_baseline_normalization_is_100(self):
        c = saturated_counters(OpClass.ADD, S, n=7)
        c.record_mem("f", S, 24, 5, "load")
        base = energy_report(c, EpiTable())
        rep = energy_report(c, EpiTable(), baseline=base)
        assert rep.normalized_fpu == 100.0
        assert rep.normalized_mem == 100.0
