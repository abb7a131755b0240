import math

import pytest

from precis.bench import (
    InputSet,
    KernelConfigError,
    KernelEvaluator,
    baseline_output,
    default_targets,
    error_rate,
    get_kernel,
    kernel_names,
    profile_run,
    run_kernel,
)
from precis.energy import profile_report
from precis.fpcore import Width, float_to_bits
from precis.scope import Configuration, RuleKind

ALL_KERNELS = ("blackscholes", "kmeans", "radar", "particlefilter_mini",
               "cnn_digits", "micro")


def identity_config(spec):
    return Configuration.whole_program(spec.width.mantissa_bits)


def one_input(spec, seed=None):
    return spec.make_inputs(seed if seed is not None else spec.train_seed, 1)[0]


class TestRegistry:
    def test_catalogue(self):
        assert set(ALL_KERNELS) <= set(kernel_names())

    def test_unknown_kernel(self):
        with pytest.raises(KernelConfigError):
            get_kernel("doesnotexist")


class TestInputGeneration:
    @pytest.mark.parametrize("name", ALL_KERNELS)
    def test_seed_determinism(self, name):
        spec = get_kernel(name)
        assert spec.make_inputs(5, 2) == spec.make_inputs(5, 2)

    @pytest.mark.parametrize("name", ["blackscholes", "kmeans", "radar",
                                      "particlefilter_mini", "cnn_digits"])
    def test_different_seeds_differ(self, name):
        spec = get_kernel(name)
        assert spec.make_inputs(1, 1) != spec.make_inputs(2, 1)

    def test_input_set_disjoint_seeds_enforced(self):
        spec = get_kernel("kmeans")
        with pytest.raises(KernelConfigError):
            InputSet.for_kernel(spec, train_seed=3, test_seed=3)

    def test_input_set_roundtrip(self, tmp_path):
        spec = get_kernel("blackscholes")
        ins = InputSet.for_kernel(spec, train_count=1, test_count=2)
        path = tmp_path / "inputs.json"
        ins.save(str(path))
        back = InputSet.load(str(path))
        assert back.training == ins.training
        assert back.test == ins.test

    def test_default_ratio_train_smaller(self):
        for name in ALL_KERNELS:
            spec = get_kernel(name)
            assert spec.test_count >= spec.train_count


class TestErrorRate:
    def test_identical(self):
        assert error_rate([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_ten_percent(self):
        assert error_rate([1.1], [1.0]) == pytest.approx(10.0)

    def test_zero_baseline_guarded(self):
        e = error_rate([1e-13, 1.0], [0.0, 1.0])
        assert math.isfinite(e) and e > 0

    def test_nonfinite_capped(self):
        assert math.isfinite(error_rate([float("nan")], [1.0]))
        assert math.isfinite(error_rate([float("inf")], [1.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            error_rate([1.0], [1.0, 2.0])

    @pytest.mark.parametrize("name", ALL_KERNELS)
    def test_metric_zero_on_self(self, name):
        spec = get_kernel(name)
        out = baseline_output(spec, one_input(spec))
        assert spec.metric(out, out) == 0.0


class TestIdentityFidelity:
    @pytest.mark.parametrize("name", ALL_KERNELS)
    def test_identity_matches_uninstrumented(self, name):
        spec = get_kernel(name)
        data = one_input(spec)
        native = baseline_output(spec, data)
        res = run_kernel(spec, identity_config(spec), data, baseline=native)
        assert res.error_pct == 0.0
        assert len(res.output) == len(native)
        for got, ref in zip(res.output, native):
            assert float_to_bits(got, spec.width) == float_to_bits(ref, spec.width)


class TestRunKernel:
    def test_one_bit_whole_program_hurts(self):
        spec = get_kernel("blackscholes")
        res = run_kernel(spec, Configuration.whole_program(1), one_input(spec))
        assert res.error_pct > 0

    def test_unknown_scope_rejected(self):
        spec = get_kernel("blackscholes")
        config = Configuration(("nosuchscope",), (8,), RuleKind.CIP)
        with pytest.raises(KernelConfigError):
            run_kernel(spec, config, one_input(spec))

    def test_counters_populated(self):
        spec = get_kernel("kmeans")
        res = run_kernel(spec, identity_config(spec), one_input(spec))
        assert res.counters.total_flops() > 1000
        assert res.fpu_pj > 0
        assert res.mem_pj > 0

    def test_energy_drops_with_gene(self):
        spec = get_kernel("kmeans")
        data = one_input(spec)
        base = run_kernel(spec, Configuration.whole_program(24), data)
        low = run_kernel(spec, Configuration.whole_program(23), data)
        assert low.error_pct >= 0
        assert low.fpu_pj <= base.fpu_pj
        assert low.mem_pj <= base.mem_pj

    def test_deterministic(self):
        spec = get_kernel("radar")
        data = one_input(spec)
        cfg = Configuration.whole_program(9)
        a = run_kernel(spec, cfg, data)
        b = run_kernel(spec, cfg, data)
        assert a.output == b.output
        assert a.fpu_pj == b.fpu_pj


class TestRadarCallStack:
    def test_cip_on_callers_is_inert(self):
        # lpf and pc own no FLOPs, so a CIP rule naming them changes nothing
        spec = get_kernel("radar")
        data = one_input(spec)
        base = baseline_output(spec, data)
        cfg = Configuration(("lpf", "pc"), (2, 2), RuleKind.CIP)
        res = run_kernel(spec, cfg, data, baseline=base)
        assert res.error_pct == 0.0

    def test_fcs_reaches_fft_through_callers(self):
        spec = get_kernel("radar")
        data = one_input(spec)
        base = baseline_output(spec, data)
        cfg = Configuration(("lpf", "pc"), (2, 2), RuleKind.FCS)
        res = run_kernel(spec, cfg, data, baseline=base)
        assert res.error_pct > 0.0

    def test_fcs_distinguishes_callers(self):
        spec = get_kernel("radar")
        data = one_input(spec)
        lpf_only = run_kernel(
            spec, Configuration(("lpf", "pc"), (4, 24), RuleKind.FCS), data
        )
        pc_only = run_kernel(
            spec, Configuration(("lpf", "pc"), (24, 4), RuleKind.FCS), data
        )
        assert lpf_only.output != pc_only.output
        bits_lpf = lpf_only.counters.scope("fft")
        bits_pc = pc_only.counters.scope("fft")
        flops = bits_lpf.flops()
        assert flops == bits_pc.flops()  # same structural work
        # truncating a pass zeroes mantissa tails, so bit sums must differ
        total_lpf = sum(c[1] for c in bits_lpf.ops.values())
        total_pc = sum(c[1] for c in bits_pc.ops.values())
        assert total_lpf != total_pc

    def test_fft_dominates_profile(self):
        spec = get_kernel("radar")
        rep = profile_report(profile_run(spec, one_input(spec)))
        weights = dict(rep.scope_flops)
        assert all(weights["fft"] >= w for s, w in weights.items())


class TestWidthProfiles:
    def test_blackscholes_all_single(self):
        spec = get_kernel("blackscholes")
        rep = profile_report(profile_run(spec, one_input(spec)))
        assert rep.single_ratio == 1.0

    def test_particlefilter_double_dominant(self):
        spec = get_kernel("particlefilter_mini")
        rep = profile_report(profile_run(spec, one_input(spec)))
        assert rep.double_ratio > 0.5
        assert rep.single_ratio > 0.0  # summary scope keeps it mixed


class TestCnn:
    def test_paper_pli_row_runs(self):
        spec = get_kernel("cnn_digits")
        data = one_input(spec)
        genome = (10, 23, 14, 4, 19, 4, 20, 17)
        cfg = Configuration(spec.scopes, genome, RuleKind.PLI)
        res = run_kernel(spec, cfg, data)
        assert res.error_pct >= 0.0
        assert math.isfinite(res.fpu_pj)

    def test_plc_equals_expanded_pli(self):
        spec = get_kernel("cnn_digits")
        data = one_input(spec)
        plc = Configuration(spec.category_targets(), (6, 10, 8, 12, 14), RuleKind.PLC)
        by_cat = dict(zip(spec.category_targets(), plc.genome))
        pli = Configuration(
            spec.scopes,
            tuple(by_cat[spec.categories[s]] for s in spec.scopes),
            RuleKind.PLI,
        )
        out_plc = run_kernel(spec, plc, data)
        out_pli = run_kernel(spec, pli, data)
        assert out_plc.output == out_pli.output
        assert out_plc.fpu_pj == out_pli.fpu_pj

    def test_categories_cover_scopes(self):
        spec = get_kernel("cnn_digits")
        assert set(spec.categories) == set(spec.scopes)
        assert spec.category_targets() == ("conv", "pool", "dense", "act", "internal")

    def test_trained_model_is_accurate_at_baseline(self):
        spec = get_kernel("cnn_digits")
        out = baseline_output(spec, one_input(spec))
        n = len(out) // 11
        assert sum(out[:n]) / n >= 0.75


class TestTargets:
    def test_default_targets_ranked_by_flops(self):
        spec = get_kernel("blackscholes")
        targets = default_targets(spec)
        assert targets[0] == "cndf"
        assert set(targets) <= set(spec.scopes)

    def test_top_n_cap(self):
        spec = get_kernel("radar")
        assert len(default_targets(spec, n=2)) == 2


class TestKernelEvaluator:
    def test_identity_genome_anchors(self):
        spec = get_kernel("kmeans")
        ev = KernelEvaluator(
            spec, RuleKind.CIP, spec.scopes, spec.make_inputs(11, 2)
        )
        pt = ev((24,) * len(spec.scopes))
        assert pt.error_pct == 0.0
        assert pt.fpu_norm == 100.0
        assert pt.mem_norm == 100.0

    def test_truncation_moves_both_objectives(self):
        spec = get_kernel("kmeans")
        ev = KernelEvaluator(spec, RuleKind.WP, ("*",), spec.make_inputs(11, 2))
        pt = ev((6,))
        assert pt.error_pct > 0.0
        assert pt.fpu_norm < 100.0

    def test_empty_inputs_rejected(self):
        spec = get_kernel("kmeans")
        with pytest.raises(KernelConfigError):
            KernelEvaluator(spec, RuleKind.WP, ("*",), [])
