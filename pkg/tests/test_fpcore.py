import math
import random
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from precis.fpcore import (
    FpValue,
    Fpi,
    OpClass,
    Width,
    apply_fpi,
    bits_to_float,
    float_to_bits,
    manipulated_bits,
    manipulated_bits_from_bits,
    native_binop,
    single_from_double,
    truncate_bits,
    truncate_float,
    truncate_mantissa,
)

from oracles import manipulated_oracle, truncate_oracle

S, D = Width.SINGLE, Width.DOUBLE

bits32 = st.integers(min_value=0, max_value=2**32 - 1)
bits64 = st.integers(min_value=0, max_value=2**64 - 1)


def fp(v, width=S):
    return FpValue.from_float(v, width)


class TestTruncate:
    def test_exact_value_unchanged(self):
        # 1.1 binary needs two mantissa bits
        assert truncate_mantissa(fp(1.5), 2).value == 1.5

    def test_full_width_is_identity(self):
        rng = random.Random(7)
        for _ in range(200):
            x = fp(rng.uniform(-1e30, 1e30))
            assert truncate_mantissa(x, 24).bits == x.bits
        xd = FpValue.from_float(0.1, D)
        assert truncate_mantissa(xd, 53).bits == xd.bits

    def test_tenth_at_four_bits(self):
        # frozen from the decompose/mask/recompose oracle
        x = fp(0.1)
        assert x.bits == 0x3DCCCCCD
        got = truncate_mantissa(x, 4)
        assert got.bits == truncate_oracle(0x3DCCCCCD, 4, S) == 0x3DC00000
        assert got.value == 0.09375

    def test_sign_and_exponent_untouched(self):
        x = fp(-0.1)
        t = truncate_mantissa(x, 3)
        assert t.bits >> 31 == 1
        assert (t.bits >> 23) & 0xFF == (x.bits >> 23) & 0xFF

    @pytest.mark.parametrize("v", [0.0, -0.0, math.inf, -math.inf, math.nan])
    def test_specials_pass_through(self, v):
        for width in (S, D):
            x = FpValue.from_float(v, width)
            for k in (1, 5, width.mantissa_bits):
                assert truncate_mantissa(x, k).bits == x.bits

    def test_subnormal_field_masked(self):
        x = FpValue(0x00000003, S)  # tiny subnormal, field 0b11
        assert truncate_mantissa(x, 24).bits == x.bits
        assert truncate_mantissa(x, 1).bits == 0

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            truncate_bits(0, 0, S)
        with pytest.raises(ValueError):
            truncate_bits(0, 25, S)
        with pytest.raises(ValueError):
            truncate_bits(0, 54, D)

    @given(bits32, st.integers(1, 24))
    def test_oracle_agreement_single(self, bits, k):
        assert truncate_bits(bits, k, S) == truncate_oracle(bits, k, S)

    @given(bits64, st.integers(1, 53))
    def test_oracle_agreement_double(self, bits, k):
        assert truncate_bits(bits, k, D) == truncate_oracle(bits, k, D)

    @given(bits32, st.integers(1, 24))
    def test_idempotent(self, bits, k):
        once = truncate_bits(bits, k, S)
        assert truncate_bits(once, k, S) == once

    @given(bits32, st.integers(1, 24), st.integers(1, 24))
    def test_monotone_containment(self, bits, k1, k2):
        k1, k2 = min(k1, k2), max(k1, k2)
        via = truncate_bits(truncate_bits(bits, k2, S), k1, S)
        assert via == truncate_bits(bits, k1, S)

    @given(st.floats(min_value=1e-30, max_value=1e30), st.integers(1, 24))
    def test_magnitude_and_relative_error(self, v, k):
        x = single_from_double(v)
        t = truncate_float(x, k, S)
        assert abs(t) <= abs(x)
        if x != 0:
            assert abs(x - t) / abs(x) < 2.0 ** -(k - 1)

    @given(bits32, st.integers(1, 24))
    def test_never_creates_or_destroys_specials(self, bits, k):
        before = bits_to_float(bits, S)
        after = bits_to_float(truncate_bits(bits, k, S), S)
        assert math.isnan(after) == math.isnan(before)
        assert math.isinf(after) == math.isinf(before)


class TestManipulatedBits:
    def test_paper_values(self):
        assert manipulated_bits(fp(1.0)) == 1
        assert manipulated_bits(fp(1.5)) == 2
        assert manipulated_bits(FpValue.from_float(1.0, D)) == 1

    def test_zero_counts_one(self):
        assert manipulated_bits(fp(0.0)) == 1
        assert manipulated_bits(FpValue.from_float(-0.0, D)) == 1

    @given(bits32)
    def test_oracle_agreement_single(self, bits):
        assert manipulated_bits_from_bits(bits, S) == manipulated_oracle(bits, S)

    @given(bits64)
    def test_oracle_agreement_double(self, bits):
        assert manipulated_bits_from_bits(bits, D) == manipulated_oracle(bits, D)

    @given(bits32)
    def test_range(self, bits):
        assert 1 <= manipulated_bits_from_bits(bits, S) <= 24

    @given(st.floats(min_value=1e-30, max_value=1e30), st.integers(1, 24))
    def test_bounded_by_budget_after_truncation(self, v, k):
        t = truncate_bits(float_to_bits(v, S), k, S)
        assert manipulated_bits_from_bits(t, S) <= k


class TestApplyFpi:
    def test_identity_add(self):
        r = apply_fpi(OpClass.ADD, fp(1.0), fp(1.0), Fpi.identity(S))
        assert r.value == 2.0

    def test_one_bit_add_of_powers_of_two(self):
        r = apply_fpi(OpClass.ADD, fp(1.0), fp(1.0), Fpi.uniform(1, S))
        assert r.value == 2.0

    def test_mul_tenth_squared_at_four_bits(self):
        # chained oracle: trunc(0.1,4) = 0.09375; 0.09375^2 = 0.0087890625
        # = 1.001b * 2^-7, exactly representable at 4 bits, so truncation
        # leaves it unchanged.
        ta = truncate_oracle(0x3DCCCCCD, 4, S)
        prod = single_from_double(bits_to_float(ta, S) * bits_to_float(ta, S))
        expect = truncate_oracle(float_to_bits(prod, S), 4, S)
        fpi = Fpi(0, 24, 24, 4, 24, S)
        got = apply_fpi(OpClass.MUL, fp(0.1), fp(0.1), fpi)
        assert got.bits == expect == 0x3C100000
        assert got.value == 0.0087890625

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            apply_fpi(OpClass.ADD, fp(1.0), FpValue.from_float(1.0, D), Fpi.identity(S))

    def test_div_by_zero_passes_through(self):
        fpi = Fpi.uniform(5, S)
        r = apply_fpi(OpClass.DIV, fp(1.0), fp(0.0), fpi)
        assert r.value == math.inf
        r = apply_fpi(OpClass.DIV, fp(-1.0), fp(0.0), fpi)
        assert r.value == -math.inf
        r = apply_fpi(OpClass.DIV, fp(0.0), fp(0.0), fpi)
        assert math.isnan(r.value)

    @given(
        st.floats(-1e18, 1e18),
        st.floats(-1e18, 1e18),
        st.sampled_from(list(OpClass)),
    )
    def test_identity_matches_native_single(self, a, b, op):
        av, bv = fp(a), fp(b)
        r = apply_fpi(op, av, bv, Fpi.identity(S))
        native = native_binop(op, av.value, bv.value, S)
        assert r.bits == float_to_bits(native, S)

    @given(
        st.floats(-1e300, 1e300),
        st.floats(-1e300, 1e300),
        st.sampled_from(list(OpClass)),
    )
    def test_identity_matches_native_double(self, a, b, op):
        av = FpValue.from_float(a, D)
        bv = FpValue.from_float(b, D)
        r = apply_fpi(op, av, bv, Fpi.identity(D))
        native = native_binop(op, a, b, D)
        assert r.bits == float_to_bits(native, D)

    def test_deterministic(self):
        fpi = Fpi.uniform(9, S)
        first = apply_fpi(OpClass.MUL, fp(3.7), fp(-12.9), fpi)
        for _ in range(5):
            assert apply_fpi(OpClass.MUL, fp(3.7), fp(-12.9), fpi).bits == first.bits


class TestFpi:
    def test_budget_ranges(self):
        with pytest.raises(ValueError):
            Fpi.uniform(0, S)
        with pytest.raises(ValueError):
            Fpi.uniform(25, S)
        with pytest.raises(ValueError):
            Fpi.uniform(54, D)
        Fpi.uniform(53, D)

    def test_mixed_class_budget(self):
        # e.g. 8 bits on add/sub, full precision multiplies
        fpi = Fpi(1, 8, 8, 24, 24, S)
        assert fpi.bits_for(OpClass.ADD) == 8
        assert fpi.bits_for(OpClass.MUL) == 24
        assert fpi.storage_bits == 24
        assert not fpi.is_identity

    def test_identity_flag(self):
        assert Fpi.identity(S).is_identity
        assert Fpi.identity(D).is_identity


class TestEncoding:
    @given(bits32)
    def test_roundtrip_single(self, bits):
        v = bits_to_float(bits, S)
        if math.isnan(v):
            return  # payload canonicalization through Python floats is lossy
        assert float_to_bits(v, S) == bits

    def test_hex_format(self):
        assert fp(1.0).hex() == "3f800000"
        assert FpValue.from_float(1.0, D).hex() == "3ff0000000000000"
        assert fp(2.0).hex() == "40000000"

    @given(st.floats(allow_nan=False))
    def test_single_rounding_matches_numpy(self, v):
        ours = single_from_double(v)
        with np.errstate(over="ignore"):
            theirs = float(np.float32(v))
        assert ours == theirs or (math.isinf(ours) and math.isinf(theirs))

    def test_single_overflow_threshold(self):
        assert single_from_double(3.4028235677973366e38) == math.inf
        assert single_from_double(3.40282354e38) == 3.4028234663852886e38
        assert single_from_double(-3.4028235677973366e38) == -math.inf


@settings(max_examples=300)
@given(bits32, bits32, st.integers(1, 24), st.sampled_from(list(OpClass)))
def test_apply_fpi_total_on_any_patterns(abits, bbits, k, op):
    """apply_fpi never raises on any bit pattern pair: specials flow through."""
    a, b = FpValue(abits, S), FpValue(bbits, S)
    r = apply_fpi(op, a, b, Fpi.uniform(k, S))
    assert isinstance(r.bits, int)
