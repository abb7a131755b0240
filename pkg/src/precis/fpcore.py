"""Bit-exact reduced-precision floating-point emulation.

Arithmetic is emulated by chopping low mantissa bits of IEEE-754 single or
double values: operands are truncated, the native operation runs at full
hardware precision, and the result is truncated again.  Truncation always
chops toward zero (low explicit-field bits are zeroed); sign and exponent
are never touched.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum


class Width(Enum):
    """IEEE-754 binary32 or binary64."""

    SINGLE = "single"
    DOUBLE = "double"

    @property
    def mantissa_bits(self) -> int:
        """Total mantissa width including the implicit leading bit (24 / 53)."""
        return 24 if self is Width.SINGLE else 53

    @property
    def explicit_bits(self) -> int:
        """Stored mantissa field width (23 / 52)."""
        return 23 if self is Width.SINGLE else 52

    @property
    def exponent_bits(self) -> int:
        return 8 if self is Width.SINGLE else 11

    @property
    def total_bits(self) -> int:
        return 32 if self is Width.SINGLE else 64

    @property
    def hex_digits(self) -> int:
        return self.total_bits // 4


class OpClass(Enum):
    """The four instrumented scalar arithmetic classes; everything else is native."""

    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"


OP_CLASSES = (OpClass.ADD, OpClass.SUB, OpClass.MUL, OpClass.DIV)

# struct codecs, bound once: the hot path goes through these thousands of
# times per kernel run.
_PACK_F = struct.Struct("<f").pack
_UNPACK_F = struct.Struct("<f").unpack
_PACK_D = struct.Struct("<d").pack
_UNPACK_D = struct.Struct("<d").unpack
_PACK_I4 = struct.Struct("<I").pack
_UNPACK_I4 = struct.Struct("<I").unpack
_PACK_I8 = struct.Struct("<Q").pack
_UNPACK_I8 = struct.Struct("<Q").unpack

_EXP_MASK_S = 0x7F800000
_FIELD_MASK_S = 0x007FFFFF
_EXP_MASK_D = 0x7FF0000000000000
_FIELD_MASK_D = 0x000FFFFFFFFFFFFF

# Smallest double that rounds to +inf in binary32 under round-to-nearest-even:
# (2 - 2^-24) * 2^127.  struct.pack('<f') raises OverflowError at this point,
# while everything below rounds to FLT_MAX.
_F32_OVERFLOW = 3.4028235677973366e38

_INF = math.inf
_NAN = math.nan

# keep-mask per mantissa budget k: ones everywhere except the low
# (explicit - (k-1)) bits of the field.  Index 0 unused.
KEEP_MASK_S = [0] + [
    0xFFFFFFFF ^ ((1 << (23 - (k - 1))) - 1) for k in range(1, 25)
]
KEEP_MASK_D = [0] + [
    0xFFFFFFFFFFFFFFFF ^ ((1 << (52 - (k - 1))) - 1) for k in range(1, 54)
]


def single_from_double(v: float) -> float:
    """Round a Python float (binary64) to the nearest binary32 value.

    This is the native single-precision rounding step: binary64 carries more
    than 2*24+2 mantissa bits, so rounding an exact-in-double op result to
    binary32 is the correctly rounded single-precision result.
    """
    if v != v or v == _INF or v == -_INF:
        return v
    if v >= _F32_OVERFLOW:
        return _INF
    if v <= -_F32_OVERFLOW:
        return -_INF
    return _UNPACK_F(_PACK_F(v))[0]


def float_to_bits(v: float, width: Width) -> int:
    """Encode a value as the raw bit pattern of the given width.

    Single inputs are rounded to binary32 first, so the pattern is always a
    valid encoding at that width.
    """
    if width is Width.SINGLE:
        return _UNPACK_I4(_PACK_F(single_from_double(v)))[0]
    return _UNPACK_I8(_PACK_D(v))[0]


def bits_to_float(bits: int, width: Width) -> float:
    """Decode a raw bit pattern; the inverse of float_to_bits."""
    if width is Width.SINGLE:
        return _UNPACK_F(_PACK_I4(bits))[0]
    return _UNPACK_D(_PACK_I8(bits))[0]


@dataclass(frozen=True)
class FpValue:
    """A floating-point value whose bit pattern is authoritative."""

    bits: int
    width: Width

    @classmethod
    def from_float(cls, v: float, width: Width) -> "FpValue":
        return cls(float_to_bits(v, width), width)

    @property
    def value(self) -> float:
        return bits_to_float(self.bits, self.width)

    def hex(self) -> str:
        """Fixed-width lowercase hex (8 digits single, 16 double)."""
        return format(self.bits, "0%dx" % self.width.hex_digits)

    def __repr__(self) -> str:
        return "FpValue(0x%s, %s, %r)" % (self.hex(), self.width.value, self.value)


@dataclass(frozen=True)
class Fpi:
    """One reduced-precision arithmetic implementation: a mantissa-bit budget
    per op class.  Budget k means the implicit bit plus k-1 explicit bits
    survive; k equal to the full mantissa width reproduces native arithmetic
    bit-for-bit."""

    id: int
    bits_add: int
    bits_sub: int
    bits_mul: int
    bits_div: int
    width: Width

    def __post_init__(self):
        full = self.width.mantissa_bits
        for name in ("bits_add", "bits_sub", "bits_mul", "bits_div"):
            k = getattr(self, name)
            if not 1 <= k <= full:
                raise ValueError(
                    "%s=%d out of range [1, %d] for %s"
                    % (name, k, full, self.width.value)
                )

    @classmethod
    def uniform(cls, k: int, width: Width, fpi_id: int | None = None) -> "Fpi":
        """FPI applying the same budget to all four op classes."""
        return cls(fpi_id if fpi_id is not None else k, k, k, k, k, width)

    @classmethod
    def identity(cls, width: Width) -> "Fpi":
        return cls.uniform(width.mantissa_bits, width)

    @property
    def is_identity(self) -> bool:
        full = self.width.mantissa_bits
        return (self.bits_add == self.bits_sub == self.bits_mul
                == self.bits_div == full)

    def bits_for(self, op: OpClass) -> int:
        if op is OpClass.ADD:
            return self.bits_add
        if op is OpClass.SUB:
            return self.bits_sub
        if op is OpClass.MUL:
            return self.bits_mul
        return self.bits_div

    @property
    def storage_bits(self) -> int:
        """Mantissa width a value of this FPI needs in memory: the widest of
        the four budgets (they coincide for uniform FPIs)."""
        return max(self.bits_add, self.bits_sub, self.bits_mul, self.bits_div)


def truncate_bits(bits: int, k: int, width: Width) -> int:
    """Chop a raw bit pattern to k mantissa bits (implicit + k-1 explicit).

    Inf and NaN patterns pass through untouched; zero and subnormals get the
    same field mask as normals (zero is unaffected by construction).
    """
    if width is Width.SINGLE:
        if not 1 <= k <= 24:
            raise ValueError("k=%d out of range [1, 24] for single" % k)
        if bits & _EXP_MASK_S == _EXP_MASK_S:
            return bits
        return bits & KEEP_MASK_S[k]
    if not 1 <= k <= 53:
        raise ValueError("k=%d out of range [1, 53] for double" % k)
    if bits & _EXP_MASK_D == _EXP_MASK_D:
        return bits
    return bits & KEEP_MASK_D[k]


def truncate_float(v: float, k: int, width: Width) -> float:
    """Value-level wrapper of truncate_bits."""
    return bits_to_float(truncate_bits(float_to_bits(v, width), k, width), width)


def truncate_mantissa(x: FpValue, k: int) -> FpValue:
    """Truncate an FpValue to a k-bit mantissa budget."""
    return FpValue(truncate_bits(x.bits, k, x.width), x.width)


def manipulated_bits_from_bits(bits: int, width: Width) -> int:
    """Mantissa bits that carry information in a pattern: full width minus
    the trailing-zero run of the explicit field (capped at the field width).

    An all-zero field (1.0, any power of two, zero itself) yields 1: only the
    implicit bit is live.  The formula is applied literally to every pattern,
    so the range is [1, full width].
    """
    if width is Width.SINGLE:
        field = bits & _FIELD_MASK_S
        if field == 0:
            return 1
        return 24 - ((field & -field).bit_length() - 1)
    field = bits & _FIELD_MASK_D
    if field == 0:
        return 1
    return 53 - ((field & -field).bit_length() - 1)


def manipulated_bits(x: FpValue) -> int:
    return manipulated_bits_from_bits(x.bits, x.width)


def native_binop(op: OpClass, a: float, b: float, width: Width) -> float:
    """The native IEEE operation at the given width.

    Double is plain Python float arithmetic; single computes in double and
    rounds once (innocuous for +,-,*,/ since 53 >= 2*24+2).  Division by
    zero follows IEEE: x/0 is signed inf, 0/0 and nan/0 are nan.
    """
    if op is OpClass.ADD:
        r = a + b
    elif op is OpClass.SUB:
        r = a - b
    elif op is OpClass.MUL:
        r = a * b
    else:
        if b == 0.0:
            if a == 0.0 or a != a:
                r = _NAN
            else:
                r = math.copysign(1.0, a) * math.copysign(1.0, b) * _INF
        else:
            r = a / b
    if width is Width.SINGLE:
        return single_from_double(r)
    return r


def apply_fpi(op: OpClass, a: FpValue, b: FpValue, fpi: Fpi) -> FpValue:
    """Run one reduced-precision op: truncate both operands, do the native
    op at width, truncate the result.  Deterministic by construction."""
    if a.width is not b.width or a.width is not fpi.width:
        raise ValueError(
            "width mismatch: a=%s b=%s fpi=%s"
            % (a.width.value, b.width.value, fpi.width.value)
        )
    width = a.width
    k = fpi.bits_for(op)
    ta = truncate_bits(a.bits, k, width)
    tb = truncate_bits(b.bits, k, width)
    r = native_binop(op, bits_to_float(ta, width), bits_to_float(tb, width), width)
    return FpValue(truncate_bits(float_to_bits(r, width), k, width), width)
