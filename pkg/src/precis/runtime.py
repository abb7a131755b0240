"""Execution engines for instrumented kernels.

Instrument is the hot path: every scalar FLOP a kernel issues is truncated
per the placement rule resolved for the current call stack, executed
natively, truncated again, and tallied into ExecutionCounters.  The FPI and
counter cells are re-resolved only on scope enter/exit, never per FLOP.

NativeOps is the uninstrumented twin with the same surface: plain IEEE
arithmetic at width, no truncation, no counters.  A kernel body run against
NativeOps is the reference output the identity configuration must reproduce
bit-for-bit.

Ops of the non-target width always run at full precision but are still
counted, so profiles and baseline energies see them.
"""

from __future__ import annotations

import struct

from .energy import ExecutionCounters
from .fpcore import (
    KEEP_MASK_D,
    KEEP_MASK_S,
    Fpi,
    OpClass,
    Width,
    native_binop,
    single_from_double,
)
from .scope import CallStack, PlacementRule, resolve_fpi

_pf = struct.Struct("<f").pack
_uf = struct.Struct("<f").unpack
_p4 = struct.Struct("<I").pack
_u4 = struct.Struct("<I").unpack
_pd = struct.Struct("<d").pack
_ud = struct.Struct("<d").unpack
_p8 = struct.Struct("<Q").pack
_u8 = struct.Struct("<Q").unpack

_INF = float("inf")
_F32_OVF = 3.4028235677973366e38

_EXP_S = 0x7F800000
_EXP_D = 0x7FF0000000000000


def _mb_s(bits: int) -> int:
    f = bits & 0x7FFFFF
    if f == 0:
        return 1
    return 24 - ((f & -f).bit_length() - 1)


def _mb_d(bits: int) -> int:
    f = bits & 0xFFFFFFFFFFFFF
    if f == 0:
        return 1
    return 53 - ((f & -f).bit_length() - 1)


_IDENTITY_KS_S = (24, 24, 24, 24)
_IDENTITY_KS_D = (53, 53, 53, 53)


class Instrument:
    """Routes a kernel's FLOPs through a placement rule.

    Kernel bodies call enter/exit around named scopes, the eight op methods
    (add_s .. div_d) for arithmetic, and load_*/store_* to charge FP memory
    traffic.  All tallies attribute to the executing (top) scope even when
    an FCS rule resolved the FPI from a frame further down.
    """

    def __init__(
        self,
        rule: PlacementRule,
        target: Width,
        counters: ExecutionCounters | None = None,
        trace: list[str] | None = None,
    ):
        self.rule = rule
        self.target = target
        self.counters = counters if counters is not None else ExecutionCounters()
        self.stack = CallStack()
        self._trace = trace
        self._refresh()

    # -- scope tracking -------------------------------------------------

    def enter(self, scope: str) -> None:
        self.stack.enter(scope)
        self._refresh()

    def exit(self) -> None:
        self.stack.exit()
        self._refresh()

    def _refresh(self) -> None:
        top = self.stack.top
        self._top = top
        fpi = resolve_fpi(self.stack, self.rule)
        if self.target is Width.SINGLE:
            ks = (fpi.bits_add, fpi.bits_sub, fpi.bits_mul, fpi.bits_div)
            kd = _IDENTITY_KS_D
            self._kstore_s = fpi.storage_bits
            self._kstore_d = 53
        else:
            ks = _IDENTITY_KS_S
            kd = (fpi.bits_add, fpi.bits_sub, fpi.bits_mul, fpi.bits_div)
            self._kstore_s = 24
            self._kstore_d = fpi.storage_bits
        self._keep_add_s = KEEP_MASK_S[ks[0]]
        self._keep_sub_s = KEEP_MASK_S[ks[1]]
        self._keep_mul_s = KEEP_MASK_S[ks[2]]
        self._keep_div_s = KEEP_MASK_S[ks[3]]
        self._keep_add_d = KEEP_MASK_D[kd[0]]
        self._keep_sub_d = KEEP_MASK_D[kd[1]]
        self._keep_mul_d = KEEP_MASK_D[kd[2]]
        self._keep_div_d = KEEP_MASK_D[kd[3]]
        sc = self.counters.scope(top)
        self._sc = sc
        self._cell_add_s = sc.cell(OpClass.ADD, Width.SINGLE)
        self._cell_sub_s = sc.cell(OpClass.SUB, Width.SINGLE)
        self._cell_mul_s = sc.cell(OpClass.MUL, Width.SINGLE)
        self._cell_div_s = sc.cell(OpClass.DIV, Width.SINGLE)
        self._cell_add_d = sc.cell(OpClass.ADD, Width.DOUBLE)
        self._cell_sub_d = sc.cell(OpClass.SUB, Width.DOUBLE)
        self._cell_mul_d = sc.cell(OpClass.MUL, Width.DOUBLE)
        self._cell_div_d = sc.cell(OpClass.DIV, Width.DOUBLE)

    # -- memory traffic -------------------------------------------------
    # bits per value: 1 sign + exponent + (k-1) explicit mantissa bits,
    # i.e. 8+k at single and 11+k at double.

    def load_s(self, n: int) -> None:
        self._sc.mem_bits += n * (8 + self._kstore_s)

    def store_s(self, n: int) -> None:
        self._sc.mem_bits += n * (8 + self._kstore_s)

    def load_d(self, n: int) -> None:
        self._sc.mem_bits += n * (11 + self._kstore_d)

    def store_d(self, n: int) -> None:
        self._sc.mem_bits += n * (11 + self._kstore_d)

    # -- single-precision ops --------------------------------------------

    def add_s(self, a: float, b: float) -> float:
        keep = self._keep_add_s
        ba = _u4(_pf(a))[0]
        if ba & _EXP_S != _EXP_S:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _uf(_p4(nb))[0]
        bb = _u4(_pf(b))[0]
        if bb & _EXP_S != _EXP_S:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _uf(_p4(nb))[0]
        rs = a + b
        if -_F32_OVF < rs < _F32_OVF:
            br = _u4(_pf(rs))[0]
            if br & _EXP_S != _EXP_S:
                br &= keep
            r = _uf(_p4(br))[0]
        elif rs != rs or rs == _INF or rs == -_INF:
            br = _u4(_pf(rs))[0]
            r = rs
        else:
            br = 0x7F800000 if rs > 0 else 0xFF800000
            r = _INF if rs > 0 else -_INF
        cell = self._cell_add_s
        cell[0] += 1
        cell[1] += _mb_s(ba) + _mb_s(bb) + _mb_s(br)
        if self._trace is not None:
            self._trace.append(
                "%s,add,single,%08x,%08x,%08x" % (self._top, ba, bb, br)
            )
        return r

    def sub_s(self, a: float, b: float) -> float:
        keep = self._keep_sub_s
        ba = _u4(_pf(a))[0]
        if ba & _EXP_S != _EXP_S:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _uf(_p4(nb))[0]
        bb = _u4(_pf(b))[0]
        if bb & _EXP_S != _EXP_S:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _uf(_p4(nb))[0]
        rs = a - b
        if -_F32_OVF < rs < _F32_OVF:
            br = _u4(_pf(rs))[0]
            if br & _EXP_S != _EXP_S:
                br &= keep
            r = _uf(_p4(br))[0]
        elif rs != rs or rs == _INF or rs == -_INF:
            br = _u4(_pf(rs))[0]
            r = rs
        else:
            br = 0x7F800000 if rs > 0 else 0xFF800000
            r = _INF if rs > 0 else -_INF
        cell = self._cell_sub_s
        cell[0] += 1
        cell[1] += _mb_s(ba) + _mb_s(bb) + _mb_s(br)
        if self._trace is not None:
            self._trace.append(
                "%s,sub,single,%08x,%08x,%08x" % (self._top, ba, bb, br)
            )
        return r

    def mul_s(self, a: float, b: float) -> float:
        keep = self._keep_mul_s
        ba = _u4(_pf(a))[0]
        if ba & _EXP_S != _EXP_S:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _uf(_p4(nb))[0]
        bb = _u4(_pf(b))[0]
        if bb & _EXP_S != _EXP_S:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _uf(_p4(nb))[0]
        rs = a * b
        if -_F32_OVF < rs < _F32_OVF:
            br = _u4(_pf(rs))[0]
            if br & _EXP_S != _EXP_S:
                br &= keep
            r = _uf(_p4(br))[0]
        elif rs != rs or rs == _INF or rs == -_INF:
            br = _u4(_pf(rs))[0]
            r = rs
        else:
            br = 0x7F800000 if rs > 0 else 0xFF800000
            r = _INF if rs > 0 else -_INF
        cell = self._cell_mul_s
        cell[0] += 1
        cell[1] += _mb_s(ba) + _mb_s(bb) + _mb_s(br)
        if self._trace is not None:
            self._trace.append(
                "%s,mul,single,%08x,%08x,%08x" % (self._top, ba, bb, br)
            )
        return r

    def div_s(self, a: float, b: float) -> float:
        keep = self._keep_div_s
        ba = _u4(_pf(a))[0]
        if ba & _EXP_S != _EXP_S:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _uf(_p4(nb))[0]
        bb = _u4(_pf(b))[0]
        if bb & _EXP_S != _EXP_S:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _uf(_p4(nb))[0]
        if b == 0.0:
            if a == 0.0 or a != a:
                rs = float("nan")
            elif (ba >> 31) == (bb >> 31):
                rs = _INF
            else:
                rs = -_INF
        else:
            rs = a / b
        if -_F32_OVF < rs < _F32_OVF:
            br = _u4(_pf(rs))[0]
            if br & _EXP_S != _EXP_S:
                br &= keep
            r = _uf(_p4(br))[0]
        elif rs != rs or rs == _INF or rs == -_INF:
            br = _u4(_pf(rs))[0]
            r = rs
        else:
            br = 0x7F800000 if rs > 0 else 0xFF800000
            r = _INF if rs > 0 else -_INF
        cell = self._cell_div_s
        cell[0] += 1
        cell[1] += _mb_s(ba) + _mb_s(bb) + _mb_s(br)
        if self._trace is not None:
            self._trace.append(
                "%s,div,single,%08x,%08x,%08x" % (self._top, ba, bb, br)
            )
        return r

    # -- double-precision ops ----------------------------------------------

    def add_d(self, a: float, b: float) -> float:
        keep = self._keep_add_d
        ba = _u8(_pd(a))[0]
        if ba & _EXP_D != _EXP_D:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _ud(_p8(nb))[0]
        bb = _u8(_pd(b))[0]
        if bb & _EXP_D != _EXP_D:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _ud(_p8(nb))[0]
        r = a + b
        br = _u8(_pd(r))[0]
        if br & _EXP_D != _EXP_D:
            nb = br & keep
            if nb != br:
                br = nb
                r = _ud(_p8(nb))[0]
        cell = self._cell_add_d
        cell[0] += 1
        cell[1] += _mb_d(ba) + _mb_d(bb) + _mb_d(br)
        if self._trace is not None:
            self._trace.append(
                "%s,add,double,%016x,%016x,%016x" % (self._top, ba, bb, br)
            )
        return r

    def sub_d(self, a: float, b: float) -> float:
        keep = self._keep_sub_d
        ba = _u8(_pd(a))[0]
        if ba & _EXP_D != _EXP_D:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _ud(_p8(nb))[0]
        bb = _u8(_pd(b))[0]
        if bb & _EXP_D != _EXP_D:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _ud(_p8(nb))[0]
        r = a - b
        br = _u8(_pd(r))[0]
        if br & _EXP_D != _EXP_D:
            nb = br & keep
            if nb != br:
                br = nb
                r = _ud(_p8(nb))[0]
        cell = self._cell_sub_d
        cell[0] += 1
        cell[1] += _mb_d(ba) + _mb_d(bb) + _mb_d(br)
        if self._trace is not None:
            self._trace.append(
                "%s,sub,double,%016x,%016x,%016x" % (self._top, ba, bb, br)
            )
        return r

    def mul_d(self, a: float, b: float) -> float:
        keep = self._keep_mul_d
        ba = _u8(_pd(a))[0]
        if ba & _EXP_D != _EXP_D:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _ud(_p8(nb))[0]
        bb = _u8(_pd(b))[0]
        if bb & _EXP_D != _EXP_D:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _ud(_p8(nb))[0]
        r = a * b
        br = _u8(_pd(r))[0]
        if br & _EXP_D != _EXP_D:
            nb = br & keep
            if nb != br:
                br = nb
                r = _ud(_p8(nb))[0]
        cell = self._cell_mul_d
        cell[0] += 1
        cell[1] += _mb_d(ba) + _mb_d(bb) + _mb_d(br)
        if self._trace is not None:
            self._trace.append(
                "%s,mul,double,%016x,%016x,%016x" % (self._top, ba, bb, br)
            )
        return r

    def div_d(self, a: float, b: float) -> float:
        keep = self._keep_div_d
        ba = _u8(_pd(a))[0]
        if ba & _EXP_D != _EXP_D:
            nb = ba & keep
            if nb != ba:
                ba = nb
                a = _ud(_p8(nb))[0]
        bb = _u8(_pd(b))[0]
        if bb & _EXP_D != _EXP_D:
            nb = bb & keep
            if nb != bb:
                bb = nb
                b = _ud(_p8(nb))[0]
        if b == 0.0:
            if a == 0.0 or a != a:
                r = float("nan")
            elif (ba >> 63) == (bb >> 63):
                r = _INF
            else:
                r = -_INF
        else:
            r = a / b
        br = _u8(_pd(r))[0]
        if br & _EXP_D != _EXP_D:
            nb = br & keep
            if nb != br:
                br = nb
                r = _ud(_p8(nb))[0]
        cell = self._cell_div_d
        cell[0] += 1
        cell[1] += _mb_d(ba) + _mb_d(bb) + _mb_d(br)
        if self._trace is not None:
            self._trace.append(
                "%s,div,double,%016x,%016x,%016x" % (self._top, ba, bb, br)
            )
        return r

    # -- generic dispatch (data-driven kernels, tests) ---------------------

    _DISPATCH = {
        (OpClass.ADD, Width.SINGLE): "add_s",
        (OpClass.SUB, Width.SINGLE): "sub_s",
        (OpClass.MUL, Width.SINGLE): "mul_s",
        (OpClass.DIV, Width.SINGLE): "div_s",
        (OpClass.ADD, Width.DOUBLE): "add_d",
        (OpClass.SUB, Width.DOUBLE): "sub_d",
        (OpClass.MUL, Width.DOUBLE): "mul_d",
        (OpClass.DIV, Width.DOUBLE): "div_d",
    }

    def binop(self, op: OpClass, width: Width, a: float, b: float) -> float:
        return getattr(self, self._DISPATCH[(op, width)])(a, b)

    def current_fpi(self) -> Fpi:
        return resolve_fpi(self.stack, self.rule)


class NativeOps:
    """Uninstrumented twin: native IEEE arithmetic, no counters, no rule."""

    def enter(self, scope: str) -> None:
        pass

    def exit(self) -> None:
        pass

    def load_s(self, n: int) -> None:
        pass

    def store_s(self, n: int) -> None:
        pass

    def load_d(self, n: int) -> None:
        pass

    def store_d(self, n: int) -> None:
        pass

    def add_s(self, a: float, b: float) -> float:
        return single_from_double(a + b)

    def sub_s(self, a: float, b: float) -> float:
        return single_from_double(a - b)

    def mul_s(self, a: float, b: float) -> float:
        return single_from_double(a * b)

    def div_s(self, a: float, b: float) -> float:
        return native_binop(OpClass.DIV, a, b, Width.SINGLE)

    def add_d(self, a: float, b: float) -> float:
        return a + b

    def sub_d(self, a: float, b: float) -> float:
        return a - b

    def mul_d(self, a: float, b: float) -> float:
        return a * b

    def div_d(self, a: float, b: float) -> float:
        return native_binop(OpClass.DIV, a, b, Width.DOUBLE)

    def binop(self, op: OpClass, width: Width, a: float, b: float) -> float:
        return getattr(self, Instrument._DISPATCH[(op, width)])(a, b)
