"""Pulse radar pipeline: low-pass filter and pulse compression, both built
on one shared FFT scope, then magnitude detection.

lpf and pc contain no arithmetic of their own: they orchestrate fft (forward
transform, inverse transform) and combine (spectral products).  That makes
the caller frames pure placement context, which is exactly what
call-stack-sensitive rules need: mapping lpf and pc to different FPIs runs
the two FFT passes at different precisions, while a currently-in-progress
rule can only pin the fft scope itself.
"""

from __future__ import annotations

import math
import random

import numpy as np

from ..fpcore import Width, single_from_double as f32
from . import KernelSpec, error_rate, register

SCOPES = ("lpf", "pc", "fft", "combine", "detect")
N = 64
PULSE_LEN = 16


def _chirp() -> list[float]:
    return [math.cos(0.35 * k + 0.06 * k * k) for k in range(PULSE_LEN)]


def make_inputs(seed: int, n: int) -> list:
    rng = random.Random(seed)
    pulse = _chirp()
    padded = np.zeros(N)
    padded[:PULSE_LEN] = pulse
    matched = np.conj(np.fft.fft(padded))
    m_re = [f32(v) for v in matched.real]
    m_im = [f32(v) for v in matched.imag]
    # raised-cosine low-pass spectral weights over bin distance from DC
    h_re = []
    for b in range(N):
        dist = min(b, N - b)
        if dist <= 8:
            w = 1.0
        elif dist >= 16:
            w = 0.0
        else:
            w = 0.5 * (1.0 + math.cos(math.pi * (dist - 8) / 8.0))
        h_re.append(f32(w))
    h_im = [0.0] * N

    inputs = []
    for _ in range(n):
        sig = [0.0] * N
        for tone in range(3):
            freq = rng.uniform(0.5, 6.0)
            amp = rng.uniform(0.4, 1.2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            for t in range(N):
                sig[t] += amp * math.cos(2.0 * math.pi * freq * t / N + phase)
        offset = rng.randrange(0, N - PULSE_LEN)
        for k2, p in enumerate(pulse):
            sig[offset + k2] += 1.5 * p
        sig = [f32(v + rng.gauss(0.0, 0.05)) for v in sig]
        inputs.append({
            "sig_re": sig,
            "sig_im": [0.0] * N,
            "h_re": h_re,
            "h_im": h_im,
            "m_re": m_re,
            "m_im": m_im,
        })
    return inputs


def _bit_reverse(re: list[float], im: list[float]) -> None:
    n = len(re)
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]


def _fft(ops, re: list[float], im: list[float], invert: bool) -> None:
    """Iterative radix-2 transform; twiddles come from native cos/sin."""
    ops.enter("fft")
    n = len(re)
    _bit_reverse(re, im)
    size = 2
    while size <= n:
        half = size >> 1
        ang = (2.0 if invert else -2.0) * math.pi / size
        tw = [(f32(math.cos(ang * k)), f32(math.sin(ang * k))) for k in range(half)]
        for start in range(0, n, size):
            for k in range(half):
                wr, wi = tw[k]
                lo = start + k
                hi = lo + half
                tr = ops.sub_s(ops.mul_s(wr, re[hi]), ops.mul_s(wi, im[hi]))
                ti = ops.add_s(ops.mul_s(wr, im[hi]), ops.mul_s(wi, re[hi]))
                re[hi] = ops.sub_s(re[lo], tr)
                im[hi] = ops.sub_s(im[lo], ti)
                re[lo] = ops.add_s(re[lo], tr)
                im[lo] = ops.add_s(im[lo], ti)
        size <<= 1
    if invert:
        inv = 1.0 / n  # power of two, exact
        for i in range(n):
            re[i] = ops.mul_s(re[i], inv)
            im[i] = ops.mul_s(im[i], inv)
    ops.exit()


def _combine(ops, ar, ai, br, bi) -> None:
    ops.enter("combine")
    for i in range(len(ar)):
        tr = ops.sub_s(ops.mul_s(ar[i], br[i]), ops.mul_s(ai[i], bi[i]))
        ti = ops.add_s(ops.mul_s(ar[i], bi[i]), ops.mul_s(ai[i], br[i]))
        ar[i] = tr
        ai[i] = ti
    ops.exit()


def body(ops, data) -> list[float]:
    n = len(data["sig_re"])
    re = list(data["sig_re"])
    im = list(data["sig_im"])

    ops.enter("lpf")
    ops.load_s(2 * n)
    _fft(ops, re, im, invert=False)
    _combine(ops, re, im, data["h_re"], data["h_im"])
    _fft(ops, re, im, invert=True)
    ops.store_s(2 * n)
    ops.exit()

    ops.enter("pc")
    ops.load_s(2 * n)
    _fft(ops, re, im, invert=False)
    _combine(ops, re, im, data["m_re"], data["m_im"])
    _fft(ops, re, im, invert=True)
    ops.store_s(2 * n)
    ops.exit()

    ops.enter("detect")
    ops.load_s(2 * n)
    mags = [
        ops.add_s(ops.mul_s(re[i], re[i]), ops.mul_s(im[i], im[i]))
        for i in range(n)
    ]
    ops.store_s(n)
    ops.exit()
    return mags


register(KernelSpec(
    name="radar",
    scopes=SCOPES,
    width=Width.SINGLE,
    body=body,
    make_inputs=make_inputs,
    metric=error_rate,
))
