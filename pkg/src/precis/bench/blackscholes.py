"""Closed-form European option pricing over seeded parameter vectors.

Single-precision dominant.  Scopes: main_loop drives per-option work, norm
computes the log-moneyness terms, price_core combines the distribution
values into a price, and cndf evaluates the normal CDF polynomial (the FLOP
hot spot).  exp/log/sqrt run natively; only add/sub/mul/div are routed
through the instrument.
"""

from __future__ import annotations

import math
import random

from ..fpcore import Width, single_from_double as f32
from . import KernelSpec, error_rate, register

SCOPES = ("main_loop", "norm", "price_core", "cndf")
N_OPTIONS = 32

# Abramowitz & Stegun 26.2.17 rational approximation constants
_ALPHA = f32(0.2316419)
_A1 = f32(0.319381530)
_A2 = f32(-0.356563782)
_A3 = f32(1.781477937)
_A4 = f32(-1.821255978)
_A5 = f32(1.330274429)
_INV_SQRT_2PI = f32(0.3989422804014327)


def make_inputs(seed: int, n: int) -> list:
    rng = random.Random(seed)
    inputs = []
    for _ in range(n):
        options = []
        for _ in range(N_OPTIONS):
            spot = rng.uniform(10.0, 200.0)
            # near-the-money strikes keep baseline prices well away from zero
            strike = spot * rng.uniform(0.7, 1.3)
            options.append([
                f32(spot),
                f32(strike),
                f32(rng.uniform(0.2, 2.0)),      # years to maturity
                f32(rng.uniform(0.01, 0.10)),    # rate
                f32(rng.uniform(0.15, 0.65)),    # volatility
                1 if rng.random() < 0.5 else 0,  # call flag
            ])
        inputs.append(options)
    return inputs


def _cndf(ops, x: float) -> float:
    ops.enter("cndf")
    ax = -x if x < 0.0 else x
    xx = ops.mul_s(ax, ax)
    half_xx = ops.mul_s(xx, 0.5)
    pdf = ops.mul_s(f32(math.exp(-half_xx)), _INV_SQRT_2PI)
    denom = ops.add_s(1.0, ops.mul_s(_ALPHA, ax))
    k = ops.div_s(1.0, denom)
    poly = ops.mul_s(
        k,
        ops.add_s(
            _A1,
            ops.mul_s(
                k,
                ops.add_s(
                    _A2,
                    ops.mul_s(k, ops.add_s(_A3, ops.mul_s(k, ops.add_s(_A4, ops.mul_s(k, _A5))))),
                ),
            ),
        ),
    )
    n = ops.sub_s(1.0, ops.mul_s(pdf, poly))
    if x < 0.0:
        n = ops.sub_s(1.0, n)
    ops.exit()
    return n


def body(ops, options) -> list[float]:
    ops.enter("main_loop")
    ops.load_s(len(options) * 5)
    prices = []
    for spot, strike, years, rate, vol, is_call in options:
        ops.enter("norm")
        ratio = ops.div_s(spot, strike)
        log_m = f32(math.log(ratio))
        vol_sq_half = ops.mul_s(ops.mul_s(vol, vol), 0.5)
        drift = ops.mul_s(ops.add_s(rate, vol_sq_half), years)
        vol_sqrt_t = ops.mul_s(vol, f32(math.sqrt(years)))
        d1 = ops.div_s(ops.add_s(log_m, drift), vol_sqrt_t)
        d2 = ops.sub_s(d1, vol_sqrt_t)
        ops.exit()

        ops.enter("price_core")
        rt = ops.mul_s(rate, years)
        strike_pv = ops.mul_s(strike, f32(math.exp(-rt)))
        n_d1 = _cndf(ops, d1)
        n_d2 = _cndf(ops, d2)
        if is_call:
            price = ops.sub_s(ops.mul_s(spot, n_d1), ops.mul_s(strike_pv, n_d2))
        else:
            price = ops.sub_s(
                ops.mul_s(strike_pv, ops.sub_s(1.0, n_d2)),
                ops.mul_s(spot, ops.sub_s(1.0, n_d1)),
            )
        ops.exit()
        prices.append(price)
    ops.store_s(len(prices))
    ops.exit()
    return prices


register(KernelSpec(
    name="blackscholes",
    scopes=SCOPES,
    width=Width.SINGLE,
    body=body,
    make_inputs=make_inputs,
    metric=error_rate,
))
