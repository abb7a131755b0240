"""Sequential importance resampling on a 1-D tracking problem.

Double-dominant: the filter math runs at double precision, with a small
single-precision summary scope so width-targeted runs see a genuine mix.
All randomness (process noise, resampling offsets) is drawn by the input
generator, so approximation perturbs arithmetic but never the draws.
"""

from __future__ import annotations

import math
import random

from ..fpcore import Width, single_from_double as f32
from . import KernelSpec, register

SCOPES = ("propagate", "likelihood", "normalize", "estimate", "resample", "summary")
N_PARTICLES = 24
N_STEPS = 8
SIGMA = 1.5
DRIFT = 0.8
# cap on the squared-distance exponent so far particles keep normal weights
MAX_EXPONENT = 60.0


def make_inputs(seed: int, n: int) -> list:
    rng = random.Random(seed)
    inputs = []
    for _ in range(n):
        x = rng.uniform(-2.0, 2.0)
        observations = []
        for _ in range(N_STEPS):
            x += DRIFT + rng.gauss(0.0, 0.4)
            observations.append(x + rng.gauss(0.0, SIGMA * 0.5))
        inputs.append({
            "particles": [rng.uniform(-3.0, 3.0) for _ in range(N_PARTICLES)],
            "observations": observations,
            "noise": [
                [rng.gauss(0.0, 0.5) for _ in range(N_PARTICLES)]
                for _ in range(N_STEPS)
            ],
            "offsets": [rng.random() for _ in range(N_STEPS)],
        })
    return inputs


def trajectory_rmse_pct(output, baseline) -> float:
    """Relative RMSE of the estimated trajectory against the baseline, in %."""
    if len(output) != len(baseline):
        raise ValueError("shape mismatch")
    sq = 0.0
    ref = 0.0
    for x, x0 in zip(output, baseline):
        d = x - x0
        if d != d or abs(d) == float("inf"):
            return 1e9
        sq += d * d
        ref += x0 * x0
    n = len(output)
    denom = math.sqrt(ref / n)
    if denom < 1e-12:
        denom = 1e-12
    return math.sqrt(sq / n) / denom * 100.0


def body(ops, data) -> list[float]:
    xs = list(data["particles"])
    n = len(xs)
    two_sigma_sq = 2.0 * SIGMA * SIGMA
    estimates = []
    run_sum = 0.0  # single-precision summary accumulator

    for step, z in enumerate(data["observations"]):
        noise = data["noise"][step]

        ops.enter("propagate")
        ops.load_d(n)
        for i in range(n):
            xs[i] = ops.add_d(xs[i], ops.add_d(DRIFT, noise[i]))
        ops.exit()

        ops.enter("likelihood")
        weights = []
        for i in range(n):
            d = ops.sub_d(z, xs[i])
            arg = ops.div_d(ops.mul_d(d, d), two_sigma_sq)
            if arg > MAX_EXPONENT:
                arg = MAX_EXPONENT
            weights.append(math.exp(-arg))
        ops.exit()

        ops.enter("normalize")
        total = 0.0
        for w in weights:
            total = ops.add_d(total, w)
        for i in range(n):
            weights[i] = ops.div_d(weights[i], total)
        ops.exit()

        ops.enter("estimate")
        est = 0.0
        for i in range(n):
            est = ops.add_d(est, ops.mul_d(weights[i], xs[i]))
        estimates.append(est)
        ops.exit()

        ops.enter("resample")
        cumulative = []
        c = 0.0
        for w in weights:
            c = ops.add_d(c, w)
            cumulative.append(c)
        u0 = data["offsets"][step]
        positions = [
            ops.div_d(ops.add_d(u0, float(i)), float(n)) for i in range(n)
        ]
        chosen = []
        j = 0
        for pos in positions:
            while pos > cumulative[j] and j < n - 1:
                j += 1
            chosen.append(xs[j])
        xs = chosen
        ops.store_d(n)
        ops.exit()

        ops.enter("summary")
        run_sum = ops.add_s(run_sum, f32(est))
        ops.exit()

    ops.enter("summary")
    mean_est = ops.div_s(run_sum, float(len(estimates)))
    ops.exit()
    return estimates + [mean_est]


register(KernelSpec(
    name="particlefilter_mini",
    scopes=SCOPES,
    width=Width.DOUBLE,
    body=body,
    make_inputs=make_inputs,
    metric=trajectory_rmse_pct,
))
