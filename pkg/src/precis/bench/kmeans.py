"""Lloyd iterations on seeded 2-D point clouds, fixed iteration count.

Scopes: assign accumulates per-point inertia while picking the nearest
centroid, distance computes squared distances, accumulate sums member
coordinates, recenter divides by member counts.  Assignments may flip under
truncation but FLOP counts stay structural.
"""

from __future__ import annotations

import random

from ..fpcore import Width, single_from_double as f32
from . import KernelSpec, error_rate, register

SCOPES = ("assign", "distance", "accumulate", "recenter")
N_POINTS = 48
N_CLUSTERS = 3
ITERATIONS = 5

_BLOB_CENTERS = [(-4.0, -2.0), (3.5, 4.0), (5.0, -3.5)]


def make_inputs(seed: int, n: int) -> list:
    rng = random.Random(seed)
    inputs = []
    for _ in range(n):
        points = []
        for i in range(N_POINTS):
            cx, cy = _BLOB_CENTERS[i % N_CLUSTERS]
            points.append([
                f32(cx + rng.gauss(0.0, 1.2)),
                f32(cy + rng.gauss(0.0, 1.2)),
            ])
        inputs.append(points)
    return inputs


def body(ops, points) -> list[float]:
    n = len(points)
    k = N_CLUSTERS
    centroids = [list(points[(i * n) // k]) for i in range(k)]
    inertia = 0.0
    for _ in range(ITERATIONS):
        ops.enter("assign")
        ops.load_s(n * 2)
        assigned = []
        inertia = 0.0
        for px, py in points:
            best_j = 0
            best_d = None
            for j in range(k):
                ops.enter("distance")
                dx = ops.sub_s(px, centroids[j][0])
                dy = ops.sub_s(py, centroids[j][1])
                d = ops.add_s(ops.mul_s(dx, dx), ops.mul_s(dy, dy))
                ops.exit()
                if best_d is None or d < best_d:
                    best_d = d
                    best_j = j
            assigned.append(best_j)
            inertia = ops.add_s(inertia, best_d)
        ops.exit()

        ops.enter("accumulate")
        sums = [[0.0, 0.0] for _ in range(k)]
        counts = [0] * k
        for (px, py), j in zip(points, assigned):
            sums[j][0] = ops.add_s(sums[j][0], px)
            sums[j][1] = ops.add_s(sums[j][1], py)
            counts[j] += 1
        ops.exit()

        ops.enter("recenter")
        for j in range(k):
            # empty clusters keep a zero centroid; divisor 1 keeps the FLOP
            # count independent of assignments
            div = float(counts[j]) if counts[j] else 1.0
            centroids[j][0] = ops.div_s(sums[j][0], div)
            centroids[j][1] = ops.div_s(sums[j][1], div)
        ops.store_s(k * 2)
        ops.exit()

    out = [c for pair in centroids for c in pair]
    out.append(inertia)
    return out


register(KernelSpec(
    name="kmeans",
    scopes=SCOPES,
    width=Width.SINGLE,
    body=body,
    make_inputs=make_inputs,
    metric=error_rate,
))
