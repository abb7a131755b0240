"""Multi-objective search over precision configurations.

Objectives are (error %, normalized FPU energy %), both minimized.  The
searcher is NSGA-II with binary tournaments, uniform crossover and per-gene
random-reset mutation; every distinct genome is evaluated at most once and
only distinct evaluations consume budget.  An exhaustive enumerator serves
as the ground-truth oracle on small spaces.  Memory energy is carried
through every report but not optimized.
"""

from __future__ import annotations

import itertools
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .fpcore import Width
from .scope import Configuration, RuleKind

INF = float("inf")


@dataclass(frozen=True)
class EvalPoint:
    """Outcome of one configuration: medians over the evaluation input set."""

    config: Configuration
    error_pct: float
    fpu_norm: float
    mem_norm: float
    fpu_pj: float = 0.0
    mem_pj: float = 0.0

    @property
    def objectives(self) -> tuple[float, float]:
        return (self.error_pct, self.fpu_norm)


def dominates(p: EvalPoint, q: EvalPoint) -> bool:
    pe, pf = p.objectives
    qe, qf = q.objectives
    return pe <= qe and pf <= qf and (pe < qe or pf < qf)


def nondominated_sort(points: Sequence[EvalPoint]) -> list[list[int]]:
    """Fast nondominated sort; front 0 is the Pareto set."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(points[j], points[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    for i in range(n):
        if counts[i] == 0:
            fronts[0].append(i)
    current = 0
    while fronts[current]:
        nxt = []
        for i in fronts[current]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(
    points: Sequence[EvalPoint], front: Sequence[int]
) -> dict[int, float]:
    """Per-index crowding distance; boundary points get infinity."""
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: INF for i in front}
    for axis in range(2):
        ordered = sorted(front, key=lambda i: points[i].objectives[axis])
        lo = points[ordered[0]].objectives[axis]
        hi = points[ordered[-1]].objectives[axis]
        dist[ordered[0]] = INF
        dist[ordered[-1]] = INF
        span = hi - lo
        if span <= 0:
            continue
        for rank in range(1, len(ordered) - 1):
            prev_v = points[ordered[rank - 1]].objectives[axis]
            next_v = points[ordered[rank + 1]].objectives[axis]
            if dist[ordered[rank]] != INF:
                dist[ordered[rank]] += (next_v - prev_v) / span
    return dist


@dataclass(frozen=True)
class SearchSpace:
    """Kernel-agnostic genome space: one gene per target, same alphabet."""

    targets: tuple[str, ...]
    alphabet: tuple[int, ...]
    rule_kind: RuleKind
    width: Width

    def __post_init__(self):
        if not self.targets:
            raise ValueError("empty target list")
        if not self.alphabet:
            raise ValueError("empty alphabet")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("duplicate alphabet levels")
        full = self.width.mantissa_bits
        for k in self.alphabet:
            if not 1 <= k <= full:
                raise ValueError("alphabet level %d out of range" % k)

    @classmethod
    def full_range(cls, targets, rule_kind, width: Width) -> "SearchSpace":
        return cls(
            tuple(targets),
            tuple(range(1, width.mantissa_bits + 1)),
            rule_kind,
            width,
        )

    def size(self) -> int:
        return len(self.alphabet) ** len(self.targets)

    def identity_genome(self) -> tuple[int, ...]:
        full = self.width.mantissa_bits
        anchor = full if full in self.alphabet else max(self.alphabet)
        return (anchor,) * len(self.targets)

    def enumerate(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(self.alphabet, repeat=len(self.targets))

    def random_genome(self, rng: random.Random) -> tuple[int, ...]:
        return tuple(rng.choice(self.alphabet) for _ in self.targets)


@dataclass
class GaParams:
    """NSGA-II knobs; defaults track the ~400-evaluation budget."""

    population_size: int = 40
    generations: int = 10
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # default 1/genome_length
    eval_budget: int = 400
    seed: int = 0
    stagnation_limit: int | None = None  # generations without frontier change

    def validate(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.population_size * self.generations > self.eval_budget:
            raise ValueError(
                "population_size * generations (%d) exceeds eval budget %d"
                % (self.population_size * self.generations, self.eval_budget)
            )


@dataclass
class SearchResult:
    frontier_points: list[EvalPoint]
    hull: list[EvalPoint]
    log: list[EvalPoint] = field(default_factory=list)
    evaluations: int = 0


def _frontier_of(log: Sequence[EvalPoint]) -> list[EvalPoint]:
    """Nondominated subset of a full evaluation log, deduplicated on
    objectives and ordered (error, energy, genome) for determinism."""
    if not log:
        return []
    fronts = nondominated_sort(log)
    pts = [log[i] for i in fronts[0]]
    pts.sort(key=lambda p: (p.error_pct, p.fpu_norm, p.config.genome))
    out = []
    seen = set()
    for p in pts:
        key = (p.error_pct, p.fpu_norm)
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


_HV_REF = (2e9, 101.0)  # dominates any reachable (error %, energy %) pair


def hypervolume(points: Sequence[EvalPoint], ref=_HV_REF) -> float:
    """2-D dominated hypervolume w.r.t. a reference corner (both minimized).

    Grows monotonically as an evaluation log's frontier improves, so a flat
    value across generations means the search has stagnated.
    """
    front = _frontier_of(points)
    if not front:
        return 0.0
    hv = 0.0
    for i, p in enumerate(front):
        next_x = front[i + 1].error_pct if i + 1 < len(front) else ref[0]
        hv += (min(next_x, ref[0]) - min(p.error_pct, ref[0])) * (
            ref[1] - min(p.fpu_norm, ref[1])
        )
    return hv


def lower_convex_hull(points: Sequence[EvalPoint]) -> list[EvalPoint]:
    """Monotone-chain lower hull over (error %, energy %); collinear
    interior points are dropped."""
    if not points:
        return []
    best: dict[float, EvalPoint] = {}
    for p in sorted(points, key=lambda p: (p.error_pct, p.fpu_norm, p.config.genome)):
        cur = best.get(p.error_pct)
        if cur is None or p.fpu_norm < cur.fpu_norm:
            best[p.error_pct] = p
    pts = [best[x] for x in sorted(best)]
    hull: list[EvalPoint] = []
    for p in pts:
        while len(hull) >= 2:
            x1, y1 = hull[-2].objectives
            x2, y2 = hull[-1].objectives
            if (x2 - x1) * (p.fpu_norm - y1) - (y2 - y1) * (p.error_pct - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def hull_value(hull: Sequence[EvalPoint], x: float) -> float:
    """Piecewise-linear hull height at error x (clamped to the hull's span)."""
    if not hull:
        raise ValueError("empty hull")
    if x <= hull[0].error_pct:
        return hull[0].fpu_norm
    if x >= hull[-1].error_pct:
        return hull[-1].fpu_norm
    for a, b in zip(hull, hull[1:]):
        if a.error_pct <= x <= b.error_pct:
            t = (x - a.error_pct) / (b.error_pct - a.error_pct)
            return a.fpu_norm + t * (b.fpu_norm - a.fpu_norm)
    return hull[-1].fpu_norm


def hull_at_or_below(
    lower: Sequence[EvalPoint], upper: Sequence[EvalPoint], tol: float = 1e-9
) -> bool:
    """True when `lower` sits on or below `upper` across their common span.

    tol absorbs interpolation round-off only; the dominance itself is exact.
    """
    if not lower or not upper:
        return False
    xs = sorted(
        {p.error_pct for p in lower} | {p.error_pct for p in upper}
    )
    lo_max = min(lower[-1].error_pct, upper[-1].error_pct)
    lo_min = max(lower[0].error_pct, upper[0].error_pct)
    for x in xs:
        if not lo_min <= x <= lo_max:
            continue
        if hull_value(lower, x) > hull_value(upper, x) + tol:
            return False
    return True


def exhaustive_search(
    space: SearchSpace,
    evaluator: Callable[[tuple[int, ...]], EvalPoint],
    cap: int = 100_000,
) -> SearchResult:
    """Ground-truth frontier by full enumeration."""
    size = space.size()
    if size > cap:
        raise ValueError("space of %d configurations exceeds cap %d" % (size, cap))
    log = [evaluator(genome) for genome in space.enumerate()]
    frontier = _frontier_of(log)
    return SearchResult(frontier, lower_convex_hull(frontier), log, len(log))


def _tournament(
    rng: random.Random,
    pop: list[tuple[int, ...]],
    rank: dict[tuple[int, ...], int],
    crowd: dict[tuple[int, ...], float],
) -> tuple[int, ...]:
    a, b = rng.choice(pop), rng.choice(pop)
    if rank[a] != rank[b]:
        return a if rank[a] < rank[b] else b
    if crowd[a] != crowd[b]:
        return a if crowd[a] > crowd[b] else b
    return a


def nsga2_search(
    space: SearchSpace,
    params: GaParams,
    evaluator: Callable[[tuple[int, ...]], EvalPoint],
) -> SearchResult:
    """Seeded NSGA-II over the genome space.

    The identity genome is planted in the initial population so the
    baseline point always exists.  Offspring that hash-hit the evaluation
    cache are regenerated (mutation first, then uniform resampling, then a
    linear scan on small spaces), so each generation spends its budget on
    distinct genomes until the space or the budget is exhausted.  The
    returned frontier is the nondominated set over everything evaluated.
    """
    params.validate()
    rng = random.Random(params.seed)
    mut = params.mutation_rate
    if mut is None:
        mut = 1.0 / len(space.targets)
    budget = min(params.eval_budget, space.size())
    cache: dict[tuple[int, ...], EvalPoint] = {}
    log: list[EvalPoint] = []

    def evaluate(genome: tuple[int, ...]) -> EvalPoint:
        point = cache.get(genome)
        if point is None:
            point = evaluator(genome)
            cache[genome] = point
            log.append(point)
        return point

    def fresh_genome(
        base: tuple[int, ...] | None, pending: set
    ) -> tuple[int, ...] | None:
        """A genome neither evaluated nor pending, or None when spent."""
        if len(cache) + len(pending) >= space.size():
            return None
        for _ in range(12):
            if base is not None:
                candidate = tuple(
                    rng.choice(space.alphabet) if rng.random() < mut else g
                    for g in base
                )
                if candidate not in cache and candidate not in pending:
                    return candidate
            base = space.random_genome(rng)
            if base not in cache and base not in pending:
                return base
        if space.size() <= 65536:
            for candidate in space.enumerate():
                if candidate not in cache and candidate not in pending:
                    return candidate
        return None

    # generation 1: identity anchor plus random distinct genomes
    population: list[tuple[int, ...]] = []
    identity = space.identity_genome()
    evaluate(identity)
    population.append(identity)
    while len(population) < params.population_size and len(log) < budget:
        g = fresh_genome(None, set())
        if g is None:
            break
        evaluate(g)
        population.append(g)

    last_hv = None
    stagnant = 0
    generation = 1
    while generation < params.generations and len(log) < budget:
        pts = [cache[g] for g in population]
        fronts = nondominated_sort(pts)
        rank = {}
        crowd = {}
        for fi, front in enumerate(fronts):
            cd = crowding_distance(pts, front)
            for i in front:
                rank[population[i]] = fi
                crowd[population[i]] = cd[i]

        children: list[tuple[int, ...]] = []
        pending: set[tuple[int, ...]] = set()
        while len(children) < params.population_size and len(log) + len(children) < budget:
            p1 = _tournament(rng, population, rank, crowd)
            p2 = _tournament(rng, population, rank, crowd)
            if rng.random() < params.crossover_rate:
                child = tuple(
                    g1 if rng.random() < 0.5 else g2 for g1, g2 in zip(p1, p2)
                )
            else:
                child = p1
            child = tuple(
                rng.choice(space.alphabet) if rng.random() < mut else g
                for g in child
            )
            if child in cache or child in pending:
                child = fresh_genome(child, pending)
                if child is None:
                    break
            children.append(child)
            pending.add(child)
        if not children:
            break
        for child in children:
            evaluate(child)

        union = population + children
        union_pts = [cache[g] for g in union]
        fronts = nondominated_sort(union_pts)
        survivors: list[tuple[int, ...]] = []
        for front in fronts:
            if len(survivors) + len(front) <= params.population_size:
                survivors.extend(union[i] for i in front)
            else:
                cd = crowding_distance(union_pts, front)
                ordered = sorted(front, key=lambda i: -cd[i])
                room = params.population_size - len(survivors)
                survivors.extend(union[i] for i in ordered[:room])
                break
        population = survivors
        generation += 1

        if params.stagnation_limit is not None:
            hv = hypervolume(log)
            if last_hv is not None and hv <= last_hv:
                stagnant += 1
                if stagnant >= params.stagnation_limit:
                    break
            else:
                stagnant = 0
            last_hv = hv

    frontier = _frontier_of(log)
    return SearchResult(frontier, lower_convex_hull(frontier), log, len(log))


@dataclass(frozen=True)
class SavingsRow:
    threshold_pct: float
    fpu_savings_pct: float
    mem_savings_pct: float


def quantize_frontier(
    points: Sequence[EvalPoint], thresholds: Sequence[float] = (1.0, 5.0, 10.0)
) -> list[SavingsRow]:
    """Best energy saving available at each tolerated error threshold."""
    rows = []
    for t in thresholds:
        feasible = [p for p in points if p.error_pct <= t]
        if feasible:
            fpu = 100.0 - min(p.fpu_norm for p in feasible)
            mem = 100.0 - min(p.mem_norm for p in feasible)
        else:
            fpu = mem = 0.0
        rows.append(SavingsRow(t, fpu, mem))
    return rows


@dataclass(frozen=True)
class RobustnessStats:
    """Train-to-test agreement of per-config medians."""

    train_error: tuple[float, ...]
    test_error: tuple[float, ...]
    train_fpu: tuple[float, ...]
    test_fpu: tuple[float, ...]
    slope_error: float
    intercept_error: float
    r_error: float
    slope_energy: float
    intercept_energy: float
    r_energy: float
    degenerate_error: bool
    degenerate_energy: bool


def _fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float, bool]:
    """Least squares ys ~ slope*xs + intercept plus Pearson r.

    Identical vectors report r = 1 exactly; zero-variance mismatches are
    flagged degenerate with r = nan.
    """
    n = len(xs)
    if n < 2:
        raise ValueError("need at least 2 configurations")
    if tuple(xs) == tuple(ys):
        return 1.0, 0.0, 1.0, False
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    if sxx <= 0 or syy <= 0:
        return 0.0, my, float("nan"), True
    slope = sxy / sxx
    return slope, my - slope * mx, sxy / math.sqrt(sxx * syy), False


def robustness(
    configs: Sequence[Configuration],
    evaluator_factory: Callable[[Sequence], Callable[[tuple[int, ...]], EvalPoint]],
    train_inputs: Sequence,
    test_inputs: Sequence,
) -> RobustnessStats:
    """Medians per config on the training and test input sets, with a
    train-to-test linear fit and correlation per objective."""
    if len(configs) < 2:
        raise ValueError("need at least 2 configurations")
    if not train_inputs or not test_inputs:
        raise ValueError("both input sets must be nonempty")
    ev_train = evaluator_factory(train_inputs)
    ev_test = evaluator_factory(test_inputs)
    tr_err, te_err, tr_fpu, te_fpu = [], [], [], []
    for config in configs:
        pt = ev_train(config.genome)
        pe = ev_test(config.genome)
        tr_err.append(pt.error_pct)
        te_err.append(pe.error_pct)
        tr_fpu.append(pt.fpu_norm)
        te_fpu.append(pe.fpu_norm)
    se, ie, re_, de = _fit(tr_err, te_err)
    sf, if_, rf, df = _fit(tr_fpu, te_fpu)
    return RobustnessStats(
        tuple(tr_err), tuple(te_err), tuple(tr_fpu), tuple(te_fpu),
        se, ie, re_, sf, if_, rf, de, df,
    )


def median(values: Sequence[float]) -> float:
    return statistics.median(values)
