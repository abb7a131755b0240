"""Built-in instrumented benchmark kernels.

Each kernel is a desk-scale stand-in for a full benchmark: a deterministic
seeded input generator, a body written against the instrument op surface,
and a quality metric comparing a run's output against the full-precision
baseline.  Bodies are pure functions of (configuration, input); FLOP and
memory-traffic counts are structural (independent of truncation), so energy
comparisons across configurations are apples to apples.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..energy import EpiTable, ExecutionCounters, fpu_energy, mem_energy
from ..fpcore import Fpi, Width
from ..runtime import Instrument, NativeOps
from ..scope import (
    ROOT_SCOPE,
    Configuration,
    PlacementRule,
    RuleKind,
    configuration_to_rule,
)

REL_ERR_EPS = 1e-12
# non-finite outputs dominate every frontier; keep objectives finite
NONFINITE_ERR_PCT = 1e9


class KernelConfigError(ValueError):
    """Configuration does not fit the kernel (unknown scope, bad genome)."""


def error_rate(output: Sequence[float], baseline: Sequence[float]) -> float:
    """Mean relative deviation in percent, guarding zero baselines."""
    if len(output) != len(baseline):
        raise ValueError(
            "shape mismatch: %d vs %d" % (len(output), len(baseline))
        )
    if not output:
        return 0.0
    total = 0.0
    for x, x0 in zip(output, baseline):
        d = abs(x - x0)
        if d != d or d == float("inf"):
            total += NONFINITE_ERR_PCT
            continue
        denom = abs(x0)
        if denom < REL_ERR_EPS:
            denom = REL_ERR_EPS
        total += d / denom
    return total / len(output) * 100.0


@dataclass(frozen=True)
class KernelSpec:
    """A registered benchmark kernel.

    `body(ops, data)` must issue all FP arithmetic through `ops` and return
    a flat list of floats; `make_inputs(seed, n)` must be bit-reproducible
    for a given seed.  `categories` maps per-instance scopes to layer
    categories for kernels that support PLC placement.
    """

    name: str
    scopes: tuple[str, ...]
    width: Width
    body: Callable
    make_inputs: Callable[[int, int], list]
    metric: Callable[[Sequence[float], Sequence[float]], float] = error_rate
    categories: Mapping[str, str] | None = None
    train_seed: int = 101
    train_count: int = 3
    test_seed: int = 202
    test_count: int = 9

    def category_targets(self) -> tuple[str, ...]:
        if not self.categories:
            return ()
        seen: list[str] = []
        for scope in self.scopes:
            cat = self.categories.get(scope)
            if cat and cat not in seen:
                seen.append(cat)
        return tuple(seen)

    def targets_for(self, kind: RuleKind) -> tuple[str, ...]:
        if kind is RuleKind.WP:
            return ("*",)
        if kind is RuleKind.PLC:
            cats = self.category_targets()
            if not cats:
                raise KernelConfigError(
                    "kernel %s has no layer categories for PLC" % self.name
                )
            return cats
        return self.scopes


@dataclass
class InputSet:
    """Disjoint training and test inputs for robustness studies."""

    training: list
    test: list

    @classmethod
    def for_kernel(
        cls,
        spec: KernelSpec,
        train_seed: int | None = None,
        test_seed: int | None = None,
        train_count: int | None = None,
        test_count: int | None = None,
    ) -> "InputSet":
        ts = spec.train_seed if train_seed is None else train_seed
        vs = spec.test_seed if test_seed is None else test_seed
        if ts == vs:
            raise KernelConfigError("training and test seeds must differ")
        return cls(
            training=spec.make_inputs(ts, train_count or spec.train_count),
            test=spec.make_inputs(vs, test_count or spec.test_count),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump({"training": self.training, "test": self.test}, fh)

    @classmethod
    def load(cls, path: str) -> "InputSet":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(training=raw["training"], test=raw["test"])


@dataclass
class RunResult:
    output: list[float]
    counters: ExecutionCounters
    error_pct: float
    fpu_pj: float
    mem_pj: float


def _validate_targets(spec: KernelSpec, config: Configuration) -> None:
    if config.rule_kind is RuleKind.WP:
        return
    if config.rule_kind is RuleKind.PLC:
        allowed = set(spec.category_targets())
    else:
        allowed = set(spec.scopes)
    unknown = [t for t in config.targets if t not in allowed]
    if unknown:
        raise KernelConfigError(
            "unknown scopes for kernel %s: %s" % (spec.name, ", ".join(unknown))
        )


def baseline_output(spec: KernelSpec, data) -> list[float]:
    """The uninstrumented full-precision run the error metric compares to."""
    return spec.body(NativeOps(), data)


def run_kernel(
    spec: KernelSpec,
    config: Configuration,
    data,
    width: Width | None = None,
    epi: EpiTable | None = None,
    trace: list[str] | None = None,
    baseline: list[float] | None = None,
) -> RunResult:
    """Execute one configuration on one input and measure it."""
    width = width or spec.width
    epi = epi or EpiTable()
    _validate_targets(spec, config)
    rule = configuration_to_rule(config, width)
    ins = Instrument(rule, width, trace=trace)
    output = spec.body(ins, data)
    if ins.stack.frames != [ROOT_SCOPE]:
        raise RuntimeError(
            "kernel %s left an unbalanced scope stack" % spec.name
        )
    if baseline is None:
        baseline = baseline_output(spec, data)
    err = spec.metric(output, baseline)
    fpu, _ = fpu_energy(ins.counters, epi)
    mem = mem_energy(ins.counters, epi)
    return RunResult(output, ins.counters, err, fpu, mem)


def profile_run(
    spec: KernelSpec, data, width: Width | None = None
) -> ExecutionCounters:
    """Identity-configuration run used for profiling."""
    width = width or spec.width
    rule = PlacementRule(RuleKind.WP, wp_fpi=Fpi.identity(width))
    ins = Instrument(rule, width)
    spec.body(ins, data)
    return ins.counters


def default_targets(
    spec: KernelSpec, data=None, width: Width | None = None, n: int = 10
) -> tuple[str, ...]:
    """The n FLOP-heaviest tunable scopes from a profiling run."""
    if data is None:
        data = spec.make_inputs(spec.train_seed, 1)[0]
    counters = profile_run(spec, data, width)
    weights = {
        name: sc.flops()
        for name, sc in counters.scopes.items()
        if name in spec.scopes and sc.flops() > 0
    }
    ranked = sorted(weights, key=lambda s: (-weights[s], s))
    return tuple(ranked[:n])


class KernelEvaluator:
    """genome -> EvalPoint bridge used by the search algorithms.

    Baseline outputs and energies (identity configuration) are computed once
    per input; every evaluation reports the median error and median
    normalized energies across the input set.
    """

    def __init__(
        self,
        spec: KernelSpec,
        rule_kind: RuleKind,
        targets: Sequence[str],
        inputs: Sequence,
        width: Width | None = None,
        epi: EpiTable | None = None,
    ):
        from ..explore import EvalPoint  # local import: explore is a client

        self._eval_point = EvalPoint
        self.spec = spec
        self.rule_kind = rule_kind
        self.targets = tuple(targets)
        self.width = width or spec.width
        self.epi = epi or EpiTable()
        self.inputs = list(inputs)
        if not self.inputs:
            raise KernelConfigError("evaluator needs at least one input")
        _validate_targets(
            spec,
            Configuration.identity(
                self.targets if rule_kind is not RuleKind.WP else ("*",),
                rule_kind,
                self.width,
            ),
        )
        self.baselines: list[tuple[list[float], float, float]] = []
        identity = Configuration.identity(
            ("*",) if rule_kind is RuleKind.WP else self.targets,
            RuleKind.WP if rule_kind is RuleKind.WP else rule_kind,
            self.width,
        )
        for data in self.inputs:
            out = baseline_output(spec, data)
            res = run_kernel(
                spec, identity, data, width=self.width, epi=self.epi, baseline=out
            )
            if res.fpu_pj <= 0 or res.mem_pj <= 0:
                raise KernelConfigError(
                    "kernel %s records no FPU or memory activity" % spec.name
                )
            self.baselines.append((out, res.fpu_pj, res.mem_pj))

    @property
    def genome_length(self) -> int:
        return 1 if self.rule_kind is RuleKind.WP else len(self.targets)

    def __call__(self, genome: tuple[int, ...]):
        config = Configuration(
            ("*",) if self.rule_kind is RuleKind.WP else self.targets,
            tuple(genome),
            self.rule_kind,
        )
        errs, fpus, mems, fpu_pjs, mem_pjs = [], [], [], [], []
        for data, (out, base_fpu, base_mem) in zip(self.inputs, self.baselines):
            res = run_kernel(
                self.spec, config, data, width=self.width, epi=self.epi, baseline=out
            )
            errs.append(res.error_pct)
            fpus.append(100.0 * res.fpu_pj / base_fpu)
            mems.append(100.0 * res.mem_pj / base_mem)
            fpu_pjs.append(res.fpu_pj)
            mem_pjs.append(res.mem_pj)
        return self._eval_point(
            config=config,
            error_pct=statistics.median(errs),
            fpu_norm=statistics.median(fpus),
            mem_norm=statistics.median(mems),
            fpu_pj=statistics.median(fpu_pjs),
            mem_pj=statistics.median(mem_pjs),
        )


_REGISTRY: dict[str, KernelSpec] = {}


def register(spec: KernelSpec) -> KernelSpec:
    if spec.name in _REGISTRY:
        raise ValueError("kernel %s already registered" % spec.name)
    _REGISTRY[spec.name] = spec
    return spec


def get_kernel(name: str) -> KernelSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KernelConfigError(
            "unknown kernel %r (have: %s)" % (name, ", ".join(sorted(_REGISTRY)))
        ) from None


def kernel_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


from . import blackscholes, cnn, kmeans, micro, particlefilter, radar  # noqa: E402,F401
