"""Command-line front end: profile, run, explore, robustness.

Every command is deterministic given its manifest and seeds.  All delimited
outputs start with the `# precis-csv v1` version line followed by one
`# meta ...` line carrying the run context, so downstream consumers
(plotting, robustness) never need side channels.

Exit codes: 0 success, 1 usage error, 2 evaluation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

from .bench import (
    InputSet,
    KernelConfigError,
    KernelEvaluator,
    baseline_output,
    default_targets,
    get_kernel,
    kernel_names,
    profile_run,
    run_kernel,
)
from .energy import EnergyConfigError, EpiTable, profile_report
from .explore import (
    GaParams,
    SearchSpace,
    exhaustive_search,
    nsga2_search,
    quantize_frontier,
    robustness,
)
from .fpcore import Width
from .scope import Configuration, RuleKind, configuration_to_rule

CSV_VERSION = "# precis-csv v1"
SEED_ENV = "PRECIS_SEED"

EVAL_LOG_COLUMNS = (
    "config_id", "rule_kind", "genome", "error_pct", "fpu_norm", "mem_norm",
    "fpu_pj", "mem_pj", "is_frontier", "is_hull",
)


class UsageError(Exception):
    pass


class EvaluationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.10g" % v
    return str(v)


def write_csv(path: str, columns, rows, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_VERSION + "\n")
        if meta:
            fh.write(
                "# meta " + " ".join("%s=%s" % (k, v) for k, v in meta.items()) + "\n"
            )
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def read_csv(path: str) -> tuple[dict, list[dict]]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CSV_VERSION:
        raise UsageError("%s: missing or wrong version header" % path)
    meta: dict[str, str] = {}
    idx = 1
    if idx < len(lines) and lines[idx].startswith("# meta "):
        for pair in lines[idx][len("# meta "):].split():
            key, _, val = pair.partition("=")
            meta[key] = val
        idx += 1
    header = lines[idx].split(",")
    rows = [
        dict(zip(header, ln.split(",")))
        for ln in lines[idx + 1:]
        if ln
    ]
    return meta, rows


@dataclass
class RunManifest:
    """Everything one command needs; flags override manifest-file values."""

    kernel: str = ""
    width: str = ""            # "single" | "double" | "" for kernel default
    rule: str = "wp"
    targets: list[str] | None = None
    genome: list[int] | None = None
    mode: str = "nsga2"
    population: int = 40
    generations: int = 10
    budget: int = 400
    alphabet: list[int] | None = None
    seed: int | None = None  # resolved: flag > manifest > PRECIS_SEED > 0
    train_seed: int | None = None
    train_count: int | None = None
    test_seed: int | None = None
    test_count: int | None = None
    input_seed: int | None = None
    stagnation: int | None = None
    epi: str | None = None
    outdir: str = "precis_out"
    trace: bool = False

    @classmethod
    def from_file(cls, path: str) -> "RunManifest":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise UsageError("unknown manifest keys: %s" % ", ".join(sorted(unknown)))
        return cls(**raw)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolve_manifest(args) -> RunManifest:
    manifest = (
        RunManifest.from_file(args.manifest)
        if getattr(args, "manifest", None)
        else RunManifest()
    )
    for name in dataclasses.fields(RunManifest):
        if name.name == "trace":
            continue
        cli_val = getattr(args, name.name, None)
        if cli_val is not None:
            setattr(manifest, name.name, cli_val)
    if getattr(args, "trace", False):
        manifest.trace = True
    if manifest.seed is None:
        if SEED_ENV in os.environ:
            try:
                manifest.seed = int(os.environ[SEED_ENV])
            except ValueError:
                raise UsageError("%s must be an integer" % SEED_ENV)
        else:
            manifest.seed = 0
    return manifest


def _width_of(manifest: RunManifest, spec) -> Width:
    if not manifest.width:
        return spec.width
    try:
        return Width(manifest.width)
    except ValueError:
        raise UsageError("width must be single or double, not %r" % manifest.width)


def _rule_of(manifest: RunManifest) -> RuleKind:
    try:
        return RuleKind(manifest.rule)
    except ValueError:
        raise UsageError(
            "rule must be one of wp, cip, fcs, plc, pli; got %r" % manifest.rule
        )


def _targets_of(manifest: RunManifest, spec, rule: RuleKind, width: Width):
    if rule is RuleKind.WP:
        return ("*",)
    if manifest.targets:
        return tuple(manifest.targets)
    if rule is RuleKind.PLC:
        return spec.targets_for(rule)
    if rule is RuleKind.PLI:
        return spec.scopes
    defaults = default_targets(spec, width=width)
    if not defaults:
        raise UsageError("kernel %s has no profiled FLOP scopes" % spec.name)
    return defaults


def _epi_of(manifest: RunManifest) -> EpiTable:
    if manifest.epi:
        try:
            return EpiTable.from_file(manifest.epi)
        except (OSError, EnergyConfigError, ValueError) as exc:
            raise UsageError("bad EPI table %s: %s" % (manifest.epi, exc))
    return EpiTable()


def _outdir(manifest: RunManifest) -> str:
    os.makedirs(manifest.outdir, exist_ok=True)
    return manifest.outdir


# -- commands ---------------------------------------------------------------

def cmd_profile(args) -> int:
    manifest = _resolve_manifest(args)
    spec = get_kernel(manifest.kernel)
    width = _width_of(manifest, spec)
    seed = manifest.input_seed if manifest.input_seed is not None else spec.train_seed
    out = _outdir(manifest)
    data = spec.make_inputs(seed, 1)[0]
    try:
        counters = profile_run(spec, data, width)
    except Exception as exc:
        raise EvaluationError("profiling failed: %s" % exc)
    report = profile_report(counters)
    meta = {"kernel": spec.name, "width": width.value, "input_seed": seed}
    write_csv(
        os.path.join(out, "profile.csv"),
        ("scope", "op", "width", "flops", "manipulated_bits"),
        [
            {
                "scope": r.scope,
                "op": r.op.value,
                "width": r.width.value,
                "flops": r.flops,
                "manipulated_bits": r.bit_sum,
            }
            for r in report.rows
        ],
        meta,
    )
    write_csv(
        os.path.join(out, "profile_summary.csv"),
        ("total_flops", "single_ratio", "double_ratio", "top10_coverage",
         "top_scopes"),
        [{
            "total_flops": report.total_flops,
            "single_ratio": report.single_ratio,
            "double_ratio": report.double_ratio,
            "top10_coverage": report.top10_coverage,
            "top_scopes": ";".join(report.top_scopes),
        }],
        meta,
    )
    print("%s: %d FLOPs (single %.1f%%, double %.1f%%), top-10 coverage %.1f%%"
          % (spec.name, report.total_flops, 100 * report.single_ratio,
             100 * report.double_ratio, 100 * report.top10_coverage))
    for scope, flops in report.scope_flops:
        if flops:
            print("  %-12s %8d" % (scope, flops))
    return 0


def _parse_genome(manifest: RunManifest, targets) -> tuple[int, ...]:
    if not manifest.genome:
        raise UsageError("an explicit genome is required (e.g. --genome '8;24')")
    genome = tuple(manifest.genome)
    if len(genome) != len(targets):
        raise UsageError(
            "genome has %d genes for %d targets" % (len(genome), len(targets))
        )
    return genome


def cmd_run(args) -> int:
    manifest = _resolve_manifest(args)
    spec = get_kernel(manifest.kernel)
    width = _width_of(manifest, spec)
    rule = _rule_of(manifest)
    targets = _targets_of(manifest, spec, rule, width)
    genome = _parse_genome(manifest, targets)
    epi = _epi_of(manifest)
    try:
        config = Configuration(targets, genome, rule)
        identity = Configuration.identity(targets, rule, width)
        configuration_to_rule(config, width)  # validate gene ranges up front
    except ValueError as exc:
        raise UsageError(str(exc))
    seed = manifest.input_seed if manifest.input_seed is not None else spec.train_seed
    out = _outdir(manifest)
    data = spec.make_inputs(seed, 1)[0]
    trace: list[str] | None = [] if manifest.trace else None
    try:
        base_out = baseline_output(spec, data)
        base = run_kernel(spec, identity, data, width=width, epi=epi,
                          baseline=base_out)
        res = run_kernel(spec, config, data, width=width, epi=epi,
                         baseline=base_out, trace=trace)
    except KernelConfigError as exc:
        raise UsageError(str(exc))
    except Exception as exc:
        raise EvaluationError("run failed: %s" % exc)
    meta = {
        "kernel": spec.name,
        "width": width.value,
        "rule": rule.value,
        "targets": ";".join(targets),
        "input_seed": seed,
    }
    write_csv(
        os.path.join(out, "run.csv"),
        ("kernel", "rule_kind", "width", "genome", "error_pct",
         "fpu_pj", "mem_pj", "fpu_norm", "mem_norm"),
        [{
            "kernel": spec.name,
            "rule_kind": rule.value,
            "width": width.value,
            "genome": config.genome_str(),
            "error_pct": res.error_pct,
            "fpu_pj": res.fpu_pj,
            "mem_pj": res.mem_pj,
            "fpu_norm": 100.0 * res.fpu_pj / base.fpu_pj,
            "mem_norm": 100.0 * res.mem_pj / base.mem_pj,
        }],
        meta,
    )
    if trace is not None:
        with open(os.path.join(out, "trace.csv"), "w") as fh:
            fh.write(CSV_VERSION + "\n")
            fh.write("scope,op,width,a_hex,b_hex,r_hex\n")
            for line in trace:
                fh.write(line + "\n")
    print("error %.6g%%  fpu %.6g pJ (%.2f%%)  mem %.6g pJ (%.2f%%)" % (
        res.error_pct, res.fpu_pj, 100.0 * res.fpu_pj / base.fpu_pj,
        res.mem_pj, 100.0 * res.mem_pj / base.mem_pj,
    ))
    return 0


def _eval_rows(log, frontier_points, hull):
    # flag by objective pair: every genome achieving a frontier/hull point
    # is marked (ties are all nondominated)
    frontier_objs = {(p.error_pct, p.fpu_norm) for p in frontier_points}
    hull_objs = {(p.error_pct, p.fpu_norm) for p in hull}
    rows = []
    for i, p in enumerate(log):
        key = (p.error_pct, p.fpu_norm)
        rows.append({
            "config_id": i,
            "rule_kind": p.config.rule_kind.value,
            "genome": p.config.genome_str(),
            "error_pct": p.error_pct,
            "fpu_norm": p.fpu_norm,
            "mem_norm": p.mem_norm,
            "fpu_pj": p.fpu_pj,
            "mem_pj": p.mem_pj,
            "is_frontier": 1 if key in frontier_objs else 0,
            "is_hull": 1 if key in hull_objs else 0,
        })
    return rows


def cmd_explore(args) -> int:
    manifest = _resolve_manifest(args)
    spec = get_kernel(manifest.kernel)
    width = _width_of(manifest, spec)
    rule = _rule_of(manifest)
    targets = _targets_of(manifest, spec, rule, width)
    epi = _epi_of(manifest)
    alphabet = (
        tuple(manifest.alphabet)
        if manifest.alphabet
        else tuple(range(1, width.mantissa_bits + 1))
    )
    try:
        space = SearchSpace(targets, alphabet, rule, width)
    except ValueError as exc:
        raise UsageError(str(exc))
    params = GaParams(
        population_size=manifest.population,
        generations=manifest.generations,
        eval_budget=manifest.budget,
        seed=manifest.seed,
        stagnation_limit=manifest.stagnation,
    )
    if manifest.mode == "nsga2":
        try:
            params.validate()
        except ValueError as exc:
            raise UsageError(str(exc))
    elif manifest.mode != "exhaustive":
        raise UsageError("mode must be nsga2 or exhaustive")

    train_seed = (
        manifest.train_seed if manifest.train_seed is not None else spec.train_seed
    )
    train_count = (
        manifest.train_count if manifest.train_count is not None else spec.train_count
    )
    out = _outdir(manifest)
    try:
        inputs = spec.make_inputs(train_seed, train_count)
        evaluator = KernelEvaluator(spec, rule, targets, inputs, width, epi)
        if manifest.mode == "exhaustive":
            result = exhaustive_search(space, evaluator)
        else:
            result = nsga2_search(space, params, evaluator)
    except (KernelConfigError, ValueError) as exc:
        raise UsageError(str(exc))
    except Exception as exc:
        raise EvaluationError("exploration failed: %s" % exc)

    meta = {
        "kernel": spec.name,
        "width": width.value,
        "rule": rule.value,
        "targets": ";".join(targets),
        "mode": manifest.mode,
        "seed": manifest.seed,
        "train_seed": train_seed,
        "train_count": train_count,
    }
    rows = _eval_rows(result.log, result.frontier_points, result.hull)
    write_csv(os.path.join(out, "eval_log.csv"), EVAL_LOG_COLUMNS, rows, meta)
    write_csv(
        os.path.join(out, "frontier.csv"),
        EVAL_LOG_COLUMNS,
        [r for r in rows if r["is_frontier"]],
        meta,
    )
    write_csv(
        os.path.join(out, "savings.csv"),
        ("rule_kind", "threshold_pct", "fpu_savings_pct", "mem_savings_pct"),
        [
            {
                "rule_kind": rule.value,
                "threshold_pct": s.threshold_pct,
                "fpu_savings_pct": s.fpu_savings_pct,
                "mem_savings_pct": s.mem_savings_pct,
            }
            for s in quantize_frontier(result.frontier_points)
        ],
        meta,
    )
    manifest.targets = list(targets)
    manifest.alphabet = list(alphabet)
    manifest.train_seed = train_seed
    manifest.train_count = train_count
    manifest.save(os.path.join(out, "manifest.json"))
    print(
        "%d evaluations, %d frontier points, %d hull points -> %s"
        % (result.evaluations, len(result.frontier_points), len(result.hull), out)
    )
    return 0


def cmd_robustness(args) -> int:
    manifest = _resolve_manifest(args)
    if not args.frontier:
        raise UsageError("--frontier CSV is required")
    meta, rows = read_csv(args.frontier)
    kernel_name = manifest.kernel or meta.get("kernel")
    if not kernel_name:
        raise UsageError("kernel name missing from flags and frontier meta")
    spec = get_kernel(kernel_name)
    width = Width(meta["width"]) if "width" in meta else _width_of(manifest, spec)
    targets = (
        tuple(meta["targets"].split(";"))
        if "targets" in meta
        else _targets_of(manifest, spec, _rule_of(manifest), width)
    )
    epi = _epi_of(manifest)
    configs = []
    seen = set()
    for row in rows:
        genome = tuple(int(g) for g in row["genome"].split(";"))
        if genome in seen:
            continue
        seen.add(genome)
        configs.append(Configuration(targets, genome, RuleKind(row["rule_kind"])))
    if len(configs) < 2:
        print("robustness needs >= 2 distinct configurations; fit undefined",
              file=sys.stderr)
        return 1
    rule = configs[0].rule_kind
    train_seed = (
        manifest.train_seed if manifest.train_seed is not None else spec.train_seed
    )
    test_seed = (
        manifest.test_seed if manifest.test_seed is not None else spec.test_seed
    )
    if train_seed == test_seed:
        # degenerate self-fit diagnostic: r must come out exactly 1.0
        print("note: test set equals training set", file=sys.stderr)
        inputs = InputSet(
            training=spec.make_inputs(train_seed, manifest.train_count or spec.train_count),
            test=spec.make_inputs(test_seed, manifest.test_count or spec.test_count),
        )
    else:
        inputs = InputSet.for_kernel(
            spec, train_seed, test_seed, manifest.train_count, manifest.test_count
        )
    out = _outdir(manifest)

    def factory(data_set):
        return KernelEvaluator(spec, rule, targets, data_set, width, epi)

    try:
        stats = robustness(configs, factory, inputs.training, inputs.test)
    except Exception as exc:
        raise EvaluationError("robustness evaluation failed: %s" % exc)
    meta_out = {
        "kernel": spec.name,
        "width": width.value,
        "rule": rule.value,
        "targets": ";".join(targets),
        "train_seed": train_seed,
        "test_seed": test_seed,
    }
    write_csv(
        os.path.join(out, "robustness.csv"),
        ("metric", "slope", "intercept", "r", "n_configs", "degenerate"),
        [
            {
                "metric": "error",
                "slope": stats.slope_error,
                "intercept": stats.intercept_error,
                "r": stats.r_error,
                "n_configs": len(configs),
                "degenerate": int(stats.degenerate_error),
            },
            {
                "metric": "fpu_energy",
                "slope": stats.slope_energy,
                "intercept": stats.intercept_energy,
                "r": stats.r_energy,
                "n_configs": len(configs),
                "degenerate": int(stats.degenerate_energy),
            },
        ],
        meta_out,
    )
    write_csv(
        os.path.join(out, "robustness_points.csv"),
        ("config_id", "genome", "train_error", "test_error",
         "train_fpu", "test_fpu"),
        [
            {
                "config_id": i,
                "genome": c.genome_str(),
                "train_error": stats.train_error[i],
                "test_error": stats.test_error[i],
                "train_fpu": stats.train_fpu[i],
                "test_fpu": stats.test_fpu[i],
            }
            for i, c in enumerate(configs)
        ],
        meta_out,
    )
    print("r_error=%.4f r_energy=%.4f over %d configs"
          % (stats.r_error, stats.r_energy, len(configs)))
    return 0


# -- argument wiring ---------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(";", ",").split(",") if tok]
    except ValueError:
        raise UsageError("expected integers, got %r" % text)


def _str_list(text: str) -> list[str]:
    return [tok for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="precis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="JSON manifest; flags override it")
        p.add_argument("--kernel", help="kernel name (%s)" % ", ".join(kernel_names()))
        p.add_argument("--width", choices=["single", "double"])
        p.add_argument("--epi", help="EPI table JSON")
        p.add_argument("--out", dest="outdir", help="output directory")
        p.add_argument("--seed", type=int, help="global seed (env %s)" % SEED_ENV)

    p = sub.add_parser("profile", help="identity-run FLOP census")
    common(p)
    p.add_argument("--input-seed", dest="input_seed", type=int)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("run", help="run one explicit configuration")
    common(p)
    p.add_argument("--rule", choices=[k.value for k in RuleKind])
    p.add_argument("--targets", type=_str_list)
    p.add_argument("--genome", type=_int_list, help="semicolon/comma separated")
    p.add_argument("--input-seed", dest="input_seed", type=int)
    p.add_argument("--trace", action="store_true",
                   help="write the per-FLOP hex trace")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="search the accuracy/energy tradeoff")
    common(p)
    p.add_argument("--rule", choices=[k.value for k in RuleKind])
    p.add_argument("--targets", type=_str_list)
    p.add_argument("--mode", choices=["nsga2", "exhaustive"])
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--alphabet", type=_int_list,
                   help="mantissa-bit levels, e.g. 6,12,18,24")
    p.add_argument("--stagnation", type=int,
                   help="stop after N generations without frontier growth")
    p.add_argument("--train-seed", dest="train_seed", type=int)
    p.add_argument("--train-count", dest="train_count", type=int)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("robustness", help="train/test agreement of a frontier")
    common(p)
    p.add_argument("--frontier", help="frontier.csv from explore")
    p.add_argument("--train-seed", dest="train_seed", type=int)
    p.add_argument("--train-count", dest="train_count", type=int)
    p.add_argument("--test-seed", dest="test_seed", type=int)
    p.add_argument("--test-count", dest="test_count", type=int)
    p.set_defaults(func=cmd_robustness)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    except KernelConfigError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    except EvaluationError as exc:
        print("evaluation error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
