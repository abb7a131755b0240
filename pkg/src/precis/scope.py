"""Call-context tracking and FPI placement resolution.

A placement rule decides, for every FLOP, which reduced-precision
implementation applies: one FPI for the whole program (WP), one per
currently-in-progress function (CIP), or one chosen by scanning the call
stack for the nearest mapped ancestor (FCS).  The CNN-specific PLC/PLI
granularities lower onto FCS rules: layer kernels push their category frame
beneath the instance frame, so a category mapping matches one frame down
while an instance mapping matches at the top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .fpcore import Fpi, Width

ROOT_SCOPE = "__root__"


class RuleKind(Enum):
    WP = "wp"
    CIP = "cip"
    FCS = "fcs"
    PLC = "plc"
    PLI = "pli"


# kinds a PlacementRule may carry at run time; PLC/PLI exist only at the
# Configuration level and lower onto FCS.
RUNTIME_KINDS = (RuleKind.WP, RuleKind.CIP, RuleKind.FCS)


class CallStack:
    """Strictly nested frame stack with a synthetic root that never pops."""

    __slots__ = ("frames",)

    def __init__(self):
        self.frames: list[str] = [ROOT_SCOPE]

    def enter(self, scope: str) -> None:
        if not scope:
            raise ValueError("scope name must be non-empty")
        self.frames.append(scope)

    def exit(self) -> str:
        if len(self.frames) == 1:
            raise ValueError("exit on root frame")
        return self.frames.pop()

    @property
    def top(self) -> str:
        return self.frames[-1]

    @property
    def depth(self) -> int:
        return len(self.frames)

    def __repr__(self) -> str:
        return "CallStack(%s)" % " > ".join(self.frames)


@dataclass(frozen=True)
class PlacementRule:
    """Resolved mapping from call context to FPI.

    WP ignores `mapping` and always answers `wp_fpi`; CIP/FCS ignore
    `wp_fpi` and fall back to `default_fpi` (identity unless overridden)
    when no frame matches.
    """

    kind: RuleKind
    mapping: Mapping[str, Fpi] = field(default_factory=dict)
    wp_fpi: Fpi | None = None
    default_fpi: Fpi | None = None

    def __post_init__(self):
        if self.kind not in RUNTIME_KINDS:
            raise ValueError("%s is not a runtime rule kind" % self.kind)
        if self.kind is RuleKind.WP and self.wp_fpi is None:
            raise ValueError("WP rule needs wp_fpi")
        if self.kind is not RuleKind.WP and self.default_fpi is None:
            raise ValueError("%s rule needs default_fpi" % self.kind.value)


def resolve_fpi(stack: CallStack, rule: PlacementRule) -> Fpi:
    """Pick the FPI for the current call context.

    CIP looks only at the executing (top) frame; FCS scans from the top
    toward the root and the nearest mapped frame wins.
    """
    if rule.kind is RuleKind.WP:
        return rule.wp_fpi
    mapping = rule.mapping
    if rule.kind is RuleKind.CIP:
        return mapping.get(stack.frames[-1], rule.default_fpi)
    for frame in reversed(stack.frames):
        fpi = mapping.get(frame)
        if fpi is not None:
            return fpi
    return rule.default_fpi


@dataclass(frozen=True)
class Configuration:
    """An assignment of mantissa-bit levels to tunable scopes.

    One gene per target scope; each gene becomes a uniform FPI covering all
    four op classes.  WP has exactly one target (the whole program).
    """

    targets: tuple[str, ...]
    genome: tuple[int, ...]
    rule_kind: RuleKind

    def __post_init__(self):
        if len(self.targets) != len(self.genome):
            raise ValueError(
                "genome length %d != targets length %d"
                % (len(self.genome), len(self.targets))
            )
        if self.rule_kind is RuleKind.WP and len(self.targets) != 1:
            raise ValueError("WP configuration has exactly 1 target")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate target scopes")

    @classmethod
    def whole_program(cls, k: int) -> "Configuration":
        return cls(("*",), (k,), RuleKind.WP)

    @classmethod
    def identity(cls, targets, rule_kind: RuleKind, width: Width) -> "Configuration":
        full = width.mantissa_bits
        return cls(tuple(targets), (full,) * len(targets), rule_kind)

    def genome_str(self) -> str:
        return ";".join(str(g) for g in self.genome)


def configuration_to_rule(
    config: Configuration,
    width: Width,
    categories: Mapping[str, str] | None = None,
) -> PlacementRule:
    """Lower a Configuration to a runnable PlacementRule.

    Unmapped scopes fall back to the identity FPI (full precision).  PLC
    targets are layer-category names and PLI targets per-instance names;
    both become FCS rules so category frames beneath the instance frame can
    match.  `categories` is accepted for interface symmetry with kernels
    that publish an instance-to-category table; the lowering itself does not
    need it because category frames are on the stack.
    """
    full = width.mantissa_bits
    for gene in config.genome:
        if not 1 <= gene <= full:
            raise ValueError(
                "gene %d out of range [1, %d] for %s" % (gene, full, width.value)
            )
    identity = Fpi.identity(width)
    if config.rule_kind is RuleKind.WP:
        return PlacementRule(
            RuleKind.WP,
            wp_fpi=Fpi.uniform(config.genome[0], width),
            default_fpi=identity,
        )
    mapping = {
        scope: Fpi.uniform(gene, width)
        for scope, gene in zip(config.targets, config.genome)
    }
    kind = RuleKind.CIP if config.rule_kind is RuleKind.CIP else RuleKind.FCS
    return PlacementRule(kind, mapping=mapping, default_fpi=identity)
