"""Plots over precis CSV outputs.

This package performs no numerical analysis of its own: frontier membership
and hull geometry come straight from the is_frontier/is_hull flags in the
evaluation logs (single source of truth).  It only reads files carrying the
`# precis-csv v1` version header.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

CSV_VERSION = "# precis-csv v1"

SERIES_COLORS = ["#c85200", "#5f9ed1", "#898989", "#ffbc79", "#2ca02c", "#9467bd"]
SERIES_MARKERS = ["o", "^", "s", "D", "v", "P"]


class CsvFormatError(ValueError):
    """File is not a versioned precis CSV."""


def read_csv(path: str) -> tuple[dict, list[dict]]:
    """Parse a versioned CSV into (meta, rows); rejects wrong headers."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CSV_VERSION:
        raise CsvFormatError("%s: missing '%s' header" % (path, CSV_VERSION))
    meta: dict[str, str] = {}
    idx = 1
    if idx < len(lines) and lines[idx].startswith("# meta "):
        for pair in lines[idx][len("# meta "):].split():
            key, _, val = pair.partition("=")
            meta[key] = val
        idx += 1
    if idx >= len(lines):
        raise CsvFormatError("%s: no column header" % path)
    header = lines[idx].split(",")
    rows = []
    for ln in lines[idx + 1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise CsvFormatError("%s: ragged row %r" % (path, ln))
        rows.append(dict(zip(header, parts)))
    return meta, rows


@dataclass
class PlotSpec:
    """What to draw: input CSVs, series labels, error-axis cap, output."""

    csv_paths: list[str]
    output: str
    labels: list[str] = field(default_factory=list)
    x_cap: float = 20.0  # error rates beyond this are off-chart
    title: str = ""

    def label_for(self, index: int) -> str:
        if index < len(self.labels):
            return self.labels[index]
        return "series %d" % (index + 1)


def _styled_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=130)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    return fig, ax


def plot_frontier(spec: PlotSpec) -> str:
    """Scatter every evaluated point and overlay each series' lower convex
    hull; axes are error % (x) against normalized FPU energy % (y)."""
    if not spec.csv_paths:
        raise CsvFormatError("no input CSVs")
    fig, ax = _styled_axes(spec.title, "Error (%)", "Normalized FPU energy (%)")
    for i, path in enumerate(spec.csv_paths):
        _, rows = read_csv(path)
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        marker = SERIES_MARKERS[i % len(SERIES_MARKERS)]
        pts = [
            (float(r["error_pct"]), float(r["fpu_norm"]))
            for r in rows
            if float(r["error_pct"]) <= spec.x_cap
        ]
        if pts:
            ax.scatter(*zip(*pts), s=14, alpha=0.45, color=color, edgecolors="none")
        hull = sorted(
            (float(r["error_pct"]), float(r["fpu_norm"]))
            for r in rows
            if r.get("is_hull") == "1" and float(r["error_pct"]) <= spec.x_cap
        )
        label = spec.label_for(i)
        if len(hull) >= 2:
            ax.plot(*zip(*hull), color=color, marker=marker, markersize=5,
                    linewidth=1.6, label=label)
        elif hull:
            ax.plot([hull[0][0]], [hull[0][1]], color=color, marker=marker,
                    markersize=7, linestyle="none", label=label)
        else:
            ax.plot([], [], color=color, marker=marker, label=label)
    ax.set_xlim(left=0, right=spec.x_cap)
    ax.set_ylim(0, 105)
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    return spec.output


def plot_savings_bars(spec: PlotSpec) -> str:
    """Grouped bars: energy savings per series at each error threshold."""
    if not spec.csv_paths:
        raise CsvFormatError("no input CSVs")
    series = []
    thresholds: list[float] = []
    for path in spec.csv_paths:
        _, rows = read_csv(path)
        by_t = {float(r["threshold_pct"]): float(r["fpu_savings_pct"]) for r in rows}
        if not thresholds:
            thresholds = sorted(by_t)
        series.append(by_t)
    fig, ax = _styled_axes(spec.title, "Error threshold (%)", "FPU energy savings (%)")
    width = 0.8 / max(len(series), 1)
    for i, by_t in enumerate(series):
        xs = [j + i * width for j in range(len(thresholds))]
        ys = [by_t.get(t, 0.0) for t in thresholds]
        ax.bar(xs, ys, width=width * 0.92,
               color=SERIES_COLORS[i % len(SERIES_COLORS)],
               label=spec.label_for(i))
    ax.set_xticks([j + width * (len(series) - 1) / 2 for j in range(len(thresholds))])
    ax.set_xticklabels(["%g" % t for t in thresholds])
    ax.set_ylim(0, 100)
    ax.legend(loc="upper left", fontsize=9)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    return spec.output
