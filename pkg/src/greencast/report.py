"""Delimited reports and matplotlib figures for pipeline outputs.

Figures render to SVG with a fixed hash salt and no creation date so two
runs over the same inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "greencast"

import matplotlib.pyplot as plt

from .classify import GrowthRecord, Thresholds
from .errors import InputError
from .ingest import Period
from .series import MonthlyTotals, period_axis

QUADRANT_COLORS = {
    "Star": "#2a9d34",
    "Emerging": "#1f77b4",
    "Stable": "#e6a817",
    "Declining": "#b22222",
}


def round_half_up(value: float, digits: int = 2) -> float:
    """Decimal half-up rounding; Python's round() would round ties to even."""
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ShareRow:
    period: Period
    green: int
    total: int
    share_pct: float  # exact, percent scale

    @property
    def share_pct_rounded(self) -> float:
        return round_half_up(self.share_pct, 2)


@dataclass
class ShareReport:
    """Monthly matched-skill volume against posting totals."""

    rows: list[ShareRow]
    gaps: list[Period]

    @property
    def green_total(self) -> int:
        return sum(r.green for r in self.rows)

    @property
    def posting_total(self) -> int:
        return sum(r.total for r in self.rows)

    @property
    def mean_monthly_share_pct(self) -> float:
        return sum(r.share_pct for r in self.rows) / len(self.rows)

    @property
    def weighted_share_pct(self) -> float:
        return 100.0 * self.green_total / self.posting_total


def build_share_report(
    green_by_period: Mapping[Period, int], totals: MonthlyTotals
) -> ShareReport:
    """Assemble the month/green/total/percentage table plus gap diagnostics."""
    if not green_by_period:
        raise InputError("share report needs at least one month of counts")
    rows = []
    for period in sorted(green_by_period):
        if period not in totals.totals:
            raise InputError(f"no monthly total for period {period}")
        green = int(green_by_period[period])
        total = totals.totals[period]
        rows.append(ShareRow(period=period, green=green, total=total, share_pct=100.0 * green / total))
    axis = period_axis([r.period for r in rows], policy="observed_only")
    return ShareReport(rows=rows, gaps=axis.gaps)


def write_share_csv(report: ShareReport, path: str | Path) -> None:
    lines = ["month,green,total,percentage"]
    for r in report.rows:
        lines.append(f"{r.period},{r.green},{r.total},{r.share_pct_rounded:.2f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_share_summary_json(report: ShareReport, path: str | Path) -> None:
    payload = {
        "months": len(report.rows),
        "green_total": report.green_total,
        "posting_total": report.posting_total,
        "mean_monthly_share_pct": report.mean_monthly_share_pct,
        "weighted_share_pct": report.weighted_share_pct,
        "calendar_gaps": [str(p) for p in report.gaps],
        "note": (
            "mean_monthly_share_pct averages the per-month percentages; "
            "weighted_share_pct pools the counts first. calendar_gaps lists "
            "months inside the span with no observations."
        ),
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _save_deterministic(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def share_figure(report: ShareReport, path: str | Path) -> None:
    """Line chart of the monthly share percentages."""
    fig, ax = plt.subplots(figsize=(8, 4))
    months = [str(r.period) for r in report.rows]
    shares = [r.share_pct for r in report.rows]
    ax.plot(months, shares, marker="o", color="#2a9d34")
    ax.set_ylabel("share of postings (%)")
    ax.set_xlabel("month")
    ax.set_title("Matched green-skill share by month")
    ax.grid(True, alpha=0.3)
    fig.autofmt_xdate(rotation=45)
    fig.tight_layout()
    _save_deterministic(fig, Path(path))


def quadrant_figure(
    growths: Sequence[GrowthRecord],
    thresholds: Thresholds,
    path: str | Path,
    log_scale: bool = False,
    annotate_top: int = 0,
) -> None:
    """Scatter of absolute vs relative growth with dashed threshold lines.

    The four regions are labeled in their corners. log_scale switches both
    axes to symlog, which keeps negative growth plottable.
    """
    defined = [g for g in growths if g.growth_rel is not None]
    if not defined:
        raise InputError("quadrant figure needs at least one defined relative growth")
    fig, ax = plt.subplots(figsize=(7, 6))
    for quadrant, color in QUADRANT_COLORS.items():
        xs = [g.growth_abs for g in defined if g.quadrant == quadrant]
        ys = [g.growth_rel for g in defined if g.quadrant == quadrant]
        if xs:
            ax.scatter(xs, ys, s=24, color=color, label=quadrant, alpha=0.8)
    ax.axvline(thresholds.tau_abs, linestyle="--", color="gray", linewidth=1)
    ax.axhline(thresholds.tau_rel, linestyle="--", color="gray", linewidth=1)
    if log_scale:
        ax.set_xscale("symlog")
        ax.set_yscale("symlog")

    # corner labels for the four regions
    for label, (xpos, ypos), align in (
        ("Star", (0.98, 0.98), ("right", "top")),
        ("Emerging", (0.02, 0.98), ("left", "top")),
        ("Stable", (0.98, 0.02), ("right", "bottom")),
        ("Declining", (0.02, 0.02), ("left", "bottom")),
    ):
        ax.text(
            xpos, ypos, label, transform=ax.transAxes,
            ha=align[0], va=align[1], fontsize=11, fontweight="bold",
            color=QUADRANT_COLORS[label],
        )
    if annotate_top > 0:
        for g in sorted(defined, key=lambda g: (-g.growth_rel, g.label))[:annotate_top]:
            ax.annotate(g.label, (g.growth_abs, g.growth_rel), fontsize=7, alpha=0.7)
    ax.set_xlabel("absolute growth (forecast mean - recent mean)")
    ax.set_ylabel("relative growth")
    ax.set_title(f"Skill growth quadrants (thresholds at q={thresholds.quantile:g})")
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    _save_deterministic(fig, Path(path))
