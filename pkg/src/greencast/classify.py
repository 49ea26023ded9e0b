"""Growth metrics and quadrant classification for skill demand series.

For each skill the recent level is the mean of the last history_months
observed shares and the outlook is the mean of the forecast_months forecast
shares. Absolute growth is outlook minus level; relative growth divides that
by the level. Thresholds sit at a percentile of each growth distribution and
split skills into four quadrants:

    Star      absolute >= tau_abs and relative >= tau_rel
    Emerging  absolute <  tau_abs and relative >= tau_rel
    Stable    absolute >= tau_abs and relative <  tau_rel
    Declining everything else

A zero recent level leaves relative growth undefined: the skill is flagged,
forced to Declining, and excluded from the relative-threshold estimation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError

DEFAULT_HISTORY_MONTHS = 12
DEFAULT_FORECAST_MONTHS = 6
DEFAULT_QUANTILE = 0.75

QUADRANTS = ("Star", "Emerging", "Stable", "Declining")
UNDEFINED_RELATIVE = "undefined_relative"


@dataclass
class GrowthRecord:
    skill_id: int
    label: str
    recent_mean: float
    forecast_mean: float
    growth_abs: float
    growth_rel: float | None  # None when recent_mean == 0
    quadrant: str = ""
    flags: tuple[str, ...] = ()


def growth_metrics(
    history: np.ndarray,
    forecast: np.ndarray,
    history_months: int = DEFAULT_HISTORY_MONTHS,
    forecast_months: int = DEFAULT_FORECAST_MONTHS,
) -> tuple[float, float, float, float | None]:
    """Compute (recent_mean, forecast_mean, growth_abs, growth_rel).

    history must hold exactly history_months values and forecast exactly
    forecast_months; shorter inputs are a hard error naming the configured
    window rather than a silent shorter mean.
    """
    history = np.asarray(history, dtype=np.float64)
    forecast = np.asarray(forecast, dtype=np.float64)
    if len(history) != history_months:
        raise InputError(
            f"history has {len(history)} values, classification needs exactly "
            f"{history_months} (configured history window)"
        )
    if len(forecast) != forecast_months:
        raise InputError(
            f"forecast has {len(forecast)} values, classification needs exactly "
            f"{forecast_months} (configured forecast window)"
        )
    if np.any(history < 0) or np.any(forecast < 0):
        raise InputError("growth inputs must be non-negative shares")
    recent = float(np.mean(history))
    outlook = float(np.mean(forecast))
    g_abs = outlook - recent
    g_rel = (g_abs / recent) if recent > 0 else None
    return recent, outlook, g_abs, g_rel


def percentile_threshold(values: Sequence[float], quantile: float = DEFAULT_QUANTILE) -> float:
    """Linear-interpolation percentile: rank p = q * (n - 1) on sorted values."""
    if not 0.0 <= quantile <= 1.0:
        raise ConfigError(f"quantile must be in [0, 1], got {quantile}")
    arr = np.sort(np.asarray(list(values), dtype=np.float64))
    if arr.size == 0:
        raise InputError("cannot take a percentile of zero values")
    p = quantile * (arr.size - 1)
    lo = int(np.floor(p))
    hi = int(np.ceil(p))
    if lo == hi:
        return float(arr[lo])
    return float(arr[lo] + (p - lo) * (arr[hi] - arr[lo]))


@dataclass(frozen=True)
class Thresholds:
    tau_abs: float
    tau_rel: float
    quantile: float = DEFAULT_QUANTILE


def compute_thresholds(
    growths: Sequence[GrowthRecord], quantile: float = DEFAULT_QUANTILE
) -> Thresholds:
    """Percentile thresholds over the full skill set.

    tau_abs uses every skill's absolute growth; tau_rel uses only skills
    whose relative growth is defined.
    """
    abs_values = [g.growth_abs for g in growths]
    rel_values = [g.growth_rel for g in growths if g.growth_rel is not None]
    if not rel_values:
        raise InputError("no skill has a defined relative growth; cannot set tau_rel")
    return Thresholds(
        tau_abs=percentile_threshold(abs_values, quantile),
        tau_rel=percentile_threshold(rel_values, quantile),
        quantile=quantile,
    )


def assign_quadrants(
    growths: Sequence[GrowthRecord], thresholds: Thresholds
) -> list[GrowthRecord]:
    """Label each record in place with its quadrant; returns the same list.

    Comparisons are inclusive on the high side (>= threshold counts as high),
    so exactly the skills at or above each threshold land high on that axis.
    """
    for g in growths:
        if g.growth_rel is None:
            g.quadrant = "Declining"
            if UNDEFINED_RELATIVE not in g.flags:
                g.flags = g.flags + (UNDEFINED_RELATIVE,)
            continue
        high_abs = g.growth_abs >= thresholds.tau_abs
        high_rel = g.growth_rel >= thresholds.tau_rel
        if high_abs and high_rel:
            g.quadrant = "Star"
        elif high_rel:
            g.quadrant = "Emerging"
        elif high_abs:
            g.quadrant = "Stable"
        else:
            g.quadrant = "Declining"
    return list(growths)


def classify_skills(
    history_map: Mapping[int, np.ndarray],
    forecast_map: Mapping[int, np.ndarray],
    labels: Mapping[int, str],
    history_months: int = DEFAULT_HISTORY_MONTHS,
    forecast_months: int = DEFAULT_FORECAST_MONTHS,
    quantile: float = DEFAULT_QUANTILE,
) -> tuple[list[GrowthRecord], Thresholds]:
    """End-to-end classification over aligned history and forecast maps."""
    if set(history_map) != set(forecast_map):
        raise InputError("history and forecast cover different skill ids")
    growths: list[GrowthRecord] = []
    for sid in sorted(history_map):
        recent, outlook, g_abs, g_rel = growth_metrics(
            history_map[sid], forecast_map[sid], history_months, forecast_months
        )
        growths.append(
            GrowthRecord(
                skill_id=sid,
                label=labels.get(sid, str(sid)),
                recent_mean=recent,
                forecast_mean=outlook,
                growth_abs=g_abs,
                growth_rel=g_rel,
            )
        )
    thresholds = compute_thresholds(growths, quantile)
    assign_quadrants(growths, thresholds)
    return growths, thresholds


def rank_skills(
    growths: Sequence[GrowthRecord], axis: str = "relative", top_n: int | None = None
) -> list[GrowthRecord]:
    """Rank by one growth axis, descending; ties break on label ascending.

    Skills without a defined relative growth are left out of relative
    rankings (they have no value on that axis).
    """
    if axis == "relative":
        pool = [g for g in growths if g.growth_rel is not None]
        keyed = sorted(pool, key=lambda g: (-g.growth_rel, g.label))
    elif axis == "absolute":
        keyed = sorted(growths, key=lambda g: (-g.growth_abs, g.label))
    else:
        raise ConfigError(f"unknown ranking axis {axis!r}, want relative or absolute")
    return keyed[:top_n] if top_n is not None else keyed


CLASSIFICATION_FIELDS = [
    "skill_id", "label", "R_bar", "F_bar", "G_abs", "G_rel", "quadrant", "flags",
]


def write_classification_csv(growths: Sequence[GrowthRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLASSIFICATION_FIELDS)
        for g in growths:
            writer.writerow(
                [
                    g.skill_id,
                    g.label,
                    repr(g.recent_mean),
                    repr(g.forecast_mean),
                    repr(g.growth_abs),
                    "" if g.growth_rel is None else repr(g.growth_rel),
                    g.quadrant,
                    ";".join(g.flags),
                ]
            )


def read_classification_csv(path: str | Path) -> list[GrowthRecord]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"classification file not found: {path}")
    out: list[GrowthRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.DictReader(fh), start=2):
            try:
                rel = row["G_rel"]
                out.append(
                    GrowthRecord(
                        skill_id=int(row["skill_id"]),
                        label=row["label"],
                        recent_mean=float(row["R_bar"]),
                        forecast_mean=float(row["F_bar"]),
                        growth_abs=float(row["G_abs"]),
                        growth_rel=float(rel) if rel else None,
                        quadrant=row["quadrant"],
                        flags=tuple(f for f in row["flags"].split(";") if f),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"line {line_no}: malformed classification row ({exc})")
    return out


def write_rankings_csv(
    growths: Sequence[GrowthRecord], axis: str, path: str | Path, top_n: int | None = None
) -> None:
    """Ranking table: rank, skill, relative growth, absolute growth, quadrant."""
    ranked = rank_skills(growths, axis=axis, top_n=top_n)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "skill", "G_rel", "G_abs", "quadrant"])
        for rank, g in enumerate(ranked, start=1):
            writer.writerow(
                [
                    rank,
                    g.label,
                    "" if g.growth_rel is None else f"{g.growth_rel:.4f}",
                    f"{g.growth_abs:.6f}",
                    g.quadrant,
                ]
            )
