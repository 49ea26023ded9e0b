"""Skill-by-month count matrices and per-month normalization.

Counts aggregate accepted assignments by (skill_id, month). Normalization
divides each column by that month's posting-volume total so series are
comparable across months with different posting volumes:

    share(s, t) = count(s, t) / total(t)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .ingest import Period
from .matching import GreenAssignment

PERIOD_POLICIES = ("observed_only", "zero_fill_gaps")


@dataclass
class PeriodAxis:
    """Ordered month axis plus any calendar gaps it spans."""

    periods: list[Period]
    gaps: list[Period] = field(default_factory=list)


def period_axis(observed: Sequence[Period], policy: str = "observed_only") -> PeriodAxis:
    """Build the month axis for a matrix.

    observed_only keeps exactly the months that occur (sorted) and reports
    which calendar months inside the span are missing. zero_fill_gaps keeps
    the full contiguous span and reports the same missing months, which then
    hold zero counts.
    """
    if policy not in PERIOD_POLICIES:
        raise ConfigError(f"unknown period policy {policy!r}, want one of {PERIOD_POLICIES}")
    if not observed:
        raise InputError("cannot build a period axis from zero observations")
    seen = sorted(set(observed))
    full: list[Period] = []
    cur = seen[0]
    while cur <= seen[-1]:
        full.append(cur)
        cur = cur.next()
    gaps = [p for p in full if p not in set(seen)]
    if policy == "zero_fill_gaps":
        return PeriodAxis(periods=full, gaps=gaps)
    return PeriodAxis(periods=seen, gaps=gaps)


@dataclass
class CountMatrix:
    """Integer counts, one row per skill_id, one column per month."""

    skill_ids: list[int]
    periods: list[Period]
    counts: np.ndarray  # shape (len(skill_ids), len(periods)), int64

    def row(self, skill_id: int) -> np.ndarray:
        try:
            return self.counts[self.skill_ids.index(skill_id)]
        except ValueError:
            raise InputError(f"skill_id {skill_id} not in matrix")

    def column_totals(self) -> dict[Period, int]:
        sums = self.counts.sum(axis=0)
        return {p: int(sums[i]) for i, p in enumerate(self.periods)}


def aggregate(
    assignments: Sequence[GreenAssignment], policy: str = "observed_only"
) -> CountMatrix:
    """Count assignments per (skill_id, month).

    Row order is ascending skill_id; column order is chronological per the
    chosen period policy. The total count equals len(assignments) because
    each assignment lands in exactly one cell.
    """
    if not assignments:
        raise InputError("cannot aggregate zero assignments")
    axis = period_axis([a.period for a in assignments], policy=policy)
    skill_ids = sorted({a.skill_id for a in assignments})
    row_of = {sid: i for i, sid in enumerate(skill_ids)}
    col_of = {p: j for j, p in enumerate(axis.periods)}
    counts = np.zeros((len(skill_ids), len(axis.periods)), dtype=np.int64)
    for a in assignments:
        counts[row_of[a.skill_id], col_of[a.period]] += 1
    return CountMatrix(skill_ids=skill_ids, periods=axis.periods, counts=counts)


@dataclass
class MonthlyTotals:
    """Posting-volume denominator per month; every total is a positive integer."""

    totals: dict[Period, int]

    def __post_init__(self):
        for period, total in self.totals.items():
            if total <= 0:
                raise InputError(f"monthly total for {period} must be > 0, got {total}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "MonthlyTotals":
        path = Path(path)
        if not path.exists():
            raise InputError(f"totals file not found: {path}")
        totals: dict[Period, int] = {}
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not {"period", "total"} <= set(reader.fieldnames or []):
                raise InputError(f"totals header must have period,total columns: {path}")
            for line_no, row in enumerate(reader, start=2):
                try:
                    period = Period.parse(row["period"])
                    total = int(row["total"])
                except (InputError, KeyError, TypeError, ValueError):
                    raise InputError(f"line {line_no}: malformed totals row {row!r}")
                if period in totals:
                    raise InputError(f"line {line_no}: duplicate period {period}")
                totals[period] = total
        return cls(totals=totals)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["period", "total"])
            for period in sorted(self.totals):
                writer.writerow([str(period), self.totals[period]])


@dataclass
class NormalizedMatrix:
    """Count matrix divided column-wise by monthly totals; values in [0, 1]."""

    skill_ids: list[int]
    periods: list[Period]
    values: np.ndarray  # float64

    def row(self, skill_id: int) -> np.ndarray:
        try:
            return self.values[self.skill_ids.index(skill_id)]
        except ValueError:
            raise InputError(f"skill_id {skill_id} not in matrix")

    def series_map(self) -> dict[int, np.ndarray]:
        return {sid: self.values[i] for i, sid in enumerate(self.skill_ids)}


def normalize(matrix: CountMatrix, totals: MonthlyTotals) -> NormalizedMatrix:
    """Divide each column by its month's total.

    Every matrix month must have a total; a count above its month's total
    would push a share past 1 and means the denominator file is inconsistent,
    so both cases fail naming the offending month.
    """
    denom = np.empty(len(matrix.periods), dtype=np.float64)
    for j, period in enumerate(matrix.periods):
        if period not in totals.totals:
            raise InputError(f"no monthly total for period {period}")
        denom[j] = totals.totals[period]
        if int(matrix.counts[:, j].max(initial=0)) > totals.totals[period]:
            raise InputError(f"count exceeds monthly total in period {period}")
    return NormalizedMatrix(
        skill_ids=list(matrix.skill_ids),
        periods=list(matrix.periods),
        values=matrix.counts.astype(np.float64) / denom,
    )


def _write_matrix_csv(path: Path, skill_ids: Sequence[int], periods: Sequence[Period], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["skill_id"] + [str(p) for p in periods])
        for sid, row in zip(skill_ids, rows):
            writer.writerow([sid] + list(row))


def write_counts_csv(matrix: CountMatrix, path: str | Path) -> None:
    _write_matrix_csv(
        Path(path),
        matrix.skill_ids,
        matrix.periods,
        ([int(v) for v in row] for row in matrix.counts),
    )


def write_normalized_csv(matrix: NormalizedMatrix, path: str | Path) -> None:
    # repr() keeps full float precision, so read -> write round-trips bytes
    _write_matrix_csv(
        Path(path),
        matrix.skill_ids,
        matrix.periods,
        ([repr(float(v)) for v in row] for row in matrix.values),
    )


def _read_matrix_csv(path: str | Path) -> tuple[list[int], list[Period], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"matrix file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"matrix file is empty: {path}")
        if not header or header[0] != "skill_id":
            raise InputError(f"matrix header must start with skill_id: {path}")
        periods = [Period.parse(cell) for cell in header[1:]]
        skill_ids: list[int] = []
        cells: list[list[str]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"line {line_no}: expected {len(header)} cells, got {len(row)}")
            skill_ids.append(int(row[0]))
            cells.append(row[1:])
    return skill_ids, periods, cells


def read_counts_csv(path: str | Path) -> CountMatrix:
    skill_ids, periods, cells = _read_matrix_csv(path)
    counts = np.array([[int(c) for c in row] for row in cells], dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise InputError(f"negative count in {path}")
    return CountMatrix(skill_ids=skill_ids, periods=periods, counts=counts)


def read_normalized_csv(path: str | Path) -> NormalizedMatrix:
    skill_ids, periods, cells = _read_matrix_csv(path)
    values = np.array([[float(c) for c in row] for row in cells], dtype=np.float64)
    return NormalizedMatrix(skill_ids=skill_ids, periods=periods, values=values)


def green_counts_by_period(matrix: CountMatrix) -> dict[Period, int]:
    """Column sums: matched-skill volume per month."""
    return matrix.column_totals()


def share_of_totals(
    green_by_period: Mapping[Period, int], totals: MonthlyTotals
) -> dict[Period, float]:
    out: dict[Period, float] = {}
    for period in sorted(green_by_period):
        if period not in totals.totals:
            raise InputError(f"no monthly total for period {period}")
        out[period] = green_by_period[period] / totals.totals[period]
    return out
