"""Parse, clean, and canonicalize job-posting skill records.

Raw inputs are CSV or JSONL rows with one skill mention per row. Parsing
cleans text, buckets timestamps into calendar months, drops unusable rows
into a rejects report, collapses exact duplicates, and (separately) merges
near-duplicate skill spellings into shared skill ids.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

KNOWN_SOURCES = ("indeed", "occ", "linkedin")
VARIANT_MERGE_THRESHOLD = 0.92

_TAG_RE = re.compile(r"<[^>]*>")


def clean_text(raw: str) -> str:
    """Lowercase, strip HTML tags, and keep only letters, digits, and spaces.

    Non-kept characters act as separators (they become spaces) so that
    punctuation never welds adjacent words together. Runs of whitespace
    collapse to a single space and the result is trimmed.
    """
    text = _TAG_RE.sub(" ", raw).lower()
    kept = [c if (c.isalpha() or c.isdigit()) else " " for c in text]
    return " ".join("".join(kept).split())


@dataclass(frozen=True, order=True)
class Period:
    """A calendar month. Ordered chronologically; formats as YYYY-MM."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise InputError(f"month out of range: {self.month}")

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @classmethod
    def parse(cls, text: str) -> "Period":
        m = re.fullmatch(r"(\d{4})-(\d{2})", text.strip())
        if not m:
            raise InputError(f"bad period {text!r}, expected YYYY-MM")
        return cls(int(m.group(1)), int(m.group(2)))

    def next(self) -> "Period":
        if self.month == 12:
            return Period(self.year + 1, 1)
        return Period(self.year, self.month + 1)


def bucket_month(day: date) -> Period:
    """Map a posting date to its calendar month."""
    return Period(day.year, day.month)


@dataclass(frozen=True)
class SkillRecord:
    """One cleaned skill mention from one job posting."""

    job_id: str
    title: str
    skill_text: str
    period: Period
    source: str = "other"
    skill_id: int | None = None


@dataclass
class ParseResult:
    records: list[SkillRecord] = field(default_factory=list)
    rejects: list[tuple[int, str]] = field(default_factory=list)  # (line, reason)
    rows_in: int = 0
    duplicates: int = 0

    @property
    def rows_rejected(self) -> int:
        return len(self.rejects)


def _normalize_source(value: str) -> str:
    value = value.strip().lower()
    return value if value in KNOWN_SOURCES else "other"


def _row_to_record(row: Mapping[str, object]) -> SkillRecord:
    """Build one record from a parsed row; raises ValueError on bad fields."""
    job_id = str(row.get("job_id") or "").strip()
    if not job_id:
        raise ValueError("missing job_id")
    skill = clean_text(str(row.get("skill") or ""))
    if not skill:
        raise ValueError("empty skill after cleaning")
    try:
        month = int(str(row.get("month")).strip())
        year = int(str(row.get("year")).strip())
    except (TypeError, ValueError):
        raise ValueError(f"unparseable month/year: {row.get('month')!r}/{row.get('year')!r}")
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range: {month}")
    raw_sid = str(row.get("skill_id") or "").strip()
    skill_id = int(raw_sid) if raw_sid else None
    return SkillRecord(
        job_id=job_id,
        title=clean_text(str(row.get("title") or "")),
        skill_text=skill,
        period=Period(year, month),
        source=_normalize_source(str(row.get("source") or "")),
        skill_id=skill_id,
    )


RECORD_FIELDS = ("job_id", "title", "skill", "month", "year", "source")


def parse_records(path: str | Path) -> ParseResult:
    """Parse a records file (.csv or .jsonl) into cleaned, deduplicated records.

    Malformed rows and rows whose skill text cleans to nothing land in the
    rejects report with their 1-based line number. Exact duplicates on
    (job_id, skill_text, period) collapse to the first occurrence, so
    len(records) == rows_in - len(rejects) - duplicates always holds.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"records file not found: {path}")
    if path.suffix.lower() == ".jsonl":
        rows = _iter_jsonl_rows(path)
    elif path.suffix.lower() == ".csv":
        rows = _iter_csv_rows(path)
    else:
        raise InputError(f"unsupported records format: {path.suffix!r} (want .csv or .jsonl)")

    result = ParseResult()
    seen: set[tuple[str, str, Period]] = set()
    for line_no, row, err in rows:
        result.rows_in += 1
        if err is not None:
            result.rejects.append((line_no, err))
            continue
        try:
            record = _row_to_record(row)
        except ValueError as exc:
            result.rejects.append((line_no, str(exc)))
            continue
        key = (record.job_id, record.skill_text, record.period)
        if key in seen:
            result.duplicates += 1
            continue
        seen.add(key)
        result.records.append(record)
    return result


def _iter_csv_rows(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"records file is empty: {path}")
        header = [h.strip() for h in header]
        missing = [f for f in RECORD_FIELDS if f not in header]
        if missing:
            raise InputError(f"records header missing columns {missing} in {path}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                yield line_no, {}, f"expected {len(header)} columns, got {len(row)}"
                continue
            yield line_no, dict(zip(header, row)), None


def _iter_jsonl_rows(path: Path):
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_no, {}, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(row, dict):
                yield line_no, {}, "JSON row is not an object"
                continue
            yield line_no, row, None


def write_records_csv(records: Iterable[SkillRecord], path: str | Path) -> None:
    """Write canonical records: raw schema plus the assigned skill_id column."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(RECORD_FIELDS) + ["skill_id"])
        for r in records:
            writer.writerow(
                [
                    r.job_id,
                    r.title,
                    r.skill_text,
                    r.period.month,
                    r.period.year,
                    r.source,
                    "" if r.skill_id is None else r.skill_id,
                ]
            )


def write_rejects_csv(rejects: Sequence[tuple[int, str]], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["line", "reason"])
        writer.writerows(rejects)


@dataclass(frozen=True)
class VariantMapping:
    """One row of the skill-variant map: raw text to merged id and label."""

    skill_text: str
    skill_id: int
    representative: str


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def normalize_variants(
    records: Sequence[SkillRecord],
    vectors: Mapping[str, np.ndarray],
    threshold: float = VARIANT_MERGE_THRESHOLD,
) -> tuple[list[SkillRecord], list[VariantMapping]]:
    """Merge near-duplicate skill spellings and assign stable skill ids.

    Distinct skill texts whose embedding cosine reaches the threshold are
    linked; single-linkage connected components form one skill. Each
    component's representative is its most frequent member text (ties break
    lexicographically), and skill ids are assigned 1..n in representative
    order, so the outcome is independent of record order.

    Args:
        records: cleaned records (skill_id ignored on input).
        vectors: embedding per distinct skill_text; missing text is an error.
        threshold: cosine at or above which two texts merge.

    Returns:
        (records with skill_id set, variant mapping rows sorted by id then text)
    """
    if not 0.0 < threshold <= 1.0:
        raise InputError(f"variant threshold must be in (0, 1], got {threshold}")
    texts = sorted({r.skill_text for r in records})
    if not texts:
        return [], []
    for t in texts:
        if t not in vectors:
            raise InputError(f"no embedding vector for skill text {t!r}")

    mat = np.stack([np.asarray(vectors[t], dtype=np.float64) for t in texts])
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        bad = texts[int(np.argmax(norms == 0))]
        raise InputError(f"zero-norm embedding for skill text {bad!r}")
    unit = mat / norms[:, None]
    sims = unit @ unit.T

    uf = _UnionFind(len(texts))
    # small tolerance so exact-threshold cosines built by hand still merge
    cut = threshold - 1e-12
    for i in range(len(texts)):
        for j in range(i + 1, len(texts)):
            if sims[i, j] >= cut:
                uf.union(i, j)

    counts: dict[str, int] = {}
    for r in records:
        counts[r.skill_text] = counts.get(r.skill_text, 0) + 1

    clusters: dict[int, list[str]] = {}
    for idx, text in enumerate(texts):
        clusters.setdefault(uf.find(idx), []).append(text)

    def representative(members: list[str]) -> str:
        return min(members, key=lambda t: (-counts[t], t))

    reps = sorted((representative(members), members) for members in clusters.values())
    text_to_id: dict[str, int] = {}
    text_to_rep: dict[str, str] = {}
    for skill_id, (rep, members) in enumerate(reps, start=1):
        for t in members:
            text_to_id[t] = skill_id
            text_to_rep[t] = rep

    out = [replace(r, skill_id=text_to_id[r.skill_text]) for r in records]
    mapping = sorted(
        (VariantMapping(t, text_to_id[t], text_to_rep[t]) for t in texts),
        key=lambda m: (m.skill_id, m.skill_text),
    )
    return out, mapping


def write_variant_map_csv(mapping: Sequence[VariantMapping], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["skill_text", "skill_id", "representative"])
        for m in mapping:
            writer.writerow([m.skill_text, m.skill_id, m.representative])
