"""Skill extraction from raw job postings via a chat backend.

This stage is optional: offline pipelines start from pre-extracted skill
records. The reply grammar is a bracketed list of skill phrases, or the
literal sentinel "Not mentioned" when the posting names no skills.
"""

from __future__ import annotations

import ast
import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Sequence

from .clients import ChatClient
from .errors import InputError, MatchProtocolError
from .ingest import Period, SkillRecord, bucket_month, clean_text

NO_SKILLS_SENTINEL = "Not mentioned"

POSTING_FIELDS = ("id", "job_name", "job_description", "date", "source")


@dataclass(frozen=True)
class JobPosting:
    job_id: str
    title: str
    description: str
    period: Period
    source: str = "other"


@dataclass
class PostingParseResult:
    postings: list[JobPosting] = field(default_factory=list)
    rejects: list[tuple[int, str]] = field(default_factory=list)


def _parse_date(raw: str) -> date:
    return datetime.strptime(raw.strip(), "%Y-%m-%d").date()


def parse_postings(path: str | Path) -> PostingParseResult:
    """Parse raw postings (CSV or JSONL) with id/job_name/job_description/date/source."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"postings file not found: {path}")
    result = PostingParseResult()

    def add(line_no: int, row: dict) -> None:
        job_id = str(row.get("id") or "").strip()
        if not job_id:
            result.rejects.append((line_no, "missing id"))
            return
        try:
            day = _parse_date(str(row.get("date") or ""))
        except ValueError:
            result.rejects.append((line_no, f"unparseable date {row.get('date')!r}"))
            return
        source = str(row.get("source") or "").strip().lower()
        result.postings.append(
            JobPosting(
                job_id=job_id,
                title=str(row.get("job_name") or ""),
                description=str(row.get("job_description") or ""),
                period=bucket_month(day),
                source=source if source in ("indeed", "occ", "linkedin") else "other",
            )
        )

    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(POSTING_FIELDS) - set(reader.fieldnames or [])
            if missing:
                raise InputError(f"postings header missing columns {sorted(missing)}")
            for line_no, row in enumerate(reader, start=2):
                add(line_no, row)
    elif path.suffix.lower() == ".jsonl":
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    result.rejects.append((line_no, f"invalid JSON: {exc.msg}"))
                    continue
                add(line_no, row if isinstance(row, dict) else {})
    else:
        raise InputError(f"unsupported postings format: {path.suffix!r}")
    return result


def extraction_messages(posting: JobPosting) -> list[dict]:
    """Render the skill-extraction conversation for one posting."""
    system = (
        "You extract the concrete skills requested by a job posting. A skill "
        "is a specific ability, tool, or task the candidate must bring."
    )
    user = f"Job title: {posting.title}\n\nPosting text:\n{posting.description}"
    developer = (
        "Reply with a single bracketed list of short skill phrases, for "
        'example ["skill one", "skill two"]. If the posting mentions no '
        f"skills, reply with exactly: {NO_SKILLS_SENTINEL}"
    )
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
        {"role": "developer", "content": developer},
    ]


def parse_extraction_reply(reply: str) -> list[str]:
    """Parse a reply into raw skill phrases; [] when the sentinel came back."""
    text = reply.strip()
    if text.startswith(("'", '"')) and text.endswith(("'", '"')) and len(text) >= 2:
        inner = text[1:-1].strip()
        if inner.casefold() == NO_SKILLS_SENTINEL.casefold():
            return []
    if text.casefold() == NO_SKILLS_SENTINEL.casefold():
        return []
    if not (text.startswith("[") and text.endswith("]")):
        raise MatchProtocolError(
            f"extraction reply is neither a list nor the sentinel: {reply!r}",
            reply=reply,
        )
    try:
        parsed = ast.literal_eval(text)
        if isinstance(parsed, (list, tuple)):
            return [str(item) for item in parsed]
    except (ValueError, SyntaxError):
        pass
    # tolerate unquoted items: [solar panels, wind turbines]
    items = [part.strip().strip("'\"") for part in text[1:-1].split(",")]
    return [item for item in items if item]


def extract_records(
    postings: Sequence[JobPosting], chat_client: ChatClient
) -> tuple[list[SkillRecord], list[tuple[str, str]]]:
    """Run extraction over postings; returns (records, per-posting errors)."""
    records: list[SkillRecord] = []
    errors: list[tuple[str, str]] = []
    for posting in postings:
        try:
            reply = chat_client.complete(extraction_messages(posting))
            skills = parse_extraction_reply(reply)
        except MatchProtocolError as exc:
            errors.append((posting.job_id, str(exc)))
            continue
        for skill in skills:
            cleaned = clean_text(skill)
            if not cleaned:
                continue
            records.append(
                SkillRecord(
                    job_id=posting.job_id,
                    title=clean_text(posting.title),
                    skill_text=cleaned,
                    period=posting.period,
                    source=posting.source,
                )
            )
    return records, errors
