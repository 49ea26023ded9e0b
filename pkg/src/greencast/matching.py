"""Match job-posting skills to taxonomy entries: retrieve, validate, record.

Retrieval embeds the skill text and takes the five nearest taxonomy entries
by cosine. Validation either applies a similarity threshold (local_rule) or
asks a chat model to pick the matching candidate (remote_llm). run_matching
drives the whole step over a record set with optional worker parallelism,
a shared processed-pair set, and resumable per-worker partial files.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .clients import ChatClient
from .embedding import Embedder, VectorIndex
from .errors import ConfigError, InputError, MatchProtocolError
from .ingest import Period, SkillRecord
from .taxonomy import TaxonomyEntry

DEFAULT_CANDIDATES = 5
DEFAULT_MATCH_THRESHOLD = 0.40
REJECT_SENTINEL = "No"


@dataclass(frozen=True)
class Candidate:
    entry_id: int
    main_label: str
    score: float


@dataclass(frozen=True)
class CandidateSet:
    """Retrieval result for one record: top candidates plus job context."""

    job_id: str
    skill_id: int
    skill_text: str
    job_title: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class MatchDecision:
    status: str  # accepted | rejected | error
    entry_id: int | None = None
    reason: str = ""


@dataclass(frozen=True)
class GreenAssignment:
    """One accepted (job, skill) pair mapped to a taxonomy entry."""

    job_id: str
    skill_id: int
    entry_id: int
    period: Period


@dataclass
class MatchStats:
    total_records: int = 0
    duplicate_pairs: int = 0
    accepted: int = 0
    rejected: int = 0
    errored: int = 0

    @property
    def decided(self) -> int:
        return self.accepted + self.rejected + self.errored


@dataclass
class MatchResult:
    assignments: list[GreenAssignment] = field(default_factory=list)
    stats: MatchStats = field(default_factory=MatchStats)


def retrieve_candidates(
    record: SkillRecord,
    index: VectorIndex,
    embedder: Embedder,
    entries_by_id: Mapping[int, TaxonomyEntry],
    k: int = DEFAULT_CANDIDATES,
) -> CandidateSet:
    """Embed the record's skill text and rank the k nearest taxonomy entries."""
    if record.skill_id is None:
        raise InputError(f"record {record.job_id!r} has no skill_id; run variant merge first")
    query = embedder.embed_batch([record.skill_text])[0]
    hits = index.knn(query, k)
    return CandidateSet(
        job_id=record.job_id,
        skill_id=record.skill_id,
        skill_text=record.skill_text,
        job_title=record.title,
        candidates=tuple(
            Candidate(eid, entries_by_id[eid].main_label, score) for eid, score in hits
        ),
    )


def validation_messages(cand: CandidateSet) -> list[dict]:
    """Render the candidate-validation conversation for a chat backend.

    The reply contract is strict: either the main name of one listed
    candidate, or the single word "No".
    """
    numbered = "\n".join(
        f"{i}. {c.main_label}" for i, c in enumerate(cand.candidates, start=1)
    )
    system = (
        "You decide whether a skill mentioned in a job posting is one of the "
        "green skills listed below. Green skills support environmental "
        "sustainability, resource efficiency, or the low-carbon transition."
    )
    user = (
        f"Skill from the posting: {cand.skill_text}\n"
        f"Job title for context: {cand.job_title or '(none)'}\n"
        f"Candidate green skills:\n{numbered}"
    )
    developer = (
        "Answer with exactly one line. If one candidate matches the skill, "
        "reply with that candidate's main name verbatim. If none matches, "
        f"reply with the single word {REJECT_SENTINEL}."
    )
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
        {"role": "developer", "content": developer},
    ]


def _strip_wrapping(text: str) -> str:
    text = text.strip()
    for quote in ('"', "'", "`"):
        if len(text) >= 2 and text.startswith(quote) and text.endswith(quote):
            text = text[1:-1].strip()
    return text


def parse_validation_reply(reply: str, cand: CandidateSet) -> MatchDecision:
    """Map a chat reply onto a decision; anything off-grammar is a protocol error."""
    answer = _strip_wrapping(reply)
    if answer.casefold() == REJECT_SENTINEL.casefold():
        return MatchDecision(status="rejected", reason="backend said no candidate matches")
    for c in cand.candidates:
        if answer.casefold() == c.main_label.casefold():
            return MatchDecision(status="accepted", entry_id=c.entry_id)
    raise MatchProtocolError(
        f"reply {reply!r} names no candidate for skill {cand.skill_text!r}",
        reply=reply,
    )


def validate(
    cand: CandidateSet,
    backend: str = "local_rule",
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    chat_client: ChatClient | None = None,
) -> MatchDecision:
    """Decide whether the top candidates actually match the skill.

    local_rule accepts the best candidate iff its cosine score reaches the
    threshold. remote_llm delegates the call to a chat backend and parses
    the constrained reply.
    """
    if not cand.candidates:
        return MatchDecision(status="error", reason="empty candidate set")
    if backend == "local_rule":
        top = cand.candidates[0]
        if top.score >= threshold:
            return MatchDecision(status="accepted", entry_id=top.entry_id)
        return MatchDecision(
            status="rejected",
            reason=f"top score {top.score:.4f} below threshold {threshold}",
        )
    if backend == "remote_llm":
        if chat_client is None:
            raise ConfigError("remote_llm validation needs a chat client")
        reply = chat_client.complete(validation_messages(cand))
        return parse_validation_reply(reply, cand)
    raise ConfigError(f"unknown validation backend {backend!r}")


def partition_balanced(n_items: int, n_parts: int) -> list[tuple[int, int]]:
    """Split range(n_items) into n_parts contiguous slices, sizes within one.

    The first n_items % n_parts slices get the extra element, so 10 items over
    3 parts gives sizes 4, 3, 3.
    """
    if n_parts < 1:
        raise ConfigError(f"n_workers must be >= 1, got {n_parts}")
    base, extra = divmod(n_items, n_parts)
    bounds = []
    start = 0
    for i in range(n_parts):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


_PART_HEADER = ["job_id", "skill_id", "status", "entry_id", "month", "year", "reason"]


def _load_part_files(work_dir: Path) -> tuple[list[dict], set[tuple[str, int]]]:
    rows: list[dict] = []
    pairs: set[tuple[str, int]] = set()
    for part in sorted(work_dir.glob("part-*.csv")):
        with part.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                try:
                    pair = (row["job_id"], int(row["skill_id"]))
                except (KeyError, TypeError, ValueError):
                    continue  # torn line from an interrupted run
                if pair in pairs:
                    continue
                pairs.add(pair)
                rows.append(row)
    return rows, pairs


def run_matching(
    records: Sequence[SkillRecord],
    entries: Sequence[TaxonomyEntry],
    index: VectorIndex,
    embedder: Embedder,
    backend: str = "local_rule",
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    k: int = DEFAULT_CANDIDATES,
    n_workers: int = 1,
    work_dir: str | Path | None = None,
    chat_client: ChatClient | None = None,
) -> MatchResult:
    """Retrieve and validate every unique (job_id, skill_id) pair.

    Records are deduplicated by pair up front (first occurrence wins), then
    split across workers in contiguous balanced chunks. A shared pair set
    guarantees each pair is decided exactly once even across resumed runs:
    pairs already present in the work dir's part files are skipped, and each
    worker appends its decisions to its own uniquely named part file. The
    merged output is sorted by (job_id, skill_id), so the assignment list is
    identical for any worker count under a deterministic backend.
    """
    entries_by_id = {e.entry_id: e for e in entries}
    stats = MatchStats(total_records=len(records))

    unique: list[SkillRecord] = []
    seen_input: set[tuple[str, int]] = set()
    for rec in records:
        if rec.skill_id is None:
            raise InputError(f"record {rec.job_id!r} has no skill_id; run variant merge first")
        pair = (rec.job_id, rec.skill_id)
        if pair in seen_input:
            stats.duplicate_pairs += 1
            continue
        seen_input.add(pair)
        unique.append(rec)

    work_path = Path(work_dir) if work_dir is not None else None
    if work_path is not None:
        work_path.mkdir(parents=True, exist_ok=True)
        prior_rows, done_pairs = _load_part_files(work_path)
        run_tag = len(list(work_path.glob("part-*.csv")))
    else:
        prior_rows, done_pairs = [], set()
        run_tag = 0

    lock = threading.Lock()
    new_rows_per_worker: list[list[dict]] = [[] for _ in range(n_workers)]
    bounds = partition_balanced(len(unique), n_workers)

    def decide(rec: SkillRecord) -> dict:
        row = {
            "job_id": rec.job_id,
            "skill_id": rec.skill_id,
            "status": "",
            "entry_id": "",
            "month": rec.period.month,
            "year": rec.period.year,
            "reason": "",
        }
        try:
            cand = retrieve_candidates(rec, index, embedder, entries_by_id, k=k)
            decision = validate(cand, backend=backend, threshold=threshold, chat_client=chat_client)
        except MatchProtocolError as exc:
            row["status"] = "error"
            row["reason"] = str(exc)
            return row
        row["status"] = decision.status
        row["entry_id"] = "" if decision.entry_id is None else decision.entry_id
        row["reason"] = decision.reason
        return row

    def worker(widx: int) -> None:
        start, end = bounds[widx]
        out_path = None
        fh = writer = None
        try:
            for rec in unique[start:end]:
                pair = (rec.job_id, rec.skill_id)
                with lock:
                    if pair in done_pairs:
                        continue
                    done_pairs.add(pair)
                row = decide(rec)
                new_rows_per_worker[widx].append(row)
                if work_path is not None:
                    if writer is None:
                        out_path = work_path / f"part-{run_tag:03d}-{widx:03d}.csv"
                        fh = out_path.open("w", newline="", encoding="utf-8")
                        writer = csv.DictWriter(fh, fieldnames=_PART_HEADER)
                        writer.writeheader()
                    writer.writerow(row)
                    fh.flush()
        finally:
            if fh is not None:
                fh.close()

    if n_workers == 1:
        worker(0)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(worker, i) for i in range(n_workers)]
            for fut in futures:
                fut.result()

    all_rows = prior_rows + [row for rows in new_rows_per_worker for row in rows]
    all_rows.sort(key=lambda r: (str(r["job_id"]), int(r["skill_id"])))

    result = MatchResult(stats=stats)
    for row in all_rows:
        status = row["status"]
        if status == "accepted":
            stats.accepted += 1
            result.assignments.append(
                GreenAssignment(
                    job_id=str(row["job_id"]),
                    skill_id=int(row["skill_id"]),
                    entry_id=int(row["entry_id"]),
                    period=Period(int(row["year"]), int(row["month"])),
                )
            )
        elif status == "rejected":
            stats.rejected += 1
        else:
            stats.errored += 1
    return result


ASSIGNMENT_FIELDS = ["job_id", "esco_green_skill", "skill_id", "month", "year"]


def write_assignments_csv(
    assignments: Sequence[GreenAssignment],
    entries: Sequence[TaxonomyEntry],
    path: str | Path,
) -> None:
    """Write accepted assignments in relational form, labeled by entry."""
    labels = {e.entry_id: e.main_label for e in entries}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ASSIGNMENT_FIELDS)
        for a in assignments:
            writer.writerow(
                [a.job_id, labels[a.entry_id], a.skill_id, a.period.month, a.period.year]
            )


def read_assignments_csv(
    path: str | Path, entries: Sequence[TaxonomyEntry]
) -> list[GreenAssignment]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"assignments file not found: {path}")
    by_label = {e.main_label: e.entry_id for e in entries}
    out: list[GreenAssignment] = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.DictReader(fh), start=2):
            label = row.get("esco_green_skill", "")
            if label not in by_label:
                raise InputError(f"line {line_no}: unknown taxonomy label {label!r}")
            try:
                out.append(
                    GreenAssignment(
                        job_id=row["job_id"],
                        skill_id=int(row["skill_id"]),
                        entry_id=by_label[label],
                        period=Period(int(row["year"]), int(row["month"])),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"line {line_no}: malformed assignment row ({exc})")
    return out
