"""Green-skill taxonomy loading and embedding-text construction."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InputError


@dataclass(frozen=True)
class TaxonomyEntry:
    """One taxonomy concept: a main label plus alternate labels and a gloss."""

    entry_id: int
    main_label: str
    alt_labels: tuple[str, ...] = ()
    description: str = ""


@dataclass
class TaxonomyLoadResult:
    entries: list[TaxonomyEntry] = field(default_factory=list)
    rejects: list[tuple[int, str]] = field(default_factory=list)


def load_taxonomy(path: str | Path) -> TaxonomyLoadResult:
    """Load a taxonomy CSV with columns mainLabel, altLabels, description.

    altLabels holds zero or more alternates separated by '|'. Rows without a
    mainLabel are rejected with their line number. Entry ids follow row order
    starting at 1 so the same file always yields the same ids.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"taxonomy file not found: {path}")
    result = TaxonomyLoadResult()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"mainLabel", "altLabels", "description"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"taxonomy header missing columns {sorted(missing)} in {path}")
        entry_id = 0
        for line_no, row in enumerate(reader, start=2):
            main = (row.get("mainLabel") or "").strip()
            if not main:
                result.rejects.append((line_no, "missing mainLabel"))
                continue
            alts = tuple(
                a.strip() for a in (row.get("altLabels") or "").split("|") if a.strip()
            )
            entry_id += 1
            result.entries.append(
                TaxonomyEntry(
                    entry_id=entry_id,
                    main_label=main,
                    alt_labels=alts,
                    description=(row.get("description") or "").strip(),
                )
            )
    if not result.entries:
        raise InputError(f"taxonomy has no usable entries: {path}")
    return result


def embedding_text(entry: TaxonomyEntry) -> str:
    """Text embedded for an entry: main label, alternates, then description.

    Parts are joined with single spaces; empty parts contribute nothing, so
    an entry with no alternates and no description embeds its label alone.
    """
    parts = [entry.main_label, *entry.alt_labels, entry.description]
    return " ".join(p for p in parts if p)


def write_taxonomy_json(entries: Sequence[TaxonomyEntry], path: str | Path) -> None:
    """Cache the normalized taxonomy as JSON for later stages."""
    payload = [
        {
            "entry_id": e.entry_id,
            "main_label": e.main_label,
            "alt_labels": list(e.alt_labels),
            "description": e.description,
        }
        for e in entries
    ]
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_taxonomy_json(path: str | Path) -> list[TaxonomyEntry]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"taxonomy cache not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    return [
        TaxonomyEntry(
            entry_id=int(e["entry_id"]),
            main_label=e["main_label"],
            alt_labels=tuple(e["alt_labels"]),
            description=e.get("description", ""),
        )
        for e in data
    ]
