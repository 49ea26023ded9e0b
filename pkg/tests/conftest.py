"""Shared fixtures and the acceptance-summary reporter.

Tests named ``test_criterion_NN_*`` in test_acceptance.py are grouped by
number, and the terminal summary prints one PASS/FAIL line per criterion
so the acceptance status is readable at a glance.
"""

from __future__ import annotations

import re
from collections import defaultdict
from pathlib import Path

import pytest

from greencast.embedding import LocalTrigramEmbedder, VectorIndex
from greencast.ingest import normalize_variants, parse_records
from greencast.taxonomy import embedding_text, load_taxonomy

FIXTURE_DIR = Path(__file__).parent / "fixtures"

CRITERION_TITLES = {
    1: "monthly share report reproduces the published table",
    2: "75th-percentile quadrant identities on 274 distinct values",
    3: "published growth pairs are internally consistent and classify Stable",
    4: "rolling-origin window counting",
    5: "error metrics match a brute-force oracle",
    6: "forecaster closed forms, ridge exact fit, trend learner, extension",
    7: "matching is deterministic across worker counts",
    8: "imported-predictions scoring and ranking layout",
    9: "end-to-end run is byte-stable",
}


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def embedder() -> LocalTrigramEmbedder:
    return LocalTrigramEmbedder(dim=1024)


@pytest.fixture(scope="session")
def taxonomy_entries():
    return load_taxonomy(FIXTURE_DIR / "taxonomy.csv").entries


@pytest.fixture(scope="session")
def taxonomy_index(taxonomy_entries, embedder):
    vectors = embedder.embed_batch([embedding_text(e) for e in taxonomy_entries])
    return VectorIndex.build(list(zip((e.entry_id for e in taxonomy_entries), vectors)))


@pytest.fixture(scope="session")
def fixture_records(embedder):
    """Parsed + variant-merged records from the bundled fixture (read-only)."""
    parsed = parse_records(FIXTURE_DIR / "records.csv")
    texts = sorted({r.skill_text for r in parsed.records})
    vectors = dict(zip(texts, embedder.embed_batch(texts)))
    records, mapping = normalize_variants(parsed.records, vectors)
    return records, mapping, parsed


_CRITERION_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results: dict[int, list[tuple[str, bool]]] = defaultdict(list)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = _CRITERION_RE.search(report.nodeid)
    if m:
        _results[int(m.group(1))].append((report.nodeid, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        outcomes = _results[num]
        ok = all(passed for _, passed in outcomes)
        status = "PASS" if ok else "FAIL"
        title = CRITERION_TITLES.get(num, "")
        tr.write_line(f"criterion {num}: {status} ({len(outcomes)} checks) — {title}")
