"""Candidate retrieval, validation, parallel matching, and assignment I/O."""

from __future__ import annotations

import numpy as np
import pytest

from greencast.embedding import LocalTrigramEmbedder, VectorIndex
from greencast.errors import ConfigError, InputError, MatchProtocolError
from greencast.ingest import Period, SkillRecord
from greencast.matching import (
    Candidate,
    CandidateSet,
    REJECT_SENTINEL,
    parse_validation_reply,
    partition_balanced,
    read_assignments_csv,
    retrieve_candidates,
    run_matching,
    validate,
    validation_messages,
    write_assignments_csv,
)
from greencast.taxonomy import TaxonomyEntry, embedding_text


def _record(job_id, text, skill_id=1, month=7):
    return SkillRecord(job_id=job_id, title="tecnico", skill_text=text,
                       period=Period(2024, month), source="indeed", skill_id=skill_id)


def _cand_set(scores, labels=None):
    labels = labels or [f"skill {i}" for i in range(len(scores))]
    return CandidateSet(
        job_id="j1", skill_id=1, skill_text="texto", job_title="puesto",
        candidates=tuple(
            Candidate(entry_id=i + 1, main_label=l, score=s)
            for i, (l, s) in enumerate(zip(labels, scores))
        ),
    )


@pytest.fixture(scope="module")
def small_world():
    entries = [
        TaxonomyEntry(1, "instalacion de paneles solares", ("montaje de paneles",),
                      "sistemas fotovoltaicos"),
        TaxonomyEntry(2, "gestion de residuos industriales", (), "manejo de residuos"),
        TaxonomyEntry(3, "eficiencia energetica en procesos", (), "reducir consumo"),
    ]
    embedder = LocalTrigramEmbedder(dim=512)
    vectors = embedder.embed_batch([embedding_text(e) for e in entries])
    index = VectorIndex.build(list(zip([e.entry_id for e in entries], vectors)))
    return entries, embedder, index


# -------------------------------------------------------- retrieve_candidates

def test_retrieve_candidates_ranks_own_entry_first(small_world):
    entries, embedder, index = small_world
    cand = retrieve_candidates(
        _record("j1", "gestion de residuos industriales"), index, embedder,
        {e.entry_id: e for e in entries}, k=3,
    )
    assert cand.candidates[0].entry_id == 2
    assert cand.candidates[0].main_label == "gestion de residuos industriales"
    scores = [c.score for c in cand.candidates]
    assert scores == sorted(scores, reverse=True)
    assert len(cand.candidates) == 3


def test_retrieve_candidates_requires_skill_id(small_world):
    entries, embedder, index = small_world
    rec = _record("j1", "lo que sea", skill_id=None)
    with pytest.raises(InputError, match="skill_id"):
        retrieve_candidates(rec, index, embedder, {e.entry_id: e for e in entries})


# ------------------------------------------------------------------- validate

def test_local_rule_accepts_at_threshold_inclusive():
    decision = validate(_cand_set([0.40, 0.2]), backend="local_rule", threshold=0.40)
    assert decision.status == "accepted"
    assert decision.entry_id == 1


def test_local_rule_rejects_below_threshold():
    decision = validate(_cand_set([0.3999, 0.2]), backend="local_rule", threshold=0.40)
    assert decision.status == "rejected"
    assert "below threshold" in decision.reason


def test_validate_empty_candidates_is_an_error_decision():
    empty = CandidateSet(job_id="j", skill_id=1, skill_text="x", job_title="", candidates=())
    assert validate(empty).status == "error"


def test_validate_unknown_backend_raises():
    with pytest.raises(ConfigError, match="unknown validation backend"):
        validate(_cand_set([0.9]), backend="psychic")


class _ScriptedChat:
    def __init__(self, replies):
        self.replies = list(replies)
        self.seen = []

    def complete(self, messages):
        self.seen.append(messages)
        return self.replies.pop(0)


def test_validate_remote_llm_round_trip():
    chat = _ScriptedChat(["skill 1"])
    decision = validate(_cand_set([0.5, 0.4]), backend="remote_llm", chat_client=chat)
    assert decision.status == "accepted"
    assert decision.entry_id == 2  # "skill 1" is the second candidate label
    assert chat.seen[0] == validation_messages(_cand_set([0.5, 0.4]))


def test_validate_remote_llm_needs_client():
    with pytest.raises(ConfigError, match="chat client"):
        validate(_cand_set([0.5]), backend="remote_llm")


# -------------------------------------------------------- validation protocol

def test_validation_messages_list_candidates_and_contract():
    cand = _cand_set([0.9, 0.5], labels=["energia solar", "reciclaje"])
    messages = validation_messages(cand)
    assert [m["role"] for m in messages] == ["system", "user", "developer"]
    user = messages[1]["content"]
    assert "texto" in user and "puesto" in user
    assert "1. energia solar" in user and "2. reciclaje" in user
    assert REJECT_SENTINEL in messages[2]["content"]


def test_parse_validation_reply_accepts_label_case_insensitively():
    cand = _cand_set([0.9, 0.5], labels=["Energia Solar", "reciclaje"])
    decision = parse_validation_reply("energia solar", cand)
    assert (decision.status, decision.entry_id) == ("accepted", 1)


def test_parse_validation_reply_strips_quotes_and_whitespace():
    cand = _cand_set([0.9], labels=["energia solar"])
    for reply in ['"energia solar"', "  'energia solar' ", "`energia solar`"]:
        assert parse_validation_reply(reply, cand).entry_id == 1


def test_parse_validation_reply_no_sentinel_rejects():
    cand = _cand_set([0.9])
    for reply in [REJECT_SENTINEL, REJECT_SENTINEL.lower(), f' "{REJECT_SENTINEL}" ']:
        assert parse_validation_reply(reply, cand).status == "rejected"


def test_parse_validation_reply_off_grammar_is_protocol_error():
    cand = _cand_set([0.9], labels=["energia solar"])
    with pytest.raises(MatchProtocolError) as err:
        parse_validation_reply("tal vez la primera", cand)
    assert err.value.reply == "tal vez la primera"
    assert err.value.exit_code == 1


# ---------------------------------------------------------- partition_balanced

def test_partition_balanced_ten_over_three():
    assert partition_balanced(10, 3) == [(0, 4), (4, 7), (7, 10)]


def test_partition_balanced_properties():
    rng = np.random.RandomState(3)
    for _ in range(200):
        n, parts = int(rng.randint(0, 200)), int(rng.randint(1, 20))
        bounds = partition_balanced(n, parts)
        assert len(bounds) == parts
        assert bounds[0][0] == 0 and bounds[-1][1] == n
        sizes = [e - s for s, e in bounds]
        assert sum(sizes) == n
        assert max(sizes) - min(sizes) <= 1
        assert all(bounds[i][1] == bounds[i + 1][0] for i in range(parts - 1))


def test_partition_balanced_rejects_zero_parts():
    with pytest.raises(ConfigError):
        partition_balanced(5, 0)


# ----------------------------------------------------------------- run_matching

def _matching_records(n=30):
    """Records alternating between green-ish and clearly unrelated texts."""
    texts = [
        ("instalacion de paneles solares", 1),
        ("gestion de residuos industriales", 2),
        ("eficiencia energetica en procesos", 3),
        ("contabilidad fiscal corporativa", 4),
    ]
    records = []
    for i in range(n):
        text, sid = texts[i % len(texts)]
        records.append(_record(f"j{i:03d}", text, skill_id=sid, month=7 + i % 3))
    return records


def test_run_matching_counts_and_dedup(small_world):
    entries, embedder, index = small_world
    records = _matching_records(20)
    records.append(_record("j000", "instalacion de paneles solares", skill_id=1))  # dup pair
    result = run_matching(records, entries, index, embedder, threshold=0.40)
    stats = result.stats
    assert stats.total_records == 21
    assert stats.duplicate_pairs == 1
    assert stats.decided == 20
    assert stats.accepted + stats.rejected + stats.errored == 20
    assert stats.errored == 0
    assert stats.rejected == 5   # the unrelated accounting skill, 5 occurrences
    assert len(result.assignments) == stats.accepted


def test_run_matching_assignments_are_sorted_and_complete(small_world):
    entries, embedder, index = small_world
    result = run_matching(_matching_records(16), entries, index, embedder)
    keys = [(a.job_id, a.skill_id) for a in result.assignments]
    assert keys == sorted(keys)
    assert all(a.entry_id in {1, 2, 3} for a in result.assignments)


def test_run_matching_is_identical_across_worker_counts(small_world, tmp_path):
    entries, embedder, index = small_world
    records = _matching_records(37)
    outcomes = []
    for workers in (1, 3, 8):
        result = run_matching(
            records, entries, index, embedder, n_workers=workers,
            work_dir=tmp_path / f"w{workers}",
        )
        outcomes.append(
            [(a.job_id, a.skill_id, a.entry_id, str(a.period)) for a in result.assignments]
        )
    assert outcomes[0] == outcomes[1] == outcomes[2]


def test_run_matching_resumes_from_part_files(small_world, tmp_path):
    entries, embedder, index = small_world
    records = _matching_records(12)
    work = tmp_path / "work"

    full = run_matching(records, entries, index, embedder, work_dir=tmp_path / "ref")

    # first run decides a prefix, then "crashes": simulate by running on a slice
    run_matching(records[:5], entries, index, embedder, work_dir=work)
    assert len(list(work.glob("part-*.csv"))) == 1

    resumed = run_matching(records, entries, index, embedder, work_dir=work)
    assert [(a.job_id, a.skill_id, a.entry_id) for a in resumed.assignments] == [
        (a.job_id, a.skill_id, a.entry_id) for a in full.assignments
    ]
    # the resumed run adds a second part file rather than rewriting the first
    assert len(list(work.glob("part-*.csv"))) == 2


def test_run_matching_protocol_errors_are_counted_not_raised(small_world):
    entries, embedder, index = small_world
    records = _matching_records(4)  # one off-grammar reply among four
    chat = _ScriptedChat([
        "instalacion de paneles solares",
        "gestion de residuos industriales",
        REJECT_SENTINEL,
        "no estoy seguro de esto",
    ])
    result = run_matching(
        records, entries, index, embedder, backend="remote_llm", chat_client=chat
    )
    stats = result.stats
    assert (stats.accepted, stats.rejected, stats.errored) == (2, 1, 1)
    assert stats.decided == 4


def test_run_matching_requires_skill_ids(small_world):
    entries, embedder, index = small_world
    with pytest.raises(InputError, match="skill_id"):
        run_matching([_record("j1", "texto", skill_id=None)], entries, index, embedder)


# ------------------------------------------------------------- assignment I/O

def test_assignments_csv_round_trip(small_world, tmp_path):
    entries, embedder, index = small_world
    result = run_matching(_matching_records(10), entries, index, embedder)
    path = tmp_path / "assignments.csv"
    write_assignments_csv(result.assignments, entries, path)

    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "job_id,esco_green_skill,skill_id,month,year"

    back = read_assignments_csv(path, entries)
    assert [(a.job_id, a.skill_id, a.entry_id, a.period) for a in back] == [
        (a.job_id, a.skill_id, a.entry_id, a.period) for a in result.assignments
    ]


def test_read_assignments_unknown_label_is_an_error(small_world, tmp_path):
    entries, *_ = small_world
    path = tmp_path / "a.csv"
    path.write_text(
        "job_id,esco_green_skill,skill_id,month,year\n"
        "j1,habilidad inexistente,1,7,2024\n",
        encoding="utf-8",
    )
    with pytest.raises(InputError, match="inexistente"):
        read_assignments_csv(path, entries)
