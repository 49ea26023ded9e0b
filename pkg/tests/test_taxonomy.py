"""Taxonomy CSV loading, embedding-text construction, and JSON caching."""

from __future__ import annotations

import pytest

from greencast.errors import InputError
from greencast.taxonomy import (
    TaxonomyEntry,
    embedding_text,
    load_taxonomy,
    read_taxonomy_json,
    write_taxonomy_json,
)


def _write(path, body):
    path.write_text(body, encoding="utf-8")
    return path


def test_load_taxonomy_parses_alt_labels_and_assigns_row_order_ids(tmp_path):
    f = _write(tmp_path / "t.csv", (
        "mainLabel,altLabels,description\n"
        "energia solar,paneles solares|fotovoltaica,montar sistemas solares\n"
        "reciclaje,,separar materiales\n"
    ))
    result = load_taxonomy(f)
    assert [e.entry_id for e in result.entries] == [1, 2]
    first = result.entries[0]
    assert first.main_label == "energia solar"
    assert first.alt_labels == ("paneles solares", "fotovoltaica")
    assert first.description == "montar sistemas solares"
    assert result.entries[1].alt_labels == ()


def test_load_taxonomy_rejects_rows_without_main_label(tmp_path):
    f = _write(tmp_path / "t.csv", (
        "mainLabel,altLabels,description\n"
        ",alguno,desc\n"
        "valida,,desc\n"
    ))
    result = load_taxonomy(f)
    assert len(result.entries) == 1
    assert result.rejects == [(2, "missing mainLabel")]
    # ids keep counting from usable rows only
    assert result.entries[0].entry_id == 1


def test_load_taxonomy_ids_are_stable_across_reloads(tmp_path):
    f = _write(tmp_path / "t.csv", (
        "mainLabel,altLabels,description\n"
        "zeta,,\n"
        "alfa,,\n"
    ))
    a = load_taxonomy(f).entries
    b = load_taxonomy(f).entries
    assert [(e.entry_id, e.main_label) for e in a] == [(1, "zeta"), (2, "alfa")]
    assert a == b


def test_load_taxonomy_errors(tmp_path):
    with pytest.raises(InputError, match="not found"):
        load_taxonomy(tmp_path / "missing.csv")
    bad = _write(tmp_path / "bad.csv", "main,alt\nx,y\n")
    with pytest.raises(InputError, match="missing columns"):
        load_taxonomy(bad)
    empty = _write(tmp_path / "empty.csv", "mainLabel,altLabels,description\n,,\n")
    with pytest.raises(InputError, match="no usable entries"):
        load_taxonomy(empty)


def test_embedding_text_joins_nonempty_parts():
    full = TaxonomyEntry(1, "energia solar", ("fotovoltaica",), "montar paneles")
    assert embedding_text(full) == "energia solar fotovoltaica montar paneles"
    bare = TaxonomyEntry(2, "reciclaje")
    assert embedding_text(bare) == "reciclaje"


def test_taxonomy_json_round_trip(tmp_path):
    entries = [
        TaxonomyEntry(1, "energia solar", ("fotovoltaica", "paneles"), "con acentos: instalación"),
        TaxonomyEntry(2, "reciclaje"),
    ]
    path = tmp_path / "t.json"
    write_taxonomy_json(entries, path)
    assert read_taxonomy_json(path) == entries
    with pytest.raises(InputError):
        read_taxonomy_json(tmp_path / "missing.json")


def test_bundled_fixture_taxonomy_loads_clean(fixture_dir):
    result = load_taxonomy(fixture_dir / "taxonomy.csv")
    assert len(result.entries) == 20
    assert not result.rejects
    assert all(e.alt_labels and e.description for e in result.entries)
