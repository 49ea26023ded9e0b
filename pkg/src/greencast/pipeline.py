"""Stage implementations shared by the CLI and by library callers.

Every stage reads files, writes files into an output directory, and records
a manifest of input/output hashes. Stages are idempotent: the same inputs
and config rewrite byte-identical artifacts, and nothing here depends on
wall-clock time or worker scheduling.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import classify as classify_mod
from . import report as report_mod
from .clients import ChatClient, RemoteEmbedder
from .config import PipelineConfig, check_stage_output, write_manifest
from .embedding import CachedEmbedder, EmbeddingCache, LocalTrigramEmbedder, VectorIndex
from .errors import ConfigError, InputError
from .extraction import extract_records, parse_postings
from .forecasting import (
    EvalReport,
    TrainConfig,
    WindowConfig,
    extend_forecast,
    make_forecaster,
    read_predictions_csv,
    rolling_origin_eval,
    score_imported,
    write_eval_reports_csv,
    write_eval_reports_json,
)
from .ingest import normalize_variants, parse_records, write_records_csv, write_rejects_csv, write_variant_map_csv
from .matching import read_assignments_csv, run_matching, write_assignments_csv
from .series import (
    MonthlyTotals,
    aggregate,
    green_counts_by_period,
    normalize,
    read_counts_csv,
    read_normalized_csv,
    write_counts_csv,
    write_normalized_csv,
)
from .taxonomy import TaxonomyEntry, embedding_text, load_taxonomy, read_taxonomy_json, write_taxonomy_json


def make_embedder(cfg: PipelineConfig, cache_path: Path | None = None):
    if cfg.embed_backend == "local":
        inner = LocalTrigramEmbedder(dim=cfg.embed_dim)
    else:
        inner = RemoteEmbedder(cfg.embed_url, cfg.embed_model, dim=cfg.remote_dim)
    if cache_path is None:
        return inner
    return CachedEmbedder(inner, EmbeddingCache(cache_path))


def make_chat_client(cfg: PipelineConfig) -> ChatClient:
    if not (cfg.chat_url and cfg.chat_model):
        raise ConfigError("chat backend needs chat_url and chat_model")
    return ChatClient(cfg.chat_url, cfg.chat_model)


def load_taxonomy_any(path: str | Path) -> list[TaxonomyEntry]:
    """Accept either the raw taxonomy CSV or the normalized JSON cache."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_taxonomy_json(path)
    return load_taxonomy(path).entries


def stage_extract(postings_path: Path, out_dir: Path, cfg: PipelineConfig) -> dict[str, Path]:
    """Pull skill records out of raw postings with the chat backend."""
    out_dir.mkdir(parents=True, exist_ok=True)
    parsed = parse_postings(postings_path)
    client = make_chat_client(cfg)
    records, errors = extract_records(parsed.postings, client)

    records_path = out_dir / "records.csv"
    write_records_csv(records, records_path)
    errors_path = out_dir / "extract_errors.csv"
    with errors_path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("job_id,reason\n")
        for job_id, reason in errors:
            fh.write(f"{job_id},{json.dumps(reason)}\n")
    rejects_path = out_dir / "posting_rejects.csv"
    write_rejects_csv(parsed.rejects, rejects_path)

    outputs = {"records": records_path, "extract_errors": errors_path, "posting_rejects": rejects_path}
    write_manifest(out_dir, "extract", {"postings": postings_path}, outputs, cfg)
    return outputs


def stage_match(
    records_path: Path, taxonomy_path: Path, out_dir: Path, cfg: PipelineConfig
) -> dict[str, Path]:
    """Clean records, merge variants, and match every pair to the taxonomy."""
    out_dir.mkdir(parents=True, exist_ok=True)
    parsed = parse_records(records_path)
    if not parsed.records:
        raise InputError(f"no usable records in {records_path}")
    if Path(taxonomy_path).suffix.lower() == ".json":
        entries, taxonomy_rejects = read_taxonomy_json(taxonomy_path), []
    else:
        loaded = load_taxonomy(taxonomy_path)
        entries, taxonomy_rejects = loaded.entries, loaded.rejects

    cache_path = out_dir / "cache" / "embeddings.jsonl"
    embedder = make_embedder(cfg, cache_path)

    # embed every distinct text up front, in sorted order, so later lookups
    # are cache hits and output bytes cannot depend on worker scheduling
    texts = sorted({r.skill_text for r in parsed.records})
    vectors = {t: v for t, v in zip(texts, embedder.embed_batch(texts))}
    records, variant_map = normalize_variants(parsed.records, vectors, cfg.variant_threshold)

    entry_vectors = embedder.embed_batch([embedding_text(e) for e in entries])
    index = VectorIndex.build([(e.entry_id, v) for e, v in zip(entries, entry_vectors)])

    chat_client = make_chat_client(cfg) if cfg.match_backend == "remote_llm" else None
    result = run_matching(
        records,
        entries,
        index,
        embedder,
        backend=cfg.match_backend,
        threshold=cfg.match_threshold,
        k=cfg.candidates,
        n_workers=cfg.n_workers,
        work_dir=out_dir / "work" / "match_parts",
        chat_client=chat_client,
    )

    canonical_path = out_dir / "canonical_records.csv"
    write_records_csv(records, canonical_path)
    variant_path = out_dir / "variant_map.csv"
    write_variant_map_csv(variant_map, variant_path)
    rejects_path = out_dir / "rejects.csv"
    write_rejects_csv(parsed.rejects, rejects_path)
    taxonomy_rejects_path = out_dir / "taxonomy_rejects.csv"
    write_rejects_csv(taxonomy_rejects, taxonomy_rejects_path)
    taxonomy_json = out_dir / "taxonomy.json"
    write_taxonomy_json(entries, taxonomy_json)
    assignments_path = out_dir / "assignments.csv"
    write_assignments_csv(result.assignments, entries, assignments_path)
    stats_path = out_dir / "match_stats.json"
    stats_path.write_text(
        json.dumps(
            {
                "parse": {
                    "rows_in": parsed.rows_in,
                    "rejected": parsed.rows_rejected,
                    "duplicates": parsed.duplicates,
                    "records": len(parsed.records),
                },
                "match": {
                    "total_records": result.stats.total_records,
                    "duplicate_pairs": result.stats.duplicate_pairs,
                    "accepted": result.stats.accepted,
                    "rejected": result.stats.rejected,
                    "errored": result.stats.errored,
                },
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )

    outputs = {
        "canonical_records": canonical_path,
        "variant_map": variant_path,
        "rejects": rejects_path,
        "taxonomy_rejects": taxonomy_rejects_path,
        "taxonomy": taxonomy_json,
        "assignments": assignments_path,
        "match_stats": stats_path,
    }
    write_manifest(out_dir, "match", {"records": records_path, "taxonomy": taxonomy_path}, outputs, cfg)
    return outputs


def stage_build(
    assignments_path: Path, taxonomy_path: Path, totals_path: Path, out_dir: Path, cfg: PipelineConfig
) -> dict[str, Path]:
    """Aggregate assignments into counts and normalize by monthly totals."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = load_taxonomy_any(taxonomy_path)
    assignments = read_assignments_csv(assignments_path, entries)
    if not assignments:
        raise InputError(f"no assignments to aggregate in {assignments_path}")
    totals = MonthlyTotals.from_csv(totals_path)
    counts = aggregate(assignments, policy=cfg.period_policy)
    normalized = normalize(counts, totals)

    counts_path = out_dir / "counts.csv"
    write_counts_csv(counts, counts_path)
    normalized_path = out_dir / "normalized.csv"
    write_normalized_csv(normalized, normalized_path)

    outputs = {"counts": counts_path, "normalized": normalized_path}
    write_manifest(
        out_dir,
        "build",
        {"assignments": assignments_path, "taxonomy": taxonomy_path, "totals": totals_path},
        outputs,
        cfg,
    )
    return outputs


def _train_config(cfg: PipelineConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        patience=cfg.patience,
        learning_rate=cfg.learning_rate,
        moving_avg=cfg.moving_avg,
    )


def stage_eval(
    normalized_path: Path, out_dir: Path, cfg: PipelineConfig, predictions_path: Path | None = None
) -> dict[str, Path]:
    """Rolling-origin evaluation of the configured models over every series."""
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = read_normalized_csv(normalized_path)
    series_map = matrix.series_map()
    train = _train_config(cfg)

    reports: list[EvalReport] = []
    for name in cfg.models:
        for seq_len in cfg.seq_lens:
            model = make_forecaster(name, seed=cfg.seed, ridge_lambda=cfg.ridge_lambda)
            reports.append(
                rolling_origin_eval(
                    series_map,
                    model,
                    WindowConfig(seq_len=seq_len, pred_len=cfg.pred_len),
                    train=train,
                    train_frac=cfg.train_frac,
                    standardize=cfg.standardize,
                )
            )
    if predictions_path is not None:
        predictions = read_predictions_csv(predictions_path)
        reports.append(
            score_imported(
                series_map,
                predictions,
                WindowConfig(seq_len=cfg.forecast_seq_len, pred_len=cfg.pred_len),
                model_name=f"imported:{Path(predictions_path).stem}",
            )
        )

    csv_path = out_dir / "eval_report.csv"
    write_eval_reports_csv(reports, csv_path)
    json_path = out_dir / "eval_report.json"
    write_eval_reports_json(reports, json_path)

    inputs = {"normalized": normalized_path}
    if predictions_path is not None:
        inputs["predictions"] = predictions_path
    outputs = {"eval_report_csv": csv_path, "eval_report_json": json_path}
    write_manifest(out_dir, "eval", inputs, outputs, cfg)
    return outputs


def stage_forecast(normalized_path: Path, out_dir: Path, cfg: PipelineConfig) -> dict[str, Path]:
    """Fit the chosen model on full history and extend every series."""
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = read_normalized_csv(normalized_path)
    series_map = matrix.series_map()
    wcfg = WindowConfig(seq_len=cfg.forecast_seq_len, pred_len=cfg.pred_len)
    model = make_forecaster(cfg.forecast_model, seed=cfg.seed, ridge_lambda=cfg.ridge_lambda)
    # deployment fit sees all windows; there is no held-back evaluation here
    model.fit(list(series_map.values()), wcfg, _train_config(cfg))

    rows: list[tuple[int, int, float]] = []
    for sid in matrix.skill_ids:
        extension = extend_forecast(
            series_map[sid], model, wcfg, horizon=cfg.horizon, standardize=cfg.standardize,
            floor=0.0,  # shares are proportions; a trend cannot take them negative
        )
        for step, value in enumerate(extension, start=1):
            rows.append((sid, step, float(value)))

    forecasts_path = out_dir / "forecasts.csv"
    with forecasts_path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("skill_id,step,value\n")
        for sid, step, value in rows:
            fh.write(f"{sid},{step},{value!r}\n")

    outputs = {"forecasts": forecasts_path}
    write_manifest(out_dir, "forecast", {"normalized": normalized_path}, outputs, cfg)
    return outputs


def read_forecasts_csv(path: str | Path) -> dict[int, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"forecasts file not found: {path}")
    rows: dict[int, dict[int, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"skill_id", "step", "value"} - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"forecasts header missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                sid = int(row["skill_id"])
                step = int(row["step"])
                value = float(row["value"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"line {line_no}: malformed forecast row ({exc})")
            rows.setdefault(sid, {})[step] = value
    out: dict[int, np.ndarray] = {}
    for sid, steps in rows.items():
        expected = list(range(1, len(steps) + 1))
        if sorted(steps) != expected:
            raise InputError(f"skill {sid}: forecast steps {sorted(steps)} are not 1..{len(steps)}")
        out[sid] = np.array([steps[s] for s in expected], dtype=np.float64)
    return out


def stage_classify(
    normalized_path: Path,
    forecasts_path: Path,
    out_dir: Path,
    cfg: PipelineConfig,
    variant_map_path: Path | None = None,
) -> dict[str, Path]:
    """Growth metrics, percentile thresholds, quadrants, and rankings."""
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = read_normalized_csv(normalized_path)
    if len(matrix.periods) < cfg.history_months:
        raise InputError(
            f"matrix has {len(matrix.periods)} months, classification needs exactly "
            f"{cfg.history_months} (configured history window)"
        )
    history_map = {sid: matrix.row(sid)[-cfg.history_months :] for sid in matrix.skill_ids}

    forecast_map = read_forecasts_csv(forecasts_path)
    trimmed: dict[int, np.ndarray] = {}
    for sid, values in forecast_map.items():
        if len(values) < cfg.forecast_months:
            raise InputError(
                f"skill {sid}: {len(values)} forecast steps, classification needs "
                f"{cfg.forecast_months}"
            )
        trimmed[sid] = values[: cfg.forecast_months]

    labels: dict[int, str] = {}
    if variant_map_path is not None:
        with Path(variant_map_path).open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                labels[int(row["skill_id"])] = row["representative"]

    growths, thresholds = classify_mod.classify_skills(
        history_map,
        trimmed,
        labels,
        history_months=cfg.history_months,
        forecast_months=cfg.forecast_months,
        quantile=cfg.quantile,
    )

    classification_path = out_dir / "classification.csv"
    classify_mod.write_classification_csv(growths, classification_path)
    thresholds_path = out_dir / "thresholds.json"
    thresholds_path.write_text(
        json.dumps(
            {"tau_abs": thresholds.tau_abs, "tau_rel": thresholds.tau_rel, "quantile": thresholds.quantile},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    rank_rel_path = out_dir / "rank_relative.csv"
    classify_mod.write_rankings_csv(growths, "relative", rank_rel_path)
    rank_abs_path = out_dir / "rank_absolute.csv"
    classify_mod.write_rankings_csv(growths, "absolute", rank_abs_path)

    inputs = {"normalized": normalized_path, "forecasts": forecasts_path}
    if variant_map_path is not None:
        inputs["variant_map"] = variant_map_path
    outputs = {
        "classification": classification_path,
        "thresholds": thresholds_path,
        "rank_relative": rank_rel_path,
        "rank_absolute": rank_abs_path,
    }
    write_manifest(out_dir, "classify", inputs, outputs, cfg)
    return outputs


def stage_report(
    counts_path: Path,
    totals_path: Path,
    classification_path: Path,
    thresholds_path: Path,
    out_dir: Path,
    cfg: PipelineConfig,
) -> dict[str, Path]:
    """Monthly-share table and figures next to the quadrant chart."""
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = read_counts_csv(counts_path)
    totals = MonthlyTotals.from_csv(totals_path)
    share = report_mod.build_share_report(green_counts_by_period(counts), totals)

    share_csv = out_dir / "share.csv"
    report_mod.write_share_csv(share, share_csv)
    share_summary = out_dir / "share_summary.json"
    report_mod.write_share_summary_json(share, share_summary)
    share_svg = out_dir / "share.svg"
    report_mod.share_figure(share, share_svg)

    growths = classify_mod.read_classification_csv(classification_path)
    tdata = json.loads(Path(thresholds_path).read_text(encoding="utf-8"))
    thresholds = classify_mod.Thresholds(
        tau_abs=float(tdata["tau_abs"]), tau_rel=float(tdata["tau_rel"]), quantile=float(tdata["quantile"])
    )
    quadrants_svg = out_dir / "quadrants.svg"
    report_mod.quadrant_figure(growths, thresholds, quadrants_svg, log_scale=cfg.log_scale_figure)

    outputs = {
        "share_csv": share_csv,
        "share_summary": share_summary,
        "share_svg": share_svg,
        "quadrants_svg": quadrants_svg,
    }
    inputs = {
        "counts": counts_path,
        "totals": totals_path,
        "classification": classification_path,
        "thresholds": thresholds_path,
    }
    write_manifest(out_dir, "report", inputs, outputs, cfg)
    return outputs


def run_all(
    records_path: Path, taxonomy_path: Path, totals_path: Path, out_dir: Path, cfg: PipelineConfig
) -> dict[str, Path]:
    """Chain match -> build -> eval -> forecast -> classify -> report.

    Between stages the consumed artifacts are re-hashed against the producing
    stage's manifest, so a file modified mid-run fails fast instead of
    feeding a stale or tampered artifact forward.
    """
    out_dir = Path(out_dir)
    artifacts = dict(stage_match(records_path, taxonomy_path, out_dir, cfg))

    assignments = check_stage_output(out_dir, "match", "assignments")
    taxonomy_json = check_stage_output(out_dir, "match", "taxonomy")
    artifacts.update(stage_build(assignments, taxonomy_json, totals_path, out_dir, cfg))

    normalized = check_stage_output(out_dir, "build", "normalized")
    artifacts.update(stage_eval(normalized, out_dir, cfg))
    artifacts.update(stage_forecast(normalized, out_dir, cfg))

    forecasts = check_stage_output(out_dir, "forecast", "forecasts")
    variant_map = check_stage_output(out_dir, "match", "variant_map")
    artifacts.update(stage_classify(normalized, forecasts, out_dir, cfg, variant_map_path=variant_map))

    counts = check_stage_output(out_dir, "build", "counts")
    classification = check_stage_output(out_dir, "classify", "classification")
    thresholds = check_stage_output(out_dir, "classify", "thresholds")
    artifacts.update(stage_report(counts, totals_path, classification, thresholds, out_dir, cfg))
    return artifacts
