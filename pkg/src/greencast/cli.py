"""Command-line interface: one command per pipeline stage plus run-all.

Exit codes: 0 success, 1 configuration or validation error, 2 input error,
3 remote backend failure. Remote backends read credentials from the
EMBED_API_KEY and CHAT_API_KEY environment variables.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import __version__, pipeline
from .config import load_config
from .errors import GreencastError


def _fail_with_code(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GreencastError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _config(config_path, **overrides):
    return load_config(config_path, overrides)


def _echo_outputs(outputs: dict) -> None:
    for name in sorted(outputs):
        click.echo(f"{name}: {outputs[name]}")


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=False), default=None,
    help="YAML config file; flags override its values.",
)
out_option = click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory.")
seed_option = click.option("--seed", type=int, default=None, help="Random seed (default 42).")


@click.group()
@click.version_option(version=__version__, prog_name="greencast")
def main():
    """Green-skill demand pipeline: match, aggregate, forecast, classify."""


@main.command()
@click.option("--postings", type=click.Path(), required=True, help="Raw postings CSV or JSONL.")
@out_option
@config_option
@click.option("--chat-url", default=None, help="Chat-completion endpoint URL.")
@click.option("--chat-model", default=None, help="Chat model name.")
@_fail_with_code
def extract(postings, out_dir, config_path, chat_url, chat_model):
    """Extract skill records from raw postings (needs CHAT_API_KEY)."""
    cfg = _config(config_path, chat_url=chat_url, chat_model=chat_model)
    _echo_outputs(pipeline.stage_extract(Path(postings), Path(out_dir), cfg))


@main.command()
@click.option("--records", type=click.Path(), required=True, help="Skill records CSV or JSONL.")
@click.option("--taxonomy", type=click.Path(), required=True, help="Taxonomy CSV (or cached JSON).")
@out_option
@config_option
@seed_option
@click.option("--match-backend", type=click.Choice(["local_rule", "remote_llm"]), default=None)
@click.option("--match-threshold", type=float, default=None, help="Cosine acceptance threshold (local rule).")
@click.option("--variant-threshold", type=float, default=None, help="Cosine threshold for variant merging.")
@click.option("--candidates", type=int, default=None, help="Candidates retrieved per skill.")
@click.option("--n-workers", type=int, default=None, help="Parallel matching workers.")
@click.option("--embed-backend", type=click.Choice(["local", "remote"]), default=None)
@click.option("--embed-dim", type=int, default=None, help="Local embedding buckets.")
@click.option("--embed-url", default=None, help="Remote embedding endpoint URL.")
@click.option("--embed-model", default=None, help="Remote embedding model name.")
@click.option("--chat-url", default=None)
@click.option("--chat-model", default=None)
@_fail_with_code
def match(records, taxonomy, out_dir, config_path, **overrides):
    """Merge skill variants and match records against the taxonomy."""
    cfg = _config(config_path, **overrides)
    _echo_outputs(pipeline.stage_match(Path(records), Path(taxonomy), Path(out_dir), cfg))


@main.command()
@click.option("--assignments", type=click.Path(), required=True, help="Accepted assignments CSV.")
@click.option("--taxonomy", type=click.Path(), required=True, help="Taxonomy CSV or cached JSON.")
@click.option("--totals", type=click.Path(), required=True, help="Monthly totals CSV (period,total).")
@out_option
@config_option
@click.option("--period-policy", type=click.Choice(["observed_only", "zero_fill_gaps"]), default=None)
@_fail_with_code
def build(assignments, taxonomy, totals, out_dir, config_path, period_policy):
    """Aggregate assignments into count and normalized share matrices."""
    cfg = _config(config_path, period_policy=period_policy)
    _echo_outputs(
        pipeline.stage_build(Path(assignments), Path(taxonomy), Path(totals), Path(out_dir), cfg)
    )


@main.command(name="eval")
@click.option("--normalized", type=click.Path(), required=True, help="Normalized share matrix CSV.")
@out_option
@config_option
@seed_option
@click.option("--models", default=None, help="Comma-separated model names.")
@click.option("--seq-lens", default=None, help="Comma-separated context lengths, e.g. 4,6.")
@click.option("--pred-len", type=int, default=None, help="Forecast steps per origin.")
@click.option("--train-frac", type=float, default=None, help="Leading share of origins used to fit.")
@click.option("--standardize", is_flag=True, default=None, help="Z-score each context window.")
@click.option("--predictions", type=click.Path(), default=None,
              help="Score an external predictions CSV (skill_id,origin_t,step,value).")
@_fail_with_code
def eval_cmd(normalized, out_dir, config_path, predictions, **overrides):
    """Rolling-origin evaluation of forecasters over every series."""
    cfg = _config(config_path, **overrides)
    predictions_path = Path(predictions) if predictions else None
    _echo_outputs(pipeline.stage_eval(Path(normalized), Path(out_dir), cfg, predictions_path))


@main.command()
@click.option("--normalized", type=click.Path(), required=True, help="Normalized share matrix CSV.")
@out_option
@config_option
@seed_option
@click.option("--model", "forecast_model", default=None, help="Forecaster for the extension.")
@click.option("--seq-len", "forecast_seq_len", type=int, default=None, help="Context length.")
@click.option("--horizon", type=int, default=None, help="Months to extend (default 6).")
@_fail_with_code
def forecast(normalized, out_dir, config_path, **overrides):
    """Extend every series by the configured horizon."""
    cfg = _config(config_path, **overrides)
    _echo_outputs(pipeline.stage_forecast(Path(normalized), Path(out_dir), cfg))


@main.command()
@click.option("--normalized", type=click.Path(), required=True, help="Normalized share matrix CSV.")
@click.option("--forecasts", type=click.Path(), required=True, help="Forecast extension CSV.")
@out_option
@config_option
@click.option("--variant-map", type=click.Path(), default=None, help="variant_map.csv for labels.")
@click.option("--history-months", type=int, default=None, help="History window (default 12).")
@click.option("--forecast-months", type=int, default=None, help="Forecast window (default 6).")
@click.option("--quantile", type=float, default=None, help="Threshold percentile (default 0.75).")
@_fail_with_code
def classify(normalized, forecasts, out_dir, config_path, variant_map, **overrides):
    """Growth metrics, percentile thresholds, quadrants, rankings."""
    cfg = _config(config_path, **overrides)
    variant_path = Path(variant_map) if variant_map else None
    _echo_outputs(
        pipeline.stage_classify(Path(normalized), Path(forecasts), Path(out_dir), cfg, variant_path)
    )


@main.command()
@click.option("--counts", type=click.Path(), required=True, help="Count matrix CSV.")
@click.option("--totals", type=click.Path(), required=True, help="Monthly totals CSV.")
@click.option("--classification", type=click.Path(), required=True, help="Classification CSV.")
@click.option("--thresholds", type=click.Path(), required=True, help="Thresholds JSON.")
@out_option
@config_option
@click.option("--log-scale", "log_scale_figure", is_flag=True, default=None,
              help="Symlog axes on the quadrant chart.")
@_fail_with_code
def report(counts, totals, classification, thresholds, out_dir, config_path, log_scale_figure):
    """Monthly-share table plus share and quadrant figures."""
    cfg = _config(config_path, log_scale_figure=log_scale_figure)
    _echo_outputs(
        pipeline.stage_report(
            Path(counts), Path(totals), Path(classification), Path(thresholds), Path(out_dir), cfg
        )
    )


@main.command(name="run-all")
@click.option("--records", type=click.Path(), required=True, help="Skill records CSV or JSONL.")
@click.option("--taxonomy", type=click.Path(), required=True, help="Taxonomy CSV.")
@click.option("--totals", type=click.Path(), required=True, help="Monthly totals CSV.")
@out_option
@config_option
@seed_option
@click.option("--n-workers", type=int, default=None, help="Parallel matching workers.")
@click.option("--match-threshold", type=float, default=None)
@click.option("--variant-threshold", type=float, default=None)
@click.option("--model", "forecast_model", default=None, help="Forecaster for the extension stage.")
@click.option("--horizon", type=int, default=None)
@click.option("--log-scale", "log_scale_figure", is_flag=True, default=None)
@_fail_with_code
def run_all(records, taxonomy, totals, out_dir, config_path, **overrides):
    """Run match, build, eval, forecast, classify, and report in sequence."""
    cfg = _config(config_path, **overrides)
    _echo_outputs(pipeline.run_all(Path(records), Path(taxonomy), Path(totals), Path(out_dir), cfg))


if __name__ == "__main__":
    main()
